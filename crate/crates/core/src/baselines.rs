//! Reference solvers: projected SGD with iterate averaging, projected GD and
//! Nesterov's accelerated projected gradient method.
//!
//! The accelerated scheme is the constant-step recursion
//!
//! ```text
//! x_t     = Π(y_t - ∇G(y_t)/β)
//! θ_{t+1} = (1 + sqrt(1 + 4θ_t²)) / 2,            θ_1 = 1
//! y_{t+1} = x_t + ((θ_t - 1)/θ_{t+1}) (x_t - x_{t-1})
//! ```
//!
//! so the first step coincides with a plain gradient step.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::geometry::{norm, project_ball};
use crate::losses::ProblemInstance;
use crate::oracle::{full_grad, OracleCounters, SeededSampler};
use crate::trace::{Checkpoints, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sgd,
    Gd,
    Nag,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Gd => "gd",
            Method::Nag => "nag",
        }
    }
}

/// SGD step-size rule; GD and NAG always use `1/β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant(f64),
    /// `c / sqrt(t)` for `t = 1, 2, ...`
    InvSqrtT(f64),
}

impl StepRule {
    fn step(&self, t: u64) -> f64 {
        match *self {
            StepRule::Constant(c) => c,
            StepRule::InvSqrtT(c) => c / (t as f64).sqrt(),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            StepRule::Constant(c) | StepRule::InvSqrtT(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: Method,
    pub iterations: u64,
    pub step_rule: StepRule,
    /// SGD only: report the uniform average of `w_1, ..., w_T`.
    pub averaging: bool,
    pub checkpoints: Checkpoints,
}

impl BaselineConfig {
    /// Averaged SGD with `η_t = c/√t` and `c = R√n/β`.
    pub fn sgd(instance: &ProblemInstance, iterations: u64) -> Self {
        let c = instance.domain_radius() * (instance.n() as f64).sqrt() / instance.smoothness();
        BaselineConfig {
            method: Method::Sgd,
            iterations,
            step_rule: StepRule::InvSqrtT(c),
            averaging: true,
            checkpoints: Checkpoints::Geometric { per_decade: 10 },
        }
    }

    pub fn gd(iterations: u64) -> Self {
        BaselineConfig {
            method: Method::Gd,
            iterations,
            step_rule: StepRule::Constant(1.0),
            averaging: false,
            checkpoints: Checkpoints::Geometric { per_decade: 10 },
        }
    }

    pub fn nag(iterations: u64) -> Self {
        BaselineConfig {
            method: Method::Nag,
            ..Self::gd(iterations)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        let c = self.step_rule.scale();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("step scale must be positive, got {c}")));
        }
        Ok(())
    }

    fn expect(&self, method: Method) -> Result<()> {
        self.validate()?;
        if self.method != method {
            return Err(Error::InvalidConfig(format!(
                "config is for {}, not {}",
                self.method.name(),
                method.name()
            )));
        }
        Ok(())
    }
}

fn diverged(t: u64) -> Error {
    Error::Diverged {
        epoch: 0,
        step: t as usize,
    }
}

fn finite_or_diverged(v: &Array1<f64>, t: u64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(diverged(t))
    }
}

/// Projected SGD, `w_{t+1} = Π_R(w_t - η_t ∇g_{i_t}(w_t))` from `w_0 = 0`.
pub fn run_sgd(
    instance: &ProblemInstance,
    config: &BaselineConfig,
    seed: u64,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<Array1<f64>> {
    config.expect(Method::Sgd)?;
    let radius = instance.domain_radius();
    let mut sampler = SeededSampler::new(seed);
    let mut w = Array1::<f64>::zeros(instance.d());
    let mut average = w.clone();
    trace.push(0, 0, counters, instance.full_objective(w.view())?);

    for t in 1..=config.iterations {
        let i = sampler.sample_loss(counters, instance.n())?;
        let eta = config.step_rule.step(t);
        let mut next = w.clone();
        instance.add_loss_grad(i, w.view(), -eta, &mut next);
        finite_or_diverged(&next, t)?;
        w = project_ball(next.view(), radius)?;
        average.zip_mut_with(&w, |a, &x| *a += (x - *a) / t as f64);

        if config.checkpoints.hits(t) || t == config.iterations {
            let reported = if config.averaging { &average } else { &w };
            trace.push(0, t, counters, instance.full_objective(reported.view())?);
        }
    }
    Ok(if config.averaging { average } else { w })
}

/// Projected full-gradient descent with `η = 1/β` from `w_0 = 0`.
pub fn run_gd(
    instance: &ProblemInstance,
    config: &BaselineConfig,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<Array1<f64>> {
    config.expect(Method::Gd)?;
    let radius = instance.domain_radius();
    let eta = 1.0 / instance.smoothness();
    let mut w = Array1::<f64>::zeros(instance.d());
    trace.push(0, 0, counters, instance.full_objective(w.view())?);

    for t in 1..=config.iterations {
        let g = full_grad(instance, w.view(), counters)?;
        let mut next = w.clone();
        next.scaled_add(-eta, &g);
        finite_or_diverged(&next, t)?;
        w = project_ball(next.view(), radius)?;
        if config.checkpoints.hits(t) || t == config.iterations {
            trace.push(0, t, counters, instance.full_objective(w.view())?);
        }
    }
    Ok(w)
}

/// Nesterov's accelerated projected gradient with `η = 1/β` from `w_0 = 0`.
pub fn run_nag(
    instance: &ProblemInstance,
    config: &BaselineConfig,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<Array1<f64>> {
    config.expect(Method::Nag)?;
    let radius = instance.domain_radius();
    let mut nag = Nesterov::new(Array1::zeros(instance.d()), 1.0 / instance.smoothness(), false);
    trace.push(0, 0, counters, instance.full_objective(nag.point())?);

    for t in 1..=config.iterations {
        let g = full_grad(instance, nag.query(), counters)?;
        nag.advance(&g, |v| project_ball(v, radius))
            .map_err(|_| diverged(t))?;
        finite_or_diverged(nag.x(), t)?;
        if config.checkpoints.hits(t) || t == config.iterations {
            trace.push(0, t, counters, instance.full_objective(nag.point())?);
        }
    }
    Ok(nag.x().clone())
}

/// State of the accelerated projected gradient recursion.
#[derive(Debug, Clone)]
pub(crate) struct Nesterov {
    x: Array1<f64>,
    y: Array1<f64>,
    theta: f64,
    step: f64,
    /// Gradient-based adaptive restart: reset the momentum whenever it points
    /// against the last step.
    restart: bool,
}

impl Nesterov {
    pub(crate) fn new(x0: Array1<f64>, step: f64, restart: bool) -> Self {
        Nesterov {
            y: x0.clone(),
            x: x0,
            theta: 1.0,
            step,
            restart,
        }
    }

    /// Point at which the next gradient must be evaluated.
    pub(crate) fn query(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub(crate) fn point(&self) -> ArrayView1<'_, f64> {
        self.x.view()
    }

    pub(crate) fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub(crate) fn advance<P>(&mut self, grad_at_query: &Array1<f64>, project: P) -> Result<()>
    where
        P: Fn(ArrayView1<f64>) -> Result<Array1<f64>>,
    {
        let mut moved = self.y.clone();
        moved.scaled_add(-self.step, grad_at_query);
        let x_next = project(moved.view())?;
        let delta = &x_next - &self.x;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * self.theta * self.theta).sqrt());
        if self.restart && (&self.y - &x_next).dot(&delta) > 0.0 {
            self.theta = 1.0;
            self.y = x_next.clone();
        } else {
            let beta = (self.theta - 1.0) / theta_next;
            self.y = &x_next + &(delta * beta);
            self.theta = theta_next;
        }
        self.x = x_next;
        Ok(())
    }
}

/// Result of [`nesterov_minimize`].
#[derive(Debug, Clone)]
pub struct SmoothSolve {
    pub point: Array1<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// High-accuracy projected minimization of a smooth convex function with the
/// accelerated recursion plus adaptive restart. Stops once both the step
/// length and the objective decrease fall below `tol`.
pub fn nesterov_minimize<V, G, P>(
    x0: Array1<f64>,
    step: f64,
    tol: f64,
    max_iter: usize,
    value: V,
    grad: G,
    project: P,
) -> Result<SmoothSolve>
where
    V: Fn(ArrayView1<f64>) -> Result<f64>,
    G: Fn(ArrayView1<f64>) -> Result<Array1<f64>>,
    P: Fn(ArrayView1<f64>) -> Result<Array1<f64>>,
{
    let x0 = project(x0.view())?;
    let mut nag = Nesterov::new(x0, step, true);
    let mut f_prev = value(nag.point())?;
    for it in 1..=max_iter {
        let x_prev = nag.x().clone();
        let g = grad(nag.query())?;
        nag.advance(&g, &project)?;
        let f = value(nag.point())?;
        if !f.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        let moved = norm((nag.x() - &x_prev).view());
        if moved < tol && f_prev - f < tol {
            return Ok(SmoothSolve {
                point: nag.x().clone(),
                value: f,
                iterations: it,
            });
        }
        f_prev = f;
    }
    Err(Error::ReferenceNotConverged {
        iterations: max_iter,
        tolerance: tol,
    })
}
