//! The MixedGrad epoch solver.
//!
//! Each epoch recenters the problem at the current anchor `w̄_k` and
//! approximately solves
//!
//! ```text
//! F_k(w) = (λ_k/2)||w||² + λ_k<w, w̄_k> + G(w + w̄_k)
//!     over W_k = { w : ||w + w̄_k|| <= R, ||w|| <= Δ_k }
//! ```
//!
//! with projected stochastic steps. One full gradient per epoch gives the
//! anchor gradient `g_k = λ_k w̄_k + ∇G(w̄_k)`; every inner step then uses the
//! variance-reduced estimate `g_k + ∇g_i(w + w̄_k) - ∇g_i(w̄_k)`, whose noise
//! shrinks with `||w||`. The epoch result is the uniform average of the
//! `T_k + 1` inner iterates. Between epochs `Δ`, `λ` and `η` are divided by
//! `γ` and the inner iteration count is multiplied by `γ²`.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::geometry::{norm, project_ball, project_epoch_domain, EpochDomain};
use crate::losses::ProblemInstance;
use crate::oracle::{full_grad, OracleCounters, SeededSampler};
use crate::trace::RunTrace;

/// Largest admissible failure probability in theory mode, `e^{-9/2}`.
pub fn max_failure_probability() -> f64 {
    (-4.5f64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedGradConfig {
    pub eta1: f64,
    pub delta1: f64,
    pub t1: u64,
    pub epochs: usize,
    pub lambda1: f64,
    pub gamma: f64,
    /// Inner-loop checkpoint spacing; epoch boundaries are always recorded.
    pub checkpoint_stride: u64,
}

impl MixedGradConfig {
    /// Practical defaults: `γ = 2`, `λ1 = β`, `Δ1 = R`, `η1 = 1 / (2(β + λ1))`.
    pub fn practical(instance: &ProblemInstance, t1: u64, epochs: usize) -> Self {
        let beta = instance.smoothness();
        MixedGradConfig {
            eta1: 1.0 / (4.0 * beta),
            delta1: instance.domain_radius(),
            t1,
            epochs,
            lambda1: beta,
            gamma: 2.0,
            checkpoint_stride: t1.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("eta1", self.eta1)?;
        positive("delta1", self.delta1)?;
        positive("lambda1", self.lambda1)?;
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if self.t1 == 0 {
            return Err(Error::InvalidConfig("t1 must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.checkpoint_stride == 0 {
            return Err(Error::InvalidConfig("checkpoint_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Inner iteration counts `T_1, ..., T_m` under the `γ²` growth rule.
    pub fn inner_iterations(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.epochs);
        let mut t = self.t1;
        for _ in 0..self.epochs {
            out.push(t);
            t = grow_iterations(t, self.gamma);
        }
        out
    }

    /// `T_1 (γ^{2m} - 1) / (γ² - 1)` when every `γ² T_k` is an integer.
    pub fn expected_stochastic_calls(&self) -> Option<u64> {
        let mut t = self.t1 as f64;
        for _ in 1..self.epochs {
            let next = t * self.gamma * self.gamma;
            if next.fract() != 0.0 {
                return None;
            }
            t = next;
        }
        Some(self.inner_iterations().iter().sum())
    }
}

fn grow_iterations(t: u64, gamma: f64) -> u64 {
    (t as f64 * gamma * gamma).round() as u64
}

/// Parameters fixed by the convergence guarantee: `γ = 2`, `λ1 = 16β`,
/// `Δ1 = R`, `T1 = ⌈300 ln(m/δ)⌉` and `η1 = 1/(2β√(3T1))`.
pub fn theory_params(beta: f64, radius: f64, delta: f64, epochs: usize) -> Result<MixedGradConfig> {
    if !(delta > 0.0 && delta <= max_failure_probability()) {
        return Err(Error::InvalidConfig(format!(
            "failure probability must lie in (0, e^-4.5], got {delta}"
        )));
    }
    if epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    if !(beta > 0.0 && radius > 0.0) {
        return Err(Error::InvalidConfig("beta and R must be positive".into()));
    }
    let t1 = (300.0 * (epochs as f64 / delta).ln()).ceil() as u64;
    Ok(MixedGradConfig {
        eta1: 1.0 / (2.0 * beta * (3.0 * t1 as f64).sqrt()),
        delta1: radius,
        t1,
        epochs,
        lambda1: 16.0 * beta,
        gamma: 2.0,
        checkpoint_stride: t1,
    })
}

/// Schedule values and anchor for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochState {
    pub epoch: usize,
    pub anchor: Array1<f64>,
    pub delta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub inner_iters: u64,
    /// `λ_k w̄_k + ∇G(w̄_k)`; refreshed by [`anchor_gradient`] at the start of
    /// every epoch.
    pub anchor_grad: Array1<f64>,
}

impl EpochState {
    pub fn initial(config: &MixedGradConfig, d: usize) -> Self {
        EpochState {
            epoch: 1,
            anchor: Array1::zeros(d),
            delta: config.delta1,
            lambda: config.lambda1,
            eta: config.eta1,
            inner_iters: config.t1,
            anchor_grad: Array1::zeros(d),
        }
    }
}

/// `λ w̄ + ∇G(w̄)`; one full-gradient oracle call.
pub fn anchor_gradient(
    instance: &ProblemInstance,
    anchor: ArrayView1<f64>,
    lambda: f64,
    counters: &mut OracleCounters,
) -> Result<Array1<f64>> {
    let mut g = full_grad(instance, anchor, counters)?;
    g.scaled_add(lambda, &anchor);
    Ok(g)
}

/// `g_k + ∇g_i(w + w̄) - ∇g_i(w̄)`. No oracle is charged: the stochastic call
/// was paid when `i` was sampled.
///
/// The correction is formed before it is added to `g_k`, so at `w = 0` the
/// result is bit-for-bit `g_k`.
pub fn vr_gradient(
    instance: &ProblemInstance,
    i: usize,
    w: ArrayView1<f64>,
    anchor: ArrayView1<f64>,
    anchor_grad: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if i >= instance.n() {
        return Err(Error::IndexOutOfRange { index: i, n: instance.n() });
    }
    instance.check_dim(&w)?;
    instance.check_dim(&anchor)?;
    instance.check_dim(&anchor_grad)?;
    let mut out = anchor_grad.to_owned();
    add_correction(instance, i, w, anchor, &mut out);
    Ok(out)
}

/// `out += ∇g_i(w + w̄) - ∇g_i(w̄)`, using that both gradients are multiples
/// of the same feature row.
fn add_correction(
    instance: &ProblemInstance,
    i: usize,
    w: ArrayView1<f64>,
    anchor: ArrayView1<f64>,
    out: &mut Array1<f64>,
) {
    let shifted = &w + &anchor;
    let coef = instance.grad_coef(i, shifted.view()) - instance.grad_coef(i, anchor);
    if coef != 0.0 {
        out.scaled_add(coef, &instance.dataset().row(i));
    }
}

/// One projected step `Π_{W_k}(w - η(λw + ĝ))`.
pub fn inner_step(
    w: ArrayView1<f64>,
    vr_grad: ArrayView1<f64>,
    lambda: f64,
    eta: f64,
    domain: &EpochDomain,
) -> Result<Array1<f64>> {
    if !vr_grad.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("stochastic gradient"));
    }
    let mut direction = vr_grad.to_owned();
    direction.scaled_add(lambda, &w);
    let mut next = w.to_owned();
    next.scaled_add(-eta, &direction);
    project_epoch_domain(next.view(), domain)
}

/// Per-epoch diagnostics collected while the inner loop runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub delta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub inner_iters: u64,
    /// `max_t ||∇ĝ_i(w_t) + λ w_t||²` over the epoch.
    pub max_step_norm_sq: f64,
    /// Largest constraint violation of any inner iterate.
    pub max_violation: f64,
    /// Norm of the averaged increment `w̃_{k+1}`.
    pub increment_norm: f64,
}

/// Runs the inner loop of one epoch from `w = 0` and returns the average of
/// the `T_k + 1` iterates together with diagnostics.
///
/// `state.anchor_grad` must already hold the anchor gradient of this epoch.
pub fn run_epoch(
    instance: &ProblemInstance,
    state: &EpochState,
    checkpoint_stride: u64,
    sampler: &mut SeededSampler,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<(Array1<f64>, EpochReport)> {
    let d = instance.d();
    let domain = EpochDomain::new(
        state.anchor.clone(),
        instance.domain_radius(),
        state.delta,
    )?;
    let anchor = state.anchor.view();
    let mut w = Array1::<f64>::zeros(d);
    let mut average = Array1::<f64>::zeros(d);
    let mut report = EpochReport {
        epoch: state.epoch,
        delta: state.delta,
        lambda: state.lambda,
        eta: state.eta,
        inner_iters: state.inner_iters,
        max_step_norm_sq: 0.0,
        max_violation: 0.0,
        increment_norm: 0.0,
    };

    for t in 1..=state.inner_iters {
        let i = sampler.sample_loss(counters, instance.n())?;
        let mut correction = Array1::<f64>::zeros(d);
        add_correction(instance, i, w.view(), anchor, &mut correction);
        let mut step_dir = correction.clone();
        step_dir.scaled_add(state.lambda, &w);
        report.max_step_norm_sq = report.max_step_norm_sq.max(step_dir.dot(&step_dir));

        let vr = &state.anchor_grad + &correction;
        w = inner_step(w.view(), vr.view(), state.lambda, state.eta, &domain).map_err(
            |e| match e {
                Error::NonFinite(_) => Error::Diverged {
                    epoch: state.epoch,
                    step: t as usize,
                },
                other => other,
            },
        )?;
        report.max_violation = report.max_violation.max(domain.violation(w.view()));

        // running mean over w^1 = 0, w^2, ..., w^{t+1}
        let count = (t + 1) as f64;
        average.zip_mut_with(&w, |a, &x| *a += (x - *a) / count);

        if t % checkpoint_stride == 0 && t < state.inner_iters {
            let point = &anchor + &w;
            trace.push(state.epoch, t, counters, instance.full_objective(point.view())?);
        }
    }
    report.increment_norm = norm(average.view());
    Ok((average, report))
}

/// Moves the anchor by the epoch average and shrinks the schedule:
/// `Δ, λ, η ← ·/γ` and `T ← round(γ² T)`.
pub fn shrink_schedule(state: &EpochState, gamma: f64, increment: ArrayView1<f64>) -> EpochState {
    EpochState {
        epoch: state.epoch + 1,
        anchor: &state.anchor + &increment,
        delta: state.delta / gamma,
        lambda: state.lambda / gamma,
        eta: state.eta / gamma,
        inner_iters: grow_iterations(state.inner_iters, gamma),
        anchor_grad: state.anchor_grad.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// `w̄_{m+1}`.
    pub point: Array1<f64>,
    pub trace: RunTrace,
    pub counters: OracleCounters,
    pub epochs: Vec<EpochReport>,
    /// Anchors `w̄_1, ..., w̄_{m+1}`.
    pub anchors: Vec<Array1<f64>>,
}

/// Runs MixedGrad for `config.epochs` epochs with a fresh sampler seeded by
/// `seed`.
pub fn run(instance: &ProblemInstance, config: &MixedGradConfig, seed: u64) -> Result<RunOutcome> {
    let mut counters = OracleCounters::new();
    let mut trace = RunTrace::new("mixedgrad", seed);
    let (point, epochs, anchors) = run_into(instance, config, seed, &mut counters, &mut trace)?;
    Ok(RunOutcome {
        point,
        trace,
        counters,
        epochs,
        anchors,
    })
}

/// Final point, per-epoch reports and anchors `w̄_1, ..., w̄_{m+1}`.
pub type RunParts = (Array1<f64>, Vec<EpochReport>, Vec<Array1<f64>>);

/// Like [`run`] but writes into caller-owned counters and trace, so a
/// partial trace survives a divergence.
pub fn run_into(
    instance: &ProblemInstance,
    config: &MixedGradConfig,
    seed: u64,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<RunParts> {
    config.validate()?;
    let radius = instance.domain_radius();
    let mut sampler = SeededSampler::new(seed);
    let mut state = EpochState::initial(config, instance.d());
    let mut reports = Vec::with_capacity(config.epochs);
    let mut anchors = vec![state.anchor.clone()];
    trace.push(1, 0, counters, instance.full_objective(state.anchor.view())?);

    for _ in 0..config.epochs {
        state.anchor_grad = anchor_gradient(instance, state.anchor.view(), state.lambda, counters)?;
        if !state.anchor_grad.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { epoch: state.epoch, step: 0 });
        }
        let (increment, report) =
            run_epoch(instance, &state, config.checkpoint_stride, &mut sampler, counters, trace)?;
        reports.push(report);
        state = shrink_schedule(&state, config.gamma, increment.view());
        // The new anchor averages points of the R-ball; only rounding can
        // push it outside.
        if norm(state.anchor.view()) > radius {
            state.anchor = project_ball(state.anchor.view(), radius)?;
        }
        anchors.push(state.anchor.clone());
        trace.push(state.epoch, 0, counters, instance.full_objective(state.anchor.view())?);
    }
    Ok((state.anchor, reports, anchors))
}

/// `F(w) = (λ/2)||w||² + λ<w, w̄> + G(w + w̄)`.
pub fn epoch_objective(
    instance: &ProblemInstance,
    anchor: ArrayView1<f64>,
    lambda: f64,
    w: ArrayView1<f64>,
) -> Result<f64> {
    let shifted = &w + &anchor;
    Ok(0.5 * lambda * w.dot(&w) + lambda * w.dot(&anchor) + instance.full_objective(shifted.view())?)
}

/// `∇F(w) = λw + λw̄ + ∇G(w + w̄)`, without oracle accounting.
pub fn epoch_objective_grad(
    instance: &ProblemInstance,
    anchor: ArrayView1<f64>,
    lambda: f64,
    w: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let shifted = &w + &anchor;
    let mut g = instance.full_gradient(shifted.view())?;
    g.scaled_add(lambda, &shifted);
    Ok(g)
}
