use ndarray::{Array1, ArrayView1};

use crate::baselines::{nesterov_minimize, SmoothSolve};
use crate::error::{Error, Result};
use crate::geometry::{norm, project_ball};
use crate::losses::ProblemInstance;
use crate::mixedgrad::{epoch_objective, epoch_objective_grad};

/// Iteration cap for the reference solve.
pub const REFERENCE_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct ReferenceOptimum {
    pub point: Array1<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `||w* - Π_R(w* - ∇G(w*)/β)||`
    pub residual: f64,
}

/// Projected-gradient residual, zero exactly at constrained minimizers.
pub fn projected_gradient_residual(instance: &ProblemInstance, w: ArrayView1<f64>) -> Result<f64> {
    let g = instance.full_gradient(w)?;
    let mut moved = w.to_owned();
    moved.scaled_add(-1.0 / instance.smoothness(), &g);
    let projected = project_ball(moved.view(), instance.domain_radius())?;
    Ok(norm((&w - &projected).view()))
}

/// Minimizes `G` over the `R`-ball with accelerated projected gradient (no
/// oracle accounting) and certifies the answer by its projected-gradient
/// residual, which must not exceed `10 * tolerance`.
pub fn compute_reference_optimum(instance: &ProblemInstance, tolerance: f64) -> Result<ReferenceOptimum> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tolerance}")));
    }
    let radius = instance.domain_radius();
    let sol = nesterov_minimize(
        Array1::zeros(instance.d()),
        1.0 / instance.smoothness(),
        tolerance,
        REFERENCE_MAX_ITER,
        |w| instance.full_objective(w),
        |w| instance.full_gradient(w),
        |w| project_ball(w, radius),
    )?;
    let residual = projected_gradient_residual(instance, sol.point.view())?;
    let bound = 10.0 * tolerance;
    if residual > bound {
        return Err(Error::ReferenceCertificate { residual, bound });
    }
    Ok(ReferenceOptimum {
        point: sol.point,
        value: sol.value,
        iterations: sol.iterations,
        residual,
    })
}

/// Minimizer of the epoch objective `F(v) = λ/2||v||² + λ<v, w̄> + G(v + w̄)`
/// over the shifted domain `{v : ||v + w̄|| <= R}` only, so that the size
/// of the result can be compared against the epoch radius.
pub fn epoch_minimizer(
    instance: &ProblemInstance,
    anchor: ArrayView1<f64>,
    lambda: f64,
    tolerance: f64,
) -> Result<SmoothSolve> {
    if !(tolerance > 0.0 && tolerance.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need tolerance > 0 and lambda >= 0 (got {tolerance}, {lambda})"
        )));
    }
    instance.check_dim(&anchor)?;
    let radius = instance.domain_radius();
    nesterov_minimize(
        Array1::zeros(instance.d()),
        1.0 / (instance.smoothness() + lambda),
        tolerance,
        REFERENCE_MAX_ITER,
        |v| epoch_objective(instance, anchor, lambda, v),
        |v| epoch_objective_grad(instance, anchor, lambda, v),
        |v| {
            let shifted = &v + &anchor;
            Ok(project_ball(shifted.view(), radius)? - anchor)
        },
    )
}
