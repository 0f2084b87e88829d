use crate::error::{Error, Result};
use crate::trace::{TraceField, TraceRecord};

/// Errors below this magnitude are treated as numerically zero: they are
/// excluded from fits and counted in [`SlopeFit::clipped`].
pub const ERROR_FLOOR: f64 = 1e-14;

/// Least-squares line through `(log10 x, log10 error)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub first_x: f64,
    pub last_x: f64,
    pub clipped: usize,
}

/// Fits the log-log slope of `error_field` against `x_field` after dropping
/// the first `skip_head` records.
pub fn fit_slope(
    records: &[TraceRecord],
    x_field: TraceField,
    error_field: TraceField,
    skip_head: usize,
) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .skip(skip_head)
        .map(|r| (x_field.value(r), error_field.value(r)))
        .collect();
    fit_points(&points)
}

pub fn fit_points(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut used = Vec::with_capacity(points.len());
    let mut clipped = 0;
    for &(x, e) in points {
        if e.is_nan() || e < -ERROR_FLOOR {
            return Err(Error::NonPositiveError(e));
        }
        if e < ERROR_FLOOR {
            clipped += 1;
            continue;
        }
        if !(x > 0.0 && x.is_finite()) || used.last().is_some_and(|&(px, _)| x <= px) {
            return Err(Error::BadAbscissa);
        }
        used.push((x, e));
    }
    if used.len() < 4 {
        return Err(Error::TooFewPoints(used.len()));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|&(x, e)| (x.log10(), e.log10())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points_used: used.len(),
        first_x: used[0].0,
        last_x: used[used.len() - 1].0,
        clipped,
    })
}
