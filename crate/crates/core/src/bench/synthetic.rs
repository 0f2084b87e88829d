use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::losses::{Dataset, LossKind, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub noise_sd: f64,
    pub loss_kind: LossKind,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance: ProblemInstance,
    /// Planted parameter vector, of norm `R/2`.
    pub planted: Array1<f64>,
}

fn gaussian_unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut *rng));
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Unit-norm Gaussian feature rows with labels generated by a planted vector
/// of norm `R/2`: `y = <w°, x> + noise` for least squares and
/// `y = sign(<w°, x> + noise)` for logistic loss.
pub fn gen_synthetic(params: &SyntheticParams) -> Result<SyntheticInstance> {
    if params.n == 0 || params.d == 0 {
        return Err(Error::InvalidConfig(format!(
            "n and d must be at least 1 (n={}, d={})",
            params.n, params.d
        )));
    }
    if !(params.noise_sd >= 0.0 && params.noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_sd must be >= 0, got {}", params.noise_sd)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let planted = gaussian_unit_vector(&mut rng, params.d) * (0.5 * params.radius);
    let mut features = Array2::zeros((params.n, params.d));
    let mut labels = Array1::zeros(params.n);
    for i in 0..params.n {
        let x = gaussian_unit_vector(&mut rng, params.d);
        let noise: f64 = StandardNormal.sample(&mut rng);
        let signal = x.dot(&planted) + params.noise_sd * noise;
        labels[i] = match params.loss_kind {
            LossKind::LeastSquares => signal,
            LossKind::Logistic => {
                if signal >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        features.row_mut(i).assign(&x);
    }
    let instance =
        ProblemInstance::new(Dataset::new(features, labels)?, params.loss_kind, params.radius)?;
    Ok(SyntheticInstance { instance, planted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kind: LossKind, noise: f64) -> SyntheticParams {
        SyntheticParams {
            seed: 17,
            n: 60,
            d: 6,
            noise_sd: noise,
            loss_kind: kind,
            radius: 2.0,
        }
    }

    #[test]
    fn noise_free_least_squares_interpolates() {
        let s = gen_synthetic(&params(LossKind::LeastSquares, 0.0)).unwrap();
        assert!(s.instance.full_objective(s.planted.view()).unwrap() < 1e-28);
        assert!((s.planted.dot(&s.planted).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(&params(LossKind::Logistic, 0.3)).unwrap();
        let b = gen_synthetic(&params(LossKind::Logistic, 0.3)).unwrap();
        assert_eq!(a.instance.dataset(), b.instance.dataset());
        let c = gen_synthetic(&SyntheticParams { seed: 18, ..params(LossKind::Logistic, 0.3) }).unwrap();
        assert_ne!(a.instance.dataset(), c.instance.dataset());
        assert!(a.instance.dataset().labels().iter().all(|&y| y == 1.0 || y == -1.0));
    }

    #[test]
    fn unit_rows_give_exact_smoothness() {
        let s = gen_synthetic(&params(LossKind::LeastSquares, 0.1)).unwrap();
        for row in s.instance.dataset().features().rows() {
            assert!((row.dot(&row) - 1.0).abs() < 1e-12);
        }
        assert!((s.instance.smoothness() - 2.0).abs() < 1e-12);
        let l = gen_synthetic(&params(LossKind::Logistic, 0.1)).unwrap();
        assert!((l.instance.smoothness() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(gen_synthetic(&SyntheticParams { n: 0, ..params(LossKind::LeastSquares, 0.0) }).is_err());
        assert!(gen_synthetic(&SyntheticParams { d: 0, ..params(LossKind::LeastSquares, 0.0) }).is_err());
        assert!(gen_synthetic(&SyntheticParams { noise_sd: -1.0, ..params(LossKind::LeastSquares, 0.0) }).is_err());
    }
}
