//! The two oracles of the mixed access model: a stochastic oracle that hands
//! out a uniformly sampled example, and a full-gradient oracle. Every call is
//! tallied in [`OracleCounters`].

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::ProblemInstance;

/// Exact tallies of oracle calls. Counters only ever go up, one call at a time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCounters {
    stochastic_calls: u64,
    full_calls: u64,
}

impl OracleCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stochastic_calls(&self) -> u64 {
        self.stochastic_calls
    }

    pub fn full_calls(&self) -> u64 {
        self.full_calls
    }
}

/// Index sampler backed by ChaCha8 (`rand_chacha::ChaCha8Rng`), a
/// counter-based generator whose output stream depends only on the seed, so
/// index sequences are identical across runs and platforms.
#[derive(Debug, Clone)]
pub struct SeededSampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededSampler {
    pub fn new(seed: u64) -> Self {
        SeededSampler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stochastic oracle: draws `i` uniformly from `0..n` (with replacement)
    /// and charges one stochastic call. The caller then has access to
    /// `g_i` through [`ProblemInstance::loss_value`] and
    /// [`ProblemInstance::loss_grad`].
    pub fn sample_loss(&mut self, counters: &mut OracleCounters, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let i = self.rng.random_range(0..n);
        counters.stochastic_calls += 1;
        Ok(i)
    }
}

/// Full-gradient oracle: `grad G(w)`, charging one full call.
pub fn full_grad(
    instance: &ProblemInstance,
    w: ArrayView1<f64>,
    counters: &mut OracleCounters,
) -> Result<Array1<f64>> {
    let g = instance.full_gradient(w)?;
    counters.full_calls += 1;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{Dataset, LossKind};
    use ndarray::{array, Array2};

    fn toy() -> ProblemInstance {
        let x = array![[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1]];
        let y = array![0.2, -1.0, 0.4];
        ProblemInstance::new(Dataset::new(x, y).unwrap(), LossKind::LeastSquares, 3.0).unwrap()
    }

    #[test]
    fn single_example_always_zero() {
        let mut s = SeededSampler::new(5);
        let mut c = OracleCounters::new();
        for _ in 0..100 {
            assert_eq!(s.sample_loss(&mut c, 1).unwrap(), 0);
        }
        assert_eq!(c.stochastic_calls(), 100);
        assert_eq!(c.full_calls(), 0);
    }

    #[test]
    fn same_seed_same_sequence() {
        let draw = |seed| {
            let mut s = SeededSampler::new(seed);
            let mut c = OracleCounters::new();
            (0..3).map(|_| s.sample_loss(&mut c, 10).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(
            (0..5).map(&draw).collect::<Vec<_>>(),
            (0..5).map(|_| draw(42)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_examples_rejected() {
        let mut s = SeededSampler::new(0);
        let mut c = OracleCounters::new();
        assert!(s.sample_loss(&mut c, 0).is_err());
        assert_eq!(c.stochastic_calls(), 0);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut s = SeededSampler::new(2024);
        let mut c = OracleCounters::new();
        let mut hist = [0usize; 4];
        let draws = 100_000;
        for _ in 0..draws {
            hist[s.sample_loss(&mut c, 4).unwrap()] += 1;
        }
        let expected = draws as f64 / 4.0;
        let chi2: f64 = hist
            .iter()
            .map(|&h| (h as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        for h in hist {
            assert!((h as f64 / draws as f64 - 0.25).abs() <= 0.02);
        }
    }

    #[test]
    fn full_grad_counts_and_averages() {
        let p = toy();
        let w = array![0.3, -0.2];
        let mut c = OracleCounters::new();
        let g = full_grad(&p, w.view(), &mut c).unwrap();
        let g2 = full_grad(&p, w.view(), &mut c).unwrap();
        assert_eq!(g, g2);
        assert_eq!(c.full_calls(), 2);
        assert_eq!(c.stochastic_calls(), 0);

        let mut mean = Array1::<f64>::zeros(2);
        for i in 0..p.n() {
            mean += &p.loss_grad(i, w.view()).unwrap();
        }
        mean /= p.n() as f64;
        for j in 0..2 {
            assert!((mean[j] - g[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn full_grad_of_single_example() {
        let p = ProblemInstance::new(
            Dataset::new(array![[2.0, -1.0]], array![1.0]).unwrap(),
            LossKind::Logistic,
            1.0,
        )
        .unwrap();
        let w = array![0.1, 0.4];
        let mut c = OracleCounters::new();
        assert_eq!(
            full_grad(&p, w.view(), &mut c).unwrap(),
            p.loss_grad(0, w.view()).unwrap()
        );
        assert_eq!(c.full_calls(), 1);
    }

    #[test]
    fn full_grad_vanishes_at_interior_minimizer() {
        // Normal equations X^T X w = X^T y solved in closed form for d = 2.
        let x: Array2<f64> = array![[1.0, 0.5], [-0.3, 2.0], [0.7, -1.1], [0.2, 0.2]];
        let y = array![0.2, -0.4, 0.4, 0.1];
        let xtx = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let det = xtx[[0, 0]] * xtx[[1, 1]] - xtx[[0, 1]] * xtx[[1, 0]];
        let w = array![
            (xtx[[1, 1]] * xty[0] - xtx[[0, 1]] * xty[1]) / det,
            (xtx[[0, 0]] * xty[1] - xtx[[1, 0]] * xty[0]) / det
        ];
        let p = ProblemInstance::new(Dataset::new(x, y).unwrap(), LossKind::LeastSquares, 10.0)
            .unwrap();
        let mut c = OracleCounters::new();
        let g = full_grad(&p, w.view(), &mut c).unwrap();
        assert!(g.dot(&g).sqrt() <= 1e-8);
    }
}
