//! Mixed stochastic/full-gradient optimization for smooth empirical risk
//! minimization.
//!
//! The crate provides the `MixedGrad` epoch solver, which combines a handful
//! of full-gradient evaluations with many variance-reduced stochastic steps,
//! together with the projected SGD, GD and Nesterov baselines and the
//! instrumentation used to measure their convergence rates.
//!
//! ```
//! use mixedgrad::bench::synthetic::{gen_synthetic, SyntheticParams};
//! use mixedgrad::losses::LossKind;
//! use mixedgrad::mixedgrad::{run, MixedGradConfig};
//!
//! let instance = gen_synthetic(&SyntheticParams {
//!     seed: 7,
//!     n: 50,
//!     d: 5,
//!     noise_sd: 0.0,
//!     loss_kind: LossKind::LeastSquares,
//!     radius: 1.0,
//! })
//! .unwrap()
//! .instance;
//! let config = MixedGradConfig::practical(&instance, 20, 4);
//! let outcome = run(&instance, &config, 1).unwrap();
//! assert_eq!(outcome.counters.full_calls(), 4);
//! ```

pub mod baselines;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod mixedgrad;
pub mod oracle;
pub mod trace;

pub use error::{Error, Result};
