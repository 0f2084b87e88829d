//! Benchmark harness: synthetic problems, certified reference optima,
//! experiment orchestration and log-log slope fitting.

pub mod experiment;
pub mod reference;
pub mod slope;
pub mod synthetic;
