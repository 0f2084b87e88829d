use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use serde::Serialize;

use crate::baselines::{run_gd, run_nag, run_sgd, BaselineConfig, StepRule};
use crate::bench::reference::{compute_reference_optimum, ReferenceOptimum};
use crate::bench::synthetic::{gen_synthetic, SyntheticParams};
use crate::error::{Error, Result};
use crate::losses::{Dataset, LossKind, ProblemInstance};
use crate::mixedgrad::{run_into, theory_params, MixedGradConfig};
use crate::oracle::OracleCounters;
use crate::trace::{RunStatus, RunTrace};

/// Largest reference tolerance accepted by [`ExperimentSpec::validate`].
pub const MAX_REFERENCE_TOL: f64 = 1e-6;
pub const DEFAULT_T1: u64 = 100;
pub const DEFAULT_EPOCHS: usize = 6;
pub const DEFAULT_BASELINE_ITERS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Synthetic(SyntheticParams),
    Csv {
        path: PathBuf,
        loss_kind: LossKind,
        radius: f64,
    },
}

impl InstanceSource {
    pub fn load(&self) -> Result<ProblemInstance> {
        match self {
            InstanceSource::Synthetic(params) => Ok(gen_synthetic(params)?.instance),
            InstanceSource::Csv {
                path,
                loss_kind,
                radius,
            } => {
                let dataset = Dataset::read_csv(File::open(path)?)?;
                ProblemInstance::new(dataset, *loss_kind, *radius)
            }
        }
    }
}

/// MixedGrad knobs that are resolved against an instance. Unset fields fall
/// back to [`MixedGradConfig::practical`]; `theory_delta` switches to the
/// theoretical parameterization, which fixes everything but `epochs` and
/// `stride`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedGradSettings {
    pub t1: Option<u64>,
    pub epochs: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda1: Option<f64>,
    pub eta1: Option<f64>,
    pub delta1: Option<f64>,
    pub theory_delta: Option<f64>,
    pub stride: Option<u64>,
}

impl MixedGradSettings {
    pub fn resolve(&self, instance: &ProblemInstance) -> Result<MixedGradConfig> {
        let epochs = self.epochs.unwrap_or(DEFAULT_EPOCHS);
        let mut config = match self.theory_delta {
            Some(delta) => {
                if self.t1.is_some()
                    || self.gamma.is_some()
                    || self.lambda1.is_some()
                    || self.eta1.is_some()
                    || self.delta1.is_some()
                {
                    return Err(Error::InvalidConfig(
                        "theory mode fixes t1, gamma, lambda1, eta1 and delta1".into(),
                    ));
                }
                theory_params(instance.smoothness(), instance.domain_radius(), delta, epochs)?
            }
            None => {
                let mut c = MixedGradConfig::practical(instance, self.t1.unwrap_or(DEFAULT_T1), epochs);
                c.gamma = self.gamma.unwrap_or(c.gamma);
                c.lambda1 = self.lambda1.unwrap_or(c.lambda1);
                c.eta1 = self.eta1.unwrap_or(c.eta1);
                c.delta1 = self.delta1.unwrap_or(c.delta1);
                c
            }
        };
        if let Some(stride) = self.stride {
            config.checkpoint_stride = stride;
        }
        config.validate()?;
        Ok(config)
    }
}

/// One solver of an experiment, written on the command line as
/// `name[:key=value,...]`, e.g. `mixedgrad:t1=50,epochs=7` or
/// `sgd:iters=100000,c=0.5`.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    MixedGrad(MixedGradSettings),
    Sgd {
        iterations: u64,
        c: Option<f64>,
        averaging: bool,
    },
    Gd {
        iterations: u64,
    },
    Nag {
        iterations: u64,
    },
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::MixedGrad(_) => "mixedgrad",
            SolverSpec::Sgd { .. } => "sgd",
            SolverSpec::Gd { .. } => "gd",
            SolverSpec::Nag { .. } => "nag",
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl FromStr for SolverSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for item in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{item}`")))?;
            pairs.push((k.trim(), v.trim()));
        }
        let unknown = |k: &str| Error::InvalidConfig(format!("unknown option `{k}` for solver `{name}`"));
        match name {
            "mixedgrad" => {
                let mut m = MixedGradSettings::default();
                for (k, v) in pairs {
                    match k {
                        "t1" => m.t1 = Some(parse_value(k, v)?),
                        "epochs" => m.epochs = Some(parse_value(k, v)?),
                        "gamma" => m.gamma = Some(parse_value(k, v)?),
                        "lambda1" => m.lambda1 = Some(parse_value(k, v)?),
                        "eta1" => m.eta1 = Some(parse_value(k, v)?),
                        "delta1" => m.delta1 = Some(parse_value(k, v)?),
                        "theory" => m.theory_delta = Some(parse_value(k, v)?),
                        "stride" => m.stride = Some(parse_value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(SolverSpec::MixedGrad(m))
            }
            "sgd" => {
                let (mut iterations, mut c, mut averaging) = (DEFAULT_BASELINE_ITERS, None, true);
                for (k, v) in pairs {
                    match k {
                        "iters" => iterations = parse_value(k, v)?,
                        "c" => c = Some(parse_value(k, v)?),
                        "avg" => averaging = parse_value(k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(SolverSpec::Sgd {
                    iterations,
                    c,
                    averaging,
                })
            }
            "gd" | "nag" => {
                let mut iterations = DEFAULT_BASELINE_ITERS;
                for (k, v) in pairs {
                    match k {
                        "iters" => iterations = parse_value(k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(if name == "gd" {
                    SolverSpec::Gd { iterations }
                } else {
                    SolverSpec::Nag { iterations }
                })
            }
            _ => Err(Error::InvalidConfig(format!("unknown solver `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: InstanceSource,
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub reference_tol: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::InvalidConfig("at least one solver is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if !(self.reference_tol > 0.0 && self.reference_tol <= MAX_REFERENCE_TOL) {
            return Err(Error::InvalidConfig(format!(
                "reference tolerance must lie in (0, {MAX_REFERENCE_TOL:e}], got {}",
                self.reference_tol
            )));
        }
        Ok(())
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub solver: String,
    pub seed: u64,
    /// `G(final point) - G*`; NaN for diverged runs.
    pub final_error: f64,
    pub stoch_calls: u64,
    pub full_calls: u64,
    pub wall_ms: u64,
    #[serde(skip)]
    pub status: RunStatus,
    #[serde(skip)]
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub instance: ProblemInstance,
    pub reference: ReferenceOptimum,
    pub runs: Vec<RunSummary>,
    pub summary_path: PathBuf,
}

fn run_solver(
    instance: &ProblemInstance,
    solver: &SolverSpec,
    seed: u64,
    counters: &mut OracleCounters,
    trace: &mut RunTrace,
) -> Result<Array1<f64>> {
    match solver {
        SolverSpec::MixedGrad(settings) => {
            let config = settings.resolve(instance)?;
            run_into(instance, &config, seed, counters, trace).map(|(point, _, _)| point)
        }
        SolverSpec::Sgd {
            iterations,
            c,
            averaging,
        } => {
            let mut config = BaselineConfig::sgd(instance, *iterations);
            if let Some(c) = c {
                config.step_rule = StepRule::InvSqrtT(*c);
            }
            config.averaging = *averaging;
            run_sgd(instance, &config, seed, counters, trace)
        }
        SolverSpec::Gd { iterations } => run_gd(instance, &BaselineConfig::gd(*iterations), counters, trace),
        SolverSpec::Nag { iterations } => run_nag(instance, &BaselineConfig::nag(*iterations), counters, trace),
    }
}

fn trace_file_name(index: usize, solver: &SolverSpec, seed: u64) -> String {
    format!("{index:02}-{}-seed{seed}.csv", solver.name())
}

/// Runs every solver on every seed against a certified reference optimum,
/// writing one trace CSV per run plus `summary.csv` into `out_dir`.
/// Diverged runs are recorded rather than aborting the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let instance = spec.source.load()?;
    for solver in &spec.solvers {
        if let SolverSpec::MixedGrad(settings) = solver {
            settings.resolve(&instance)?;
        }
    }
    let reference = compute_reference_optimum(&instance, spec.reference_tol)?;
    std::fs::create_dir_all(&spec.out_dir)?;

    let mut runs = Vec::new();
    for (index, solver) in spec.solvers.iter().enumerate() {
        for &seed in &spec.seeds {
            let mut counters = OracleCounters::new();
            let mut trace = RunTrace::new(solver.name(), seed);
            let start = Instant::now();
            let outcome = run_solver(&instance, solver, seed, &mut counters, &mut trace);
            let wall_ms = start.elapsed().as_millis() as u64;
            let (final_error, status) = match outcome {
                Ok(point) => (instance.full_objective(point.view())? - reference.value, RunStatus::Ok),
                Err(Error::Diverged { epoch, step }) => {
                    trace.push_divergence(epoch, step as u64, &counters);
                    (f64::NAN, RunStatus::Diverged)
                }
                Err(e) => return Err(e),
            };
            trace.set_reference(reference.value);
            let trace_path = spec.out_dir.join(trace_file_name(index, solver, seed));
            trace.write_csv(File::create(&trace_path)?)?;
            runs.push(RunSummary {
                solver: solver.name().to_string(),
                seed,
                final_error,
                stoch_calls: counters.stochastic_calls(),
                full_calls: counters.full_calls(),
                wall_ms,
                status,
                trace_path,
            });
        }
    }

    let summary_path = spec.out_dir.join("summary.csv");
    write_summary(&summary_path, &runs)?;
    Ok(ExperimentReport {
        instance,
        reference,
        runs,
        summary_path,
    })
}

fn write_summary(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for run in runs {
        wtr.serialize(run)?;
    }
    wtr.flush()?;
    Ok(())
}
