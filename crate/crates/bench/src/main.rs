use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mixedgrad::bench::experiment::{run_experiment, ExperimentSpec, InstanceSource, SolverSpec};
use mixedgrad::bench::slope::fit_slope;
use mixedgrad::bench::synthetic::{gen_synthetic, SyntheticParams};
use mixedgrad::losses::LossKind;
use mixedgrad::trace::{RunStatus, RunTrace, TraceField};

#[derive(Parser)]
#[command(name = "bench", version, about = "MixedGrad benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV (`y,x1,...,xd`).
    Gen(GenArgs),
    /// Run solvers against a certified reference optimum.
    Run(RunArgs),
    /// Fit a log-log slope to a trace file.
    Fit(FitArgs),
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value = "ls", value_parser = parse_loss)]
    loss: LossKind,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Sampler seeds; repeat or comma-separate for several runs per solver.
    #[arg(long = "seed", value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Seed of the synthetic instance.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Read the dataset from CSV instead of generating one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// `<name>[:key=val,...]` with name in mixedgrad, sgd, gd, nag.
    #[arg(long = "solver", default_value = "mixedgrad")]
    solvers: Vec<String>,
    /// Default MixedGrad epoch count m.
    #[arg(long)]
    epochs: Option<usize>,
    /// Default MixedGrad first-epoch length T1.
    #[arg(long)]
    t1: Option<u64>,
    /// Default MixedGrad shrink factor.
    #[arg(long)]
    gamma: Option<f64>,
    /// Use the theoretical parameterization for MixedGrad.
    #[arg(long, requires = "delta")]
    theory_mode: bool,
    /// Failure probability for theory mode.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    ref_tol: f64,
    /// Output directory for traces and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV file.
    trace: PathBuf,
    #[arg(long, default_value = "stoch_calls")]
    x: String,
    #[arg(long, default_value = "error")]
    y: String,
    #[arg(long, default_value_t = 0)]
    skip_head: usize,
    /// Keep only epoch-boundary rows (`step == 0`).
    #[arg(long)]
    epochs_only: bool,
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    s.parse().map_err(|e: mixedgrad::Error| e.to_string())
}

fn synthetic(seed: u64, a: &InstanceArgs) -> SyntheticParams {
    SyntheticParams {
        seed,
        n: a.n,
        d: a.d,
        noise_sd: a.noise,
        loss_kind: a.loss,
        radius: a.radius,
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let s = gen_synthetic(&synthetic(args.seed, &args.instance))?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    s.instance.dataset().write_csv(file)?;
    println!(
        "wrote {} examples, d = {}, beta = {} to {}",
        s.instance.n(),
        s.instance.d(),
        s.instance.smoothness(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    if args.delta.is_some() && !args.theory_mode {
        bail!("--delta only applies with --theory-mode");
    }
    let mut solvers = Vec::new();
    for s in &args.solvers {
        let mut spec: SolverSpec = s.parse().with_context(|| format!("solver `{s}`"))?;
        if let SolverSpec::MixedGrad(m) = &mut spec {
            m.epochs = m.epochs.or(args.epochs);
            if args.theory_mode {
                m.theory_delta = m.theory_delta.or(args.delta);
            } else {
                m.t1 = m.t1.or(args.t1);
                m.gamma = m.gamma.or(args.gamma);
            }
        }
        solvers.push(spec);
    }
    let source = match args.data {
        Some(path) => InstanceSource::Csv {
            path,
            loss_kind: args.instance.loss,
            radius: args.instance.radius,
        },
        None => InstanceSource::Synthetic(synthetic(args.instance_seed, &args.instance)),
    };
    let spec = ExperimentSpec {
        source,
        solvers,
        seeds: args.seeds,
        out_dir: args.out,
        reference_tol: args.ref_tol,
    };
    let report = run_experiment(&spec)?;
    println!(
        "reference G* = {:.6e} (residual {:.1e}, {} iterations)",
        report.reference.value, report.reference.residual, report.reference.iterations
    );
    println!("{:<10} {:>6} {:>14} {:>12} {:>10} {:>9}", "solver", "seed", "final_error", "stoch", "full", "ms");
    for r in &report.runs {
        let err = match r.status {
            RunStatus::Ok => format!("{:.6e}", r.final_error),
            RunStatus::Diverged => "diverged".to_string(),
        };
        println!(
            "{:<10} {:>6} {:>14} {:>12} {:>10} {:>9}",
            r.solver, r.seed, err, r.stoch_calls, r.full_calls, r.wall_ms
        );
    }
    println!("summary: {}", report.summary_path.display());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let trace = RunTrace::read_csv(file)?;
    let x: TraceField = args.x.parse()?;
    let y: TraceField = args.y.parse()?;
    let records: Vec<_> = trace
        .records
        .iter()
        .filter(|r| !args.epochs_only || r.step == 0)
        .copied()
        .collect();
    let fit = fit_slope(&records, x, y, args.skip_head)?;
    println!(
        "{} seed {}: slope {:.4}, intercept {:.4}, r2 {:.4}, points {} ({:.3e}..{:.3e}), clipped {}",
        trace.solver,
        trace.seed,
        fit.slope,
        fit.intercept,
        fit.r_squared,
        fit.points_used,
        fit.first_x,
        fit.last_x,
        fit.clipped
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Fit(a) => cmd_fit(a),
    }
}
