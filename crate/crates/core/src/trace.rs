//! Checkpoint traces shared by every solver, and their CSV form
//! (`solver,seed,epoch,step,stoch_calls,full_calls,objective,error,status`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::OracleCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// One checkpoint. For MixedGrad, `step == 0` marks the anchor at the start
/// of `epoch` (equivalently the result of epoch `epoch - 1`); baselines use
/// `epoch == 0` and count iterations in `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    pub step: u64,
    pub stoch_calls: u64,
    pub full_calls: u64,
    pub objective: f64,
    /// `objective - G*`; NaN until a reference value is attached.
    pub error: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub solver: String,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(solver: impl Into<String>, seed: u64) -> Self {
        RunTrace {
            solver: solver.into(),
            seed,
            records: Vec::new(),
        }
    }

    /// Objective evaluations are instrumentation and never touch the counters.
    pub fn push(&mut self, epoch: usize, step: u64, counters: &OracleCounters, objective: f64) {
        self.records.push(TraceRecord {
            epoch,
            step,
            stoch_calls: counters.stochastic_calls(),
            full_calls: counters.full_calls(),
            objective,
            error: f64::NAN,
            status: RunStatus::Ok,
        });
    }

    pub fn push_divergence(&mut self, epoch: usize, step: u64, counters: &OracleCounters) {
        self.records.push(TraceRecord {
            epoch,
            step,
            stoch_calls: counters.stochastic_calls(),
            full_calls: counters.full_calls(),
            objective: f64::NAN,
            error: f64::NAN,
            status: RunStatus::Diverged,
        });
    }

    pub fn status(&self) -> RunStatus {
        self.records.last().map_or(RunStatus::Ok, |r| r.status)
    }

    /// Fills the error column as `objective - reference`.
    pub fn set_reference(&mut self, reference: f64) {
        for r in &mut self.records {
            r.error = r.objective - reference;
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(TraceRow {
                solver: self.solver.clone(),
                seed: self.seed,
                epoch: r.epoch,
                step: r.step,
                stoch_calls: r.stoch_calls,
                full_calls: r.full_calls,
                objective: r.objective,
                error: r.error,
                status: r.status,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses a single-run trace file. Rows must all carry the same solver
    /// and seed.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut trace: Option<RunTrace> = None;
        for row in rdr.deserialize() {
            let row: TraceRow = row?;
            let t = trace.get_or_insert_with(|| RunTrace::new(row.solver.clone(), row.seed));
            if t.solver != row.solver || t.seed != row.seed {
                return Err(Error::InvalidConfig(
                    "trace file mixes several runs".into(),
                ));
            }
            t.records.push(TraceRecord {
                epoch: row.epoch,
                step: row.step,
                stoch_calls: row.stoch_calls,
                full_calls: row.full_calls,
                objective: row.objective,
                error: row.error,
                status: row.status,
            });
        }
        trace.ok_or_else(|| Error::InvalidConfig("empty trace file".into()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    solver: String,
    seed: u64,
    epoch: usize,
    step: u64,
    stoch_calls: u64,
    full_calls: u64,
    objective: f64,
    error: f64,
    status: RunStatus,
}

/// When a solver writes a checkpoint. The final iteration is always recorded.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoints {
    /// Every `k`-th iteration.
    Stride(u64),
    /// Roughly log-spaced: iterations `round(10^(j / per_decade))`.
    Geometric { per_decade: u32 },
    /// Exactly these iterations.
    At(Vec<u64>),
}

impl Checkpoints {
    pub fn hits(&self, t: u64) -> bool {
        match self {
            Checkpoints::Stride(k) => *k > 0 && t.is_multiple_of(*k),
            Checkpoints::Geometric { per_decade } => {
                if t == 0 || *per_decade == 0 {
                    return false;
                }
                let pd = *per_decade as f64;
                let j = (pd * (t as f64).log10()).round();
                (10f64.powf(j / pd)).round() as u64 == t
            }
            Checkpoints::At(list) => list.contains(&t),
        }
    }
}

/// Numeric column of a trace record, used to pick slope-fit axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceField {
    Epoch,
    Step,
    StochCalls,
    FullCalls,
    Objective,
    Error,
}

impl TraceField {
    pub fn value(&self, r: &TraceRecord) -> f64 {
        match self {
            TraceField::Epoch => r.epoch as f64,
            TraceField::Step => r.step as f64,
            TraceField::StochCalls => r.stoch_calls as f64,
            TraceField::FullCalls => r.full_calls as f64,
            TraceField::Objective => r.objective,
            TraceField::Error => r.error,
        }
    }
}

impl std::str::FromStr for TraceField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "epoch" => TraceField::Epoch,
            "step" => TraceField::Step,
            "stoch_calls" => TraceField::StochCalls,
            "full_calls" => TraceField::FullCalls,
            "objective" => TraceField::Objective,
            "error" => TraceField::Error,
            other => return Err(Error::InvalidConfig(format!("unknown trace field `{other}`"))),
        })
    }
}
