//! Episode traces and their JSON-lines persistence.
//!
//! A trace file holds one JSON object per line, each tagged by `kind`:
//!
//! * `header`: format version, scenario, seed, predictor, model hash, the
//!   planner configuration and an opaque `echo` of the caller's run config;
//! * `step`: one per control step, with robot state, applied control, the
//!   forecasts handed to the planner, true pedestrian positions and the
//!   solver summary;
//! * `outcome`: final state, pedestrian positions and termination cause.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, RobotState};
use crate::planner::{PlannerConfig, SolverStatus};
use crate::predictor::GaussianForecast;
use crate::{Error, Result};

pub const TRACE_FORMAT: &str = "socnav-trace/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub scenario: String,
    pub seed: u64,
    /// `ensemble` or `constant_velocity`.
    pub prediction: String,
    pub deterministic: bool,
    pub model_hash: Option<String>,
    pub start: RobotState,
    pub goal: [f64; 2],
    pub start_step: usize,
    pub max_sim_time: f64,
    pub planner: PlannerConfig,
    #[serde(default)]
    pub echo: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedPosition {
    pub id: i64,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SolverStatus,
    pub iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub state: RobotState,
    pub control: ControlInput,
    pub pedestrians: Vec<PedPosition>,
    pub forecasts: Vec<GaussianForecast>,
    pub solver: Option<SolveSummary>,
    /// Error message when the solver failed and a braking control was used.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GoalReached,
    Collision,
    Timeout,
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutcome {
    pub final_state: RobotState,
    pub pedestrians: Vec<PedPosition>,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub records: Vec<StepRecord>,
    pub outcome: TraceOutcome,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header(Box<TraceHeader>),
    Step(StepRecord),
    Outcome(TraceOutcome),
}

impl EpisodeTrace {
    /// Copy with solver wall times zeroed; everything else is a function of
    /// the inputs and compares bitwise across runs.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.records {
            if let Some(s) = &mut r.solver {
                s.wall_time_ms = 0.0;
            }
        }
        t
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&TraceLine::Header(Box::new(self.header.clone())))?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&TraceLine::Step(r.clone()))?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&TraceLine::Outcome(
            self.outcome.clone(),
        ))?);
        out.push('\n');
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::from_lines(
            text.lines().map(|l| Ok(l.to_owned())),
            Path::new("<memory>"),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let lines = BufReader::new(f)
            .lines()
            .map(|l| l.map_err(|e| Error::io(path, e)));
        Self::from_lines(lines, path)
    }

    fn from_lines(lines: impl Iterator<Item = Result<String>>, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut header = None;
        let mut records = Vec::new();
        let mut outcome = None;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            match parsed {
                TraceLine::Header(h) if header.is_none() && i == 0 => {
                    if h.format != TRACE_FORMAT {
                        return Err(parse_err(
                            1,
                            format!("unsupported trace format `{}`", h.format),
                        ));
                    }
                    header = Some(*h);
                }
                TraceLine::Step(r) if header.is_some() && outcome.is_none() => records.push(r),
                TraceLine::Outcome(o) if header.is_some() && outcome.is_none() => outcome = Some(o),
                _ => return Err(parse_err(i + 1, "unexpected record".into())),
            }
        }
        Ok(Self {
            header: header.ok_or_else(|| parse_err(1, "missing header".into()))?,
            records,
            outcome: outcome.ok_or_else(|| parse_err(0, "missing outcome".into()))?,
        })
    }
}
