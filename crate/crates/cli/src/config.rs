//! Run configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid config. The
//! layout mirrors the struct nesting:
//!
//! ```toml
//! constant_velocity = false   # forecast with constant velocity, no model needed
//! deterministic = false       # zero every forecast covariance
//!
//! [paths]
//! dataset = "data/synthetic_tracks.txt"
//! model = "out/model.json"
//! output = "out"
//!
//! [predictor]                 # ensemble training
//! members = 3
//! epochs = 100
//! window_stride = 1
//!
//! [planner]                   # NMPC; see PlannerConfig
//! horizon = 12
//! mode = { kind = "cbf", gamma = 0.4 }
//!
//! [scenario]
//! kind = "synthetic"          # or "dataset"
//! name = "head_on"            # head_on | corridor | crossing20 | empty
//! seed = 0
//! pedestrians = 20            # dataset scenarios only
//!
//! [bench]
//! seeds = [0, 1, 2, 3, 4]
//! modes = ["hard", "cbf", "chance"]
//! horizons = [12]
//! deterministic = [false]
//! ```
//!
//! `SOCNAV_DATASET`, `SOCNAV_MODEL` and `SOCNAV_OUTPUT` override the paths.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use socnav_core::predictor::TrainConfig;
use socnav_core::{ConstraintMode, PlannerConfig};

pub const MODES: [&str; 3] = ["hard", "chance", "cbf"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// `frame_id ped_id x y` track file.
    pub dataset: PathBuf,
    /// Trained ensemble, JSON.
    pub model: PathBuf,
    /// Directory for traces, logs and CSVs.
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/synthetic_tracks.txt".into(),
            model: "out/model.json".into(),
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSettings {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Step between consecutive training windows cut from one track.
    pub window_stride: usize,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            window_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// A built-in scenario chosen by `name`.
    Synthetic,
    /// `pedestrians` tracks drawn from the dataset under `seed`.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSettings {
    pub kind: ScenarioKind,
    pub name: String,
    pub seed: u64,
    pub pedestrians: usize,
    /// Robot start `[x, y, heading]` and goal for dataset scenarios.
    pub start: [f64; 3],
    pub goal: [f64; 2],
    pub max_sim_time: f64,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Synthetic,
            name: "head_on".into(),
            seed: 0,
            pedestrians: 20,
            start: [0.0, 0.0, 0.0],
            goal: [10.0, 0.0],
            max_sim_time: socnav_core::harness::DEFAULT_MAX_SIM_TIME,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub seeds: Vec<u64>,
    pub modes: Vec<String>,
    pub horizons: Vec<usize>,
    /// Prediction variants: `false` keeps covariances, `true` zeroes them.
    pub deterministic: Vec<bool>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            modes: vec!["hard".into(), "cbf".into(), "chance".into()],
            horizons: vec![12],
            deterministic: vec![false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub constant_velocity: bool,
    pub deterministic: bool,
    pub paths: Paths,
    pub predictor: PredictorSettings,
    pub planner: PlannerConfig,
    pub scenario: ScenarioSettings,
    pub bench: BenchSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub mode: Option<String>,
    pub horizon: Option<usize>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub constant_velocity: bool,
    pub out: Option<PathBuf>,
}

/// Parses a mode name, taking δ or γ from the arguments or their defaults.
pub fn parse_mode(name: &str, delta: Option<f64>, gamma: Option<f64>) -> Result<ConstraintMode> {
    let mode = match name {
        "hard" => ConstraintMode::Hard,
        "chance" => ConstraintMode::Chance {
            delta: delta.unwrap_or(ConstraintMode::DEFAULT_DELTA),
        },
        "cbf" => ConstraintMode::Cbf {
            gamma: gamma.unwrap_or(ConstraintMode::DEFAULT_GAMMA),
        },
        other => bail!("unknown mode `{other}` (valid modes: {})", MODES.join(", ")),
    };
    mode.validate()?;
    Ok(mode)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("invalid config {}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    /// Applies path environment variables, then command-line overrides.
    pub fn apply(&mut self, env: impl Fn(&str) -> Option<String>, o: &Overrides) -> Result<()> {
        if let Some(v) = env("SOCNAV_DATASET") {
            self.paths.dataset = v.into();
        }
        if let Some(v) = env("SOCNAV_MODEL") {
            self.paths.model = v.into();
        }
        if let Some(v) = env("SOCNAV_OUTPUT") {
            self.paths.output = v.into();
        }
        if let Some(out) = &o.out {
            self.paths.output = out.clone();
        }
        if let Some(name) = &o.scenario {
            self.scenario.kind = if name == "dataset" {
                ScenarioKind::Dataset
            } else {
                ScenarioKind::Synthetic
            };
            self.scenario.name = name.clone();
        }
        if let Some(seed) = o.seed {
            self.scenario.seed = seed;
            self.bench.seeds = vec![seed];
        }
        if let Some(n) = o.horizon {
            self.planner.horizon = n;
            self.bench.horizons = vec![n];
        }
        match &o.mode {
            Some(name) => {
                self.planner.mode = parse_mode(name, o.delta, o.gamma)?;
                self.bench.modes = vec![name.clone()];
            }
            None => {
                self.planner.mode = match self.planner.mode {
                    ConstraintMode::Chance { delta } => ConstraintMode::Chance {
                        delta: o.delta.unwrap_or(delta),
                    },
                    ConstraintMode::Cbf { gamma } => ConstraintMode::Cbf {
                        gamma: o.gamma.unwrap_or(gamma),
                    },
                    hard => hard,
                };
            }
        }
        if o.deterministic {
            self.deterministic = true;
            self.bench.deterministic = vec![true];
        }
        self.constant_velocity |= o.constant_velocity;
        Ok(())
    }

    /// The mode used by a bench cell, keeping δ and γ from `planner.mode`
    /// when it is of the same kind.
    pub fn bench_mode(&self, name: &str) -> Result<ConstraintMode> {
        let (delta, gamma) = match self.planner.mode {
            ConstraintMode::Chance { delta } => (Some(delta), None),
            ConstraintMode::Cbf { gamma } => (None, Some(gamma)),
            ConstraintMode::Hard => (None, None),
        };
        parse_mode(name, delta, gamma)
    }

    /// Checks value ranges. Path existence is checked by each command.
    pub fn validate(&self) -> Result<()> {
        self.predictor.train.validate()?;
        if self.predictor.window_stride == 0 {
            bail!("predictor.window_stride must be at least 1");
        }
        self.planner.validate()?;
        for m in &self.bench.modes {
            self.bench_mode(m)?;
        }
        if self.bench.seeds.is_empty() || self.bench.modes.is_empty() {
            bail!("bench needs at least one seed and one mode");
        }
        if self.bench.horizons.is_empty() || self.bench.deterministic.is_empty() {
            bail!("bench needs at least one horizon and one prediction variant");
        }
        if self.scenario.kind == ScenarioKind::Synthetic {
            let known = socnav_core::harness::CANONICAL_SCENARIOS;
            if !known.contains(&self.scenario.name.as_str()) && self.scenario.name != "empty" {
                bail!(
                    "unknown scenario `{}` (valid: {}, empty, dataset)",
                    self.scenario.name,
                    known.join(", ")
                );
            }
        }
        Ok(())
    }
}

/// Fails with a message naming `path` when it does not exist.
pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}
