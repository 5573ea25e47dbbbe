use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintMode, SafetyGeometry};
use crate::dynamics::{InputBounds, VehicleParams, INPUT_DIM, STATE_DIM};
use crate::{Error, Result};

/// Diagonal stage weights on `[p_x, p_y, φ, v_x, v_y, r, δ]`.
pub const DEFAULT_STATE_WEIGHTS: [f64; STATE_DIM] = [2.0, 2.0, 1.0, 1.0, 1.0, 1e-5, 1e-5];
pub const DEFAULT_INPUT_WEIGHTS: [f64; INPUT_DIM] = [0.01, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Stationarity and feasibility tolerance.
    pub kkt_tolerance: f64,
    /// Relative objective change between outer iterations treated as a stall.
    pub stall_tolerance: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// Also solve from left and right lane-change inputs and keep the best.
    pub lane_change_starts: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_outer_iterations: 10,
            max_inner_iterations: 50,
            kkt_tolerance: 1e-4,
            stall_tolerance: 1e-8,
            initial_penalty: 10.0,
            max_penalty: 1e8,
            lane_change_starts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub dt: f64,
    pub state_weights: [f64; STATE_DIM],
    pub terminal_weights: [f64; STATE_DIM],
    pub input_weights: [f64; INPUT_DIM],
    pub rate_weights: [f64; INPUT_DIM],
    pub goal: [f64; 2],
    pub input_bounds: InputBounds,
    pub vehicle: VehicleParams,
    pub geometry: SafetyGeometry,
    pub mode: ConstraintMode,
    pub goal_tolerance: f64,
    pub min_safe_distance: f64,
    /// Pedestrians whose current position is farther than this from the
    /// robot contribute no collision terms. `None` keeps every pedestrian.
    pub prune_radius: Option<f64>,
    /// Forward/backward speed bound on `v_x`, part of the admissible state set.
    pub max_speed: Option<f64>,
    /// Admissible lateral band `[y_min, y_max]` for the robot disc.
    pub corridor: Option<[f64; 2]>,
    pub solver: SolverSettings,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let q = DEFAULT_STATE_WEIGHTS;
        let r = DEFAULT_INPUT_WEIGHTS;
        Self {
            horizon: 12,
            dt: 0.4,
            state_weights: q,
            terminal_weights: q.map(|w| 10.0 * w),
            input_weights: r,
            rate_weights: r.map(|w| 100.0 * w),
            goal: [0.0, 0.0],
            input_bounds: InputBounds::default(),
            vehicle: VehicleParams::default(),
            geometry: SafetyGeometry::default(),
            mode: ConstraintMode::cbf(),
            goal_tolerance: 0.6,
            min_safe_distance: 0.2,
            prune_radius: Some(10.0),
            max_speed: Some(1.5),
            corridor: None,
            solver: SolverSettings::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let weights_ok = self
            .state_weights
            .iter()
            .chain(&self.terminal_weights)
            .chain(&self.input_weights)
            .chain(&self.rate_weights)
            .all(|w| *w >= 0.0 && w.is_finite());
        if self.horizon < 1 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !weights_ok {
            return Err(Error::InvalidInput(
                "cost weights must be finite and non-negative".into(),
            ));
        }
        if !self.goal.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidInput("goal must be finite".into()));
        }
        if let Some([lo, hi]) = self.corridor {
            if hi - lo <= 2.0 * self.vehicle.radius {
                return Err(Error::InvalidInput(format!(
                    "corridor [{lo}, {hi}] narrower than the robot"
                )));
            }
        }
        self.vehicle.validate()?;
        self.geometry.validate()?;
        self.mode.validate()
    }
}
