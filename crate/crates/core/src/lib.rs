//! Uncertainty-aware social navigation.
//!
//! A deep ensemble forecasts pedestrian positions as Gaussians; a
//! receding-horizon NMPC plans around those forecasts under hard, chance or
//! discrete control-barrier-function collision constraints; a replay harness
//! closes the loop and scores episodes.
//!
//! ```text
//! tracks ─► predictor::Ensemble ─► GaussianForecast ─► planner::Planner ─► ControlInput
//!                                                          │
//!                       harness::run_episode ◄─ dynamics::step
//! ```

pub mod constraints;
pub mod dynamics;
mod error;
pub mod harness;
pub mod planner;
pub mod predictor;

pub use constraints::{ConstraintMode, SafetyGeometry};
pub use dynamics::{ControlInput, InputBounds, RobotState, VehicleParams};
pub use error::{Error, Result};
pub use planner::{PlannerConfig, SolveResult, SolverStatus};
pub use predictor::{Ensemble, GaussianForecast, GaussianStep, HistoryWindow};
