use serde::{Deserialize, Serialize};

use super::trace::{EpisodeTrace, PedPosition, Termination};
use crate::dynamics::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Collision,
    Timeout,
    Solver,
}

impl FailureReason {
    pub fn name(&self) -> &'static str {
        match self {
            FailureReason::Collision => "collision",
            FailureReason::Timeout => "timeout",
            FailureReason::Solver => "solver",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Sum of robot step displacements, m.
    pub trajectory_length: f64,
    /// Control steps × Δt, s.
    pub total_time: f64,
    /// Closest robot–pedestrian center distance; `None` without pedestrians.
    pub min_distance: Option<f64>,
    /// Mean solver wall time, ms.
    pub avg_compute_ms: f64,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
}

/// CSV columns of [`MetricsReport`], in order.
pub const METRICS_COLUMNS: [&str; 6] = [
    "trajectory_length",
    "total_time",
    "min_distance",
    "avg_compute_ms",
    "success",
    "failure_reason",
];

impl MetricsReport {
    /// Values in [`METRICS_COLUMNS`] order; a missing distance or reason is
    /// an empty field.
    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.trajectory_length.to_string(),
            self.total_time.to_string(),
            self.min_distance.map(|d| d.to_string()).unwrap_or_default(),
            self.avg_compute_ms.to_string(),
            self.success.to_string(),
            self.failure_reason
                .map(|r| r.name().to_string())
                .unwrap_or_default(),
        ]
    }
}

fn closest(state: &RobotState, peds: &[PedPosition]) -> Option<f64> {
    peds.iter()
        .map(|p| (p.position[0] - state.p_x).hypot(p.position[1] - state.p_y))
        .reduce(f64::min)
}

/// Metrics of a finished episode, derived from the trace alone.
pub fn compute_metrics(trace: &EpisodeTrace) -> MetricsReport {
    let dt = trace.header.planner.dt;
    let states: Vec<&RobotState> = trace
        .records
        .iter()
        .map(|r| &r.state)
        .chain(std::iter::once(&trace.outcome.final_state))
        .collect();
    let trajectory_length = states
        .windows(2)
        .map(|w| (w[1].p_x - w[0].p_x).hypot(w[1].p_y - w[0].p_y))
        .sum();
    let min_distance = trace
        .records
        .iter()
        .filter_map(|r| closest(&r.state, &r.pedestrians))
        .chain(closest(
            &trace.outcome.final_state,
            &trace.outcome.pedestrians,
        ))
        .reduce(f64::min);
    let walls: Vec<f64> = trace
        .records
        .iter()
        .filter_map(|r| r.solver.as_ref().map(|s| s.wall_time_ms))
        .collect();
    let avg_compute_ms = if walls.is_empty() {
        0.0
    } else {
        walls.iter().sum::<f64>() / walls.len() as f64
    };

    let planner = &trace.header.planner;
    let safe = planner
        .geometry
        .contact_distance()
        .max(planner.min_safe_distance);
    let breached = min_distance.is_some_and(|d| d < safe);
    let failure_reason = match trace.outcome.termination {
        Termination::Collision => Some(FailureReason::Collision),
        Termination::Timeout => Some(FailureReason::Timeout),
        Termination::Solver => Some(FailureReason::Solver),
        Termination::GoalReached if breached => Some(FailureReason::Collision),
        Termination::GoalReached => None,
    };
    MetricsReport {
        trajectory_length,
        total_time: trace.records.len() as f64 * dt,
        min_distance,
        avg_compute_ms,
        success: failure_reason.is_none(),
        failure_reason,
    }
}
