//! Fixtures shared by the benchmarks.

use socnav_core::dynamics::{ControlInput, RobotState};
use socnav_core::harness::synthetic_training_tracks;
use socnav_core::planner::{build_ocp, OcpProblem, PlannerConfig};
use socnav_core::predictor::{
    Architecture, EnsembleMember, GaussianForecast, GaussianStep, HistoryWindow, TrainingMetadata,
    HISTORY_LEN, SAMPLE_DT,
};
use socnav_core::{ConstraintMode, Ensemble};

/// An untrained ensemble; forward cost does not depend on the weights.
pub fn ensemble(members: usize, hidden: usize) -> Ensemble {
    let members = (0..members as u64)
        .map(|s| EnsembleMember::initialize(Architecture::new(hidden), s))
        .collect();
    Ensemble::new(members, TrainingMetadata::default()).expect("valid ensemble")
}

pub fn histories(count: usize) -> Vec<HistoryWindow> {
    synthetic_training_tracks(1, count)
        .iter()
        .map(|t| HistoryWindow::from_positions(&t.positions[..HISTORY_LEN]).expect("finite track"))
        .collect()
}

/// `peds` pedestrians crossing the robot's path, spaced 1 m apart.
pub fn crossing_forecasts(peds: usize) -> Vec<GaussianForecast> {
    (0..peds)
        .map(|i| {
            let from = [2.0 + i as f64, if i % 2 == 0 { -3.0 } else { 3.0 }];
            let vy = if i % 2 == 0 { 1.0 } else { -1.0 };
            GaussianForecast {
                pedestrian_id: i as i64,
                start_time: 0,
                current_position: from,
                steps: (1..=12)
                    .map(|k| {
                        let t = k as f64 * SAMPLE_DT;
                        let var = 0.01 * k as f64;
                        GaussianStep::diagonal([from[0], from[1] + vy * t], var, var)
                    })
                    .collect(),
            }
        })
        .collect()
}

pub fn problem(mode: ConstraintMode, horizon: usize, peds: usize) -> OcpProblem {
    let config = PlannerConfig {
        mode,
        horizon,
        goal: [10.0, 0.0],
        ..PlannerConfig::default()
    };
    let state = RobotState {
        v_x: 1.0,
        ..RobotState::default()
    };
    build_ocp(
        &state,
        ControlInput::ZERO,
        &crossing_forecasts(peds),
        &config,
    )
    .expect("valid problem")
}
