//! Receding-horizon NMPC over the kinematic car with pedestrian collision
//! residuals.

mod config;
mod cost;
mod ocp;
mod solver;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{PlannerConfig, SolverSettings, DEFAULT_INPUT_WEIGHTS, DEFAULT_STATE_WEIGHTS};
pub use cost::{stage_cost, terminal_cost};
pub use ocp::{
    build_ocp, forecast_step_for, reference_state, OcpProblem, ResidualTag, HARD_STRICT_MARGIN,
    HOLD_INFLATION,
};
pub use solver::{solve, Evaluation, Nlp, NlpSolution, SolverStatus, WeightFn};

use crate::dynamics::{ControlInput, RobotState};
use crate::predictor::GaussianForecast;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub controls: Vec<ControlInput>,
    /// Predicted states `x_1 … x_N`.
    pub states: Vec<RobotState>,
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub wall_time_ms: f64,
    /// Largest residual violation (0 when feasible).
    pub max_violation: f64,
    /// Objective after each outer iteration.
    pub outer_objectives: Vec<f64>,
}

/// Solves `problem` from `warm_start` and from zeros, keeping the better
/// result. A warm start with a non-finite objective is dropped.
pub fn solve_ocp(problem: &OcpProblem, warm_start: Option<&[ControlInput]>) -> Result<SolveResult> {
    let started = Instant::now();
    let n = problem.horizon();
    let zeros = vec![0.0; 2 * n];
    let mut z0 = match warm_start {
        Some(w) if w.len() == n => OcpProblem::pack(w),
        Some(w) => {
            return Err(Error::InvalidInput(format!(
                "warm start has {} controls, horizon is {n}",
                w.len()
            )))
        }
        None => zeros.clone(),
    };
    if !problem.objective(&z0).is_finite() {
        z0 = zeros.clone();
        if !problem.objective(&z0).is_finite() {
            return Err(Error::Solver(
                "objective is not finite at the zero control".into(),
            ));
        }
    }
    let settings = &problem.config().solver;
    // the zero start rides along so a stale warm start never loses to cold
    let mut starts = vec![z0];
    if starts[0] != zeros {
        starts.push(zeros);
    }
    if settings.lane_change_starts && n >= 2 {
        let rate = 0.5 * problem.config().input_bounds.max_steer_rate;
        starts.extend([rate, -rate].map(|r| OcpProblem::pack(&lane_change(n, r))));
    }
    let mut iterations = 0;
    let mut best: Option<NlpSolution> = None;
    for start in starts.iter().filter(|z| problem.objective(z).is_finite()) {
        let sol = solve(problem, start, settings);
        iterations += sol.iterations;
        if !sol.objective.is_finite() || !sol.z.iter().all(|v| v.is_finite()) {
            continue;
        }
        let feasible = |s: &NlpSolution| s.max_violation <= settings.kkt_tolerance;
        let better = match &best {
            None => true,
            Some(b) => match (feasible(&sol), feasible(b)) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => sol.objective < b.objective,
                (false, false) => sol.max_violation < b.max_violation,
            },
        };
        if better {
            best = Some(sol);
        }
    }
    let Some(sol) = best else {
        return Err(Error::Solver("solver produced non-finite iterate".into()));
    };
    let controls: Vec<ControlInput> = OcpProblem::unpack(&sol.z)
        .into_iter()
        .map(|u| problem.config().input_bounds.clamp(u))
        .collect();
    let states = problem.predicted_states(&OcpProblem::pack(&controls));
    Ok(SolveResult {
        controls,
        states,
        objective: sol.objective,
        status: sol.status,
        iterations,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        max_violation: sol.max_violation,
        outer_objectives: sol.outer_objectives,
    })
}

/// Steer at `rate` for a quarter of the horizon, back for half, then
/// straighten: a lateral offset with the heading restored.
fn lane_change(n: usize, rate: f64) -> Vec<ControlInput> {
    let q = (n / 4).max(1);
    (0..n)
        .map(|k| {
            let r = if k < q {
                rate
            } else if k < 3 * q {
                -rate
            } else if k < 4 * q {
                rate
            } else {
                0.0
            };
            ControlInput::new(0.0, r)
        })
        .collect()
}

/// Control applied when the solver fails: brake toward standstill, wheel held.
pub fn braking_control(state: &RobotState, config: &PlannerConfig) -> ControlInput {
    let force =
        (state.v_x.abs() * config.vehicle.mass / config.dt).min(config.input_bounds.max_force);
    ControlInput::new(-state.v_x.signum() * force, 0.0)
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub control: ControlInput,
    pub result: Option<SolveResult>,
    /// Solution shifted one step, for the next call.
    pub next_warm_start: Option<Vec<ControlInput>>,
    /// Set when the braking fallback replaced a failed solve.
    pub fallback: Option<String>,
}

/// One receding-horizon update: build, solve, return the first control.
pub fn plan_step(
    state: &RobotState,
    previous_input: ControlInput,
    forecasts: &[GaussianForecast],
    config: &PlannerConfig,
    warm_start: Option<&[ControlInput]>,
) -> PlanOutcome {
    let attempt = build_ocp(state, previous_input, forecasts, config)
        .and_then(|problem| solve_ocp(&problem, warm_start));
    match attempt {
        Ok(result) => {
            let mut shifted = result.controls[1..].to_vec();
            shifted.push(*result.controls.last().expect("horizon ≥ 1"));
            PlanOutcome {
                control: result.controls[0],
                next_warm_start: Some(shifted),
                result: Some(result),
                fallback: None,
            }
        }
        Err(e) => PlanOutcome {
            control: braking_control(state, config),
            result: None,
            next_warm_start: None,
            fallback: Some(e.to_string()),
        },
    }
}

/// Stateful planner instance carrying the warm start and the last applied
/// control between calls.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: PlannerConfig,
    warm_start: Option<Vec<ControlInput>>,
    previous_input: ControlInput,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            warm_start: None,
            previous_input: ControlInput::ZERO,
        })
    }

    pub fn plan(&mut self, state: &RobotState, forecasts: &[GaussianForecast]) -> PlanOutcome {
        let outcome = plan_step(
            state,
            self.previous_input,
            forecasts,
            &self.config,
            self.warm_start.as_deref(),
        );
        self.warm_start = outcome.next_warm_start.clone();
        self.previous_input = outcome.control;
        outcome
    }
}
