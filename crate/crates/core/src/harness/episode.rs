use super::metrics::{compute_metrics, MetricsReport};
use super::scenario::Scenario;
use super::trace::{
    EpisodeTrace, PedPosition, SolveSummary, StepRecord, Termination, TraceHeader, TraceOutcome,
    TRACE_FORMAT,
};
use crate::dynamics::{step, RobotState};
use crate::planner::{Planner, PlannerConfig};
use crate::predictor::{
    observations_from_positions, Ensemble, GaussianForecast, GaussianStep, HistoryWindow,
    FORECAST_LEN, HISTORY_LEN, SAMPLE_DT,
};
use crate::Result;

/// Per-step variance growth of cold-start forecasts, m² (0.05 m per step).
pub const COLD_START_VARIANCE: f64 = 0.0025;

/// Source of pedestrian forecasts.
#[derive(Debug, Clone, Copy)]
pub enum Forecaster<'a> {
    Ensemble(&'a Ensemble),
    /// Constant-velocity extrapolation for every pedestrian.
    ConstantVelocity,
}

impl Forecaster<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Forecaster::Ensemble(_) => "ensemble",
            Forecaster::ConstantVelocity => "constant_velocity",
        }
    }

    /// Forecast from the positions observed so far (oldest first).
    pub fn forecast(
        &self,
        ped_id: i64,
        now: usize,
        observed: &[[f64; 2]],
    ) -> Result<GaussianForecast> {
        match self {
            Forecaster::Ensemble(e) if observed.len() >= HISTORY_LEN => {
                // One extra sample, when available, gives the oldest velocity
                // the same backward difference used for training windows.
                let tail = &observed[observed.len().saturating_sub(HISTORY_LEN + 1)..];
                let obs = observations_from_positions(tail);
                let history = HistoryWindow::new(&obs[obs.len() - HISTORY_LEN..])?;
                e.predict(&history, ped_id, now)
            }
            _ => Ok(constant_velocity_forecast(ped_id, now, observed)),
        }
    }
}

/// Constant-velocity extrapolation with diagonal covariance
/// `COLD_START_VARIANCE · k` at step `k`. A single observation is held in
/// place.
pub fn constant_velocity_forecast(
    ped_id: i64,
    now: usize,
    observed: &[[f64; 2]],
) -> GaussianForecast {
    let last = *observed.last().expect("at least one observation");
    let vel = match observed {
        [.., a, b] => [(b[0] - a[0]) / SAMPLE_DT, (b[1] - a[1]) / SAMPLE_DT],
        _ => [0.0, 0.0],
    };
    let steps = (1..=FORECAST_LEN)
        .map(|k| {
            let t = k as f64 * SAMPLE_DT;
            let var = COLD_START_VARIANCE * k as f64;
            GaussianStep::diagonal([last[0] + vel[0] * t, last[1] + vel[1] * t], var, var)
        })
        .collect();
    GaussianForecast {
        pedestrian_id: ped_id,
        start_time: now,
        current_position: last,
        steps,
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    /// Zero every forecast covariance before planning.
    pub deterministic: bool,
    pub model_hash: Option<String>,
    /// Copied verbatim into the trace header.
    pub echo: serde_json::Value,
}

fn distance(state: &RobotState, p: [f64; 2]) -> f64 {
    (p[0] - state.p_x).hypot(p[1] - state.p_y)
}

/// Runs one closed-loop episode. Each step checks collision, goal and
/// timeout, then forecasts every visible pedestrian, solves the NMPC
/// problem and applies the first control. Pedestrians replay their tracks
/// unchanged.
///
/// The scenario's goal and corridor override those in `planner`.
pub fn run_episode(
    scenario: &Scenario,
    forecaster: Forecaster<'_>,
    planner: &PlannerConfig,
    options: &EpisodeOptions,
) -> Result<(EpisodeTrace, MetricsReport)> {
    let mut config = planner.clone();
    config.goal = scenario.goal;
    if scenario.corridor.is_some() {
        config.corridor = scenario.corridor;
    }
    config.validate()?;
    scenario.validate(&config.geometry)?;
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        prediction: forecaster.name().into(),
        deterministic: options.deterministic,
        model_hash: options.model_hash.clone(),
        start: scenario.start,
        goal: scenario.goal,
        start_step: scenario.start_step,
        max_sim_time: scenario.max_sim_time,
        planner: config.clone(),
        echo: options.echo.clone(),
    };

    let contact = config.geometry.contact_distance();
    let max_steps = scenario.max_steps();
    let mut nmpc = Planner::new(config.clone())?;
    let mut state = scenario.start;
    let mut records = Vec::new();
    let mut k = 0;
    let (termination, pedestrians) = loop {
        let now = scenario.start_step + k;
        let pedestrians: Vec<PedPosition> = scenario
            .pedestrians_at(now)
            .into_iter()
            .map(|(id, position)| PedPosition { id, position })
            .collect();
        if pedestrians
            .iter()
            .any(|p| distance(&state, p.position) < contact)
        {
            break (Termination::Collision, pedestrians);
        }
        if distance(&state, scenario.goal) <= config.goal_tolerance {
            break (Termination::GoalReached, pedestrians);
        }
        if k >= max_steps {
            break (Termination::Timeout, pedestrians);
        }

        let mut forecasts = Vec::with_capacity(scenario.tracks.len());
        for track in scenario.tracks.iter().filter(|t| t.is_active(now)) {
            let f = forecaster.forecast(track.ped_id, now, track.observed_until(now))?;
            forecasts.push(if options.deterministic {
                f.without_uncertainty()
            } else {
                f
            });
        }

        let outcome = nmpc.plan(&state, &forecasts);
        let solver = outcome.result.as_ref().map(|r| SolveSummary {
            status: r.status,
            iterations: r.iterations,
            objective: r.objective,
            max_violation: r.max_violation,
            wall_time_ms: r.wall_time_ms,
        });
        let failed = outcome.fallback.is_some();
        records.push(StepRecord {
            step: k,
            time: k as f64 * config.dt,
            state,
            control: outcome.control,
            pedestrians,
            forecasts,
            solver,
            fallback: outcome.fallback,
        });
        if failed {
            let now_peds = records.last().expect("just pushed").pedestrians.clone();
            break (Termination::Solver, now_peds);
        }
        state = step(&state, &outcome.control, config.dt, &config.vehicle);
        k += 1;
    };

    let trace = EpisodeTrace {
        header,
        records,
        outcome: TraceOutcome {
            final_state: state,
            pedestrians,
            termination,
        },
    };
    let report = compute_metrics(&trace);
    Ok((trace, report))
}
