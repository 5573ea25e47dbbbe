//! Single-shooting transcription of the receding-horizon problem.
//!
//! Decision variables are the N controls, stacked `[F_0, δ̇_0, F_1, δ̇_1, …]`.
//! States are eliminated by rolling out the dynamics; objective and residual
//! gradients are propagated back through the rollout with an adjoint pass.

use crate::constraints::{chance_quantile, CollisionModel, ConstraintMode};
use crate::dynamics::{
    step_with_jacobians, ControlInput, InputJacobian, RobotState, StateJacobian, StateVec,
    VehicleParams, INPUT_DIM, STATE_DIM,
};
use crate::predictor::{GaussianForecast, GaussianStep};
use crate::Result;

use super::config::PlannerConfig;
use super::cost::{state_error, weighted_sq};
use super::solver::{Evaluation, Nlp, WeightFn};

/// Margin realising the strict hard-mode inequality.
pub const HARD_STRICT_MARGIN: f64 = 1e-6;
/// Covariance growth per step when a forecast is held past its end.
pub const HOLD_INFLATION: f64 = 1.1;

#[derive(Debug, Clone, Copy)]
enum BarrierNow {
    Fixed(f64),
    State(CollisionModel),
}

#[derive(Debug, Clone, Copy)]
enum CollisionTerm {
    /// `model(p_step) − offset ≥ 0` (hard and chance).
    Point {
        step: usize,
        model: CollisionModel,
        offset: f64,
    },
    /// `h(x_step) − (1 − γ)·h(x_{step−1}) ≥ 0`.
    Barrier {
        step: usize,
        now: BarrierNow,
        next: CollisionModel,
        gamma: f64,
    },
}

/// `sign · (x[component] − limit) ≥ 0` at state `step`.
#[derive(Debug, Clone, Copy)]
struct StateBound {
    step: usize,
    component: usize,
    sign: f64,
    limit: f64,
}

/// Collision residual bookkeeping: which pedestrian and horizon step a
/// residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualTag {
    pub pedestrian_id: i64,
    pub step: usize,
}

#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub initial: RobotState,
    pub previous_input: ControlInput,
    /// Reference states for `x_0 … x_N`.
    pub references: Vec<StateVec>,
    config: PlannerConfig,
    terms: Vec<CollisionTerm>,
    tags: Vec<ResidualTag>,
    bounds: Vec<StateBound>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Forecast step used for state index `j ≥ 1`; past the end the last step is
/// held with its covariance inflated by [`HOLD_INFLATION`] per extra step.
pub fn forecast_step_for(forecast: &GaussianForecast, j: usize) -> GaussianStep {
    let len = forecast.steps.len();
    if j <= len {
        return forecast.steps[j - 1];
    }
    let last = forecast.steps[len - 1];
    let scale = HOLD_INFLATION.powi((j - len) as i32);
    GaussianStep::new(last.mean, last.covariance.map(|row| row.map(|v| v * scale)))
}

/// Goal-regulation reference: goal position, heading toward the goal,
/// zero velocities and steering.
pub fn reference_state(state: &RobotState, config: &PlannerConfig) -> StateVec {
    let dx = config.goal[0] - state.p_x;
    let dy = config.goal[1] - state.p_y;
    let heading = if dx.hypot(dy) > config.goal_tolerance {
        dy.atan2(dx)
    } else {
        state.phi
    };
    [config.goal[0], config.goal[1], heading, 0.0, 0.0, 0.0, 0.0]
}

/// Builds the horizon-N problem for the current state and forecasts.
pub fn build_ocp(
    state: &RobotState,
    previous_input: ControlInput,
    forecasts: &[GaussianForecast],
    config: &PlannerConfig,
) -> Result<OcpProblem> {
    config.validate()?;
    let n = config.horizon;
    let geometry = &config.geometry;
    let mut terms = Vec::new();
    let mut tags = Vec::new();
    let quantile = match config.mode {
        ConstraintMode::Chance { delta } => chance_quantile(delta)?,
        _ => 0.0,
    };

    for forecast in forecasts {
        if forecast.steps.is_empty() {
            continue;
        }
        if let Some(radius) = config.prune_radius {
            let d = (forecast.current_position[0] - state.p_x)
                .hypot(forecast.current_position[1] - state.p_y);
            if d > radius {
                continue;
            }
        }
        for j in 1..=n {
            let step = forecast_step_for(forecast, j);
            let term = match config.mode {
                ConstraintMode::Hard => CollisionTerm::Point {
                    step: j,
                    model: CollisionModel::disc(&step, geometry)?,
                    offset: HARD_STRICT_MARGIN,
                },
                ConstraintMode::Chance { .. } => CollisionTerm::Point {
                    step: j,
                    model: CollisionModel::chance(&step, geometry, quantile)?,
                    offset: 0.0,
                },
                ConstraintMode::Cbf { gamma } => {
                    let now = if j == 1 {
                        let observed = GaussianStep::point(forecast.current_position);
                        let model = CollisionModel::disc(&observed, geometry)?;
                        BarrierNow::Fixed(model.eval(state.position()).0)
                    } else {
                        BarrierNow::State(CollisionModel::disc(
                            &forecast_step_for(forecast, j - 1),
                            geometry,
                        )?)
                    };
                    CollisionTerm::Barrier {
                        step: j,
                        now,
                        next: CollisionModel::disc(&step, geometry)?,
                        gamma,
                    }
                }
            };
            terms.push(term);
            tags.push(ResidualTag {
                pedestrian_id: forecast.pedestrian_id,
                step: j,
            });
        }
    }

    let mut bounds = Vec::new();
    // rollouts run unclamped, so the steering bound is a residual instead
    let steer = config.vehicle.max_steer;
    for j in 1..=n {
        bounds.push(StateBound {
            step: j,
            component: 6,
            sign: -1.0,
            limit: steer,
        });
        bounds.push(StateBound {
            step: j,
            component: 6,
            sign: 1.0,
            limit: -steer,
        });
        if let Some(v) = config.max_speed {
            bounds.push(StateBound {
                step: j,
                component: 3,
                sign: -1.0,
                limit: v,
            });
            bounds.push(StateBound {
                step: j,
                component: 3,
                sign: 1.0,
                limit: -v,
            });
        }
        if let Some([lo, hi]) = config.corridor {
            let r = config.vehicle.radius;
            bounds.push(StateBound {
                step: j,
                component: 1,
                sign: 1.0,
                limit: lo + r,
            });
            bounds.push(StateBound {
                step: j,
                component: 1,
                sign: -1.0,
                limit: hi - r,
            });
        }
    }

    let upper: Vec<f64> = (0..n).flat_map(|_| config.input_bounds.upper()).collect();
    let lower = upper.iter().map(|v| -v).collect();
    let reference = reference_state(state, config);
    Ok(OcpProblem {
        initial: *state,
        previous_input,
        references: vec![reference; n + 1],
        config: config.clone(),
        terms,
        tags,
        bounds,
        lower,
        upper,
    })
}

struct Rollout {
    states: Vec<StateVec>,
    a: Vec<StateJacobian>,
    b: Vec<InputJacobian>,
}

impl OcpProblem {
    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn num_collision_residuals(&self) -> usize {
        self.terms.len()
    }

    pub fn num_residuals(&self) -> usize {
        self.terms.len() + self.bounds.len()
    }

    /// Pedestrian and step of each collision residual, in residual order.
    pub fn collision_tags(&self) -> &[ResidualTag] {
        &self.tags
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// Flattens a control sequence into the decision vector.
    pub fn pack(controls: &[ControlInput]) -> Vec<f64> {
        controls.iter().flat_map(|u| u.to_array()).collect()
    }

    pub fn unpack(z: &[f64]) -> Vec<ControlInput> {
        z.chunks_exact(INPUT_DIM)
            .map(|c| ControlInput::new(c[0], c[1]))
            .collect()
    }

    fn rollout(&self, z: &[f64]) -> Rollout {
        let n = self.horizon();
        let mut states = Vec::with_capacity(n + 1);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let unclamped = VehicleParams {
            max_steer: f64::INFINITY,
            ..self.config.vehicle
        };
        states.push(self.initial.to_array());
        for k in 0..n {
            let u = [z[2 * k], z[2 * k + 1]];
            let (next, ja, jb) = step_with_jacobians(&states[k], &u, self.config.dt, &unclamped);
            states.push(next);
            a.push(ja);
            b.push(jb);
        }
        Rollout { states, a, b }
    }

    /// States `x_1 … x_N` for the given decision vector.
    pub fn predicted_states(&self, z: &[f64]) -> Vec<RobotState> {
        self.rollout(z).states[1..]
            .iter()
            .map(|x| RobotState::from_array(*x))
            .collect()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.evaluate_full(z, None).objective
    }

    /// Collision residuals followed by state-bound residuals.
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        self.evaluate_full(z, None).constraints
    }

    pub fn objective_gradient(&self, z: &[f64]) -> Vec<f64> {
        let zeros = |c: &[f64]| vec![0.0; c.len()];
        self.evaluate_full(z, Some(&zeros))
            .gradient
            .expect("requested")
    }

    /// ∇(Σ_j w_j c_j) for fixed weights `w`.
    pub fn weighted_residual_gradient(&self, z: &[f64], weights: &[f64]) -> Vec<f64> {
        let w = |_: &[f64]| weights.to_vec();
        let with = self.evaluate_full(z, Some(&w)).gradient.expect("requested");
        let obj = self.objective_gradient(z);
        with.iter().zip(&obj).map(|(a, b)| a - b).collect()
    }

    fn evaluate_full(&self, z: &[f64], weights: Option<WeightFn<'_>>) -> Evaluation {
        let n = self.horizon();
        let cfg = &self.config;
        let roll = self.rollout(z);
        let xs = &roll.states;

        let mut gx = vec![[0.0; STATE_DIM]; n + 1];
        let mut gu = vec![0.0; z.len()];
        let mut objective = 0.0;

        for k in 0..n {
            if k > 0 {
                let e = state_error(&xs[k], &self.references[k]);
                objective += weighted_sq(&e, &cfg.state_weights);
                for i in 0..STATE_DIM {
                    gx[k][i] += 2.0 * cfg.state_weights[i] * e[i];
                }
            } else {
                // x_0 is fixed; its cost is a constant with no gradient
                let e = state_error(&xs[0], &self.references[0]);
                objective += weighted_sq(&e, &cfg.state_weights);
            }
            let u = [z[2 * k], z[2 * k + 1]];
            let prev = if k == 0 {
                self.previous_input.to_array()
            } else {
                [z[2 * k - 2], z[2 * k - 1]]
            };
            for i in 0..INPUT_DIM {
                let du = u[i] - prev[i];
                objective += cfg.input_weights[i] * u[i] * u[i] + cfg.rate_weights[i] * du * du;
                gu[2 * k + i] += 2.0 * cfg.input_weights[i] * u[i] + 2.0 * cfg.rate_weights[i] * du;
                if k > 0 {
                    gu[2 * k - 2 + i] -= 2.0 * cfg.rate_weights[i] * du;
                }
            }
        }
        let e = state_error(&xs[n], &self.references[n]);
        objective += weighted_sq(&e, &cfg.terminal_weights);
        for i in 0..STATE_DIM {
            gx[n][i] += 2.0 * cfg.terminal_weights[i] * e[i];
        }

        // residuals, with per-residual position gradients kept for the adjoint
        let mut constraints = Vec::with_capacity(self.num_residuals());
        let mut partials: Vec<[(usize, [f64; 2]); 2]> = Vec::with_capacity(self.terms.len());
        let pos = |j: usize| [xs[j][0], xs[j][1]];
        for term in &self.terms {
            match *term {
                CollisionTerm::Point {
                    step,
                    model,
                    offset,
                } => {
                    let (v, g) = model.eval(pos(step));
                    constraints.push(v - offset);
                    partials.push([(step, g), (0, [0.0; 2])]);
                }
                CollisionTerm::Barrier {
                    step,
                    now,
                    next,
                    gamma,
                } => {
                    let (h_next, g_next) = next.eval(pos(step));
                    let (h_now, g_now) = match now {
                        BarrierNow::Fixed(h) => (h, [0.0; 2]),
                        BarrierNow::State(m) => m.eval(pos(step - 1)),
                    };
                    constraints.push(h_next - (1.0 - gamma) * h_now);
                    let scaled = [-(1.0 - gamma) * g_now[0], -(1.0 - gamma) * g_now[1]];
                    partials.push([(step, g_next), (step - 1, scaled)]);
                }
            }
        }
        for b in &self.bounds {
            constraints.push(b.sign * (xs[b.step][b.component] - b.limit));
        }

        let gradient = if let Some(weights) = weights {
            let w = weights(&constraints);
            for (t, parts) in partials.iter().enumerate() {
                if w[t] == 0.0 {
                    continue;
                }
                for &(j, g) in parts {
                    gx[j][0] += w[t] * g[0];
                    gx[j][1] += w[t] * g[1];
                }
            }
            let offset = self.terms.len();
            for (i, b) in self.bounds.iter().enumerate() {
                gx[b.step][b.component] += w[offset + i] * b.sign;
            }
            // adjoint sweep
            let mut lambda = gx[n];
            for k in (0..n).rev() {
                let (a, bm) = (&roll.a[k], &roll.b[k]);
                for i in 0..INPUT_DIM {
                    gu[2 * k + i] += (0..STATE_DIM).map(|r| bm[r][i] * lambda[r]).sum::<f64>();
                }
                let mut next = gx[k];
                for (c, slot) in next.iter_mut().enumerate() {
                    *slot += (0..STATE_DIM).map(|r| a[r][c] * lambda[r]).sum::<f64>();
                }
                lambda = next;
            }
            Some(gu)
        } else {
            None
        };
        Evaluation {
            objective,
            constraints,
            gradient,
        }
    }
}

impl Nlp for OcpProblem {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, z: &[f64], weights: Option<WeightFn<'_>>) -> Evaluation {
        self.evaluate_full(z, weights)
    }
}
