//! Kinematic-car robot model with fixed-step RK4 integration.
//!
//! State layout is `[p_x, p_y, φ, v_x, v_y, r, δ]`: world position, heading,
//! body-frame velocities, yaw rate and steering angle. Inputs are the net
//! driving force and the steering rate.
//!
//! The lateral and yaw channels are driven by the combined term
//! `v̇_x + δ·v_x`, split by the axle geometry. Forward acceleration therefore
//! excites yaw even with a centred wheel; the planner has to counter-steer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub const STATE_DIM: usize = 7;
pub const INPUT_DIM: usize = 2;

pub type StateVec = [f64; STATE_DIM];
pub type StateJacobian = [[f64; STATE_DIM]; STATE_DIM];
pub type InputJacobian = [[f64; INPUT_DIM]; STATE_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub p_x: f64,
    pub p_y: f64,
    /// Heading, radians.
    pub phi: f64,
    pub v_x: f64,
    pub v_y: f64,
    /// Yaw rate, rad/s.
    pub r: f64,
    /// Steering angle, radians.
    pub steer: f64,
}

impl RobotState {
    pub fn at(p_x: f64, p_y: f64, phi: f64) -> Self {
        Self {
            p_x,
            p_y,
            phi,
            ..Self::default()
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.p_x, self.p_y]
    }

    pub fn to_array(&self) -> StateVec {
        [
            self.p_x, self.p_y, self.phi, self.v_x, self.v_y, self.r, self.steer,
        ]
    }

    pub fn from_array(a: StateVec) -> Self {
        Self {
            p_x: a[0],
            p_y: a[1],
            phi: a[2],
            v_x: a[3],
            v_y: a[4],
            r: a[5],
            steer: a[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Net driving force along the body axis, N.
    pub force: f64,
    /// Steering rate, rad/s.
    pub steer_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        force: 0.0,
        steer_rate: 0.0,
    };

    pub fn new(force: f64, steer_rate: f64) -> Self {
        Self { force, steer_rate }
    }

    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.force, self.steer_rate]
    }

    pub fn from_array(a: [f64; INPUT_DIM]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// Box bounds on the control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputBounds {
    pub max_force: f64,
    pub max_steer_rate: f64,
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            max_force: 4.0,
            max_steer_rate: 0.3 * PI,
        }
    }
}

impl InputBounds {
    pub fn upper(&self) -> [f64; INPUT_DIM] {
        [self.max_force, self.max_steer_rate]
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        u.force.abs() <= self.max_force && u.steer_rate.abs() <= self.max_steer_rate
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.force.clamp(-self.max_force, self.max_force),
            u.steer_rate
                .clamp(-self.max_steer_rate, self.max_steer_rate),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    /// CoG to rear axle, m.
    pub l_rear: f64,
    /// CoG to front axle, m.
    pub l_front: f64,
    /// Robot bounding radius, m.
    pub radius: f64,
    /// Steering angle bound, rad.
    pub max_steer: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 10.0,
            l_rear: 0.25,
            l_front: 0.25,
            radius: 0.3,
            max_steer: 0.6,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.mass > 0.0
            && self.l_rear > 0.0
            && self.l_front > 0.0
            && self.radius > 0.0
            && self.max_steer > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput(format!(
                "vehicle parameters must be positive: {self:?}"
            )))
        }
    }

    fn wheelbase(&self) -> f64 {
        self.l_rear + self.l_front
    }
}

/// Continuous-time right-hand side.
pub fn derivative(state: &RobotState, input: &ControlInput, params: &VehicleParams) -> StateVec {
    deriv(&state.to_array(), &input.to_array(), params)
}

fn deriv(x: &StateVec, u: &[f64; INPUT_DIM], p: &VehicleParams) -> StateVec {
    let (s, c) = x[2].sin_cos();
    let (v_x, v_y, steer) = (x[3], x[4], x[6]);
    let v_x_dot = u[0] / p.mass;
    let drive = v_x_dot + steer * v_x;
    let l = p.wheelbase();
    [
        v_x * c - v_y * s,
        v_x * s + v_y * c,
        x[5],
        v_x_dot,
        drive * p.l_rear / l,
        drive / l,
        u[1],
    ]
}

fn deriv_jacobians(x: &StateVec, p: &VehicleParams) -> (StateJacobian, InputJacobian) {
    let (s, c) = x[2].sin_cos();
    let (v_x, v_y, steer) = (x[3], x[4], x[6]);
    let l = p.wheelbase();
    let mut a = [[0.0; STATE_DIM]; STATE_DIM];
    let mut b = [[0.0; INPUT_DIM]; STATE_DIM];
    a[0][2] = -v_x * s - v_y * c;
    a[0][3] = c;
    a[0][4] = -s;
    a[1][2] = v_x * c - v_y * s;
    a[1][3] = s;
    a[1][4] = c;
    a[2][5] = 1.0;
    a[4][3] = steer * p.l_rear / l;
    a[4][6] = v_x * p.l_rear / l;
    a[5][3] = steer / l;
    a[5][6] = v_x / l;
    b[3][0] = 1.0 / p.mass;
    b[4][0] = p.l_rear / (l * p.mass);
    b[5][0] = 1.0 / (l * p.mass);
    b[6][1] = 1.0;
    (a, b)
}

fn axpy(x: &StateVec, h: f64, k: &StateVec) -> StateVec {
    std::array::from_fn(|i| x[i] + h * k[i])
}

fn rk4_raw(x: &StateVec, u: &[f64; INPUT_DIM], dt: f64, p: &VehicleParams) -> StateVec {
    let k1 = deriv(x, u, p);
    let k2 = deriv(&axpy(x, 0.5 * dt, &k1), u, p);
    let k3 = deriv(&axpy(x, 0.5 * dt, &k2), u, p);
    let k4 = deriv(&axpy(x, dt, &k3), u, p);
    std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// One RK4 step under zero-order hold, steering clamped afterwards.
pub fn step(
    state: &RobotState,
    input: &ControlInput,
    dt: f64,
    params: &VehicleParams,
) -> RobotState {
    let mut next = rk4_raw(&state.to_array(), &input.to_array(), dt, params);
    next[6] = next[6].clamp(-params.max_steer, params.max_steer);
    RobotState::from_array(next)
}

/// States `1..=N` reached by applying `controls` in order from `initial`.
pub fn rollout(
    initial: &RobotState,
    controls: &[ControlInput],
    dt: f64,
    params: &VehicleParams,
) -> Vec<RobotState> {
    let mut out = Vec::with_capacity(controls.len());
    let mut x = *initial;
    for u in controls {
        x = step(&x, u, dt, params);
        out.push(x);
    }
    out
}

/// RK4 step together with its exact Jacobians with respect to the state and
/// the input. Rows of a clamped steering component are zeroed.
pub fn step_with_jacobians(
    x: &StateVec,
    u: &[f64; INPUT_DIM],
    dt: f64,
    p: &VehicleParams,
) -> (StateVec, StateJacobian, InputJacobian) {
    let weights = [0.0, 0.5 * dt, 0.5 * dt, dt];
    let mut ks: [StateVec; 4] = [[0.0; STATE_DIM]; 4];
    // d(k_i)/dx and d(k_i)/du
    let mut dks_x: [StateJacobian; 4] = [[[0.0; STATE_DIM]; STATE_DIM]; 4];
    let mut dks_u: [InputJacobian; 4] = [[[0.0; INPUT_DIM]; STATE_DIM]; 4];

    for stage in 0..4 {
        let h = weights[stage];
        let (xs, dxs_x, dxs_u) = if stage == 0 {
            (*x, identity7(), [[0.0; INPUT_DIM]; STATE_DIM])
        } else {
            let prev = stage - 1;
            let xs = axpy(x, h, &ks[prev]);
            let mut jx = identity7();
            let mut ju = [[0.0; INPUT_DIM]; STATE_DIM];
            for i in 0..STATE_DIM {
                for j in 0..STATE_DIM {
                    jx[i][j] += h * dks_x[prev][i][j];
                }
                for j in 0..INPUT_DIM {
                    ju[i][j] = h * dks_u[prev][i][j];
                }
            }
            (xs, jx, ju)
        };
        ks[stage] = deriv(&xs, u, p);
        let (a, b) = deriv_jacobians(&xs, p);
        dks_x[stage] = matmul77(&a, &dxs_x);
        let mut ku = matmul72(&a, &dxs_u);
        for i in 0..STATE_DIM {
            for j in 0..INPUT_DIM {
                ku[i][j] += b[i][j];
            }
        }
        dks_u[stage] = ku;
    }

    let coeff = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
    let next: StateVec = std::array::from_fn(|i| {
        x[i] + dt / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i])
    });
    let mut next = next;
    let mut jx = identity7();
    let mut ju = [[0.0; INPUT_DIM]; STATE_DIM];
    for stage in 0..4 {
        let c = coeff[stage];
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                jx[i][j] += c * dks_x[stage][i][j];
            }
            for j in 0..INPUT_DIM {
                ju[i][j] += c * dks_u[stage][i][j];
            }
        }
    }
    if next[6].abs() > p.max_steer {
        next[6] = next[6].clamp(-p.max_steer, p.max_steer);
        jx[6] = [0.0; STATE_DIM];
        ju[6] = [0.0; INPUT_DIM];
    }
    (next, jx, ju)
}

fn identity7() -> StateJacobian {
    let mut m = [[0.0; STATE_DIM]; STATE_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn matmul77(a: &StateJacobian, b: &StateJacobian) -> StateJacobian {
    let mut m = [[0.0; STATE_DIM]; STATE_DIM];
    for i in 0..STATE_DIM {
        for k in 0..STATE_DIM {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..STATE_DIM {
                m[i][j] += aik * b[k][j];
            }
        }
    }
    m
}

fn matmul72(a: &StateJacobian, b: &InputJacobian) -> InputJacobian {
    let mut m = [[0.0; INPUT_DIM]; STATE_DIM];
    for i in 0..STATE_DIM {
        for k in 0..STATE_DIM {
            for j in 0..INPUT_DIM {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}
