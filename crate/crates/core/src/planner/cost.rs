use crate::dynamics::{ControlInput, RobotState, StateVec, INPUT_DIM, STATE_DIM};

/// Wraps an angle difference into (−π, π].
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = a.sin().atan2(a.cos());
    if w == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        w
    }
}

/// State error with the heading component wrapped.
pub(crate) fn state_error(x: &StateVec, x_ref: &StateVec) -> StateVec {
    let mut e: StateVec = std::array::from_fn(|i| x[i] - x_ref[i]);
    e[2] = wrap_angle(e[2]);
    e
}

pub(crate) fn weighted_sq(e: &[f64], w: &[f64]) -> f64 {
    e.iter().zip(w).map(|(e, w)| w * e * e).sum()
}

/// ‖x − x_ref‖²_Q + ‖u‖²_R + ‖u − u_prev‖²_S with diagonal weights.
pub fn stage_cost(
    x: &RobotState,
    x_ref: &RobotState,
    u: &ControlInput,
    u_prev: &ControlInput,
    state_weights: &[f64; STATE_DIM],
    input_weights: &[f64; INPUT_DIM],
    rate_weights: &[f64; INPUT_DIM],
) -> f64 {
    let e = state_error(&x.to_array(), &x_ref.to_array());
    let u = u.to_array();
    let du: [f64; INPUT_DIM] = std::array::from_fn(|i| u[i] - u_prev.to_array()[i]);
    weighted_sq(&e, state_weights) + weighted_sq(&u, input_weights) + weighted_sq(&du, rate_weights)
}

/// ‖x_N − x_ref‖²_P.
pub fn terminal_cost(
    x: &RobotState,
    x_ref: &RobotState,
    terminal_weights: &[f64; STATE_DIM],
) -> f64 {
    weighted_sq(
        &state_error(&x.to_array(), &x_ref.to_array()),
        terminal_weights,
    )
}
