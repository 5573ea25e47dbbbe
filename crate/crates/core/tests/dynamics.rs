mod common;

use proptest::prelude::*;

use socnav_core::dynamics::{rollout, step, ControlInput, RobotState, VehicleParams};

use common::{euler_oracle, max_abs_diff};

fn curved() -> (RobotState, ControlInput) {
    let x0 = RobotState {
        v_x: 1.0,
        steer: 0.3,
        ..RobotState::at(0.5, -0.2, 0.4)
    };
    (x0, ControlInput::new(0.5, 0.1))
}

#[test]
fn curved_step_matches_fine_euler() {
    let p = VehicleParams::default();
    let (x0, u) = curved();
    // 10 000 substeps, Richardson-combined with 20 000 to remove the O(h) term
    let oracle = euler_oracle(&x0, &u, 0.4, 10_000, &p);
    let coarse = step(&x0, &u, 0.4, &p).to_array();
    let half = step(&x0, &u, 0.2, &p);
    let fine = step(&half, &u, 0.2, &p).to_array();
    let (e1, e2) = (max_abs_diff(&coarse, &oracle), max_abs_diff(&fine, &oracle));
    assert!(e1 < 1e-4, "{coarse:?} vs {oracle:?}");
    // two half steps: local O(h^5) error falls by about 16x
    assert!(e2 < e1 / 10.0, "{e1:e} -> {e2:e}");
}

#[test]
fn straight_line_along_heading() {
    let p = VehicleParams::default();
    let phi = 0.7_f64;
    let x0 = RobotState {
        v_x: 1.3,
        ..RobotState::at(2.0, 1.0, phi)
    };
    let states = rollout(&x0, &[ControlInput::ZERO; 10], 0.4, &p);
    for (k, s) in states.iter().enumerate() {
        let d = 1.3 * 0.4 * (k + 1) as f64;
        assert!((s.p_x - (2.0 + d * phi.cos())).abs() < 1e-12);
        assert!((s.p_y - (1.0 + d * phi.sin())).abs() < 1e-12);
        assert_eq!(s.phi, phi);
    }
}

#[test]
fn mixed_rollout_is_iterated_steps() {
    let p = VehicleParams::default();
    let controls: Vec<_> = (0..7)
        .map(|k| ControlInput::new(3.0 - k as f64, 0.2 * (k as f64).sin()))
        .collect();
    let x0 = RobotState::at(0.0, 0.0, 0.1);
    let states = rollout(&x0, &controls, 0.4, &p);
    let mut x = x0;
    for (u, s) in controls.iter().zip(&states) {
        x = step(&x, u, 0.4, &p);
        assert_eq!(x, *s);
    }
}

proptest! {
    #[test]
    fn small_steps_approach_identity(
        v in -1.5f64..1.5,
        vy in -0.5f64..0.5,
        r in -1.0f64..1.0,
        steer in -0.6f64..0.6,
        force in -4.0f64..4.0,
        rate in -0.9f64..0.9,
        dt in 1e-5f64..0.01,
    ) {
        let p = VehicleParams::default();
        let x = RobotState { v_x: v, v_y: vy, r, steer, ..RobotState::at(0.0, 0.0, 0.3) };
        let next = step(&x, &ControlInput::new(force, rate), dt, &p);
        let moved = max_abs_diff(&next.to_array(), &x.to_array());
        // bounded derivative on this state box
        prop_assert!(moved <= 3.0 * dt, "moved {moved} for dt {dt}");
    }

    #[test]
    fn steering_stays_bounded(steer in -0.6f64..0.6, rate in -0.95f64..0.95, n in 1usize..20) {
        let p = VehicleParams::default();
        let x0 = RobotState { steer, v_x: 0.5, ..RobotState::default() };
        for s in rollout(&x0, &vec![ControlInput::new(1.0, rate); n], 0.4, &p) {
            prop_assert!(s.steer.abs() <= p.max_steer);
            prop_assert!(s.is_finite());
        }
    }
}
