mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use socnav_core::constraints::ConstraintMode;
use socnav_core::dynamics::{ControlInput, RobotState};
use socnav_core::planner::{
    build_ocp, plan_step, solve_ocp, OcpProblem, PlannerConfig, SolverStatus,
};
use socnav_core::predictor::{GaussianForecast, GaussianStep, SAMPLE_DT};

use common::{derivative_5pt, normwise_relative_error};

fn config(mode: ConstraintMode, horizon: usize, goal: [f64; 2]) -> PlannerConfig {
    PlannerConfig {
        mode,
        horizon,
        goal,
        prune_radius: None,
        ..PlannerConfig::default()
    }
}

/// Pedestrian walking from `from` at `vel` with variance growing 0.01 m² per step.
fn walker(id: i64, from: [f64; 2], vel: [f64; 2]) -> GaussianForecast {
    GaussianForecast {
        pedestrian_id: id,
        start_time: 0,
        current_position: from,
        steps: (1..=12)
            .map(|k| {
                let t = k as f64 * SAMPLE_DT;
                let var = 0.01 * k as f64;
                GaussianStep::diagonal([from[0] + vel[0] * t, from[1] + vel[1] * t], var, 0.5 * var)
            })
            .collect(),
    }
}

fn moving_robot() -> RobotState {
    RobotState {
        v_x: 0.8,
        ..RobotState::at(0.0, 0.1, 0.05)
    }
}

#[test]
fn collision_residual_counts() {
    let one = build_ocp(
        &moving_robot(),
        ControlInput::ZERO,
        &[walker(1, [4.0, 0.0], [-1.0, 0.0])],
        &config(ConstraintMode::Hard, 8, [8.0, 0.0]),
    )
    .unwrap();
    assert_eq!(one.num_collision_residuals(), 8);

    let crowd: Vec<_> = (0..20)
        .map(|i| {
            walker(
                i,
                [2.0 + i as f64, if i % 2 == 0 { 5.0 } else { -5.0 }],
                [0.0, 1.0],
            )
        })
        .collect();
    let many = build_ocp(
        &moving_robot(),
        ControlInput::ZERO,
        &crowd,
        &config(ConstraintMode::cbf(), 12, [8.0, 0.0]),
    )
    .unwrap();
    assert_eq!(many.num_collision_residuals(), 240);

    let empty = build_ocp(
        &moving_robot(),
        ControlInput::ZERO,
        &[],
        &config(ConstraintMode::cbf(), 12, [8.0, 0.0]),
    )
    .unwrap();
    assert_eq!(empty.num_collision_residuals(), 0);
}

fn random_problem(rng: &mut ChaCha8Rng, mode: ConstraintMode) -> (OcpProblem, Vec<f64>) {
    let n = rng.random_range(1..=4);
    let forecasts: Vec<_> = (0..rng.random_range(1..=3))
        .map(|i| {
            walker(
                i,
                [rng.random_range(1.0..4.0), rng.random_range(-2.0..2.0)],
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            )
        })
        .collect();
    let state = RobotState {
        v_x: rng.random_range(0.0..1.2),
        r: rng.random_range(-0.2..0.2),
        steer: rng.random_range(-0.3..0.3),
        ..RobotState::at(0.0, 0.0, rng.random_range(-0.5..0.5))
    };
    let mut cfg = config(
        mode,
        n,
        [rng.random_range(3.0..8.0), rng.random_range(-1.0..1.0)],
    );
    cfg.corridor = Some([-3.0, 3.0]);
    let p = build_ocp(&state, ControlInput::new(0.5, -0.1), &forecasts, &cfg).unwrap();
    let z: Vec<f64> = (0..2 * n)
        .map(|i| {
            if i % 2 == 0 {
                rng.random_range(-3.0..3.0)
            } else {
                rng.random_range(-0.5..0.5)
            }
        })
        .collect();
    (p, z)
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..30 {
        let mode = [
            ConstraintMode::Hard,
            ConstraintMode::chance(),
            ConstraintMode::cbf(),
        ][trial % 3];
        let (p, z) = random_problem(&mut rng, mode);
        let m = p.num_residuals();
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let numeric = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            (0..z.len())
                .map(|i| {
                    derivative_5pt(
                        |h| {
                            let mut zz = z.clone();
                            zz[i] += h;
                            f(&zz)
                        },
                        0.0,
                        1e-4,
                    )
                })
                .collect()
        };
        let fd_obj = numeric(&|zz| p.objective(zz));
        let err = normwise_relative_error(&p.objective_gradient(&z), &fd_obj);
        assert!(
            err < 1e-5,
            "trial {trial}: objective gradient error {err:.2e}"
        );

        let fd_res = numeric(&|zz| {
            p.residuals(zz)
                .iter()
                .zip(&weights)
                .map(|(c, w)| c * w)
                .sum()
        });
        let err = normwise_relative_error(&p.weighted_residual_gradient(&z, &weights), &fd_res);
        assert!(
            err < 1e-5,
            "trial {trial}: residual gradient error {err:.2e}"
        );
    }
}

#[test]
fn robot_at_goal_stays_put() {
    let cfg = config(ConstraintMode::cbf(), 12, [0.0, 0.0]);
    let out = plan_step(&RobotState::default(), ControlInput::ZERO, &[], &cfg, None);
    assert!(out.fallback.is_none());
    let u = out.control;
    assert!(u.force.hypot(u.steer_rate) <= 1e-3, "{u:?}");
}

#[test]
fn unobstructed_plan_heads_for_goal() {
    let cfg = config(ConstraintMode::cbf(), 12, [5.0, 0.0]);
    let p = build_ocp(&moving_robot(), ControlInput::ZERO, &[], &cfg).unwrap();
    let sol = solve_ocp(&p, None).unwrap();
    let last = sol.states.last().unwrap();
    assert!(sol.controls[0].force > 0.0);
    assert!(last.p_x > 2.0 && last.p_y.abs() < 0.5, "{last:?}");
    for u in &sol.controls {
        assert!(cfg.input_bounds.contains(u));
    }
}

#[test]
fn outer_iterations_reduce_goal_error() {
    let state = moving_robot();
    let mut errors = Vec::new();
    for outer in 1..=4 {
        let mut cfg = config(ConstraintMode::cbf(), 12, [6.0, 1.0]);
        cfg.solver.max_outer_iterations = outer;
        cfg.solver.max_inner_iterations = 5;
        let p = build_ocp(&state, ControlInput::ZERO, &[], &cfg).unwrap();
        let sol = solve_ocp(&p, None).unwrap();
        let last = sol.states.last().unwrap();
        errors.push(((last.p_x - 6.0).hypot(last.p_y - 1.0), sol.objective));
        let objs = &sol.outer_objectives;
        assert!(objs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{objs:?}");
    }
    for w in errors.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9, "{errors:?}");
    }
    assert!(errors.last().unwrap().0 < errors[0].0, "{errors:?}");
}

#[test]
fn head_on_cbf_solution_is_feasible() {
    let cfg = config(ConstraintMode::cbf(), 12, [8.0, 0.0]);
    let ped = walker(1, [6.0, 0.05], [-1.2, 0.0]);
    let p = build_ocp(&moving_robot(), ControlInput::ZERO, &[ped], &cfg).unwrap();
    let sol = solve_ocp(&p, None).unwrap();
    assert!(!matches!(
        sol.status,
        SolverStatus::InfeasibleRelaxed { .. }
    ));
    let z = OcpProblem::pack(&sol.controls);
    let worst = p.residuals(&z).into_iter().fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-4, "worst residual {worst}");
}

#[test]
fn blocked_start_is_infeasible_relaxed() {
    let cfg = config(ConstraintMode::Hard, 6, [0.3, 0.0]);
    let ped = GaussianForecast {
        pedestrian_id: 1,
        start_time: 0,
        current_position: [0.1, 0.0],
        steps: vec![GaussianStep::diagonal([0.1, 0.0], 0.01, 0.01); 12],
    };
    let p = build_ocp(&RobotState::default(), ControlInput::ZERO, &[ped], &cfg).unwrap();
    let sol = solve_ocp(&p, None).unwrap();
    match sol.status {
        SolverStatus::InfeasibleRelaxed { max_violation } => {
            assert!(max_violation > 1e-4);
            assert_eq!(max_violation, sol.max_violation);
        }
        other => panic!("expected infeasible_relaxed, got {other:?}"),
    }
}

#[test]
fn warm_start_is_not_worse_than_cold() {
    let cfg = config(ConstraintMode::chance(), 12, [8.0, 0.0]);
    let mut state = moving_robot();
    let mut warm: Option<Vec<ControlInput>> = None;
    let ped = |k: usize| walker(1, [7.0 - 1.2 * SAMPLE_DT * k as f64, 0.2], [-1.2, 0.0]);
    for k in 0..6 {
        let p = build_ocp(&state, ControlInput::ZERO, &[ped(k)], &cfg).unwrap();
        let cold = solve_ocp(&p, None).unwrap();
        let hot = solve_ocp(&p, warm.as_deref()).unwrap();
        let tol = cfg.solver.kkt_tolerance;
        // results are ranked feasibility first, then violation, then objective
        let hot_wins = match (hot.max_violation <= tol, cold.max_violation <= tol) {
            (true, false) => true,
            (false, false) => hot.max_violation <= cold.max_violation,
            _ => false,
        };
        assert!(
            hot_wins || hot.objective <= cold.objective + 1e-6,
            "step {k}: {} vs {} ({:e} vs {:e})",
            hot.objective,
            cold.objective,
            hot.max_violation,
            cold.max_violation
        );
        let mut shifted = hot.controls[1..].to_vec();
        shifted.push(*hot.controls.last().unwrap());
        warm = Some(shifted);
        state = hot.states[0];
    }
}

#[test]
fn receding_horizon_value_does_not_increase() {
    // static world, no pedestrians: re-solving from the predicted next state
    // with the shifted solution is never worse than that shifted tail
    let cfg = config(ConstraintMode::cbf(), 8, [4.0, 0.0]);
    let p = build_ocp(&moving_robot(), ControlInput::ZERO, &[], &cfg).unwrap();
    let first = solve_ocp(&p, None).unwrap();
    assert_eq!(first.status, SolverStatus::Converged);
    let mut shifted = first.controls[1..].to_vec();
    shifted.push(ControlInput::ZERO);
    let next = build_ocp(&first.states[0], first.controls[0], &[], &cfg).unwrap();
    let tail = next.objective(&OcpProblem::pack(&shifted));
    let second = solve_ocp(&next, Some(&shifted)).unwrap();
    assert_eq!(second.status, SolverStatus::Converged);
    assert!(
        second.objective <= tail + 1e-6,
        "{} vs {tail}",
        second.objective
    );
    assert!(second.objective <= first.objective + 1e-6);
}

#[test]
fn chance_excludes_a_hard_feasible_plan() {
    // coasting robot passes 0.55 m from a pedestrian that is standing still:
    // clear of r_o + a0 = 0.45 but inside the inflated chance radius
    let state = moving_robot();
    let standing = |var: f64| GaussianForecast {
        pedestrian_id: 1,
        start_time: 0,
        current_position: [2.0, 0.65],
        steps: vec![GaussianStep::diagonal([2.0, 0.65], var, var); 12],
    };
    let cfg = |mode| config(mode, 6, [6.0, 0.0]);
    let z = vec![0.0; 12];
    let hard = build_ocp(
        &state,
        ControlInput::ZERO,
        &[standing(0.0)],
        &cfg(ConstraintMode::Hard),
    )
    .unwrap();
    let chance = build_ocp(
        &state,
        ControlInput::ZERO,
        &[standing(0.04)],
        &cfg(ConstraintMode::chance()),
    )
    .unwrap();
    let m = hard.num_collision_residuals();
    let h = &hard.residuals(&z)[..m];
    let c = &chance.residuals(&z)[..m];
    assert!(h.iter().all(|v| *v >= 0.0), "{h:?}");
    assert!(c.iter().any(|v| *v < 0.0), "{c:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chance_feasible_set_is_inside_point_mass_hard(
        seed in 0u64..10_000,
        delta in 0.01f64..0.45,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forecasts = vec![walker(1, [3.0, 0.3], [-0.8, 0.1]), walker(2, [2.0, -1.5], [0.2, 0.9])];
        let point_mass: Vec<_> = forecasts.iter().map(|f| f.without_uncertainty()).collect();
        let state = moving_robot();
        let chance = build_ocp(&state, ControlInput::ZERO, &forecasts,
            &config(ConstraintMode::Chance { delta }, 6, [6.0, 0.0])).unwrap();
        let hard = build_ocp(&state, ControlInput::ZERO, &point_mass,
            &config(ConstraintMode::Hard, 6, [6.0, 0.0])).unwrap();
        let m = chance.num_collision_residuals();
        for _ in 0..50 {
            let z: Vec<f64> = (0..12)
                .map(|i| if i % 2 == 0 { rng.random_range(-4.0..4.0) } else { rng.random_range(-0.9..0.9) })
                .collect();
            let c = chance.residuals(&z);
            let h = hard.residuals(&z);
            for j in 0..m {
                prop_assert!(c[j] < h[j]);
                if c[j] >= 0.0 {
                    prop_assert!(h[j] >= 0.0);
                }
            }
        }
    }
}
