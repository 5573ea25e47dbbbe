//! Test-side oracles, independent of the library's own numerics.
#![allow(dead_code)]

use std::sync::OnceLock;

use socnav_core::dynamics::{derivative, ControlInput, RobotState, VehicleParams};
use socnav_core::harness::synthetic_training_tracks;
use socnav_core::predictor::{
    train_ensemble, windows_from_track, Ensemble, TrainConfig, TrainingSample,
};

/// Small ensemble trained once per test binary on the synthetic tracks.
pub fn fixed_ensemble() -> &'static Ensemble {
    static MODEL: OnceLock<Ensemble> = OnceLock::new();
    MODEL.get_or_init(|| {
        let config = TrainConfig {
            hidden: 32,
            epochs: 30,
            ..TrainConfig::default()
        };
        train_ensemble(&training_samples(), &config)
            .expect("training succeeds")
            .0
    })
}

pub fn training_samples() -> Vec<TrainingSample> {
    synthetic_training_tracks(0, 150)
        .iter()
        .flat_map(|t| windows_from_track(&t.positions, 1))
        .collect()
}

/// Fourth-order central difference.
pub fn derivative_5pt(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// erf from its alternating Maclaurin series, summed in extended form
/// (Kahan) for |x| ≤ 3.
pub fn erf_maclaurin(x: f64) -> f64 {
    assert!(x.abs() <= 3.0);
    let x2 = x * x;
    let mut term = x;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut n = 0.0_f64;
    loop {
        let contrib = term / (2.0 * n + 1.0);
        let y = contrib - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if contrib.abs() < 1e-20 {
            break;
        }
        n += 1.0;
        term *= -x2 / n;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

/// erf⁻¹ by bisection on [`erf_maclaurin`].
pub fn erf_inv_bisection(y: f64) -> f64 {
    let (mut lo, mut hi) = (-3.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf_maclaurin(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn euler(
    x0: &RobotState,
    u: &ControlInput,
    duration: f64,
    substeps: usize,
    p: &VehicleParams,
) -> [f64; 7] {
    let h = duration / substeps as f64;
    let mut x = x0.to_array();
    for _ in 0..substeps {
        let d = derivative(&RobotState::from_array(x), u, p);
        for i in 0..7 {
            x[i] += h * d[i];
        }
    }
    x
}

/// Fine explicit Euler under a constant input, Richardson-extrapolated from
/// `substeps` and `2·substeps` to second order.
pub fn euler_oracle(
    x0: &RobotState,
    u: &ControlInput,
    duration: f64,
    substeps: usize,
    p: &VehicleParams,
) -> [f64; 7] {
    let coarse = euler(x0, u, duration, substeps, p);
    let fine = euler(x0, u, duration, 2 * substeps, p);
    std::array::from_fn(|i| 2.0 * fine[i] - coarse[i])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// ‖a − b‖∞ / max(‖a‖∞, ‖b‖∞).
pub fn normwise_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        max_abs_diff(a, b) / scale
    }
}
