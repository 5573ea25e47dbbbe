mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use socnav_core::predictor::{
    decompose_uncertainty, decompose_uncertainty_axis, from_json, mixture_moments, to_json,
    train_ensemble, windows_from_track, Architecture, Ensemble, EnsembleMember, HistoryWindow,
    TrainConfig, TrainingMetadata, FORECAST_LEN, SAMPLE_DT,
};

fn history() -> HistoryWindow {
    let positions: Vec<[f64; 2]> = (0..8)
        .map(|k| [1.0 + 0.5 * k as f64, -2.0 + 0.1 * (k * k) as f64])
        .collect();
    HistoryWindow::from_positions(&positions).unwrap()
}

#[test]
fn seeded_member_output_is_pinned() {
    let member = EnsembleMember::initialize(Architecture::new(8), 42);
    let out = member.forward(&history()).unwrap();
    let got = [
        out.means[0][0],
        out.means[0][1],
        out.variances[0][0],
        out.means[11][0],
        out.means[11][1],
        out.variances[11][1],
    ];
    let pinned = PINNED_FORWARD;
    for (g, p) in got.iter().zip(pinned) {
        assert!((g - p).abs() <= 1e-12 * p.abs().max(1.0), "{got:?}");
    }
}

const PINNED_FORWARD: [f64; 6] = [
    4.478309665606857,
    3.058087372563985,
    0.5299944018291404,
    4.963155357563634,
    2.968651691833698,
    0.472384991650069,
];

#[test]
fn single_member_ensemble_is_that_member() {
    let member = EnsembleMember::initialize(Architecture::new(6), 5);
    let out = member.forward(&history()).unwrap();
    let e = Ensemble::new(vec![member], TrainingMetadata::default()).unwrap();
    let f = e.predict(&history(), 1, 0).unwrap();
    assert_eq!(f.steps.len(), FORECAST_LEN);
    for (k, s) in f.steps.iter().enumerate() {
        assert_eq!(s.mean, out.means[k]);
        assert!((s.covariance[0][0] - out.variances[k][0]).abs() <= 1e-15);
        assert!((s.covariance[1][1] - out.variances[k][1]).abs() <= 1e-15);
        assert_eq!(s.covariance[0][1], 0.0);
    }
}

#[test]
fn ensemble_is_invariant_to_member_order() {
    let members: Vec<_> = (0..3)
        .map(|s| EnsembleMember::initialize(Architecture::new(6), s))
        .collect();
    let a = Ensemble::new(members.clone(), TrainingMetadata::default()).unwrap();
    let b = Ensemble::new(
        members.into_iter().rev().collect(),
        TrainingMetadata::default(),
    )
    .unwrap();
    let fa = a.predict(&history(), 1, 0).unwrap();
    let fb = b.predict(&history(), 1, 0).unwrap();
    for (x, y) in fa.steps.iter().zip(&fb.steps) {
        for i in 0..2 {
            assert!((x.mean[i] - y.mean[i]).abs() <= 1e-12);
            assert!((x.covariance[i][i] - y.covariance[i][i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn three_member_split_matches_hand_evaluation() {
    let members = [
        ([1.0, 0.0], [0.1, 1.0]),
        ([2.0, 0.0], [0.2, 1.0]),
        ([3.0, 0.0], [0.3, 1.0]),
    ];
    let split = decompose_uncertainty(&members).unwrap();
    assert!((split.aleatoric[0] - 0.2).abs() < 1e-15);
    assert!((split.epistemic[0] - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(split.epistemic[1], 0.0);
    let (mu, var) = mixture_moments(&[(1.0, 0.1), (2.0, 0.2), (3.0, 0.3)]);
    assert!((mu - 2.0).abs() < 1e-15);
    assert!((var - (0.2 + 2.0 / 3.0)).abs() < 1e-14);
}

/// Constant-velocity extrapolation from the last two history samples.
fn cv_ade(samples: &[socnav_core::predictor::TrainingSample]) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let last = s.history.observations()[7];
        for (k, truth) in s.future.iter().enumerate() {
            let t = (k + 1) as f64 * SAMPLE_DT;
            let p = [last.x + last.u * t, last.y + last.v * t];
            total += (p[0] - truth[0]).hypot(p[1] - truth[1]);
        }
    }
    total / (samples.len() * FORECAST_LEN) as f64
}

#[test]
fn trained_on_constant_velocity_walks_competes_with_extrapolation() {
    // 2 cm observation noise; without it the baseline is exact and the
    // comparison is degenerate
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let samples: Vec<_> = (0..60)
        .flat_map(|i| {
            let heading = i as f64 * 0.37;
            let speed = 0.5 + 0.015 * i as f64;
            let from = [(i % 7) as f64 - 3.0, (i % 5) as f64 - 2.0];
            let positions: Vec<[f64; 2]> = (0..30)
                .map(|k| {
                    let t = k as f64 * SAMPLE_DT;
                    [
                        from[0] + speed * heading.cos() * t + noise.sample(&mut rng),
                        from[1] + speed * heading.sin() * t + noise.sample(&mut rng),
                    ]
                })
                .collect();
            windows_from_track(&positions, 1)
        })
        .collect();
    let config = TrainConfig {
        members: 1,
        epochs: 60,
        hidden: 16,
        ..TrainConfig::default()
    };
    let (ensemble, log) = train_ensemble(&samples, &config).unwrap();
    assert_eq!(log.len(), config.epochs);

    let mut total = 0.0;
    for s in &samples {
        let f = ensemble.predict(&s.history, 0, 0).unwrap();
        for (step, truth) in f.steps.iter().zip(&s.future) {
            total += (step.mean[0] - truth[0]).hypot(step.mean[1] - truth[1]);
        }
    }
    let ade = total / (samples.len() * FORECAST_LEN) as f64;
    let baseline = cv_ade(&samples);
    assert!(ade < baseline * 1.5, "ade {ade} vs baseline {baseline}");
    let meta = &ensemble.metadata;
    assert!(meta.final_nll[0] <= meta.initial_nll[0]);
}

#[test]
fn training_is_deterministic_and_model_file_is_exact() {
    let samples: Vec<_> = common::training_samples().into_iter().take(200).collect();
    let config = TrainConfig {
        members: 2,
        epochs: 2,
        hidden: 8,
        ..TrainConfig::default()
    };
    let (a, _) = train_ensemble(&samples, &config).unwrap();
    let (b, _) = train_ensemble(&samples, &config).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.members[0].params, a.members[1].params);
    assert_eq!(from_json(&to_json(&a).unwrap()).unwrap(), a);
}

proptest! {
    #[test]
    fn mixture_variance_splits_exactly(
        members in prop::collection::vec((-50.0f64..50.0, 1e-6f64..5.0), 1..10)
    ) {
        let (_, total) = mixture_moments(&members);
        let (aleatoric, epistemic) = decompose_uncertainty_axis(&members);
        prop_assert!(aleatoric >= 0.0 && epistemic >= 0.0);
        prop_assert!((total - (aleatoric + epistemic)).abs() <= 1e-12 * total.max(1.0));
        prop_assert!(total >= epistemic - 1e-12 * total.max(1.0));
    }

    #[test]
    fn forward_variances_are_positive(seed in 0u64..500, scale in 0.1f64..30.0) {
        let mut member = EnsembleMember::initialize(Architecture::new(4), seed);
        for p in &mut member.params {
            *p *= scale;
        }
        let out = member.forward(&history()).unwrap();
        prop_assert!(out.variances.iter().flatten().all(|v| *v > 0.0));
    }
}
