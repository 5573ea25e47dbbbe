//! Deep-ensemble probabilistic pedestrian forecasting.
//!
//! Each member maps 8 observed states to 12 per-axis Gaussian position
//! predictions; the ensemble collapses the uniform mixture of members into a
//! single Gaussian per step.

mod ensemble;
mod model_file;
mod network;
mod train;
mod types;

pub use ensemble::{
    decompose_uncertainty, decompose_uncertainty_axis, mixture_moments, Ensemble, TrainingMetadata,
};
pub use model_file::{from_json, load_model, model_hash, save_model, to_json, MODEL_FORMAT};
pub use network::{
    softplus, variance_transform, Architecture, EnsembleMember, MemberOutput, VARIANCE_FLOOR,
};
pub use train::{
    train_ensemble, train_member, windows_from_track, EpochRecord, TrainConfig, TrainingSample,
};
pub use types::{
    observations_from_positions, GaussianForecast, GaussianStep, HistoryWindow, PedObservation,
    UncertaintySplit, FORECAST_LEN, HISTORY_LEN, SAMPLE_DT,
};

use crate::{Error, Result};

/// Two-axis Gaussian NLL without the additive constant:
/// Σ_axes [ ln σ² / 2 + (y − μ)² / (2σ²) ].
pub fn gaussian_nll(mean: [f64; 2], variance: [f64; 2], target: [f64; 2]) -> Result<f64> {
    if !(variance[0] > 0.0 && variance[1] > 0.0) {
        return Err(Error::Domain(format!(
            "variance must be positive, got {variance:?}"
        )));
    }
    Ok((0..2)
        .map(|i| {
            let r = target[i] - mean[i];
            0.5 * variance[i].ln() + r * r / (2.0 * variance[i])
        })
        .sum())
}
