use serde::{Deserialize, Serialize};

use crate::constraints::Mat2;
use crate::{Error, Result};

/// Sampling interval of pedestrian tracks, seconds.
pub const SAMPLE_DT: f64 = 0.4;
/// Observed history length.
pub const HISTORY_LEN: usize = 8;
/// Forecast length.
pub const FORECAST_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PedObservation {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl PedObservation {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

/// The last [`HISTORY_LEN`] observations of one pedestrian, oldest first,
/// spaced [`SAMPLE_DT`] apart.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    observations: [PedObservation; HISTORY_LEN],
}

impl HistoryWindow {
    pub fn new(observations: &[PedObservation]) -> Result<Self> {
        let observations: [PedObservation; HISTORY_LEN] =
            observations.try_into().map_err(|_| {
                Error::InvalidInput(format!(
                    "history must hold exactly {HISTORY_LEN} observations, got {}",
                    observations.len()
                ))
            })?;
        if !observations.iter().all(PedObservation::is_finite) {
            return Err(Error::InvalidInput(
                "history contains non-finite values".into(),
            ));
        }
        Ok(Self { observations })
    }

    /// Builds a window from positions, deriving velocities by backward
    /// differences (the first sample reuses the first forward difference).
    pub fn from_positions(positions: &[[f64; 2]]) -> Result<Self> {
        let obs = observations_from_positions(positions);
        Self::new(&obs)
    }

    pub fn observations(&self) -> &[PedObservation; HISTORY_LEN] {
        &self.observations
    }

    pub fn last_position(&self) -> [f64; 2] {
        self.observations[HISTORY_LEN - 1].position()
    }
}

/// Finite-difference velocities for a contiguous position sequence.
pub fn observations_from_positions(positions: &[[f64; 2]]) -> Vec<PedObservation> {
    let n = positions.len();
    (0..n)
        .map(|k| {
            let (a, b) = match (k, n) {
                (_, 1) => (0, 0),
                (0, _) => (0, 1),
                _ => (k - 1, k),
            };
            PedObservation {
                x: positions[k][0],
                y: positions[k][1],
                u: (positions[b][0] - positions[a][0]) / SAMPLE_DT,
                v: (positions[b][1] - positions[a][1]) / SAMPLE_DT,
            }
        })
        .collect()
}

/// Predicted position distribution at one future step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStep {
    pub mean: [f64; 2],
    pub covariance: Mat2,
}

impl GaussianStep {
    pub fn new(mean: [f64; 2], covariance: Mat2) -> Self {
        Self { mean, covariance }
    }

    pub fn point(mean: [f64; 2]) -> Self {
        Self::new(mean, [[0.0; 2]; 2])
    }

    pub fn diagonal(mean: [f64; 2], var_x: f64, var_y: f64) -> Self {
        Self::new(mean, [[var_x, 0.0], [0.0, var_y]])
    }

    pub fn validate(&self) -> Result<()> {
        crate::constraints::eigendecompose_2x2(&self.covariance).map(|_| ())
    }
}

/// Per-pedestrian forecast over the prediction horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianForecast {
    pub pedestrian_id: i64,
    /// Simulation step index of the last observation the forecast is based on.
    pub start_time: usize,
    /// Observed position at `start_time`.
    pub current_position: [f64; 2],
    pub steps: Vec<GaussianStep>,
}

impl GaussianForecast {
    pub fn validate(&self) -> Result<()> {
        if self.steps.len() != FORECAST_LEN {
            return Err(Error::InvalidInput(format!(
                "forecast must have {FORECAST_LEN} steps, got {}",
                self.steps.len()
            )));
        }
        self.steps.iter().try_for_each(GaussianStep::validate)
    }

    /// Copy with every covariance zeroed (deterministic prediction).
    pub fn without_uncertainty(&self) -> Self {
        Self {
            steps: self
                .steps
                .iter()
                .map(|s| GaussianStep::point(s.mean))
                .collect(),
            ..self.clone()
        }
    }
}

/// Aleatoric / epistemic split of the predictive variance, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySplit {
    pub aleatoric: [f64; 2],
    pub epistemic: [f64; 2],
}

impl UncertaintySplit {
    pub fn total(&self) -> [f64; 2] {
        [
            self.aleatoric[0] + self.epistemic[0],
            self.aleatoric[1] + self.epistemic[1],
        ]
    }
}
