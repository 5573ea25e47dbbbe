use serde::{Deserialize, Serialize};

use super::network::{Architecture, EnsembleMember, MemberOutput};
use super::types::{GaussianForecast, GaussianStep, HistoryWindow, UncertaintySplit};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Initialisation / shuffling seed of each member.
    pub seeds: Vec<u64>,
    /// Mean NLL over the training set before and after training, per member.
    pub initial_nll: Vec<f64>,
    pub final_nll: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
    pub metadata: TrainingMetadata,
}

impl Ensemble {
    pub fn new(members: Vec<EnsembleMember>, metadata: TrainingMetadata) -> Result<Self> {
        let e = Self { members, metadata };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .members
            .first()
            .ok_or_else(|| Error::InvalidInput("ensemble has no members".into()))?;
        for m in &self.members {
            if m.architecture != first.architecture {
                return Err(Error::InvalidInput(
                    "ensemble members have differing architectures".into(),
                ));
            }
            m.validate()?;
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.members[0].architecture
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Outputs of every member for one history.
    pub fn member_outputs(&self, history: &HistoryWindow) -> Result<Vec<MemberOutput>> {
        self.members.iter().map(|m| m.forward(history)).collect()
    }

    /// Uniform mixture of the member Gaussians collapsed to one Gaussian per
    /// step, with diagonal covariance.
    pub fn predict(
        &self,
        history: &HistoryWindow,
        pedestrian_id: i64,
        start_time: usize,
    ) -> Result<GaussianForecast> {
        if self.members.is_empty() {
            return Err(Error::InvalidInput("ensemble has no members".into()));
        }
        let outputs = self.member_outputs(history)?;
        let horizon = outputs[0].means.len();
        let mut steps = Vec::with_capacity(horizon);
        let mut per_axis = vec![(0.0, 0.0); outputs.len()];
        for k in 0..horizon {
            let mut mean = [0.0; 2];
            let mut var = [0.0; 2];
            for axis in 0..2 {
                for (slot, o) in per_axis.iter_mut().zip(&outputs) {
                    *slot = (o.means[k][axis], o.variances[k][axis]);
                }
                let (mu, v) = mixture_moments(&per_axis);
                mean[axis] = mu;
                var[axis] = v;
            }
            steps.push(GaussianStep::diagonal(mean, var[0], var[1]));
        }
        Ok(GaussianForecast {
            pedestrian_id,
            start_time,
            current_position: history.last_position(),
            steps,
        })
    }
}

/// Mixture mean and variance of equally weighted 1-D Gaussians given as
/// `(mean, variance)` pairs: μ* = M⁻¹Σμᵢ, σ*² = M⁻¹Σ(σᵢ² + μᵢ²) − μ*².
/// The second moment is taken about the first member's mean (the formula
/// is shift-invariant), which avoids cancellation far from the origin.
/// Negative round-off is clamped to zero.
pub fn mixture_moments(members: &[(f64, f64)]) -> (f64, f64) {
    let m = members.len() as f64;
    let shift = members.first().map_or(0.0, |(mu, _)| *mu);
    let mean = members.iter().map(|(mu, _)| mu).sum::<f64>() / m;
    let second = members
        .iter()
        .map(|(mu, v)| v + (mu - shift) * (mu - shift))
        .sum::<f64>()
        / m;
    let offset = mean - shift;
    (mean, (second - offset * offset).max(0.0))
}

/// Split one step/axis of member outputs into the mean of the variances and
/// the population variance of the means. The variance is accumulated on
/// means shifted by the first member's, so identical members give exactly 0.
pub fn decompose_uncertainty_axis(members: &[(f64, f64)]) -> (f64, f64) {
    let m = members.len() as f64;
    let aleatoric = members.iter().map(|(_, v)| v).sum::<f64>() / m;
    let shift = members.first().map_or(0.0, |(mu, _)| *mu);
    let d1 = members.iter().map(|(mu, _)| mu - shift).sum::<f64>() / m;
    let d2 = members
        .iter()
        .map(|(mu, _)| (mu - shift) * (mu - shift))
        .sum::<f64>()
        / m;
    (aleatoric, (d2 - d1 * d1).max(0.0))
}

/// Two-axis uncertainty split for one forecast step given each member's
/// `(mean, variance)` output.
pub fn decompose_uncertainty(members: &[([f64; 2], [f64; 2])]) -> Result<UncertaintySplit> {
    if members.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one member output".into(),
        ));
    }
    let mut split = UncertaintySplit {
        aleatoric: [0.0; 2],
        epistemic: [0.0; 2],
    };
    for axis in 0..2 {
        let pairs: Vec<(f64, f64)> = members.iter().map(|(mu, v)| (mu[axis], v[axis])).collect();
        let (a, e) = decompose_uncertainty_axis(&pairs);
        split.aleatoric[axis] = a;
        split.epistemic[axis] = e;
    }
    Ok(split)
}
