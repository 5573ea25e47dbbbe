use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, TrainingMetadata};
use super::network::{Architecture, EnsembleMember};
use super::types::{observations_from_positions, HistoryWindow, FORECAST_LEN, HISTORY_LEN};
use crate::{Error, Result};

/// One supervised example: 8 observed states and the 12 true future
/// positions that followed them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub history: HistoryWindow,
    pub future: [[f64; 2]; FORECAST_LEN],
}

/// Every length-20 window of a contiguous position track, stride `stride`.
pub fn windows_from_track(positions: &[[f64; 2]], stride: usize) -> Vec<TrainingSample> {
    let span = HISTORY_LEN + FORECAST_LEN;
    if positions.len() < span {
        return Vec::new();
    }
    let obs = observations_from_positions(positions);
    (0..=positions.len() - span)
        .step_by(stride.max(1))
        .filter_map(|start| {
            let history = HistoryWindow::new(&obs[start..start + HISTORY_LEN]).ok()?;
            let mut future = [[0.0; 2]; FORECAST_LEN];
            future.copy_from_slice(&positions[start + HISTORY_LEN..start + span]);
            Some(TrainingSample { history, future })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub members: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Base seed; member `i` uses `seed + i`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            members: 3,
            epochs: 100,
            batch_size: 64,
            hidden: 64,
            learning_rate: 8e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.members >= 1
            && self.batch_size >= 1
            && self.hidden >= 1
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid training config: {self:?}"
            )))
        }
    }

    pub fn member_seed(&self, member: usize) -> u64 {
        self.seed.wrapping_add(member as u64)
    }
}

/// Per-epoch mean batch NLL of one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub member: usize,
    pub epoch: usize,
    pub nll: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Trains one member from its own seed.
pub fn train_member(
    dataset: &[TrainingSample],
    config: &TrainConfig,
    member_index: usize,
) -> Result<(EnsembleMember, f64, f64, Vec<EpochRecord>)> {
    let seed = config.member_seed(member_index);
    let mut member = EnsembleMember::initialize(Architecture::new(config.hidden), seed);
    let diverged = |epoch| Error::TrainingDiverged {
        member: member_index,
        epoch,
    };
    let initial = member.mean_nll(dataset).map_err(|_| diverged(0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_F42D_4C95_7F2D);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut adam = Adam::new(member.params.len());
    let mut log = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (loss, grad) = member.nll_gradient(&batch).map_err(|_| diverged(epoch))?;
            if !loss.is_finite() {
                return Err(diverged(epoch));
            }
            adam.step(&mut member.params, &grad, config);
            epoch_loss += loss;
            batches += 1;
        }
        let nll = epoch_loss / batches as f64;
        log::debug!("member {member_index} epoch {epoch}: nll {nll:.5}");
        log.push(EpochRecord {
            member: member_index,
            epoch,
            nll,
        });
    }
    let last_epoch = config.epochs;
    let final_nll = member.mean_nll(dataset).map_err(|_| diverged(last_epoch))?;
    if !final_nll.is_finite() {
        return Err(diverged(last_epoch));
    }
    Ok((member, initial, final_nll, log))
}

/// Trains `config.members` members independently (in parallel) on the whole
/// dataset, each with its own initialisation and shuffling seed.
pub fn train_ensemble(
    dataset: &[TrainingSample],
    config: &TrainConfig,
) -> Result<(Ensemble, Vec<EpochRecord>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("training dataset is empty".into()));
    }
    let results: Vec<_> = (0..config.members)
        .into_par_iter()
        .map(|i| train_member(dataset, config, i))
        .collect::<Result<_>>()?;

    let mut metadata = TrainingMetadata {
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        ..TrainingMetadata::default()
    };
    let mut members = Vec::with_capacity(config.members);
    let mut log = Vec::new();
    for (i, (member, initial, final_nll, records)) in results.into_iter().enumerate() {
        metadata.seeds.push(config.member_seed(i));
        metadata.initial_nll.push(initial);
        metadata.final_nll.push(final_nll);
        members.push(member);
        log.extend(records);
    }
    Ok((Ensemble::new(members, metadata)?, log))
}
