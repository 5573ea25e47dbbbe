//! Versioned JSON model file: architecture, every member's parameters and the
//! training metadata in one self-describing document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ensemble::{Ensemble, TrainingMetadata};
use super::network::{Architecture, EnsembleMember};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "socnav-ensemble/v1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    architecture: Architecture,
    members: Vec<Vec<f64>>,
    metadata: TrainingMetadata,
}

pub fn to_json(ensemble: &Ensemble) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        architecture: ensemble.architecture(),
        members: ensemble.members.iter().map(|m| m.params.clone()).collect(),
        metadata: ensemble.metadata.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<Ensemble> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(file.format));
    }
    let members = file
        .members
        .into_iter()
        .map(|params| EnsembleMember {
            architecture: file.architecture,
            params,
        })
        .collect();
    Ensemble::new(members, file.metadata)
}

pub fn save_model(ensemble: &Ensemble, path: &Path) -> Result<()> {
    fs::write(path, to_json(ensemble)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// Hex SHA-256 of the serialised model, used to tag traces.
pub fn model_hash(ensemble: &Ensemble) -> Result<String> {
    let digest = Sha256::digest(to_json(ensemble)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
