use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::DcnConfig;
use super::params::DcnParameters;
use crate::store::SurveyDataset;
use crate::tensor_io::{read_tensors, write_tensors, NamedTensor};
use crate::{Error, Result};

const KIND: &str = "dcn-checkpoint";

/// Raw keys behind the dense IDs the parameters were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointIndex {
    pub variables: Vec<String>,
    pub respondent_keys: Vec<i64>,
    pub years: Vec<i32>,
}

impl CheckpointIndex {
    pub fn from_dataset(ds: &SurveyDataset) -> Self {
        Self {
            variables: ds.questions().keys().to_vec(),
            respondent_keys: ds.individuals().keys().to_vec(),
            years: ds.years().keys().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: DcnParameters,
    pub config: DcnConfig,
    pub index: CheckpointIndex,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: DcnConfig,
    raw_dim: usize,
    individuals: usize,
    years: usize,
    index: CheckpointIndex,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &DcnParameters,
    config: &DcnConfig,
    index: &CheckpointIndex,
) -> Result<()> {
    let meta = Meta {
        config: config.clone(),
        raw_dim: params.raw_dim(),
        individuals: params.belief.nrows(),
        years: params.period.nrows(),
        index: index.clone(),
    };
    let mut tensors = Vec::new();
    params.visit(|name, shape, values| tensors.push(NamedTensor::new(name, shape.to_vec(), values.to_vec())));
    write_tensors(path, KIND, serde_json::to_value(meta)?, &tensors)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let (manifest, tensors) = read_tensors(path)?;
    if manifest.kind != KIND {
        return Err(Error::Format(format!("expected a {KIND}, found {}", manifest.kind)));
    }
    let meta: Meta = serde_json::from_value(manifest.meta)?;
    let mut params = DcnParameters::zeros(&meta.config, meta.raw_dim, meta.individuals, meta.years);
    let layout = params.layout();
    if layout.len() != tensors.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, configuration implies {}",
            tensors.len(),
            layout.len()
        )));
    }
    for ((slot, (name, shape)), t) in params.slices_mut().into_iter().zip(&layout).zip(&tensors) {
        if *name != t.name || *shape != t.shape {
            return Err(Error::Format(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                t.name, t.shape, name, shape
            )));
        }
        slot.copy_from_slice(&t.data);
    }
    Ok(Checkpoint {
        params,
        config: meta.config,
        index: meta.index,
    })
}
