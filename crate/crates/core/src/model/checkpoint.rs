use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::net::Model;
use crate::model::params::ParamStore;
use crate::numeric::Tensor;
use crate::scalar::Scalar;
use crate::text::Vocab;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub seed: u64,
    /// SHA-256 of the config serialized as JSON.
    pub config_hash: String,
    pub feature_dim: usize,
    pub parameter_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub manifest: Manifest,
    pub text_vocab: Vec<String>,
    pub answer_vocab: Vec<String>,
    pub tensors: Vec<StoredTensor>,
    pub scales: Vec<Vec<f64>>,
}

pub fn config_hash(config: &ModelConfig) -> Result<String> {
    let json = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}

fn store<T: Scalar>(name: &str, t: &Tensor<T>) -> StoredTensor {
    StoredTensor { name: name.to_string(), shape: t.shape().to_vec(), data: t.data().iter().map(|v| v.to_f64_lossy()).collect() }
}

fn load_tensor<T: Scalar>(s: &StoredTensor) -> Result<Tensor<T>> {
    Tensor::new(s.shape.clone(), s.data.iter().map(|&v| T::lit(v)).collect())
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &Model<T>) -> Result<Self> {
        if model.params.is_empty() {
            return Err(Error::Uninitialized("cannot save a model without parameters".into()));
        }
        let p = &model.params;
        Ok(Self {
            version: CHECKPOINT_VERSION,
            manifest: Manifest {
                config: model.config.clone(),
                seed: model.seed,
                config_hash: config_hash(&model.config)?,
                feature_dim: model.feature_dim,
                parameter_count: p.count(),
            },
            text_vocab: model.text_vocab.tokens().to_vec(),
            answer_vocab: model.answer_vocab.clone(),
            tensors: (0..p.len()).map(|i| store(p.name(i), p.get(i))).collect(),
            scales: model.dependency_scales.iter().map(|s| s.data().iter().map(|v| v.to_f64_lossy()).collect()).collect(),
        })
    }

    pub fn into_model<T: Scalar>(self) -> Result<Model<T>> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("checkpoint version {} (expected {CHECKPOINT_VERSION})", self.version)));
        }
        if config_hash(&self.manifest.config)? != self.manifest.config_hash {
            return Err(Error::Data("checkpoint config hash mismatch".into()));
        }
        let mut params = ParamStore::new();
        for t in &self.tensors {
            params.add(&t.name, load_tensor(t)?)?;
        }
        let width = self.manifest.config.decoder_width;
        let scales = self
            .scales
            .iter()
            .map(|s| {
                if s.len() != width {
                    return Err(Error::Data(format!("dependency scale of width {} (expected {width})", s.len())));
                }
                Ok(Tensor::row(s.iter().map(|&v| T::lit(v)).collect()))
            })
            .collect::<Result<Vec<_>>>()?;
        Model::from_parts(
            self.manifest.config,
            Vocab::from_tokens(self.text_vocab)?,
            self.answer_vocab,
            self.manifest.feature_dim,
            self.manifest.seed,
            params,
            scales,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    Checkpoint::from_model(model)?.save(path)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    Checkpoint::load(path)?.into_model()
}
