use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{CATEGORY_SLOTS, DEGREE_STATS};
use super::EncoderError;
use crate::dataset::rng;

/// Neighbour blocks per layer: self, four channels, parent.
pub const LAYER_BLOCKS: usize = 6;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub pooled_dim: usize,
    pub stub_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            feature_dim: 128,
            hidden_dim: 128,
            layers: 5,
            pooled_dim: 1024,
            stub_dim: 32,
        }
    }
}

impl EncoderConfig {
    /// Same depth, narrow widths. Used where finite differences over many
    /// coordinates have to stay cheap.
    pub fn compact() -> Self {
        EncoderConfig {
            feature_dim: 16,
            hidden_dim: 16,
            layers: 5,
            pooled_dim: 32,
            stub_dim: 32,
        }
    }

    pub fn raw_dim(&self) -> usize {
        4 + CATEGORY_SLOTS + self.stub_dim
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.feature_dim + DEGREE_STATS
        } else {
            self.hidden_dim
        }
    }

    /// Name and shape of every tensor, in storage order.
    pub fn manifest(&self) -> Vec<(String, (usize, usize))> {
        let mut out = vec![
            ("feature.weight".to_string(), (self.raw_dim(), self.feature_dim)),
            ("feature.bias".to_string(), (1, self.feature_dim)),
        ];
        for l in 0..self.layers {
            out.push((format!("layer{l}.weight"), (LAYER_BLOCKS * self.layer_input(l), self.hidden_dim)));
            out.push((format!("layer{l}.bias"), (1, self.hidden_dim)));
        }
        out.push(("pool.weight".to_string(), (self.hidden_dim, self.pooled_dim)));
        out.push(("pool.bias".to_string(), (1, self.pooled_dim)));
        for c in ["top", "left", "parallel", "contain"] {
            out.push((format!("decoder.{c}"), (self.hidden_dim, self.hidden_dim)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub seed: u64,
    pub tensors: Vec<Array2<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TensorBlob {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    seed: u64,
    config: EncoderConfig,
    tensors: Vec<TensorBlob>,
}

impl EncoderParams {
    /// Seeded initialisation: He-uniform for ReLU inputs, Glorot-uniform for
    /// the pooling projection, small uniform decoder forms, zero biases.
    pub fn init(config: EncoderConfig, seed: u64) -> Self {
        let mut r = rng(seed);
        let tensors = config
            .manifest()
            .into_iter()
            .map(|(name, (rows, cols))| {
                let bound = if name.ends_with(".bias") {
                    0.0
                } else if name.starts_with("pool") {
                    (6.0 / (rows + cols) as f64).sqrt()
                } else if name.starts_with("decoder") {
                    1.0 / rows as f64
                } else {
                    (6.0 / rows as f64).sqrt()
                };
                Array2::from_shape_fn((rows, cols), |_| {
                    if bound == 0.0 {
                        0.0
                    } else {
                        r.random_range(-bound..bound)
                    }
                })
            })
            .collect();
        EncoderParams { config, seed, tensors }
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn feature_weight(&self) -> &Array2<f64> {
        &self.tensors[0]
    }

    pub fn feature_bias(&self) -> &Array2<f64> {
        &self.tensors[1]
    }

    pub(crate) fn layer_index(&self, l: usize) -> usize {
        2 + 2 * l
    }

    pub(crate) fn pool_index(&self) -> usize {
        2 + 2 * self.config.layers
    }

    pub(crate) fn decoder_index(&self, channel: usize) -> usize {
        self.pool_index() + 2 + channel
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn to_json(&self) -> String {
        let tensors = self
            .config
            .manifest()
            .into_iter()
            .zip(&self.tensors)
            .map(|((name, (r, c)), t)| TensorBlob {
                name,
                shape: [r, c],
                data: t.iter().copied().collect(),
            })
            .collect();
        serde_json::to_string(&Checkpoint {
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            config: self.config,
            tensors,
        })
        .expect("checkpoints serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, EncoderError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(EncoderError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let manifest = ck.config.manifest();
        if manifest.len() != ck.tensors.len() {
            return Err(EncoderError::Checkpoint(format!(
                "expected {} tensors, found {}",
                manifest.len(),
                ck.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(manifest.len());
        for ((name, (r, c)), blob) in manifest.into_iter().zip(ck.tensors) {
            if blob.name != name || blob.shape != [r, c] {
                return Err(EncoderError::Checkpoint(format!(
                    "tensor {} {:?} does not match {name} [{r}, {c}]",
                    blob.name, blob.shape
                )));
            }
            let t = Array2::from_shape_vec((r, c), blob.data)
                .map_err(|e| EncoderError::Checkpoint(format!("{name}: {e}")))?;
            tensors.push(t);
        }
        let params = EncoderParams {
            config: ck.config,
            seed: ck.seed,
            tensors,
        };
        if !params.is_finite() {
            return Err(EncoderError::Checkpoint("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_json()).map_err(|e| EncoderError::Io(path.display().to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text =
            fs::read_to_string(path).map_err(|e| EncoderError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }
}
