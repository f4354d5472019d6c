//! JSON persistence for trained classifiers and a common scoring front.
//!
//! Every model file is one JSON object with a `"type"` tag (`ocsvm`,
//! `iforest` or `dsvdd`) and a `"normalize"` flag recording whether
//! embeddings were L2-normalized before training. Dense float arrays are
//! base64 of f64 little-endian values, row-major.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dsvdd::{Arch, DsvddConfig, DsvddModel, EncoderNet};
use crate::error::{Error, Result};
use crate::iforest::{IForestModel, IsolationTree};
use crate::numcore::check_dim;
use crate::ocsvm::OcSvmModel;

/// Default training-distance quantile used as the Deep SVDD cutoff.
pub const DEFAULT_DSVDD_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    OcSvm(OcSvmModel),
    IForest(IForestModel),
    Dsvdd(DsvddModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub classifier: Classifier,
    pub normalize: bool,
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Model(format!("bad base64 payload: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Model(format!("payload of {} bytes is not a whole number of f64", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct OcSvmFile {
    dim: usize,
    gamma: f64,
    rho: f64,
    alphas: Vec<f64>,
    support_vectors: String,
    converged: bool,
    normalize: bool,
}

#[derive(Serialize, Deserialize)]
struct IForestFile {
    dim: usize,
    psi: usize,
    c_psi: f64,
    seed: u64,
    trees: Vec<IsolationTree>,
    normalize: bool,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    name: String,
    shape: [usize; 3],
    weights: String,
}

#[derive(Serialize, Deserialize)]
struct DsvddConfigFile {
    ae_epochs: usize,
    ae_lr: f64,
    enc_epochs: usize,
    enc_lr: f64,
    weight_decay: f64,
    batch_size: usize,
    latent_dim: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DsvddFile {
    dim: usize,
    latent_dim: usize,
    layers: Vec<LayerFile>,
    center: Vec<f64>,
    config: DsvddConfigFile,
    train_distances: Vec<f64>,
    normalize: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ModelFile {
    Ocsvm(OcSvmFile),
    Iforest(IForestFile),
    Dsvdd(DsvddFile),
}

fn ocsvm_to_file(m: &OcSvmModel, normalize: bool) -> OcSvmFile {
    let sv: Vec<f64> = m.support_vectors.iter().copied().collect();
    OcSvmFile {
        dim: m.dim(),
        gamma: m.gamma,
        rho: m.rho,
        alphas: m.alphas.clone(),
        support_vectors: encode_f64s(&sv),
        converged: m.converged,
        normalize,
    }
}

fn ocsvm_from_file(f: OcSvmFile) -> Result<OcSvmModel> {
    let flat = decode_f64s(&f.support_vectors)?;
    if f.dim == 0 || flat.len() != f.alphas.len() * f.dim {
        return Err(Error::Model(format!(
            "{} support-vector values do not match {} alphas of dimension {}",
            flat.len(),
            f.alphas.len(),
            f.dim
        )));
    }
    let support_vectors =
        Array2::from_shape_vec((f.alphas.len(), f.dim), flat).map_err(|e| Error::Model(e.to_string()))?;
    if !(f.gamma > 0.0 && f.gamma.is_finite()) || !f.rho.is_finite() || f.alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::Model("non-finite or invalid OcSVM parameters".into()));
    }
    Ok(OcSvmModel {
        gamma: f.gamma,
        rho: f.rho,
        alphas: f.alphas,
        support_vectors,
        converged: f.converged,
    })
}

fn dsvdd_to_file(m: &DsvddModel, normalize: bool) -> DsvddFile {
    let c = &m.config;
    DsvddFile {
        dim: m.dim(),
        latent_dim: m.encoder.arch().latent_dim,
        layers: m
            .encoder
            .layers()
            .into_iter()
            .map(|(name, shape, w)| LayerFile {
                name: name.to_string(),
                shape,
                weights: encode_f64s(w),
            })
            .collect(),
        center: m.center.clone(),
        config: DsvddConfigFile {
            ae_epochs: c.ae_epochs,
            ae_lr: c.ae_lr,
            enc_epochs: c.enc_epochs,
            enc_lr: c.enc_lr,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            latent_dim: c.latent_dim,
            seed: c.seed,
        },
        train_distances: m.train_distances.clone(),
        normalize,
    }
}

fn dsvdd_from_file(f: DsvddFile) -> Result<DsvddModel> {
    let arch = Arch::new(f.dim, f.latent_dim);
    let expected = arch.encoder_shapes();
    if f.layers.len() != expected.len() {
        return Err(Error::Model(format!("expected {} encoder layers, found {}", expected.len(), f.layers.len())));
    }
    let mut weights = Vec::new();
    for (layer, (name, shape)) in f.layers.iter().zip(expected) {
        if layer.name != name || layer.shape != shape {
            return Err(Error::Model(format!(
                "layer {} {:?} does not match expected {name} {shape:?}",
                layer.name, layer.shape
            )));
        }
        let w = decode_f64s(&layer.weights)?;
        if w.len() != shape.iter().product::<usize>() {
            return Err(Error::Model(format!("layer {name} holds {} weights", w.len())));
        }
        weights.extend(w);
    }
    if weights.iter().chain(&f.center).any(|v| !v.is_finite()) {
        return Err(Error::Model("non-finite Deep SVDD parameters".into()));
    }
    check_dim(f.latent_dim, f.center.len())?;
    let encoder = EncoderNet::from_weights(arch, weights).ok_or_else(|| Error::Model("weight count mismatch".into()))?;
    let c = f.config;
    Ok(DsvddModel {
        encoder,
        center: f.center,
        config: DsvddConfig {
            ae_epochs: c.ae_epochs,
            ae_lr: c.ae_lr,
            enc_epochs: c.enc_epochs,
            enc_lr: c.enc_lr,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            latent_dim: c.latent_dim,
            seed: c.seed,
        },
        train_distances: f.train_distances,
    })
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::OcSvm(_) => "ocsvm",
            Classifier::IForest(_) => "iforest",
            Classifier::Dsvdd(_) => "dsvdd",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::OcSvm(m) => m.dim(),
            Classifier::IForest(m) => m.dim,
            Classifier::Dsvdd(m) => m.dim(),
        }
    }

    pub fn decision_rows(&self, data: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            Classifier::OcSvm(m) => m.decision_rows(data),
            Classifier::IForest(m) => m.decision_rows(data),
            Classifier::Dsvdd(m) => m.decision_rows(data),
        }
    }

    /// Inlier cutoff on the decision scale: 0 for OcSVM and Isolation Forest,
    /// minus the training-distance `dsvdd_quantile` for Deep SVDD.
    pub fn default_threshold(&self, dsvdd_quantile: f64) -> Result<f64> {
        match self {
            Classifier::Dsvdd(m) => Ok(-m.threshold(dsvdd_quantile)?),
            _ => Ok(0.0),
        }
    }
}

impl SavedModel {
    pub fn new(classifier: Classifier, normalize: bool) -> Self {
        SavedModel { classifier, normalize }
    }

    pub fn to_json(&self) -> String {
        let file = match &self.classifier {
            Classifier::OcSvm(m) => ModelFile::Ocsvm(ocsvm_to_file(m, self.normalize)),
            Classifier::IForest(m) => ModelFile::Iforest(IForestFile {
                dim: m.dim,
                psi: m.psi,
                c_psi: m.c_psi,
                seed: m.seed,
                trees: m.trees.clone(),
                normalize: self.normalize,
            }),
            Classifier::Dsvdd(m) => ModelFile::Dsvdd(dsvdd_to_file(m, self.normalize)),
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        Ok(match file {
            ModelFile::Ocsvm(f) => {
                let normalize = f.normalize;
                SavedModel::new(Classifier::OcSvm(ocsvm_from_file(f)?), normalize)
            }
            ModelFile::Iforest(f) => {
                if f.trees.is_empty() || f.dim == 0 {
                    return Err(Error::Model("isolation forest without trees".into()));
                }
                let model = IForestModel {
                    dim: f.dim,
                    psi: f.psi,
                    c_psi: f.c_psi,
                    seed: f.seed,
                    trees: f.trees,
                };
                SavedModel::new(Classifier::IForest(model), f.normalize)
            }
            ModelFile::Dsvdd(f) => {
                let normalize = f.normalize;
                SavedModel::new(Classifier::Dsvdd(dsvdd_from_file(f)?), normalize)
            }
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Decision scores for every record of `corpus`, in corpus order, with the
    /// model's normalization applied first.
    pub fn score(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        if corpus.is_empty() {
            return Ok(Vec::new());
        }
        check_dim(self.classifier.dim(), corpus.dim())?;
        let data = if self.normalize { corpus.normalized() } else { corpus.clone() };
        let scores = self.classifier.decision_rows(data.matrix().view())?;
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore(data.records()[i].id.clone()));
        }
        Ok(scores)
    }
}
