//! JSON model files.
//!
//! Floats are written with the shortest representation that parses back to the
//! same bits, so `load(save(m))` is bit-exact. A SHA-256 digest over the
//! document (with an empty digest field) guards against edits and truncation.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::measure::MeasuredSet;
use crate::nystrom::ExtensionModel;
use crate::spectral::SpectralModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StoredKernel {
    Gaussian { epsilon: f64, eta: f64 },
    Linear,
    Precomputed { gram: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nystrom,
    Diffusion,
}

/// The document written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub kernel: StoredKernel,
    pub rank_tol: f64,
    /// Magnitude of the most negative eigenvalue dropped at fit time.
    pub clipped_negative: f64,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub eigenvalues: Vec<f64>,
    /// One row per training point.
    pub eigenfunctions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub densities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_mass: Option<f64>,
    pub digest: String,
}

/// Either kind of trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Nystrom(ExtensionModel),
    Diffusion(DiffusionModel),
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("matrix rows must all have {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn digest_of(doc: &PersistedModel) -> Result<String> {
    let mut blank = doc.clone();
    blank.digest = String::new();
    let bytes = serde_json::to_vec(&blank).map_err(|e| Error::Format(e.to_string()))?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

impl PersistedModel {
    pub fn from_model(model: &Model) -> Result<Self> {
        let mut doc = match model {
            Model::Nystrom(m) => {
                let kernel = match m.spec() {
                    KernelSpec::Gaussian { epsilon, eta } => StoredKernel::Gaussian {
                        epsilon: *epsilon,
                        eta: *eta,
                    },
                    KernelSpec::Linear => StoredKernel::Linear,
                    KernelSpec::Precomputed(g) => StoredKernel::Precomputed { gram: rows(g) },
                };
                Self {
                    format_version: FORMAT_VERSION,
                    kind: ModelKind::Nystrom,
                    kernel,
                    rank_tol: m.spectra().rank_tol(),
                    clipped_negative: m.spectra().clipped_negative(),
                    points: m.train().points().to_vec(),
                    weights: m.train().weights().to_vec(),
                    labels: m.train().labels().map(|l| l.to_vec()),
                    eigenvalues: m.spectra().eigenvalues().to_vec(),
                    eigenfunctions: rows(m.spectra().eigenfunctions()),
                    densities: None,
                    total_mass: None,
                    digest: String::new(),
                }
            }
            Model::Diffusion(m) => Self {
                format_version: FORMAT_VERSION,
                kind: ModelKind::Diffusion,
                kernel: StoredKernel::Gaussian {
                    epsilon: m.epsilon(),
                    eta: m.eta(),
                },
                rank_tol: m.spectra().rank_tol(),
                clipped_negative: m.spectra().clipped_negative(),
                points: m.train().points().to_vec(),
                weights: m.train().weights().to_vec(),
                labels: m.train().labels().map(|l| l.to_vec()),
                eigenvalues: m.spectra().eigenvalues().to_vec(),
                eigenfunctions: rows(m.spectra().eigenfunctions()),
                densities: Some(m.densities().to_vec()),
                total_mass: Some(m.total_mass()),
                digest: String::new(),
            },
        };
        doc.digest = digest_of(&doc)?;
        Ok(doc)
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let expected = digest_of(&self)?;
        if expected != self.digest {
            return Err(Error::Format("model digest does not match its content".into()));
        }
        let mut train = MeasuredSet::new(self.points, self.weights)?;
        if let Some(labels) = self.labels {
            train = train.with_labels(labels)?;
        }
        let funcs = from_rows(&self.eigenfunctions, self.eigenvalues.len())?;
        match self.kind {
            ModelKind::Nystrom => {
                let spec = match self.kernel {
                    StoredKernel::Gaussian { epsilon, eta } => KernelSpec::gaussian(epsilon, eta)?,
                    StoredKernel::Linear => KernelSpec::Linear,
                    StoredKernel::Precomputed { gram } => {
                        let n = gram.len();
                        KernelSpec::Precomputed(Arc::new(from_rows(&gram, n)?))
                    }
                };
                let mut spectra =
                    SpectralModel::from_parts(train.weights().to_vec(), self.eigenvalues, funcs, self.rank_tol)?;
                spectra.set_clipped_negative(self.clipped_negative);
                Ok(Model::Nystrom(ExtensionModel::from_parts(train, spec, spectra)?))
            }
            ModelKind::Diffusion => {
                let StoredKernel::Gaussian { epsilon, eta } = self.kernel else {
                    return Err(Error::Format("diffusion models need a gaussian kernel".into()));
                };
                let mut m = DiffusionModel::from_parts(train, epsilon, eta, self.eigenvalues, funcs, self.rank_tol)?;
                m.set_clipped_negative(self.clipped_negative);
                if let Some(d) = &self.densities {
                    if d.as_slice() != m.densities() {
                        return Err(Error::Format("stored densities disagree with the weights".into()));
                    }
                }
                Ok(Model::Diffusion(m))
            }
        }
    }
}

/// Pretty-printed JSON for `model`, newline-terminated.
pub fn to_json(model: &Model) -> Result<String> {
    let doc = PersistedModel::from_model(model)?;
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<Model> {
    let doc: PersistedModel = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    doc.into_model()
}
