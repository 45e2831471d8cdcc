//! Kernel dimensionality reduction on a training set, its Nystrom-type extension to
//! unseen points, and exact diagnostics of the extension error.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`]: finite measured sets, discrete integration, train/test splits.
//! * [`kernels`]: Mercer kernels, kernel distances, restrictions.
//! * [`spectral`]: measure-weighted eigensystems and feature maps.
//! * [`nystrom`]: the extension operator, the extended and residual kernels.
//! * [`diagnostics`]: distance averages, trace/spectral bounds, eigenvalue gaps,
//!   first-order perturbation estimates.
//! * [`diffusion`]: diffusion-map kernels and their out-of-sample extension.
//! * [`persist`]: the on-disk model format.
//! * [`synth`]: synthetic manifold data sets.

pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod kernels;
mod linalg;
pub mod measure;
pub mod nystrom;
pub mod persist;
pub mod spectral;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use kernels::{KernelMatrix, KernelSpec};
pub use measure::{MeasuredSet, SplitView};
pub use nystrom::{ExtendedEmbedding, ExtensionModel, ResidualDecomposition};
pub use spectral::{FeatureMap, SpectralModel};
pub use diagnostics::{ErrorReport, PerturbationEstimate, SpectrumComparison};
pub use diffusion::{DiffusionExtension, DiffusionModel};
pub use persist::Model;
