//! Measure-weighted spectral decomposition of kernels and the feature maps built on it.
//!
//! For a kernel `k` on a measured set, the integral operator
//! `(K f)(x) = sum_y k(x, y) f(y) mu(y)` is diagonalized through the symmetric
//! surrogate `B = D^{1/2} K D^{1/2}`, `D = diag(mu)`. An eigenvector `u` of `B`
//! gives the eigenfunction `v = D^{-1/2} u`, which is orthonormal in `L^2(mu)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{symmetry_defect, KernelMatrix, TOL_PSD, TOL_SYM};
use crate::linalg::{fix_signs, sym_eigen, weighted_surrogate};
use crate::measure::MeasuredSet;

/// Default relative cut-off below which eigenvalues are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Residual allowed when projecting a function onto the eigenfunction span.
const SPAN_TOL: f64 = 1e-8;

/// `L^2(mu)`-orthonormal eigensystem of a kernel with strictly positive eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Column `j` holds `v_j` evaluated at every base point.
    eigenfunctions: DMatrix<f64>,
    rank_tol: f64,
    /// Magnitude of the most negative eigenvalue that was discarded (0 when none).
    clipped_negative: f64,
}

impl SpectralModel {
    /// Reassembles a model from stored parts, e.g. after loading it from disk.
    pub fn from_parts(
        weights: Vec<f64>,
        eigenvalues: Vec<f64>,
        eigenfunctions: DMatrix<f64>,
        rank_tol: f64,
    ) -> Result<Self> {
        if eigenfunctions.nrows() != weights.len() || eigenfunctions.ncols() != eigenvalues.len() {
            return Err(Error::Dimension(format!(
                "eigenfunction matrix {}x{} does not match {} points and {} eigenvalues",
                eigenfunctions.nrows(),
                eigenfunctions.ncols(),
                weights.len(),
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|l| l.is_nan() || *l <= 0.0) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Format("eigenvalues must be positive and decreasing".into()));
        }
        Ok(Self {
            weights,
            eigenvalues,
            eigenfunctions,
            rank_tol,
            clipped_negative: 0.0,
        })
    }

    pub(crate) fn set_clipped_negative(&mut self, v: f64) {
        self.clipped_negative = v;
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn clipped_negative(&self) -> f64 {
        self.clipped_negative
    }

    /// Largest eigenvalue, or 0 for an empty system.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `L^2(mu)` coefficients `c_j = <f, v_j>` of a function given by its point values.
    pub fn coefficients(&self, f: &[f64]) -> Result<DVector<f64>> {
        if f.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}-point spectral model",
                f.len(),
                self.len()
            )));
        }
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(a, w)| a * w));
        Ok(self.eigenfunctions.tr_mul(&wf))
    }

    /// Coefficients of `f`, after checking that `f` lies in the eigenfunction span.
    pub fn span_coefficients(&self, f: &[f64]) -> Result<DVector<f64>> {
        let c = self.coefficients(f)?;
        let back = &self.eigenfunctions * &c;
        let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let residual = back
            .iter()
            .zip(f)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if residual > SPAN_TOL * scale {
            return Err(Error::NotInRkhs { residual });
        }
        Ok(c)
    }

    /// Evaluates `sum_j c_j v_j` at every base point.
    pub fn synthesize(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.eigenfunctions * coefficients
    }
}

/// Eigen-decomposes a weighted kernel, keeping eigenvalues above `floor`.
///
/// Returns the kept eigenpairs and the most negative eigenvalue seen (or 0).
pub(crate) fn decompose_weighted(
    values: &DMatrix<f64>,
    weights: &[f64],
    floor: f64,
) -> (Vec<f64>, DMatrix<f64>, f64) {
    let b = weighted_surrogate(values, weights);
    let (eig, vecs) = sym_eigen(&b);
    let keep = eig.iter().take_while(|&&l| l > floor).count();
    let min = eig.last().copied().unwrap_or(0.0).min(0.0);
    let inv_sqrt: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut funcs = DMatrix::from_fn(values.nrows(), keep, |i, j| vecs[(i, j)] * inv_sqrt[i]);
    fix_signs(&mut funcs);
    (eig[..keep].to_vec(), funcs, min)
}

/// Builds a model from already decomposed data without further checks.
pub(crate) fn model_unchecked(
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: DMatrix<f64>,
    rank_tol: f64,
    clipped_negative: f64,
) -> SpectralModel {
    SpectralModel {
        weights,
        eigenvalues,
        eigenfunctions,
        rank_tol,
        clipped_negative,
    }
}

/// Spectral decomposition `k(x, y) = sum_j lambda_j v_j(x) v_j(y)` with respect to the
/// measure of `s`.
///
/// Eigenvalues at or below `rank_tol * lambda_1` are discarded. Unthresholded kernels
/// must pass the Mercer check; for thresholded ones negative eigenvalues are clipped and
/// recorded in [`SpectralModel::clipped_negative`].
pub fn spectral_decompose(k: &KernelMatrix, s: &MeasuredSet, rank_tol: f64) -> Result<SpectralModel> {
    if !k.is_square() || k.nrows() != s.len() {
        return Err(Error::Dimension(format!(
            "kernel is {}x{} but the set has {} points",
            k.nrows(),
            k.ncols(),
            s.len()
        )));
    }
    let defect = symmetry_defect(k.values());
    let sym_tol = TOL_SYM * k.values().amax().max(f64::MIN_POSITIVE);
    if defect > sym_tol {
        return Err(Error::NotSymmetric {
            defect,
            tol: sym_tol,
        });
    }
    let b = weighted_surrogate(k.values(), s.weights());
    let (eig, vecs) = sym_eigen(&b);
    let lambda1 = eig.first().copied().unwrap_or(0.0);
    let min = eig.last().copied().unwrap_or(0.0);
    let psd_tol = TOL_PSD * lambda1.max(1.0);
    if min < -psd_tol && !k.is_thresholded() {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tol: psd_tol,
        });
    }
    if lambda1.is_nan() || lambda1 <= 0.0 {
        return Err(Error::ZeroKernel);
    }
    let floor = rank_tol * lambda1;
    let keep = eig.iter().take_while(|&&l| l > floor).count();
    let inv_sqrt: Vec<f64> = s.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut funcs = DMatrix::from_fn(s.len(), keep, |i, j| vecs[(i, j)] * inv_sqrt[i]);
    fix_signs(&mut funcs);
    Ok(SpectralModel {
        weights: s.weights().to_vec(),
        eigenvalues: eig[..keep].to_vec(),
        eigenfunctions: funcs,
        rank_tol,
        clipped_negative: (-min).max(0.0),
    })
}

/// Feature functions `phi_j = sqrt(lambda_j) v_j` at the base points.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    eigenvalues: Vec<f64>,
    /// Row `i` is the feature vector `Phi(x_i)`.
    features: DMatrix<f64>,
}

impl FeatureMap {
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Euclidean distance between the feature vectors of points `i` and `j`.
    pub fn feature_distance(&self, i: usize, j: usize) -> f64 {
        (self.features.row(i) - self.features.row(j)).norm()
    }
}

pub fn feature_map(m: &SpectralModel) -> FeatureMap {
    let mut features = m.eigenfunctions.clone();
    for (mut col, l) in features.column_iter_mut().zip(&m.eigenvalues) {
        col *= l.sqrt();
    }
    FeatureMap {
        eigenvalues: m.eigenvalues.clone(),
        features,
    }
}

/// `<f, g>_H = sum_j c_j d_j / lambda_j` for `f`, `g` in the eigenfunction span.
pub fn rkhs_inner(m: &SpectralModel, f: &[f64], g: &[f64]) -> Result<f64> {
    let c = m.span_coefficients(f)?;
    let d = m.span_coefficients(g)?;
    Ok(c.iter()
        .zip(d.iter())
        .zip(&m.eigenvalues)
        .fold(0.0, |acc, ((a, b), l)| acc + a * b / l))
}

/// `k(x, y) = sum_j phi_j(x) phi_j(y)`.
pub fn reconstruct_kernel(fm: &FeatureMap) -> KernelMatrix {
    KernelMatrix::from_values(&fm.features * fm.features.transpose())
}
