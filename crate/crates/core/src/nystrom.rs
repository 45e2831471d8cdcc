//! Nystrom-type out-of-sample extension.
//!
//! A kernel `k` on the whole set `X = train ∪ test` restricts to a kernel on the
//! training set with spectra `(sigma_j, v_j)` and features `psi_j = sqrt(sigma_j) v_j`.
//! The extension operator continues each feature to every `x ∈ X` by quadrature
//! over the training set,
//!
//! ```text
//! psi_hat_j(x) = (1 / sigma_j) * sum_{y in train} k(x, y) psi_j(y) mu(y)
//! ```
//!
//! and `k_hat(x, y) = sum_j psi_hat_j(x) psi_hat_j(y)` is the kernel of its range.
//! The residual `k0 = k - k_hat` is again a kernel, it vanishes on every pair that
//! touches the training set, and the extension is exact iff `k0 = 0`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel, build_kernel_on_points, kernel_diff, KernelMatrix, KernelSpec};
use crate::measure::{MeasuredSet, SplitView};
use crate::spectral::{
    decompose_weighted, feature_map, model_unchecked, rkhs_inner, spectral_decompose, FeatureMap,
    SpectralModel,
};

/// Tolerance (relative to `lambda_1`) for residual-kernel checks and exactness.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// A trained extension: the training set, its kernel and its spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionModel {
    train: MeasuredSet,
    spec: KernelSpec,
    spectra: SpectralModel,
    features: FeatureMap,
}

impl ExtensionModel {
    /// Rebuilds a model from stored spectra without re-solving the eigenproblem.
    pub fn from_parts(train: MeasuredSet, spec: KernelSpec, spectra: SpectralModel) -> Result<Self> {
        if spectra.len() != train.len() || spectra.weights() != train.weights() {
            return Err(Error::Format("spectra do not belong to this training set".into()));
        }
        if spectra.rank() == 0 {
            return Err(Error::ZeroKernel);
        }
        let features = feature_map(&spectra);
        Ok(Self {
            train,
            spec,
            spectra,
            features,
        })
    }

    pub fn train(&self) -> &MeasuredSet {
        &self.train
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn spectra(&self) -> &SpectralModel {
        &self.spectra
    }

    pub fn train_features(&self) -> &FeatureMap {
        &self.features
    }

    /// Number of retained training eigenpairs.
    pub fn dim(&self) -> usize {
        self.spectra.rank()
    }

    /// Extended features `psi_hat_j(p)` for arbitrary points, one row per point.
    pub fn embed(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if let Some(p) = points.first() {
            if p.len() != self.train.dim() {
                return Err(Error::Dimension(format!(
                    "points of dimension {} for a model trained in dimension {}",
                    p.len(),
                    self.train.dim()
                )));
            }
        }
        let cross = build_kernel_on_points(&self.spec, points, self.train.points())?;
        let psi = self.features.features();
        let sigma = self.spectra.eigenvalues();
        let mu = self.train.weights();
        let n_train = self.train.len();
        let mut out = DMatrix::zeros(points.len(), sigma.len());
        for x in 0..points.len() {
            for (j, s) in sigma.iter().enumerate() {
                let mut acc = 0.0;
                for y in 0..n_train {
                    acc += cross.get(x, y) * psi[(y, j)] * mu[y];
                }
                out[(x, j)] = acc / s;
            }
        }
        Ok(out)
    }
}

/// Decomposes the training kernel and derives the training features.
pub fn fit(train: &MeasuredSet, spec: &KernelSpec, rank_tol: f64) -> Result<ExtensionModel> {
    let k = build_kernel(spec, train, train)?;
    let spectra = spectral_decompose(&k, train, rank_tol)?;
    let features = feature_map(&spectra);
    Ok(ExtensionModel {
        train: train.clone(),
        spec: spec.clone(),
        spectra,
        features,
    })
}

/// The extended features on every point of a split, rows in parent order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedEmbedding {
    view: SplitView,
    features: DMatrix<f64>,
    extended_kernel: KernelMatrix,
}

impl ExtendedEmbedding {
    pub fn view(&self) -> &SplitView {
        &self.view
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Feature column `j` as point values over the parent set.
    pub fn feature(&self, j: usize) -> Vec<f64> {
        self.features.column(j).iter().copied().collect()
    }

    /// Rows of the training points, in training order.
    pub fn train_rows(&self) -> DMatrix<f64> {
        self.features.select_rows(self.view.train_indices())
    }

    pub fn test_rows(&self) -> DMatrix<f64> {
        self.features.select_rows(self.view.test_indices())
    }
}

/// Applies the extension operator to every point of `full`.
pub fn extend(model: &ExtensionModel, full: &SplitView) -> Result<ExtendedEmbedding> {
    let train = full.train_set();
    if train.points() != model.train.points() || train.weights() != model.train.weights() {
        return Err(Error::Dimension(
            "the split's training part differs from the model's training set".into(),
        ));
    }
    let features = model.embed(full.parent().points())?;
    let extended_kernel = KernelMatrix::from_values(&features * features.transpose());
    Ok(ExtendedEmbedding {
        view: full.clone(),
        features,
        extended_kernel,
    })
}

/// `k_hat(x, y) = sum_j psi_hat_j(x) psi_hat_j(y)` on the parent set.
pub fn extended_kernel(e: &ExtendedEmbedding) -> KernelMatrix {
    e.extended_kernel.clone()
}

/// The residual kernel `k0 = k - k_hat` and the projector algebra relating the
/// extended features to the full spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDecomposition {
    k0: KernelMatrix,
    residual_spectra: SpectralModel,
    /// `C` (d x m): `psi_hat_i = sum_j c_ij phi_j`.
    transfer: DMatrix<f64>,
    /// `M = I - C^T C` (m x m).
    projector: DMatrix<f64>,
    full_spectra: SpectralModel,
    spectral_norm: f64,
}

impl ResidualDecomposition {
    pub fn k0(&self) -> &KernelMatrix {
        &self.k0
    }

    /// `s = dim H0`.
    pub fn s(&self) -> usize {
        self.residual_spectra.rank()
    }

    pub fn residual_spectra(&self) -> &SpectralModel {
        &self.residual_spectra
    }

    pub fn transfer(&self) -> &DMatrix<f64> {
        &self.transfer
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn full_spectra(&self) -> &SpectralModel {
        &self.full_spectra
    }

    /// `||k0||_2`: the largest eigenvalue of the weighted residual operator.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// `Tr(k0) = sum_x k0(x, x) mu(x)`.
    pub fn trace(&self) -> f64 {
        let w = self.full_spectra.weights();
        (0..w.len()).map(|i| self.k0.get(i, i) * w[i]).sum()
    }

    /// Residual features `xi_j = sqrt(eta_j) alpha_j`, one column each.
    pub fn residual_features(&self) -> DMatrix<f64> {
        feature_map(&self.residual_spectra).features().clone()
    }
}

/// Computes `k0`, its spectra, the transfer matrix `C` and the projector `M`.
///
/// `full_spectra` must decompose `full_kernel` on the split's parent set.
pub fn residual(
    full_kernel: &KernelMatrix,
    e: &ExtendedEmbedding,
    full_spectra: &SpectralModel,
) -> Result<ResidualDecomposition> {
    let n = e.view.parent().len();
    if full_kernel.nrows() != n || full_kernel.ncols() != n || full_spectra.len() != n {
        return Err(Error::Dimension(format!(
            "full kernel {}x{} and spectra on {} points for a {n}-point split",
            full_kernel.nrows(),
            full_kernel.ncols(),
            full_spectra.len()
        )));
    }
    let weights = e.view.parent().weights();
    let k0 = kernel_diff(full_kernel, &e.extended_kernel)?;
    let lambda1 = full_spectra.lambda_max();
    let floor = full_spectra.rank_tol() * lambda1;
    let (eta, alpha, min) = decompose_weighted(k0.values(), weights, floor);
    let tol = RESIDUAL_TOL * lambda1;
    if min < -tol {
        return Err(Error::NumericalInconsistency(format!(
            "residual kernel has eigenvalue {min:e} below -{tol:e}"
        )));
    }
    let spectral_norm = eta.first().copied().unwrap_or(0.0).max(0.0);
    let residual_spectra = model_unchecked(
        weights.to_vec(),
        eta,
        alpha,
        full_spectra.rank_tol(),
        (-min).max(0.0),
    );

    let v = full_spectra.eigenfunctions();
    let lambda = full_spectra.eigenvalues();
    let d = e.features.ncols();
    let m = lambda.len();
    let mut transfer = DMatrix::zeros(d, m);
    for i in 0..d {
        for j in 0..m {
            let mut a = 0.0;
            for x in 0..n {
                a += e.features[(x, i)] * v[(x, j)] * weights[x];
            }
            transfer[(i, j)] = a / lambda[j].sqrt();
        }
    }
    let projector = DMatrix::identity(m, m) - transfer.tr_mul(&transfer);

    Ok(ResidualDecomposition {
        k0,
        residual_spectra,
        transfer,
        projector,
        full_spectra: full_spectra.clone(),
        spectral_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exactness {
    pub exact: bool,
    pub s: usize,
    pub residual_norm: f64,
}

/// Exact iff `||k0||_2 <= tol * lambda_1`.
pub fn exactness_check(r: &ResidualDecomposition, tol: f64) -> Exactness {
    let norm = r.spectral_norm;
    Exactness {
        exact: norm <= tol * r.full_spectra.lambda_max(),
        s: r.s(),
        residual_norm: norm,
    }
}

/// Result of probing `||T f + g||_H^2 = ||T f||_H^2 + ||g||_H^2` for `g ∈ H0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalNormReport {
    pub trials: usize,
    /// Largest `| ||Tf+g||^2 - ||Tf||^2 - ||g||^2 |`.
    pub max_violation: f64,
    /// Smallest `||Tf+g||^2 - ||Tf||^2` seen; never negative up to round-off.
    pub min_increase: f64,
    /// Largest deviation of `(Tf + g)` from `f` on the training points.
    pub max_restriction_error: f64,
    /// True when `H0 = {0}`, making the check trivial.
    pub vacuous: bool,
}

/// Draws random `f` in the training RKHS and random `g ∈ H0` and measures how far
/// `T f` is from being the minimal-norm extension.
pub fn minimal_norm_check(
    e: &ExtendedEmbedding,
    r: &ResidualDecomposition,
    trials: usize,
    seed: u64,
) -> Result<MinimalNormReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = e.features.ncols();
    let xi = r.residual_features();
    let s = xi.ncols();
    let full = &r.full_spectra;
    let n = e.features.nrows();
    let train = e.view.train_indices();
    // psi_j on the training set equals psi_hat_j there, so f itself is read off the
    // extended features' training rows.
    let mut report = MinimalNormReport {
        trials,
        max_violation: 0.0,
        min_increase: f64::INFINITY,
        max_restriction_error: 0.0,
        vacuous: s == 0,
    };
    for _ in 0..trials {
        let c: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let b: DVector<f64> = DVector::from_fn(s, |_, _| StandardNormal.sample(&mut rng));
        let tf = &e.features * &c;
        let g = &xi * &b;
        let sum = &tf + &g;
        let tf_n = rkhs_inner(full, tf.as_slice(), tf.as_slice())?;
        let g_n = rkhs_inner(full, g.as_slice(), g.as_slice())?;
        let sum_n = rkhs_inner(full, sum.as_slice(), sum.as_slice())?;
        report.max_violation = report.max_violation.max((sum_n - tf_n - g_n).abs());
        report.min_increase = report.min_increase.min(sum_n - tf_n);
        for &x in train {
            debug_assert!(x < n);
            report.max_restriction_error = report.max_restriction_error.max((sum[x] - tf[x]).abs());
        }
    }
    if trials == 0 {
        report.min_increase = 0.0;
    }
    Ok(report)
}

/// Every object of one fit / extend / retrain run on a split.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub model: ExtensionModel,
    pub embedding: ExtendedEmbedding,
    pub full_kernel: KernelMatrix,
    pub full_spectra: SpectralModel,
    pub residual: ResidualDecomposition,
}

/// Fits on the training part, extends to the whole split, retrains on the whole
/// set and decomposes the residual.
pub fn run_split(view: &SplitView, spec: &KernelSpec, rank_tol: f64) -> Result<SplitRun> {
    let model = fit(&view.train_set(), spec, rank_tol)?;
    let embedding = extend(&model, view)?;
    let full_kernel = build_kernel(spec, view.parent(), view.parent())?;
    let full_spectra = spectral_decompose(&full_kernel, view.parent(), rank_tol)?;
    let residual = residual(&full_kernel, &embedding, &full_spectra)?;
    Ok(SplitRun {
        model,
        embedding,
        full_kernel,
        full_spectra,
        residual,
    })
}

/// Like [`run_split`] for an already fitted model whose training set is the
/// training part of `view`.
pub fn run_from_model(model: ExtensionModel, view: &SplitView) -> Result<SplitRun> {
    let embedding = extend(&model, view)?;
    let rank_tol = model.spectra().rank_tol();
    let full_kernel = build_kernel(model.spec(), view.parent(), view.parent())?;
    let full_spectra = spectral_decompose(&full_kernel, view.parent(), rank_tol)?;
    let residual = residual(&full_kernel, &embedding, &full_spectra)?;
    Ok(SplitRun {
        model,
        embedding,
        full_kernel,
        full_spectra,
        residual,
    })
}
