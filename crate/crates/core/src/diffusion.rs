//! Diffusion maps on a measured set and their out-of-sample extension.
//!
//! With a (thresholded) gaussian weight `w`, the density `S(x) = sum_y w(x, y) mu(y)`
//! and the total mass `S = sum_x S(x) mu(x)`, the diffusion kernel
//! `k(x, y) = w(x, y) / sqrt(S(x) S(y))` has top eigenpair `(1, sqrt(S(x) / S))`.
//! That pair carries no information and is split off; the remaining pairs give
//! three embeddings:
//!
//! * standard `psi_tilde_j = sqrt(lambda_j) psi_j`,
//! * weighted `u_j = sqrt(S) psi_tilde_j`,
//! * normalized `v_j = psi_tilde_j / sqrt(S)`.
//!
//! New points are embedded by `U(z)_j = (1/lambda_j) sum_x w(z, x) v_j(x) mu(x)`
//! and rescaled by an updated density.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{gaussian_weight, KernelMatrix, TOL_PSD};
use crate::measure::MeasuredSet;
use crate::spectral::{decompose_weighted, model_unchecked, SpectralModel};

/// Tolerance for the trivial eigenpair and the exchange identities.
pub const DIFFUSION_TOL: f64 = 1e-8;
/// Eigenvalues up to `1 + EIGEN_CLAMP` are clamped to 1.
pub const EIGEN_CLAMP: f64 = 1e-10;

/// Everything computed on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    train: MeasuredSet,
    epsilon: f64,
    eta: f64,
    w: KernelMatrix,
    densities: Vec<f64>,
    total_mass: f64,
    /// Column 0 is the trivial pair, columns `1..=d` the embedding pairs.
    spectra: SpectralModel,
    standard: DMatrix<f64>,
    weighted: DMatrix<f64>,
    normalized: DMatrix<f64>,
}

fn weight_matrix(a: &[Vec<f64>], b: &[Vec<f64>], epsilon: f64, eta: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| gaussian_weight(&a[i], &b[j], epsilon, eta))
}

fn check_params(epsilon: f64, eta: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("gaussian bandwidth {epsilon} must be > 0")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("threshold eta {eta} not in [0, 1]")));
    }
    Ok(())
}

/// Builds the weight kernel, densities and diffusion spectra on `train`.
///
/// `eta = 1` is accepted: every off-diagonal weight below 1 vanishes and the
/// kernel becomes a multiple of the identity.
pub fn diffusion_fit(train: &MeasuredSet, epsilon: f64, eta: f64, rank_tol: f64) -> Result<DiffusionModel> {
    check_params(epsilon, eta)?;
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(Error::Config(format!("rank tolerance {rank_tol} must be >= 0")));
    }
    let mu = train.weights();
    let n = train.len();
    let w = weight_matrix(train.points(), train.points(), epsilon, eta);
    let mut densities = Vec::with_capacity(n);
    for i in 0..n {
        let s: f64 = (0..n).map(|j| w[(i, j)] * mu[j]).sum();
        if s <= 0.0 {
            return Err(Error::IsolatedPoint { index: i });
        }
        densities.push(s);
    }
    let total_mass: f64 = densities.iter().zip(mu).map(|(s, m)| s * m).sum();
    let k = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (densities[i] * densities[j]).sqrt());

    let phi0: Vec<f64> = densities.iter().map(|s| (s / total_mass).sqrt()).collect();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        let kphi: f64 = (0..n).map(|j| k[(i, j)] * phi0[j] * mu[j]).sum();
        defect = defect.max((kphi - phi0[i]).abs());
    }
    if defect > DIFFUSION_TOL {
        return Err(Error::NumericalInconsistency(format!(
            "sqrt(S/S_total) misses the unit eigenvalue by {defect:e}"
        )));
    }

    let deflated = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - phi0[i] * phi0[j]);
    let (mut lambda, funcs, min) = decompose_weighted(&deflated, mu, rank_tol);
    if eta == 0.0 && min < -TOL_PSD {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tol: TOL_PSD,
        });
    }
    for l in lambda.iter_mut() {
        if *l > 1.0 + EIGEN_CLAMP {
            return Err(Error::NumericalInconsistency(format!(
                "diffusion eigenvalue {l} exceeds 1"
            )));
        }
        *l = l.min(1.0);
    }
    let d = lambda.len();

    let mut all_lambda = vec![1.0];
    all_lambda.extend_from_slice(&lambda);
    let mut all_funcs = DMatrix::zeros(n, d + 1);
    for i in 0..n {
        all_funcs[(i, 0)] = phi0[i];
    }
    all_funcs.columns_mut(1, d).copy_from(&funcs);
    let spectra = model_unchecked(mu.to_vec(), all_lambda, all_funcs, rank_tol, (-min).max(0.0));

    let standard = DMatrix::from_fn(n, d, |i, j| lambda[j].sqrt() * funcs[(i, j)]);
    let weighted = DMatrix::from_fn(n, d, |i, j| densities[i].sqrt() * standard[(i, j)]);
    let normalized = DMatrix::from_fn(n, d, |i, j| standard[(i, j)] / densities[i].sqrt());

    let mut wk = KernelMatrix::from_values(w);
    if eta > 0.0 {
        wk = crate::kernels::mark_thresholded(wk);
    }
    Ok(DiffusionModel {
        train: train.clone(),
        epsilon,
        eta,
        w: wk,
        densities,
        total_mass,
        spectra,
        standard,
        weighted,
        normalized,
    })
}

impl DiffusionModel {
    /// Reassembles a model from stored parts, recomputing the derived fields.
    pub fn from_parts(
        train: MeasuredSet,
        epsilon: f64,
        eta: f64,
        eigenvalues: Vec<f64>,
        eigenfunctions: DMatrix<f64>,
        rank_tol: f64,
    ) -> Result<Self> {
        check_params(epsilon, eta)?;
        let n = train.len();
        if eigenfunctions.nrows() != n || eigenfunctions.ncols() != eigenvalues.len() || eigenvalues.is_empty() {
            return Err(Error::Dimension(format!(
                "{} eigenvalues and a {}x{} eigenfunction matrix for {n} points",
                eigenvalues.len(),
                eigenfunctions.nrows(),
                eigenfunctions.ncols()
            )));
        }
        let mu = train.weights();
        let w = weight_matrix(train.points(), train.points(), epsilon, eta);
        let densities: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)] * mu[j]).sum()).collect();
        let total_mass: f64 = densities.iter().zip(mu).map(|(s, m)| s * m).sum();
        let d = eigenvalues.len() - 1;
        let standard = DMatrix::from_fn(n, d, |i, j| eigenvalues[j + 1].sqrt() * eigenfunctions[(i, j + 1)]);
        let weighted = DMatrix::from_fn(n, d, |i, j| densities[i].sqrt() * standard[(i, j)]);
        let normalized = DMatrix::from_fn(n, d, |i, j| standard[(i, j)] / densities[i].sqrt());
        let spectra = model_unchecked(mu.to_vec(), eigenvalues, eigenfunctions, rank_tol, 0.0);
        let mut wk = KernelMatrix::from_values(w);
        if eta > 0.0 {
            wk = crate::kernels::mark_thresholded(wk);
        }
        Ok(Self {
            train,
            epsilon,
            eta,
            w: wk,
            densities,
            total_mass,
            spectra,
            standard,
            weighted,
            normalized,
        })
    }

    pub(crate) fn set_clipped_negative(&mut self, v: f64) {
        self.spectra.set_clipped_negative(v);
    }

    pub fn train(&self) -> &MeasuredSet {
        &self.train
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The weight kernel `w` on the training set.
    pub fn weight_kernel(&self) -> &KernelMatrix {
        &self.w
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// All kept eigenpairs of the diffusion kernel, the trivial one first.
    pub fn spectra(&self) -> &SpectralModel {
        &self.spectra
    }

    /// Embedding dimension `d` (the trivial pair excluded).
    pub fn dim(&self) -> usize {
        self.standard.ncols()
    }

    /// `lambda_1 .. lambda_d`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectra.eigenvalues()[1..]
    }

    /// `sqrt(S(x) / S)`.
    pub fn trivial_eigenfunction(&self) -> Vec<f64> {
        self.spectra.eigenfunctions().column(0).iter().copied().collect()
    }

    pub fn standard(&self) -> &DMatrix<f64> {
        &self.standard
    }

    pub fn weighted(&self) -> &DMatrix<f64> {
        &self.weighted
    }

    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    /// `k(x, y) = w(x, y) / sqrt(S(x) S(y))`.
    pub fn diffusion_kernel(&self) -> KernelMatrix {
        let s = &self.densities;
        let w = self.w.values();
        KernelMatrix::from_values(DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| {
            w[(i, j)] / (s[i] * s[j]).sqrt()
        }))
    }

    /// `a(x, y) = w(x, y) / (S(x) S(y))`, the kernel whose space is spanned by the
    /// normalized embedding.
    pub fn a_kernel(&self) -> KernelMatrix {
        let s = &self.densities;
        let w = self.w.values();
        KernelMatrix::from_values(DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] / (s[i] * s[j])))
    }

    /// `(u_0, ..., u_d)` and `(v_0, ..., v_d)` with the trivial column included.
    fn uv_with_trivial(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.train.len();
        let lambda = self.spectra.eigenvalues();
        let f = self.spectra.eigenfunctions();
        let s = &self.densities;
        let u = DMatrix::from_fn(n, lambda.len(), |i, j| s[i].sqrt() * lambda[j].sqrt() * f[(i, j)]);
        let v = DMatrix::from_fn(n, lambda.len(), |i, j| lambda[j].sqrt() * f[(i, j)] / s[i].sqrt());
        (u, v)
    }
}

/// `m(x, y) = w(x, y) / S(x)`; every row integrates to 1 against `mu`.
pub fn random_walk_kernel(m: &DiffusionModel) -> KernelMatrix {
    let w = m.w.values();
    let s = &m.densities;
    KernelMatrix::from_values(DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] / s[i]))
}

/// The diffusion eigenvalue `lambda` written as a Laplacian-eigenmaps eigenvalue
/// `-ln lambda`; both share eigenfunctions.
pub fn laplacian_eigenvalue(lambda: f64) -> f64 {
    -lambda.ln()
}

/// Embedding of test points in all three variants.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionExtension {
    /// `U(Z)`, one row per test point.
    pub weighted: DMatrix<f64>,
    /// `U(Z) / sqrt(S_tilde)`.
    pub standard: DMatrix<f64>,
    /// `U(Z) / S_tilde`.
    pub normalized: DMatrix<f64>,
    /// `S_tilde(z)`.
    pub updated_densities: Vec<f64>,
    /// `sum_x w(z, x) mu(x)` over training points only.
    pub cross_densities: Vec<f64>,
    /// Extension of the trivial weighted coordinate `u_0`.
    pub trivial: Vec<f64>,
}

impl DiffusionExtension {
    /// `w_hat(z, z') = sum_{j=0..d} U_j(z) U_j(z')` on the test points.
    pub fn extended_weight_kernel(&self) -> KernelMatrix {
        let m = self.weighted.nrows();
        KernelMatrix::from_values(DMatrix::from_fn(m, m, |a, b| {
            let mut acc = self.trivial[a] * self.trivial[b];
            for j in 0..self.weighted.ncols() {
                acc += self.weighted[(a, j)] * self.weighted[(b, j)];
            }
            acc
        }))
    }
}

/// Extends the embedding to `test`.
///
/// The updated density of a test point is its density over training plus test
/// points, where a test point that repeats a training point is not counted a
/// second time. With `test = train` it equals the training density.
pub fn diffusion_extend(model: &DiffusionModel, test: &MeasuredSet) -> Result<DiffusionExtension> {
    if test.dim() != model.train.dim() {
        return Err(Error::Dimension(format!(
            "test points have dimension {}, model was fitted in dimension {}",
            test.dim(),
            model.train.dim()
        )));
    }
    let train = &model.train;
    let mu = train.weights();
    let (eps, eta) = (model.epsilon, model.eta);
    let kz = weight_matrix(test.points(), train.points(), eps, eta);
    let (_, v) = model.uv_with_trivial();
    let lambda = model.spectra.eigenvalues();
    let (m, n, d) = (test.len(), train.len(), model.dim());

    let mut cross = Vec::with_capacity(m);
    let mut u_all = DMatrix::zeros(m, d + 1);
    for a in 0..m {
        let c: f64 = (0..n).map(|i| kz[(a, i)] * mu[i]).sum();
        if c <= 0.0 {
            return Err(Error::IsolatedPoint { index: a });
        }
        cross.push(c);
        for j in 0..=d {
            let mut acc = 0.0;
            for i in 0..n {
                acc += kz[(a, i)] * v[(i, j)] * mu[i];
            }
            u_all[(a, j)] = acc / lambda[j];
        }
    }

    let novel: Vec<bool> = test
        .points()
        .iter()
        .map(|z| !train.points().iter().any(|x| x == z))
        .collect();
    let zz = weight_matrix(test.points(), test.points(), eps, eta);
    let updated: Vec<f64> = (0..m)
        .map(|a| {
            let extra: f64 = (0..m).filter(|&b| novel[b]).map(|b| zz[(a, b)] * test.weights()[b]).sum();
            cross[a] + extra
        })
        .collect();

    let weighted = u_all.columns(1, d).into_owned();
    let standard = DMatrix::from_fn(m, d, |a, j| weighted[(a, j)] / updated[a].sqrt());
    let normalized = DMatrix::from_fn(m, d, |a, j| weighted[(a, j)] / updated[a]);
    Ok(DiffusionExtension {
        weighted,
        standard,
        normalized,
        updated_densities: updated,
        cross_densities: cross,
        trivial: u_all.column(0).iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `sqrt(S) f`.
    Forward,
    /// `f / sqrt(S)`.
    Inverse,
    /// `S f`.
    Squared,
}

/// The density multiplier applied pointwise.
pub fn multiplier(values: &[f64], densities: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.len() != densities.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} densities",
            values.len(),
            densities.len()
        )));
    }
    if let Some(index) = densities.iter().position(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::IsolatedPoint { index });
    }
    Ok(values
        .iter()
        .zip(densities)
        .map(|(f, s)| match direction {
            Direction::Forward => f * s.sqrt(),
            Direction::Inverse => f / s.sqrt(),
            Direction::Squared => f * s,
        })
        .collect())
}

/// Residuals of the quadrature identities linking `u_j` and `v_j` on training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeReport {
    /// `max |u_j - (1/lambda_j) sum_y w(., y) v_j(y) mu(y)|`.
    pub forward: f64,
    /// `max |v_j - (1/lambda_j) sum_y a(., y) u_j(y) mu(y)|` with `a = w / (S S)`.
    pub converse: f64,
    /// `max |v_j - (1/lambda_j) sum_y w(., y) u_j(y) mu(y)|`. Holds only where `S = 1`.
    pub converse_with_w: f64,
    /// Number of eigenpairs checked, the trivial one included.
    pub pairs: usize,
    pub tol: f64,
}

impl ExchangeReport {
    pub fn holds(&self) -> bool {
        self.forward <= self.tol && self.converse <= self.tol
    }
}

pub fn exchange_identity_check(model: &DiffusionModel) -> ExchangeReport {
    let (u, v) = model.uv_with_trivial();
    let w = model.w.values();
    let a = model.a_kernel();
    let a = a.values();
    let mu = model.train.weights();
    let lambda = model.spectra.eigenvalues();
    let n = model.train.len();
    let (mut forward, mut converse, mut literal) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..lambda.len() {
        for x in 0..n {
            let (mut fw, mut cv, mut lt) = (0.0, 0.0, 0.0);
            for y in 0..n {
                fw += w[(x, y)] * v[(y, j)] * mu[y];
                cv += a[(x, y)] * u[(y, j)] * mu[y];
                lt += w[(x, y)] * u[(y, j)] * mu[y];
            }
            forward = forward.max((u[(x, j)] - fw / lambda[j]).abs());
            converse = converse.max((v[(x, j)] - cv / lambda[j]).abs());
            literal = literal.max((v[(x, j)] - lt / lambda[j]).abs());
        }
    }
    let scale = u.amax().max(v.amax()).max(1.0);
    ExchangeReport {
        forward,
        converse,
        converse_with_w: literal,
        pairs: lambda.len(),
        tol: DIFFUSION_TOL * scale,
    }
}
