//! Error estimates for the Nystrom extension: average kernel distance, trace and
//! spectral-radius bounds, eigenvalue gaps, and first-order eigen-perturbation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{build_kernel, kernel_diff, KernelMatrix, KernelSpec};
use crate::linalg::{sym_eigen, weighted_eigenvalues};
use crate::measure::{total_volume, MeasuredSet, SplitView};
use crate::nystrom::{run_split, ExtendedEmbedding, ExtensionModel, ResidualDecomposition, SplitRun};
use crate::spectral::{decompose_weighted, SpectralModel};

/// Tolerance (relative to `lambda_1`) for gap and spectrum-identity checks.
pub const GAP_CHECK_TOL: f64 = 1e-8;
/// Minimum eigenvalue separation (relative to `lambda_1`) for the eigenfunction
/// perturbation formula.
pub const GAP_TOL: f64 = 1e-6;
/// Slack allowed in the bound chain.
pub const BOUND_SLACK: f64 = 1e-10;

fn d2(k: &DMatrix<f64>, x: usize, y: usize) -> f64 {
    k[(x, x)] + k[(y, y)] - 2.0 * k[(x, y)]
}

/// `sum_{x, y in test} d2(x, y) mu(x) mu(y)` for a squared-distance function `d2`.
fn test_pair_integral(view: &SplitView, mut d2: impl FnMut(usize, usize) -> f64) -> f64 {
    let w = view.parent().weights();
    let test = view.test_indices();
    let mut acc = 0.0;
    for &x in test {
        for &y in test {
            acc += d2(x, y) * w[x] * w[y];
        }
    }
    acc
}

fn check_pair(k: &KernelMatrix, k_hat: &KernelMatrix, view: &SplitView) -> Result<()> {
    let n = view.parent().len();
    for m in [k, k_hat] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel is {}x{} but the split parent has {n} points",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// Average kernel distance between the retrained and the extended embedding,
/// `(1/|X|) sqrt( sum_{x,y in Z} d2_{k0}(x, y) mu(x) mu(y) )` with `k0 = k - k_hat`.
///
/// Fails when `k - k_hat` is not PSD up to `1e-8 * lambda_1(k)`.
pub fn average_kernel_distance(k: &KernelMatrix, k_hat: &KernelMatrix, view: &SplitView) -> Result<f64> {
    check_pair(k, k_hat, view)?;
    let w = view.parent().weights();
    let lambda1 = weighted_eigenvalues(k.values(), w).first().copied().unwrap_or(0.0);
    let k0 = kernel_diff(k, k_hat)?;
    let min = weighted_eigenvalues(k0.values(), w).last().copied().unwrap_or(0.0);
    let tol = GAP_CHECK_TOL * lambda1.max(0.0);
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tol,
        });
    }
    Ok(distance_from_k0(k0.values(), view))
}

fn distance_from_k0(k0: &DMatrix<f64>, view: &SplitView) -> f64 {
    let sum = test_pair_integral(view, |x, y| d2(k0, x, y));
    sum.max(0.0).sqrt() / total_volume(view.parent())
}

/// The same average computed through `|d2_k - d2_{k_hat}|` over test pairs.
///
/// Agrees with [`average_kernel_distance`] pair by pair because
/// `d2_k = d2_{k_hat} + d2_{k0}`.
pub fn average_kernel_distance_pythagorean(
    k: &KernelMatrix,
    k_hat: &KernelMatrix,
    view: &SplitView,
) -> Result<f64> {
    check_pair(k, k_hat, view)?;
    let (kv, hv) = (k.values(), k_hat.values());
    let sum = test_pair_integral(view, |x, y| (d2(kv, x, y) - d2(hv, x, y)).abs());
    Ok(sum.sqrt() / total_volume(view.parent()))
}

/// The discrepancy integrated over all pairs of `X`, not only test pairs.
///
/// Pairs mixing a test and a training point contribute `k0(z, z)` each, so this
/// exceeds [`average_kernel_distance`] by the cross term
/// `2 |train| sum_z k0(z, z) mu(z)` under the square root.
pub fn average_kernel_distance_all_pairs(
    k: &KernelMatrix,
    k_hat: &KernelMatrix,
    view: &SplitView,
) -> Result<f64> {
    check_pair(k, k_hat, view)?;
    let (kv, hv) = (k.values(), k_hat.values());
    let w = view.parent().weights();
    let n = w.len();
    let mut acc = 0.0;
    for x in 0..n {
        for y in 0..n {
            acc += (d2(kv, x, y) - d2(hv, x, y)).abs() * w[x] * w[y];
        }
    }
    Ok(acc.sqrt() / total_volume(view.parent()))
}

/// Measured distance and the two upper bounds on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub avg_distance: f64,
    /// `sqrt(2 |Z|) / |X| * sqrt(Tr k0)`.
    pub trace_bound: f64,
    /// `sqrt(2 r |Z|) / |X| * sqrt(||k0||_2)` with `r` = [`ErrorReport::bound_rank`].
    pub spectral_bound: f64,
    pub trace_k0: f64,
    /// Largest eigenvalue of `k0`, with no rank floor applied.
    pub spec_radius_k0: f64,
    /// `dim H0`, eigenvalues of `k0` above the rank floor.
    pub s: usize,
    /// Number of strictly positive eigenvalues of `k0`. Equals `s` unless `k` has
    /// eigenvalues below the rank floor, whose leftovers in `k0` still enter `Tr k0`.
    pub bound_rank: usize,
    pub vol_x: f64,
    pub vol_z: f64,
}

impl ErrorReport {
    pub fn distance_within_trace_bound(&self) -> bool {
        self.avg_distance <= self.trace_bound + BOUND_SLACK
    }

    pub fn trace_within_spectral_bound(&self) -> bool {
        self.trace_bound <= self.spectral_bound + BOUND_SLACK
    }

    pub fn chain_holds(&self) -> bool {
        self.avg_distance >= 0.0 && self.distance_within_trace_bound() && self.trace_within_spectral_bound()
    }
}

pub fn error_bounds(r: &ResidualDecomposition, view: &SplitView) -> Result<ErrorReport> {
    let n = view.parent().len();
    if r.k0().nrows() != n {
        return Err(Error::Dimension(format!(
            "residual on {} points for a {n}-point split",
            r.k0().nrows()
        )));
    }
    let vol_x = total_volume(view.parent());
    let vol_z = view.test_volume();
    let trace_k0 = r.trace().max(0.0);
    let eta = weighted_eigenvalues(r.k0().values(), view.parent().weights());
    let spec_radius_k0 = eta.first().copied().unwrap_or(0.0).max(0.0);
    let bound_rank = eta.iter().filter(|v| **v > 0.0).count();
    let avg_distance = distance_from_k0(r.k0().values(), view);
    Ok(ErrorReport {
        avg_distance,
        trace_bound: (2.0 * vol_z).sqrt() / vol_x * trace_k0.sqrt(),
        spectral_bound: (2.0 * bound_rank as f64 * vol_z).sqrt() / vol_x * spec_radius_k0.sqrt(),
        trace_k0,
        spec_radius_k0,
        s: r.s(),
        bound_rank,
        vol_x,
        vol_z,
    })
}

/// Spectra of `k` on `X` (Lambda), of `k_hat` on `X` (Gamma) and of the training
/// kernel (Sigma), with the auxiliary kernels `t` and `l = k_train + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Top `d` eigenvalues of `l` on the training set.
    pub l_spectrum: Vec<f64>,
    /// `J = sum_{z in Z} v_hat(z) v_hat(z)^T mu(z)` with `v_hat_j = psi_hat_j / sqrt(sigma_j)`.
    pub j_matrix: DMatrix<f64>,
    pub t_kernel: KernelMatrix,
    pub l_kernel: KernelMatrix,
    pub k0_norm: f64,
    pub t_norm: f64,
    /// `lambda_j - gamma_j`, `j <= d`.
    pub lambda_gamma_gaps: Vec<f64>,
    /// `gamma_j - sigma_j`, `j <= d`.
    pub gamma_sigma_gaps: Vec<f64>,
    /// `lambda_j`, `j > d`.
    pub tail: Vec<f64>,
    /// `max_j |l_spectrum_j - gamma_j|`.
    pub l_gamma_defect: f64,
}

/// Builds `J`, `t` and `l`, and checks every eigenvalue inequality between the
/// three spectra, all within `1e-8 * lambda_1`.
pub fn spectrum_comparison(
    full_spectra: &SpectralModel,
    e: &ExtendedEmbedding,
    model: &ExtensionModel,
) -> Result<SpectrumComparison> {
    let view = e.view();
    let parent = view.parent();
    let w = parent.weights();
    let d = model.dim();
    let sigma = model.spectra().eigenvalues().to_vec();
    let lambda = full_spectra.eigenvalues().to_vec();
    let lambda1 = full_spectra.lambda_max();
    let tol = GAP_CHECK_TOL * lambda1;

    let k_hat = KernelMatrix::from_values(e.features() * e.features().transpose());
    let mut gamma = weighted_eigenvalues(k_hat.values(), w);
    gamma.truncate(d);

    let mut j_matrix = DMatrix::zeros(d, d);
    for &z in view.test_indices() {
        for a in 0..d {
            let va = e.features()[(z, a)] / sigma[a].sqrt();
            for b in 0..d {
                let vb = e.features()[(z, b)] / sigma[b].sqrt();
                j_matrix[(a, b)] += va * vb * w[z];
            }
        }
    }

    let psi = model.train_features().features();
    let t_values = psi * &j_matrix * psi.transpose();
    let train = model.train();
    let k_train = build_kernel(model.spec(), train, train)?;
    let l_values = k_train.values() + &t_values;
    let mut l_spectrum = weighted_eigenvalues(&l_values, train.weights());
    l_spectrum.truncate(d);
    let t_norm = weighted_eigenvalues(&t_values, train.weights())
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(0.0);

    let k_full = build_kernel(model.spec(), parent, parent)?;
    let k0 = kernel_diff(&k_full, &k_hat)?;
    let k0_norm = weighted_eigenvalues(k0.values(), w)
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(0.0);

    let lam = |j: usize| lambda.get(j).copied().unwrap_or(0.0);
    let lambda_gamma_gaps: Vec<f64> = (0..d).map(|j| lam(j) - gamma[j]).collect();
    let gamma_sigma_gaps: Vec<f64> = (0..d).map(|j| gamma[j] - sigma[j]).collect();
    let tail: Vec<f64> = lambda.iter().skip(d).copied().collect();
    let l_gamma_defect = l_spectrum
        .iter()
        .zip(&gamma)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    for (j, g) in lambda_gamma_gaps.iter().enumerate() {
        if *g < -tol || *g > k0_norm + tol {
            return Err(Error::NumericalInconsistency(format!(
                "lambda_{} - gamma_{} = {g:e} outside [0, ||k0||_2 = {k0_norm:e}]",
                j + 1,
                j + 1
            )));
        }
    }
    for (j, g) in gamma_sigma_gaps.iter().enumerate() {
        if *g < -tol || *g > t_norm + tol {
            return Err(Error::NumericalInconsistency(format!(
                "gamma_{} - sigma_{} = {g:e} outside [0, ||t||_2 = {t_norm:e}]",
                j + 1,
                j + 1
            )));
        }
    }
    for (j, l) in tail.iter().enumerate() {
        if *l < -tol || *l > k0_norm + tol {
            return Err(Error::NumericalInconsistency(format!(
                "lambda_{} = {l:e} outside [0, ||k0||_2 = {k0_norm:e}]",
                d + j + 1
            )));
        }
    }
    if l_gamma_defect > tol {
        return Err(Error::NumericalInconsistency(format!(
            "spectrum of l differs from the spectrum of k_hat by {l_gamma_defect:e}"
        )));
    }

    Ok(SpectrumComparison {
        lambda,
        gamma,
        sigma,
        l_spectrum,
        j_matrix,
        t_kernel: KernelMatrix::from_values(t_values),
        l_kernel: KernelMatrix::from_values(l_values),
        k0_norm,
        t_norm,
        lambda_gamma_gaps,
        gamma_sigma_gaps,
        tail,
        l_gamma_defect,
    })
}

/// First-order eigenpairs of `k_hat` predicted from the spectra of `k` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationEstimate {
    /// `gamma_hat_i = lambda_i (1 - m_ii)`.
    pub gamma_hat: Vec<f64>,
    /// `g_hat_i` as point values, `None` where an eigenvalue gap is below tolerance.
    pub g_hat: Vec<Option<Vec<f64>>>,
    /// Indices whose eigenfunction estimate was withheld.
    pub degenerate: Vec<usize>,
}

/// `gamma_hat_i = lambda_i (1 - m_ii)` and
/// `g_hat_i = v_i - sum_{j != i} m_ij sqrt(lambda_i lambda_j) / (lambda_i - lambda_j) v_j`.
pub fn perturbation_estimate(full_spectra: &SpectralModel, m: &DMatrix<f64>) -> Result<PerturbationEstimate> {
    let lambda = full_spectra.eigenvalues();
    let v = full_spectra.eigenfunctions();
    let r = lambda.len();
    if m.nrows() != r || m.ncols() != r {
        return Err(Error::Dimension(format!(
            "projector is {}x{} for {r} eigenpairs",
            m.nrows(),
            m.ncols()
        )));
    }
    let gap_tol = GAP_TOL * full_spectra.lambda_max();
    let gamma_hat = (0..r).map(|i| lambda[i] * (1.0 - m[(i, i)])).collect();
    let mut g_hat = Vec::with_capacity(r);
    let mut degenerate = Vec::new();
    for i in 0..r {
        if (0..r).any(|j| j != i && (lambda[i] - lambda[j]).abs() < gap_tol) {
            degenerate.push(i);
            g_hat.push(None);
            continue;
        }
        let mut g: Vec<f64> = v.column(i).iter().copied().collect();
        for j in (0..r).filter(|&j| j != i) {
            let coef = m[(i, j)] * (lambda[i] * lambda[j]).sqrt() / (lambda[i] - lambda[j]);
            for (x, gx) in g.iter_mut().enumerate() {
                *gx -= coef * v[(x, j)];
            }
        }
        g_hat.push(Some(g));
    }
    Ok(PerturbationEstimate {
        gamma_hat,
        g_hat,
        degenerate,
    })
}

/// Estimated eigenvalues and, where not degenerate, eigenvectors.
pub type InverseEstimate = (Vec<f64>, Vec<Option<Vec<f64>>>);

/// The reverse direction: `lambda_i ~ gamma_i (1 + m_ii)` and
/// `v_i ~ g_i + sum_{j != i} m_ij sqrt(gamma_i gamma_j) / (gamma_i - gamma_j) g_j`,
/// with `gamma_i = 0`, `g_i = 0` beyond the rank of `k_hat`.
///
/// `gamma` and the columns of `g` are padded with zeros up to the size of `m`.
pub fn inverse_perturbation(
    gamma: &[f64],
    g: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<InverseEstimate> {
    let r = m.nrows();
    if gamma.len() > r || g.ncols() != gamma.len() {
        return Err(Error::Dimension("gamma / g / M sizes disagree".into()));
    }
    let gam = |i: usize| gamma.get(i).copied().unwrap_or(0.0);
    let scale = gamma.first().copied().unwrap_or(0.0);
    let n = g.nrows();
    let col = |j: usize| -> Vec<f64> {
        if j < g.ncols() {
            g.column(j).iter().copied().collect()
        } else {
            vec![0.0; n]
        }
    };
    let lambda_hat = (0..r).map(|i| gam(i) * (1.0 + m[(i, i)])).collect();
    let mut v_hat = Vec::with_capacity(r);
    for i in 0..r {
        let mut v = col(i);
        let mut ok = true;
        for j in (0..r).filter(|&j| j != i) {
            let num = m[(i, j)] * (gam(i) * gam(j)).sqrt();
            if num == 0.0 {
                continue;
            }
            let den = gam(i) - gam(j);
            if den.abs() < GAP_TOL * scale {
                ok = false;
                break;
            }
            let gj = col(j);
            for (x, vx) in v.iter_mut().enumerate() {
                *vx += num / den * gj[x];
            }
        }
        v_hat.push(ok.then_some(v));
    }
    Ok((lambda_hat, v_hat))
}

/// How the first-order eigenvalue error shrinks as the residual is scaled down.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub scales: Vec<f64>,
    pub k0_norms: Vec<f64>,
    /// `max_i |gamma_i - gamma_hat_i|` at each scale.
    pub max_errors: Vec<f64>,
    /// `max_errors[i] / max_errors[i + 1]`.
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log max_error` against `log ||k0||_2`.
    pub slope: f64,
}

/// Replaces `k0` by `t * k0` (keeping `k_hat`) for each scale `t`, reruns the
/// whole fit / extend / retrain pipeline on the kernel `k_hat + t k0`, and
/// measures the first-order eigenvalue error against the spectrum of `k_hat`.
pub fn perturbation_scaling(run: &SplitRun, scales: &[f64]) -> Result<ScalingReport> {
    let view = run.embedding.view();
    let parent = view.parent();
    let n = parent.len();
    let k_hat = run.embedding.features() * run.embedding.features().transpose();
    let k0 = run.residual.k0().values().clone();
    let rank_tol = run.full_spectra.rank_tol();
    let index_points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let index_set = MeasuredSet::new(index_points, parent.weights().to_vec())?;
    let index_view = SplitView::from_parts(
        &index_set.subset(view.train_indices())?,
        if view.test_indices().is_empty() {
            None
        } else {
            Some(index_set.subset(view.test_indices())?)
        }
        .as_ref(),
    )?;
    // index_view stacks train then test; map its rows back to parent indices.
    let order: Vec<usize> = view
        .train_indices()
        .iter()
        .chain(view.test_indices())
        .copied()
        .collect();

    let mut k0_norms = Vec::new();
    let mut max_errors = Vec::new();
    for &t in scales {
        let gram = DMatrix::from_fn(n, n, |i, j| k_hat[(i, j)] + t * k0[(i, j)]);
        let spec = KernelSpec::precomputed(gram)?;
        let scaled = run_split(&index_view, &spec, rank_tol)?;
        let est = perturbation_estimate(&scaled.full_spectra, scaled.residual.projector())?;
        let w: Vec<f64> = order.iter().map(|&i| parent.weights()[i]).collect();
        let kh = scaled.embedding.features() * scaled.embedding.features().transpose();
        let (gamma, _, _) = decompose_weighted(&kh, &w, f64::NEG_INFINITY);
        let d = scaled.model.dim();
        let err = est
            .gamma_hat
            .iter()
            .enumerate()
            .map(|(i, gh)| {
                let reference = if i < d { gamma[i] } else { 0.0 };
                (reference - gh).abs()
            })
            .fold(0.0f64, f64::max);
        k0_norms.push(scaled.residual.spectral_norm());
        max_errors.push(err);
    }
    let ratios = max_errors.windows(2).map(|p| p[0] / p[1]).collect();
    let slope = log_log_slope(&k0_norms, &max_errors);
    Ok(ScalingReport {
        scales: scales.to_vec(),
        k0_norms,
        max_errors,
        ratios,
        slope,
    })
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Eigenpairs of `k_hat` on the parent set (eigenvalues decreasing, all of them).
pub fn extended_spectrum(e: &ExtendedEmbedding) -> (Vec<f64>, DMatrix<f64>) {
    let w = e.view().parent().weights();
    let k_hat = e.features() * e.features().transpose();
    let b = crate::linalg::weighted_surrogate(&k_hat, w);
    let (vals, vecs) = sym_eigen(&b);
    let funcs = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] / w[i].sqrt());
    (vals, funcs)
}
