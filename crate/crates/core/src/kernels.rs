//! Mercer kernels: construction, validation, kernel distances and restrictions.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;
use crate::measure::{MeasuredSet, SplitView};

/// Symmetry tolerance, relative to the largest absolute entry.
pub const TOL_SYM: f64 = 1e-12;
/// PSD tolerance, relative to `max(largest eigenvalue, 1)`.
pub const TOL_PSD: f64 = 1e-10;

/// Which kernel to evaluate between two point sets.
///
/// A precomputed kernel is a square Gram matrix over some master index set; the
/// "points" it is evaluated on are then one-dimensional and hold that index.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `w(x, y) = exp(-|x - y|^2 / epsilon)`, zeroed where it falls below `eta`.
    Gaussian { epsilon: f64, eta: f64 },
    /// `e(x, y) = x^T y`.
    Linear,
    Precomputed(Arc<DMatrix<f64>>),
}

impl KernelSpec {
    pub fn gaussian(epsilon: f64, eta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("gaussian bandwidth {epsilon} must be > 0")));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::Config(format!("threshold eta {eta} not in [0, 1)")));
        }
        Ok(Self::Gaussian { epsilon, eta })
    }

    /// Accepts a square Gram matrix. A symmetry defect below [`TOL_SYM`] is averaged away;
    /// anything larger is rejected.
    pub fn precomputed(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "precomputed kernel must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("precomputed kernel has non-finite entries".into()));
        }
        let defect = symmetry_defect(&gram);
        let tol = TOL_SYM * gram.amax().max(f64::MIN_POSITIVE);
        if defect > tol {
            return Err(Error::NotSymmetric { defect, tol });
        }
        let sym = (&gram + gram.transpose()) * 0.5;
        Ok(Self::Precomputed(Arc::new(sym)))
    }

    pub fn is_thresholded(&self) -> bool {
        matches!(self, Self::Gaussian { eta, .. } if *eta > 0.0)
    }

    fn precomputed_index(gram: &DMatrix<f64>, p: &[f64]) -> Result<usize> {
        if p.len() != 1 {
            return Err(Error::Dimension(format!(
                "precomputed kernels take 1-d index points, got dimension {}",
                p.len()
            )));
        }
        let v = p[0];
        let idx = v as usize;
        if v < 0.0 || v.fract() != 0.0 || idx >= gram.nrows() {
            return Err(Error::Index {
                index: if v < 0.0 { usize::MAX } else { idx },
                len: gram.nrows(),
            });
        }
        Ok(idx)
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// The thresholded Gaussian weight, shared with the diffusion module which also
/// admits `eta = 1`.
pub(crate) fn gaussian_weight(x: &[f64], y: &[f64], epsilon: f64, eta: f64) -> f64 {
    let w = (-sq_dist(x, y) / epsilon).exp();
    if w >= eta {
        w
    } else {
        0.0
    }
}

pub(crate) fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    defect
}

/// Outcome of a Mercer check on a square block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MercerCertificate {
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_abs_entry: f64,
    pub tol_psd: f64,
    pub certified: bool,
}

impl MercerCertificate {
    /// Magnitude of the most negative eigenvalue, zero when there is none.
    pub fn negative_mass(&self) -> f64 {
        (-self.min_eigenvalue).max(0.0)
    }
}

/// A dense kernel block `[k(a_i, b_j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    thresholded: bool,
    certificate: Option<MercerCertificate>,
}

impl KernelMatrix {
    pub fn from_values(values: DMatrix<f64>) -> Self {
        Self {
            values,
            thresholded: false,
            certificate: None,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    /// True when entries were zeroed by a sparsity threshold (PSD is then not guaranteed).
    pub fn is_thresholded(&self) -> bool {
        self.thresholded
    }

    pub fn certificate(&self) -> Option<&MercerCertificate> {
        self.certificate.as_ref()
    }

    /// Validates and attaches the certificate. Fails only on a non-square block.
    pub fn certify(mut self, tol_psd: f64) -> Result<Self> {
        self.certificate = Some(validate_mercer(&self, tol_psd)?);
        Ok(self)
    }

    /// The block on `rows x cols`.
    pub fn sub_block(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        for (&idx, len) in rows
            .iter()
            .map(|i| (i, self.nrows()))
            .chain(cols.iter().map(|j| (j, self.ncols())))
        {
            if idx >= len {
                return Err(Error::Index { index: idx, len });
            }
        }
        let values = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])]);
        Ok(Self {
            values,
            thresholded: self.thresholded,
            certificate: None,
        })
    }
}

pub(crate) fn mark_thresholded(mut k: KernelMatrix) -> KernelMatrix {
    k.thresholded = true;
    k
}

/// Evaluates `spec` on every pair `(a_i, b_j)`.
pub fn build_kernel(spec: &KernelSpec, a: &MeasuredSet, b: &MeasuredSet) -> Result<KernelMatrix> {
    build_kernel_on_points(spec, a.points(), b.points())
}

pub(crate) fn build_kernel_on_points(
    spec: &KernelSpec,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Result<KernelMatrix> {
    let (n, m) = (a.len(), b.len());
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "kernel between dimension {} and {} points",
                x.len(),
                y.len()
            )));
        }
    }
    let values = match spec {
        KernelSpec::Gaussian { epsilon, eta } => {
            DMatrix::from_fn(n, m, |i, j| gaussian_weight(&a[i], &b[j], *epsilon, *eta))
        }
        KernelSpec::Linear => DMatrix::from_fn(n, m, |i, j| {
            a[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum()
        }),
        KernelSpec::Precomputed(gram) => {
            let ra = a
                .iter()
                .map(|p| KernelSpec::precomputed_index(gram, p))
                .collect::<Result<Vec<_>>>()?;
            let rb = b
                .iter()
                .map(|p| KernelSpec::precomputed_index(gram, p))
                .collect::<Result<Vec<_>>>()?;
            DMatrix::from_fn(n, m, |i, j| gram[(ra[i], rb[j])])
        }
    };
    Ok(KernelMatrix {
        values,
        thresholded: spec.is_thresholded(),
        certificate: None,
    })
}

/// Checks symmetry, positive semi-definiteness and boundedness of a square block.
///
/// Certified iff the symmetry defect is within [`TOL_SYM`] (relative) and the smallest
/// eigenvalue is at least `-tol_psd * max(lambda_1, 1)`.
pub fn validate_mercer(k: &KernelMatrix, tol_psd: f64) -> Result<MercerCertificate> {
    if !k.is_square() {
        return Err(Error::Dimension(format!(
            "Mercer check needs a square block, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let max_abs_entry = k.values.amax();
    let defect = symmetry_defect(&k.values);
    let eig = sym_eigenvalues(&k.values);
    let max_eigenvalue = eig.first().copied().unwrap_or(0.0);
    let min_eigenvalue = eig.last().copied().unwrap_or(0.0);
    let sym_ok = defect <= TOL_SYM * max_abs_entry.max(f64::MIN_POSITIVE);
    let psd_ok = min_eigenvalue >= -tol_psd * max_eigenvalue.max(1.0);
    Ok(MercerCertificate {
        symmetry_defect: defect,
        min_eigenvalue,
        max_eigenvalue,
        max_abs_entry,
        tol_psd,
        certified: sym_ok && psd_ok && max_abs_entry.is_finite(),
    })
}

/// `d_k(x_i, x_j) = sqrt(k_ii + k_jj - 2 k_ij)`.
///
/// A negative radicand within `TOL_PSD * max(1, k_ii, k_jj)` is clamped to zero.
pub fn kernel_distance(k: &KernelMatrix, i: usize, j: usize) -> Result<f64> {
    if !k.is_square() {
        return Err(Error::Dimension("kernel distance needs a square block".into()));
    }
    for idx in [i, j] {
        if idx >= k.nrows() {
            return Err(Error::Index {
                index: idx,
                len: k.nrows(),
            });
        }
    }
    let (kii, kjj) = (k.get(i, i), k.get(j, j));
    let radicand = kii + kjj - 2.0 * k.get(i, j);
    let tol = TOL_PSD * kii.abs().max(kjj.abs()).max(1.0);
    if radicand < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: radicand,
            tol,
        });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Which block of a kernel on the parent set to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    Train,
    Test,
    /// Rows indexed by training points, columns by test points.
    TrainTest,
}

/// Restriction of a kernel on the parent set of `view` to one of its blocks.
pub fn restrict(k: &KernelMatrix, view: &SplitView, part: Part) -> Result<KernelMatrix> {
    let n = view.parent().len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Dimension(format!(
            "kernel is {}x{} but the split parent has {n} points",
            k.nrows(),
            k.ncols()
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let (rows, cols) = match part {
        Part::Full => (&all[..], &all[..]),
        Part::Train => (view.train_indices(), view.train_indices()),
        Part::Test => (view.test_indices(), view.test_indices()),
        Part::TrainTest => (view.train_indices(), view.test_indices()),
    };
    k.sub_block(rows, cols)
}

fn same_shape(a: &KernelMatrix, b: &KernelMatrix) -> Result<()> {
    if a.values.shape() != b.values.shape() {
        return Err(Error::Dimension(format!(
            "kernel shapes {:?} and {:?} differ",
            a.values.shape(),
            b.values.shape()
        )));
    }
    Ok(())
}

pub fn kernel_sum(a: &KernelMatrix, b: &KernelMatrix) -> Result<KernelMatrix> {
    same_shape(a, b)?;
    Ok(KernelMatrix {
        values: &a.values + &b.values,
        thresholded: a.thresholded || b.thresholded,
        certificate: None,
    })
}

/// Entrywise difference; not necessarily a kernel, so re-validate before trusting PSD.
pub fn kernel_diff(a: &KernelMatrix, b: &KernelMatrix) -> Result<KernelMatrix> {
    same_shape(a, b)?;
    Ok(KernelMatrix {
        values: &a.values - &b.values,
        thresholded: a.thresholded || b.thresholded,
        certificate: None,
    })
}
