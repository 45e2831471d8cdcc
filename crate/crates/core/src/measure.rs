//! Finite measured point sets and discrete integration against their measure.
//!
//! Every integral over a data set is realized as a weighted sum
//! `sum_i f(x_i) * mu_i`, accumulated in ascending index order so that
//! results are reproducible bit for bit.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A non-empty finite point set in `R^D` carrying a strictly positive discrete measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSet {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl MeasuredSet {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Dimension("a measured set needs at least one point".into()));
        }
        if weights.len() != points.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        let dim = points[0].len();
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::Dimension(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite coordinate".into()));
        }
        Ok(Self {
            points,
            weights,
            labels: None,
        })
    }

    /// Counting measure: every point gets weight 1.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for clippy's sake.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The sub-set on `indices`, in the given order. Weights and labels follow their points.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Index {
                index,
                len: self.len(),
            });
        }
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        let mut out = Self::new(points, weights)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }

    /// `self` followed by `other`. Labels survive only when both sides carry them.
    pub fn concat(&self, other: &MeasuredSet) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot join sets of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut out = self.clone();
        out.points.extend(other.points.iter().cloned());
        out.weights.extend_from_slice(&other.weights);
        out.labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Ok(out)
    }
}

fn check_len(values: &[f64], s: &MeasuredSet) -> Result<()> {
    if values.len() != s.len() {
        return Err(Error::Dimension(format!(
            "{} function values for {} points",
            values.len(),
            s.len()
        )));
    }
    Ok(())
}

/// `sum_i f(x_i) mu_i`.
pub fn integrate(f: &[f64], s: &MeasuredSet) -> Result<f64> {
    check_len(f, s)?;
    Ok(f.iter().zip(&s.weights).fold(0.0, |acc, (v, w)| acc + v * w))
}

/// The `L^2(s, mu)` inner product `sum_i f_i g_i mu_i`.
pub fn l2_inner(f: &[f64], g: &[f64], s: &MeasuredSet) -> Result<f64> {
    check_len(f, s)?;
    check_len(g, s)?;
    Ok(weighted_dot(f, g, &s.weights))
}

pub(crate) fn weighted_dot(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(w)
        .fold(0.0, |acc, ((a, b), m)| acc + a * b * m)
}

/// `|X| = sum_i mu_i`.
pub fn total_volume(s: &MeasuredSet) -> f64 {
    s.weights.iter().sum()
}

/// A training / test partition of a parent set.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitView {
    parent: MeasuredSet,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl SplitView {
    pub fn parent(&self) -> &MeasuredSet {
        &self.parent
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn train_set(&self) -> MeasuredSet {
        self.parent
            .subset(&self.train)
            .expect("training indices validated at construction")
    }

    /// `None` when the test part is empty.
    pub fn test_set(&self) -> Option<MeasuredSet> {
        if self.test.is_empty() {
            None
        } else {
            Some(self.parent.subset(&self.test).expect("validated"))
        }
    }

    pub fn train_volume(&self) -> f64 {
        self.train.iter().map(|&i| self.parent.weights[i]).sum()
    }

    pub fn test_volume(&self) -> f64 {
        self.test.iter().map(|&i| self.parent.weights[i]).sum()
    }

    /// Stacks `train` then `test` into one parent, so training indices come first.
    pub fn from_parts(train: &MeasuredSet, test: Option<&MeasuredSet>) -> Result<Self> {
        let n = train.len();
        match test {
            None => Ok(Self {
                parent: train.clone(),
                train: (0..n).collect(),
                test: Vec::new(),
            }),
            Some(test) => {
                let parent = train.concat(test)?;
                let total = parent.len();
                Ok(Self {
                    parent,
                    train: (0..n).collect(),
                    test: (n..total).collect(),
                })
            }
        }
    }
}

/// Partitions `s`: the listed indices become the test part, the rest the training part.
/// Duplicate test indices are ignored.
pub fn split(s: &MeasuredSet, test_indices: &[usize]) -> Result<SplitView> {
    let n = s.len();
    let mut is_test = vec![false; n];
    for &i in test_indices {
        if i >= n {
            return Err(Error::Index { index: i, len: n });
        }
        is_test[i] = true;
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    Ok(SplitView {
        parent: s.clone(),
        train,
        test,
    })
}

/// Draws `round(frac * n)` distinct test indices (sorted), reproducibly from `seed`.
/// At least one point is always left for training.
pub fn random_test_indices(n: usize, frac: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::Config(format!("split fraction {frac} not in [0, 1)")));
    }
    let count = ((frac * n as f64).round() as usize).min(n.saturating_sub(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
