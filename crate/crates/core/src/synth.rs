//! Synthetic point clouds for demos and tests. Same seed, same data.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::measure::MeasuredSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// 3-d roll; the label is the arc length along the spiral.
    SwissRoll,
    /// Two concentric circles in the plane; the label is 0 (outer) or 1 (inner).
    Circles,
    /// Three isotropic gaussian blobs in the plane; the label is the blob index.
    GaussianBlobs,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swiss-roll" => Ok(Self::SwissRoll),
            "circles" => Ok(Self::Circles),
            "gaussian-blobs" => Ok(Self::GaussianBlobs),
            other => Err(Error::Config(format!(
                "unknown shape {other:?} (expected swiss-roll, circles or gaussian-blobs)"
            ))),
        }
    }
}

/// Arc length of the spiral `t -> (t cos t, t sin t)` from 0 to `t`.
pub fn spiral_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// `n` uniformly weighted points of `shape` with gaussian noise of std `noise`.
pub fn generate(shape: Shape, n: usize, noise: f64, seed: u64) -> Result<MeasuredSet> {
    if n == 0 {
        return Err(Error::Config("need at least one point".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Config(format!("noise {noise} must be >= 0")));
    }
    let noise_dist = Normal::new(0.0, noise).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (p, label): (Vec<f64>, String) = match shape {
            Shape::SwissRoll => {
                let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
                let h = 21.0 * rng.random::<f64>();
                let arc = spiral_arc_length(t) - spiral_arc_length(1.5 * PI);
                (vec![t * t.cos(), h, t * t.sin()], format!("{arc}"))
            }
            Shape::Circles => {
                let a = 2.0 * PI * rng.random::<f64>();
                let inner = i % 2;
                let r = if inner == 1 { 0.5 } else { 1.0 };
                (vec![r * a.cos(), r * a.sin()], inner.to_string())
            }
            Shape::GaussianBlobs => {
                const CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]];
                let b = i % 3;
                let unit = Normal::new(0.0, 1.0).expect("unit normal");
                (
                    vec![CENTERS[b][0] + unit.sample(&mut rng), CENTERS[b][1] + unit.sample(&mut rng)],
                    b.to_string(),
                )
            }
        };
        let p = p.into_iter().map(|v| v + noise_dist.sample(&mut rng)).collect();
        points.push(p);
        labels.push(label);
    }
    MeasuredSet::uniform(points)?.with_labels(labels)
}
