use rand::Rng;

use crate::measure::MeasuredSet;

/// `n` points uniform in `[-1, 1]^d` with weights uniform in `[0.5, 2]`.
pub(crate) fn random_set<R: Rng>(rng: &mut R, n: usize, d: usize) -> MeasuredSet {
    let points = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    MeasuredSet::new(points, weights).unwrap()
}
