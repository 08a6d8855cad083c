#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use perforated::geometry::{random_occupancy, sample_mask};
use perforated::rng::stream;
use perforated::{BoxSpec, DisorderModel, ObstacleMask, ObstacleShape, SparseSymmetricOperator};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn bx(d: usize, l: f64) -> BoxSpec {
    BoxSpec::new(d, l).unwrap()
}

/// A mask from a randomly chosen disorder model, or from independent cell
/// occupancy, on `Λ_L` at resolution `m`.
pub fn random_mask(rng: &mut ChaCha8Rng, d: usize, l: f64, m: u32) -> ObstacleMask {
    let b = bx(d, l);
    let side = [0.25, 0.5, 0.75, 1.0][rng.random_range(0..4)];
    let shape = ObstacleShape::cube(d, side).unwrap();
    let seed: u64 = rng.random();
    match rng.random_range(0..4) {
        0 => sample_mask(&DisorderModel::bernoulli(rng.random_range(0.1..0.9), shape).unwrap(), &b, m, seed).unwrap(),
        1 => sample_mask(&DisorderModel::poisson(rng.random_range(0.2..1.5), shape).unwrap(), &b, m, seed).unwrap(),
        2 => sample_mask(&DisorderModel::periodic(rng.random_range(0.1..0.6)).unwrap(), &b, m, seed).unwrap(),
        _ => {
            let empty = ObstacleMask::empty(b, m).unwrap();
            let density = rng.random_range(0.0..0.5);
            let occ = random_occupancy(empty.grid().len(), density, rng);
            ObstacleMask::from_occupied(b, m, occ).unwrap()
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream(seed)
}

/// Ascending eigenvalues by dense decomposition, independent of the crate's
/// own dense path.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn dense_count(values: &[f64], e: f64) -> usize {
    values.iter().filter(|&&v| v <= e + 1e-12 * (1.0 + e.abs())).count()
}

/// Random sparse symmetric matrix with about `per_row` off-diagonals per row.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> SparseSymmetricOperator {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, rng.random_range(-4.0..4.0)));
        for _ in 0..per_row / 2 {
            let j = rng.random_range(0..n);
            if j != i {
                let v = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    SparseSymmetricOperator::from_triplets(n, &t).unwrap()
}
