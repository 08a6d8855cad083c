//! Lowest eigenpairs: dense symmetric eigendecomposition for small operators,
//! shift-invert subspace iteration with Rayleigh-Ritz for large ones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use super::band::BandLdlt;
use super::{SpectraError, DENSE_CUTOFF};
use crate::operators::SparseSymmetricOperator;
use crate::rng;

/// Residual target `‖Av − λv‖ <= RESIDUAL_TOL * ‖A‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// All eigenvalues of `a`, ascending.
pub fn eigenvalues_dense(a: &SparseSymmetricOperator) -> Vec<f64> {
    let mut values: Vec<f64> = a.to_dense().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

fn residual(a: &SparseSymmetricOperator, value: f64, v: &[f64]) -> f64 {
    a.mul_vec(v).iter().zip(v).map(|(av, x)| (av - value * x).powi(2)).sum::<f64>().sqrt()
}

fn dense_pairs(a: &SparseSymmetricOperator, k: usize) -> Vec<EigenPair> {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let value = eig.eigenvalues[i];
            let vector: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let residual = residual(a, value, &vector);
            EigenPair { value, vector, residual }
        })
        .collect()
}

/// The `k` smallest eigenpairs, ascending, each with residual at most
/// `1e-8 ‖A‖` (`‖A‖` bounded by the largest absolute row sum).
pub fn lowest_k(a: &SparseSymmetricOperator, k: usize) -> Result<Vec<EigenPair>, SpectraError> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(SpectraError::InvalidCount { k, dim: n });
    }
    let norm = a.norm_bound().max(f64::MIN_POSITIVE);
    let tol = RESIDUAL_TOL * norm;
    let pairs = if n <= DENSE_CUTOFF { dense_pairs(a, k) } else { subspace_iteration(a, k, tol)? };
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    if worst > tol {
        return Err(SpectraError::NotConverged { residual: worst, tolerance: tol });
    }
    Ok(pairs)
}

fn orthonormalize(basis: &mut DMatrix<f64>, stream: &mut impl Rng) {
    let (n, m) = basis.shape();
    for j in 0..m {
        for _attempt in 0..3 {
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for i in 0..j {
                    let proj = basis.column(i).dot(&basis.column(j));
                    let qi = basis.column(i).clone_owned();
                    basis.column_mut(j).axpy(-proj, &qi, 1.0);
                }
            }
            let norm = basis.column(j).norm();
            if norm > 1e-10 {
                basis.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            let fresh = DVector::from_fn(n, |_, _| stream.random::<f64>() - 0.5);
            basis.set_column(j, &fresh);
        }
    }
}

fn apply(a: &SparseSymmetricOperator, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = basis.shape();
    let mut out = DMatrix::zeros(n, m);
    let mut y = vec![0.0; n];
    for j in 0..m {
        a.mul_vec_into(basis.column(j).as_slice(), &mut y);
        out.column_mut(j).copy_from_slice(&y);
    }
    out
}

fn subspace_iteration(a: &SparseSymmetricOperator, k: usize, tol: f64) -> Result<Vec<EigenPair>, SpectraError> {
    let n = a.dim();
    let m = (2 * k + 8).min(n);
    let norm = a.norm_bound();
    // Shift strictly below the spectrum so the factorization is definite.
    let shift = a.gershgorin_lower().min(0.0) - 1e-6 * norm.max(1.0);
    let factor = BandLdlt::factor(a, shift).map_err(|b| SpectraError::Breakdown(format!("{b:?}")))?;
    let mut stream = rng::stream(0x5EED_0F_E16E);
    let mut basis = DMatrix::from_fn(n, m, |_, _| stream.random::<f64>() - 0.5);
    orthonormalize(&mut basis, &mut stream);
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        for j in 0..m {
            factor.solve(basis.column_mut(j).as_mut_slice());
        }
        orthonormalize(&mut basis, &mut stream);
        let ab = apply(a, &basis);
        let projected = basis.transpose() * &ab;
        let projected = (&projected + projected.transpose()) * 0.5;
        let eig = SymmetricEigen::new(projected);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let rotation = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        basis = &basis * &rotation;
        let ab = &ab * &rotation;
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let residuals: Vec<f64> = (0..k)
            .map(|j| (ab.column(j) - basis.column(j) * values[j]).norm())
            .collect();
        worst = residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tol {
            return Ok((0..k)
                .map(|j| EigenPair {
                    value: values[j],
                    vector: basis.column(j).iter().copied().collect(),
                    residual: residuals[j],
                })
                .collect());
        }
    }
    Err(SpectraError::NotConverged { residual: worst, tolerance: tol })
}
