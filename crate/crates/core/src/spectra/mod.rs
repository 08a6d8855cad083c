//! Eigenvalue counting and low eigenpairs of sparse symmetric operators.
//!
//! `N(A, E) = #{λ ≤ E}` is the number of negative pivots of an `L D L^T`
//! factorization of `A - (E + τ) I` (Sylvester's law of inertia), where
//! `τ = 1e-12 (1 + |E|)` makes exact multiplicities at `E` count as `≤ E`.

mod band;
mod eigen;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CellGrid;
use crate::operators::SparseSymmetricOperator;
use band::{BandLdlt, Breakdown};

pub use eigen::{eigenvalues_dense, lowest_k, EigenPair, RESIDUAL_TOL};

/// Operators up to this dimension are counted by dense eigendecomposition
/// under [`CountMethod::Auto`].
pub const DENSE_CUTOFF: usize = 500;

/// Shift used after a factorization breakdown.
const BREAKDOWN_NUDGE: f64 = 1e-10;
const BREAKDOWN_RETRIES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("energy must be finite, got {0}")]
    NonFiniteEnergy(f64),
    #[error("requested {k} eigenpairs of a {dim}-dimensional operator")]
    InvalidCount { k: usize, dim: usize },
    #[error("factorization broke down: {0}")]
    Breakdown(String),
    #[error("eigensolver did not converge: residual {residual:e} > tolerance {tolerance:e}")]
    NotConverged { residual: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    /// Dense below [`DENSE_CUTOFF`], inertia above.
    Auto,
    Inertia,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub energy: f64,
    pub count: usize,
    pub method: CountMethod,
}

pub fn tie_tolerance(energy: f64) -> f64 {
    1e-12 * (1.0 + energy.abs())
}

fn resolve(a: &SparseSymmetricOperator, method: CountMethod) -> CountMethod {
    match method {
        CountMethod::Auto if a.dim() <= DENSE_CUTOFF => CountMethod::Dense,
        CountMethod::Auto => CountMethod::Inertia,
        other => other,
    }
}

fn count_sorted(values: &[f64], energy: f64) -> usize {
    let limit = energy + tie_tolerance(energy);
    values.partition_point(|&v| v <= limit)
}

fn inertia_count(a: &SparseSymmetricOperator, energy: f64) -> Result<usize, SpectraError> {
    let base = energy + tie_tolerance(energy);
    let mut last: Option<Breakdown> = None;
    for attempt in 0..=BREAKDOWN_RETRIES {
        let shift = base + attempt as f64 * BREAKDOWN_NUDGE * (1.0 + energy.abs());
        match BandLdlt::factor(a, shift) {
            Ok(f) => return Ok(f.negative_pivots()),
            Err(b) => last = Some(b),
        }
    }
    if a.dim() <= 4 * DENSE_CUTOFF {
        return Ok(count_sorted(&eigenvalues_dense(a), energy));
    }
    Err(SpectraError::Breakdown(format!("{last:?} at E = {energy}")))
}

/// `#{eigenvalues of a ≤ energy}`.
pub fn count_below(a: &SparseSymmetricOperator, energy: f64) -> Result<CountResult, SpectraError> {
    count_below_with(a, energy, CountMethod::Auto)
}

pub fn count_below_with(
    a: &SparseSymmetricOperator,
    energy: f64,
    method: CountMethod,
) -> Result<CountResult, SpectraError> {
    Ok(count_below_many_with(a, &[energy], method)?.remove(0))
}

/// Counts at several energies; the dense path decomposes once.
pub fn count_below_many(a: &SparseSymmetricOperator, energies: &[f64]) -> Result<Vec<CountResult>, SpectraError> {
    count_below_many_with(a, energies, CountMethod::Auto)
}

pub fn count_below_many_with(
    a: &SparseSymmetricOperator,
    energies: &[f64],
    method: CountMethod,
) -> Result<Vec<CountResult>, SpectraError> {
    if let Some(&bad) = energies.iter().find(|e| !e.is_finite()) {
        return Err(SpectraError::NonFiniteEnergy(bad));
    }
    let method = resolve(a, method);
    match method {
        CountMethod::Dense => {
            let values = eigenvalues_dense(a);
            Ok(energies
                .iter()
                .map(|&energy| CountResult { energy, count: count_sorted(&values, energy), method })
                .collect())
        }
        _ => energies
            .iter()
            .map(|&energy| Ok(CountResult { energy, count: inertia_count(a, energy)?, method }))
            .collect(),
    }
}

/// Connected components of the retained cells under face adjacency.
pub fn component_count(grid: &CellGrid) -> usize {
    let mut seen: Vec<bool> = grid.occupied().to_vec();
    let mut queue = VecDeque::new();
    let mut components = 0;
    for start in 0..grid.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(cell) = queue.pop_front() {
            for axis in 0..grid.dim() {
                for forward in [false, true] {
                    if let Some(nb) = grid.neighbor(cell, axis, forward) {
                        if !seen[nb] {
                            seen[nb] = true;
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
    }
    components
}
