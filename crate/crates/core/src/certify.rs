//! Certified lower bounds on eigenvalue counts from near-orthonormal trial
//! families.
//!
//! Given trial vectors `φ_1..φ_n` and levels `α_1 <= ... <= α_n = α` with
//!
//! ```text
//! |<φ_i, φ_j> - δ_ij| <= ε1,   |<φ_i, A φ_j> - α_j δ_ij| <= ε2,
//! ```
//!
//! and `ε1 < 1`, the count `N(A, (α + ε2)/(1 - ε1))` is claimed to be at
//! least `n`. The quadratic-form argument behind it bounds `c^T (G - I) c`
//! by a row sum, not by the largest entry, so with entrywise deviations the
//! claim can fail for large or adversarial families. [`kirsch_lemma_check`]
//! therefore reports the entrywise certificate together with a row-sum
//! certificate that is always sound.
//!
//! For boxes, the trial family is the odd cosine family
//! `Φ_n(x) = (2/L)^{d/2} Π cos(n_i π x_i / L)`, which vanishes on `∂Λ_L`
//! and has form values `α_n(L) = (π/L)^2 Σ n_i^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoxSpec, DisorderModel, ObstacleMask};
use crate::operators::{assemble, BoundaryCondition, OperatorError, SparseSymmetricOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("no odd multi-index has level <= {alpha_max} (lowest level is {lowest})")]
    EmptyFamily { alpha_max: f64, lowest: f64 },
    #[error("obstacle fraction (2/L)^d |Ω_L| = {fraction} is not below 1")]
    HypothesisViolation { fraction: f64 },
    #[error("energy must be finite and positive, got {0}")]
    InvalidEnergy(f64),
    #[error("{vectors} trial vectors but {levels} levels")]
    LengthMismatch { vectors: usize, levels: usize },
    #[error("trial vector {index} has length {len}, operator dimension is {dim}")]
    VectorDimension { index: usize, len: usize, dim: usize },
    #[error("levels must be ascending")]
    UnsortedLevels,
    #[error("trial family is empty")]
    NoTrials,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// `α_n(L) = (π/L)^2 Σ n_i^2`.
pub fn level(bx: &BoxSpec, index: &[u32]) -> f64 {
    let s: f64 = index.iter().map(|&n| (n as f64) * (n as f64)).sum();
    (PI / bx.side()).powi(2) * s
}

/// The odd cosine functions on a box with levels up to some cut-off.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFamily {
    bx: BoxSpec,
    indices: Vec<Vec<u32>>,
    levels: Vec<f64>,
}

impl TrialFamily {
    pub fn box_spec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    /// Ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `Φ_{n,L}(x)` for the `k`-th member.
    pub fn evaluate(&self, k: usize, x: &[f64]) -> f64 {
        let l = self.bx.side();
        let norm = (2.0 / l).powf(0.5 * self.bx.dim() as f64);
        norm * self.indices[k]
            .iter()
            .zip(x)
            .map(|(&n, &xi)| (n as f64 * PI * xi / l).cos())
            .product::<f64>()
    }

    /// `(2/L)^d`, the bound on `|Φ_{n,L}|^2`.
    pub fn sup_squared(&self) -> f64 {
        (2.0 / self.bx.side()).powi(self.bx.dim() as i32)
    }
}

/// Visits odd multi-indices with `Σ n_i^2 <= radius_sq`.
fn for_each_odd_index(dim: usize, radius_sq: f64, f: &mut impl FnMut(&[u32])) {
    fn rec(prefix: &mut Vec<u32>, dim: usize, remaining: f64, f: &mut impl FnMut(&[u32])) {
        if prefix.len() == dim {
            f(prefix);
            return;
        }
        let mut n = 1u32;
        while (n as f64) * (n as f64) <= remaining {
            prefix.push(n);
            rec(prefix, dim, remaining - (n as f64) * (n as f64), f);
            prefix.pop();
            n += 2;
        }
    }
    rec(&mut Vec::with_capacity(dim), dim, radius_sq, f);
}

fn odd_indices_below(bx: &BoxSpec, alpha_max: f64) -> Vec<Vec<u32>> {
    // Enumerate a slightly larger ball, then filter with the exact level.
    let radius_sq = alpha_max * (bx.side() / PI).powi(2) * (1.0 + 1e-12) + 1e-9;
    let mut out = Vec::new();
    for_each_odd_index(bx.dim(), radius_sq, &mut |n| {
        if level(bx, n) <= alpha_max {
            out.push(n.to_vec());
        }
    });
    out
}

/// All odd multi-indices with `α_n(L) <= alpha_max`, sorted by level.
pub fn cosine_family(bx: &BoxSpec, alpha_max: f64) -> Result<TrialFamily, CertifyError> {
    if !alpha_max.is_finite() {
        return Err(CertifyError::InvalidEnergy(alpha_max));
    }
    let mut indices = odd_indices_below(bx, alpha_max);
    if indices.is_empty() {
        return Err(CertifyError::EmptyFamily { alpha_max, lowest: level(bx, &vec![1; bx.dim()]) });
    }
    indices.sort_by(|a, b| level(bx, a).total_cmp(&level(bx, b)).then_with(|| a.cmp(b)));
    let levels = indices.iter().map(|n| level(bx, n)).collect();
    Ok(TrialFamily { bx: *bx, indices, levels })
}

/// `#{odd n : α_n(L) <= E}`.
pub fn count_family(bx: &BoxSpec, energy: f64) -> usize {
    if !(energy > 0.0) {
        return 0;
    }
    odd_indices_below(bx, energy).len()
}

/// Constants of `N(H, C1 E) >= C2 E^{d/2} L^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

/// Certificate computed from row sums of the deviation matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSumBound {
    pub eps1: f64,
    pub eps2: f64,
    pub certified_energy: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Box dimension and side, when the certificate refers to a box.
    pub geometry: Option<(usize, f64)>,
    /// Requested energy (the level cut-off); equals `alpha` for box
    /// certificates.
    pub energy: f64,
    pub n_count: usize,
    pub alpha: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub certified_energy: f64,
    pub certified_count: usize,
    pub valid: bool,
    pub constants: Option<Constants>,
    pub row_sum: Option<RowSumBound>,
}

/// `(α + ε2)/(1 - ε1)`, or `+∞` when `ε1 >= 1`.
///
/// A negative numerator is divided by `1 + ε1` instead, the sound bound when
/// the Rayleigh quotient is negative.
pub fn certified_energy(alpha: f64, eps1: f64, eps2: f64) -> f64 {
    if eps1 >= 1.0 {
        return f64::INFINITY;
    }
    let top = alpha + eps2;
    if top >= 0.0 {
        top / (1.0 - eps1)
    } else {
        top / (1.0 + eps1)
    }
}

impl Certificate {
    pub fn to_document(&self) -> CertificateDocument {
        let (d, l) = self.geometry.unwrap_or((0, 0.0));
        CertificateDocument {
            d,
            L: l,
            E: self.energy,
            n_count: self.n_count,
            eps1: self.eps1,
            eps2: self.eps2,
            certified_energy: self.certified_energy,
            certified_count: self.certified_count,
            constants: self.constants,
        }
    }
}

/// JSON form of a certificate.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub d: usize,
    pub L: f64,
    pub E: f64,
    pub n_count: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub certified_energy: f64,
    pub certified_count: usize,
    pub constants: Option<Constants>,
}

/// Closed-form certificate for the mixed (Neumann obstacle, Dirichlet box)
/// operator on `mask`: `α = E`, `ε1 = (2/L)^d |Ω_L|`, `ε2 = E ε1`, family
/// = odd cosines with level at most `E`.
pub fn certify_obstacle(mask: &ObstacleMask, energy: f64) -> Result<Certificate, CertifyError> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(CertifyError::InvalidEnergy(energy));
    }
    let fraction = mask.fraction();
    if fraction >= 1.0 {
        return Err(CertifyError::HypothesisViolation { fraction });
    }
    let bx = mask.box_spec();
    let family = cosine_family(bx, energy)?;
    let eps1 = fraction;
    let eps2 = energy * fraction;
    let certified = certified_energy(energy, eps1, eps2);
    let n = family.len();
    let d = bx.dim();
    Ok(Certificate {
        geometry: Some((d, bx.side())),
        energy,
        n_count: n,
        alpha: energy,
        eps1,
        eps2,
        certified_energy: certified,
        certified_count: n,
        valid: true,
        constants: Some(Constants {
            c1: certified / energy,
            c2: n as f64 / (energy.powf(0.5 * d as f64) * bx.volume()),
        }),
        row_sum: None,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deviations of a trial family from an orthonormal eigen-family of `a`
/// with eigenvalues `levels`, and the resulting certificate.
///
/// `eps1`/`eps2` are entrywise maxima; `row_sum` carries the maximal
/// absolute row sums, which give a certificate valid for any family.
/// Invalidity (`ε1 >= 1`) is flagged, not returned as an error.
pub fn kirsch_lemma_check(
    a: &SparseSymmetricOperator,
    trials: &[Vec<f64>],
    levels: &[f64],
) -> Result<Certificate, CertifyError> {
    if trials.len() != levels.len() {
        return Err(CertifyError::LengthMismatch { vectors: trials.len(), levels: levels.len() });
    }
    if trials.is_empty() {
        return Err(CertifyError::NoTrials);
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(CertifyError::UnsortedLevels);
    }
    for (index, t) in trials.iter().enumerate() {
        if t.len() != a.dim() {
            return Err(CertifyError::VectorDimension { index, len: t.len(), dim: a.dim() });
        }
    }
    let n = trials.len();
    let images: Vec<Vec<f64>> = trials.iter().map(|t| a.mul_vec(t)).collect();
    let mut eps1: f64 = 0.0;
    let mut eps2: f64 = 0.0;
    let mut row1 = vec![0.0; n];
    let mut row2 = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let g = (dot(&trials[i], &trials[j]) - delta).abs();
            // Symmetrize <φ_i, A φ_j> against rounding.
            let form = 0.5 * (dot(&trials[i], &images[j]) + dot(&images[i], &trials[j]));
            let m = (form - levels[j] * delta).abs();
            eps1 = eps1.max(g);
            eps2 = eps2.max(m);
            row1[i] += g;
            row2[i] += m;
        }
    }
    let alpha = levels[n - 1];
    let row_eps1 = row1.iter().copied().fold(0.0, f64::max);
    let row_eps2 = row2.iter().copied().fold(0.0, f64::max);
    Ok(Certificate {
        geometry: None,
        energy: alpha,
        n_count: n,
        alpha,
        eps1,
        eps2,
        certified_energy: certified_energy(alpha, eps1, eps2),
        certified_count: n,
        valid: eps1 < 1.0,
        constants: None,
        row_sum: Some(RowSumBound {
            eps1: row_eps1,
            eps2: row_eps2,
            certified_energy: certified_energy(alpha, row_eps1, row_eps2),
            valid: row_eps1 < 1.0,
        }),
    })
}

/// The cosine family sampled at the centres of the retained cells of
/// `mask`, scaled by `h^{d/2}` and normalized over the full box, as vectors
/// in the node space of operators assembled on `mask`.
pub fn sampled_trial_vectors(mask: &ObstacleMask, family: &TrialFamily) -> Vec<Vec<f64>> {
    let grid = mask.grid();
    let weight = mask.h().powf(0.5 * grid.dim() as f64);
    let centers: Vec<Vec<f64>> = (0..grid.len()).map(|c| mask.cell_center(c)).collect();
    (0..family.len())
        .map(|k| {
            let full: Vec<f64> = centers.iter().map(|x| weight * family.evaluate(k, x)).collect();
            let norm = dot(&full, &full).sqrt();
            (0..grid.len()).filter(|&c| !grid.is_occupied(c)).map(|c| full[c] / norm).collect()
        })
        .collect()
}

/// Lemma-level certificate for the discrete mixed operator on `mask` using
/// the sampled cosine family with continuum levels `α_n(L) <= energy`.
pub fn discrete_cosine_certificate(mask: &ObstacleMask, energy: f64) -> Result<Certificate, CertifyError> {
    let family = cosine_family(mask.box_spec(), energy)?;
    let op = assemble(mask, BoundaryCondition::ND)?;
    let trials = sampled_trial_vectors(mask, &family);
    let mut cert = kirsch_lemma_check(&op, &trials, family.levels())?;
    let bx = mask.box_spec();
    cert.geometry = Some((bx.dim(), bx.side()));
    cert.energy = energy;
    Ok(cert)
}

/// Volume condition under which the van Hove lower bound applies to a
/// disorder model: expected obstacle volume per unit volume below `2^{-d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanHoveCondition {
    /// `|S| p` (site percolation), `c |S|` (Poisson), `β^d` (periodic).
    pub density: f64,
    pub threshold: f64,
    pub holds: bool,
    /// Site percolation only: whether `|S| p^{1/d} < 2^{-d}`, the stronger
    /// form sometimes quoted for the same result.
    pub root_form_holds: Option<bool>,
}

pub fn van_hove_condition(model: &DisorderModel, dim: usize) -> VanHoveCondition {
    let threshold = 0.5f64.powi(dim as i32);
    let (density, root_form_holds) = match model {
        DisorderModel::Bernoulli { p, shape } => {
            (shape.volume() * p, Some(shape.volume() * p.powf(1.0 / dim as f64) < threshold))
        }
        DisorderModel::Poisson { c, shape } => (c * shape.volume(), None),
        DisorderModel::Periodic { beta } => (beta.powi(dim as i32), None),
    };
    VanHoveCondition { density, threshold, holds: density < threshold, root_form_holds }
}
