//! Integrated density of states from ensembles of finite boxes.
//!
//! For each realization the Dirichlet and Neumann counting functions are
//! evaluated on a common energy grid and normalized by `L^d`. Dirichlet
//! counts bound the IDS from below and Neumann counts from above.

mod fit;
mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, BoxSpec, DisorderModel, GeometryError, ObstacleMask};
use crate::operators::{assemble, BoundaryCondition, OperatorError};
use crate::rng;
use crate::spectra::{count_below_many, SpectraError};

pub use fit::{default_window, fit_exponent, fit_points, FitKind, FitResult, ModelPreference, Side, MIN_FIT_POINTS};
pub use io::{read_curve_csv, write_curve_csv, CurveRow};

#[derive(Debug, Error)]
pub enum IdsError {
    #[error("realizations must be at least 1")]
    NoRealizations,
    #[error("energy grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("malformed curve: {0}")]
    MalformedCurve(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameters of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub realizations: usize,
    pub master_seed: u64,
    pub box_spec: BoxSpec,
    pub cells_per_unit: u32,
    pub model: DisorderModel,
}

impl EnsembleSpec {
    pub fn new(
        realizations: usize,
        master_seed: u64,
        box_spec: BoxSpec,
        cells_per_unit: u32,
        model: DisorderModel,
    ) -> Result<Self, IdsError> {
        if realizations == 0 {
            return Err(IdsError::NoRealizations);
        }
        ObstacleMask::empty(box_spec, cells_per_unit)?;
        model.shape(box_spec.dim())?;
        Ok(Self { realizations, master_seed, box_spec, cells_per_unit, model })
    }

    pub fn seed(&self, index: usize) -> u64 {
        rng::realization_seed(self.master_seed, index as u64)
    }

    pub fn sample_mask(&self, index: usize) -> Result<ObstacleMask, IdsError> {
        Ok(geometry::sample_mask(&self.model, &self.box_spec, self.cells_per_unit, self.seed(index))?)
    }
}

/// `points` log-uniform energies from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, IdsError> {
    if !(lo > 0.0 && hi.is_finite() && hi >= lo) {
        return Err(IdsError::InvalidGrid(format!("need 0 < emin <= emax, got [{lo}, {hi}]")));
    }
    match points {
        0 => Err(IdsError::InvalidGrid("need at least one point".into())),
        1 => Ok(vec![lo]),
        _ => {
            let ratio = (hi / lo).ln() / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|i| lo * (ratio * i as f64).exp()).collect();
            grid[points - 1] = hi;
            Ok(grid)
        }
    }
}

fn check_energies(energies: &[f64]) -> Result<(), IdsError> {
    if energies.is_empty() {
        return Err(IdsError::InvalidGrid("empty energy grid".into()));
    }
    if energies.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(IdsError::InvalidGrid("energies must be finite and positive".into()));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IdsError::InvalidGrid("energies must be strictly ascending".into()));
    }
    Ok(())
}

/// Raw eigenvalue counts of one realization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationCounts {
    pub seed: u64,
    pub dirichlet: Vec<usize>,
    pub neumann: Vec<usize>,
}

fn counts(mask: &ObstacleMask, bc: BoundaryCondition, energies: &[f64]) -> Result<Vec<usize>, IdsError> {
    match assemble(mask, bc) {
        Ok(op) => Ok(count_below_many(&op, energies)?.into_iter().map(|c| c.count).collect()),
        Err(OperatorError::EmptyDomain) => Ok(vec![0; energies.len()]),
        Err(e) => Err(e.into()),
    }
}

pub fn realization_counts(
    spec: &EnsembleSpec,
    index: usize,
    energies: &[f64],
) -> Result<RealizationCounts, IdsError> {
    let mask = spec.sample_mask(index)?;
    Ok(RealizationCounts {
        seed: spec.seed(index),
        dirichlet: counts(&mask, BoundaryCondition::DD, energies)?,
        neumann: counts(&mask, BoundaryCondition::NN, energies)?,
    })
}

/// Ensemble-mean IDS curve with Dirichlet and Neumann sides.
#[derive(Debug, Clone, PartialEq)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub n_dirichlet: Vec<f64>,
    pub stderr_d: Vec<f64>,
    pub n_neumann: Vec<f64>,
    pub stderr_n: Vec<f64>,
    /// Bottom of the almost-sure spectrum.
    pub floor: f64,
    pub realizations: usize,
    pub side: f64,
    pub dim: usize,
    pub cells_per_unit: u32,
    pub model: String,
    pub master_seed: u64,
}

impl IdsCurve {
    pub fn values(&self, side: Side) -> &[f64] {
        match side {
            Side::Dirichlet => &self.n_dirichlet,
            Side::Neumann => &self.n_neumann,
        }
    }

    pub fn stderr(&self, side: Side) -> &[f64] {
        match side {
            Side::Dirichlet => &self.stderr_d,
            Side::Neumann => &self.stderr_n,
        }
    }
}

fn mean_and_stderr(samples: impl Iterator<Item = f64> + Clone, r: usize) -> (f64, f64) {
    let n = r as f64;
    let mean = samples.clone().sum::<f64>() / n;
    if r < 2 {
        return (mean, 0.0);
    }
    let var = samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates per-realization counts in index order.
pub fn curve_from_counts(spec: &EnsembleSpec, energies: &[f64], counts: &[RealizationCounts]) -> IdsCurve {
    let volume = spec.box_spec.volume();
    let r = counts.len();
    let mut curve = IdsCurve {
        energies: energies.to_vec(),
        n_dirichlet: Vec::with_capacity(energies.len()),
        stderr_d: Vec::with_capacity(energies.len()),
        n_neumann: Vec::with_capacity(energies.len()),
        stderr_n: Vec::with_capacity(energies.len()),
        floor: 0.0,
        realizations: r,
        side: spec.box_spec.side(),
        dim: spec.box_spec.dim(),
        cells_per_unit: spec.cells_per_unit,
        model: spec.model.descriptor(),
        master_seed: spec.master_seed,
    };
    for k in 0..energies.len() {
        let (m, s) = mean_and_stderr(counts.iter().map(|c| c.dirichlet[k] as f64 / volume), r);
        curve.n_dirichlet.push(m);
        curve.stderr_d.push(s);
        let (m, s) = mean_and_stderr(counts.iter().map(|c| c.neumann[k] as f64 / volume), r);
        curve.n_neumann.push(m);
        curve.stderr_n.push(s);
    }
    curve
}

/// Counts for every realization, in index order.
pub fn ensemble_counts(spec: &EnsembleSpec, energies: &[f64]) -> Result<Vec<RealizationCounts>, IdsError> {
    check_energies(energies)?;
    (0..spec.realizations)
        .into_par_iter()
        .map(|i| realization_counts(spec, i, energies))
        .collect()
}

pub fn estimate_ids(spec: &EnsembleSpec, energies: &[f64]) -> Result<IdsCurve, IdsError> {
    let counts = ensemble_counts(spec, energies)?;
    Ok(curve_from_counts(spec, energies, &counts))
}

/// Smallest integer `L` with `d π^2 / L^2 <= energy`.
pub fn lower_bound_side(energy: f64, dim: usize) -> u64 {
    let ground = |l: u64| dim as f64 * std::f64::consts::PI.powi(2) / (l as f64).powi(2);
    let mut l = ((std::f64::consts::PI * (dim as f64 / energy).sqrt()).ceil() as u64).max(1);
    while l > 1 && ground(l - 1) <= energy {
        l -= 1;
    }
    while ground(l) > energy {
        l += 1;
    }
    l
}

/// `(1 - p)^{L^d} / L^d` with `L` from [`lower_bound_side`]: the probability
/// that an obstacle-free cube of side `L` (which has a Dirichlet eigenvalue
/// below `energy`) sits at a given site, per unit volume.
pub fn analytic_dirichlet_lower(energy: f64, p: f64, dim: usize) -> f64 {
    let l = lower_bound_side(energy, dim) as f64;
    let vol = l.powi(dim as i32);
    (1.0 - p).powf(vol) / vol
}
