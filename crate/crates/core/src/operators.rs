//! Finite-difference Laplacians on perforated boxes.
//!
//! Nodes are the retained (unoccupied) cells of a [`CellGrid`]. Each node
//! couples to its `2d` face neighbours with weight `-1/h^2`. What happens at
//! a missing neighbour depends on why it is missing:
//!
//! | missing neighbour | Dirichlet                 | Neumann |
//! |-------------------|---------------------------|---------|
//! | obstacle cell     | `+1/h^2` (node deleted)   | nothing |
//! | outside the box   | `+2/h^2` (face ghost)     | nothing |
//!
//! Deleting an obstacle node while keeping its diagonal share makes the
//! Dirichlet-obstacle operator a principal submatrix of the full-grid
//! Laplacian. The box face lies half a cell beyond the outermost centres, so
//! the Dirichlet condition there is imposed with the antisymmetric ghost
//! `u_ghost = -u`, which keeps the box eigenvalues second-order accurate.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellGrid, ObstacleMask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("every cell is occupied; the operator is empty")]
    EmptyDomain,
    #[error("potential amplitude must be finite and non-negative, got {0}")]
    NegativeAmplitude(f64),
    #[error("entry ({row}, {col}) is out of range for dimension {dim}")]
    OutOfRange { row: usize, col: usize, dim: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

impl Boundary {
    fn letter(self) -> char {
        match self {
            Boundary::Dirichlet => 'D',
            Boundary::Neumann => 'N',
        }
    }
}

/// Boundary conditions on the obstacle boundary and on `∂Λ_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub on_obstacle: Boundary,
    pub on_box: Boundary,
}

impl BoundaryCondition {
    pub const DD: Self = Self { on_obstacle: Boundary::Dirichlet, on_box: Boundary::Dirichlet };
    pub const NN: Self = Self { on_obstacle: Boundary::Neumann, on_box: Boundary::Neumann };
    /// Neumann on obstacles, Dirichlet on the box.
    pub const ND: Self = Self { on_obstacle: Boundary::Neumann, on_box: Boundary::Dirichlet };
    pub const DN: Self = Self { on_obstacle: Boundary::Dirichlet, on_box: Boundary::Neumann };

    /// Two-letter label, obstacle condition first (`"ND"` etc.).
    pub fn label(&self) -> String {
        format!("{}{}", self.on_obstacle.letter(), self.on_box.letter())
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label.to_ascii_uppercase().as_str() {
            "DD" => Some(Self::DD),
            "NN" => Some(Self::NN),
            "ND" => Some(Self::ND),
            "DN" => Some(Self::DN),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Where a grid operator came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeta {
    pub h: f64,
    pub extents: Vec<usize>,
    /// `None` for the full-grid potential operator, which has no obstacle
    /// boundary; its box condition is in `box_bc`.
    pub bc: Option<BoundaryCondition>,
    pub box_bc: Boundary,
    /// Grid cell of each matrix row, ascending.
    pub node_cells: Vec<usize>,
}

impl GridMeta {
    /// Physical side length along the first axis.
    pub fn side(&self) -> f64 {
        self.extents[0] as f64 * self.h
    }

    pub fn row_of(&self, cell: usize) -> Option<usize> {
        self.node_cells.binary_search(&cell).ok()
    }
}

/// A symmetric sparse matrix in compressed-row form (both triangles stored,
/// columns ascending within a row).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    grid: Option<GridMeta>,
}

impl SparseSymmetricOperator {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// the result must be exactly symmetric.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, OperatorError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(OperatorError::OutOfRange { row: r, col: c, dim });
            }
            rows[r].push((c, v));
        }
        let op = Self::from_rows(rows, None);
        op.check_symmetric()?;
        Ok(op)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self, OperatorError> {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    triplets.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), &triplets)
    }

    fn from_rows(mut rows: Vec<Vec<(usize, f64)>>, grid: Option<GridMeta>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { dim, row_ptr, col_idx, values, grid }
    }

    fn check_symmetric(&self) -> Result<(), OperatorError> {
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                if self.get(c, r) != v {
                    return Err(OperatorError::NotSymmetric { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn grid(&self) -> Option<&GridMeta> {
        self.grid.as_ref()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|r| x[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Gershgorin lower bound on the smallest eigenvalue.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                let (diag, off) = self.row(r).fold((0.0, 0.0), |(d, o), (c, v)| {
                    if c == r {
                        (d + v, o)
                    } else {
                        (d, o + v.abs())
                    }
                });
                diag - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim).flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c))).max().unwrap_or(0)
    }

    /// `max |A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, v)| (v - self.get(c, r)).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Principal submatrix on `rows` (ascending).
    pub fn submatrix(&self, rows: &[usize]) -> SparseSymmetricOperator {
        let mut position = vec![usize::MAX; self.dim];
        for (i, &r) in rows.iter().enumerate() {
            position[r] = i;
        }
        let new_rows = rows
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter(|&(c, _)| position[c] != usize::MAX)
                    .map(|(c, v)| (position[c], v))
                    .collect()
            })
            .collect();
        Self::from_rows(new_rows, None)
    }

    /// Coordinate-format export: one header line, then `row col value` for
    /// every stored entry in row-major order with ascending columns.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        match &self.grid {
            Some(g) => writeln!(
                out,
                "# dimension={} h={} L={} d={} bc={}",
                self.dim,
                g.h,
                g.side(),
                g.extents.len(),
                g.bc.map(|b| b.label()).unwrap_or_else(|| format!("potential-{}", g.box_bc.letter())),
            )?,
            None => writeln!(out, "# dimension={}", self.dim)?,
        }
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v}")?;
            }
        }
        Ok(())
    }
}

/// Assembles the Laplacian on the retained cells of `grid`; see the module
/// docs for the stencil.
pub fn assemble_grid(grid: &CellGrid, bc: BoundaryCondition) -> Result<SparseSymmetricOperator, OperatorError> {
    let node_cells: Vec<usize> = (0..grid.len()).filter(|&c| !grid.is_occupied(c)).collect();
    if node_cells.is_empty() {
        return Err(OperatorError::EmptyDomain);
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut row_of = vec![usize::MAX; grid.len()];
    for (r, &c) in node_cells.iter().enumerate() {
        row_of[c] = r;
    }
    let rows = node_cells
        .iter()
        .map(|&cell| {
            let mut entries = Vec::with_capacity(2 * grid.dim() + 1);
            let mut diag = 0.0;
            for axis in 0..grid.dim() {
                for forward in [false, true] {
                    match grid.neighbor(cell, axis, forward) {
                        None => {
                            if bc.on_box == Boundary::Dirichlet {
                                diag += 2.0 * inv_h2;
                            }
                        }
                        Some(nb) if grid.is_occupied(nb) => {
                            if bc.on_obstacle == Boundary::Dirichlet {
                                diag += inv_h2;
                            }
                        }
                        Some(nb) => {
                            diag += inv_h2;
                            entries.push((row_of[nb], -inv_h2));
                        }
                    }
                }
            }
            entries.push((row_of[cell], diag));
            entries
        })
        .collect();
    let meta = GridMeta {
        h: grid.h(),
        extents: grid.extents().to_vec(),
        bc: Some(bc),
        box_bc: bc.on_box,
        node_cells,
    };
    Ok(SparseSymmetricOperator::from_rows(rows, Some(meta)))
}

pub fn assemble(mask: &ObstacleMask, bc: BoundaryCondition) -> Result<SparseSymmetricOperator, OperatorError> {
    assemble_grid(mask.grid(), bc)
}

/// `-Δ + b χ_occupied` on the whole grid (no node deletion).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOperator {
    operator: SparseSymmetricOperator,
    amplitude: f64,
    support: Vec<usize>,
}

impl PotentialOperator {
    pub fn operator(&self) -> &SparseSymmetricOperator {
        &self.operator
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Grid cells (= matrix rows) carrying the potential.
    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

pub fn assemble_potential_grid(grid: &CellGrid, b: f64, box_bc: Boundary) -> Result<PotentialOperator, OperatorError> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(OperatorError::NegativeAmplitude(b));
    }
    let free = CellGrid::empty(grid.extents().to_vec(), grid.h());
    let base = assemble_grid(&free, BoundaryCondition { on_obstacle: box_bc, on_box: box_bc })?;
    let support: Vec<usize> = (0..grid.len()).filter(|&c| grid.is_occupied(c)).collect();
    let rows = (0..base.dim())
        .map(|r| {
            base.row(r)
                .map(|(c, v)| if c == r && grid.is_occupied(r) { (c, v + b) } else { (c, v) })
                .collect()
        })
        .collect();
    let mut meta = base.grid.clone().expect("assembled operators carry grid metadata");
    meta.bc = None;
    Ok(PotentialOperator {
        operator: SparseSymmetricOperator::from_rows(rows, Some(meta)),
        amplitude: b,
        support,
    })
}

pub fn assemble_potential(mask: &ObstacleMask, b: f64, box_bc: Boundary) -> Result<PotentialOperator, OperatorError> {
    assemble_potential_grid(mask.grid(), b, box_bc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxSpec;

    fn mask_1d(l: f64, m: u32, occupied: &[usize]) -> ObstacleMask {
        let mut mask = ObstacleMask::empty(BoxSpec::new(1, l).unwrap(), m).unwrap();
        let mut occ = mask.grid().occupied().to_vec();
        for &c in occupied {
            occ[c] = true;
        }
        mask = ObstacleMask::from_occupied(*mask.box_spec(), m, occ).unwrap();
        mask
    }

    fn sorted_eigs(op: &SparseSymmetricOperator) -> Vec<f64> {
        let mut e: Vec<f64> = op.to_dense().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn dirichlet_chain_stencil() {
        let op = assemble(&mask_1d(1.0, 4, &[]), BoundaryCondition::DD).unwrap();
        assert_eq!(op.dim(), 4);
        // Interior rows carry 2/h^2 = 32; box-adjacent rows add the face
        // ghost, 3/h^2 = 48.
        assert_eq!(op.diagonal(), vec![48.0, 32.0, 32.0, 48.0]);
        for r in 0..3 {
            assert_eq!(op.get(r, r + 1), -16.0);
            assert_eq!(op.get(r + 1, r), -16.0);
        }
        assert_eq!(op.get(0, 2), 0.0);
    }

    #[test]
    fn dirichlet_box_spectrum_is_discrete_sine() {
        let n = 16;
        let op = assemble(&mask_1d(1.0, n as u32, &[]), BoundaryCondition::DD).unwrap();
        let h = 1.0 / n as f64;
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 / (h * h) * (1.0 - (k as f64 * std::f64::consts::PI / n as f64).cos()))
            .collect();
        for (a, b) in sorted_eigs(&op).iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn neumann_chain_has_constant_kernel() {
        let op = assemble(&mask_1d(1.0, 8, &[]), BoundaryCondition::NN).unwrap();
        let ones = vec![1.0; op.dim()];
        assert!(op.mul_vec(&ones).iter().all(|&v| v == 0.0));
        assert!(sorted_eigs(&op)[0].abs() < 1e-10);
    }

    #[test]
    fn neumann_single_obstacle_2d() {
        let bx = BoxSpec::new(2, 2.0).unwrap();
        let mut occ = vec![false; 64];
        let hole = 3 + 8 * 4;
        occ[hole] = true;
        let mask = ObstacleMask::from_occupied(bx, 4, occ).unwrap();
        let op = assemble(&mask, BoundaryCondition::NN).unwrap();
        assert_eq!(op.dim(), 63);
        let meta = op.grid().unwrap();
        for r in 0..op.dim() {
            assert_eq!(op.row(r).map(|(_, v)| v).sum::<f64>(), 0.0);
        }
        let h2 = 1.0 / 16.0;
        for nb in [hole - 1, hole + 1, hole - 8, hole + 8] {
            let r = meta.row_of(nb).unwrap();
            assert_eq!(op.get(r, r), 3.0 / h2);
        }
        assert_eq!(meta.row_of(hole), None);
    }

    #[test]
    fn off_diagonals_are_minus_inverse_h_squared() {
        let bx = BoxSpec::new(2, 2.0).unwrap();
        let occ: Vec<bool> = (0..64).map(|i| i % 7 == 0).collect();
        let mask = ObstacleMask::from_occupied(bx, 4, occ).unwrap();
        for bc in [BoundaryCondition::DD, BoundaryCondition::NN, BoundaryCondition::ND, BoundaryCondition::DN] {
            let op = assemble(&mask, bc).unwrap();
            assert_eq!(op.asymmetry(), 0.0);
            for r in 0..op.dim() {
                for (c, v) in op.row(r) {
                    if c != r {
                        assert_eq!(v, -16.0);
                    }
                }
            }
            assert!(sorted_eigs(&op)[0] >= -1e-10, "{bc}");
        }
    }

    #[test]
    fn mixed_condition_only_counts_box_faces() {
        let mask = mask_1d(1.0, 4, &[1]);
        let nd = assemble(&mask, BoundaryCondition::ND).unwrap();
        // Rows: cells 0, 2, 3. Cell 0: box face ghost only. Cell 2: one
        // retained neighbour. Cell 3: retained neighbour plus box ghost.
        assert_eq!(nd.diagonal(), vec![32.0, 16.0, 48.0]);
        let dn = assemble(&mask, BoundaryCondition::DN).unwrap();
        assert_eq!(dn.diagonal(), vec![16.0, 32.0, 16.0]);
    }

    #[test]
    fn fully_occupied_grid_is_an_error() {
        let mask = mask_1d(1.0, 2, &[0, 1]);
        assert_eq!(assemble(&mask, BoundaryCondition::DD), Err(OperatorError::EmptyDomain));
    }

    #[test]
    fn potential_zero_amplitude_is_free_laplacian() {
        let mask = mask_1d(2.0, 4, &[3, 4]);
        let free = assemble(&mask_1d(2.0, 4, &[]), BoundaryCondition::DD).unwrap();
        let pot = assemble_potential(&mask, 0.0, Boundary::Dirichlet).unwrap();
        assert_eq!(pot.operator().to_dense(), free.to_dense());
        let empty = assemble_potential(&mask_1d(2.0, 4, &[]), 10.0, Boundary::Dirichlet).unwrap();
        assert_eq!(empty.operator().to_dense(), free.to_dense());
        assert!(matches!(
            assemble_potential(&mask, -1.0, Boundary::Dirichlet),
            Err(OperatorError::NegativeAmplitude(_))
        ));
    }

    #[test]
    fn large_potential_approaches_node_deletion() {
        let mask = mask_1d(2.0, 8, &[5]);
        let pot = assemble_potential(&mask, 1e6, Boundary::Dirichlet).unwrap();
        let del = assemble(&mask, BoundaryCondition::DD).unwrap();
        let a = sorted_eigs(pot.operator());
        let b = sorted_eigs(&del);
        for k in 0..3 {
            assert!(((a[k] - b[k]) / b[k]).abs() < 1e-3, "{k}: {} vs {}", a[k], b[k]);
            assert!(a[k] <= b[k] + 1e-8);
        }
    }

    #[test]
    fn coordinate_export_is_ordered() {
        let op = assemble(&mask_1d(1.0, 4, &[]), BoundaryCondition::DD).unwrap();
        let mut buf = Vec::new();
        op.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# dimension=4 h=0.25 L=1 d=1 bc=DD");
        assert_eq!(lines.next().unwrap(), "0 0 48");
        assert_eq!(lines.next().unwrap(), "0 1 -16");
        assert_eq!(lines.next().unwrap(), "1 0 -16");
        assert_eq!(text.lines().count(), 1 + 4 + 6);
    }

    #[test]
    fn triplets_must_be_symmetric() {
        assert!(SparseSymmetricOperator::from_triplets(2, &[(0, 1, 1.0)]).is_err());
        let op = SparseSymmetricOperator::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        assert_eq!(op.diagonal(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            SparseSymmetricOperator::from_triplets(2, &[(0, 2, 1.0)]),
            Err(OperatorError::OutOfRange { .. })
        ));
    }
}
