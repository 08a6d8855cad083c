//! Boxes, obstacle shapes, disorder models and rasterized obstacle masks.
//!
//! Boxes are half-open cubes `[-L/2, L/2)^d` centred at the origin. Obstacles
//! are translated copies of a bounded shape `S` placed at lattice sites
//! (site percolation, periodic) or at the atoms of a Poisson process. Masks
//! live on a cell-centred grid with `M` cells per unit length, aligned so
//! that unit lattice cells are unions of grid cells.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("box side must be finite and positive, got {0}")]
    InvalidSide(f64),
    #[error("site probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("Poisson intensity must be finite and positive, got {0}")]
    InvalidIntensity(f64),
    #[error("periodic obstacle side must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("obstacle side must be finite and non-negative, got {0}")]
    InvalidShapeSide(f64),
    #[error("cell-mask shape is inconsistent: {0}")]
    InvalidCellMask(String),
    #[error("resolution error: L * cells_per_unit = {product} is not an integer")]
    Resolution { product: f64 },
    #[error("cells_per_unit must be at least 2, got {0}")]
    ResolutionTooCoarse(u32),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mask document is malformed: {0}")]
    MalformedMask(String),
}

/// The box `Λ_L = [-L/2, L/2)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    dim: usize,
    side: f64,
}

impl BoxSpec {
    pub fn new(dim: usize, side: f64) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(GeometryError::InvalidSide(side));
        }
        Ok(Self { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// The concentric box whose side is larger by `by`.
    pub fn enlarged(&self, by: f64) -> BoxSpec {
        BoxSpec { dim: self.dim, side: self.side + by }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        let half = 0.5 * self.side;
        point.iter().all(|&x| -half <= x && x < half)
    }

    /// Inclusive range of integers `k` with `-L/2 <= k < L/2`.
    pub fn lattice_range(&self) -> (i64, i64) {
        let half = 0.5 * self.side;
        ((-half).ceil() as i64, half.ceil() as i64 - 1)
    }

    /// All points of `Z^d` inside the box, first coordinate fastest.
    pub fn lattice_points(&self) -> Vec<Vec<i64>> {
        let (lo, hi) = self.lattice_range();
        if hi < lo {
            return Vec::new();
        }
        MultiIndex::new(vec![lo; self.dim], vec![hi; self.dim]).collect()
    }
}

/// Iterates the integer points of `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`
/// with the first coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct MultiIndex {
    lo: Vec<i64>,
    hi: Vec<i64>,
    next: Option<Vec<i64>>,
}

impl MultiIndex {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Self {
        let empty = lo.iter().zip(&hi).any(|(l, h)| h < l);
        let next = if empty { None } else { Some(lo.clone()) };
        Self { lo, hi, next }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = 0;
        loop {
            if axis == succ.len() {
                break;
            }
            if succ[axis] < self.hi[axis] {
                succ[axis] += 1;
                self.next = Some(succ);
                break;
            }
            succ[axis] = self.lo[axis];
            axis += 1;
        }
        Some(current)
    }
}

/// An explicit obstacle shape given as a set of cells of side `1/r`.
///
/// Cell `j` (per axis) covers `[(origin + j)/r, (origin + j + 1)/r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMaskShape {
    cells_per_unit: u32,
    origin: Vec<i64>,
    extent: Vec<usize>,
    occupied: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Axis-aligned cube `[-a/2, a/2)^d`.
    Cube { side: f64 },
    CellMask(CellMaskShape),
}

/// A bounded obstacle shape `S` with its volume and enclosing cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleShape {
    dim: usize,
    kind: ShapeKind,
    volume: f64,
    enclosing: f64,
    bounds: Vec<(f64, f64)>,
}

impl ObstacleShape {
    pub fn cube(dim: usize, side: f64) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if !(side.is_finite() && side >= 0.0) {
            return Err(GeometryError::InvalidShapeSide(side));
        }
        Ok(Self {
            dim,
            kind: ShapeKind::Cube { side },
            volume: side.powi(dim as i32),
            enclosing: side,
            bounds: vec![(-0.5 * side, 0.5 * side); dim],
        })
    }

    /// Shape made of the occupied cells of a small grid at resolution
    /// `cells_per_unit`, with `origin` the integer offset of the first cell.
    pub fn cell_mask(
        cells_per_unit: u32,
        origin: Vec<i64>,
        extent: Vec<usize>,
        occupied: Vec<bool>,
    ) -> Result<Self, GeometryError> {
        let dim = origin.len();
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if cells_per_unit == 0 {
            return Err(GeometryError::InvalidCellMask("zero resolution".into()));
        }
        if extent.len() != dim {
            return Err(GeometryError::InvalidCellMask(
                "origin and extent differ in length".into(),
            ));
        }
        let total: usize = extent.iter().product();
        if occupied.len() != total {
            return Err(GeometryError::InvalidCellMask(format!(
                "expected {total} cells, got {}",
                occupied.len()
            )));
        }
        let r = cells_per_unit as f64;
        let count = occupied.iter().filter(|&&b| b).count();
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        let mut enclosing: f64 = 0.0;
        let hi: Vec<i64> = extent.iter().map(|&e| e as i64 - 1).collect();
        for (flat, j) in MultiIndex::new(vec![0; dim], hi).enumerate() {
            if !occupied[flat] {
                continue;
            }
            for axis in 0..dim {
                let lo = (origin[axis] + j[axis]) as f64 / r;
                let up = (origin[axis] + j[axis] + 1) as f64 / r;
                bounds[axis].0 = bounds[axis].0.min(lo);
                bounds[axis].1 = bounds[axis].1.max(up);
                enclosing = enclosing.max(2.0 * (-lo).max(up));
            }
        }
        if count == 0 {
            bounds = vec![(0.0, 0.0); dim];
        }
        Ok(Self {
            dim,
            kind: ShapeKind::CellMask(CellMaskShape {
                cells_per_unit,
                origin,
                extent,
                occupied,
            }),
            volume: count as f64 / r.powi(dim as i32),
            enclosing,
            bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ShapeKind {
        &self.kind
    }

    /// `|S|`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Smallest `L0` with `S ⊂ Λ_{L0}`.
    pub fn enclosing_side(&self) -> f64 {
        self.enclosing
    }

    /// Per-axis half-open bounding interval of `S`.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Whether `offset` (a point relative to the obstacle centre) lies in `S`.
    pub fn contains(&self, offset: &[f64]) -> bool {
        match &self.kind {
            ShapeKind::Cube { side } => {
                let half = 0.5 * side;
                offset.iter().all(|&x| -half <= x && x < half)
            }
            ShapeKind::CellMask(m) => {
                let r = m.cells_per_unit as f64;
                let mut flat = 0usize;
                let mut stride = 1usize;
                for axis in 0..self.dim {
                    let j = (offset[axis] * r).floor() as i64 - m.origin[axis];
                    if j < 0 || j >= m.extent[axis] as i64 {
                        return false;
                    }
                    flat += j as usize * stride;
                    stride *= m.extent[axis];
                }
                m.occupied[flat]
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match &self.kind {
            ShapeKind::Cube { side } => format!("cube({side})"),
            ShapeKind::CellMask(m) => format!(
                "cellmask(r={};cells={})",
                m.cells_per_unit,
                m.occupied.iter().filter(|&&b| b).count()
            ),
        }
    }
}

/// The random (or periodic) mechanism that places obstacles.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderModel {
    /// Each lattice site carries a copy of `shape` with probability `p`.
    Bernoulli { p: f64, shape: ObstacleShape },
    /// Copies of `shape` at the atoms of a Poisson process of intensity `c`.
    Poisson { c: f64, shape: ObstacleShape },
    /// A cube of side `beta` at every lattice site.
    Periodic { beta: f64 },
}

impl DisorderModel {
    pub fn bernoulli(p: f64, shape: ObstacleShape) -> Result<Self, GeometryError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(GeometryError::InvalidProbability(p));
        }
        Ok(Self::Bernoulli { p, shape })
    }

    pub fn poisson(c: f64, shape: ObstacleShape) -> Result<Self, GeometryError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(GeometryError::InvalidIntensity(c));
        }
        Ok(Self::Poisson { c, shape })
    }

    pub fn periodic(beta: f64) -> Result<Self, GeometryError> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(GeometryError::InvalidBeta(beta));
        }
        Ok(Self::Periodic { beta })
    }

    /// The obstacle shape in dimension `dim`.
    pub fn shape(&self, dim: usize) -> Result<ObstacleShape, GeometryError> {
        let shape = match self {
            Self::Bernoulli { shape, .. } | Self::Poisson { shape, .. } => shape.clone(),
            Self::Periodic { beta } => ObstacleShape::cube(dim, *beta)?,
        };
        if shape.dim() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: shape.dim() });
        }
        Ok(shape)
    }

    /// Draws a realization in `bx`; the periodic model ignores `seed`.
    pub fn realize(&self, bx: &BoxSpec, seed: u64) -> Result<Realization, GeometryError> {
        match self {
            Self::Bernoulli { .. } => sample_bernoulli(self, bx, seed),
            Self::Poisson { .. } => sample_poisson(self, bx, seed),
            Self::Periodic { .. } => build_periodic(self, bx),
        }
    }

    /// Compact text label; contains no commas so it can sit in a CSV cell.
    pub fn descriptor(&self) -> String {
        match self {
            Self::Bernoulli { p, shape } => format!("bernoulli(p={p};shape={})", shape.descriptor()),
            Self::Poisson { c, shape } => format!("poisson(c={c};shape={})", shape.descriptor()),
            Self::Periodic { beta } => format!("periodic(beta={beta})"),
        }
    }
}

/// Obstacle centres drawn from the enlarged box `Λ_{L + 2 L0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    dim: usize,
    coords: Vec<f64>,
    seed: Option<u64>,
    sampling_box: BoxSpec,
    on_lattice: bool,
}

impl Realization {
    pub fn new(dim: usize, placements: &[Vec<f64>], sampling_box: BoxSpec) -> Self {
        let coords = placements.iter().flat_map(|p| p.iter().copied()).collect();
        Self { dim, coords, seed: None, sampling_box, on_lattice: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn placements(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn sampling_box(&self) -> &BoxSpec {
        &self.sampling_box
    }

    /// Exact `|Γ ∩ Λ_L|` for cube obstacles on distinct lattice sites with
    /// side at most 1, where copies cannot overlap. `None` otherwise.
    pub fn exact_volume(&self, shape: &ObstacleShape, bx: &BoxSpec) -> Option<f64> {
        let ShapeKind::Cube { side } = shape.kind() else {
            return None;
        };
        if !self.on_lattice || *side > 1.0 {
            return None;
        }
        let half_box = 0.5 * bx.side();
        let half = 0.5 * side;
        let total = self
            .placements()
            .map(|c| {
                c.iter()
                    .map(|&x| ((x + half).min(half_box) - (x - half).max(-half_box)).max(0.0))
                    .product::<f64>()
            })
            .sum();
        Some(total)
    }
}

fn sampling_box(model: &DisorderModel, bx: &BoxSpec) -> Result<(ObstacleShape, BoxSpec), GeometryError> {
    let shape = model.shape(bx.dim())?;
    let enlarged = bx.enlarged(2.0 * shape.enclosing_side());
    Ok((shape, enlarged))
}

/// Site percolation: every lattice site of the enlarged box is kept with
/// probability `p`. The decision at site `γ` depends only on `(seed, γ)`.
pub fn sample_bernoulli(model: &DisorderModel, bx: &BoxSpec, seed: u64) -> Result<Realization, GeometryError> {
    let DisorderModel::Bernoulli { p, .. } = model else {
        panic!("sample_bernoulli called with {}", model.descriptor());
    };
    let (_, enlarged) = sampling_box(model, bx)?;
    let coords = enlarged
        .lattice_points()
        .into_iter()
        .filter(|site| rng::unit_interval(rng::site_key(seed, site)) < *p)
        .flat_map(|site| site.into_iter().map(|k| k as f64))
        .collect();
    Ok(Realization { dim: bx.dim(), coords, seed: Some(seed), sampling_box: enlarged, on_lattice: true })
}

/// Poisson process of intensity `c` restricted to the enlarged box.
///
/// Atoms are generated unit cell by unit cell (cells `γ + [-1/2, 1/2)^d`),
/// each cell with its own stream keyed by `(seed, γ)`, then clipped to the
/// enlarged box. Restriction of a Poisson process is again Poisson, so the
/// count in the box is Poisson with mean `c (L + 2 L0)^d`.
pub fn sample_poisson(model: &DisorderModel, bx: &BoxSpec, seed: u64) -> Result<Realization, GeometryError> {
    let DisorderModel::Poisson { c, .. } = model else {
        panic!("sample_poisson called with {}", model.descriptor());
    };
    let (_, enlarged) = sampling_box(model, bx)?;
    let dim = bx.dim();
    let half = 0.5 * enlarged.side();
    // Cells [k - 1/2, k + 1/2) meeting [-half, half).
    let lo = (-half - 0.5).floor() as i64;
    let hi = (half + 0.5).ceil() as i64;
    let counts = Poisson::new(*c).map_err(|_| GeometryError::InvalidIntensity(*c))?;
    let mut coords = Vec::new();
    let mut atom = vec![0.0; dim];
    for cell in MultiIndex::new(vec![lo; dim], vec![hi; dim]) {
        let mut stream = rng::stream(rng::site_key(seed ^ 0x5DEE_CE66_D1CE_4E5B, &cell));
        let n = counts.sample(&mut stream) as u64;
        for _ in 0..n {
            for (axis, x) in atom.iter_mut().enumerate() {
                *x = cell[axis] as f64 - 0.5 + stream.random::<f64>();
            }
            if enlarged.contains(&atom) {
                coords.extend_from_slice(&atom);
            }
        }
    }
    Ok(Realization { dim, coords, seed: Some(seed), sampling_box: enlarged, on_lattice: false })
}

/// One cube of side `beta` at every lattice site of the enlarged box.
pub fn build_periodic(model: &DisorderModel, bx: &BoxSpec) -> Result<Realization, GeometryError> {
    if !matches!(model, DisorderModel::Periodic { .. }) {
        panic!("build_periodic called with {}", model.descriptor());
    }
    let (_, enlarged) = sampling_box(model, bx)?;
    let coords = enlarged
        .lattice_points()
        .into_iter()
        .flat_map(|site| site.into_iter().map(|k| k as f64))
        .collect();
    Ok(Realization { dim: bx.dim(), coords, seed: None, sampling_box: enlarged, on_lattice: true })
}

/// A rectangular cell-centred grid with spacing `h` and an occupancy flag
/// per cell. Cells are numbered with the first axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    extents: Vec<usize>,
    h: f64,
    occupied: Vec<bool>,
}

impl CellGrid {
    pub fn new(extents: Vec<usize>, h: f64, occupied: Vec<bool>) -> Self {
        assert!(!extents.is_empty(), "grid needs at least one axis");
        assert_eq!(extents.iter().product::<usize>(), occupied.len(), "occupancy length");
        Self { extents, h, occupied }
    }

    pub fn empty(extents: Vec<usize>, h: f64) -> Self {
        let n = extents.iter().product();
        Self::new(extents, h, vec![false; n])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn is_occupied(&self, cell: usize) -> bool {
        self.occupied[cell]
    }

    pub fn set_occupied(&mut self, cell: usize, value: bool) {
        self.occupied[cell] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn retained_count(&self) -> usize {
        self.len() - self.occupied_count()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for (c, e) in coords.iter().zip(&self.extents) {
            flat += c * stride;
            stride *= e;
        }
        flat
    }

    pub fn coords(&self, mut cell: usize) -> Vec<usize> {
        self.extents
            .iter()
            .map(|&e| {
                let c = cell % e;
                cell /= e;
                c
            })
            .collect()
    }

    /// Neighbour of `cell` one step along `axis` (`forward` = +1), or `None`
    /// past the grid boundary.
    pub fn neighbor(&self, cell: usize, axis: usize, forward: bool) -> Option<usize> {
        let stride: usize = self.extents[..axis].iter().product();
        let c = (cell / stride) % self.extents[axis];
        if forward {
            (c + 1 < self.extents[axis]).then_some(cell + stride)
        } else {
            (c > 0).then(|| cell - stride)
        }
    }

    /// Splits the grid along the plane between cell layers `at - 1` and `at`
    /// of `axis`.
    pub fn split(&self, axis: usize, at: usize) -> (CellGrid, CellGrid) {
        assert!(at > 0 && at < self.extents[axis], "split plane must be interior");
        let mut first_ext = self.extents.clone();
        first_ext[axis] = at;
        let mut second_ext = self.extents.clone();
        second_ext[axis] = self.extents[axis] - at;
        let mut first = Vec::with_capacity(first_ext.iter().product());
        let mut second = Vec::with_capacity(second_ext.iter().product());
        for cell in 0..self.len() {
            if self.coords(cell)[axis] < at {
                first.push(self.occupied[cell]);
            } else {
                second.push(self.occupied[cell]);
            }
        }
        (CellGrid::new(first_ext, self.h, first), CellGrid::new(second_ext, self.h, second))
    }
}

/// Rasterized obstacle configuration on `Λ_L` at `M` cells per unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMask {
    bx: BoxSpec,
    cells_per_unit: u32,
    grid: CellGrid,
    seed: Option<u64>,
}

fn cells_per_side(bx: &BoxSpec, cells_per_unit: u32) -> Result<usize, GeometryError> {
    if cells_per_unit < 2 {
        return Err(GeometryError::ResolutionTooCoarse(cells_per_unit));
    }
    let product = bx.side() * cells_per_unit as f64;
    let n = product.round();
    if (product - n).abs() > 1e-9 * product.max(1.0) || n < 1.0 {
        return Err(GeometryError::Resolution { product });
    }
    Ok(n as usize)
}

impl ObstacleMask {
    pub fn empty(bx: BoxSpec, cells_per_unit: u32) -> Result<Self, GeometryError> {
        let n = cells_per_side(&bx, cells_per_unit)?;
        let grid = CellGrid::empty(vec![n; bx.dim()], 1.0 / cells_per_unit as f64);
        Ok(Self { bx, cells_per_unit, grid, seed: None })
    }

    pub fn from_occupied(bx: BoxSpec, cells_per_unit: u32, occupied: Vec<bool>) -> Result<Self, GeometryError> {
        let mut mask = Self::empty(bx, cells_per_unit)?;
        if occupied.len() != mask.grid.len() {
            return Err(GeometryError::MalformedMask(format!(
                "expected {} cells, got {}",
                mask.grid.len(),
                occupied.len()
            )));
        }
        mask.grid.occupied = occupied;
        Ok(mask)
    }

    pub fn box_spec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn cells_per_unit(&self) -> u32 {
        self.cells_per_unit
    }

    pub fn cells_per_side(&self) -> usize {
        self.grid.extents[0]
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Centre of `cell` in box coordinates.
    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let m = self.cells_per_unit as f64;
        let half = 0.5 * self.bx.side();
        self.grid
            .coords(cell)
            .into_iter()
            .map(|c| -half + (c as f64 + 0.5) / m)
            .collect()
    }

    /// `|Ω_L|`: occupied cell count times `h^d`.
    pub fn measured_volume(&self) -> f64 {
        self.grid.occupied_count() as f64 / (self.cells_per_unit as f64).powi(self.bx.dim() as i32)
    }

    /// `(2/L)^d |Ω_L|`.
    pub fn fraction(&self) -> f64 {
        (2.0 / self.bx.side()).powi(self.bx.dim() as i32) * self.measured_volume()
    }

    pub fn to_document(&self) -> MaskDocument {
        MaskDocument {
            d: self.bx.dim(),
            L: self.bx.side(),
            cells_per_unit: self.cells_per_unit,
            occupied: self.grid.occupied.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            measured_volume: self.measured_volume(),
            seed: self.seed,
            model: None,
        }
    }

    pub fn from_document(doc: &MaskDocument) -> Result<Self, GeometryError> {
        let bx = BoxSpec::new(doc.d, doc.L)?;
        let occupied = doc
            .occupied
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GeometryError::MalformedMask(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_occupied(bx, doc.cells_per_unit, occupied)?.with_seed(doc.seed))
    }
}

/// Serialized form of an [`ObstacleMask`]; `occupied` is a string of
/// `0`/`1` characters in row-major order with x fastest.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDocument {
    pub d: usize,
    pub L: f64,
    pub cells_per_unit: u32,
    pub occupied: String,
    pub measured_volume: f64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

/// Marks every cell of `Λ_L` whose centre lies in some placed copy of `shape`.
pub fn rasterize(
    realization: &Realization,
    shape: &ObstacleShape,
    bx: &BoxSpec,
    cells_per_unit: u32,
) -> Result<ObstacleMask, GeometryError> {
    let dim = bx.dim();
    if realization.dim() != dim {
        return Err(GeometryError::DimensionMismatch { expected: dim, got: realization.dim() });
    }
    if shape.dim() != dim {
        return Err(GeometryError::DimensionMismatch { expected: dim, got: shape.dim() });
    }
    let mut mask = ObstacleMask::empty(*bx, cells_per_unit)?.with_seed(realization.seed());
    if shape.volume() == 0.0 {
        return Ok(mask);
    }
    let n = mask.cells_per_side() as i64;
    let m = cells_per_unit as f64;
    let half = 0.5 * bx.side();
    let center = |i: i64| -half + (i as f64 + 0.5) / m;
    let mut lo = vec![0i64; dim];
    let mut hi = vec![0i64; dim];
    let mut offset = vec![0.0; dim];
    for c in realization.placements() {
        let mut hit = true;
        for axis in 0..dim {
            let (slo, shi) = shape.bounds()[axis];
            // Loose cell range; containment is decided exactly below.
            let a = ((c[axis] + slo + half) * m - 0.5).floor() as i64 - 1;
            let b = ((c[axis] + shi + half) * m - 0.5).ceil() as i64 + 1;
            lo[axis] = a.max(0);
            hi[axis] = b.min(n - 1);
            if hi[axis] < lo[axis] {
                hit = false;
                break;
            }
        }
        if !hit {
            continue;
        }
        for idx in MultiIndex::new(lo.clone(), hi.clone()) {
            for axis in 0..dim {
                offset[axis] = center(idx[axis]) - c[axis];
            }
            if shape.contains(&offset) {
                let cell: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
                let flat = mask.grid.index(&cell);
                mask.grid.occupied[flat] = true;
            }
        }
    }
    Ok(mask)
}

/// Samples `model` in `bx` with `seed` and rasterizes the result.
pub fn sample_mask(
    model: &DisorderModel,
    bx: &BoxSpec,
    cells_per_unit: u32,
    seed: u64,
) -> Result<ObstacleMask, GeometryError> {
    let shape = model.shape(bx.dim())?;
    let realization = model.realize(bx, seed)?;
    rasterize(&realization, &shape, bx, cells_per_unit)
}

/// Seeded uniform draw helper used by tests and the CLI to build random
/// masks without a disorder model.
pub fn random_occupancy<R: Rng>(len: usize, density: f64, stream: &mut R) -> Vec<bool> {
    (0..len).map(|_| stream.random::<f64>() < density).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(d: usize, l: f64) -> BoxSpec {
        BoxSpec::new(d, l).unwrap()
    }

    #[test]
    fn box_rejects_bad_parameters() {
        assert_eq!(BoxSpec::new(0, 1.0), Err(GeometryError::ZeroDimension));
        assert!(BoxSpec::new(2, 0.0).is_err());
        assert!(BoxSpec::new(2, f64::NAN).is_err());
    }

    #[test]
    fn lattice_points_follow_half_open_convention() {
        let pts: Vec<i64> = bx(1, 4.0).lattice_points().into_iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![-2, -1, 0, 1]);
        assert_eq!(bx(2, 3.0).lattice_points().len(), 9);
    }

    #[test]
    fn model_invariants_are_enforced() {
        let s = ObstacleShape::cube(2, 0.5).unwrap();
        assert!(DisorderModel::bernoulli(0.0, s.clone()).is_err());
        assert!(DisorderModel::bernoulli(1.0, s.clone()).is_err());
        assert!(DisorderModel::poisson(0.0, s.clone()).is_err());
        assert!(DisorderModel::periodic(1.0).is_err());
        assert!(DisorderModel::periodic(0.0).is_err());
        assert!(ObstacleShape::cube(2, -1.0).is_err());
    }

    #[test]
    fn cube_shape_volume_and_enclosing_side() {
        let s = ObstacleShape::cube(3, 0.5).unwrap();
        assert_eq!(s.volume(), 0.125);
        assert_eq!(s.enclosing_side(), 0.5);
        assert!(s.enclosing_side() >= 0.25);
        assert!(s.contains(&[-0.25, 0.0, 0.2]));
        assert!(!s.contains(&[0.25, 0.0, 0.0]));
    }

    #[test]
    fn cell_mask_shape_contains_its_cells() {
        // L-shaped tromino at resolution 2 with origin (-1, -1).
        let s = ObstacleShape::cell_mask(2, vec![-1, -1], vec![2, 2], vec![true, true, true, false]).unwrap();
        assert_eq!(s.volume(), 0.75);
        assert_eq!(s.enclosing_side(), 1.0);
        assert!(s.contains(&[-0.3, -0.3]));
        assert!(s.contains(&[0.2, -0.1]));
        assert!(!s.contains(&[0.2, 0.2]));
        assert!(!s.contains(&[0.6, 0.0]));
    }

    #[test]
    fn bernoulli_tiny_probability_places_nothing() {
        let s = ObstacleShape::cube(2, 0.5).unwrap();
        let model = DisorderModel::bernoulli(1e-12, s).unwrap();
        // 1000 x 1000 sites.
        let r = sample_bernoulli(&model, &bx(2, 999.0), 3).unwrap();
        assert!((r.len() as f64) / 1e6 <= 1e-4);
        assert!(r.is_empty());
    }

    #[test]
    fn bernoulli_near_one_fills_enlarged_box() {
        let s = ObstacleShape::cube(2, 0.5).unwrap();
        let model = DisorderModel::bernoulli(1.0 - 1e-12, s).unwrap();
        let b = bx(2, 4.0);
        let r = sample_bernoulli(&model, &b, 11).unwrap();
        let sites = r.sampling_box().lattice_points().len();
        assert!(sites >= 25);
        assert_eq!(r.len(), sites);
    }

    #[test]
    fn bernoulli_inclusion_rate_is_binomial() {
        let s = ObstacleShape::cube(2, 0.5).unwrap();
        let model = DisorderModel::bernoulli(0.3, s).unwrap();
        let r = sample_bernoulli(&model, &bx(2, 64.0), 5).unwrap();
        let n = r.sampling_box().lattice_points().len() as f64;
        let rate = r.len() as f64 / n;
        let se = (0.3 * 0.7 / n).sqrt();
        assert!((rate - 0.3).abs() < 3.0 * se, "rate {rate} se {se}");
    }

    #[test]
    fn periodic_placements_1d() {
        let model = DisorderModel::periodic(0.4).unwrap();
        let r = build_periodic(&model, &bx(1, 4.0)).unwrap();
        let pts: Vec<f64> = r.placements().map(|p| p[0]).collect();
        assert_eq!(pts, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn periodic_exact_volume_2d() {
        let model = DisorderModel::periodic(0.4).unwrap();
        let b = bx(2, 4.0);
        let r = build_periodic(&model, &b).unwrap();
        let shape = model.shape(2).unwrap();
        let v = r.exact_volume(&shape, &b).unwrap();
        assert!((v - 16.0 * 0.16).abs() < 1e-12);
        // Rasterization at a resolution aligned with beta is exact.
        let mask = rasterize(&r, &shape, &b, 10).unwrap();
        assert!((mask.measured_volume() - 2.56).abs() < 1e-12);
    }

    #[test]
    fn periodic_fraction_below_one_just_under_half() {
        let beta = 0.5 - 1e-9;
        let d = 2;
        let l: f64 = 8.0;
        let vol = l.powi(d) * beta * beta;
        let fraction = (2.0 / l).powi(d) * vol;
        assert!((fraction - (2.0 * beta).powi(d)).abs() < 1e-12);
        assert!(fraction < 1.0);
    }

    #[test]
    fn rasterize_empty_realization() {
        let b = bx(2, 4.0);
        let r = Realization::new(2, &[], b);
        let mask = rasterize(&r, &ObstacleShape::cube(2, 0.5).unwrap(), &b, 4).unwrap();
        assert_eq!(mask.measured_volume(), 0.0);
        assert_eq!(mask.fraction(), 0.0);
        assert_eq!(mask.grid().occupied_count(), 0);
    }

    #[test]
    fn rasterize_periodic_half_width_1d() {
        let model = DisorderModel::periodic(0.5).unwrap();
        let b = bx(1, 2.0);
        let mask = sample_mask(&model, &b, 8, 0).unwrap();
        assert_eq!(mask.grid().len(), 16);
        for cell in 0..16 {
            let x = mask.cell_center(cell)[0];
            let near = (x - x.round()).abs() < 0.25;
            assert_eq!(mask.grid().is_occupied(cell), near, "cell centre {x}");
        }
        assert!((mask.measured_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rasterize_rejects_misaligned_resolution() {
        let b = bx(1, 2.5);
        let r = Realization::new(1, &[], b);
        let err = rasterize(&r, &ObstacleShape::cube(1, 0.5).unwrap(), &b, 3).unwrap_err();
        assert!(matches!(err, GeometryError::Resolution { .. }));
        assert!(matches!(
            rasterize(&r, &ObstacleShape::cube(1, 0.5).unwrap(), &b, 1),
            Err(GeometryError::ResolutionTooCoarse(1))
        ));
    }

    #[test]
    fn mask_document_round_trip() {
        let s = ObstacleShape::cube(2, 0.5).unwrap();
        let model = DisorderModel::bernoulli(0.4, s).unwrap();
        let mask = sample_mask(&model, &bx(2, 6.0), 4, 17).unwrap();
        let doc = mask.to_document();
        assert_eq!(doc.occupied.len(), 24 * 24);
        let json = serde_json::to_string(&doc).unwrap();
        let back = ObstacleMask::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn split_grid_partitions_cells() {
        let mut g = CellGrid::empty(vec![4, 3], 0.5);
        g.set_occupied(g.index(&[1, 2]), true);
        g.set_occupied(g.index(&[3, 0]), true);
        let (a, b) = g.split(0, 2);
        assert_eq!(a.extents(), &[2, 3]);
        assert_eq!(b.extents(), &[2, 3]);
        assert!(a.is_occupied(a.index(&[1, 2])));
        assert!(b.is_occupied(b.index(&[1, 0])));
        assert_eq!(a.occupied_count() + b.occupied_count(), 2);
    }

    #[test]
    fn neighbors_stop_at_grid_boundary() {
        let g = CellGrid::empty(vec![3, 2], 1.0);
        let c = g.index(&[2, 0]);
        assert_eq!(g.neighbor(c, 0, true), None);
        assert_eq!(g.neighbor(c, 0, false), Some(g.index(&[1, 0])));
        assert_eq!(g.neighbor(c, 1, true), Some(g.index(&[2, 1])));
        assert_eq!(g.neighbor(c, 1, false), None);
    }
}
