//! Dyadic cubes of `[0,1)^d` and piecewise-constant weights on the finest
//! dyadic mesh.
//!
//! Cells are stored in Morton (Z-order): the cube at level `k` with code `m`
//! covers the contiguous cell range `m·2^{(L-k)d} .. (m+1)·2^{(L-k)d}`, its
//! children are `m·2^d + c` and its parent is `m >> d`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math;
use crate::orlicz::Sample;

pub const MAX_DIM: u32 = 3;
/// Upper bound on `L·d`, i.e. at most `2^20` finest cells.
pub const MAX_CELL_BITS: u32 = 20;

/// A dyadic cube, identified by its level and Morton code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicCube {
    pub level: u32,
    pub code: u64,
}

impl DyadicCube {
    pub const ROOT: DyadicCube = DyadicCube { level: 0, code: 0 };

    pub fn new(level: u32, code: u64) -> Self {
        DyadicCube { level, code }
    }

    /// Cube from its integer coordinate vector (entries in `[0, 2^level)`).
    pub fn from_index(level: u32, index: &[u64]) -> Result<Self> {
        let d = index.len() as u32;
        if d == 0 || d > MAX_DIM || level * d > 62 {
            return Err(Error::CubeOutOfRange);
        }
        let side = 1u64 << level;
        if index.iter().any(|&x| x >= side) {
            return Err(Error::CubeOutOfRange);
        }
        let mut code = 0u64;
        for bit in (0..level).rev() {
            for &x in index {
                code = (code << 1) | ((x >> bit) & 1);
            }
        }
        Ok(DyadicCube { level, code })
    }

    /// Integer coordinate vector in dimension `d`.
    pub fn index(&self, d: u32) -> Vec<u64> {
        let mut out = vec![0u64; d as usize];
        let mut code = self.code;
        for bit in 0..self.level {
            for axis in (0..d as usize).rev() {
                out[axis] |= (code & 1) << bit;
                code >>= 1;
            }
        }
        out
    }

    /// `|Q| = 2^{-level·d}`.
    pub fn volume(&self, d: u32) -> f64 {
        math::powf(2.0, -((self.level * d) as f64))
    }

    pub fn parent(&self, d: u32) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube::new(self.level - 1, self.code >> d))
    }

    pub fn children(&self, d: u32) -> impl Iterator<Item = DyadicCube> {
        let base = self.code << d;
        let level = self.level + 1;
        (0..1u64 << d).map(move |c| DyadicCube::new(level, base + c))
    }

    /// Ancestor at a coarser `level` (or `self` when `level == self.level`).
    pub fn ancestor(&self, level: u32, d: u32) -> DyadicCube {
        debug_assert!(level <= self.level);
        DyadicCube::new(level, self.code >> (d * (self.level - level)))
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube, d: u32) -> bool {
        other.level >= self.level && other.code >> (d * (other.level - self.level)) == self.code
    }

    pub fn strictly_contains(&self, other: &DyadicCube, d: u32) -> bool {
        other.level > self.level && self.contains(other, d)
    }
}

/// Shape of a dyadic mesh: dimension `d` and depth `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub dim: u32,
    pub depth: u32,
}

impl Lattice {
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter { name: "dimension", reason: "must be 1, 2 or 3" });
        }
        if depth == 0 || depth * dim > MAX_CELL_BITS {
            return Err(Error::InvalidParameter { name: "depth", reason: "must be positive with depth·dimension at most 20" });
        }
        Ok(Lattice { dim, depth })
    }

    pub fn n_cells(&self) -> usize {
        1usize << (self.depth * self.dim)
    }

    pub fn cell_volume(&self) -> f64 {
        math::powf(2.0, -((self.depth * self.dim) as f64))
    }

    pub fn cubes_at_level(&self, level: u32) -> usize {
        1usize << (level * self.dim)
    }

    pub fn check(&self, q: &DyadicCube) -> Result<()> {
        if q.level > self.depth {
            return Err(Error::CubeTooDeep { level: q.level, depth: self.depth });
        }
        if q.code >= self.cubes_at_level(q.level) as u64 {
            return Err(Error::CubeOutOfRange);
        }
        Ok(())
    }

    /// Finest cells inside `q` (Morton indices).
    pub fn cell_range(&self, q: &DyadicCube) -> Range<usize> {
        let shift = self.dim * (self.depth - q.level);
        let start = (q.code as usize) << shift;
        start..start + (1usize << shift)
    }

    /// The finest cell with Morton index `i` as a cube.
    pub fn cell(&self, i: usize) -> DyadicCube {
        DyadicCube::new(self.depth, i as u64)
    }

    /// Every cube of the lattice, coarse to fine.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.depth).flat_map(move |k| (0..self.cubes_at_level(k) as u64).map(move |m| DyadicCube::new(k, m)))
    }

    pub fn n_cubes(&self) -> usize {
        (0..=self.depth).map(|k| self.cubes_at_level(k)).sum()
    }

    /// Morton index of the cell at row-major position `r` (last axis fastest).
    pub fn morton_of_row_major(&self, r: usize) -> usize {
        let side = 1usize << self.depth;
        let d = self.dim as usize;
        let mut index = vec![0u64; d];
        let mut rest = r;
        for axis in (0..d).rev() {
            index[axis] = (rest % side) as u64;
            rest /= side;
        }
        DyadicCube::from_index(self.depth, &index).map(|c| c.code as usize).unwrap_or(0)
    }

    pub fn from_row_major(&self, data: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        for (r, &v) in data.iter().enumerate() {
            out[self.morton_of_row_major(r)] = v;
        }
        out
    }

    pub fn to_row_major(&self, cells: &[f64]) -> Vec<f64> {
        (0..cells.len()).map(|r| cells[self.morton_of_row_major(r)]).collect()
    }
}

/// Per-level integrals of a grid function: `levels[k][m] = ∫_{(k,m)} f`.
/// Parents are summed from their children, so additivity holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    lattice: Lattice,
    levels: Vec<Vec<f64>>,
}

impl Pyramid {
    pub fn new(lattice: Lattice, cells: &[f64]) -> Self {
        let h = lattice.cell_volume();
        let fan = 1usize << lattice.dim;
        let mut levels = Vec::with_capacity(lattice.depth as usize + 1);
        levels.push(cells.iter().map(|v| v * h).collect::<Vec<f64>>());
        for _ in 0..lattice.depth {
            let finer = levels.last().unwrap();
            let coarser = finer.chunks(fan).map(|c| c.iter().sum()).collect();
            levels.push(coarser);
        }
        levels.reverse();
        Pyramid { lattice, levels }
    }

    /// `∫_Q f` (no range check).
    #[inline]
    pub fn integral(&self, q: &DyadicCube) -> f64 {
        self.levels[q.level as usize][q.code as usize]
    }

    #[inline]
    pub fn average(&self, q: &DyadicCube) -> f64 {
        self.integral(q) / q.volume(self.lattice.dim)
    }

    pub fn level(&self, k: u32) -> &[f64] {
        &self.levels[k as usize]
    }
}

/// A nonnegative density, constant on each finest cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    lattice: Lattice,
    cells: Vec<f64>,
    pyramid: Pyramid,
}

impl WeightGrid {
    /// Weight from cell values in Morton order.
    pub fn new(dim: u32, depth: u32, cells: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::new(dim, depth)?;
        if cells.len() != lattice.n_cells() {
            return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: cells.len() });
        }
        if let Some(i) = cells.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidWeight(i));
        }
        let pyramid = Pyramid::new(lattice, &cells);
        Ok(WeightGrid { lattice, cells, pyramid })
    }

    /// Weight from cell values in row-major order (last axis fastest).
    pub fn from_row_major(dim: u32, depth: u32, data: &[f64]) -> Result<Self> {
        let lattice = Lattice::new(dim, depth)?;
        if data.len() != lattice.n_cells() {
            return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: data.len() });
        }
        Self::new(dim, depth, lattice.from_row_major(data))
    }

    pub fn constant(dim: u32, depth: u32, value: f64) -> Result<Self> {
        let lattice = Lattice::new(dim, depth)?;
        Self::new(dim, depth, vec![value; lattice.n_cells()])
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.lattice.to_row_major(&self.cells)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn dim(&self) -> u32 {
        self.lattice.dim
    }

    pub fn depth(&self) -> u32 {
        self.lattice.depth
    }

    /// Cell values in Morton order.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn pyramid(&self) -> &Pyramid {
        &self.pyramid
    }

    pub fn same_shape(&self, other: &WeightGrid) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `σ(Q)`.
    pub fn mass(&self, q: &DyadicCube) -> Result<f64> {
        self.lattice.check(q)?;
        Ok(self.pyramid.integral(q))
    }

    /// `σ(Q)` without the range check.
    #[inline]
    pub fn mass_of(&self, q: &DyadicCube) -> f64 {
        self.pyramid.integral(q)
    }

    /// `⟨σ⟩_Q` without the range check.
    #[inline]
    pub fn avg(&self, q: &DyadicCube) -> f64 {
        self.pyramid.average(q)
    }

    /// Cell values inside `q`.
    pub fn slice(&self, q: &DyadicCube) -> &[f64] {
        &self.cells[self.lattice.cell_range(q)]
    }

    /// Same weight with every cell multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.dim(), self.depth(), self.cells.iter().map(|v| v * c).collect())
    }

    /// Copy with cell `i` (Morton) set to `value`; updates the pyramid path.
    pub fn with_cell(&self, i: usize, value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidWeight(i));
        }
        let mut out = self.clone();
        out.set_cell(i, value);
        Ok(out)
    }

    pub(crate) fn set_cell(&mut self, i: usize, value: f64) {
        self.cells[i] = value;
        let d = self.lattice.dim;
        let h = self.lattice.cell_volume();
        let fan = 1usize << d;
        let depth = self.lattice.depth as usize;
        self.pyramid.levels[depth][i] = value * h;
        let mut idx = i;
        for k in (0..depth).rev() {
            let parent = idx >> d;
            let start = parent * fan;
            let s: f64 = self.pyramid.levels[k + 1][start..start + fan].iter().sum();
            self.pyramid.levels[k][parent] = s;
            idx = parent;
        }
    }
}

/// `⟨σ⟩_Q = σ(Q) / |Q|`.
pub fn average(sigma: &WeightGrid, q: &DyadicCube) -> Result<f64> {
    Ok(sigma.mass(q)? / q.volume(sigma.dim()))
}

/// `⟨g⟩^w_Q = ∫_Q g w / w(Q)`, and 0 when `w(Q) = 0`.
pub fn weighted_average(g: &[f64], w: &WeightGrid, q: &DyadicCube) -> Result<f64> {
    let lattice = w.lattice();
    lattice.check(q)?;
    if g.len() != lattice.n_cells() {
        return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: g.len() });
    }
    let range = lattice.cell_range(q);
    let wq: f64 = w.cells()[range.clone()].iter().sum();
    if wq <= 0.0 {
        return Ok(0.0);
    }
    let gw: f64 = g[range.clone()].iter().zip(&w.cells()[range]).map(|(a, b)| a * b).sum();
    Ok(gw / wq)
}

/// Values of `f` on the finest cells of `q` with masses `2^{-(L - level)d}`.
pub fn cube_samples(f: &[f64], lattice: Lattice, q: &DyadicCube) -> Result<Vec<Sample>> {
    lattice.check(q)?;
    if f.len() != lattice.n_cells() {
        return Err(Error::LengthMismatch { expected: lattice.n_cells(), got: f.len() });
    }
    let range = lattice.cell_range(q);
    let m = 1.0 / range.len() as f64;
    Ok(f[range].iter().map(|&v| Sample::new(v, m)).collect())
}
