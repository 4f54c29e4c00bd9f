use std::collections::{BTreeMap, HashMap};

use super::{pairwise_sum, AtomCloud, BoundingBox, Measure, SquareCloud};
use crate::error::{invalid, Error, Result};

/// Integer multi-index of a grid cell.
pub type CellIndex = Vec<i64>;

/// Axis-aligned hypercube grid. Cell `k` is the half-open box
/// `prod_i [origin_i + k_i dx, origin_i + (k_i + 1) dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cell_side: f64,
    origin: Vec<f64>,
}

impl GridSpec {
    pub fn new(dim: usize, cell_side: f64, origin: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("grid dimension must be at least 1"));
        }
        if !(cell_side > 0.0) || !cell_side.is_finite() {
            return Err(invalid(format!("cell side must be positive, got {cell_side}")));
        }
        if origin.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: origin.len(),
            });
        }
        super::check_finite(&origin, "grid origin")?;
        Ok(Self {
            dim,
            cell_side,
            origin,
        })
    }

    /// Grid anchored at the origin of R^n.
    pub fn anchored(dim: usize, cell_side: f64) -> Result<Self> {
        Self::new(dim, cell_side, vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.cell_side.powi(self.dim as i32)
    }

    /// Cell containing `x` under the half-open convention.
    pub fn cell_of(&self, x: &[f64]) -> CellIndex {
        x.iter()
            .zip(&self.origin)
            .map(|(xi, oi)| ((xi - oi) / self.cell_side).floor() as i64)
            .collect()
    }

    pub fn cell_center(&self, k: &[i64]) -> Vec<f64> {
        k.iter()
            .zip(&self.origin)
            .map(|(ki, oi)| oi + (*ki as f64 + 0.5) * self.cell_side)
            .collect()
    }

    pub fn cell_lower(&self, k: &[i64]) -> Vec<f64> {
        k.iter()
            .zip(&self.origin)
            .map(|(ki, oi)| oi + *ki as f64 * self.cell_side)
            .collect()
    }

    /// Position of `x` in grid units along `axis`.
    pub(crate) fn to_units(&self, x: f64, axis: usize) -> f64 {
        (x - self.origin[axis]) / self.cell_side
    }
}

/// Piecewise-constant density on a grid, stored as positive cell masses.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    grid: GridSpec,
    cells: BTreeMap<CellIndex, f64>,
}

impl GriddedDensity {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            cells: BTreeMap::new(),
        }
    }

    /// Builds a density from explicit cell masses; zero masses are dropped,
    /// repeated indices accumulate.
    pub fn from_cells<I>(grid: GridSpec, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CellIndex, f64)>,
    {
        let mut map = BTreeMap::new();
        for (k, m) in cells {
            if k.len() != grid.dim {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim,
                    found: k.len(),
                });
            }
            super::check_masses(&[m])?;
            if m > 0.0 {
                *map.entry(k).or_insert(0.0) += m;
            }
        }
        Ok(Self { grid, cells: map })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of cells with positive mass.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mass of cell `k` (zero when absent).
    pub fn mass(&self, k: &[i64]) -> f64 {
        self.cells.get(k).copied().unwrap_or(0.0)
    }

    /// Density value on cell `k`.
    pub fn density(&self, k: &[i64]) -> f64 {
        self.mass(k) / self.grid.cell_volume()
    }

    /// Nonzero cells in lexicographic index order.
    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, f64)> + '_ {
        self.cells.iter().map(|(k, m)| (k, *m))
    }

    pub fn total_mass(&self) -> f64 {
        let masses: Vec<f64> = self.cells.values().copied().collect();
        pairwise_sum(&masses)
    }

    pub fn support_bbox(&self) -> Option<BoundingBox> {
        SquareCloud::from_grid(self).support_bbox()
    }

    /// The same cell masses moved by an integer number of cells per axis.
    pub fn shifted_cells(&self, shift: &[i64]) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|(k, m)| (k.iter().zip(shift).map(|(a, b)| a + b).collect(), *m))
            .collect();
        Self {
            grid: self.grid.clone(),
            cells,
        }
    }
}

/// Splits `[lo, lo + width)` (grid units) over the unit cells it meets and
/// returns `(first cell, fractions)`. Fractions sum to one up to rounding.
fn axis_overlaps(lo: f64, width: f64, out: &mut Vec<f64>) -> i64 {
    out.clear();
    let hi = lo + width;
    let first = lo.floor();
    let mut k = first;
    while k < hi {
        let a = lo.max(k);
        let b = hi.min(k + 1.0);
        if b > a {
            out.push((b - a) / width);
        } else {
            out.push(0.0);
        }
        k += 1.0;
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|f| *f /= total);
    }
    first as i64
}

/// Accumulates boxes given in grid units onto `grid`.
///
/// `lows` holds the lower corner of every box (flattened, `dim` entries per
/// box); all boxes have the same `width` in grid units.
pub(crate) fn project_boxes_in_units(
    grid: &GridSpec,
    lows: &[f64],
    width: f64,
    masses: &[f64],
) -> GriddedDensity {
    let dim = grid.dim;
    let mut acc: HashMap<CellIndex, f64> = HashMap::new();
    let mut fracs: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut firsts = vec![0i64; dim];
    let mut counter = vec![0usize; dim];
    let mut key = vec![0i64; dim];
    for (lo, &m) in lows.chunks_exact(dim).zip(masses) {
        if m == 0.0 {
            continue;
        }
        for d in 0..dim {
            firsts[d] = axis_overlaps(lo[d], width, &mut fracs[d]);
        }
        counter.iter_mut().for_each(|c| *c = 0);
        'cells: loop {
            let mut w = m;
            for d in 0..dim {
                w *= fracs[d][counter[d]];
                key[d] = firsts[d] + counter[d] as i64;
            }
            if w > 0.0 {
                match acc.get_mut(&key) {
                    Some(v) => *v += w,
                    None => {
                        acc.insert(key.clone(), w);
                    }
                }
            }
            for d in (0..dim).rev() {
                counter[d] += 1;
                if counter[d] < fracs[d].len() {
                    continue 'cells;
                }
                counter[d] = 0;
            }
            break;
        }
    }
    GriddedDensity {
        grid: grid.clone(),
        cells: acc.into_iter().collect(),
    }
}

fn project_squares(s: &SquareCloud, grid: &GridSpec) -> GriddedDensity {
    let dim = grid.dim;
    let half = 0.5 * s.side();
    let mut lows = Vec::with_capacity(s.centers().len());
    for c in s.centers().chunks_exact(dim) {
        for d in 0..dim {
            lows.push(grid.to_units(c[d] - half, d));
        }
    }
    project_boxes_in_units(grid, &lows, s.side() / grid.cell_side, s.masses())
}

fn project_atoms(a: &AtomCloud, grid: &GridSpec) -> GriddedDensity {
    let mut acc: HashMap<CellIndex, f64> = HashMap::new();
    for (x, m) in a.iter() {
        if m > 0.0 {
            *acc.entry(grid.cell_of(x)).or_insert(0.0) += m;
        }
    }
    GriddedDensity {
        grid: grid.clone(),
        cells: acc.into_iter().collect(),
    }
}

/// The grid operator: every cell of `grid` receives the exact mass that `m`
/// places inside it. Squares and foreign grids are split by box-overlap
/// volumes; a density already on `grid` is returned unchanged.
pub fn grid_project(m: &Measure, grid: &GridSpec) -> Result<GriddedDensity> {
    if m.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: m.dim(),
        });
    }
    Ok(match m {
        Measure::Atoms(a) => project_atoms(a, grid),
        Measure::Squares(s) => project_squares(s, grid),
        Measure::Grid(g) if g.grid == *grid => g.clone(),
        Measure::Grid(g) => project_squares(&SquareCloud::from_grid(g), grid),
    })
}

/// `sum_cells |a - b|`, the exact L1 distance of two densities on one grid.
pub fn l1_distance(a: &GriddedDensity, b: &GriddedDensity) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            a.grid, b.grid
        )));
    }
    // Summed over the sorted union of supports, so exactly symmetric.
    let keys: std::collections::BTreeSet<&CellIndex> = a.cells.keys().chain(b.cells.keys()).collect();
    let terms: Vec<f64> = keys.into_iter().map(|k| (a.mass(k) - b.mass(k)).abs()).collect();
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(dx: f64) -> GridSpec {
        GridSpec::anchored(2, dx).unwrap()
    }

    #[test]
    fn square_covering_four_cells() {
        let s = SquareCloud::new(2, 1.0, vec![0.0, 0.0], vec![1.0]).unwrap();
        let g = grid_project(&s.into(), &grid2(0.5)).unwrap();
        assert_eq!(g.len(), 4);
        for (_, m) in g.iter() {
            assert_eq!(m, 0.25);
        }
    }

    #[test]
    fn atom_inside_one_cell() {
        let a = AtomCloud::from_points(2, &[([0.3, 0.7], 1.0)]).unwrap();
        let g = grid_project(&a.into(), &grid2(0.5)).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.mass(&[0, 1]), 1.0);
    }

    #[test]
    fn half_shifted_square_splits_in_two() {
        let s = SquareCloud::new(2, 0.5, vec![0.5, 0.25], vec![1.0]).unwrap();
        let g = grid_project(&s.into(), &grid2(0.5)).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.mass(&[0, 0]), 0.5);
        assert_eq!(g.mass(&[1, 0]), 0.5);
    }

    #[test]
    fn boundary_atom_goes_to_upper_cell() {
        let a = AtomCloud::from_points(1, &[([1.0], 1.0)]).unwrap();
        let g = grid_project(&a.into(), &GridSpec::anchored(1, 0.5).unwrap()).unwrap();
        assert_eq!(g.mass(&[2]), 1.0);
    }

    #[test]
    fn projection_onto_own_grid_is_identity() {
        let grid = grid2(0.25);
        let g = GriddedDensity::from_cells(grid.clone(), vec![(vec![0, 0], 0.4), (vec![3, -2], 0.6)])
            .unwrap();
        assert_eq!(grid_project(&g.clone().into(), &grid).unwrap(), g);
    }

    #[test]
    fn l1_of_disjoint_cells_is_two() {
        let grid = grid2(1.0);
        let a = GriddedDensity::from_cells(grid.clone(), vec![(vec![0, 0], 1.0)]).unwrap();
        let b = GriddedDensity::from_cells(grid.clone(), vec![(vec![1, 0], 1.0)]).unwrap();
        assert_eq!(l1_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        let other = GriddedDensity::empty(grid2(0.5));
        assert!(matches!(l1_distance(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = AtomCloud::from_points(1, &[([0.0], 1.0)]).unwrap();
        assert!(grid_project(&a.into(), &grid2(1.0)).is_err());
    }
}
