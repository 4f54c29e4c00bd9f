use super::{check_finite, pairwise_sum, AtomCloud, GridSpec, GriddedDensity, Measure, SquareCloud};
use crate::error::{invalid, Error, Result};

/// Largest number of grid cells a single density may occupy.
pub const MAX_CELLS: usize = 500_000;

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        check_finite(&lo, "box corner")?;
        check_finite(&hi, "box corner")?;
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(invalid("empty bounding box"));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Largest side length.
    pub fn diameter_inf(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// The box grown by `r` on every side.
    pub fn dilated(&self, r: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|x| x - r).collect(),
            hi: self.hi.iter().map(|x| x + r).collect(),
        }
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }
}

/// Offsets of the `q` midpoint nodes of `[-s/2, s/2]`.
fn midpoint_offsets(side: f64, q: usize) -> Vec<f64> {
    (0..q)
        .map(|j| ((j as f64 + 0.5) / q as f64 - 0.5) * side)
        .collect()
}

/// Calls `visit` with every tensor-product node built from per-axis node lists.
fn for_each_node(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64])) {
    let dim = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut counter = vec![0usize; dim];
    let mut node: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&node);
        let mut d = dim;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            counter[d] += 1;
            if counter[d] < axes[d].len() {
                node[d] = axes[d][counter[d]];
                break;
            }
            counter[d] = 0;
            node[d] = axes[d][0];
        }
    }
}

fn split_squares(dim: usize, side: f64, squares: impl Iterator<Item = (Vec<f64>, f64)>, q: usize) -> Result<AtomCloud> {
    let offsets = midpoint_offsets(side, q);
    let share = 1.0 / (q as f64).powi(dim as i32);
    let mut positions = Vec::new();
    let mut masses = Vec::new();
    for (c, m) in squares {
        let axes: Vec<Vec<f64>> = c.iter().map(|x| offsets.iter().map(|o| x + o).collect()).collect();
        for_each_node(&axes, |p| {
            positions.extend_from_slice(p);
            masses.push(m * share);
        });
    }
    AtomCloud::new(dim, positions, masses)
}

/// Replaces each square or cell by `q^n` equal-mass atoms on its midpoint
/// nodes. Atomic input is returned unchanged.
pub fn to_quadrature(m: &Measure, q: usize) -> Result<AtomCloud> {
    if q == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    match m {
        Measure::Atoms(a) => Ok(a.clone()),
        Measure::Squares(s) => split_squares(
            s.dim(),
            s.side(),
            s.iter().map(|(c, m)| (c.to_vec(), m)),
            q,
        ),
        Measure::Grid(g) => {
            let grid = g.grid();
            split_squares(
                grid.dim(),
                grid.cell_side(),
                g.iter().map(|(k, m)| (grid.cell_center(k), m)),
                q,
            )
        }
    }
}

/// Samples a nonnegative density on the cells of `grid` meeting `bbox`.
///
/// Each cell mass is the midpoint rule with `q^n` nodes on the part of the
/// cell inside `bbox`; the density is treated as zero outside `bbox`.
pub fn init_from_density<F>(
    f: F,
    grid: &GridSpec,
    bbox: &BoundingBox,
    q: usize,
    normalize: bool,
) -> Result<GriddedDensity>
where
    F: Fn(&[f64]) -> f64,
{
    if q == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    let dim = grid.dim();
    if bbox.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bbox.dim(),
        });
    }
    // Cells meeting the open box; a cell that only touches it carries no mass.
    let mut ranges = Vec::with_capacity(dim);
    let mut count: usize = 1;
    for d in 0..dim {
        let a = grid.to_units(bbox.lo[d], d).floor() as i64;
        let b = grid.to_units(bbox.hi[d], d).ceil() as i64;
        let len = (b - a).max(1) as usize;
        count = count.saturating_mul(len);
        ranges.push((a, b.max(a + 1)));
    }
    if count > MAX_CELLS {
        return Err(Error::ResourceCap {
            what: "grid cells",
            count,
            cap: MAX_CELLS,
        });
    }
    let axes: Vec<Vec<f64>> = ranges
        .iter()
        .map(|(a, b)| (*a..*b).map(|k| k as f64).collect())
        .collect();
    let mut cells = Vec::new();
    let mut failure: Option<Error> = None;
    let dx = grid.cell_side();
    for_each_node(&axes, |kf| {
        if failure.is_some() {
            return;
        }
        let k: Vec<i64> = kf.iter().map(|x| *x as i64).collect();
        let lower = grid.cell_lower(&k);
        let mut node_axes = Vec::with_capacity(dim);
        let mut volume = 1.0;
        for d in 0..dim {
            let lo = lower[d].max(bbox.lo[d]);
            let hi = (lower[d] + dx).min(bbox.hi[d]);
            if hi <= lo {
                return;
            }
            volume *= hi - lo;
            let mid = 0.5 * (lo + hi);
            node_axes.push(midpoint_offsets(hi - lo, q).into_iter().map(|o| mid + o).collect::<Vec<_>>());
        }
        let mut values = Vec::with_capacity(q.pow(dim as u32));
        for_each_node(&node_axes, |x| {
            let v = f(x);
            if failure.is_none() {
                if !v.is_finite() {
                    failure = Some(Error::NonFinite("density value"));
                } else if v < 0.0 {
                    failure = Some(Error::NegativeDensity {
                        value: v,
                        point: x.to_vec(),
                    });
                }
            }
            values.push(v);
        });
        let mass = pairwise_sum(&values) / values.len() as f64 * volume;
        if mass > 0.0 {
            cells.push((k, mass));
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut density = GriddedDensity::from_cells(grid.clone(), cells)?;
    if normalize {
        let total = density.total_mass();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        let cells: Vec<_> = density.iter().map(|(k, m)| (k.clone(), m / total)).collect();
        density = GriddedDensity::from_cells(grid.clone(), cells)?;
    }
    Ok(density)
}

impl SquareCloud {
    /// Midpoint-rule atoms of order `q`.
    pub fn to_quadrature(&self, q: usize) -> Result<AtomCloud> {
        to_quadrature(&Measure::Squares(self.clone()), q)
    }
}
