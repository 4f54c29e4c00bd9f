//! Finite positive measures on R^n in the three discrete representations
//! used throughout the crate: weighted atoms, translated axis-aligned
//! squares sharing one side length, and piecewise-constant densities on a
//! fixed grid.
//!
//! All representations store masses, never densities. A square or cell of
//! side `s` carrying mass `m` has density `m / s^n`.

mod grid;
pub mod io;
mod quadrature;

pub use grid::{grid_project, l1_distance, CellIndex, GridSpec, GriddedDensity};
pub(crate) use grid::project_boxes_in_units;
pub use quadrature::{init_from_density, to_quadrature, BoundingBox, MAX_CELLS};

use crate::error::{invalid, Error, Result};

/// Sum with pairwise splitting; rounding grows like `O(log n)` instead of `O(n)`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_masses(masses: &[f64]) -> Result<()> {
    check_finite(masses, "masses")?;
    if let Some(m) = masses.iter().find(|m| **m < 0.0) {
        return Err(invalid(format!("negative mass {m}")));
    }
    Ok(())
}

/// Weighted Dirac atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    dim: usize,
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl AtomCloud {
    pub fn new(dim: usize, positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if positions.len() != dim * masses.len() {
            return Err(invalid(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                positions.len(),
                masses.len()
            )));
        }
        check_finite(&positions, "atom positions")?;
        check_masses(&masses)?;
        Ok(Self {
            dim,
            positions,
            masses,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            positions: Vec::new(),
            masses: Vec::new(),
        }
    }

    /// Builds a cloud from `(position, mass)` pairs.
    pub fn from_points<P: AsRef<[f64]>>(dim: usize, atoms: &[(P, f64)]) -> Result<Self> {
        let mut positions = Vec::with_capacity(atoms.len() * dim);
        let mut masses = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            positions.extend_from_slice(p);
            masses.push(*m);
        }
        Self::new(dim, positions, masses)
    }

    pub fn push(&mut self, position: &[f64], mass: f64) -> Result<()> {
        if position.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: position.len(),
            });
        }
        check_finite(position, "atom position")?;
        check_masses(&[mass])?;
        self.positions.extend_from_slice(position);
        self.masses.push(mass);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.positions
            .chunks_exact(self.dim)
            .zip(self.masses.iter().copied())
    }

    /// Rigid translation by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for p in out.positions.chunks_exact_mut(self.dim) {
            for (c, s) in p.iter_mut().zip(shift) {
                *c += s;
            }
        }
        out
    }

    /// Every mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.masses.iter_mut().for_each(|m| *m *= factor);
        out
    }

    /// Concatenation of two clouds (the sum of the measures).
    pub fn union(&self, other: &AtomCloud) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.positions.extend_from_slice(&other.positions);
        out.masses.extend_from_slice(&other.masses);
        Ok(out)
    }

    /// Axis-aligned bounding box of the atoms with positive mass.
    pub fn support_bbox(&self) -> Option<BoundingBox> {
        bbox_of(
            self.dim,
            self.iter()
                .filter(|(_, m)| *m > 0.0)
                .map(|(p, _)| (p.to_vec(), p.to_vec())),
        )
    }
}

/// Translated axis-aligned squares (hypercubes) of a common side.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareCloud {
    dim: usize,
    side: f64,
    centers: Vec<f64>,
    masses: Vec<f64>,
}

impl SquareCloud {
    pub fn new(dim: usize, side: f64, centers: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(invalid(format!("square side must be positive, got {side}")));
        }
        if centers.len() != dim * masses.len() {
            return Err(invalid(format!(
                "{} coordinates do not describe {} squares in dimension {dim}",
                centers.len(),
                masses.len()
            )));
        }
        check_finite(&centers, "square centers")?;
        check_masses(&masses)?;
        Ok(Self {
            dim,
            side,
            centers,
            masses,
        })
    }

    /// One square per nonzero cell, centered on the cell, carrying the cell mass.
    pub fn from_grid(density: &GriddedDensity) -> Self {
        let grid = density.grid();
        let mut centers = Vec::with_capacity(density.len() * grid.dim());
        let mut masses = Vec::with_capacity(density.len());
        for (k, m) in density.iter() {
            centers.extend(grid.cell_center(k));
            masses.push(m);
        }
        Self {
            dim: grid.dim(),
            side: grid.cell_side(),
            centers,
            masses,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn centers_mut(&mut self) -> &mut [f64] {
        &mut self.centers
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.centers
            .chunks_exact(self.dim)
            .zip(self.masses.iter().copied())
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for c in out.centers.chunks_exact_mut(self.dim) {
            for (x, s) in c.iter_mut().zip(shift) {
                *x += s;
            }
        }
        out
    }

    pub fn support_bbox(&self) -> Option<BoundingBox> {
        let h = 0.5 * self.side;
        bbox_of(
            self.dim,
            self.iter().filter(|(_, m)| *m > 0.0).map(|(c, _)| {
                (
                    c.iter().map(|x| x - h).collect(),
                    c.iter().map(|x| x + h).collect(),
                )
            }),
        )
    }
}

fn bbox_of(dim: usize, boxes: impl Iterator<Item = (Vec<f64>, Vec<f64>)>) -> Option<BoundingBox> {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut any = false;
    for (l, h) in boxes {
        any = true;
        for d in 0..dim {
            lo[d] = lo[d].min(l[d]);
            hi[d] = hi[d].max(h[d]);
        }
    }
    any.then(|| BoundingBox { lo, hi })
}

/// Any of the supported measure representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Atoms(AtomCloud),
    Squares(SquareCloud),
    Grid(GriddedDensity),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Atoms(a) => a.dim(),
            Measure::Squares(s) => s.dim(),
            Measure::Grid(g) => g.grid().dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atoms(a) => a.total_mass(),
            Measure::Squares(s) => s.total_mass(),
            Measure::Grid(g) => g.total_mass(),
        }
    }

    /// Number of stored pieces (atoms, squares or nonzero cells).
    pub fn piece_count(&self) -> usize {
        match self {
            Measure::Atoms(a) => a.len(),
            Measure::Squares(s) => s.len(),
            Measure::Grid(g) => g.len(),
        }
    }

    /// Side of the elementary pieces; zero for atoms.
    pub fn piece_side(&self) -> f64 {
        match self {
            Measure::Atoms(_) => 0.0,
            Measure::Squares(s) => s.side(),
            Measure::Grid(g) => g.grid().cell_side(),
        }
    }

    pub fn support_bbox(&self) -> Option<BoundingBox> {
        match self {
            Measure::Atoms(a) => a.support_bbox(),
            Measure::Squares(s) => s.support_bbox(),
            Measure::Grid(g) => g.support_bbox(),
        }
    }

    /// Atomic surrogate: atoms are returned as is, squares and cells are
    /// split into `q^n` midpoint atoms.
    pub fn to_atoms(&self, q: usize) -> Result<AtomCloud> {
        match self {
            Measure::Atoms(a) => Ok(a.clone()),
            Measure::Squares(s) => to_quadrature(&Measure::Squares(s.clone()), q),
            Measure::Grid(_) => to_quadrature(self, q),
        }
    }

    /// Exact mass inside the closed box `[lo, hi]`; squares and cells
    /// contribute their overlap volume fraction.
    pub fn mass_in_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let inside = |p: &[f64]| p.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| *l <= *x && *x <= *h);
        let overlap = |c: &[f64], side: f64| -> f64 {
            let mut frac = 1.0;
            for d in 0..c.len() {
                let a = (c[d] - 0.5 * side).max(lo[d]);
                let b = (c[d] + 0.5 * side).min(hi[d]);
                if b <= a {
                    return 0.0;
                }
                frac *= (b - a) / side;
            }
            frac
        };
        let terms: Vec<f64> = match self {
            Measure::Atoms(a) => a.iter().filter(|(p, _)| inside(p)).map(|(_, m)| m).collect(),
            Measure::Squares(s) => s.iter().map(|(c, m)| m * overlap(c, s.side())).collect(),
            Measure::Grid(g) => {
                let side = g.grid().cell_side();
                g.iter()
                    .map(|(k, m)| m * overlap(&g.grid().cell_center(k), side))
                    .collect()
            }
        };
        pairwise_sum(&terms)
    }
}

impl From<AtomCloud> for Measure {
    fn from(a: AtomCloud) -> Self {
        Measure::Atoms(a)
    }
}

impl From<SquareCloud> for Measure {
    fn from(s: SquareCloud) -> Self {
        Measure::Squares(s)
    }
}

impl From<GriddedDensity> for Measure {
    fn from(g: GriddedDensity) -> Self {
        Measure::Grid(g)
    }
}

/// Sum of the entries' masses.
pub fn total_mass(m: &Measure) -> f64 {
    m.total_mass()
}

/// Absolutely continuous part plus a Dirac part. The two parts are
/// evolved separately and never exchange mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleMeasure {
    pub ac: Measure,
    pub singular: AtomCloud,
}

impl MultiScaleMeasure {
    pub fn new(ac: Measure, singular: AtomCloud) -> Result<Self> {
        if matches!(ac, Measure::Atoms(_)) {
            return Err(invalid("the absolutely continuous part must be gridded or squares"));
        }
        if ac.dim() != singular.dim() {
            return Err(Error::DimensionMismatch {
                expected: ac.dim(),
                found: singular.dim(),
            });
        }
        Ok(Self { ac, singular })
    }

    pub fn dim(&self) -> usize {
        self.ac.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.ac.total_mass() + self.singular.total_mass()
    }
}

/// A vector of `N >= 1` populations sharing the ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    populations: Vec<Measure>,
}

impl PopulationVector {
    pub fn new(populations: Vec<Measure>) -> Result<Self> {
        let first = populations
            .first()
            .ok_or_else(|| invalid("a population vector needs at least one population"))?;
        let dim = first.dim();
        if let Some(p) = populations.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self { populations })
    }

    pub fn len(&self) -> usize {
        self.populations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.populations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.populations[0].dim()
    }

    pub fn populations(&self) -> &[Measure] {
        &self.populations
    }

    pub fn into_inner(self) -> Vec<Measure> {
        self.populations
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_has_zero_mass() {
        assert_eq!(total_mass(&AtomCloud::empty(2).into()), 0.0);
    }

    #[test]
    fn two_atoms_sum_to_one() {
        let a = AtomCloud::from_points(1, &[([0.0], 0.3), ([1.0], 0.7)]).unwrap();
        assert!((total_mass(&a.into()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_and_nonfinite() {
        assert!(AtomCloud::new(1, vec![0.0], vec![-1.0]).is_err());
        assert!(matches!(
            AtomCloud::new(1, vec![f64::NAN], vec![1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(SquareCloud::new(2, 0.0, vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), 0.5 * 999.0 * 1000.0 / 2.0);
    }

    #[test]
    fn mass_in_box_for_squares_uses_overlap() {
        let s = SquareCloud::new(2, 1.0, vec![0.5, 0.5], vec![1.0]).unwrap();
        let m = Measure::Squares(s).mass_in_box(&[0.0, 0.5], &[1.0, 2.0]);
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn population_vector_checks_dimension() {
        let a: Measure = AtomCloud::empty(1).into();
        let b: Measure = AtomCloud::empty(2).into();
        assert!(PopulationVector::new(vec![a, b]).is_err());
        assert!(PopulationVector::new(vec![]).is_err());
    }
}
