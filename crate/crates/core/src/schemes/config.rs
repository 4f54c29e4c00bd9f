use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measure::{
    grid_project, init_from_density, BoundingBox, GridSpec, GriddedDensity, Measure, MAX_CELLS,
};

/// Relative tolerance for `T / dt` to count as an integer.
const DIVISIBILITY_TOLERANCE: f64 = 1e-9;

/// Discretization parameters shared by all schemes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub t_final: f64,
    pub dt: f64,
    pub dx: f64,
    /// Distance exponent used when comparing trajectories.
    pub p: f64,
    /// Integrator steps per time step for the particle scheme.
    pub substeps: usize,
    /// Keep one frame every `record_every` steps; the final frame is always kept.
    pub record_every: usize,
    /// Midpoint-rule order used to turn squares and cells into atoms.
    pub quadrature: usize,
    /// Grid anchor; empty means the origin.
    pub origin: Vec<f64>,
}

impl SchemeConfig {
    pub fn new(t_final: f64, dt: f64, dx: f64) -> Result<Self> {
        let cfg = Self {
            t_final,
            dt,
            dx,
            p: 1.0,
            substeps: 4,
            record_every: 1,
            quadrature: 2,
            origin: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_quadrature(mut self, q: usize) -> Self {
        self.quadrature = q;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T", self.t_final), ("dt", self.dt), ("dx", self.dx)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(invalid(format!("p must be >= 1, got {}", self.p)));
        }
        if self.substeps == 0 || self.record_every == 0 || self.quadrature == 0 {
            return Err(invalid("substeps, record_every and quadrature must be positive"));
        }
        self.steps().map(|_| ())
    }

    /// `T / dt`, which must be a positive integer.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > DIVISIBILITY_TOLERANCE * ratio {
            return Err(invalid(format!(
                "T / dt must be a positive integer: T = {}, dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn grid(&self, dim: usize) -> Result<GridSpec> {
        let origin = if self.origin.is_empty() {
            vec![0.0; dim]
        } else {
            self.origin.clone()
        };
        GridSpec::new(dim, self.dx, origin)
    }

    /// Whether step `k` of `steps` is stored.
    pub(crate) fn records(&self, k: usize, steps: usize) -> bool {
        k % self.record_every == 0 || k == steps
    }

    /// The same configuration with `dt` and `dx` divided by `r`, keeping the
    /// recorded timestamps.
    pub fn refined(&self, r: usize) -> Self {
        let mut fine = self.clone();
        fine.dt = self.dt / r as f64;
        fine.dx = self.dx / r as f64;
        fine.record_every = self.record_every * r;
        fine
    }
}

type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Initial datum either as a density (resampled at every resolution) or as
/// a fixed measure (projected onto every grid).
#[derive(Clone)]
pub enum InitialData {
    Density {
        f: Arc<DensityFn>,
        bbox: BoundingBox,
        quadrature: usize,
        normalize: bool,
    },
    Measure(Measure),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Density {
                bbox,
                quadrature,
                normalize,
                ..
            } => f
                .debug_struct("Density")
                .field("bbox", bbox)
                .field("quadrature", quadrature)
                .field("normalize", normalize)
                .finish_non_exhaustive(),
            InitialData::Measure(m) => f.debug_tuple("Measure").field(m).finish(),
        }
    }
}

impl InitialData {
    pub fn density<F>(f: F, bbox: BoundingBox, quadrature: usize, normalize: bool) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        InitialData::Density {
            f: Arc::new(f),
            bbox,
            quadrature,
            normalize,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialData::Density { bbox, .. } => bbox.dim(),
            InitialData::Measure(m) => m.dim(),
        }
    }

    /// The grid projection of the datum on `grid`.
    pub fn discretize(&self, grid: &GridSpec) -> Result<GriddedDensity> {
        let g = match self {
            InitialData::Density {
                f,
                bbox,
                quadrature,
                normalize,
            } => init_from_density(|x| f(x), grid, bbox, *quadrature, *normalize)?,
            InitialData::Measure(m) => grid_project(m, grid)?,
        };
        if g.len() > MAX_CELLS {
            return Err(Error::ResourceCap {
                what: "grid cells",
                count: g.len(),
                cap: MAX_CELLS,
            });
        }
        Ok(g)
    }
}
