//! Time-stepping engines.
//!
//! Every scheme freezes the velocity at the start of each interval,
//! `v_i = v[mu_{i dt}]`, and pushes the current measure forward with it:
//!
//! * particles: each atom follows the flow of `v_i`, integrated with
//!   classical RK4 substeps;
//! * Lagrangian: each square translates rigidly by `dt v_i(center)`;
//! * Eulerian: the Lagrangian translation of every cell followed by exact
//!   projection back onto the fixed grid.
//!
//! Squares and cells enter the velocity through midpoint quadrature of the
//! configured order.

mod config;
mod multi;
mod reference;

pub use config::{InitialData, SchemeConfig};
pub use multi::{
    run_multi_population, run_multiscale, MultiPopulationConfig, MultiScaleModel, PopulationModel,
};
pub use reference::{reference_solution, ReferenceKind};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{
    grid_project, project_boxes_in_units, to_quadrature, AtomCloud, GriddedDensity, Measure,
    SquareCloud, MAX_CELLS,
};
use crate::velocity::VelocityModel;

/// Which engine produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Frozen-field particle flow (semi-discrete Lagrangian).
    Particles,
    /// Translated squares (discrete Lagrangian).
    Lagrangian,
    /// Translate and project (Eulerian).
    Eulerian,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Particles => "particles",
            SchemeKind::Lagrangian => "lagrangian",
            SchemeKind::Eulerian => "eulerian",
        }
    }

    /// Accepts the names above and the scheme numbers 1, 3, 4 and 5.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "particles" | "scheme1" | "scheme3" | "1" | "3" => Ok(SchemeKind::Particles),
            "lagrangian" | "scheme4" | "4" => Ok(SchemeKind::Lagrangian),
            "eulerian" | "scheme5" | "5" => Ok(SchemeKind::Eulerian),
            other => Err(crate::error::invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Time-indexed frames of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F = Measure> {
    frames: Vec<(f64, F)>,
    pub scheme: SchemeKind,
    pub config: SchemeConfig,
}

impl<F> Trajectory<F> {
    pub fn new(scheme: SchemeKind, config: SchemeConfig) -> Self {
        Self {
            frames: Vec::new(),
            scheme,
            config,
        }
    }

    pub fn push(&mut self, time: f64, frame: F) {
        debug_assert!(self.frames.last().map_or(true, |(t, _)| *t < time));
        self.frames.push((time, frame));
    }

    pub fn frames(&self) -> &[(f64, F)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.frames[k].0
    }

    pub fn measure(&self, k: usize) -> &F {
        &self.frames[k].1
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|(t, _)| *t).collect()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn last(&self) -> Option<&(f64, F)> {
        self.frames.last()
    }

    /// Frames transformed one by one.
    pub fn map<G>(&self, mut f: impl FnMut(&F) -> G) -> Trajectory<G> {
        Trajectory {
            frames: self.frames.iter().map(|(t, m)| (*t, f(m))).collect(),
            scheme: self.scheme,
            config: self.config.clone(),
        }
    }
}

fn check_cells(count: usize) -> Result<()> {
    if count > MAX_CELLS {
        return Err(Error::ResourceCap {
            what: "squares or cells",
            count,
            cap: MAX_CELLS,
        });
    }
    Ok(())
}

/// RK4 substeps of the frozen field from every position (flattened).
pub(crate) fn advect_particles(
    field: &crate::velocity::FrozenField<'_>,
    positions: &mut [f64],
    dt: f64,
    substeps: usize,
) {
    let dim = field.dim();
    let h = dt / substeps as f64;
    positions.par_chunks_mut(dim).for_each(|x| {
        let mut k1 = vec![0.0; dim];
        let mut k2 = vec![0.0; dim];
        let mut k3 = vec![0.0; dim];
        let mut k4 = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..substeps {
            field.eval_into(x, &mut k1);
            for d in 0..dim {
                y[d] = x[d] + 0.5 * h * k1[d];
            }
            field.eval_into(&y, &mut k2);
            for d in 0..dim {
                y[d] = x[d] + 0.5 * h * k2[d];
            }
            field.eval_into(&y, &mut k3);
            for d in 0..dim {
                y[d] = x[d] + h * k3[d];
            }
            field.eval_into(&y, &mut k4);
            for d in 0..dim {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
    });
}

/// One frozen-field step of the particle scheme.
pub fn step_scheme1(state: &AtomCloud, model: &VelocityModel, dt: f64, substeps: usize) -> AtomCloud {
    let field = model.freeze(state);
    let mut next = state.clone();
    advect_particles(&field, next.positions_mut(), dt, substeps);
    next
}

/// Particle scheme: frozen field per interval, RK4 flow inside it.
pub fn run_scheme1_particles(mu0: &AtomCloud, model: &VelocityModel, cfg: &SchemeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if mu0.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let steps = cfg.steps()?;
    let mut traj = Trajectory::new(SchemeKind::Particles, cfg.clone());
    let mut state = mu0.clone();
    traj.push(0.0, Measure::Atoms(state.clone()));
    for k in 1..=steps {
        state = step_scheme1(&state, model, cfg.dt, cfg.substeps);
        if state.positions().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("particle positions"));
        }
        if cfg.records(k, steps) {
            traj.push(k as f64 * cfg.dt, Measure::Atoms(state.clone()));
        }
    }
    Ok(traj)
}

/// Velocities at the square centers against the quadrature of the cloud.
fn center_velocities(state: &SquareCloud, model: &VelocityModel, q: usize) -> Result<Vec<f64>> {
    let atoms = if model.interaction.is_some() {
        state.to_quadrature(q)?
    } else {
        AtomCloud::empty(state.dim())
    };
    model.freeze(&atoms).eval_many(state.centers())
}

/// One Lagrangian step: every square moves by `dt v(center)`.
pub fn step_scheme4(state: &SquareCloud, model: &VelocityModel, dt: f64, q: usize) -> Result<SquareCloud> {
    let v = center_velocities(state, model, q)?;
    let mut next = state.clone();
    for (c, vi) in next.centers_mut().iter_mut().zip(&v) {
        *c += dt * vi;
    }
    Ok(next)
}

/// Lagrangian scheme started from the grid projection of `mu0`.
pub fn run_scheme4(mu0: &Measure, model: &VelocityModel, cfg: &SchemeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid(mu0.dim())?;
    let initial = grid_project(mu0, &grid)?;
    check_cells(initial.len())?;
    let steps = cfg.steps()?;
    let mut state = SquareCloud::from_grid(&initial);
    let mut traj = Trajectory::new(SchemeKind::Lagrangian, cfg.clone());
    traj.push(0.0, Measure::Squares(state.clone()));
    for k in 1..=steps {
        state = step_scheme4(&state, model, cfg.dt, cfg.quadrature)?;
        if cfg.records(k, steps) {
            traj.push(k as f64 * cfg.dt, Measure::Squares(state.clone()));
        }
    }
    Ok(traj)
}

/// One Eulerian step: translate every cell by `dt v(center)` and project
/// the translated cells back onto the grid by exact overlaps.
pub fn step_scheme5(state: &GriddedDensity, model: &VelocityModel, dt: f64, q: usize) -> Result<GriddedDensity> {
    let squares = SquareCloud::from_grid(state);
    let v = center_velocities(&squares, model, q)?;
    let grid = state.grid();
    let dim = grid.dim();
    let dx = grid.cell_side();
    let mut lows = Vec::with_capacity(v.len());
    for ((k, _), vk) in state.iter().zip(v.chunks_exact(dim)) {
        for d in 0..dim {
            lows.push(k[d] as f64 + dt * vk[d] / dx);
        }
    }
    let next = project_boxes_in_units(grid, &lows, 1.0, squares.masses());
    check_cells(next.len())?;
    Ok(next)
}

/// Eulerian scheme started from the grid projection of `mu0`.
pub fn run_scheme5(mu0: &Measure, model: &VelocityModel, cfg: &SchemeConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid(mu0.dim())?;
    let mut state = grid_project(mu0, &grid)?;
    check_cells(state.len())?;
    let steps = cfg.steps()?;
    let mut traj = Trajectory::new(SchemeKind::Eulerian, cfg.clone());
    traj.push(0.0, Measure::Grid(state.clone()));
    for k in 1..=steps {
        state = step_scheme5(&state, model, cfg.dt, cfg.quadrature)?;
        if cfg.records(k, steps) {
            traj.push(k as f64 * cfg.dt, Measure::Grid(state.clone()));
        }
    }
    Ok(traj)
}

/// Runs the requested engine. The particle engine starts from the
/// quadrature of the grid projection, i.e. with initial discretization in space.
pub fn run_scheme(kind: SchemeKind, mu0: &Measure, model: &VelocityModel, cfg: &SchemeConfig) -> Result<Trajectory> {
    match kind {
        SchemeKind::Particles => {
            let grid = cfg.grid(mu0.dim())?;
            let g = grid_project(mu0, &grid)?;
            check_cells(g.len())?;
            let atoms = to_quadrature(&Measure::Grid(g), cfg.quadrature)?;
            run_scheme1_particles(&atoms, model, cfg)
        }
        SchemeKind::Lagrangian => run_scheme4(mu0, model, cfg),
        SchemeKind::Eulerian => run_scheme5(mu0, model, cfg),
    }
}
