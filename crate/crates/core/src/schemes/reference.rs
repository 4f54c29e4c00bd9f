use serde::Serialize;

use super::{run_scheme1_particles, run_scheme4, InitialData, SchemeConfig, Trajectory};
use crate::error::{invalid, Result};
use crate::measure::{to_quadrature, Measure};
use crate::velocity::VelocityModel;

/// Engine used for a fine reference run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    /// Lagrangian squares at `dx / r`, `dt / r`.
    Lagrangian,
    /// Particles at quadrature order `q r` of the fine grid, `dt / r`.
    Particles,
}

/// A run `r` times finer than `cfg` in space and time, recorded at the
/// timestamps `cfg` records.
pub fn reference_solution(
    mu0: &InitialData,
    model: &VelocityModel,
    cfg: &SchemeConfig,
    r: usize,
    kind: ReferenceKind,
) -> Result<Trajectory> {
    if r < 2 {
        return Err(invalid(format!("refinement factor must be at least 2, got {r}")));
    }
    cfg.validate()?;
    let fine = cfg.refined(r);
    let grid = fine.grid(mu0.dim())?;
    let initial = Measure::Grid(mu0.discretize(&grid)?);
    match kind {
        ReferenceKind::Lagrangian => run_scheme4(&initial, model, &fine),
        ReferenceKind::Particles => {
            let atoms = to_quadrature(&initial, fine.quadrature * r)?;
            if atoms.len() > crate::transport::MAX_ATOMS * 25 {
                return Err(crate::error::Error::ResourceCap {
                    what: "reference particles",
                    count: atoms.len(),
                    cap: crate::transport::MAX_ATOMS * 25,
                });
            }
            run_scheme1_particles(&atoms, model, &fine)
        }
    }
}
