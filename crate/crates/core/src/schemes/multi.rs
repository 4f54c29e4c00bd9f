use super::{check_cells, SchemeConfig, SchemeKind, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::measure::{
    grid_project, project_boxes_in_units, to_quadrature, AtomCloud, GriddedDensity, Measure,
    MultiScaleMeasure, PopulationVector, SquareCloud,
};
use crate::velocity::VelocityModel;

/// Velocity of one population: its own model, applied to the weighted sum
/// `sum_j weights[j] mu_j` of the whole population vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    pub model: VelocityModel,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPopulationConfig {
    pub populations: Vec<PopulationModel>,
    pub scheme: SchemeConfig,
}

/// Discrete state of one population.
#[derive(Debug, Clone)]
enum State {
    Squares(SquareCloud),
    Grid(GriddedDensity),
}

impl State {
    fn start(mu: &Measure, kind: SchemeKind, cfg: &SchemeConfig) -> Result<Self> {
        let grid = cfg.grid(mu.dim())?;
        let g = grid_project(mu, &grid)?;
        check_cells(g.len())?;
        match kind {
            SchemeKind::Lagrangian => Ok(State::Squares(SquareCloud::from_grid(&g))),
            SchemeKind::Eulerian => Ok(State::Grid(g)),
            SchemeKind::Particles => Err(invalid("population runs use the Lagrangian or Eulerian scheme")),
        }
    }

    fn measure(&self) -> Measure {
        match self {
            State::Squares(s) => Measure::Squares(s.clone()),
            State::Grid(g) => Measure::Grid(g.clone()),
        }
    }

    fn atoms(&self, q: usize) -> Result<AtomCloud> {
        to_quadrature(&self.measure(), q)
    }

    fn centers(&self) -> SquareCloud {
        match self {
            State::Squares(s) => s.clone(),
            State::Grid(g) => SquareCloud::from_grid(g),
        }
    }

    /// Moves every piece by `dt` times its velocity (flattened, one per piece).
    fn advance(&self, v: &[f64], dt: f64) -> Result<Self> {
        match self {
            State::Squares(s) => {
                let mut next = s.clone();
                for (c, vi) in next.centers_mut().iter_mut().zip(v) {
                    *c += dt * vi;
                }
                Ok(State::Squares(next))
            }
            State::Grid(g) => {
                let grid = g.grid();
                let dim = grid.dim();
                let mut lows = Vec::with_capacity(v.len());
                let mut masses = Vec::with_capacity(g.len());
                for ((k, m), vk) in g.iter().zip(v.chunks_exact(dim)) {
                    for d in 0..dim {
                        lows.push(k[d] as f64 + dt * vk[d] / grid.cell_side());
                    }
                    masses.push(m);
                }
                let next = project_boxes_in_units(grid, &lows, 1.0, &masses);
                check_cells(next.len())?;
                Ok(State::Grid(next))
            }
        }
    }
}

/// Weighted sum of atom clouds, skipping zero weights.
fn weighted_union(dim: usize, parts: &[(&AtomCloud, f64)]) -> Result<AtomCloud> {
    let mut out = AtomCloud::empty(dim);
    for (cloud, w) in parts {
        if *w != 0.0 {
            out = out.union(&cloud.scaled(*w))?;
        }
    }
    Ok(out)
}

/// Synchronized stepping of `N` populations: every velocity is evaluated
/// against the current vector before any population moves.
pub fn run_multi_population(
    mu0: &PopulationVector,
    mpc: &MultiPopulationConfig,
    kind: SchemeKind,
) -> Result<Vec<Trajectory>> {
    let cfg = &mpc.scheme;
    cfg.validate()?;
    let n_pop = mu0.len();
    if mpc.populations.len() != n_pop {
        return Err(invalid(format!(
            "{} population models for {n_pop} populations",
            mpc.populations.len()
        )));
    }
    if let Some(pm) = mpc.populations.iter().find(|pm| pm.weights.len() != n_pop) {
        return Err(invalid(format!(
            "interaction weights {:?} do not match {n_pop} populations",
            pm.weights
        )));
    }
    let dim = mu0.dim();
    let steps = cfg.steps()?;
    let mut states = mu0
        .populations()
        .iter()
        .map(|mu| State::start(mu, kind, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut trajs: Vec<Trajectory> = (0..n_pop).map(|_| Trajectory::new(kind, cfg.clone())).collect();
    for (traj, s) in trajs.iter_mut().zip(&states) {
        traj.push(0.0, s.measure());
    }
    for k in 1..=steps {
        let atoms = states
            .iter()
            .map(|s| s.atoms(cfg.quadrature))
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::with_capacity(n_pop);
        for (i, pm) in mpc.populations.iter().enumerate() {
            let parts: Vec<(&AtomCloud, f64)> = atoms.iter().zip(pm.weights.iter().copied()).collect();
            let crowd = if pm.model.interaction.is_some() {
                weighted_union(dim, &parts)?
            } else {
                AtomCloud::empty(dim)
            };
            let v = pm.model.freeze(&crowd).eval_many(states[i].centers().centers())?;
            next.push(states[i].advance(&v, cfg.dt)?);
        }
        states = next;
        if cfg.records(k, steps) {
            for (traj, s) in trajs.iter_mut().zip(&states) {
                traj.push(k as f64 * cfg.dt, s.measure());
            }
        }
    }
    Ok(trajs)
}

/// A single model read by both parts of a multi-scale measure, which enter
/// the crowd with separate weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleModel {
    pub model: VelocityModel,
    pub ac_weight: f64,
    pub singular_weight: f64,
}

/// The absolutely continuous part follows the chosen grid scheme, every
/// Dirac atom takes the step `x += dt v(x)` in the same frozen field. No
/// mass moves between the parts.
pub fn run_multiscale(
    m0: &MultiScaleMeasure,
    msm: &MultiScaleModel,
    cfg: &SchemeConfig,
    kind: SchemeKind,
) -> Result<Trajectory<MultiScaleMeasure>> {
    cfg.validate()?;
    let dim = m0.dim();
    let steps = cfg.steps()?;
    let mut ac = State::start(&m0.ac, kind, cfg)?;
    let mut atoms = m0.singular.clone();
    let mut traj = Trajectory::new(kind, cfg.clone());
    let frame = |ac: &State, atoms: &AtomCloud| MultiScaleMeasure {
        ac: ac.measure(),
        singular: atoms.clone(),
    };
    traj.push(0.0, frame(&ac, &atoms));
    for k in 1..=steps {
        let crowd = if msm.model.interaction.is_some() {
            let ac_atoms = ac.atoms(cfg.quadrature)?;
            weighted_union(dim, &[(&ac_atoms, msm.ac_weight), (&atoms, msm.singular_weight)])?
        } else {
            AtomCloud::empty(dim)
        };
        let field = msm.model.freeze(&crowd);
        let v_ac = field.eval_many(ac.centers().centers())?;
        let v_atoms = field.eval_many(atoms.positions())?;
        ac = ac.advance(&v_ac, cfg.dt)?;
        for (x, v) in atoms.positions_mut().iter_mut().zip(&v_atoms) {
            *x += cfg.dt * v;
        }
        if atoms.positions().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("atom positions"));
        }
        if cfg.records(k, steps) {
            traj.push(k as f64 * cfg.dt, frame(&ac, &atoms));
        }
    }
    Ok(traj)
}
