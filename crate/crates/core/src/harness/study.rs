use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::RunConfig;
use crate::bounds::{
    random_cloud, scheme3_error, scheme4_gap, scheme5_gap, stability_constant, verify_flow_bounds, BoundInputs,
    BoundReport, GatedBound,
};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::schemes::{reference_solution, run_scheme, ReferenceKind, SchemeConfig, SchemeKind, Trajectory};
use crate::transport::trajectory_distance_matched;
use crate::velocity::HypothesisConstants;

/// Least-squares fit `log(error) = order log(dx) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// `None` when fewer than two points or any error is not positive.
pub fn fit_order(dx: &[f64], errors: &[f64]) -> Option<OrderFit> {
    if dx.len() != errors.len() || dx.len() < 2 || errors.iter().chain(dx).any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = dx.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - order * x).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(OrderFit { order, intercept, r2 })
}

/// A-priori bound on the distance between a run of `kind` at `cfg` and the
/// exact solution, for unit-mass data in dimension `n`.
///
/// Particles: the frozen-field error started from the grid projection,
/// plus the quadrature of the grid. Lagrangian: that error plus the gap to
/// square translation. Eulerian: additionally the gap to projection.
pub fn apriori_bound(kind: SchemeKind, c: &HypothesisConstants, cfg: &SchemeConfig, n: usize) -> Result<GatedBound> {
    let (t, dt, dx, p) = (cfg.t_final, cfg.dt, cfg.dx, cfg.p);
    let s3 = scheme3_error(c.k, c.m, c.l, p, t, dt, n, dx);
    let mut value = s3.value;
    let mut ok = s3.hypothesis_ok;
    match kind {
        SchemeKind::Particles => {
            value += (n as f64).sqrt() * dx / cfg.quadrature as f64 * stability_constant(t, c.l, c.k);
        }
        SchemeKind::Lagrangian | SchemeKind::Eulerian => {
            let s4 = scheme4_gap(c.l, c.k, n, t, dx, dt);
            value += s4.value;
            ok &= s4.hypothesis_ok;
            if kind == SchemeKind::Eulerian {
                value += scheme5_gap(p, c.l, c.k, n, t, dx, dt)?;
            }
        }
    }
    Ok(GatedBound {
        value,
        hypothesis_ok: ok,
    })
}

/// One rung of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub dx: f64,
    pub dt: f64,
    /// `sup_t` of the distance estimates to the reference.
    pub error: f64,
    /// Largest quadrature halo of those estimates.
    pub halo: f64,
    /// Bound on the level error plus bound on the reference error.
    pub bound: f64,
    pub hypothesis_ok: bool,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub scheme: SchemeKind,
    pub reference: ReferenceKind,
    pub refine: usize,
    pub p: f64,
    pub quadrature: usize,
    pub levels: Vec<LevelResult>,
    pub fit: Option<OrderFit>,
    #[serde(skip)]
    pub reference_seconds: f64,
}

impl ConvergenceStudy {
    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].error < w[0].error)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs every ladder level and the reference in parallel, then measures
/// each level against the reference at the level's timestamps.
pub fn run_convergence_study(cfg: &RunConfig) -> Result<ConvergenceStudy> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| Error::Config("missing `study` section".into()))?;
    let (init, model) = cfg.single()?;
    let levels = cfg.level_configs()?;
    let finest = levels.last().expect("validated ladder");
    let dim = init.dim();
    let constants = model.constants().ok();

    let run_level = |lc: &SchemeConfig| -> Result<(Trajectory, f64)> {
        let (traj, secs) = timed(|| -> Result<Trajectory> {
            let mu0 = Measure::Grid(init.discretize(&lc.grid(dim)?)?);
            run_scheme(cfg.kind, &mu0, model, lc)
        });
        Ok((traj?, secs))
    };
    let ((reference, ref_secs), runs) = rayon::join(
        || timed(|| reference_solution(&init, model, finest, study.refine, study.reference)),
        || levels.par_iter().map(run_level).collect::<Vec<_>>(),
    );
    let reference = reference?;
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let fine = finest.refined(study.refine);
    let ref_bound = match constants {
        Some(c) => match study.reference {
            ReferenceKind::Lagrangian => apriori_bound(SchemeKind::Lagrangian, &c, &fine, dim)?,
            ReferenceKind::Particles => apriori_bound(
                SchemeKind::Particles,
                &c,
                &fine.clone().with_quadrature(fine.quadrature * study.refine),
                dim,
            )?,
        },
        None => GatedBound {
            value: f64::INFINITY,
            hypothesis_ok: false,
        },
    };

    let mut results = Vec::with_capacity(levels.len());
    for (lc, (traj, secs)) in levels.iter().zip(&runs) {
        let d = trajectory_distance_matched(traj, &reference, lc.p, study.quadrature)?;
        let level_bound = match &constants {
            Some(c) => apriori_bound(cfg.kind, c, lc, dim)?,
            None => GatedBound {
                value: f64::INFINITY,
                hypothesis_ok: false,
            },
        };
        results.push(LevelResult {
            dx: lc.dx,
            dt: lc.dt,
            error: d.sup(),
            halo: d.halo(),
            bound: level_bound.value + ref_bound.value,
            hypothesis_ok: level_bound.hypothesis_ok && ref_bound.hypothesis_ok,
            seconds: *secs,
        });
    }
    let fit = fit_order(
        &results.iter().map(|l| l.dx).collect::<Vec<_>>(),
        &results.iter().map(|l| l.error).collect::<Vec<_>>(),
    );
    Ok(ConvergenceStudy {
        scheme: cfg.kind,
        reference: study.reference,
        refine: study.refine,
        p: cfg.scheme.p,
        quadrature: study.quadrature,
        levels: results,
        fit,
        reference_seconds: ref_secs,
    })
}

/// Measured-against-a-priori reports: one per study level, then the
/// randomized flow-estimate audit when the model is certified.
pub fn audit_bounds(cfg: &RunConfig, study: Option<&ConvergenceStudy>) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    let dim = cfg.dim();
    let model = cfg.model.as_ref();
    let constants = model.and_then(|m| m.constants().ok());
    if let Some(s) = study {
        for (i, l) in s.levels.iter().enumerate() {
            let c = constants.unwrap_or(HypothesisConstants {
                l: f64::NAN,
                m: f64::NAN,
                k: f64::NAN,
            });
            out.push(BoundReport {
                name: format!("{}_level_{i}", s.scheme.name()),
                inputs: BoundInputs {
                    l: c.l,
                    m: c.m,
                    k: c.k,
                    p: s.p,
                    t: cfg.scheme.t_final,
                    dt: l.dt,
                    dx: l.dx,
                    n: dim,
                    mass: 1.0,
                },
                bound: l.bound,
                measured: Some(l.error),
                slack: 2.0 * l.halo,
                hypothesis_ok: l.hypothesis_ok,
            });
        }
    }
    if let (Some(a), Some(m), Some(_)) = (&cfg.audit, model, constants) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pairs: Vec<_> = (0..a.pairs)
            .map(|_| {
                let mu = random_cloud(&mut rng, a.atoms, dim, a.spread);
                let nu = random_cloud(&mut rng, a.atoms, dim, a.spread);
                (mu, nu)
            })
            .collect();
        out.extend(verify_flow_bounds(m, &pairs, &a.times, cfg.scheme.p)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_power_law() {
        let dx = [0.2, 0.1, 0.05];
        let err: Vec<f64> = dx.iter().map(|d| 3.0 * d * d).collect();
        let f = fit_order(&dx, &err).unwrap();
        assert!((f.order - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(fit_order(&dx, &[1.0, 0.0, 1.0]).is_none());
    }
}
