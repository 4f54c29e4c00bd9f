//! With `f = 1` the map `mu -> v[mu](0)` is discontinuous in `W_p`.
//!
//! `mu_t = t * uniform(B_eps(x~)) + (1 - t) * uniform(C)`, where the ball
//! sits in the annulus `r <= |y| < R` and the unit square `C` lies outside
//! `B_R(0)`. For `t > 0` the kernel at the origin only sees the ball, whose
//! weighted center of mass is at distance at least `r`; for `t = 0` it sees
//! nothing.

use super::{eval_interaction, InteractionSpec, KernelSpec, Weight};
use crate::error::{invalid, Result};
use crate::measure::AtomCloud;
use crate::transport::wasserstein_atoms;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Row {
    pub t: f64,
    /// `|v[mu_t](0)|`.
    pub speed: f64,
    /// `s t^(1/p)`.
    pub bound: f64,
    /// Exact `W_p` between the atomic surrogates of `mu_0` and `mu_t`.
    pub measured: f64,
    /// Bound on the surrogate error of `measured`.
    pub halo: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Report {
    pub r: f64,
    pub eps: f64,
    pub radius: f64,
    pub p: f64,
    /// Largest distance between a point of `C` and a point of the ball.
    pub s: f64,
    pub rows: Vec<F1Row>,
}

impl F1Report {
    /// Whether every row satisfies the expected inequalities.
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|row| {
            let speed_ok = if row.t == 0.0 {
                row.speed == 0.0
            } else {
                row.speed >= self.r
            };
            speed_ok && row.measured <= row.bound + row.halo
        })
    }
}

/// Equal-mass atoms on the lattice of spacing `h` inside the ball.
fn ball_atoms(center: &[f64; 2], eps: f64, h: f64) -> AtomCloud {
    let k = (eps / h).ceil() as i64;
    let mut pts = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let (dx, dy) = (i as f64 * h, j as f64 * h);
            if dx * dx + dy * dy < eps * eps {
                pts.extend([center[0] + dx, center[1] + dy]);
            }
        }
    }
    let count = pts.len() / 2;
    AtomCloud::new(2, pts, vec![1.0 / count as f64; count]).expect("finite lattice")
}

/// Midpoint atoms of the unit square centered at `center`.
fn square_atoms(center: &[f64; 2], q: usize) -> AtomCloud {
    let mut pts = Vec::with_capacity(2 * q * q);
    for i in 0..q {
        for j in 0..q {
            pts.push(center[0] - 0.5 + (i as f64 + 0.5) / q as f64);
            pts.push(center[1] - 0.5 + (j as f64 + 0.5) / q as f64);
        }
    }
    AtomCloud::new(2, pts, vec![1.0 / (q * q) as f64; q * q]).expect("finite lattice")
}

/// Reports `|v[mu_t](0)|` and `W_p(mu_0, mu_t)` for every `t` in `t_list`
/// in the plane, with a unit-peak cone kernel of radius `radius`.
///
/// `resolution` is the number of lattice points across the ball diameter
/// and across `C`; it controls the atomic surrogates only.
pub fn f1_discontinuity_demo(
    r: f64,
    eps: f64,
    radius: f64,
    t_list: &[f64],
    p: f64,
    resolution: usize,
) -> Result<F1Report> {
    if !(r > 0.0) || !(eps > 0.0) || !(radius > 0.0) {
        return Err(invalid("r, eps and R must be positive"));
    }
    if r + 2.0 * eps >= radius {
        return Err(invalid(format!(
            "the ball B_eps((r + eps, 0)) must lie inside the kernel support: need r + 2 eps < R, got {} >= {radius}",
            r + 2.0 * eps
        )));
    }
    if resolution < 2 {
        return Err(invalid("resolution must be at least 2"));
    }
    if let Some(t) = t_list.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
        return Err(invalid(format!("t must lie in [0, 1], got {t}")));
    }
    let spec = InteractionSpec::new(KernelSpec::cone(radius, 1.0)?, Weight::Constant, 1.0)?;
    let x_tilde = [r + eps, 0.0];
    let c_center = [-(radius + 1.0), 0.0];
    let h_ball = 2.0 * eps / resolution as f64;
    let ball = ball_atoms(&x_tilde, eps, h_ball);
    let square = square_atoms(&c_center, resolution);
    let s = [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]
        .iter()
        .map(|(a, b)| ((c_center[0] + a - x_tilde[0]).powi(2) + (c_center[1] + b - x_tilde[1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
        + eps;
    // Each atom represents a cell of side h around it: sqrt(2) h per side.
    let halo = 2f64.sqrt() * (h_ball + 1.0 / resolution as f64);
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let mu_t = ball.scaled(t).union(&square.scaled(1.0 - t))?;
        let v = eval_interaction(&mu_t, &[0.0, 0.0], &spec)?;
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let measured = if t == 0.0 {
            0.0
        } else {
            wasserstein_atoms(&square, &mu_t, p)?.value
        };
        rows.push(F1Row {
            t,
            speed,
            bound: s * t.powf(1.0 / p),
            measured,
            halo,
        });
    }
    Ok(F1Report {
        r,
        eps,
        radius,
        p,
        s,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_jumps_at_zero() {
        let report = f1_discontinuity_demo(0.2, 0.05, 0.5, &[0.0, 0.01, 0.1], 1.0, 8).unwrap();
        assert_eq!(report.rows[0].speed, 0.0);
        assert!(report.rows[1].speed >= 0.2);
        assert!(report.passes());
    }

    #[test]
    fn infeasible_geometry_is_rejected() {
        assert!(f1_discontinuity_demo(0.4, 0.1, 0.5, &[0.1], 1.0, 8).is_err());
    }
}
