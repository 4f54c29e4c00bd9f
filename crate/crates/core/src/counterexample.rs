//! A velocity that is Lipschitz in the `L^1` distance but admits two
//! solutions from the same initial datum.
//!
//! `nu_t` is a staircase of squares `Q^i_t` of side `4^-i` and density
//! `8^i / 2`, all hanging from the line `y = 1 + t^2`. The velocity
//! `v[mu] = (0, f(mu(R)))` with `R = [0, 4/3] x [1, 2]` equals `(0, 2t)` on
//! `nu_t`, so both `nu_0` held still and `t -> nu_t` solve the equation.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measure::{pairwise_sum, AtomCloud, Measure};
use crate::transport::wasserstein_atoms;

/// The rectangle whose mass drives the velocity.
pub const RECT_LO: [f64; 2] = [0.0, 1.0];
pub const RECT_HI: [f64; 2] = [4.0 / 3.0, 2.0];

/// Bisection target on `|F(nu_t) - xi|`.
const F_TOLERANCE: f64 = 1e-12;

/// The staircase family truncated after square `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NuFamily {
    pub truncation: usize,
}

impl Default for NuFamily {
    fn default() -> Self {
        Self { truncation: 20 }
    }
}

/// An axis-aligned square of uniform density, hanging from `top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StairSquare {
    /// Abscissa of the left side.
    pub x: f64,
    /// Ordinate of the upper side.
    pub top: f64,
    pub side: f64,
    pub density: f64,
}

impl StairSquare {
    pub fn mass(&self) -> f64 {
        self.density * self.side * self.side
    }

    fn overlap(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let w = (self.x + self.side).min(hi[0]) - self.x.max(lo[0]);
        let h = self.top.min(hi[1]) - (self.top - self.side).max(lo[1]);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}

/// A finite union of disjoint uniform squares in the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Staircase {
    pub squares: Vec<StairSquare>,
}

impl Staircase {
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.squares.iter().map(StairSquare::mass).collect::<Vec<_>>())
    }

    /// Every square moved by `shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Self {
        Self {
            squares: self
                .squares
                .iter()
                .map(|q| StairSquare {
                    x: q.x + shift[0],
                    top: q.top + shift[1],
                    ..*q
                })
                .collect(),
        }
    }

    /// Midpoint atoms, `q x q` per square.
    pub fn to_atoms(&self, q: usize) -> Result<AtomCloud> {
        if q == 0 {
            return Err(invalid("quadrature order must be positive"));
        }
        let mut out = AtomCloud::empty(2);
        for sq in &self.squares {
            let h = sq.side / q as f64;
            let m = sq.mass() / (q * q) as f64;
            for a in 0..q {
                for b in 0..q {
                    let x = sq.x + (a as f64 + 0.5) * h;
                    let y = sq.top - sq.side + (b as f64 + 0.5) * h;
                    out.push(&[x, y], m)?;
                }
            }
        }
        Ok(out)
    }

    /// Bound on `W_p(self, self.to_atoms(q))`.
    pub fn quadrature_halo(&self, q: usize, p: f64) -> f64 {
        let side = self.squares.iter().map(|s| s.side).fold(0.0, f64::max);
        2f64.sqrt() * side / q as f64 * self.total_mass().powf(1.0 / p)
    }
}

/// Mass of a closed axis-aligned box in the plane.
pub trait BoxMass {
    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64;
}

impl BoxMass for Staircase {
    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        pairwise_sum(
            &self
                .squares
                .iter()
                .map(|q| q.density * q.overlap(lo, hi))
                .collect::<Vec<_>>(),
        )
    }
}

impl BoxMass for Measure {
    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.mass_in_box(lo, hi)
    }
}

impl NuFamily {
    pub fn new(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(invalid("truncation must be at least 1"));
        }
        Ok(Self { truncation })
    }

    pub fn side(&self, i: usize) -> f64 {
        0.25f64.powi(i as i32)
    }

    pub fn density(&self, i: usize) -> f64 {
        0.5 * 8f64.powi(i as i32)
    }

    /// Abscissa of the left side of square `i`: the sum of the previous sides.
    pub fn left(&self, i: usize) -> f64 {
        (0..i).map(|j| self.side(j)).sum()
    }

    /// `sum_{i <= N} m_i s_i^2 = 1 - 2^-(N+1)`.
    pub fn truncated_mass(&self) -> f64 {
        1.0 - 0.5f64.powi(self.truncation as i32 + 1)
    }

    /// `F(nu_1)`, the upper end of the domain of `f`.
    pub fn f_max(&self) -> f64 {
        f_functional(&self.eval_unchecked(1.0))
    }

    fn eval_unchecked(&self, t: f64) -> Staircase {
        let top = 1.0 + t * t;
        Staircase {
            squares: (0..=self.truncation)
                .map(|i| StairSquare {
                    x: self.left(i),
                    top,
                    side: self.side(i),
                    density: self.density(i),
                })
                .collect(),
        }
    }
}

/// The staircase `nu_t`.
pub fn eval_nu(t: f64, fam: &NuFamily) -> Result<Staircase> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(fam.eval_unchecked(t))
}

/// A square with rational coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactSquare {
    pub x: Ratio<i128>,
    pub top: Ratio<i128>,
    pub side: Ratio<i128>,
}

/// `nu_t` in exact arithmetic; densities are omitted since they do not
/// depend on `t`.
pub fn eval_nu_exact(t: Ratio<i128>, fam: &NuFamily) -> Result<Vec<ExactSquare>> {
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    if t < zero || t > one {
        return Err(invalid(format!("t must lie in [0, 1], got {t}")));
    }
    let top = one + t * t;
    let mut x = zero;
    let mut out = Vec::with_capacity(fam.truncation + 1);
    for i in 0..=fam.truncation {
        let side = Ratio::new(1, 4i128.pow(i as u32));
        out.push(ExactSquare { x, top, side });
        x += side;
    }
    Ok(out)
}

/// `F(mu) = mu(R)`.
pub fn f_functional<M: BoxMass + ?Sized>(mu: &M) -> f64 {
    mu.box_mass(&RECT_LO, &RECT_HI)
}

/// `f(xi) = 2t` where `F(nu_t) = xi`, found by bisection on `t`.
pub fn f_map(xi: f64, fam: &NuFamily) -> Result<f64> {
    let hi_val = fam.f_max();
    if !(0.0..=hi_val).contains(&xi) {
        return Err(invalid(format!("xi must lie in [0, {hi_val}], got {xi}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    if xi == hi_val {
        return Ok(2.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = f_functional(&fam.eval_unchecked(mid));
        if (f - xi).abs() <= F_TOLERANCE {
            return Ok(2.0 * mid);
        }
        if f < xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}

/// `v[mu] = (0, f(F(mu)))`, a field constant in space. `F` is clamped to the
/// domain of `f`.
pub fn v_l1<M: BoxMass + ?Sized>(mu: &M, fam: &NuFamily) -> Result<[f64; 2]> {
    let xi = f_functional(mu).clamp(0.0, fam.f_max());
    Ok([0.0, f_map(xi, fam)?])
}

/// Exact `L^1` distance between two staircases, by integrating the density
/// difference over the common refinement of their rectangles.
pub fn l1_distance(a: &Staircase, b: &Staircase) -> f64 {
    let all: Vec<(&StairSquare, f64)> = a
        .squares
        .iter()
        .map(|q| (q, 1.0))
        .chain(b.squares.iter().map(|q| (q, -1.0)))
        .collect();
    let breaks = |f: &dyn Fn(&StairSquare) -> [f64; 2]| {
        let mut v: Vec<f64> = all.iter().flat_map(|(q, _)| f(q)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = breaks(&|q| [q.x, q.x + q.side]);
    let ys = breaks(&|q| [q.top - q.side, q.top]);
    let mut terms = Vec::new();
    for xw in xs.windows(2) {
        let xm = 0.5 * (xw[0] + xw[1]);
        let column: Vec<&(&StairSquare, f64)> = all
            .iter()
            .filter(|(q, _)| q.x <= xm && xm <= q.x + q.side)
            .collect();
        if column.is_empty() {
            continue;
        }
        for yw in ys.windows(2) {
            let ym = 0.5 * (yw[0] + yw[1]);
            let rho: f64 = column
                .iter()
                .filter(|(q, _)| q.top - q.side <= ym && ym <= q.top)
                .map(|(q, sign)| sign * q.density)
                .sum();
            if rho != 0.0 {
                terms.push(rho.abs() * (xw[1] - xw[0]) * (yw[1] - yw[0]));
            }
        }
    }
    pairwise_sum(&terms)
}

/// The smallest `n >= 1` with `s_n < d <= s_(n-1)`, for `0 < d <= 1`.
pub fn dyadic_band(d: f64) -> Option<usize> {
    if !(d > 0.0 && d <= 1.0) {
        return None;
    }
    let mut n = 1;
    while 0.25f64.powi(n as i32) >= d {
        n += 1;
    }
    Some(n)
}

/// `sum_{i=n}^{N} 2 m_i s_i^2`: twice the mass of the squares that a shift
/// `d > s_n` separates completely.
pub fn band_lower_bound(n: usize, fam: &NuFamily) -> f64 {
    if n > fam.truncation {
        return 0.0;
    }
    2.0 * 0.5f64.powi(n as i32) * (1.0 - 0.5f64.powi((fam.truncation - n + 1) as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Row {
    pub t: f64,
    pub s: f64,
    /// `|v[nu_t] - v[nu_s]| = 2 |t - s|`.
    pub lhs: f64,
    /// `2 ||nu_t - nu_s||_L1`.
    pub rhs: f64,
    pub band: Option<usize>,
    pub band_bound: f64,
}

impl L1Row {
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            2.0 * self.lhs / self.rhs
        }
    }

    pub fn passes(&self) -> bool {
        self.lhs <= self.rhs + 1e-9 && 0.5 * self.rhs >= self.band_bound - 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Report {
    pub rows: Vec<L1Row>,
}

impl L1Report {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(L1Row::passes)
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(L1Row::ratio).fold(0.0, f64::max)
    }
}

/// Checks `|v[nu_t] - v[nu_s]| <= 2 ||nu_t - nu_s||_L1` on every pair,
/// together with the dyadic-band lower bound on the `L^1` distance.
pub fn verify_l1_lipschitz(fam: &NuFamily, pairs: &[(f64, f64)]) -> Result<L1Report> {
    let rows = pairs
        .par_iter()
        .map(|&(t, s)| -> Result<L1Row> {
            let a = eval_nu(t, fam)?;
            let b = eval_nu(s, fam)?;
            let va = v_l1(&a, fam)?;
            let vb = v_l1(&b, fam)?;
            let band = dyadic_band((t * t - s * s).abs());
            Ok(L1Row {
                t,
                s,
                lhs: (va[1] - vb[1]).abs(),
                rhs: 2.0 * l1_distance(&a, &b),
                band,
                band_bound: band.map_or(0.0, |n| band_lower_bound(n, fam)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(L1Report { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpRow {
    pub t: f64,
    pub s: f64,
    /// Transport estimate between the quadratures of `nu_t` and `nu_s`.
    pub measured: f64,
    /// `|t^2 - s^2| mass^(1/p)`, the cost of the vertical shift.
    pub exact: f64,
    pub halo: f64,
    /// `2 / (t + s)`.
    pub ratio: f64,
}

impl WpRow {
    pub fn passes(&self) -> bool {
        (self.measured - self.exact).abs() <= self.halo + 1e-9 && (self.t + self.s > 0.02 || self.ratio > 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpReport {
    pub p: f64,
    pub rows: Vec<WpRow>,
}

impl WpReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(WpRow::passes)
    }
}

/// Measures `W_p(nu_t, nu_s)` on pairs shrinking to zero, where the ratio
/// `2|t - s| / W_p = 2 / (t + s)` grows without bound.
pub fn verify_wp_blowup(fam: &NuFamily, p: f64, pairs: &[(f64, f64)], q: usize) -> Result<WpReport> {
    let rows = pairs
        .par_iter()
        .map(|&(t, s)| -> Result<WpRow> {
            if t == s {
                return Err(invalid("pairs must have distinct times"));
            }
            let a = eval_nu(t, fam)?;
            let b = eval_nu(s, fam)?;
            let measured = wasserstein_atoms(&a.to_atoms(q)?, &b.to_atoms(q)?, p)?.value;
            Ok(WpRow {
                t,
                s,
                measured,
                exact: (t * t - s * s).abs() * a.total_mass().powf(1.0 / p),
                halo: a.quadrature_halo(q, p) + b.quadrature_halo(q, p),
                ratio: 2.0 / (t + s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WpReport { p, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonUniquenessReport {
    pub dt: f64,
    pub steps: usize,
    /// Every frame of the frozen-velocity run from `nu_0` equals `nu_0` bit for bit.
    pub stationary_ok: bool,
    /// `nu_t` equals `nu_0` raised by `t^2` in exact arithmetic at every step.
    pub shift_ok: bool,
    /// `|v[nu_t] - (0, 2t)| <= 1e-9` at every step.
    pub velocity_ok: bool,
    pub max_velocity_error: f64,
    #[serde(skip)]
    pub stationary: Vec<(f64, Staircase)>,
    #[serde(skip)]
    pub moving: Vec<(f64, Staircase)>,
}

impl NonUniquenessReport {
    pub fn passes(&self) -> bool {
        self.stationary_ok && self.shift_ok && self.velocity_ok
    }
}

/// Exhibits two solutions from `nu_0` on `[0, t_final]`: the frozen-field
/// scheme run from `nu_0`, which never moves, and the family `nu_t`.
pub fn demonstrate_nonuniqueness(fam: &NuFamily, t_final: f64, dt: f64) -> Result<NonUniquenessReport> {
    if !(t_final > 0.0 && t_final <= 1.0) || !(dt > 0.0) {
        return Err(invalid(format!("need 0 < T <= 1 and dt > 0, got T = {t_final}, dt = {dt}")));
    }
    let ratio = t_final / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio {
        return Err(invalid(format!(
            "T / dt must be a positive integer: T = {t_final}, dt = {dt}"
        )));
    }
    let steps = steps as usize;
    let nu0 = eval_nu(0.0, fam)?;

    let mut stationary = vec![(0.0, nu0.clone())];
    let mut state = nu0.clone();
    for k in 1..=steps {
        let v = v_l1(&state, fam)?;
        state = state.translated([dt * v[0], dt * v[1]]);
        stationary.push((k as f64 * dt, state.clone()));
    }
    let stationary_ok = stationary.iter().all(|(_, s)| *s == nu0);

    // Times k / steps * T with T approximated by a rational of denominator 2^20.
    let t_scale = (t_final * (1 << 20) as f64).round() as i128;
    let exact0 = eval_nu_exact(Ratio::from_integer(0), fam)?;
    let mut shift_ok = true;
    let mut max_velocity_error: f64 = 0.0;
    let mut moving = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t_exact = Ratio::new(k as i128 * t_scale, steps as i128 * (1 << 20));
        let shifted: Vec<ExactSquare> = exact0
            .iter()
            .map(|q| ExactSquare {
                top: q.top + t_exact * t_exact,
                ..*q
            })
            .collect();
        shift_ok &= eval_nu_exact(t_exact, fam)? == shifted;
        let t = k as f64 * dt;
        let nu = eval_nu(t.min(1.0), fam)?;
        let v = v_l1(&nu, fam)?;
        max_velocity_error = max_velocity_error.max(v[0].abs()).max((v[1] - 2.0 * t).abs());
        moving.push((t, nu));
    }
    Ok(NonUniquenessReport {
        dt,
        steps,
        stationary_ok,
        shift_ok,
        velocity_ok: max_velocity_error <= 1e-9,
        max_velocity_error,
        stationary,
        moving,
    })
}

/// `count` pairs `(t, s)` with `0 <= s < t <= 1`, uniform in the triangle.
pub fn sample_pairs<R: rand::Rng>(rng: &mut R, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| loop {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            if a != b {
                break (a.max(b), a.min(b));
            }
        })
        .collect()
}

/// Pairs `(t, s)` shrinking towards zero, ending with two moderate ones.
pub fn shrinking_pairs() -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = [0.01, 0.005, 0.002, 0.001]
        .iter()
        .flat_map(|&t| [(t, 0.0), (t, 0.5 * t)])
        .collect();
    out.extend([(0.2, 0.1), (0.5, 0.25)]);
    out
}
