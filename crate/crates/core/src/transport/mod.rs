//! Exact discrete Wasserstein distances.
//!
//! `wasserstein_atoms` solves the Kantorovich problem between two atomic
//! measures with a network simplex and certifies the result with a dual
//! bound. Two independent oracles are provided for cross-checking: brute
//! force over permutations and the one-dimensional quantile coupling.

mod oracle;
mod simplex;

pub use oracle::{wasserstein_1d, wasserstein_bruteforce};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::measure::{pairwise_sum, to_quadrature, AtomCloud, Measure};
use crate::schemes::Trajectory;
use simplex::{CostFn, DenseCost, Simplex};

/// Largest atom count per side accepted by the exact solver.
pub const MAX_ATOMS: usize = 20_000;
/// Largest cost matrix kept in memory; bigger instances evaluate costs on demand.
const DENSE_LIMIT: usize = 25_000_000;
/// Relative tolerance for the equal-mass precondition.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A coupling given by its positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(source index, target index, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// Achieved `sum mass * |x - y|^p`.
    pub cost_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinResult {
    pub value: f64,
    pub plan: TransportPlan,
    pub p: f64,
}

/// `|x - y|^p`, with the square root avoided for `p = 2`.
#[inline]
pub(crate) fn ground_cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("exponent p must be a finite number >= 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn check_mass_match(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > MASS_TOLERANCE * a.abs().max(b.abs()) {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

struct LazyCost<'a> {
    a: &'a AtomCloud,
    b: &'a AtomCloud,
    ia: &'a [usize],
    ib: &'a [usize],
    p: f64,
}

impl CostFn for LazyCost<'_> {
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        ground_cost(self.a.position(self.ia[i]), self.b.position(self.ib[j]), self.p)
    }
}

/// Total order on clouds, used to pose `(a, b)` and `(b, a)` as one instance.
fn cloud_cmp(a: &AtomCloud, b: &AtomCloud) -> std::cmp::Ordering {
    let seq = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    (a.dim(), a.len())
        .cmp(&(b.dim(), b.len()))
        .then_with(|| seq(a.positions(), b.positions()))
        .then_with(|| seq(a.masses(), b.masses()))
}

/// Exact `W_p` between two atomic measures of equal mass.
///
/// The value is exactly symmetric: both orientations solve the same
/// instance and the plan is transposed back.
pub fn wasserstein_atoms(a: &AtomCloud, b: &AtomCloud, p: f64) -> Result<WassersteinResult> {
    if cloud_cmp(b, a).is_lt() {
        let mut r = solve_atoms(b, a, p)?;
        for e in &mut r.plan.entries {
            *e = (e.1, e.0, e.2);
        }
        r.plan.entries.sort_by_key(|&(i, j, _)| (i, j));
        return Ok(r);
    }
    solve_atoms(a, b, p)
}

fn solve_atoms(a: &AtomCloud, b: &AtomCloud, p: f64) -> Result<WassersteinResult> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    for c in [a, b] {
        if c.len() > MAX_ATOMS {
            return Err(Error::ResourceCap {
                what: "atoms per side",
                count: c.len(),
                cap: MAX_ATOMS,
            });
        }
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if !(ma > 0.0) || !(mb > 0.0) {
        return Err(Error::EmptyMeasure);
    }
    check_mass_match(ma, mb)?;

    // Zero-mass atoms do not take part; indices are mapped back afterwards.
    let ia: Vec<usize> = (0..a.len()).filter(|&i| a.mass(i) > 0.0).collect();
    let ib: Vec<usize> = (0..b.len()).filter(|&j| b.mass(j) > 0.0).collect();
    let supply: Vec<f64> = ia.iter().map(|&i| a.mass(i)).collect();
    let mut demand: Vec<f64> = ib.iter().map(|&j| b.mass(j)).collect();
    balance(&supply, &mut demand);

    let lazy = LazyCost {
        a,
        b,
        ia: &ia,
        ib: &ib,
        p,
    };
    let (m, n) = (ia.len(), ib.len());
    let nodes = m + n;
    let max_pivots = 10_000 + 1_000 * nodes;
    let solution = if m * n <= DENSE_LIMIT {
        let data: Vec<f64> = (0..m * n).map(|e| lazy.cost(e / n, e % n)).collect();
        let dense = DenseCost { n, data };
        let max_cost = dense.data.iter().copied().fold(0.0, f64::max);
        let sol = Simplex::new(&supply, &demand, &dense, max_cost).solve(max_pivots)?;
        certify(&sol, &supply, &demand, &dense)?;
        sol
    } else {
        let max_cost = (0..m)
            .into_par_iter()
            .map(|i| (0..n).map(|j| lazy.cost(i, j)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        let sol = Simplex::new(&supply, &demand, &lazy, max_cost).solve(max_pivots)?;
        certify(&sol, &supply, &demand, &lazy)?;
        sol
    };

    let entries: Vec<(usize, usize, f64)> = solution
        .flows
        .iter()
        .map(|&(i, j, f)| (ia[i], ib[j], f))
        .collect();
    let terms: Vec<f64> = solution
        .flows
        .iter()
        .map(|&(i, j, f)| f * lazy.cost(i, j))
        .collect();
    let cost_p = pairwise_sum(&terms).max(0.0);
    Ok(WassersteinResult {
        value: cost_p.powf(1.0 / p),
        plan: TransportPlan { entries, cost_p },
        p,
    })
}

/// Moves the rounding discrepancy of the two totals onto the largest sink.
fn balance(supply: &[f64], demand: &mut [f64]) {
    let gap = pairwise_sum(supply) - pairwise_sum(demand);
    if gap != 0.0 {
        let (k, _) = demand
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &d)| if d > acc.1 { (k, d) } else { acc });
        demand[k] = (demand[k] + gap).max(0.0);
    }
}

/// Checks primal feasibility and the duality gap of a solver result.
fn certify<C: CostFn>(sol: &simplex::Solution, supply: &[f64], demand: &[f64], cost: &C) -> Result<()> {
    let (m, n) = (supply.len(), demand.len());
    let mut rows = vec![0.0; m];
    let mut cols = vec![0.0; n];
    let mut primal_terms = Vec::with_capacity(sol.flows.len());
    for &(i, j, f) in &sol.flows {
        rows[i] += f;
        cols[j] += f;
        primal_terms.push(f * cost.cost(i, j));
    }
    let total = pairwise_sum(supply);
    let feas_tol = 1e-10 * total;
    for (r, s) in rows.iter().zip(supply) {
        if (r - s).abs() > feas_tol {
            return Err(Error::Solver(format!("row sum {r} differs from supply {s}")));
        }
    }
    for (c, d) in cols.iter().zip(demand) {
        if (c - d).abs() > feas_tol {
            return Err(Error::Solver(format!("column sum {c} differs from demand {d}")));
        }
    }
    let primal = pairwise_sum(&primal_terms);
    // Dual feasible pair: u_i from the tree, v_j the tightest value it allows.
    let pi = &sol.potentials;
    let reference = pi[0];
    let u: Vec<f64> = (0..m).map(|i| reference - pi[i]).collect();
    let v: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| (0..m).map(|i| cost.cost(i, j) - u[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let dual_terms: Vec<f64> = (0..m)
        .map(|i| supply[i] * u[i])
        .chain((0..n).map(|j| demand[j] * v[j]))
        .collect();
    let dual = pairwise_sum(&dual_terms);
    let gap = primal - dual;
    if gap > 1e-10 * (1.0 + primal.abs()) {
        return Err(Error::Solver(format!(
            "duality gap {gap:e} exceeds tolerance (primal {primal})"
        )));
    }
    Ok(())
}

/// A discretization-aware distance between two measures: the true `W_p`
/// lies within `halo` of `estimate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureDistance {
    pub estimate: f64,
    pub halo: f64,
}

impl MeasureDistance {
    pub fn lower(&self) -> f64 {
        (self.estimate - self.halo).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.estimate + self.halo
    }
}

/// `W_p` between two measures of any representation, via midpoint
/// quadrature of order `q` on their squares or cells.
///
/// One-dimensional inputs are solved with the quantile coupling, which is
/// exact and much faster than the network simplex.
pub fn wasserstein_measures(a: &Measure, b: &Measure, p: f64, q: usize) -> Result<MeasureDistance> {
    measure_distance(a, b, p, q, q)
}

/// As [`wasserstein_measures`], but only the coarser side gets order `q`;
/// the finer side gets the least order whose sub-square side does not
/// exceed the coarser one's. A fine reference is then not sampled beyond
/// the resolution the halo already allows.
pub fn wasserstein_measures_matched(a: &Measure, b: &Measure, p: f64, q: usize) -> Result<MeasureDistance> {
    if q == 0 {
        return Err(invalid("quadrature order must be at least 1"));
    }
    let (sa, sb) = (a.piece_side(), b.piece_side());
    let h = sa.max(sb) / q as f64;
    let order = |side: f64| if h > 0.0 { ((side / h).ceil() as usize).clamp(1, q) } else { q };
    measure_distance(a, b, p, order(sa), order(sb))
}

fn measure_distance(a: &Measure, b: &Measure, p: f64, oa: usize, ob: usize) -> Result<MeasureDistance> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let qa = to_quadrature(a, oa)?;
    let qb = to_quadrature(b, ob)?;
    let n = a.dim() as f64;
    let mass = qa.total_mass().max(qb.total_mass());
    let halo = n.sqrt() * (a.piece_side() / oa as f64 + b.piece_side() / ob as f64) * mass.powf(1.0 / p);
    let estimate = if a.dim() == 1 {
        wasserstein_1d(&qa, &qb, p)?
    } else {
        wasserstein_atoms(&qa, &qb, p)?.value
    };
    Ok(MeasureDistance { estimate, halo })
}

/// Per-frame distances between two trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDistance {
    pub times: Vec<f64>,
    pub values: Vec<MeasureDistance>,
}

impl TrajectoryDistance {
    /// `sup_t` of the frame estimates.
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|d| d.estimate).fold(0.0, f64::max)
    }

    /// Largest halo over the compared frames.
    pub fn halo(&self) -> f64 {
        self.values.iter().map(|d| d.halo).fold(0.0, f64::max)
    }
}

/// Pairs the frames of `a` with frames of `b` at matching times.
fn matched_frames<'x>(a: &'x Trajectory, b: &'x Trajectory) -> Result<Vec<(f64, &'x Measure, &'x Measure)>> {
    let dt = a.dt().min(b.dt());
    let tol = 1e-9 * dt;
    let mut out = Vec::new();
    let mut k = 0;
    for (t, ma) in a.frames() {
        while k < b.len() && b.time(k) < t - tol {
            k += 1;
        }
        if k < b.len() && (b.time(k) - t).abs() <= tol {
            out.push((*t, ma, b.measure(k)));
        }
    }
    if out.is_empty() {
        return Err(invalid("trajectories share no timestamps"));
    }
    Ok(out)
}

/// Frame-by-frame distances at the common timestamps.
pub fn trajectory_distance_detailed(
    a: &Trajectory,
    b: &Trajectory,
    p: f64,
    q: usize,
) -> Result<TrajectoryDistance> {
    frame_distances(a, b, |x, y| wasserstein_measures(x, y, p, q))
}

/// As [`trajectory_distance_detailed`] with [`wasserstein_measures_matched`].
pub fn trajectory_distance_matched(
    a: &Trajectory,
    b: &Trajectory,
    p: f64,
    q: usize,
) -> Result<TrajectoryDistance> {
    frame_distances(a, b, |x, y| wasserstein_measures_matched(x, y, p, q))
}

fn frame_distances<F>(a: &Trajectory, b: &Trajectory, dist: F) -> Result<TrajectoryDistance>
where
    F: Fn(&Measure, &Measure) -> Result<MeasureDistance> + Sync,
{
    let pairs = matched_frames(a, b)?;
    let values = pairs
        .par_iter()
        .map(|(_, x, y)| dist(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryDistance {
        times: pairs.iter().map(|(t, _, _)| *t).collect(),
        values,
    })
}

/// `sup_t W_p(a_t, b_t)` over the common timestamps.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, p: f64, q: usize) -> Result<f64> {
    Ok(trajectory_distance_detailed(a, b, p, q)?.sup())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(dim: usize, pts: &[f64], masses: &[f64]) -> AtomCloud {
        AtomCloud::new(dim, pts.to_vec(), masses.to_vec()).unwrap()
    }

    #[test]
    fn single_atoms_give_their_distance() {
        let a = cloud(2, &[0.0, 0.0], &[1.0]);
        let b = cloud(2, &[3.0, 4.0], &[1.0]);
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((wasserstein_atoms(&a, &b, p).unwrap().value - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_clouds_are_at_distance_zero() {
        let a = cloud(2, &[0.0, 0.0, 1.0, 0.5, -2.0, 3.0], &[0.2, 0.3, 0.5]);
        let r = wasserstein_atoms(&a, &a, 2.0).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let a = cloud(1, &[0.0], &[1.0]);
        let b = cloud(1, &[0.0], &[2.0]);
        assert!(matches!(wasserstein_atoms(&a, &b, 1.0), Err(Error::MassMismatch { .. })));
        assert!(wasserstein_atoms(&a, &a, 0.5).is_err());
        assert!(matches!(
            wasserstein_atoms(&AtomCloud::empty(1), &a, 1.0),
            Err(Error::EmptyMeasure)
        ));
    }

    #[test]
    fn plan_marginals_match() {
        let a = cloud(1, &[0.0, 1.0, 2.0], &[0.5, 0.25, 0.25]);
        let b = cloud(1, &[0.5, 3.0], &[0.6, 0.4]);
        let r = wasserstein_atoms(&a, &b, 1.0).unwrap();
        let mut rows = [0.0; 3];
        let mut cols = [0.0; 2];
        for &(i, j, f) in &r.plan.entries {
            rows[i] += f;
            cols[j] += f;
        }
        assert!((rows[0] - 0.5).abs() < 1e-12 && (cols[1] - 0.4).abs() < 1e-12);
        assert!((r.value - wasserstein_1d(&a, &b, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn squares_translated_rigidly() {
        use crate::measure::SquareCloud;
        let a = SquareCloud::new(2, 0.5, vec![0.0, 0.0], vec![1.0]).unwrap();
        let b = SquareCloud::new(2, 0.5, vec![2.0, 0.0], vec![1.0]).unwrap();
        let d = wasserstein_measures(&a.into(), &b.into(), 2.0, 1).unwrap();
        assert_eq!(d.estimate, 2.0);
        assert!((d.halo - 2f64.sqrt()).abs() < 1e-15);
    }
}
