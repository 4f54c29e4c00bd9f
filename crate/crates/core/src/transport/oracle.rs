use super::{check_mass_match, check_p, ground_cost};
use crate::error::{invalid, Error, Result};
use crate::measure::AtomCloud;

/// Largest atom count accepted by the permutation oracle.
pub const MAX_BRUTEFORCE_ATOMS: usize = 8;

/// `W_p` by enumerating every assignment of two equal-mass clouds of the
/// same size. For uniform masses an optimal plan is a permutation.
pub fn wasserstein_bruteforce(a: &AtomCloud, b: &AtomCloud, p: f64) -> Result<f64> {
    check_p(p)?;
    let k = a.len();
    if b.len() != k {
        return Err(invalid(format!("atom counts differ: {k} vs {}", b.len())));
    }
    if k == 0 {
        return Err(Error::EmptyMeasure);
    }
    if k > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::ResourceCap {
            what: "brute-force atoms",
            count: k,
            cap: MAX_BRUTEFORCE_ATOMS,
        });
    }
    let w = a.mass(0);
    let uniform = |c: &AtomCloud| c.masses().iter().all(|m| (m - w).abs() <= 1e-12 * w.abs());
    if !uniform(a) || !uniform(b) {
        return Err(invalid("brute force needs all masses equal"));
    }
    let cost: Vec<f64> = (0..k * k)
        .map(|e| ground_cost(a.position(e / k), b.position(e % k), p))
        .collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let eval = |perm: &[usize]| -> f64 { (0..k).map(|i| cost[i * k + perm[i]]).sum() };
    let mut best = eval(&perm);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((w * best).powf(1.0 / p))
}

/// `W_p` on the line through the monotone (quantile) coupling.
pub fn wasserstein_1d(a: &AtomCloud, b: &AtomCloud, p: f64) -> Result<f64> {
    check_p(p)?;
    if a.dim() != 1 || b.dim() != 1 {
        return Err(invalid(format!(
            "quantile coupling needs dimension 1, got {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    check_mass_match(ma, mb)?;
    let sorted = |c: &AtomCloud| {
        let mut v: Vec<(f64, f64)> = c
            .iter()
            .filter(|(_, m)| *m > 0.0)
            .map(|(x, m)| (x[0], m))
            .collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        v
    };
    let xa = sorted(a);
    let xb = sorted(b);
    let cumulative = |v: &[(f64, f64)]| {
        v.iter()
            .scan(0.0, |acc, (_, m)| {
                *acc += m;
                Some(*acc)
            })
            .collect::<Vec<f64>>()
    };
    let (ca, cb) = (cumulative(&xa), cumulative(&xb));
    // Between consecutive breakpoints of the two distribution functions both
    // quantile functions are constant.
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut terms = Vec::with_capacity(xa.len() + xb.len());
    while i < xa.len() && j < xb.len() {
        let next = ca[i].min(cb[j]);
        let w = next - prev;
        if w > 0.0 {
            let d = (xa[i].0 - xb[j].0).abs();
            terms.push(w * if p == 1.0 { d } else { d.powf(p) });
            prev = next;
        }
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    let cost = crate::measure::pairwise_sum(&terms).max(0.0);
    Ok(cost.powf(1.0 / p))
}
