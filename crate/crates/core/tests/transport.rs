mod common;

use common::{cloud, equal_cloud, rel_close};
use proptest::prelude::*;
use wasserflow::measure::{AtomCloud, Measure, SquareCloud};
use wasserflow::schemes::{SchemeConfig, SchemeKind, Trajectory};
use wasserflow::transport::{
    trajectory_distance, wasserstein_1d, wasserstein_atoms, wasserstein_bruteforce, wasserstein_measures,
    wasserstein_measures_matched,
};
use wasserflow::Error;

fn w(a: &AtomCloud, b: &AtomCloud, p: f64) -> f64 {
    wasserstein_atoms(a, b, p).unwrap().value
}

fn pow_cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    common::norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()).powf(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn symmetric_and_zero_on_the_diagonal(a in cloud(2, 7, 1.0, 1.0), b in cloud(2, 7, 1.0, 1.0), p in 1.0f64..3.0) {
        prop_assert_eq!(w(&a, &b, p), w(&b, &a, p));
        prop_assert!(w(&a, &a, p) <= 1e-12);
    }

    #[test]
    fn triangle_inequality(a in cloud(2, 6, 1.0, 1.0), b in cloud(2, 6, 1.0, 1.0), c in cloud(2, 6, 1.0, 1.0), p in 1.0f64..3.0) {
        prop_assert!(w(&a, &c, p) <= w(&a, &b, p) + w(&b, &c, p) + 1e-9);
    }

    #[test]
    fn ordering_in_p(a in cloud(2, 7, 1.0, 1.0), b in cloud(2, 7, 1.0, 1.0)) {
        let ps = [1.0, 1.5, 2.0, 4.0];
        let v: Vec<f64> = ps.iter().map(|&p| w(&a, &b, p)).collect();
        for k in 1..v.len() {
            prop_assert!(v[k - 1] <= v[k] + 1e-9, "{:?}", v);
        }
    }

    #[test]
    fn subadditive_over_splits(
        a1 in cloud(2, 5, 1.0, 0.4), b1 in cloud(2, 5, 1.0, 0.4),
        a2 in cloud(2, 5, 1.0, 0.6), b2 in cloud(2, 5, 1.0, 0.6),
        p in 1.0f64..3.0,
    ) {
        let whole = w(&a1.union(&a2).unwrap(), &b1.union(&b2).unwrap(), p).powf(p);
        prop_assert!(whole <= w(&a1, &b1, p).powf(p) + w(&a2, &b2, p).powf(p) + 1e-9);
    }

    #[test]
    fn shared_mass_does_not_increase_the_distance(
        a in cloud(2, 5, 1.0, 0.5), b in cloud(2, 5, 1.0, 0.5), eta in cloud(2, 4, 1.0, 0.5),
        p in 1.0f64..3.0,
    ) {
        let with = w(&a.union(&eta).unwrap(), &b.union(&eta).unwrap(), p);
        prop_assert!(with <= w(&a, &b, p) + 1e-9);
    }

    #[test]
    fn sup_decomposition(
        a1 in cloud(2, 5, 1.0, 0.3), b1 in cloud(2, 5, 1.0, 0.3),
        a2 in cloud(2, 5, 1.0, 0.7), b2 in cloud(2, 5, 1.0, 0.7),
        p in 1.0f64..3.0,
    ) {
        let whole = w(&a1.union(&a2).unwrap(), &b1.union(&b2).unwrap(), p);
        let parts = (w(&a1, &b1, p) * 0.3f64.powf(-1.0 / p)).max(w(&a2, &b2, p) * 0.7f64.powf(-1.0 / p));
        prop_assert!(whole <= parts + 1e-9);
    }

    #[test]
    fn translation_invariance(a in cloud(2, 7, 1.0, 1.0), b in cloud(2, 7, 1.0, 1.0), u in prop::collection::vec(-3.0f64..3.0, 2), p in 1.0f64..3.0) {
        let shifted = w(&a.translated(&u), &b.translated(&u), p);
        prop_assert!((shifted - w(&a, &b, p)).abs() <= 1e-12 * shifted.max(1.0) * 10.0);
    }

    #[test]
    fn plan_is_feasible_and_consistent(a in cloud(2, 8, 1.0, 1.0), b in cloud(2, 8, 1.0, 1.0), p in 1.0f64..3.0) {
        let r = wasserstein_atoms(&a, &b, p).unwrap();
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        let mut cost = 0.0;
        for &(i, j, m) in &r.plan.entries {
            prop_assert!(m >= 0.0);
            rows[i] += m;
            cols[j] += m;
            cost += m * pow_cost(a.position(i), b.position(j), p);
        }
        for (r, s) in rows.iter().zip(a.masses()) {
            prop_assert!(rel_close(*r, *s, 1e-10));
        }
        for (c, d) in cols.iter().zip(b.masses()) {
            prop_assert!(rel_close(*c, *d, 1e-10));
        }
        prop_assert!(rel_close(cost, r.plan.cost_p, 1e-10));
        prop_assert!(rel_close(r.value, r.plan.cost_p.powf(1.0 / p), 1e-12));
    }

    #[test]
    fn matches_permutation_oracle(k in 1usize..=7, seed_a in equal_cloud(2, 7, 1.0), seed_b in equal_cloud(2, 7, 1.0), p in prop::sample::select(vec![1.0, 2.0])) {
        let take = |c: &AtomCloud| AtomCloud::new(2, c.positions()[..2 * k].to_vec(), vec![1.0 / k as f64; k]).unwrap();
        let (a, b) = (take(&seed_a), take(&seed_b));
        let exact = w(&a, &b, p);
        let brute = wasserstein_bruteforce(&a, &b, p).unwrap();
        prop_assert!(rel_close(exact, brute, 1e-9), "{} vs {}", exact, brute);
    }

    #[test]
    fn matches_quantile_oracle(a in cloud(1, 12, 2.0, 1.0), b in cloud(1, 12, 2.0, 1.0), p in 1.0f64..3.0) {
        let exact = w(&a, &b, p);
        let quantile = wasserstein_1d(&a, &b, p).unwrap();
        prop_assert!(rel_close(exact, quantile, 1e-9), "{} vs {}", exact, quantile);
    }

    #[test]
    fn matched_quadrature_stays_within_its_halo(
        a in common::squares(2, 5, 1.0, 0.2), b in common::squares(2, 5, 1.0, 0.05),
    ) {
        let (ma, mb) = (Measure::Squares(a), Measure::Squares(b));
        let fine = wasserstein_measures(&ma, &mb, 1.0, 8).unwrap();
        let matched = wasserstein_measures_matched(&ma, &mb, 1.0, 2).unwrap();
        // Both bracket the same true value.
        prop_assert!(matched.lower() <= fine.upper() + 1e-9);
        prop_assert!(fine.lower() <= matched.upper() + 1e-9);
    }
}

#[test]
fn single_atoms_are_at_their_distance_for_every_p() {
    let a = AtomCloud::from_points(2, &[([0.0, 0.0], 1.0)]).unwrap();
    let b = AtomCloud::from_points(2, &[([3.0, 4.0], 1.0)]).unwrap();
    for p in [1.0, 1.5, 2.0, 7.0] {
        assert!((w(&a, &b, p) - 5.0).abs() < 1e-12);
    }
}

#[test]
fn quantile_oracle_on_a_rigid_shift() {
    let a = AtomCloud::from_points(1, &[([0.0], 0.5), ([1.0], 0.5)]).unwrap();
    let b = AtomCloud::from_points(1, &[([2.0], 0.5), ([3.0], 0.5)]).unwrap();
    assert_eq!(wasserstein_1d(&a, &b, 1.0).unwrap(), 2.0);
    assert!((wasserstein_1d(&a, &b, 2.0).unwrap() - 2.0).abs() < 1e-15);
    assert!(wasserstein_1d(&AtomCloud::from_points(2, &[([0.0, 0.0], 1.0)]).unwrap(), &a, 1.0).is_err());
}

#[test]
fn brute_force_on_small_cases() {
    let a = AtomCloud::from_points(1, &[([0.0], 0.5), ([1.0], 0.5)]).unwrap();
    assert_eq!(wasserstein_bruteforce(&a, &a, 2.0).unwrap(), 0.0);
    let x = AtomCloud::from_points(2, &[([0.0, 0.0], 1.0)]).unwrap();
    let y = AtomCloud::from_points(2, &[([1.0, 1.0], 1.0)]).unwrap();
    assert!((wasserstein_bruteforce(&x, &y, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let uneven = AtomCloud::from_points(1, &[([0.0], 0.3), ([1.0], 0.7)]).unwrap();
    assert!(wasserstein_bruteforce(&uneven, &a, 1.0).is_err());
}

#[test]
fn input_errors() {
    let a = AtomCloud::from_points(2, &[([0.0, 0.0], 1.0)]).unwrap();
    let heavy = AtomCloud::from_points(2, &[([0.0, 0.0], 2.0)]).unwrap();
    assert!(matches!(wasserstein_atoms(&a, &heavy, 1.0), Err(Error::MassMismatch { .. })));
    assert!(matches!(wasserstein_atoms(&a, &AtomCloud::empty(2), 1.0), Err(Error::EmptyMeasure)));
    assert!(wasserstein_atoms(&a, &a, 0.5).is_err());
}

#[test]
fn translated_squares_at_quadrature_one() {
    let a = Measure::Squares(SquareCloud::new(2, 0.5, vec![0.0, 0.0], vec![1.0]).unwrap());
    let b = Measure::Squares(SquareCloud::new(2, 0.5, vec![0.6, 0.8], vec![1.0]).unwrap());
    let d = wasserstein_measures(&a, &b, 2.0, 1).unwrap();
    assert!((d.estimate - 1.0).abs() < 1e-15);
    assert!((d.halo - 2f64.sqrt()).abs() < 1e-15);
    let same = wasserstein_measures(&a, &a, 1.0, 3).unwrap();
    assert_eq!(same.estimate, 0.0);
}

#[test]
fn trajectory_distance_of_a_shift() {
    let cfg = SchemeConfig::new(1.0, 0.5, 0.1).unwrap();
    let base = SquareCloud::new(2, 0.1, vec![0.0, 0.0, 0.3, 0.1], vec![0.5, 0.5]).unwrap();
    let mut a = Trajectory::new(SchemeKind::Lagrangian, cfg.clone());
    let mut b = Trajectory::new(SchemeKind::Lagrangian, cfg);
    for k in 0..3 {
        let moved = base.translated(&[0.1 * k as f64, 0.0]);
        a.push(0.5 * k as f64, Measure::Squares(moved.clone()));
        b.push(0.5 * k as f64, Measure::Squares(moved.translated(&[0.3, 0.4])));
    }
    assert_eq!(trajectory_distance(&a, &a, 1.0, 2).unwrap(), 0.0);
    assert!((trajectory_distance(&a, &b, 1.0, 2).unwrap() - 0.5).abs() < 1e-12);

    let mut late = Trajectory::new(SchemeKind::Lagrangian, SchemeConfig::new(1.0, 0.5, 0.1).unwrap());
    late.push(0.25, Measure::Squares(base));
    assert!(trajectory_distance(&a, &late, 1.0, 1).is_err());
}
