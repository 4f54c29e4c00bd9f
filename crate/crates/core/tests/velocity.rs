mod common;

use common::{cloud, norm};
use proptest::prelude::*;
use wasserflow::measure::AtomCloud;
use wasserflow::velocity::{
    certify_constants, certify_constants_rigorous, empirical_k, eval_interaction, eval_velocity,
    f1_discontinuity_demo, DesiredField, InteractionSpec, KernelSpec, VelocityModel, Weight,
};

fn spec(radius: f64, peak: f64, alpha: f64, strength: f64) -> InteractionSpec {
    InteractionSpec::new(KernelSpec::cone(radius, peak).unwrap(), Weight::Power(alpha), strength).unwrap()
}

fn desired() -> impl Strategy<Value = DesiredField> {
    prop_oneof![
        Just(DesiredField::Zero),
        prop::collection::vec(-1.0f64..1.0, 2).prop_map(DesiredField::Constant),
        (prop::collection::vec(-1.0f64..1.0, 2), 0.1f64..2.0, 0.1f64..1.0).prop_map(|(target, gain, max_speed)| {
            DesiredField::AffineToTarget {
                target,
                gain,
                max_speed,
            }
        }),
    ]
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn speed_is_bounded_by_m(
        mu in cloud(2, 12, 1.0, 1.0), d in desired(), radius in 0.2f64..1.5, peak in 0.2f64..2.0,
        alpha in 1.0f64..3.0, strength in -2.0f64..2.0, x in prop::collection::vec(-1.5f64..1.5, 2),
    ) {
        let model = VelocityModel::new(d, Some(spec(radius, peak, alpha, strength)));
        let m = model.constants().unwrap().m;
        let v = eval_velocity(&mu, &x, &model).unwrap();
        prop_assert!(norm(&v) <= m * (1.0 + 1e-12) + 1e-12, "{:?} vs {}", v, m);
    }

    #[test]
    fn paper_constants_are_lipschitz_for_linear_weight(
        mu in cloud(2, 12, 1.0, 1.0), d in desired(), radius in 0.2f64..1.5, peak in 0.2f64..2.0,
        strength in -2.0f64..2.0, x in prop::collection::vec(-1.5f64..1.5, 2), h in prop::collection::vec(-0.3f64..0.3, 2),
    ) {
        let model = VelocityModel::new(d, Some(spec(radius, peak, 1.0, strength)));
        let l = model.constants().unwrap().l;
        let y: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        let gap = diff(&eval_velocity(&mu, &x, &model).unwrap(), &eval_velocity(&mu, &y, &model).unwrap());
        prop_assert!(gap <= l * norm(&h) + 1e-9, "{} vs {}", gap, l * norm(&h));
    }

    #[test]
    fn rigorous_constants_are_lipschitz_for_any_power(
        mu in cloud(2, 12, 1.0, 1.0), radius in 0.2f64..1.5, peak in 0.2f64..2.0, alpha in 1.0f64..3.0,
        x in prop::collection::vec(-1.5f64..1.5, 2), h in prop::collection::vec(-0.3f64..0.3, 2),
    ) {
        let model = VelocityModel::new(DesiredField::Zero, Some(spec(radius, peak, alpha, 1.0))).with_rigorous_constants();
        let l = model.constants().unwrap().l;
        let y: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        let gap = diff(&eval_velocity(&mu, &x, &model).unwrap(), &eval_velocity(&mu, &y, &model).unwrap());
        prop_assert!(gap <= l * norm(&h) + 1e-9);
    }

    #[test]
    fn empirical_k_stays_below_the_certified_one(
        pairs in prop::collection::vec((cloud(2, 6, 0.6, 1.0), cloud(2, 6, 0.6, 1.0)), 2..4),
        radius in 0.3f64..1.2, peak in 0.5f64..2.0,
    ) {
        let s = spec(radius, peak, 1.0, 1.0);
        let k = certify_constants(&s, (0.0, 0.0)).unwrap().k;
        let lattice: Vec<f64> = (0..15).flat_map(|i| (0..15).flat_map(move |j| [-1.4 + 0.2 * i as f64, -1.4 + 0.2 * j as f64])).collect();
        let emp = empirical_k(&s, &pairs, 1.0, &lattice).unwrap();
        prop_assert!(emp <= 1.05 * k, "{} vs {}", emp, k);
    }

    #[test]
    fn vanishes_where_no_mass_is_in_range(mu in cloud(2, 10, 1.0, 1.0), radius in 0.1f64..1.0) {
        // Every atom lies in [-1, 1]^2, at distance > radius from x.
        let x = [1.0 + radius + 1e-9, 1.0 + radius + 1e-9];
        prop_assert_eq!(eval_interaction(&mu, &x, &spec(radius, 1.0, 1.5, 1.0)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mirror_symmetry_kills_the_normal_component(
        half in cloud(2, 8, 1.0, 0.5), c in -0.5f64..0.5, y in -1.0f64..1.0, alpha in 1.0f64..3.0,
    ) {
        // Reflect about the vertical line {x_0 = c} and evaluate on it.
        let mirrored: Vec<f64> = half.positions().chunks(2).flat_map(|p| [2.0 * c - p[0], p[1]]).collect();
        let mu = half.union(&AtomCloud::new(2, mirrored, half.masses().to_vec()).unwrap()).unwrap();
        let model = VelocityModel::new(
            DesiredField::AffineToTarget { target: vec![c, 0.3], gain: 1.0, max_speed: 0.5 },
            Some(spec(0.8, 1.0, alpha, -1.0)),
        );
        let v = eval_velocity(&mu, &[c, y], &model).unwrap();
        prop_assert!(v[0].abs() <= 1e-12, "{:?}", v);
    }
}

#[test]
fn single_atom_at_half_radius() {
    let mu = AtomCloud::from_points(2, &[([0.5, 0.0], 1.0)]).unwrap();
    let x = [0.0, 0.0];
    // phi = 1 - 1/2, x* = y, so v = (x - y) phi.
    let v = eval_interaction(&mu, &x, &spec(1.0, 1.0, 1.0, 1.0)).unwrap();
    assert_eq!(v, vec![(0.0 - 0.5) * 0.5, 0.0]);
}

#[test]
fn symmetric_pair_leaves_the_desired_field() {
    let mu = AtomCloud::from_points(2, &[([0.3, -0.2], 0.5), ([-0.3, 0.2], 0.5)]).unwrap();
    let model = VelocityModel::new(DesiredField::Constant(vec![1.0, 0.0]), Some(spec(1.0, 1.0, 1.0, 1.0)));
    let v = eval_velocity(&mu, &[0.0, 0.0], &model).unwrap();
    assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    let plain = VelocityModel::translation(vec![0.2, 0.1]);
    assert_eq!(eval_velocity(&mu, &[5.0, 5.0], &plain).unwrap(), vec![0.2, 0.1]);
}

#[test]
fn certified_constants_examples() {
    let c = certify_constants(&spec(1.0, 1.0, 1.0, 1.0), (0.0, 0.0)).unwrap();
    assert_eq!((c.l, c.m, c.k), (1.0, 1.0, 1.0));
    // R = 2, peak 1 gives L_eta = 0.5.
    let c = certify_constants(&spec(2.0, 1.0, 2.0, 1.0), (0.0, 0.0)).unwrap();
    assert_eq!((c.m, c.l, c.k), (2.0, 1.0, 1.0));
    let c = certify_constants(&spec(0.1, 1.0, 1.0, 1.0), (0.0, 0.0)).unwrap();
    assert!((c.m - 0.1).abs() < 1e-15);
    let c = certify_constants(&spec(1.0, 1.0, 1.0, 1.0), (0.5, 2.0)).unwrap();
    assert_eq!((c.l, c.m, c.k), (1.5, 3.0, 1.0));
    let constant = InteractionSpec::new(KernelSpec::cone(1.0, 1.0).unwrap(), Weight::Constant, 1.0).unwrap();
    assert!(certify_constants(&constant, (0.0, 0.0)).is_err());
    assert!(certify_constants_rigorous(&spec(1.0, 1.0, 2.0, 1.0), (0.0, 0.0)).unwrap().l >= 1.0);
    assert!(InteractionSpec::new(KernelSpec::cone(1.0, 1.0).unwrap(), Weight::Power(0.5), 1.0).is_err());
    assert!(KernelSpec::cone(0.0, 1.0).is_err());
}

#[test]
fn translated_pairs_respect_k() {
    let s = spec(1.0, 1.0, 1.0, 1.0);
    let base = AtomCloud::from_points(2, &[([0.0, 0.0], 0.5), ([0.4, 0.1], 0.3), ([-0.2, 0.3], 0.2)]).unwrap();
    let pairs: Vec<_> = [[0.05, 0.0], [0.0, -0.1], [0.2, 0.2]]
        .iter()
        .map(|u| (base.clone(), base.translated(u)))
        .collect();
    let lattice: Vec<f64> = (0..21).flat_map(|i| (0..21).flat_map(move |j| [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64])).collect();
    assert!(empirical_k(&s, &pairs, 1.0, &lattice).unwrap() <= 1.0);

    // Far from both single atoms the ratio is zero.
    let a = AtomCloud::from_points(2, &[([0.0, 0.0], 1.0)]).unwrap();
    let b = AtomCloud::from_points(2, &[([0.1, 0.0], 1.0)]).unwrap();
    let far = [10.0, 10.0];
    assert_eq!(empirical_k(&s, &[(a.clone(), b.clone()), (b, a)], 1.0, &far).unwrap(), 0.0);
}

#[test]
fn constant_weight_is_discontinuous_in_the_measure() {
    let ts: Vec<f64> = (0..=10).map(|k| 0.01 * k as f64).collect();
    let rep = f1_discontinuity_demo(0.5, 0.1, 1.0, &ts, 1.0, 20).unwrap();
    assert!(rep.passes());
    assert_eq!(rep.rows[0].speed, 0.0);
    for row in &rep.rows[1..] {
        assert!(row.speed >= 0.5, "{row:?}");
        assert!(row.measured <= rep.s * row.t + row.halo);
    }
    // The ratio |v[mu_t](0) - v[mu_0](0)| / W_1 grows as t shrinks.
    let ratio = |k: usize| rep.rows[k].speed / rep.rows[k].measured;
    assert!(ratio(1) > ratio(10));
    assert!(f1_discontinuity_demo(0.5, 0.3, 1.0, &ts, 1.0, 20).is_err());
}
