use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{E, LN_2};
use wasserflow::bounds::{
    flow_contraction, flow_displacement, projection_bound, random_cloud, scheme1_error, scheme3_error, scheme4_gap,
    scheme5_gap, stability_constant, two_field_gap, two_field_gap_mass, verify_flow_bounds,
};
use wasserflow::velocity::{DesiredField, InteractionSpec, KernelSpec, VelocityModel};

/// Direct transcriptions of the closed forms, written independently of the library.
mod oracle {
    use super::*;

    pub fn scheme1(k: f64, m: f64, l: f64, p: f64, t: f64, dt: f64) -> f64 {
        k * m * E / (2.0 * l) * ((((p + 1.0) * l + 2.0 * k) * t / p).exp() - 1.0) * dt
    }

    pub fn stability(t: f64, l: f64, k: f64) -> f64 {
        let mut out = 1.0;
        let n = (t * f64::max(2.0 * l, 8.0 * k)).ceil() as i32;
        for _ in 0..n {
            out *= 2.0 * E;
        }
        out
    }

    pub fn scheme4(l: f64, k: f64, n: usize, t: f64, dx: f64) -> f64 {
        // Proportional to dx; avoids inf * 0 when the exponential overflows.
        if dx == 0.0 {
            return 0.0;
        }
        2.0 * l * (n as f64).sqrt() / k * ((k * t * (l * t).exp()).exp() - 1.0) * dx
    }

    pub fn scheme5(p: f64, l: f64, k: f64, n: usize, t: f64, dx: f64, dt: f64) -> f64 {
        let rn = (n as f64).sqrt();
        if p == 1.0 {
            rn * (dt * l + 1.0) * ((t * k).exp() - 1.0) / k * dx / dt
        } else {
            let a = 1.0 - 1.0 / p;
            (2f64.powf(a) * dt * l + 1.0) * (t * k).exp() * rn / (2f64.powf(a) - 1.0) * dx * 2f64.powf(a * t / dt)
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_forms_match_their_transcriptions(
        k in 0.01f64..3.0, m in 0.01f64..3.0, l in 0.01f64..3.0, p in 1.0f64..4.0,
        t in 0.0f64..2.0, dt in 0.01f64..0.5, dx in 0.0f64..0.5, n in 1usize..4,
    ) {
        prop_assert!(close(flow_contraction(p, l, t).unwrap(), ((p + 1.0) / p * l * t).exp()));
        let (cw, cdv) = two_field_gap(p, l, t).unwrap();
        prop_assert!(close(cw, ((p + 1.0) * l * t / p).exp()));
        prop_assert!(close(cdv, (l * t / p).exp() * ((l * t).exp() - 1.0) / l));
        prop_assert!(close(scheme1_error(k, m, l, p, t, dt).value, oracle::scheme1(k, m, l, p, t, dt)));
        prop_assert!(close(stability_constant(t, l, k), oracle::stability(t, l, k)));
        let s3 = scheme3_error(k, m, l, p, t, dt, n, dx).value;
        let want = (n as f64).sqrt() * dx * oracle::stability(t, l, k) + oracle::scheme1(k, m, l, p, t, dt);
        prop_assert!(close(s3, want), "{} vs {}", s3, want);
        let s4 = scheme4_gap(l, k, n, t, dx, dt).value;
        let want4 = oracle::scheme4(l, k, n, t, dx);
        prop_assert!(s4 == want4 || close(s4, want4), "{} vs {}", s4, want4);
        let s5 = scheme5_gap(p, l, k, n, t, dx, dt).unwrap();
        prop_assert!(close(s5, oracle::scheme5(p, l, k, n, t, dx, dt)), "{} vs {}", s5, oracle::scheme5(p, l, k, n, t, dx, dt));
    }

    #[test]
    fn bounds_are_nonnegative_and_monotone(
        k in 0.0f64..3.0, m in 0.0f64..3.0, l in 0.0f64..3.0, p in 1.0f64..4.0,
        t in 0.0f64..2.0, dt in 0.01f64..0.5, dx in 0.0f64..0.5, n in 1usize..4,
        grow in 1.0f64..2.0,
    ) {
        let all = |t: f64, dt: f64, dx: f64| {
            [
                flow_contraction(p, l, t).unwrap(),
                flow_displacement(m, t),
                two_field_gap(p, l, t).unwrap().1,
                projection_bound(n, dx, 1.0, p),
                stability_constant(t, l, k),
                scheme1_error(k, m, l, p, t, dt).value,
                scheme3_error(k, m, l, p, t, dt, n, dx).value,
                scheme4_gap(l, k, n, t, dx, dt).value,
                scheme5_gap(p, l, k, n, t, dx, dt).unwrap(),
            ]
        };
        let base = all(t, dt, dx);
        prop_assert!(base.iter().all(|v| *v >= 0.0));
        for (a, b) in base.iter().zip(all(t * grow, dt, dx)) {
            prop_assert!(*a <= b * (1.0 + 1e-12), "in t: {} > {}", a, b);
        }
        for (a, b) in base.iter().zip(all(t, dt, dx * grow)) {
            prop_assert!(*a <= b * (1.0 + 1e-12), "in dx: {} > {}", a, b);
        }
        // The time-discretization terms grow with dt.
        let coarse = all(t, dt * grow, dx);
        for idx in [5, 6] {
            prop_assert!(base[idx] <= coarse[idx] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn contraction_tends_to_its_limit_in_p(l in 0.0f64..2.0, t in 0.0f64..2.0) {
        let limit = flow_contraction(f64::INFINITY, l, t).unwrap();
        prop_assert!(close(limit, (l * t).exp()));
        let far = flow_contraction(1e9, l, t).unwrap();
        prop_assert!((far - limit).abs() <= 1e-8 * limit);
        prop_assert!(flow_contraction(2.0, l, t).unwrap() >= far);
    }
}

#[test]
fn worked_values() {
    assert_eq!(flow_contraction(1.0, 0.0, 3.0).unwrap(), 1.0);
    assert!((flow_contraction(2.0, 1.0, 2.0).unwrap() - 3f64.exp()).abs() < 1e-13);
    assert_eq!(flow_displacement(2.0, 0.25), 0.5);
    assert_eq!(projection_bound(2, 0.1, 1.0, 1.0), 2f64.sqrt() * 0.1);
    assert!((projection_bound(2, 0.1, 0.25, 2.0) - 0.5 * 2f64.sqrt() * 0.1).abs() < 1e-16);
    assert_eq!(stability_constant(1.0, 1.0, 1.0), (2.0 * E).powi(8));
    assert_eq!(stability_constant(0.1, 1.0, 1.0), (2.0 * E).powi(1));
    let (_, dv) = two_field_gap_mass(2.0, 1.0, 1.0, 4.0).unwrap();
    assert!((dv - 2.0 * 0.5f64.exp() * (E - 1.0)).abs() < 1e-13);
    // Hypothesis gates.
    assert!(scheme1_error(1.0, 1.0, 2.0, 1.0, 1.0, 0.5).hypothesis_ok);
    assert!(!scheme1_error(1.0, 1.0, 2.0, 1.0, 1.0, 0.51).hypothesis_ok);
    assert!(scheme4_gap(1.0, 1.0, 2, 1.0, 0.1, LN_2 * 0.99).hypothesis_ok);
    assert!(!scheme4_gap(1.0, 1.0, 2, 1.0, 0.1, LN_2).hypothesis_ok);
    // The two Eulerian forms disagree near p = 1.
    let one = scheme5_gap(1.0, 1.0, 1.0, 2, 1.0, 0.01, 0.1).unwrap();
    let near = scheme5_gap(1.0 + 1e-6, 1.0, 1.0, 2, 1.0, 0.01, 0.1).unwrap();
    assert!(near > 100.0 * one);
}

#[test]
fn invalid_inputs() {
    assert!(flow_contraction(0.9, 1.0, 1.0).is_err());
    assert!(flow_contraction(1.0, -1.0, 1.0).is_err());
    assert!(flow_contraction(1.0, 1.0, f64::NAN).is_err());
    assert!(scheme5_gap(1.0, 1.0, 1.0, 2, 1.0, 0.1, 0.0).is_err());
    assert!(scheme5_gap(f64::NAN, 1.0, 1.0, 2, 1.0, 0.1, 0.1).is_err());
    assert_eq!(stability_constant(1e6, 1e6, 0.0), f64::INFINITY);
}

#[test]
fn flow_audit_passes_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = InteractionSpec::power(KernelSpec::cone(0.8, 1.0).unwrap(), 1.0).unwrap();
    let model = VelocityModel::new(DesiredField::Constant(vec![0.2, -0.1]), Some(spec));
    let pairs: Vec<_> = (0..8)
        .map(|_| (random_cloud(&mut rng, 6, 2, 0.5), random_cloud(&mut rng, 6, 2, 0.5)))
        .collect();
    for p in [1.0, 2.0] {
        let reports = verify_flow_bounds(&model, &pairs, &[0.0, 0.1, 0.3], p).unwrap();
        assert_eq!(reports.len(), 8 * 3 * 3);
        for r in &reports {
            assert!(r.passes(), "{r:?}");
        }
    }
}

#[test]
fn constant_field_attains_the_displacement_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = VelocityModel::translation(vec![0.3, 0.4]);
    let pairs = vec![(random_cloud(&mut rng, 5, 2, 1.0), random_cloud(&mut rng, 5, 2, 1.0))];
    let reports = verify_flow_bounds(&model, &pairs, &[0.5, 1.0], 2.0).unwrap();
    for r in reports.iter().filter(|r| r.name == "flow_displacement") {
        let measured = r.measured.unwrap();
        assert!((measured - r.bound).abs() <= 1e-9, "{r:?}");
        assert!((r.bound - 0.5 * r.inputs.t).abs() <= 1e-12);
    }
    // A common translation leaves the distance unchanged.
    for r in reports.iter().filter(|r| r.name == "flow_contraction") {
        assert!((r.measured.unwrap() - r.bound).abs() <= 1e-9, "{r:?}");
    }
}
