mod common;

use common::{cloud, rel_close, squares};
use proptest::prelude::*;
use wasserflow::counterexample::NuFamily;
use wasserflow::measure::io::{read_measure_str, write_measure_string};
use wasserflow::measure::{
    grid_project, init_from_density, l1_distance, total_mass, to_quadrature, AtomCloud, BoundingBox, GridSpec,
    GriddedDensity, Measure, MultiScaleMeasure, PopulationVector, SquareCloud,
};
use wasserflow::transport::{wasserstein_atoms, wasserstein_measures};

fn grid2(dx: f64) -> GridSpec {
    GridSpec::new(2, dx, vec![0.0, 0.0]).unwrap()
}

fn cells(g: &GriddedDensity) -> Vec<(Vec<i64>, f64)> {
    g.iter().map(|(k, m)| (k.clone(), m)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_conserves_mass(s in squares(2, 12, 2.0, 0.13), a in cloud(3, 12, 2.0, 0.7), dx in 0.05f64..0.5) {
        let m = Measure::Squares(s);
        let g = grid_project(&m, &grid2(dx)).unwrap();
        prop_assert!(rel_close(g.total_mass(), m.total_mass(), 1e-12));
        let m = Measure::Atoms(a);
        let g = grid_project(&m, &GridSpec::new(3, dx, vec![0.1, -0.2, 0.0]).unwrap()).unwrap();
        prop_assert!(rel_close(g.total_mass(), m.total_mass(), 1e-12));
    }

    #[test]
    fn projection_is_idempotent(s in squares(2, 12, 2.0, 0.13), dx in 0.05f64..0.5) {
        let grid = grid2(dx);
        let once = grid_project(&Measure::Squares(s), &grid).unwrap();
        let twice = grid_project(&Measure::Grid(once.clone()), &grid).unwrap();
        prop_assert_eq!(cells(&once), cells(&twice));
    }

    #[test]
    fn projection_is_within_the_grid_bound(s in squares(2, 8, 1.0, 0.1), frac in 0.3f64..1.0) {
        // Squares no larger than the cells.
        let dx = 0.1;
        let s = SquareCloud::new(2, dx * frac, s.centers().to_vec(), s.masses().to_vec()).unwrap();
        let m = Measure::Squares(s);
        let g = Measure::Grid(grid_project(&m, &grid2(dx)).unwrap());
        for p in [1.0, 2.0] {
            let d = wasserstein_measures(&m, &g, p, 4).unwrap();
            prop_assert!(d.estimate - d.halo <= 2f64.sqrt() * dx, "{:?}", d);
        }
    }

    #[test]
    fn quadrature_refinement_is_consistent(s in squares(2, 6, 1.0, 0.2), q in 1usize..4) {
        let m = Measure::Squares(s.clone());
        let a = to_quadrature(&m, q).unwrap();
        let b = to_quadrature(&m, 2 * q).unwrap();
        prop_assert!(rel_close(a.total_mass(), m.total_mass(), 1e-15));
        let d = wasserstein_atoms(&a, &b, 1.0).unwrap().value;
        prop_assert!(d <= 2f64.sqrt() * s.side() / q as f64 + 1e-12);
    }

    #[test]
    fn l1_is_a_symmetric_nonnegative_sum(a in squares(2, 8, 1.0, 0.2), b in squares(2, 8, 1.0, 0.2)) {
        let grid = grid2(0.1);
        let ga = grid_project(&Measure::Squares(a), &grid).unwrap();
        let gb = grid_project(&Measure::Squares(b), &grid).unwrap();
        let d = l1_distance(&ga, &gb).unwrap();
        prop_assert!(d >= 0.0 && d <= 2.0 + 1e-12);
        prop_assert_eq!(d, l1_distance(&gb, &ga).unwrap());
        prop_assert_eq!(l1_distance(&ga, &ga).unwrap(), 0.0);
    }

    #[test]
    fn text_format_round_trips(s in squares(2, 8, 1.0, 0.2), a in cloud(1, 8, 3.0, 2.5)) {
        for m in [Measure::Squares(s.clone()), Measure::Atoms(a.clone())] {
            let text = write_measure_string(&m);
            let back = read_measure_str(&text).unwrap();
            prop_assert_eq!(write_measure_string(&back), text);
            prop_assert_eq!(back.total_mass(), m.total_mass());
        }
        let g = Measure::Grid(grid_project(&Measure::Squares(s), &grid2(0.07)).unwrap());
        prop_assert_eq!(write_measure_string(&read_measure_str(&write_measure_string(&g)).unwrap()), write_measure_string(&g));
    }
}

#[test]
fn square_covering_four_cells() {
    let s = SquareCloud::new(2, 1.0, vec![1.0, 1.0], vec![1.0]).unwrap();
    let g = grid_project(&Measure::Squares(s), &grid2(0.5)).unwrap();
    // Centred at (1, 1) with side 1: cells 1..=2 on both axes.
    assert_eq!(g.len(), 4);
    assert!(g.iter().all(|(_, m)| m == 0.25));
}

#[test]
fn atom_inside_one_cell() {
    let a = AtomCloud::from_points(2, &[([0.31, 0.77], 1.0)]).unwrap();
    let g = grid_project(&Measure::Atoms(a), &grid2(0.1)).unwrap();
    assert_eq!(cells(&g), vec![(vec![3, 7], 1.0)]);
}

#[test]
fn half_cell_shift_splits_evenly() {
    let dx = 0.25;
    let s = SquareCloud::new(2, dx, vec![dx, 0.5 * dx], vec![1.0]).unwrap();
    let g = grid_project(&Measure::Squares(s), &grid2(dx)).unwrap();
    // Oracle: overlap area (dx/2 * dx) / dx^2 with each neighbor.
    let want = (0.5 * dx * dx) / (dx * dx);
    assert_eq!(cells(&g), vec![(vec![0, 0], want), (vec![1, 0], want)]);
}

#[test]
fn half_open_cells_resolve_ties_upward() {
    let a = AtomCloud::from_points(1, &[([0.5], 1.0)]).unwrap();
    let g = grid_project(&Measure::Atoms(a), &GridSpec::anchored(1, 0.5).unwrap()).unwrap();
    assert_eq!(cells(&g), vec![(vec![1], 1.0)]);
}

#[test]
fn total_mass_examples() {
    assert_eq!(total_mass(&Measure::Atoms(AtomCloud::empty(2))), 0.0);
    let a = AtomCloud::from_points(1, &[([0.0], 0.3), ([1.0], 0.7)]).unwrap();
    assert_eq!(total_mass(&Measure::Atoms(a)), 1.0);
    // Geometric series sum_{i <= 20} 2^{-i-1}, summed directly.
    let direct: f64 = (0..=20).map(|i| 0.5 * 2f64.powi(-i)).sum();
    let fam = NuFamily::new(20).unwrap();
    assert!((fam.truncated_mass() - (1.0 - 2f64.powi(-21))).abs() <= 1e-15);
    assert!((fam.truncated_mass() - direct).abs() <= 1e-15);
}

#[test]
fn quadrature_nodes() {
    let s = SquareCloud::new(2, 1.0, vec![2.0, 3.0], vec![1.0]).unwrap();
    let one = to_quadrature(&Measure::Squares(s.clone()), 1).unwrap();
    assert_eq!(one.positions(), &[2.0, 3.0]);
    let two = to_quadrature(&Measure::Squares(s), 2).unwrap();
    let mut pts: Vec<(f64, f64)> = two.positions().chunks(2).map(|c| (c[0] - 2.0, c[1] - 3.0)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(pts, vec![(-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)]);
    assert!(two.masses().iter().all(|&m| m == 0.25));
    assert!(to_quadrature(&Measure::Atoms(one), 0).is_err());
}

#[test]
fn density_initialization() {
    let bbox = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let g = init_from_density(|_| 1.0, &grid2(0.5), &bbox, 2, true).unwrap();
    assert_eq!(g.len(), 4);
    assert!(g.iter().all(|(_, m)| (m - 0.25).abs() < 1e-15));

    let left = init_from_density(|x| if x[0] < 0.5 { 1.0 } else { 0.0 }, &grid2(0.5), &bbox, 2, true).unwrap();
    assert!(left.iter().all(|(k, _)| k[0] == 0));
    assert!(init_from_density(|_| -1.0, &grid2(0.5), &bbox, 2, true).is_err());
}

#[test]
fn gaussian_bump_matches_a_fine_quadrature() {
    let bbox = BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 0.1).exp();
    let dx = 0.25;
    let g = init_from_density(f, &grid2(dx), &bbox, 64, false).unwrap();
    // Oracle: composite Gauss-Legendre (5 nodes per 1/64 sub-cell) on each cell.
    let nodes = [
        (0.0, 128.0 / 225.0),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let sub = 64;
    let h = dx / sub as f64;
    for (k, m) in g.iter() {
        let lo = [k[0] as f64 * dx, k[1] as f64 * dx];
        let mut total = 0.0;
        for i in 0..sub {
            for j in 0..sub {
                let c = [lo[0] + (i as f64 + 0.5) * h, lo[1] + (j as f64 + 0.5) * h];
                for (u, wu) in nodes {
                    for (v, wv) in nodes {
                        total += wu * wv * f(&[c[0] + 0.5 * h * u, c[1] + 0.5 * h * v]);
                    }
                }
            }
        }
        total *= 0.25 * h * h;
        assert!((m - total).abs() < 1e-6, "cell {k:?}: {m} vs {total}");
    }
}

#[test]
fn l1_examples() {
    let grid = grid2(0.5);
    let a = GriddedDensity::from_cells(grid.clone(), [(vec![0, 0], 1.0)]).unwrap();
    let b = GriddedDensity::from_cells(grid.clone(), [(vec![3, 1], 1.0)]).unwrap();
    assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
    assert_eq!(l1_distance(&a, &b).unwrap(), 2.0);
    let other = GriddedDensity::from_cells(grid2(0.25), [(vec![0, 0], 1.0)]).unwrap();
    assert!(l1_distance(&a, &other).is_err());
}

#[test]
fn composite_measures_validate_dimensions() {
    let ac = Measure::Squares(SquareCloud::new(2, 0.1, vec![0.0, 0.0], vec![1.0]).unwrap());
    let atoms = AtomCloud::from_points(2, &[([1.0, 1.0], 0.2)]).unwrap();
    let ms = MultiScaleMeasure::new(ac.clone(), atoms).unwrap();
    assert!((ms.total_mass() - 1.2).abs() < 1e-15);
    let wrong = AtomCloud::from_points(1, &[([1.0], 0.2)]).unwrap();
    assert!(MultiScaleMeasure::new(ac.clone(), wrong.clone()).is_err());
    assert!(PopulationVector::new(vec![]).is_err());
    assert!(PopulationVector::new(vec![ac.clone(), Measure::Atoms(wrong)]).is_err());
    assert_eq!(PopulationVector::new(vec![ac.clone(), ac]).unwrap().len(), 2);
}

#[test]
fn rejects_bad_inputs() {
    assert!(GridSpec::new(2, 0.0, vec![0.0, 0.0]).is_err());
    assert!(GridSpec::new(0, 1.0, vec![]).is_err());
    assert!(AtomCloud::new(2, vec![f64::NAN, 0.0], vec![1.0]).is_err());
    assert!(AtomCloud::new(2, vec![0.0, 0.0], vec![-1.0]).is_err());
    let a = Measure::Atoms(AtomCloud::from_points(3, &[([0.0, 0.0, 0.0], 1.0)]).unwrap());
    assert!(grid_project(&a, &grid2(0.1)).is_err());
    assert!(read_measure_str("measure squares dim=2\nsquare 0 0 1\n").is_err());
}
