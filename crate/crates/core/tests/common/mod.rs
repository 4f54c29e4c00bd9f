#![allow(dead_code)]

use proptest::prelude::*;
use wasserflow::measure::{AtomCloud, SquareCloud};

/// Atom cloud with `1..max` atoms in `[-h, h]^dim` rescaled to `mass`.
pub fn cloud(dim: usize, max: usize, h: f64, mass: f64) -> impl Strategy<Value = AtomCloud> {
    prop::collection::vec((prop::collection::vec(-h..h, dim), 0.05f64..1.0), 1..max).prop_map(move |atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let pos = atoms.iter().flat_map(|a| a.0.clone()).collect();
        let masses = atoms.iter().map(|a| a.1 / total * mass).collect();
        AtomCloud::new(dim, pos, masses).unwrap()
    })
}

/// `k` atoms of mass `1/k` in `[-h, h]^dim`.
pub fn equal_cloud(dim: usize, k: usize, h: f64) -> impl Strategy<Value = AtomCloud> {
    prop::collection::vec(-h..h, dim * k)
        .prop_map(move |pos| AtomCloud::new(dim, pos, vec![1.0 / k as f64; k]).unwrap())
}

/// Mass-1 square cloud of side `side` with `1..max` squares in `[-h, h]^dim`.
pub fn squares(dim: usize, max: usize, h: f64, side: f64) -> impl Strategy<Value = SquareCloud> {
    cloud(dim, max, h, 1.0).prop_map(move |a| SquareCloud::new(dim, side, a.positions().to_vec(), a.masses().to_vec()).unwrap())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}
