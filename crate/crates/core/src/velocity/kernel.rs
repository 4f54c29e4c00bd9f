use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::measure::AtomCloud;

/// Radial profile of an interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelShape {
    /// `eta(z) = peak * max(0, 1 - |z| / R)`.
    Cone,
}

impl KernelShape {
    pub fn name(&self) -> &'static str {
        match self {
            KernelShape::Cone => "cone",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cone" => Ok(KernelShape::Cone),
            other => Err(invalid(format!("unknown kernel shape {other:?}"))),
        }
    }
}

/// Nonnegative, Lipschitz, compactly supported kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub radius: f64,
    pub peak: f64,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, radius: f64, peak: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("kernel radius must be positive, got {radius}")));
        }
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(invalid(format!("kernel peak must be positive, got {peak}")));
        }
        Ok(Self {
            shape,
            radius,
            peak,
        })
    }

    pub fn cone(radius: f64, peak: f64) -> Result<Self> {
        Self::new(KernelShape::Cone, radius, peak)
    }

    /// Kernel value at a point at distance `r` from the origin.
    #[inline]
    pub fn eval_radial(&self, r: f64) -> f64 {
        match self.shape {
            KernelShape::Cone => {
                if r < self.radius {
                    self.peak * (1.0 - r / self.radius)
                } else {
                    0.0
                }
            }
        }
    }

    /// Lipschitz constant of the kernel.
    pub fn lipschitz(&self) -> f64 {
        match self.shape {
            KernelShape::Cone => self.peak / self.radius,
        }
    }

    /// Lipschitz constant of `z -> eta(z) z`.
    pub fn moment_lipschitz(&self) -> f64 {
        match self.shape {
            // Radial derivative peak (1 - 2r/R), tangential peak (1 - r/R).
            KernelShape::Cone => self.peak,
        }
    }
}

/// Uniform bins of side `R` over a weighted point set. Points interacting
/// with a query lie in the `3^n` bins around the query's bin.
#[derive(Debug, Clone)]
pub(crate) struct NeighborIndex {
    dim: usize,
    side: f64,
    bins: HashMap<Vec<i64>, (usize, usize)>,
    positions: Vec<f64>,
    masses: Vec<f64>,
    offsets: Vec<Vec<i64>>,
    brute: bool,
}

impl NeighborIndex {
    pub fn new(cloud: &AtomCloud, side: f64) -> Self {
        let dim = cloud.dim();
        // Beyond three dimensions the 3^n stencil stops paying off.
        let brute = dim > 3;
        let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|c| (c / side).floor() as i64).collect() };
        let mut order: Vec<(Vec<i64>, usize)> = cloud
            .iter()
            .enumerate()
            .filter(|(_, (_, m))| *m > 0.0)
            .map(|(i, (x, _))| (if brute { Vec::new() } else { key(x) }, i))
            .collect();
        order.sort();
        let mut positions = Vec::with_capacity(order.len() * dim);
        let mut masses = Vec::with_capacity(order.len());
        let mut bins: HashMap<Vec<i64>, (usize, usize)> = HashMap::new();
        for (k, i) in &order {
            let slot = masses.len();
            positions.extend_from_slice(cloud.position(*i));
            masses.push(cloud.mass(*i));
            bins.entry(k.clone()).or_insert((slot, slot)).1 = slot + 1;
        }
        let mut offsets = vec![Vec::new()];
        if !brute {
            for _ in 0..dim {
                offsets = offsets
                    .into_iter()
                    .flat_map(|o: Vec<i64>| {
                        (-1..=1).map(move |d| {
                            let mut o = o.clone();
                            o.push(d);
                            o
                        })
                    })
                    .collect();
            }
        }
        Self {
            dim,
            side,
            bins,
            positions,
            masses,
            offsets,
            brute,
        }
    }

    /// Calls `visit(y, mass)` for every stored point that may lie within one
    /// bin side of `x`, in a fixed order.
    #[inline]
    pub fn for_each_near(&self, x: &[f64], mut visit: impl FnMut(&[f64], f64)) {
        if self.brute {
            for (y, m) in self.positions.chunks_exact(self.dim).zip(&self.masses) {
                visit(y, *m);
            }
            return;
        }
        let mut key = vec![0i64; self.dim];
        let base: Vec<i64> = x.iter().map(|c| (c / self.side).floor() as i64).collect();
        for off in &self.offsets {
            for d in 0..self.dim {
                key[d] = base[d] + off[d];
            }
            if let Some(&(a, b)) = self.bins.get(&key[..]) {
                for s in a..b {
                    visit(&self.positions[s * self.dim..(s + 1) * self.dim], self.masses[s]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_values() {
        let k = KernelSpec::cone(2.0, 3.0).unwrap();
        assert_eq!(k.eval_radial(0.0), 3.0);
        assert_eq!(k.eval_radial(1.0), 1.5);
        assert_eq!(k.eval_radial(2.0), 0.0);
        assert_eq!(k.lipschitz(), 1.5);
        assert!(KernelSpec::cone(0.0, 1.0).is_err());
    }

    #[test]
    fn index_finds_every_close_point() {
        let pts: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.05 - 2.5).collect();
        let cloud = AtomCloud::new(2, pts, vec![1.0; 100]).unwrap();
        let index = NeighborIndex::new(&cloud, 0.4);
        let x = [0.13, -0.27];
        let mut found = 0;
        index.for_each_near(&x, |y, _| {
            let d = ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt();
            if d < 0.4 {
                found += 1;
            }
        });
        let expected = cloud
            .iter()
            .filter(|(y, _)| ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt() < 0.4)
            .count();
        assert_eq!(found, expected);
    }
}
