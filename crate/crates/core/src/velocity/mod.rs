//! Measure-dependent velocity fields `v[mu] = v_d + v_i[mu]`.
//!
//! The interaction part pushes each point away from the kernel-weighted
//! center of mass `x*` of the crowd around it:
//!
//! ```text
//! phi(x) = sum_j m_j eta(x - y_j)
//! x*     = sum_j m_j eta(x - y_j) y_j / phi(x)
//! v_i(x) = s (x - x*) f(phi(x))
//! ```
//!
//! with `v_i(x) = 0` where `phi(x) = 0`. A negative strength `s` turns the
//! repulsion into attraction. All constants assume measures of total mass
//! at most one.

mod f1;
mod kernel;

pub use f1::{f1_discontinuity_demo, F1Report, F1Row};
pub use kernel::{KernelShape, KernelSpec};
pub(crate) use kernel::NeighborIndex;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::measure::AtomCloud;
use crate::transport::wasserstein_atoms;

/// The weight `f` applied to the kernel mass `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `f(x) = x^alpha` with `alpha >= 1`.
    Power(f64),
    /// `f = 1`; the resulting field is not Lipschitz in the measure.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionSpec {
    pub kernel: KernelSpec,
    pub weight: Weight,
    pub strength: f64,
}

impl InteractionSpec {
    pub fn new(kernel: KernelSpec, weight: Weight, strength: f64) -> Result<Self> {
        if let Weight::Power(alpha) = weight {
            if !(alpha >= 1.0) || !alpha.is_finite() {
                return Err(invalid(format!("exponent alpha must be >= 1, got {alpha}")));
            }
        }
        if !strength.is_finite() {
            return Err(Error::NonFinite("interaction strength"));
        }
        Ok(Self {
            kernel,
            weight,
            strength,
        })
    }

    /// Unit-strength power law.
    pub fn power(kernel: KernelSpec, alpha: f64) -> Result<Self> {
        Self::new(kernel, Weight::Power(alpha), 1.0)
    }
}

/// A Lipschitz, bounded desired velocity with closed-form constants.
#[derive(Debug, Clone, PartialEq)]
pub enum DesiredField {
    Zero,
    Constant(Vec<f64>),
    /// `gain (target - x)`, radially clamped to norm `max_speed`.
    AffineToTarget {
        target: Vec<f64>,
        gain: f64,
        max_speed: f64,
    },
}

impl DesiredField {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_dim = |v: &[f64]| {
            if v.len() != dim {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                })
            } else {
                crate::measure::check_finite(v, "desired field")
            }
        };
        match self {
            DesiredField::Zero => Ok(()),
            DesiredField::Constant(u) => check_dim(u),
            DesiredField::AffineToTarget {
                target,
                gain,
                max_speed,
            } => {
                check_dim(target)?;
                if !(*gain >= 0.0) || !(*max_speed >= 0.0) || !gain.is_finite() || !max_speed.is_finite() {
                    return Err(invalid("gain and max_speed must be finite and nonnegative"));
                }
                Ok(())
            }
        }
    }

    /// Adds the field value at `x` to `out`.
    #[inline]
    pub fn add_to(&self, x: &[f64], out: &mut [f64]) {
        match self {
            DesiredField::Zero => {}
            DesiredField::Constant(u) => {
                for (o, ui) in out.iter_mut().zip(u) {
                    *o += ui;
                }
            }
            DesiredField::AffineToTarget {
                target,
                gain,
                max_speed,
            } => {
                let mut norm2 = 0.0;
                for (t, xi) in target.iter().zip(x) {
                    norm2 += (gain * (t - xi)).powi(2);
                }
                let norm = norm2.sqrt();
                let scale = if norm > *max_speed { max_speed / norm } else { 1.0 };
                for ((o, t), xi) in out.iter_mut().zip(target).zip(x) {
                    *o += scale * gain * (t - xi);
                }
            }
        }
    }

    /// `(L_d, M_d)`: spatial Lipschitz constant and sup bound.
    pub fn constants(&self) -> (f64, f64) {
        match self {
            DesiredField::Zero => (0.0, 0.0),
            DesiredField::Constant(u) => (0.0, u.iter().map(|c| c * c).sum::<f64>().sqrt()),
            DesiredField::AffineToTarget { gain, max_speed, .. } => (*gain, *max_speed),
        }
    }
}

/// Constants of the Lipschitz hypothesis: `|v| <= M`, `v` is `L`-Lipschitz
/// in space and `K`-Lipschitz in the measure with respect to `W_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisConstants {
    pub l: f64,
    pub m: f64,
    pub k: f64,
}

fn interaction_exponent(spec: &InteractionSpec) -> Result<f64> {
    match spec.weight {
        Weight::Power(alpha) => Ok(alpha),
        Weight::Constant => Err(Error::Uncertified(
            "f = 1 has no finite Lipschitz constant in the measure".into(),
        )),
    }
}

/// Constants of a power-law interaction plus a desired field:
/// `M_i = |s| R peak^alpha`, `L_i = K = |s| peak^(alpha - 1) R L_eta`.
///
/// For the cone these are sharp upper bounds when `alpha = 1`. For
/// `alpha > 1` they omit the variation of `phi^(alpha - 1)`; see
/// [`certify_constants_rigorous`].
pub fn certify_constants(spec: &InteractionSpec, desired: (f64, f64)) -> Result<HypothesisConstants> {
    let alpha = interaction_exponent(spec)?;
    let KernelSpec { radius, peak, .. } = spec.kernel;
    let s = spec.strength.abs();
    let m_i = s * radius * peak.powf(alpha);
    let l_i = s * peak.powf(alpha - 1.0) * radius * spec.kernel.lipschitz();
    Ok(HypothesisConstants {
        l: desired.0 + l_i,
        m: desired.1 + m_i,
        k: l_i,
    })
}

/// Constants that also account for the product rule on `phi^(alpha - 1) G`:
/// `L_i = K = |s| peak^(alpha - 1) (Lip(eta(z) z) + (alpha - 1) R L_eta)`.
pub fn certify_constants_rigorous(spec: &InteractionSpec, desired: (f64, f64)) -> Result<HypothesisConstants> {
    let alpha = interaction_exponent(spec)?;
    let KernelSpec { radius, peak, .. } = spec.kernel;
    let s = spec.strength.abs();
    let m_i = s * radius * peak.powf(alpha);
    let l_i = s
        * peak.powf(alpha - 1.0)
        * (spec.kernel.moment_lipschitz() + (alpha - 1.0) * radius * spec.kernel.lipschitz());
    Ok(HypothesisConstants {
        l: desired.0 + l_i,
        m: desired.1 + m_i,
        k: l_i,
    })
}

/// Desired field plus optional interaction, with certified constants when
/// the interaction admits them.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub desired: DesiredField,
    pub interaction: Option<InteractionSpec>,
    pub certified: Option<HypothesisConstants>,
}

impl VelocityModel {
    /// Certifies with [`certify_constants`]; `f = 1` models stay uncertified.
    pub fn new(desired: DesiredField, interaction: Option<InteractionSpec>) -> Self {
        let dc = desired.constants();
        let certified = match &interaction {
            None => Some(HypothesisConstants {
                l: dc.0,
                m: dc.1,
                k: 0.0,
            }),
            Some(spec) => certify_constants(spec, dc).ok(),
        };
        Self {
            desired,
            interaction,
            certified,
        }
    }

    pub fn zero() -> Self {
        Self::new(DesiredField::Zero, None)
    }

    pub fn translation(u: Vec<f64>) -> Self {
        Self::new(DesiredField::Constant(u), None)
    }

    /// Replaces the certified constants by the rigorous variant.
    pub fn with_rigorous_constants(mut self) -> Self {
        if let Some(spec) = &self.interaction {
            self.certified = certify_constants_rigorous(spec, self.desired.constants()).ok();
        }
        self
    }

    pub fn constants(&self) -> Result<HypothesisConstants> {
        self.certified
            .ok_or_else(|| Error::Uncertified("velocity model has no finite constants".into()))
    }

    /// Freezes the field against the measure `mu`.
    pub fn freeze<'a>(&'a self, mu: &AtomCloud) -> FrozenField<'a> {
        FrozenField::new(self, mu)
    }
}

/// Interaction velocity at `x` against atoms listed by `visit`.
#[inline]
fn interaction_at(
    spec: &InteractionSpec,
    x: &[f64],
    sources: impl FnOnce(&mut dyn FnMut(&[f64], f64)),
    out: &mut [f64],
) {
    let dim = x.len();
    let mut phi = 0.0;
    let mut g = [0.0f64; 8];
    let mut g_heap = if dim > 8 { vec![0.0; dim] } else { Vec::new() };
    let gbuf: &mut [f64] = if dim > 8 { &mut g_heap } else { &mut g[..dim] };
    let mut visit = |y: &[f64], m: f64| {
        let mut r2 = 0.0;
        for d in 0..dim {
            r2 += (x[d] - y[d]) * (x[d] - y[d]);
        }
        let w = spec.kernel.eval_radial(r2.sqrt());
        if w > 0.0 {
            let mw = m * w;
            phi += mw;
            for d in 0..dim {
                gbuf[d] += mw * (x[d] - y[d]);
            }
        }
    };
    sources(&mut visit);
    if phi == 0.0 {
        return;
    }
    // (x - x*) f(phi) = G f(phi) / phi with G = sum m eta(x - y) (x - y).
    let factor = spec.strength
        * match spec.weight {
            Weight::Power(alpha) if alpha == 1.0 => 1.0,
            Weight::Power(alpha) => phi.powf(alpha - 1.0),
            Weight::Constant => 1.0 / phi,
        };
    for d in 0..dim {
        out[d] += factor * gbuf[d];
    }
}

/// Interaction velocity of `mu` at `x`.
pub fn eval_interaction(mu: &AtomCloud, x: &[f64], spec: &InteractionSpec) -> Result<Vec<f64>> {
    if x.len() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: x.len(),
        });
    }
    crate::measure::check_finite(x, "evaluation point")?;
    let mut out = vec![0.0; x.len()];
    interaction_at(
        spec,
        x,
        |visit| {
            for (y, m) in mu.iter() {
                visit(y, m);
            }
        },
        &mut out,
    );
    Ok(out)
}

/// Full velocity `v_d(x) + v_i[mu](x)`.
pub fn eval_velocity(mu: &AtomCloud, x: &[f64], model: &VelocityModel) -> Result<Vec<f64>> {
    let mut out = match &model.interaction {
        Some(spec) => eval_interaction(mu, x, spec)?,
        None => {
            crate::measure::check_finite(x, "evaluation point")?;
            vec![0.0; x.len()]
        }
    };
    model.desired.add_to(x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("velocity"));
    }
    Ok(out)
}

/// `v[mu]` for a fixed `mu`, with a spatial index over the atoms of `mu`.
#[derive(Debug, Clone)]
pub struct FrozenField<'a> {
    model: &'a VelocityModel,
    index: Option<NeighborIndex>,
    dim: usize,
}

impl<'a> FrozenField<'a> {
    pub fn new(model: &'a VelocityModel, mu: &AtomCloud) -> Self {
        let index = model
            .interaction
            .as_ref()
            .map(|spec| NeighborIndex::new(mu, spec.kernel.radius));
        Self {
            model,
            index,
            dim: mu.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `v(x)` into `out`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if let (Some(spec), Some(index)) = (&self.model.interaction, &self.index) {
            interaction_at(spec, x, |visit| index.for_each_near(x, visit), out);
        }
        self.model.desired.add_to(x, out);
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Velocities at many points (flattened), evaluated in parallel.
    pub fn eval_many(&self, points: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim;
        let mut out = vec![0.0; points.len()];
        out.par_chunks_mut(dim)
            .zip(points.par_chunks(dim))
            .for_each(|(o, x)| self.eval_into(x, o));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("velocity"));
        }
        Ok(out)
    }
}

/// Largest observed `sup_x |v[mu](x) - v[nu](x)| / W_p(mu, nu)` over the
/// sample pairs, with the supremum taken over `lattice` (flattened points).
pub fn empirical_k(
    spec: &InteractionSpec,
    pairs: &[(AtomCloud, AtomCloud)],
    p: f64,
    lattice: &[f64],
) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(invalid("empirical K needs at least two sample pairs"));
    }
    let model = VelocityModel::new(DesiredField::Zero, Some(*spec));
    let ratios = pairs
        .par_iter()
        .map(|(mu, nu)| -> Result<f64> {
            let w = wasserstein_atoms(mu, nu, p)?.value;
            if w == 0.0 {
                return Err(invalid("sample pair at Wasserstein distance zero"));
            }
            let a = model.freeze(mu).eval_many(lattice)?;
            let b = model.freeze(nu).eval_many(lattice)?;
            let dim = mu.dim();
            let sup = a
                .chunks_exact(dim)
                .zip(b.chunks_exact(dim))
                .map(|(x, y)| x.iter().zip(y).map(|(s, t)| (s - t) * (s - t)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            Ok(sup / w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}
