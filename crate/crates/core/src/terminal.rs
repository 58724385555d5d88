//! Terminal laws: finitely many atoms plus an optional absolutely continuous
//! part. Posteriors and restarted laws are densities tilted by the kernel
//! ratio `f_r(z - ξ) / f_T(z)`, kept symbolic so that they can be evaluated
//! exactly at quadrature nodes near the kernel singularity.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{LrbError, Result};
use crate::kernels::KernelFamily;
use crate::numerics::special::ln_gamma;
use crate::numerics::{
    invert_cdf, neumaier, DensityComponent, IntegrandShape, MixedMeasure, Node, Singularity, TailDecay,
    Tolerance,
};

/// Total-mass tolerance of a terminal law.
pub const MASS_TOL: f64 = 1e-10;

pub(crate) const QUAD_TOL: Tolerance = Tolerance { abs: 1e-10, rel: 1e-9, max_panels: 4000 };
const VALIDATION_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-12, max_panels: 4000 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub z: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityFamily {
    Normal { mean: f64, variance: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DensityFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DensityFamily::Normal { mean, variance } => mean.is_finite() && variance > 0.0 && variance.is_finite(),
            DensityFamily::Gamma { shape, scale } => {
                shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()
            }
            DensityFamily::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(LrbError::spec(format!("invalid density parameters {self:?}")))
        }
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        match *self {
            DensityFamily::Normal { mean, variance } => {
                let d = z - mean;
                -0.5 * d * d / variance - 0.5 * (2.0 * std::f64::consts::PI * variance).ln()
            }
            DensityFamily::Gamma { shape, scale } => {
                if !(z > 0.0) {
                    return f64::NEG_INFINITY;
                }
                (shape - 1.0) * z.ln() - z / scale - ln_gamma(shape) - shape * scale.ln()
            }
            DensityFamily::Uniform { lo, hi } => {
                if z >= lo && z <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            DensityFamily::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DensityFamily::Gamma { .. } => (0.0, f64::INFINITY),
            DensityFamily::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DensityFamily::Normal { mean, .. } => mean,
            DensityFamily::Gamma { shape, scale } => shape * scale,
            DensityFamily::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            DensityFamily::Normal { mean, variance } => {
                crate::bridge::gaussian_breaks(mean, variance.sqrt())
            }
            DensityFamily::Gamma { shape, scale } => {
                let (m, sd) = (shape * scale, shape.sqrt() * scale);
                let mut v: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
                    .iter()
                    .flat_map(|k| [m + k * sd, m - k * sd])
                    .filter(|b| *b > 0.0)
                    .collect();
                v.push(m.min(scale));
                v
            }
            DensityFamily::Uniform { .. } => vec![],
        }
    }

    fn singularities(&self) -> Vec<Singularity> {
        match *self {
            DensityFamily::Gamma { shape, .. } if shape != 1.0 => {
                vec![Singularity { at: 0.0, exponent: shape - 1.0 }]
            }
            _ => vec![],
        }
    }

    fn decay(&self) -> TailDecay {
        match self {
            DensityFamily::Normal { .. } => TailDecay::Gaussian,
            DensityFamily::Gamma { .. } => TailDecay::Exponential,
            DensityFamily::Uniform { .. } => TailDecay::Compact,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DensityFamily::Normal { mean, variance } => mean + variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            DensityFamily::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated").sample(rng),
            DensityFamily::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Density `p(u) = f_r(u + c - ξ) · base(u + c) / (ψ · f_T(u + c))`.
#[derive(Debug, Clone)]
pub struct Tilt {
    pub base: Arc<DensityPart>,
    pub kernel: KernelFamily,
    pub horizon: f64,
    pub remaining: f64,
    pub anchor: f64,
    pub shift: f64,
    pub log_norm: f64,
}

impl Tilt {
    /// Kernel anchor in local coordinates.
    fn local_anchor(&self) -> f64 {
        if self.shift == self.anchor {
            0.0
        } else {
            self.anchor - self.shift
        }
    }

    /// Origin of `f_T` in local coordinates.
    fn local_origin(&self) -> f64 {
        -self.shift
    }
}

#[derive(Debug, Clone)]
pub enum DensityPart {
    Family { family: DensityFamily, weight: f64 },
    Tilted(Tilt),
}

impl DensityPart {
    pub fn eval(&self, node: &Node) -> f64 {
        match self {
            DensityPart::Family { family, weight } => {
                // Gamma densities are singular at the origin.
                let z = match family {
                    DensityFamily::Gamma { .. } => node.offset_from(0.0),
                    _ => node.z,
                };
                weight * family.log_pdf(z).exp()
            }
            DensityPart::Tilted(t) => {
                let base = t.base.eval(&node.translated(t.shift));
                if base == 0.0 {
                    return 0.0;
                }
                let a = node.offset_from(t.local_anchor());
                let num = t.kernel.log_law(t.remaining, a);
                if num == f64::NEG_INFINITY {
                    return 0.0;
                }
                let o = node.offset_from(t.local_origin());
                let log = num - t.kernel.log_law(t.horizon, o) - t.log_norm;
                base * log.exp()
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            DensityPart::Family { family, .. } => family.support(),
            DensityPart::Tilted(t) => {
                let (lo, hi) = t.base.support();
                let (mut lo, hi) = (lo - t.shift, hi - t.shift);
                if t.kernel.is_increasing() {
                    lo = lo.max(t.local_anchor()).max(t.local_origin());
                }
                (lo, hi)
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            DensityPart::Family { family, .. } => family.breakpoints(),
            DensityPart::Tilted(t) => {
                let mut v: Vec<f64> = t.base.breakpoints().into_iter().map(|b| b - t.shift).collect();
                let anchor = t.local_anchor();
                v.extend(t.kernel.breaks(t.remaining, anchor));
                if matches!(t.kernel, KernelFamily::Brownian) {
                    // f_r(z - ξ)/f_T(z) is Gaussian in z with mean ξT/s', variance rT/s'.
                    let elapsed = t.horizon - t.remaining;
                    if elapsed > 0.0 {
                        let centre = t.anchor * t.horizon / elapsed - t.shift;
                        let sd = (t.remaining * t.horizon / elapsed).sqrt();
                        v.extend(crate::bridge::gaussian_breaks(centre, sd));
                    }
                }
                v
            }
        }
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        match self {
            DensityPart::Family { family, .. } => family.singularities(),
            DensityPart::Tilted(t) => {
                let mut v: Vec<Singularity> = t
                    .base
                    .singularities()
                    .into_iter()
                    .map(|s| Singularity { at: s.at - t.shift, ..s })
                    .collect();
                if let Some(e) = t.kernel.origin_exponent(t.remaining) {
                    merge(&mut v, Singularity { at: t.local_anchor(), exponent: e });
                }
                if let Some(e) = t.kernel.origin_exponent(t.horizon) {
                    merge(&mut v, Singularity { at: t.local_origin(), exponent: -e });
                }
                v.retain(|s| s.exponent != 0.0);
                v
            }
        }
    }

    pub fn decay(&self) -> TailDecay {
        match self {
            DensityPart::Family { family, .. } => family.decay(),
            DensityPart::Tilted(t) => t.base.decay(),
        }
    }

    pub fn component(self: &Arc<Self>) -> DensityComponent {
        let me = Arc::clone(self);
        DensityComponent {
            pdf: Arc::new(move |n: &Node| me.eval(n)),
            support: self.support(),
            breakpoints: self.breakpoints(),
            singularities: self.singularities(),
            decay: self.decay(),
        }
    }
}

fn merge(v: &mut Vec<Singularity>, s: Singularity) {
    match v.iter_mut().find(|x| x.at == s.at) {
        Some(x) => x.exponent += s.exponent,
        None => v.push(s),
    }
}

/// Mixed terminal law `ν = Σ v_i δ_{z_i} + p(z) dz` with unit total mass.
#[derive(Debug, Clone)]
pub struct TerminalLaw {
    pub atoms: Vec<Atom>,
    pub density: Option<Arc<DensityPart>>,
}

impl TerminalLaw {
    /// Validates non-negative weights and unit total mass.
    pub fn new(atoms: Vec<Atom>, density: Option<DensityPart>) -> Result<Self> {
        for a in &atoms {
            if !a.z.is_finite() || !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(LrbError::spec(format!("invalid atom {a:?}")));
            }
        }
        if let Some(DensityPart::Family { family, weight }) = &density {
            family.validate()?;
            if !(*weight > 0.0 && weight.is_finite()) {
                return Err(LrbError::spec(format!("density weight {weight} must be positive")));
            }
        }
        let law = Self { atoms, density: density.map(Arc::new) };
        let mass = law.measure().integrate(|_| 1.0, VALIDATION_TOL)?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(LrbError::spec(format!("terminal law has total mass {mass}, expected 1")));
        }
        Ok(law)
    }

    pub fn point_mass(z: f64) -> Result<Self> {
        Self::new(vec![Atom { z, weight: 1.0 }], None)
    }

    /// `k₀` with probability `p`, `k₁` with probability `1 - p`.
    pub fn binary(k0: f64, k1: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LrbError::spec(format!("default probability {p} outside (0, 1)")));
        }
        Self::new(vec![Atom { z: k0, weight: p }, Atom { z: k1, weight: 1.0 - p }], None)
    }

    pub fn from_family(family: DensityFamily) -> Result<Self> {
        Self::new(vec![], Some(DensityPart::Family { family, weight: 1.0 }))
    }

    /// Law built without the mass check; used for posteriors whose mass is
    /// one by construction.
    pub(crate) fn unchecked(atoms: Vec<Atom>, density: Option<Arc<DensityPart>>) -> Self {
        Self { atoms, density }
    }

    pub fn measure(&self) -> MixedMeasure {
        MixedMeasure {
            atoms: self.atoms.iter().map(|a| (a.z, a.weight)).collect(),
            density: self.density.as_ref().map(|d| d.component()),
        }
    }

    /// `∫ g dν`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        Ok(self.measure().integrate(g, QUAD_TOL)?)
    }

    pub(crate) fn integrate_shaped<G: Fn(&Node) -> f64>(
        &self,
        g: G,
        shape: &IntegrandShape,
        tol: Tolerance,
    ) -> Result<f64> {
        Ok(self.measure().integrate_shaped(g, shape, tol)?)
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.integrate(|_| 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate(|z| z)
    }

    pub fn atom_mass(&self) -> f64 {
        neumaier(self.atoms.iter().map(|a| a.weight))
    }

    /// Density of the continuous part at `z` (zero without one).
    pub fn density_at(&self, z: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.eval(&Node::at(z)))
    }

    pub fn weight_at(&self, z: f64) -> f64 {
        self.atoms.iter().filter(|a| a.z == z).map(|a| a.weight).sum()
    }

    /// Essential infimum and supremum of the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in self.atoms.iter().filter(|a| a.weight > 0.0) {
            lo = lo.min(a.z);
            hi = hi.max(a.z);
        }
        if let Some(d) = &self.density {
            let (a, b) = d.support();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Draw from the law. Family densities are sampled exactly; tilted
    /// densities by numeric inversion of their distribution function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight;
            if u < acc {
                return Ok(a.z);
            }
        }
        match &self.density {
            None => Ok(self
                .atoms
                .iter()
                .rev()
                .find(|a| a.weight > 0.0)
                .map(|a| a.z)
                .ok_or_else(|| LrbError::spec("terminal law has no mass"))?),
            Some(d) => match d.as_ref() {
                DensityPart::Family { family, .. } => Ok(family.sample(rng)),
                DensityPart::Tilted(_) => {
                    let v: f64 = rng.random();
                    let (lo, hi) = d.support();
                    let sing = d.singularities();
                    let sing: Vec<_> = sing.into_iter().map(|s| Singularity { exponent: s.exponent.max(-1.0 + 1e-6), ..s }).collect();
                    Ok(invert_cdf(|n: &Node| d.eval(n), lo, hi, &d.breakpoints(), &sing, v, QUAD_TOL)?)
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_is_validated() {
        assert!(TerminalLaw::new(vec![Atom { z: 0.0, weight: 0.4 }], None).is_err());
        assert!(TerminalLaw::new(vec![Atom { z: 0.0, weight: -0.1 }, Atom { z: 1.0, weight: 1.1 }], None).is_err());
        let mixed = TerminalLaw::new(
            vec![Atom { z: 0.0, weight: 0.5 }],
            Some(DensityPart::Family { family: DensityFamily::Uniform { lo: 0.0, hi: 1.0 }, weight: 0.5 }),
        )
        .unwrap();
        assert!((mixed.mean().unwrap() - 0.25).abs() < 1e-12);
        assert!(TerminalLaw::from_family(DensityFamily::Gamma { shape: -1.0, scale: 1.0 }).is_err());
    }

    #[test]
    fn family_moments() {
        let g = TerminalLaw::from_family(DensityFamily::Gamma { shape: 0.5, scale: 2.0 }).unwrap();
        assert!((g.mean().unwrap() - 1.0).abs() < 1e-9);
        let n = TerminalLaw::from_family(DensityFamily::Normal { mean: 0.5, variance: 2.0 }).unwrap();
        assert!((n.integrate(|z| (z - 0.5).powi(2)).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn binary_law() {
        let b = TerminalLaw::binary(0.0, 1.0, 0.3).unwrap();
        assert!((b.mean().unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(b.support_bounds(), (0.0, 1.0));
        assert!(TerminalLaw::binary(0.0, 1.0, 1.0).is_err());
    }
}
