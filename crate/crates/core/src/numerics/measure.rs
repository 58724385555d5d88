use std::fmt;
use std::sync::Arc;

use super::quad::{integrate_piecewise, neumaier, Node, Singularity, Tolerance};
use super::NumericsError;

/// Tail behaviour of a density; steers extra panel placement beyond the
/// outermost breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailDecay {
    Compact,
    Gaussian,
    Exponential,
    Polynomial,
}

impl TailDecay {
    fn tail_breaks(self, edge: f64, scale: f64, dir: f64, out: &mut Vec<f64>) {
        let steps: &[f64] = match self {
            TailDecay::Compact | TailDecay::Gaussian => &[],
            TailDecay::Exponential => &[2.0, 6.0, 20.0],
            TailDecay::Polynomial => &[2.0, 10.0, 100.0, 1e3, 1e4],
        };
        out.extend(steps.iter().map(|k| edge + dir * k * scale));
    }
}

pub type Pdf = Arc<dyn Fn(&Node) -> f64 + Send + Sync>;

/// Absolutely continuous part of a [`MixedMeasure`].
#[derive(Clone)]
pub struct DensityComponent {
    pub pdf: Pdf,
    pub support: (f64, f64),
    pub breakpoints: Vec<f64>,
    pub singularities: Vec<Singularity>,
    pub decay: TailDecay,
}

impl fmt::Debug for DensityComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityComponent")
            .field("support", &self.support)
            .field("breakpoints", &self.breakpoints)
            .field("singularities", &self.singularities)
            .field("decay", &self.decay)
            .finish_non_exhaustive()
    }
}

/// Extra structure of an integrand `g` in `∫ g dμ`: it vanishes below
/// `lower`, may be singular at listed points, and has features at `breaks`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrandShape {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub breaks: Vec<f64>,
    pub singularities: Vec<Singularity>,
}

/// Finite measure: finitely many atoms plus an optional density.
#[derive(Debug, Clone, Default)]
pub struct MixedMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<DensityComponent>,
}

impl MixedMeasure {
    pub fn atoms_only(atoms: Vec<(f64, f64)>) -> Self {
        Self { atoms, density: None }
    }

    /// `∫ g dμ` with atoms summed exactly.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: Tolerance) -> Result<f64, NumericsError> {
        self.integrate_shaped(|n: &Node| g(n.z), &IntegrandShape::default(), tol)
    }

    /// `∫ g dμ` where `g` receives quadrature nodes and has the given shape.
    /// Singular exponents of `g` and of the density add where they coincide.
    pub fn integrate_shaped<G: Fn(&Node) -> f64>(
        &self,
        g: G,
        shape: &IntegrandShape,
        tol: Tolerance,
    ) -> Result<f64, NumericsError> {
        let atom_sum = neumaier(self.atoms.iter().map(|&(z, w)| {
            if w == 0.0 {
                0.0
            } else {
                w * g(&Node::at(z))
            }
        }));
        if !atom_sum.is_finite() {
            return Err(NumericsError::NonFinite {
                at: self.atoms.first().map_or(f64::NAN, |a| a.0),
            });
        }
        let Some(d) = &self.density else {
            return Ok(atom_sum);
        };
        let lo = shape.lower.map_or(d.support.0, |l| l.max(d.support.0));
        let hi = shape.upper.map_or(d.support.1, |u| u.min(d.support.1));
        if !(hi > lo) {
            return Ok(atom_sum);
        }

        let mut sing: Vec<Singularity> = Vec::new();
        for s in d.singularities.iter().chain(shape.singularities.iter()) {
            if s.at < lo || s.at > hi {
                continue;
            }
            match sing.iter_mut().find(|x| x.at == s.at) {
                Some(x) => x.exponent += s.exponent,
                None => sing.push(*s),
            }
        }
        // Tilting can cancel an endpoint singularity; merged exponents are
        // only a hint, so anything non-negative is treated as regular.
        for s in &mut sing {
            s.exponent = s.exponent.max(-1.0 + 1e-6);
        }

        let mut breaks: Vec<f64> = d.breakpoints.iter().chain(shape.breaks.iter()).copied().collect();
        if let (Some(min), Some(max)) = (
            breaks.iter().copied().filter(|b| b.is_finite()).reduce(f64::min),
            breaks.iter().copied().filter(|b| b.is_finite()).reduce(f64::max),
        ) {
            let scale = (max - min).max(1.0);
            if hi.is_infinite() {
                d.decay.tail_breaks(max, scale, 1.0, &mut breaks);
            }
            if lo.is_infinite() {
                d.decay.tail_breaks(min, scale, -1.0, &mut breaks);
            }
        }

        let pdf = &d.pdf;
        let r = integrate_piecewise(
            |n: &Node| {
                let p = pdf(n);
                if p == 0.0 {
                    0.0
                } else {
                    p * g(n)
                }
            },
            lo,
            hi,
            &breaks,
            &sing,
            tol,
        )?;
        Ok(atom_sum + r.value)
    }

    pub fn total_mass(&self, tol: Tolerance) -> Result<f64, NumericsError> {
        self.integrate(|_| 1.0, tol)
    }
}
