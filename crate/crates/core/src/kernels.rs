//! Marginal-law families of the driving Lévy process: the standard Brownian
//! density, the unit-scale gamma density with shape rate `m`, and the Poisson
//! lattice mass function on the integers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{LrbError, Result};
use crate::numerics::special::{gamma_reg_lower, ln_gamma, norm_cdf};
use crate::numerics::Singularity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Brownian,
    Gamma { m: f64 },
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelClass {
    Continuous,
    Discrete,
}

const HINT_MULTIPLES: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

impl KernelFamily {
    pub fn gamma(m: f64) -> Result<Self> {
        let k = KernelFamily::Gamma { m };
        k.validate()?;
        Ok(k)
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        let k = KernelFamily::Poisson { lambda };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelFamily::Brownian => Ok(()),
            KernelFamily::Gamma { m } if m > 0.0 && m.is_finite() => Ok(()),
            KernelFamily::Gamma { m } => Err(LrbError::spec(format!("gamma rate m = {m} must be positive"))),
            KernelFamily::Poisson { lambda } if lambda > 0.0 && lambda.is_finite() => Ok(()),
            KernelFamily::Poisson { lambda } => {
                Err(LrbError::spec(format!("poisson intensity lambda = {lambda} must be positive")))
            }
        }
    }

    pub fn class(&self) -> KernelClass {
        match self {
            KernelFamily::Poisson { .. } => KernelClass::Discrete,
            _ => KernelClass::Continuous,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.class() == KernelClass::Discrete
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Brownian => "brownian",
            KernelFamily::Gamma { .. } => "gamma",
            KernelFamily::Poisson { .. } => "poisson",
        }
    }

    /// Increasing paths (subordinators).
    pub fn is_increasing(&self) -> bool {
        !matches!(self, KernelFamily::Brownian)
    }

    /// Lower end of the support of every marginal.
    pub fn support_lower(&self) -> f64 {
        match self {
            KernelFamily::Brownian => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(LrbError::domain(format!("time {t} must be positive")))
        }
    }

    /// `f_t(x)`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        Self::check_time(t)?;
        if self.is_discrete() {
            return Err(LrbError::ClassMismatch { expected: "continuous" });
        }
        Ok(self.law(t, x))
    }

    /// `Q_t(i)`.
    pub fn mass(&self, t: f64, i: i64) -> Result<f64> {
        Self::check_time(t)?;
        if !self.is_discrete() {
            return Err(LrbError::ClassMismatch { expected: "discrete" });
        }
        Ok(self.law(t, i as f64))
    }

    /// Density or lattice mass at `x`, without argument checks. Lattice
    /// kernels give zero off the integers.
    pub fn law(&self, t: f64, x: f64) -> f64 {
        self.log_law(t, x).exp()
    }

    pub fn log_law(&self, t: f64, x: f64) -> f64 {
        match *self {
            KernelFamily::Brownian => {
                -0.5 * x * x / t - 0.5 * (2.0 * std::f64::consts::PI * t).ln()
            }
            KernelFamily::Gamma { m } => {
                if !(x > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let a = m * t;
                (a - 1.0) * x.ln() - x - ln_gamma(a)
            }
            KernelFamily::Poisson { lambda } => {
                if x < 0.0 || x.fract() != 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mu = lambda * t;
                if x == 0.0 {
                    -mu
                } else {
                    x * mu.ln() - mu - ln_gamma(x + 1.0)
                }
            }
        }
    }

    /// `P(L_t ≤ x)` for the unconditioned process.
    pub fn cdf(&self, t: f64, x: f64) -> f64 {
        match *self {
            KernelFamily::Brownian => norm_cdf(x / t.sqrt()),
            KernelFamily::Gamma { m } => gamma_reg_lower(m * t, x),
            KernelFamily::Poisson { .. } => {
                if x < 0.0 {
                    return 0.0;
                }
                let top = x.floor() as i64;
                crate::numerics::neumaier((0..=top).map(|i| self.law(t, i as f64))).min(1.0)
            }
        }
    }

    pub fn mean(&self, t: f64) -> f64 {
        match *self {
            KernelFamily::Brownian => 0.0,
            KernelFamily::Gamma { m } => m * t,
            KernelFamily::Poisson { lambda } => lambda * t,
        }
    }

    pub fn variance(&self, t: f64) -> f64 {
        match *self {
            KernelFamily::Brownian => t,
            KernelFamily::Gamma { m } => m * t,
            KernelFamily::Poisson { lambda } => lambda * t,
        }
    }

    /// Exponent `e` with `f_t(x) ~ x^e` as `x → 0+`, for kernels whose
    /// density has an algebraic origin.
    pub fn origin_exponent(&self, t: f64) -> Option<f64> {
        match *self {
            KernelFamily::Gamma { m } => Some(m * t - 1.0),
            _ => None,
        }
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        Self::check_time(dt)?;
        Ok(match *self {
            KernelFamily::Brownian => dt.sqrt() * rng.sample::<f64, _>(StandardNormal),
            KernelFamily::Gamma { m } => unit_gamma(m * dt).sample(rng),
            KernelFamily::Poisson { lambda } => Poisson::new(lambda * dt)
                .map_err(|e| LrbError::domain(format!("poisson sampler: {e}")))?
                .sample(rng),
        })
    }

    /// Feature points of `x ↦ f_t(x - anchor)` for panel placement.
    pub(crate) fn breaks(&self, t: f64, anchor: f64) -> Vec<f64> {
        let sd = self.variance(t).sqrt();
        let centre = anchor + self.mean(t);
        let mut out = vec![centre];
        for k in HINT_MULTIPLES {
            out.push(centre + k * sd);
            out.push(centre - k * sd);
        }
        if self.is_increasing() {
            out.retain(|b| *b > anchor);
            out.push(anchor);
        }
        out
    }

    /// Endpoint singularity of `x ↦ f_t(x - anchor)`, if any.
    pub(crate) fn singularity(&self, t: f64, anchor: f64) -> Option<Singularity> {
        self.origin_exponent(t)
            .filter(|e| *e < 0.0)
            .map(|exponent| Singularity { at: anchor, exponent })
    }

    /// Smallest and largest lattice points carrying non-negligible mass
    /// (`Q_t` below `1e-18` of the total is dropped).
    #[cfg(test)]
    pub(crate) fn lattice_range(&self, t: f64) -> (i64, i64) {
        let mu = self.mean(t);
        let sd = self.variance(t).sqrt();
        let hi = (mu + 12.0 * sd + 40.0).ceil() as i64;
        (0, hi)
    }
}

pub(crate) fn unit_gamma(shape: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0).expect("gamma shape is validated positive")
}
