//! Lévy bridges: the driving process started at `(s, x)` and pinned to `z` at
//! time `T`, with transition laws, distribution functions and exact samplers.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{LrbError, Result};
use crate::kernels::{unit_gamma, KernelFamily};
use crate::numerics::special::{beta_reg, ln_choose, norm_cdf};
use crate::numerics::{brent, integrate_piecewise, neumaier, Node, Singularity, Tolerance};
use crate::sampler::SamplePath;

/// Quadrature tolerance for numeric distribution functions.
const CDF_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-12, max_panels: 4000 };
const ROOT_XTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSpec {
    pub kernel: KernelFamily,
    pub s: f64,
    pub x: f64,
    pub horizon: f64,
    pub z: f64,
    log_pin: f64,
}

impl BridgeSpec {
    pub fn new(kernel: KernelFamily, s: f64, x: f64, horizon: f64, z: f64) -> Result<Self> {
        kernel.validate()?;
        if !(s >= 0.0 && s < horizon && horizon.is_finite()) {
            return Err(LrbError::domain(format!("bridge needs 0 <= s < T, got s = {s}, T = {horizon}")));
        }
        if !x.is_finite() || !z.is_finite() {
            return Err(LrbError::domain("bridge endpoints must be finite"));
        }
        if kernel.is_discrete() && (x.fract() != 0.0 || z.fract() != 0.0) {
            return Err(LrbError::domain(format!("lattice bridge endpoints {x}, {z} must be integers")));
        }
        let elapsed = horizon - s;
        let increment = z - x;
        let log_pin = kernel.log_law(elapsed, increment);
        let value = log_pin.exp();
        if !(value > 0.0 && value.is_finite()) {
            return Err(LrbError::InvalidPin { elapsed, increment, value });
        }
        Ok(Self { kernel, s, x, horizon, z, log_pin })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.s && t < self.horizon {
            Ok(())
        } else {
            Err(LrbError::domain(format!(
                "time {t} outside the open bridge interval ({}, {})",
                self.s, self.horizon
            )))
        }
    }

    /// Log bridge law at `t` in terms of `a = y - x` and `b = z - y`.
    #[inline]
    pub(crate) fn log_law_offsets(&self, t: f64, a: f64, b: f64) -> f64 {
        self.kernel.log_law(t - self.s, a) + self.kernel.log_law(self.horizon - t, b) - self.log_pin
    }

    /// Bridge law at `t` without argument checks (density or lattice mass).
    pub(crate) fn law(&self, t: f64, y: f64) -> f64 {
        self.log_law_offsets(t, y - self.x, self.z - y).exp()
    }

    /// `f_{t-s}(y-x) f_{T-t}(z-y) / f_{T-s}(z-x)`.
    pub fn transition_density(&self, t: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        if self.kernel.is_discrete() {
            return Err(LrbError::ClassMismatch { expected: "continuous" });
        }
        Ok(self.law(t, y))
    }

    /// `Q_{t-s}(j-i) Q_{T-t}(k-j) / Q_{T-s}(k-i)`.
    pub fn transition_mass(&self, t: f64, j: i64) -> Result<f64> {
        self.check_time(t)?;
        if !self.kernel.is_discrete() {
            return Err(LrbError::ClassMismatch { expected: "discrete" });
        }
        Ok(self.law(t, j as f64))
    }

    /// Mean and variance of the Brownian bridge marginal at `t`.
    pub fn gaussian_moments(&self, t: f64) -> (f64, f64) {
        let (s, big_t) = (self.s, self.horizon);
        let mean = ((big_t - t) * self.x + (t - s) * self.z) / (big_t - s);
        let var = (t - s) * (big_t - t) / (big_t - s);
        (mean, var)
    }

    /// Beta shapes `(m(t-s), m(T-t))` of the normalised gamma bridge.
    fn beta_shapes(&self, t: f64, m: f64) -> (f64, f64) {
        (m * (t - self.s), m * (self.horizon - t))
    }

    /// Binomial `(n, p)` of the lattice bridge increment.
    fn binomial(&self, t: f64) -> (u64, f64) {
        let n = (self.z - self.x) as u64;
        (n, (t - self.s) / (self.horizon - self.s))
    }

    /// `P(L_t ≤ y)` under the bridge, in closed form.
    pub fn cdf(&self, t: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kernel {
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                norm_cdf((y - mean) / var.sqrt())
            }
            KernelFamily::Gamma { m } => {
                let (a, b) = self.beta_shapes(t, m);
                let d = self.z - self.x;
                if y <= self.x {
                    0.0
                } else if y >= self.z {
                    1.0
                } else if y - self.x <= self.z - y {
                    beta_reg(a, b, (y - self.x) / d)
                } else {
                    1.0 - beta_reg(b, a, (self.z - y) / d)
                }
            }
            KernelFamily::Poisson { .. } => {
                let (n, p) = self.binomial(t);
                let top = (y - self.x).floor();
                if top < 0.0 {
                    0.0
                } else {
                    let top = (top as u64).min(n);
                    neumaier((0..=top).map(|j| binomial_pmf(n, p, j))).min(1.0)
                }
            }
        })
    }

    /// `P(L_t > y)` under the bridge, in closed form. Computed directly, not
    /// as `1 - cdf`, so that small upper tails keep their digits.
    pub fn sf(&self, t: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kernel {
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                norm_cdf((mean - y) / var.sqrt())
            }
            KernelFamily::Gamma { m } => {
                let (a, b) = self.beta_shapes(t, m);
                let d = self.z - self.x;
                if y <= self.x {
                    1.0
                } else if y >= self.z {
                    0.0
                } else if self.z - y <= y - self.x {
                    beta_reg(b, a, (self.z - y) / d)
                } else {
                    1.0 - beta_reg(a, b, (y - self.x) / d)
                }
            }
            KernelFamily::Poisson { .. } => {
                let (n, p) = self.binomial(t);
                let first = (y - self.x).floor() + 1.0;
                let first = first.max(0.0) as u64;
                if first > n {
                    0.0
                } else {
                    neumaier((first..=n).map(|j| binomial_pmf(n, p, j))).min(1.0)
                }
            }
        })
    }

    /// `P(L_t ≤ y)` by quadrature (continuous) or summation (lattice) of the
    /// bridge law, independent of the closed forms in [`cdf`](Self::cdf).
    pub fn cdf_numeric(&self, t: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        match self.kernel {
            KernelFamily::Poisson { .. } => {
                let top = (y - self.x).floor();
                if top < 0.0 {
                    return Ok(0.0);
                }
                let n = (self.z - self.x) as i64;
                let top = (top as i64).min(n);
                Ok(neumaier((0..=top).map(|j| self.law(t, self.x + j as f64))).min(1.0))
            }
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                let breaks = gaussian_breaks(mean, var.sqrt());
                let r = integrate_piecewise(
                    |n: &Node| self.law(t, n.z),
                    f64::NEG_INFINITY,
                    y,
                    &breaks,
                    &[],
                    CDF_TOL,
                )?;
                Ok(r.value.clamp(0.0, 1.0))
            }
            KernelFamily::Gamma { .. } => {
                if y <= self.x {
                    return Ok(0.0);
                }
                if y >= self.z {
                    return Ok(1.0);
                }
                if y - self.x <= self.z - y {
                    Ok(self.gamma_mass_between(t, self.x, y)?.clamp(0.0, 1.0))
                } else {
                    Ok((1.0 - self.gamma_mass_between(t, y, self.z)?).clamp(0.0, 1.0))
                }
            }
        }
    }

    /// Bridge mass of `[lo, hi] ⊆ [x, z]` for the gamma kernel.
    fn gamma_mass_between(&self, t: f64, lo: f64, hi: f64) -> Result<f64> {
        let (x, z) = (self.x, self.z);
        let mut sing = Vec::with_capacity(2);
        if let Some(e) = self.kernel.origin_exponent(t - self.s).filter(|e| *e < 0.0) {
            sing.push(Singularity { at: x, exponent: e });
        }
        if let Some(e) = self.kernel.origin_exponent(self.horizon - t).filter(|e| *e < 0.0) {
            sing.push(Singularity { at: z, exponent: e });
        }
        let r = integrate_piecewise(
            |n: &Node| self.log_law_offsets(t, n.offset_from(x), n.offset_to(z)).exp(),
            lo,
            hi,
            &[],
            &sing,
            CDF_TOL,
        )?;
        Ok(r.value)
    }

    /// `∫ f_{tT} dy` over the whole support; equals one up to quadrature error.
    pub fn total_mass(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match self.kernel {
            KernelFamily::Poisson { .. } => {
                let n = (self.z - self.x) as i64;
                Ok(neumaier((0..=n).map(|j| self.law(t, self.x + j as f64))))
            }
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                let r = integrate_piecewise(
                    |n: &Node| self.law(t, n.z),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    &gaussian_breaks(mean, var.sqrt()),
                    &[],
                    CDF_TOL,
                )?;
                Ok(r.value)
            }
            KernelFamily::Gamma { .. } => self.gamma_mass_between(t, self.x, self.z),
        }
    }

    /// Exact draw of `L_t` given the pins.
    pub fn sample_point<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kernel {
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            KernelFamily::Gamma { m } => {
                let (a, b) = self.beta_shapes(t, m);
                let g1: f64 = unit_gamma(a).sample(rng);
                let g2: f64 = unit_gamma(b).sample(rng);
                let d = self.z - self.x;
                let sum = g1 + g2;
                if !(sum > 0.0) {
                    // Both draws underflowed; the split is uniform.
                    self.x + 0.5 * d
                } else if g1 <= g2 {
                    self.x + d * (g1 / sum)
                } else {
                    self.z - d * (g2 / sum)
                }
            }
            KernelFamily::Poisson { .. } => {
                let (n, p) = self.binomial(t);
                if n == 0 {
                    self.x
                } else {
                    let b = Binomial::new(n, p).map_err(|e| LrbError::domain(format!("binomial: {e}")))?;
                    self.x + b.sample(rng) as f64
                }
            }
        })
    }

    /// Draw of `L_t` by inverting the numeric distribution function.
    pub fn sample_point_numeric<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        self.check_time(t)?;
        let u: f64 = rng.random();
        match self.kernel {
            KernelFamily::Poisson { .. } => {
                let n = (self.z - self.x) as i64;
                let mut acc = 0.0;
                for j in 0..=n {
                    acc += self.law(t, self.x + j as f64);
                    if u < acc {
                        return Ok(self.x + j as f64);
                    }
                }
                Ok(self.z)
            }
            KernelFamily::Brownian => {
                let (mean, var) = self.gaussian_moments(t);
                let sd = var.sqrt();
                // Tails beyond 40 sd carry no representable mass.
                let (lo, hi) = (mean - 40.0 * sd, mean + 40.0 * sd);
                let r = brent(|y| self.cdf_numeric(t, y).unwrap_or(f64::NAN) - u, lo, hi, ROOT_XTOL)?;
                Ok(r.root)
            }
            KernelFamily::Gamma { .. } => {
                let r = brent(|y| self.cdf_numeric(t, y).unwrap_or(f64::NAN) - u, self.x, self.z, ROOT_XTOL)?;
                Ok(r.root)
            }
        }
    }

    /// The bridge restarted from `(t, y)` with the same pin.
    pub fn repin(&self, t: f64, y: f64) -> Result<Self> {
        Self::new(self.kernel, t, y, self.horizon, self.z)
    }
}

pub(crate) fn gaussian_breaks(mean: f64, sd: f64) -> Vec<f64> {
    let mut out = vec![mean];
    for k in [0.5, 1.0, 2.0, 4.0, 8.0] {
        out.push(mean - k * sd);
        out.push(mean + k * sd);
    }
    out
}

fn binomial_pmf(n: u64, p: f64, j: u64) -> f64 {
    if j > n {
        return 0.0;
    }
    let (n, j) = (n as f64, j as f64);
    let log = ln_choose(n, j)
        + if j > 0.0 { j * p.ln() } else { 0.0 }
        + if n - j > 0.0 { (n - j) * (-p).ln_1p() } else { 0.0 };
    log.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeSampler {
    Exact,
    Numeric,
}

/// Samples the bridge on `times` by sequential re-pinning. `times` must be
/// strictly increasing, start after `s` and end at or before `T`; a grid
/// point at `T` yields `z`.
pub fn sample_bridge_path<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    times: &[f64],
    rng: &mut R,
) -> Result<SamplePath> {
    sample_bridge_path_with(spec, times, rng, BridgeSampler::Exact)
}

pub fn sample_bridge_path_with<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    times: &[f64],
    rng: &mut R,
    method: BridgeSampler,
) -> Result<SamplePath> {
    check_grid(times, spec.s, spec.horizon)?;
    let mut values = Vec::with_capacity(times.len());
    let mut current = *spec;
    let mut settled = false;
    for &t in times {
        if t == spec.horizon || settled {
            values.push(spec.z);
            continue;
        }
        let y = match method {
            BridgeSampler::Exact => current.sample_point(t, rng)?,
            BridgeSampler::Numeric => current.sample_point_numeric(t, rng)?,
        };
        values.push(y);
        if current.kernel.is_increasing() && y >= spec.z {
            // An increasing path that reached its pin stays there.
            settled = true;
            continue;
        }
        current = current.repin(t, y)?;
    }
    Ok(SamplePath { times: times.to_vec(), values })
}

pub(crate) fn check_grid(times: &[f64], s: f64, horizon: f64) -> Result<()> {
    let Some(&first) = times.first() else {
        return Err(LrbError::domain("empty time grid"));
    };
    if first <= s {
        return Err(LrbError::domain(format!(
            "grid point {first} is not after the start time {s}"
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LrbError::domain("time grid must be strictly increasing"));
    }
    let last = *times.last().expect("non-empty");
    if !(last <= horizon) {
        return Err(LrbError::domain(format!("grid point {last} is after the horizon {horizon}")));
    }
    Ok(())
}
