//! Information-based pricing: a cash flow `X_T` paid at `T` whose value is
//! revealed gradually by a random-bridge information process `ξ_{tT}`.
//!
//! Prices are `X_{tT} = Λ(t, ξ_{tT}) = P_{tT} E[X_T | ξ_{tT}]`; a call on
//! `X_{tT}` with strike `K` is exercised on `B_t = {ξ : Λ(t, ξ) > K}`.

use std::cell::RefCell;

use rand::Rng;

use crate::bridge::BridgeSpec;
use crate::error::{LrbError, Result};
use crate::kernels::KernelFamily;
use crate::lrb::LrbSpec;
use crate::numerics::special::norm_cdf;
use crate::numerics::{brent, find_root_monotone, neumaier, IntegrandShape, Node, NumericsError};
use crate::sampler::{run_indexed, sample_lrb_terminal_first};
use crate::stats::Estimate;
use crate::terminal::TerminalLaw;

/// Root tolerance in `ξ` for the critical information level.
const ROOT_XTOL: f64 = 1e-13;
/// Residual tolerance `|Λ(t, ξ*) - K| ≤ RESIDUAL_TOL · max(1, K)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 200;

/// Deterministic piecewise-constant short rate; `rates[i]` applies on
/// `[starts[i], starts[i + 1])` and the last rate forever.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    starts: Vec<f64>,
    rates: Vec<f64>,
}

impl RateCurve {
    pub fn flat(rate: f64) -> Result<Self> {
        Self::piecewise(vec![(0.0, rate)])
    }

    /// Segments `(start, rate)`; the first must start at 0.
    pub fn piecewise(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.first().map(|s| s.0) != Some(0.0) {
            return Err(LrbError::spec("the first rate segment must start at 0"));
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) || segments.iter().any(|s| !s.0.is_finite()) {
            return Err(LrbError::spec("rate segment starts must be finite and strictly increasing"));
        }
        if segments.iter().any(|s| !(s.1 >= 0.0 && s.1.is_finite())) {
            return Err(LrbError::spec("rates must be non-negative and finite"));
        }
        let (starts, rates) = segments.into_iter().unzip();
        Ok(Self { starts, rates })
    }

    pub fn segments(&self) -> Vec<(f64, f64)> {
        self.starts.iter().copied().zip(self.rates.iter().copied()).collect()
    }

    pub fn rate(&self, t: f64) -> f64 {
        let i = self.starts.partition_point(|&s| s <= t).max(1) - 1;
        self.rates[i]
    }

    /// `∫_s^t r_u du` for `s ≤ t`.
    fn integral(&self, s: f64, t: f64) -> f64 {
        neumaier(self.starts.iter().enumerate().map(|(i, &a)| {
            let b = self.starts.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let (lo, hi) = (a.max(s), b.min(t));
            if hi > lo {
                self.rates[i] * (hi - lo)
            } else {
                0.0
            }
        }))
    }

    /// `P_{st} = exp(-∫_s^t r_u du)`.
    pub fn discount(&self, s: f64, t: f64) -> Result<f64> {
        if !(s <= t) || s < 0.0 {
            return Err(LrbError::domain(format!("discount needs 0 <= s <= t, got s = {s}, t = {t}")));
        }
        Ok((-self.integral(s, t)).exp())
    }
}

/// European call on `X_{tT}` with strike `K`, valued at `s` given `ξ_{sT}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallSpec {
    pub strike: f64,
    pub maturity: f64,
    pub valuation: f64,
    pub xi_s: f64,
}

/// Two-point cash flow: `k₀` (recovery) with probability `p`, else `k₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryBondSpec {
    pub k0: f64,
    pub k1: f64,
    pub p: f64,
}

impl BinaryBondSpec {
    pub fn new(k0: f64, k1: f64, p: f64) -> Result<Self> {
        if !(k0 < k1) || !k0.is_finite() || !k1.is_finite() {
            return Err(LrbError::spec(format!("binary bond needs k0 < k1, got {k0}, {k1}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(LrbError::spec(format!("default probability {p} outside (0, 1)")));
        }
        Ok(Self { k0, k1, p })
    }

    pub fn terminal_law(&self) -> Result<TerminalLaw> {
        TerminalLaw::binary(self.k0, self.k1, self.p)
    }
}

/// Solution of `Λ(t, ξ) = K` on the reachable states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalInformation {
    /// `B_t = (ξ*, ∞)`. Lattice kernels report `j* - 1` for the smallest
    /// exercised lattice point `j*`.
    Boundary(f64),
    /// Every reachable state is exercised.
    Everywhere,
    /// No reachable state is exercised; the call is worthless.
    Nowhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CallMethod {
    /// Bridge marginal probabilities in closed form.
    #[default]
    ClosedForm,
    /// Bridge marginal probabilities by quadrature of the bridge density.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExerciseMode {
    /// `B_t` is a half-line; monotonicity of `Λ(t, ·)` is checked.
    #[default]
    Monotone,
    /// `B_t` is a finite union of open intervals found by sign scanning.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    pub t: f64,
    pub xi: f64,
    pub price: f64,
    pub posterior_mean: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeCoefficients {
    pub drift: f64,
    pub diffusion: f64,
}

#[derive(Debug, Clone)]
pub struct InformationModel {
    pub spec: LrbSpec,
    pub curve: RateCurve,
}

impl InformationModel {
    pub fn new(spec: LrbSpec, curve: RateCurve) -> Self {
        Self { spec, curve }
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    /// Price with its ingredients at `(t, ξ)`, `0 ≤ t < T`.
    pub fn price_record(&self, t: f64, xi: f64) -> Result<PriceRecord> {
        let psi = self.spec.psi_total(t, xi)?;
        let posterior_mean = self.spec.conditional_moment(t, xi, 1)?;
        let price = self.curve.discount(t, self.horizon())? * posterior_mean;
        Ok(PriceRecord { t, xi, price, posterior_mean, psi })
    }

    /// `X_{tT} = Λ(t, ξ) = P_{tT} ∫ z ν_t(dz)`.
    pub fn price(&self, t: f64, xi: f64) -> Result<f64> {
        Ok(self.price_record(t, xi)?.price)
    }

    fn check_call_time(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.horizon() {
            Ok(())
        } else {
            Err(LrbError::domain(format!("option maturity {t} outside (0, {})", self.horizon())))
        }
    }

    /// Reachable state interval at `t > 0`.
    fn reachable(&self) -> (f64, f64) {
        if self.spec.kernel.is_increasing() {
            (0.0, self.spec.terminal.support_bounds().1)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    /// `ξ*_t` solving `Λ(t, ξ*) = K` when `Λ(t, ·)` is increasing.
    pub fn critical_information(&self, t: f64, strike: f64) -> Result<CriticalInformation> {
        self.check_call_time(t)?;
        if !(strike >= 0.0 && strike.is_finite()) {
            return Err(LrbError::domain(format!("strike {strike} must be non-negative")));
        }
        let p_tt = self.curve.discount(t, self.horizon())?;
        let (inf, sup) = self.spec.terminal.support_bounds();
        if strike >= p_tt * sup {
            return Ok(CriticalInformation::Nowhere);
        }
        if strike < p_tt * inf || (strike == p_tt * inf && inf < sup) {
            return Ok(CriticalInformation::Everywhere);
        }
        if let KernelFamily::Gamma { m } = self.spec.kernel {
            if m * (self.horizon() - t) <= 1.0 {
                return Err(LrbError::MonotonicityUnverified { t });
            }
        }
        if self.spec.kernel.is_discrete() {
            return self.critical_lattice(t, strike);
        }

        let g = |xi: f64| self.price(t, xi).map(|v| v - strike);
        let centre = self.start_point(t);
        let Some(lo) = self.walk(&g, centre, -1.0, |v| v < 0.0) else {
            return Ok(CriticalInformation::Everywhere);
        };
        let Some(hi) = self.walk(&g, centre, 1.0, |v| v > 0.0) else {
            return Ok(CriticalInformation::Nowhere);
        };
        let (lo, hi) = if lo <= hi { (lo, hi) } else { return Err(LrbError::MonotonicityUnverified { t }) };
        let f = |xi: f64| g(xi).unwrap_or(f64::NAN);
        let root = find_root_monotone(f, lo, hi, ROOT_XTOL).map_err(|e| match e {
            NumericsError::NonMonotone { .. } => LrbError::MonotonicityUnverified { t },
            other => other.into(),
        })?;
        let residual = g(root.root)?;
        if residual.abs() > RESIDUAL_TOL * strike.max(1.0) {
            return Err(NumericsError::RootStalled { x: root.root, residual }.into());
        }
        Ok(CriticalInformation::Boundary(root.root))
    }

    fn critical_lattice(&self, t: f64, strike: f64) -> Result<CriticalInformation> {
        let (_, hi) = self.reachable();
        let top = hi.floor() as i64;
        let mut prev = f64::NEG_INFINITY;
        let mut first = None;
        for j in 0..=top {
            let v = self.price(t, j as f64)?;
            if v < prev {
                return Err(LrbError::MonotonicityUnverified { t });
            }
            prev = v;
            if first.is_none() && v > strike {
                first = Some(j);
            }
        }
        Ok(match first {
            None => CriticalInformation::Nowhere,
            Some(0) => CriticalInformation::Everywhere,
            Some(j) => CriticalInformation::Boundary((j - 1) as f64),
        })
    }

    /// Reachable state near the centre of the time-`t` marginal.
    fn start_point(&self, t: f64) -> f64 {
        let mean = self.spec.terminal.mean().unwrap_or(0.0);
        let c = t / self.horizon() * mean;
        let (lo, hi) = self.reachable();
        if c > lo && c < hi {
            c
        } else if hi.is_finite() {
            0.5 * (lo.max(0.0) + hi)
        } else {
            lo.max(0.0) + 1.0
        }
    }

    /// First state found walking from `start` in direction `dir` where
    /// `accept(g)` holds; `None` if the reachable range ends first.
    fn walk<G: Fn(f64) -> Result<f64>>(&self, g: &G, start: f64, dir: f64, accept: impl Fn(f64) -> bool) -> Option<f64> {
        let (lo, hi) = self.reachable();
        let end = if dir < 0.0 { lo } else { hi };
        for k in 0..80 {
            let x = if end.is_finite() {
                // Geometric approach to a finite end, then the end itself.
                if k == 79 {
                    end
                } else {
                    end + (start - end) * 0.5f64.powi(k)
                }
            } else {
                start + dir * (2f64.powi(k) - 1.0)
            };
            match g(x) {
                Ok(v) if accept(v) => return Some(x),
                Ok(_) => {}
                Err(_) => return None,
            }
        }
        None
    }

    /// `B_t` as a union of open intervals, without assuming monotonicity.
    pub fn exercise_set(&self, t: f64, strike: f64) -> Result<Vec<(f64, f64)>> {
        self.check_call_time(t)?;
        let g = |xi: f64| self.price(t, xi).map(|v| v - strike);
        let (lo, hi) = self.reachable();
        let centre = self.start_point(t);
        let width = {
            let sd = (self.spec.kernel.variance(t) + t * t / (self.horizon() * self.horizon())
                * self.spec.terminal.integrate(|z| (z - centre).powi(2)).unwrap_or(1.0))
                .sqrt();
            12.0 * sd.max(1e-3)
        };
        let a = if lo.is_finite() { lo } else { centre - width };
        let b = if hi.is_finite() { hi } else { centre + width };
        // Uniform grid, clustered geometrically towards a finite upper end.
        let mut xs: Vec<f64> = (0..=SCAN_POINTS).map(|i| a + (b - a) * i as f64 / SCAN_POINTS as f64).collect();
        if hi.is_finite() {
            xs.pop();
            xs.extend((1..50).map(|k| b - (b - a) / SCAN_POINTS as f64 * 0.5f64.powi(k)));
        }
        let mut pts = Vec::with_capacity(xs.len());
        for x in xs {
            if let Ok(v) = g(x) {
                pts.push((x, v));
            }
        }
        if pts.is_empty() {
            return Ok(vec![]);
        }
        let f = |xi: f64| g(xi).unwrap_or(f64::NAN);
        let mut out = Vec::new();
        let mut open: Option<f64> = if pts[0].1 > 0.0 { Some(if lo.is_finite() { lo } else { f64::NEG_INFINITY }) } else { None };
        for w in pts.windows(2) {
            let ((x0, v0), (x1, v1)) = (w[0], w[1]);
            if (v0 > 0.0) != (v1 > 0.0) {
                let r = if v0 == 0.0 || v1 == 0.0 { if v0 == 0.0 { x0 } else { x1 } } else { brent(f, x0, x1, ROOT_XTOL)?.root };
                match open.take() {
                    Some(start) => out.push((start, r)),
                    None => open = Some(r),
                }
            }
        }
        if let Some(start) = open {
            out.push((start, if hi.is_finite() { hi } else { f64::INFINITY }));
        }
        Ok(out)
    }

    /// `C_{st} = P_{st} ∫ (P_{tT} z - K) μ_st(B_t; z) ν_s(dz)`, where
    /// `μ_st(·; z)` is the time-`t` law of the bridge from `(s, ξ_s)` to `(T, z)`.
    pub fn call_price(&self, cs: &CallSpec, method: CallMethod, mode: ExerciseMode) -> Result<f64> {
        let (s, t, k) = (cs.valuation, cs.maturity, cs.strike);
        if !(s >= 0.0 && s < t) {
            return Err(LrbError::domain(format!("valuation time {s} must lie in [0, {t})")));
        }
        self.check_call_time(t)?;
        let xi_s = if s == 0.0 { 0.0 } else { cs.xi_s };
        let p_st = self.curve.discount(s, t)?;
        let p_tt = self.curve.discount(t, self.horizon())?;
        let posterior = self.spec.terminal_posterior(s, xi_s)?;

        let intervals = match mode {
            ExerciseMode::Monotone => match self.critical_information(t, k)? {
                CriticalInformation::Nowhere => return Ok(0.0),
                CriticalInformation::Everywhere => {
                    let mean = posterior.integrate(|z| z)?;
                    return Ok(p_st * (p_tt * mean - k));
                }
                CriticalInformation::Boundary(x) => vec![(x, f64::INFINITY)],
            },
            ExerciseMode::Generic => self.exercise_set(t, k)?,
        };

        let failure: RefCell<Option<LrbError>> = RefCell::new(None);
        let mu = |z: f64| -> f64 {
            match self.bridge_probability(s, xi_s, t, z, &intervals, method) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let mut breaks: Vec<f64> = intervals.iter().flat_map(|&(a, b)| [a, b]).filter(|x| x.is_finite()).collect();
        if p_tt > 0.0 {
            breaks.push(k / p_tt);
        }
        let shape = IntegrandShape { breaks, ..Default::default() };
        let value = posterior.integrate_shaped(|n: &Node| (p_tt * n.z - k) * mu(n.z), &shape, self.spec.tol);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(p_st * value?)
    }

    /// `μ_st(B; z)` for `B` a union of open intervals.
    pub fn bridge_probability(
        &self,
        s: f64,
        xi_s: f64,
        t: f64,
        z: f64,
        intervals: &[(f64, f64)],
        method: CallMethod,
    ) -> Result<f64> {
        let bridge = match BridgeSpec::new(self.spec.kernel, s, xi_s, self.horizon(), z) {
            Ok(b) => b,
            // The pin is unreachable from (s, ξ_s); ν_s gives it no mass.
            Err(LrbError::InvalidPin { .. }) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        let sf = |x: f64| -> Result<f64> {
            if x == f64::NEG_INFINITY {
                return Ok(1.0);
            }
            if x == f64::INFINITY {
                return Ok(0.0);
            }
            match method {
                CallMethod::ClosedForm => bridge.sf(t, x),
                CallMethod::Quadrature => Ok(1.0 - bridge.cdf_numeric(t, x)?),
            }
        };
        let mut total = 0.0;
        for &(a, b) in intervals {
            total += sf(a)? - sf(b)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// `(drift, diffusion)` of `dX_{tT} = r_t X_{tT} dt + P_{tT} Var[X_T | ξ_{tT}] / (T - t) dW_t`.
    pub fn sde_coefficients(&self, t: f64, xi: f64) -> Result<SdeCoefficients> {
        if !matches!(self.spec.kernel, KernelFamily::Brownian) {
            return Err(LrbError::UnsupportedKernel("the price SDE"));
        }
        self.check_call_time(t).or_else(|e| if t == 0.0 { Ok(()) } else { Err(e) })?;
        let post = self.spec.terminal_posterior(t, xi)?;
        let mean = self.spec.conditional_moment(t, xi, 1)?;
        let var = post.integrate(|z| (z - mean) * (z - mean))?;
        let p_tt = self.curve.discount(t, self.horizon())?;
        Ok(SdeCoefficients {
            drift: self.curve.rate(t) * p_tt * mean,
            diffusion: p_tt * var / (self.horizon() - t),
        })
    }

    /// `(ρ₀, ρ₁)` from the generic posterior of a two-point terminal law.
    pub fn binary_posterior(&self, bond: &BinaryBondSpec, t: f64, xi: f64) -> Result<(f64, f64)> {
        let post = self.spec.terminal_posterior(t, xi)?;
        Ok((post.weight_at(bond.k0), post.weight_at(bond.k1)))
    }

    /// Monte Carlo call price: `P_{st} (Λ(t, ξ_t) - K)⁺` over paths of the
    /// bridge restarted at `(s, ξ_s)`.
    pub fn mc_call(&self, cs: &CallSpec, n: usize, seed: u64, workers: usize) -> Result<Estimate> {
        let (s, t, k) = (cs.valuation, cs.maturity, cs.strike);
        self.check_call_time(t)?;
        let xi_s = if s == 0.0 { 0.0 } else { cs.xi_s };
        let restarted = self.spec.restart(s, xi_s)?;
        let p_st = self.curve.discount(s, t)?;
        let payoffs = run_indexed(n, seed, workers, |_, rng| {
            let path = sample_lrb_terminal_first(&restarted, &[t - s], rng)?;
            let xi_t = xi_s + path.values[0];
            Ok(p_st * (self.price(t, xi_t)? - k).max(0.0))
        })?;
        Ok(Estimate::from_samples(&payoffs))
    }

    /// Draws `ξ_t` of the information process started at `(s, ξ_s)`.
    pub fn sample_information<R: Rng + ?Sized>(&self, s: f64, xi_s: f64, t: f64, rng: &mut R) -> Result<f64> {
        let restarted = self.spec.restart(s, xi_s)?;
        Ok(xi_s + sample_lrb_terminal_first(&restarted, &[t - s], rng)?.values[0])
    }
}

/// Brownian-information posterior `(ρ₀, ρ₁)` of a binary bond in closed form.
pub fn binary_posterior_brownian(bond: &BinaryBondSpec, horizon: f64, t: f64, xi: f64) -> (f64, f64) {
    let (k0, k1, p) = (bond.k0, bond.k1, bond.p);
    let e = 0.5 * (k1 - k0) / (horizon - t) * (t / horizon * (k0 + k1) - 2.0 * xi);
    let rho0 = 1.0 / (1.0 + (-e).exp() * (1.0 - p) / p);
    let rho1 = 1.0 / (1.0 + e.exp() * p / (1.0 - p));
    (rho0, rho1)
}

/// Closed-form `ξ*_t` of the binary bond under Brownian information, for
/// `K ∈ (P_{tT} k₀, P_{tT} k₁)`.
pub fn binary_critical_information(bond: &BinaryBondSpec, horizon: f64, p_tt: f64, t: f64, strike: f64) -> Result<f64> {
    let (k0, k1, p) = (bond.k0, bond.k1, bond.p);
    if !(strike > p_tt * k0 && strike < p_tt * k1) {
        return Err(LrbError::domain(format!(
            "strike {strike} outside ({}, {})",
            p_tt * k0,
            p_tt * k1
        )));
    }
    let log_term = (p / (1.0 - p) * (strike - p_tt * k0) / (p_tt * k1 - strike)).ln();
    Ok(t / (2.0 * horizon) * (k0 + k1) + (horizon - t) / (k1 - k0) * log_term)
}

/// Closed-form binary-bond call under Brownian information:
/// `P_{st} Σ_i (P_{tT} k_i - K) Φ[(M(k_i) - ξ*)/√V] ρ_i(s, ξ_s)`.
pub fn binary_call_brownian(bond: &BinaryBondSpec, horizon: f64, curve: &RateCurve, cs: &CallSpec) -> Result<f64> {
    let (s, t, k) = (cs.valuation, cs.maturity, cs.strike);
    if !(s >= 0.0 && s < t && t < horizon) {
        return Err(LrbError::domain("binary call needs 0 <= s < t < T"));
    }
    let xi_s = if s == 0.0 { 0.0 } else { cs.xi_s };
    let p_st = curve.discount(s, t)?;
    let p_tt = curve.discount(t, horizon)?;
    if k >= p_tt * bond.k1 {
        return Ok(0.0);
    }
    let (rho0, rho1) = if s == 0.0 { (bond.p, 1.0 - bond.p) } else { binary_posterior_brownian(bond, horizon, s, xi_s) };
    if k <= p_tt * bond.k0 {
        return Ok(p_st * (p_tt * (rho0 * bond.k0 + rho1 * bond.k1) - k));
    }
    let xi_star = binary_critical_information(bond, horizon, p_tt, t, k)?;
    let v = (t - s) * (horizon - t) / (horizon - s);
    let term = |ki: f64, rho: f64| {
        let m = ((horizon - t) * xi_s + (t - s) * ki) / (horizon - s);
        (p_tt * ki - k) * norm_cdf((m - xi_star) / v.sqrt()) * rho
    };
    Ok(p_st * (term(bond.k0, rho0) + term(bond.k1, rho1)))
}

/// Binary-bond diffusion coefficient in terms of the price:
/// `-P_{tT} (k₀ - X/P_{tT}) (k₁ - X/P_{tT}) / (T - t)`.
pub fn binary_diffusion(bond: &BinaryBondSpec, horizon: f64, p_tt: f64, t: f64, price: f64) -> f64 {
    let x = price / p_tt;
    -p_tt * (bond.k0 - x) * (bond.k1 - x) / (horizon - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_model(r: f64) -> (InformationModel, BinaryBondSpec) {
        let bond = BinaryBondSpec::new(0.0, 1.0, 0.5).unwrap();
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, bond.terminal_law().unwrap()).unwrap();
        (InformationModel::new(spec, RateCurve::flat(r).unwrap()), bond)
    }

    #[test]
    fn discount_factors() {
        let zero = RateCurve::flat(0.0).unwrap();
        assert_eq!(zero.discount(0.2, 0.9).unwrap(), 1.0);
        let c = RateCurve::flat(0.05).unwrap();
        assert!((c.discount(0.0, 1.0).unwrap() - 0.951_229_424_5).abs() < 1e-10);
        let pw = RateCurve::piecewise(vec![(0.0, 0.01), (0.5, 0.03), (2.0, 0.02)]).unwrap();
        let whole = pw.discount(0.0, 3.0).unwrap();
        let parts = pw.discount(0.0, 0.4).unwrap() * pw.discount(0.4, 3.0).unwrap();
        assert!((whole - parts).abs() <= 2.0 * f64::EPSILON * whole);
        assert!(((-pw.integral(0.0, 3.0)) - (-(0.005 + 0.045 + 0.02))).abs() < 1e-16);
        assert!(pw.discount(1.0, 0.5).is_err());
        assert!(RateCurve::flat(-0.1).is_err());
    }

    #[test]
    fn binary_price_on_the_midline() {
        let (m, _) = binary_model(0.0);
        assert!((m.price(0.5, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.price(0.0, 7.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_information_matches_the_closed_form() {
        let (m, bond) = binary_model(0.0);
        match m.critical_information(0.5, 0.5).unwrap() {
            CriticalInformation::Boundary(x) => assert!((x - 0.25).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
        for k in [0.1, 0.3, 0.8] {
            let CriticalInformation::Boundary(x) = m.critical_information(0.4, k).unwrap() else { panic!() };
            let closed = binary_critical_information(&bond, 1.0, 1.0, 0.4, k).unwrap();
            assert!((x - closed).abs() < 1e-9, "K={k}: {x} vs {closed}");
        }
        assert_eq!(m.critical_information(0.5, 0.0).unwrap(), CriticalInformation::Everywhere);
        assert_eq!(m.critical_information(0.5, 1.0).unwrap(), CriticalInformation::Nowhere);
    }

    #[test]
    fn binary_call_closed_form() {
        let (m, bond) = binary_model(0.0);
        let cs = CallSpec { strike: 0.5, maturity: 0.5, valuation: 0.0, xi_s: 0.0 };
        let closed = binary_call_brownian(&bond, 1.0, &m.curve, &cs).unwrap();
        let want = 0.25 * (norm_cdf(0.5) - norm_cdf(-0.5));
        assert!((closed - want).abs() < 1e-14);
        assert!((closed - 0.095_731).abs() < 1e-6);
        let generic = m.call_price(&cs, CallMethod::ClosedForm, ExerciseMode::Monotone).unwrap();
        assert!((generic - closed).abs() < 1e-10);
    }

    #[test]
    fn degenerate_strikes() {
        let (m, _) = binary_model(0.02);
        let cs = CallSpec { strike: 0.0, maturity: 0.5, valuation: 0.0, xi_s: 0.0 };
        let c = m.call_price(&cs, CallMethod::ClosedForm, ExerciseMode::Monotone).unwrap();
        assert!((c - m.curve.discount(0.0, 1.0).unwrap() * 0.5).abs() < 1e-15);
        let cs = CallSpec { strike: 2.0, ..cs };
        assert_eq!(m.call_price(&cs, CallMethod::ClosedForm, ExerciseMode::Monotone).unwrap(), 0.0);
    }

    #[test]
    fn generic_exercise_set_is_a_half_line_for_the_binary_bond() {
        let (m, _) = binary_model(0.0);
        let set = m.exercise_set(0.5, 0.5).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set[0].0 - 0.25).abs() < 1e-10);
        assert_eq!(set[0].1, f64::INFINITY);
    }

    #[test]
    fn binary_posterior_agreement() {
        let (m, bond) = binary_model(0.0);
        for t in [0.1, 0.5, 0.9] {
            for xi in [-1.0, 0.0, 0.3, 1.5] {
                let generic = m.binary_posterior(&bond, t, xi).unwrap();
                let closed = binary_posterior_brownian(&bond, 1.0, t, xi);
                assert!((generic.0 - closed.0).abs() < 1e-12 && (generic.1 - closed.1).abs() < 1e-12);
            }
        }
        let (r0, r1) = m.binary_posterior(&bond, 0.0, 0.3).unwrap();
        assert_eq!((r0, r1), (0.5, 0.5));
    }

    #[test]
    fn sde_coefficients() {
        let (m, bond) = binary_model(0.0);
        let c = m.sde_coefficients(0.5, 0.25).unwrap();
        assert!((c.diffusion - 0.5).abs() < 1e-12);
        assert_eq!(c.drift, 0.0);
        assert!((binary_diffusion(&bond, 1.0, 1.0, 0.5, 0.5) - 0.5).abs() < 1e-15);
        let pm = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::point_mass(1.0).unwrap()).unwrap();
        let pm = InformationModel::new(pm, RateCurve::flat(0.0).unwrap());
        assert_eq!(pm.sde_coefficients(0.5, 0.3).unwrap().diffusion, 0.0);
        let g = LrbSpec::new(KernelFamily::Gamma { m: 2.0 }, 1.0, TerminalLaw::point_mass(1.0).unwrap()).unwrap();
        let g = InformationModel::new(g, RateCurve::flat(0.0).unwrap());
        assert!(matches!(g.sde_coefficients(0.5, 0.3), Err(LrbError::UnsupportedKernel(_))));
    }
}
