//! The random-bridge law `LRB([0,T], {f_t}, ν)`: a Lévy process conditioned
//! so that its value at `T` has law `ν`.
//!
//! Everything is expressed through the un-normalised terminal measure
//! `ψ_t(dz; ξ) = f_{T-t}(z - ξ) / f_T(z) ν(dz)`. For lattice kernels the
//! densities below are mass functions.

use std::sync::Arc;

use crate::bridge::gaussian_breaks;
use crate::error::{LrbError, Result};
use crate::kernels::KernelFamily;
use crate::numerics::{integrate_piecewise, neumaier, IntegrandShape, Node, Singularity, Tolerance};
use crate::terminal::{Atom, DensityPart, TerminalLaw, Tilt, QUAD_TOL};

/// Tolerance on `Σ α_i = T` for increment partitions.
const PARTITION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LrbSpec {
    pub kernel: KernelFamily,
    pub horizon: f64,
    pub terminal: TerminalLaw,
    /// Quadrature tolerance for `ψ` and every integral against `ν`.
    pub tol: Tolerance,
}

/// Joint law of the increments at a point: the density of the continuous
/// part, and for each atom `z_i` the density of the first `n - 1`
/// increments jointly with the event `Σ Δ = z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleValue {
    pub density: f64,
    pub atom_terms: Vec<(f64, f64)>,
}

impl LrbSpec {
    pub fn new(kernel: KernelFamily, horizon: f64, terminal: TerminalLaw) -> Result<Self> {
        kernel.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LrbError::spec(format!("horizon {horizon} must be positive")));
        }
        for a in terminal.atoms.iter().filter(|a| a.weight > 0.0) {
            let f = kernel.law(horizon, a.z);
            if !(f > 0.0 && f.is_finite()) {
                return Err(LrbError::spec(format!(
                    "terminal atom at {} has kernel law {f} at the horizon",
                    a.z
                )));
            }
        }
        if let Some(d) = &terminal.density {
            if kernel.is_discrete() {
                return Err(LrbError::spec("a lattice kernel needs a purely atomic terminal law"));
            }
            let (lo, _) = d.support();
            if lo < kernel.support_lower() {
                return Err(LrbError::spec(format!(
                    "terminal density support starts at {lo}, below the {} kernel support",
                    kernel.name()
                )));
            }
        }
        Ok(Self { kernel, horizon, terminal, tol: QUAD_TOL })
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t < self.horizon {
            Ok(())
        } else {
            Err(LrbError::domain(format!("time {t} outside [0, {})", self.horizon)))
        }
    }

    /// `log f_{T-t}(z - ξ) - log f_T(z)` given the two offsets.
    #[inline]
    fn log_ratio(&self, t: f64, from_xi: f64, z: f64) -> f64 {
        let num = self.kernel.log_law(self.horizon - t, from_xi);
        if num == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        num - self.kernel.log_law(self.horizon, z)
    }

    fn psi_shape(&self, t: f64, xi: f64) -> IntegrandShape {
        let remaining = self.horizon - t;
        let mut shape = IntegrandShape { breaks: self.kernel.breaks(remaining, xi), ..Default::default() };
        if self.kernel.is_increasing() {
            shape.lower = Some(xi);
        }
        if let Some(e) = self.kernel.origin_exponent(remaining) {
            shape.singularities.push(Singularity { at: xi, exponent: e });
        }
        if let Some(e) = self.kernel.origin_exponent(self.horizon) {
            shape.singularities.push(Singularity { at: 0.0, exponent: -e });
        }
        if matches!(self.kernel, KernelFamily::Brownian) && t > 0.0 {
            let centre = xi * self.horizon / t;
            shape.breaks.extend(gaussian_breaks(centre, (remaining * self.horizon / t).sqrt()));
        }
        shape
    }

    /// Density part of `ψ_t(ℝ; ξ)`.
    fn psi_density_part(&self, t: f64, xi: f64) -> Result<f64> {
        let Some(d) = &self.terminal.density else {
            return Ok(0.0);
        };
        let law = TerminalLaw::unchecked(vec![], Some(Arc::clone(d)));
        law.integrate_shaped(
            |n: &Node| self.log_ratio(t, n.offset_from(xi), n.offset_from(0.0)).exp(),
            &self.psi_shape(t, xi),
            self.tol,
        )
    }

    /// Log-weights `log v_i + log f_{T-t}(z_i - ξ) - log f_T(z_i)` of the atoms.
    fn atom_log_weights(&self, t: f64, xi: f64) -> Vec<f64> {
        self.terminal
            .atoms
            .iter()
            .map(|a| {
                if a.weight > 0.0 {
                    a.weight.ln() + self.log_ratio(t, a.z - xi, a.z)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    /// `ψ_t(ℝ; ξ)`; one at `t = 0`, where `ξ` is ignored.
    pub fn psi_total(&self, t: f64, xi: f64) -> Result<f64> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        if !xi.is_finite() {
            return Err(LrbError::domain(format!("state {xi} must be finite")));
        }
        let atoms = neumaier(self.atom_log_weights(t, xi).into_iter().map(f64::exp));
        let value = atoms + self.psi_density_part(t, xi)?;
        if !value.is_finite() {
            return Err(crate::numerics::NumericsError::NonFinite { at: xi }.into());
        }
        Ok(value)
    }

    /// `ψ_t(ℝ; ξ)`, failing unless it lies in `(0, ∞)`.
    pub fn psi_reachable(&self, t: f64, xi: f64) -> Result<f64> {
        let psi = self.psi_total(t, xi)?;
        if psi > 0.0 && psi.is_finite() {
            Ok(psi)
        } else {
            Err(LrbError::UnreachableState { t, xi, psi })
        }
    }

    /// `ψ_t(ℝ; y)` at a quadrature node in `y`. The atom terms use the
    /// node's exact distance to each atom.
    pub(crate) fn psi_node(&self, t: f64, n: &Node) -> f64 {
        let atoms = neumaier(self.terminal.atoms.iter().map(|a| {
            if a.weight == 0.0 {
                return 0.0;
            }
            a.weight * self.log_ratio(t, n.offset_to(a.z), a.z).exp()
        }));
        match self.psi_density_part(t, n.z) {
            Ok(d) => atoms + d,
            Err(_) => f64::NAN,
        }
    }

    /// Radon–Nikodým density `ψ_t(ℝ; ξ)⁻¹` of the bridge law with respect to
    /// the Lévy law on `F_t`.
    pub fn rn_derivative(&self, t: f64, xi: f64) -> Result<f64> {
        Ok(1.0 / self.psi_reachable(t, xi)?)
    }

    /// Marginal density (or mass) of `L_t` at `y`: `f_t(y) ψ_t(ℝ; y)`.
    pub fn marginal_density(&self, t: f64, y: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(LrbError::domain("the marginal at time 0 is a point mass at 0"));
        }
        self.check_time(t)?;
        let f = self.kernel.law(t, y);
        if f == 0.0 {
            return Ok(0.0);
        }
        Ok(f * self.psi_total(t, y)?)
    }

    /// Transition density (or mass) from `(s, x)` to `(t, y)`:
    /// `ψ_t(ℝ; y) / ψ_s(ℝ; x) · f_{t-s}(y - x)`.
    pub fn transition_density(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        if t == self.horizon {
            return Err(LrbError::TerminalTime { horizon: self.horizon });
        }
        self.check_time(s)?;
        self.check_time(t)?;
        if !(t > s) {
            return Err(LrbError::domain(format!("transition needs s < t, got s = {s}, t = {t}")));
        }
        let psi_s = self.psi_reachable(s, x)?;
        let f = self.kernel.law(t - s, y - x);
        if f == 0.0 {
            return Ok(0.0);
        }
        Ok(self.psi_total(t, y)? / psi_s * f)
    }

    /// Integration range, breakpoints and singular points of
    /// `y ↦ f_{t-s}(y - x) ψ_t(ℝ; y)`.
    pub(crate) fn transition_shape(&self, s: f64, x: f64, t: f64) -> (f64, f64, Vec<f64>, Vec<Singularity>) {
        let (lo, hi) = if self.kernel.is_increasing() {
            (x, self.terminal.support_bounds().1)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        let mut breaks = self.kernel.breaks(t - s, x);
        let mut sing: Vec<Singularity> = self.kernel.singularity(t - s, x).into_iter().collect();
        for a in self.terminal.atoms.iter().filter(|a| a.weight > 0.0) {
            match self.kernel {
                KernelFamily::Brownian => {
                    let (elapsed, rest) = (t - s, self.horizon - t);
                    let span = self.horizon - s;
                    let mean = (rest * x + elapsed * a.z) / span;
                    breaks.extend(gaussian_breaks(mean, (elapsed * rest / span).sqrt()));
                }
                _ if a.z > x => {
                    breaks.push(a.z);
                    sing.extend(self.kernel.singularity(self.horizon - t, a.z));
                }
                _ => {}
            }
        }
        (lo, hi, breaks, sing)
    }

    /// Conditional law `ν_s` of the terminal value given `L_s = ξ`. At `s = 0`
    /// this is `ν` itself.
    pub fn terminal_posterior(&self, s: f64, xi: f64) -> Result<TerminalLaw> {
        self.check_time(s)?;
        if s == 0.0 {
            return Ok(self.terminal.clone());
        }
        self.posterior_with_shift(s, xi, 0.0)
    }

    /// Posterior at `(s, ξ)`, translated by `-shift`.
    fn posterior_with_shift(&self, s: f64, xi: f64, shift: f64) -> Result<TerminalLaw> {
        let psi = self.psi_reachable(s, xi)?;
        let log_psi = psi.ln();
        let atoms: Vec<Atom> = self
            .terminal
            .atoms
            .iter()
            .zip(self.atom_log_weights(s, xi))
            .map(|(a, lw)| Atom { z: a.z - shift, weight: (lw - log_psi).exp() })
            .collect();
        let density = self.terminal.density.as_ref().map(|base| {
            Arc::new(DensityPart::Tilted(Tilt {
                base: Arc::clone(base),
                kernel: self.kernel,
                horizon: self.horizon,
                remaining: self.horizon - s,
                anchor: xi,
                shift,
                log_norm: log_psi,
            }))
        });
        Ok(TerminalLaw::unchecked(atoms, density))
    }

    /// The process `η_u = L_{s+u} - ξ` on `[0, T - s]`, again a random bridge
    /// with terminal law `ν*(A) = ν_s(A + ξ)`.
    pub fn restart(&self, s: f64, xi: f64) -> Result<LrbSpec> {
        self.check_time(s)?;
        if s == 0.0 {
            return Ok(self.clone());
        }
        let terminal = self.posterior_with_shift(s, xi, xi)?;
        Ok(LrbSpec { kernel: self.kernel, horizon: self.horizon - s, terminal, tol: self.tol })
    }

    /// `∫ z^q ν_s(dz)` after a tail-decay check on the posterior density.
    pub fn conditional_moment(&self, s: f64, xi: f64, q: u32) -> Result<f64> {
        if q == 0 {
            return Err(LrbError::domain("moment order must be positive"));
        }
        let post = self.terminal_posterior(s, xi)?;
        check_tail(&post, q)?;
        let value = post.integrate(|z| z.powi(q as i32))?;
        if !value.is_finite() {
            return Err(LrbError::InfiniteMoment { order: q });
        }
        Ok(value)
    }

    /// `E[L_t | L_s = ξ] = ((T - t) ξ + (t - s) E[L_T | L_s = ξ]) / (T - s)`.
    pub fn conditional_mean_at(&self, s: f64, xi: f64, t: f64) -> Result<f64> {
        self.check_time(s)?;
        if !(t >= s && t <= self.horizon) {
            return Err(LrbError::domain(format!("time {t} outside [{s}, {}]", self.horizon)));
        }
        let xi = if s == 0.0 { 0.0 } else { xi };
        let terminal_mean = self.conditional_moment(s, xi, 1)?;
        let span = self.horizon - s;
        Ok(((self.horizon - t) * xi + (t - s) * terminal_mean) / span)
    }

    /// Joint density (or mass) of `(L_{t_1}, …, L_{t_n})` at `values`, for
    /// `0 < t_1 < … < t_n < T`.
    pub fn fdd_density(&self, times: &[f64], values: &[f64]) -> Result<f64> {
        if times.len() != values.len() || times.is_empty() {
            return Err(LrbError::domain("times and values must be non-empty and of equal length"));
        }
        crate::bridge::check_grid(times, 0.0, self.horizon)?;
        let last = times.len() - 1;
        if times[last] == self.horizon {
            return Err(LrbError::TerminalTime { horizon: self.horizon });
        }
        let mut product = 1.0;
        let (mut prev_t, mut prev_x) = (0.0, 0.0);
        for (&t, &x) in times.iter().zip(values) {
            product *= self.kernel.law(t - prev_t, x - prev_x);
            prev_t = t;
            prev_x = x;
        }
        if product == 0.0 {
            return Ok(0.0);
        }
        Ok(product * self.psi_total(times[last], values[last])?)
    }

    fn check_partition(&self, alpha: &[f64]) -> Result<()> {
        if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(LrbError::domain("partition lengths must be positive"));
        }
        let total = neumaier(alpha.iter().copied());
        if (total - self.horizon).abs() > PARTITION_TOL * self.horizon.max(1.0) {
            return Err(LrbError::domain(format!(
                "partition sums to {total}, not the horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `f̃(z)`: terminal density (or lattice mass) over the kernel law at `T`.
    pub fn terminal_ratio(&self, z: f64) -> f64 {
        let p = if self.kernel.is_discrete() { self.terminal.weight_at(z) } else { self.terminal.density_at(z) };
        if p == 0.0 {
            return 0.0;
        }
        p / self.kernel.law(self.horizon, z)
    }

    /// Joint law of the increments `Δ_i = L_{t_i} - L_{t_{i-1}}` over the
    /// partition `α` of `[0, T]`, at `Δ = y`:
    /// `f̃(Σ y) Π f_{α_i}(y_i)`.
    pub fn increment_joint_density(&self, alpha: &[f64], y: &[f64]) -> Result<LiouvilleValue> {
        self.check_partition(alpha)?;
        if alpha.len() != y.len() {
            return Err(LrbError::domain("partition and increments differ in length"));
        }
        let n = alpha.len();
        let sum = neumaier(y.iter().copied());
        let product: f64 = alpha.iter().zip(y).map(|(&a, &v)| self.kernel.law(a, v)).product();
        let density = if product == 0.0 { 0.0 } else { self.terminal_ratio(sum) * product };

        let mut atom_terms = Vec::new();
        if !self.kernel.is_discrete() {
            let head: f64 = alpha[..n - 1].iter().zip(&y[..n - 1]).map(|(&a, &v)| self.kernel.law(a, v)).product();
            let head_sum = neumaier(y[..n - 1].iter().copied());
            for a in &self.terminal.atoms {
                let tail = self.kernel.law(alpha[n - 1], a.z - head_sum);
                let value = if head == 0.0 || tail == 0.0 || a.weight == 0.0 {
                    0.0
                } else {
                    a.weight / self.kernel.law(self.horizon, a.z) * head * tail
                };
                atom_terms.push((a.z, value));
            }
        }
        Ok(LiouvilleValue { density, atom_terms })
    }

    /// Conditional density of the increments `Δ_{π(m+1)}, …, Δ_{π(n)}` at
    /// `query` given `Δ_{π(1)}, …, Δ_{π(m)}` equal `observed`:
    /// `f̃(S + Σ y) / ψ_{t_m}(ℝ; S) · Π f_{α_{π(i)}}(y_i)` with `S` the observed
    /// sum and `t_m` the observed elapsed time. Only the continuous part of
    /// `ν` contributes for continuous kernels.
    pub fn reordered_increment_conditional(
        &self,
        alpha: &[f64],
        perm: &[usize],
        observed: &[f64],
        query: &[f64],
    ) -> Result<f64> {
        self.check_partition(alpha)?;
        let n = alpha.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(LrbError::domain("perm is not a permutation of the partition indices"));
        }
        let m = observed.len();
        if m + query.len() != n || query.is_empty() {
            return Err(LrbError::domain("observed and queried increments must split the partition"));
        }
        let observed_sum = neumaier(observed.iter().copied());
        let elapsed = neumaier(perm[..m].iter().map(|&i| alpha[i]));
        let psi = if m == 0 { 1.0 } else { self.psi_reachable(elapsed, observed_sum)? };
        let product: f64 = perm[m..].iter().zip(query).map(|(&i, &v)| self.kernel.law(alpha[i], v)).product();
        if product == 0.0 {
            return Ok(0.0);
        }
        let total = neumaier(observed.iter().chain(query).copied());
        Ok(self.terminal_ratio(total) * product / psi)
    }
}

/// Fails with `InfiniteMoment` when `|z|^{q+1} p(z)` is not decreasing far
/// out in an unbounded tail of the density part.
fn check_tail(law: &TerminalLaw, q: u32) -> Result<()> {
    let Some(d) = &law.density else {
        return Ok(());
    };
    let (lo, hi) = d.support();
    let finite: Vec<f64> = d.breakpoints().into_iter().filter(|b| b.is_finite()).collect();
    let (min, max) = match (
        finite.iter().copied().reduce(f64::min),
        finite.iter().copied().reduce(f64::max),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => (0.0, 0.0),
    };
    let scale = (max - min).max(1.0);
    let h = |z: f64| z.abs().powi(q as i32 + 1) * d.eval(&Node::at(z));
    for (unbounded, edge, dir) in [(hi.is_infinite(), max, 1.0), (lo.is_infinite(), min, -1.0)] {
        if !unbounded {
            continue;
        }
        let values: Vec<f64> = (1..=4).map(|k| h(edge + dir * scale * 10f64.powi(k))).collect();
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] > w[0]) {
            return Err(LrbError::InfiniteMoment { order: q });
        }
    }
    Ok(())
}

/// `∫ g` of the transition law from `(s, x)` to `t` over `y`, by quadrature
/// (continuous) or lattice summation.
pub fn integrate_transition<G: Fn(f64) -> f64>(
    spec: &LrbSpec,
    s: f64,
    x: f64,
    t: f64,
    g: G,
    tol: Tolerance,
) -> Result<f64> {
    let psi_s = spec.psi_reachable(s, x)?;
    if spec.kernel.is_discrete() {
        let (_, hi) = spec.terminal.support_bounds();
        let top = (hi - x).floor().max(0.0) as i64;
        return Ok(neumaier((0..=top).map(|j| {
            let y = x + j as f64;
            let f = spec.kernel.law(t - s, j as f64);
            if f == 0.0 {
                0.0
            } else {
                f * spec.psi_node(t, &Node::at(y)) * g(y)
            }
        })) / psi_s);
    }
    let (lo, hi, breaks, sing) = spec.transition_shape(s, x, t);
    let r = integrate_piecewise(
        |n: &Node| {
            let f = spec.kernel.law(t - s, n.offset_from(x));
            if f == 0.0 {
                0.0
            } else {
                f * spec.psi_node(t, n) * g(n.z)
            }
        },
        lo,
        hi,
        &breaks,
        &sing,
        tol,
    )?;
    Ok(r.value / psi_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terminal::DensityFamily;

    fn binary_brownian() -> LrbSpec {
        LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::binary(0.0, 1.0, 0.5).unwrap()).unwrap()
    }

    fn drifted_brownian(theta: f64) -> LrbSpec {
        let nu = TerminalLaw::from_family(DensityFamily::Normal { mean: theta, variance: 1.0 }).unwrap();
        LrbSpec::new(KernelFamily::Brownian, 1.0, nu).unwrap()
    }

    #[test]
    fn psi_at_time_zero_is_one() {
        assert_eq!(binary_brownian().psi_total(0.0, 3.0).unwrap(), 1.0);
        assert!(binary_brownian().psi_total(1.0, 0.0).is_err());
    }

    #[test]
    fn psi_of_the_kernel_law_is_one() {
        let spec = drifted_brownian(0.0);
        for (t, xi) in [(0.2, -1.0), (0.5, 0.3), (0.9, 2.0)] {
            assert!((spec.psi_total(t, xi).unwrap() - 1.0).abs() < 1e-9);
        }
        let g = LrbSpec::new(
            KernelFamily::Gamma { m: 2.0 },
            1.5,
            TerminalLaw::from_family(DensityFamily::Gamma { shape: 3.0, scale: 1.0 }).unwrap(),
        )
        .unwrap();
        for (t, xi) in [(0.3, 0.2), (1.0, 1.5), (1.4, 4.0)] {
            assert!((g.psi_total(t, xi).unwrap() - 1.0).abs() < 1e-9, "t={t} xi={xi}");
        }
    }

    #[test]
    fn brownian_drift_psi() {
        let theta: f64 = 0.5;
        let v = drifted_brownian(theta).psi_total(0.5, 1.0).unwrap();
        let want = (theta * 1.0 - 0.5 * theta * theta * 0.5).exp();
        assert!((v - want).abs() < 1e-9 * want, "{v} vs {want}");
        assert!((want - 1.548_830_298_6).abs() < 1e-10);
    }

    #[test]
    fn binary_posterior_is_even_on_the_midline() {
        let post = binary_brownian().terminal_posterior(0.5, 0.25).unwrap();
        assert!((post.weight_at(0.0) - 0.5).abs() < 1e-15);
        assert!((post.total_mass().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_of_a_point_mass_is_that_point_mass() {
        let spec = LrbSpec::new(KernelFamily::Gamma { m: 1.0 }, 1.0, TerminalLaw::point_mass(2.0).unwrap()).unwrap();
        let post = spec.terminal_posterior(0.6, 1.3).unwrap();
        assert_eq!(post.atoms.len(), 1);
        assert!((post.atoms[0].weight - 1.0).abs() < 1e-15);
        assert!(matches!(spec.terminal_posterior(0.6, 2.5), Err(LrbError::UnreachableState { .. })));
    }

    #[test]
    fn transition_reduces_to_the_kernel_for_the_kernel_law() {
        let spec = drifted_brownian(0.0);
        let got = spec.transition_density(0.2, 0.1, 0.6, -0.4).unwrap();
        let want = KernelFamily::Brownian.law(0.4, -0.5);
        assert!((got - want).abs() < 1e-9);
        assert!(matches!(spec.transition_density(0.2, 0.0, 1.0, 0.0), Err(LrbError::TerminalTime { .. })));
    }

    #[test]
    fn transition_for_a_point_mass_is_the_bridge() {
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::point_mass(0.7).unwrap()).unwrap();
        let bridge = crate::bridge::BridgeSpec::new(KernelFamily::Brownian, 0.2, 0.1, 1.0, 0.7).unwrap();
        for y in [-0.5, 0.0, 0.4, 1.2] {
            let got = spec.transition_density(0.2, 0.1, 0.5, y).unwrap();
            let want = bridge.transition_density(0.5, y).unwrap();
            assert!((got - want).abs() < 1e-13 * want.max(1.0));
        }
    }

    #[test]
    fn transition_mean_follows_the_expectation_corollary() {
        let spec = binary_brownian();
        let mean = integrate_transition(&spec, 0.0, 0.0, 0.5, |y| y, Tolerance::new(1e-12, 1e-11)).unwrap();
        assert!((mean - 0.25).abs() < 1e-9);
        assert!((spec.conditional_mean_at(0.0, 0.0, 0.5).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn moments() {
        let spec = binary_brownian();
        assert!((spec.conditional_moment(0.0, 0.0, 2).unwrap() - 0.5).abs() < 1e-15);
        let pm = LrbSpec::new(KernelFamily::Brownian, 2.0, TerminalLaw::point_mass(1.5).unwrap()).unwrap();
        let got = pm.conditional_mean_at(0.5, 0.2, 1.2).unwrap();
        assert!((got - (0.8 * 0.2 + 0.7 * 1.5) / 1.5).abs() < 1e-14);
        assert!(spec.conditional_moment(0.0, 0.0, 0).is_err());
    }

    #[test]
    fn light_tails_pass_the_moment_check() {
        let law = TerminalLaw::unchecked(vec![], None);
        assert!(check_tail(&law, 1).is_ok());
        let base = Arc::new(DensityPart::Family {
            family: DensityFamily::Normal { mean: 0.0, variance: 1.0 },
            weight: 1.0,
        });
        let ok = TerminalLaw::unchecked(vec![], Some(base));
        assert!(check_tail(&ok, 4).is_ok());
    }

    #[test]
    fn restart_at_zero_is_identity() {
        let spec = binary_brownian();
        let r = spec.restart(0.0, 0.0).unwrap();
        assert_eq!(r.horizon, spec.horizon);
        assert_eq!(r.terminal.atoms, spec.terminal.atoms);
    }

    #[test]
    fn partition_must_cover_the_horizon() {
        let spec = drifted_brownian(0.5);
        assert!(spec.increment_joint_density(&[0.3, 0.3], &[0.0, 0.0]).is_err());
        let one = spec.increment_joint_density(&[1.0], &[0.4]).unwrap();
        let want = spec.terminal.density_at(0.4);
        assert!((one.density - want).abs() < 1e-15);
    }

    #[test]
    fn liouville_atom_terms() {
        let spec = binary_brownian();
        let v = spec.increment_joint_density(&[0.5, 0.5], &[0.2, 9.0]).unwrap();
        assert_eq!(v.density, 0.0);
        // Joint of Δ₁ with {L_T = 1}: v₁ f_{0.5}(0.2) f_{0.5}(0.8) / f_1(1).
        let k = KernelFamily::Brownian;
        let want = 0.5 * k.law(0.5, 0.2) * k.law(0.5, 0.8) / k.law(1.0, 1.0);
        assert!((v.atom_terms[1].1 - want).abs() < 1e-15);
    }
}
