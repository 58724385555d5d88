//! Named self-checks of the model: quadrature invariants, Monte Carlo
//! consistency and closed-form agreement, on fixed reference scenarios.

use serde::Serialize;

use crate::bridge::BridgeSpec;
use crate::error::{LrbError, Result};
use crate::kernels::KernelFamily;
use crate::lrb::LrbSpec;
use crate::numerics::{integrate_piecewise, neumaier, Node, Singularity, Tolerance};
use crate::pricing::{
    binary_call_brownian, binary_diffusion, BinaryBondSpec, CallMethod, CallSpec, ExerciseMode, InformationModel,
    RateCurve,
};
use crate::sampler::{run_indexed, simulate_paths, SamplerMethod};
use crate::stats::{affine_fit, ks_critical_two_sample, ks_two_sample, slope_through_origin, Estimate};
use crate::terminal::{Atom, DensityFamily, DensityPart, TerminalLaw};

pub const CHECK_NAMES: [&str; 11] = [
    "normalization",
    "convolution",
    "psi-martingale",
    "levy-recovery",
    "stationary-increments",
    "expectation",
    "liouville",
    "pricing-martingale",
    "binary-option",
    "gamma-option",
    "binary-sde",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckOutcome {
    /// `statistic ≤ threshold`.
    fn at_most(check: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self { check: check.into(), statistic, threshold, pass: statistic <= threshold }
    }

    /// Monte Carlo estimate within three standard errors of `target`.
    fn mc(check: impl Into<String>, est: Estimate, target: f64) -> Self {
        let z = if est.se > 0.0 { est.z_score(target).abs() } else if est.mean == target { 0.0 } else { f64::INFINITY };
        Self::at_most(check, z, 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    pub workers: usize,
    /// Multiplier on every Monte Carlo path count.
    pub scale: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seed: 20_240_601, workers: 1, scale: 1.0 }
    }
}

impl CheckOptions {
    fn paths(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(10)
    }
}

const TIGHT: Tolerance = Tolerance { abs: 1e-13, rel: 1e-12, max_panels: 4000 };

/// Runs one named check; `extra` is checked for normalization alongside the
/// built-in scenarios.
pub fn run_check(name: &str, opts: &CheckOptions, extra: Option<&LrbSpec>) -> Result<Vec<CheckOutcome>> {
    match name {
        "normalization" => normalization(extra),
        "convolution" => convolution(),
        "psi-martingale" => psi_martingale(opts),
        "levy-recovery" => levy_recovery(opts),
        "stationary-increments" => stationary_increments(opts),
        "expectation" => expectation(opts),
        "liouville" => liouville(opts),
        "pricing-martingale" => pricing_martingale(opts),
        "binary-option" => binary_option(opts),
        "gamma-option" => gamma_option(opts),
        "binary-sde" => binary_sde(opts),
        other => Err(LrbError::spec(format!("unknown check {other:?}; known checks: {}", CHECK_NAMES.join(", ")))),
    }
}

fn kernel_mass(kernel: KernelFamily, t: f64) -> Result<f64> {
    if kernel.is_discrete() {
        let hi = (kernel.mean(t) + 12.0 * kernel.variance(t).sqrt() + 40.0).ceil() as i64;
        return Ok(neumaier((0..=hi).map(|i| kernel.law(t, i as f64))));
    }
    let sing: Vec<Singularity> = kernel.singularity(t, 0.0).into_iter().collect();
    let lo = kernel.support_lower();
    let r = integrate_piecewise(|n: &Node| kernel.law(t, n.offset_from(0.0)), lo, f64::INFINITY, &kernel.breaks(t, 0.0), &sing, TIGHT)?;
    Ok(r.value)
}

fn normalization(extra: Option<&LrbSpec>) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let kernels = [KernelFamily::Brownian, KernelFamily::Gamma { m: 0.7 }, KernelFamily::Gamma { m: 3.0 }, KernelFamily::Poisson { lambda: 2.0 }];
    let mut worst: f64 = 0.0;
    for k in kernels {
        for t in [0.1, 0.5, 1.0] {
            worst = worst.max((kernel_mass(k, t)? - 1.0).abs());
        }
    }
    out.push(CheckOutcome::at_most("normalization/kernel", worst, 1e-8));

    let mut worst: f64 = 0.0;
    for (k, pins) in [
        (KernelFamily::Brownian, [-2.0, -0.5, 0.0, 1.0, 3.0]),
        (KernelFamily::Gamma { m: 0.7 }, [0.1, 0.5, 1.0, 2.0, 4.0]),
    ] {
        for z in pins {
            let b = BridgeSpec::new(k, 0.0, 0.0, 1.0, z)?;
            for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
                worst = worst.max((b.total_mass(t)? - 1.0).abs());
            }
        }
    }
    out.push(CheckOutcome::at_most("normalization/bridge", worst, 1e-8));

    let mut specs = reference_specs()?;
    if let Some(s) = extra {
        specs.push(s.clone());
    }
    let (mut post_worst, mut trans_worst): (f64, f64) = (0.0, 0.0);
    for spec in &specs {
        let t_mid = 0.5 * spec.horizon;
        let (_, hi) = spec.terminal.support_bounds();
        let xi = if spec.kernel.is_increasing() { (0.4 * hi.min(4.0 * spec.horizon)).floor_if(spec.kernel.is_discrete()) } else { 0.1 };
        let post = spec.terminal_posterior(t_mid, xi)?;
        post_worst = post_worst.max((post.total_mass()? - 1.0).abs());
        let mass = crate::lrb::integrate_transition(spec, t_mid, xi, 0.75 * spec.horizon, |_| 1.0, TIGHT)?;
        trans_worst = trans_worst.max((mass - 1.0).abs());
    }
    out.push(CheckOutcome::at_most("normalization/posterior", post_worst, 1e-10));
    out.push(CheckOutcome::at_most("normalization/transition", trans_worst, 1e-8));
    Ok(out)
}

trait FloorIf {
    fn floor_if(self, cond: bool) -> f64;
}

impl FloorIf for f64 {
    fn floor_if(self, cond: bool) -> f64 {
        if cond {
            self.floor()
        } else {
            self
        }
    }
}

/// A Brownian, a gamma and a lattice scenario with atoms and densities.
fn reference_specs() -> Result<Vec<LrbSpec>> {
    let mixed = TerminalLaw::new(
        vec![Atom { z: 0.5, weight: 0.3 }],
        Some(DensityPart::Family { family: DensityFamily::Normal { mean: 0.2, variance: 1.5 }, weight: 0.7 }),
    )?;
    let gamma_mixed = TerminalLaw::new(
        vec![Atom { z: 2.0, weight: 0.5 }],
        Some(DensityPart::Family { family: DensityFamily::Gamma { shape: 3.0, scale: 1.5 }, weight: 0.5 }),
    )?;
    let lattice = TerminalLaw::new(vec![Atom { z: 1.0, weight: 0.2 }, Atom { z: 3.0, weight: 0.5 }, Atom { z: 6.0, weight: 0.3 }], None)?;
    Ok(vec![
        LrbSpec::new(KernelFamily::Brownian, 1.0, mixed)?,
        LrbSpec::new(KernelFamily::Gamma { m: 2.0 }, 1.0, gamma_mixed)?,
        LrbSpec::new(KernelFamily::Poisson { lambda: 2.0 }, 1.0, lattice)?,
    ])
}

fn convolution() -> Result<Vec<CheckOutcome>> {
    let mut worst: f64 = 0.0;
    for k in [KernelFamily::Brownian, KernelFamily::Gamma { m: 1.5 }] {
        for (s, t) in [(0.2, 0.5), (0.5, 1.0), (0.3, 0.9)] {
            for x in [0.2, 0.7, 1.5] {
                let x = if k.is_increasing() { x } else { x - 0.7 };
                let (lo, hi) = if k.is_increasing() { (0.0, x) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                let mut sing = Vec::new();
                sing.extend(k.singularity(s, 0.0));
                if let Some(e) = k.origin_exponent(t - s).filter(|e| *e < 0.0) {
                    sing.push(Singularity { at: x, exponent: e });
                }
                let conv = integrate_piecewise(
                    |n: &Node| k.law(t - s, n.offset_to(x)) * k.law(s, n.offset_from(0.0)),
                    lo,
                    hi,
                    &k.breaks(s, 0.0),
                    &sing,
                    TIGHT,
                )?;
                worst = worst.max((conv.value - k.law(t, x)).abs());
            }
        }
    }
    let mut out = vec![CheckOutcome::at_most("convolution/continuous", worst, 1e-6)];
    let k = KernelFamily::Poisson { lambda: 1.7 };
    let mut worst: f64 = 0.0;
    for (s, t) in [(0.2, 0.5), (0.5, 1.0)] {
        for x in 0..8 {
            let conv = neumaier((0..=x).map(|y| k.law(t - s, (x - y) as f64) * k.law(s, y as f64)));
            worst = worst.max((conv - k.law(t, x as f64)).abs());
        }
    }
    out.push(CheckOutcome::at_most("convolution/lattice", worst, 1e-12));
    Ok(out)
}

fn psi_martingale(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let n = opts.paths(100_000);
    let mut out = Vec::new();
    for (i, spec) in reference_specs()?.into_iter().enumerate() {
        let t = 0.5 * spec.horizon;
        let psis = run_indexed(n, opts.seed + i as u64, opts.workers, |_, rng| {
            let l = spec.kernel.sample_increment(t, rng)?;
            spec.psi_total(t, l)
        })?;
        out.push(CheckOutcome::mc(format!("psi-martingale/{}", spec.kernel.name()), Estimate::from_samples(&psis), 1.0));
    }
    Ok(out)
}

fn increments(spec: &LrbSpec, grid: &[f64], n: usize, opts: &CheckOptions, salt: u64) -> Result<Vec<f64>> {
    let paths = simulate_paths(spec, grid, opts.seed ^ salt, n, SamplerMethod::TerminalFirst, opts.workers)?;
    Ok(paths.iter().map(|p| p.values[p.values.len() - 1] - if grid.len() > 1 { p.values[0] } else { 0.0 }).collect())
}

fn levy_recovery(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let n = opts.paths(10_000);
    let theta: f64 = 0.5;
    let brownian = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::from_family(DensityFamily::Normal { mean: theta, variance: 1.0 })?)?;
    let inc = increments(&brownian, &[0.5], n, opts, 1)?;
    let est = Estimate::from_samples(&inc);
    let var = crate::stats::sample_variance(&inc);
    let mut out = vec![
        CheckOutcome::mc("levy-recovery/brownian-mean", est, theta / 2.0),
        CheckOutcome::at_most("levy-recovery/brownian-variance", (var / 0.5 - 1.0).abs(), 0.05),
    ];

    let (m, kappa) = (1.0, 2.0);
    let gamma = LrbSpec::new(
        KernelFamily::Gamma { m },
        1.0,
        TerminalLaw::from_family(DensityFamily::Gamma { shape: m, scale: kappa })?,
    )?;
    let inc = increments(&gamma, &[0.5], n, opts, 2)?;
    out.push(CheckOutcome::mc("levy-recovery/gamma-mean", Estimate::from_samples(&inc), kappa * m * 0.5));

    let (mut rel_b, mut rel_g): (f64, f64) = (0.0, 0.0);
    let (mut rows, mut logs_b, mut rows_g, mut logs_g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..10 {
        let t = 0.05 + 0.09 * i as f64;
        for j in 0..10 {
            let y = -2.0 + 0.45 * j as f64;
            let psi = brownian.psi_total(t, y)?;
            let want = (theta * y - 0.5 * theta * theta * t).exp();
            rel_b = rel_b.max((psi / want - 1.0).abs());
            rows.push(vec![y, t]);
            logs_b.push(psi.ln());
            let yg = 0.1 + 0.4 * j as f64;
            let psi = gamma.psi_total(t, yg)?;
            let want = kappa.powf(-m * t) * ((1.0 - 1.0 / kappa) * yg).exp();
            rel_g = rel_g.max((psi / want - 1.0).abs());
            rows_g.push(vec![yg, t]);
            logs_g.push(psi.ln());
        }
    }
    out.push(CheckOutcome::at_most("levy-recovery/brownian-psi", rel_b, 1e-9));
    out.push(CheckOutcome::at_most("levy-recovery/gamma-psi", rel_g, 1e-9));
    out.push(CheckOutcome::at_most("levy-recovery/brownian-affine", affine_fit(&rows, &logs_b).1, 1e-8));
    out.push(CheckOutcome::at_most("levy-recovery/gamma-affine", affine_fit(&rows_g, &logs_g).1, 1e-8));
    Ok(out)
}

fn stationary_increments(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let n = opts.paths(10_000);
    let specs = [
        LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::new(vec![Atom { z: -1.0, weight: 0.3 }, Atom { z: 1.5, weight: 0.7 }], None)?)?,
        LrbSpec::new(KernelFamily::Gamma { m: 2.0 }, 1.0, TerminalLaw::new(vec![Atom { z: 1.0, weight: 0.4 }, Atom { z: 3.0, weight: 0.6 }], None)?)?,
    ];
    let mut out = Vec::new();
    for spec in &specs {
        let a = increments(spec, &[0.1, 0.3], n, opts, 3)?;
        let b = increments(spec, &[0.4, 0.6], n, opts, 4)?;
        out.push(CheckOutcome::at_most(
            format!("stationary-increments/{}", spec.kernel.name()),
            ks_two_sample(&a, &b),
            ks_critical_two_sample(n, n),
        ));
    }
    Ok(out)
}

fn binary_brownian() -> Result<(LrbSpec, BinaryBondSpec)> {
    let bond = BinaryBondSpec::new(0.0, 1.0, 0.5)?;
    Ok((LrbSpec::new(KernelFamily::Brownian, 1.0, bond.terminal_law()?)?, bond))
}

fn expectation(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let n = opts.paths(100_000);
    let (spec, _) = binary_brownian()?;
    let grid = [0.25, 0.5, 0.75];
    let paths = simulate_paths(&spec, &grid, opts.seed ^ 5, n, SamplerMethod::TerminalFirst, opts.workers)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let v: Vec<f64> = paths.iter().map(|p| p.values[i]).collect();
            CheckOutcome::mc(format!("expectation/t={t}"), Estimate::from_samples(&v), t * 0.5)
        })
        .collect())
}

fn liouville(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    use rand::Rng;
    let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::from_family(DensityFamily::Normal { mean: 0.5, variance: 1.0 })?)?;
    let alpha: [f64; 3] = [0.25, 0.25, 0.5];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let errs = run_indexed(100, opts.seed ^ 7, opts.workers, |i, rng| {
        let perm = perms[i % 6];
        let m = 1 + (i / 6) % 2;
        let y: Vec<f64> = perm.iter().map(|&k| alpha[k].sqrt() * (2.0 * rng.random::<f64>() - 1.0) * 1.5).collect();
        let got = spec.reordered_increment_conditional(&alpha, &perm, &y[..m], &y[m..])?;
        // Bayes quotient: joint density over the marginal of the observed
        // increments, the latter by integrating out their complement.
        let mut a: Vec<f64> = perm.iter().map(|&k| alpha[k]).collect();
        let joint = spec.increment_joint_density(&a, &y)?.density;
        let rest: f64 = a[m..].iter().sum();
        a.truncate(m);
        a.push(rest);
        let obs = y[..m].to_vec();
        let marginal = integrate_piecewise(
            |n: &Node| {
                let mut v = obs.clone();
                v.push(n.z);
                spec.increment_joint_density(&a, &v).map(|l| l.density).unwrap_or(f64::NAN)
            },
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[-3.0, -1.0, 0.0, 0.5, 1.0, 3.0],
            &[],
            TIGHT,
        )?;
        Ok((got - joint / marginal.value).abs())
    })?;
    let worst = errs.into_iter().fold(0.0, f64::max);
    Ok(vec![CheckOutcome::at_most("liouville/reordering", worst, 1e-10)])
}

fn pricing_martingale(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let n = opts.paths(100_000);
    let (binary, _) = binary_brownian()?;
    let gamma = LrbSpec::new(
        KernelFamily::Gamma { m: 1.5 },
        1.0,
        TerminalLaw::from_family(DensityFamily::Gamma { shape: 2.0, scale: 1.0 })?,
    )?;
    let grid = [0.25, 0.5, 0.75];
    let mut out = Vec::new();
    for (salt, spec) in [(11u64, binary), (12, gamma)] {
        let model = InformationModel::new(spec, RateCurve::flat(0.0)?);
        let x0 = model.price(0.0, 0.0)?;
        let paths = simulate_paths(&model.spec, &grid, opts.seed ^ salt, n, SamplerMethod::TerminalFirst, opts.workers)?;
        for (i, &t) in grid.iter().enumerate() {
            let prices = run_indexed(n, 0, opts.workers, |k, _| model.price(t, paths[k].values[i]))?;
            out.push(CheckOutcome::mc(
                format!("pricing-martingale/{}/t={t}", model.spec.kernel.name()),
                Estimate::from_samples(&prices),
                x0,
            ));
        }
    }
    Ok(out)
}

fn binary_option(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let (spec, bond) = binary_brownian()?;
    let model = InformationModel::new(spec, RateCurve::flat(0.0)?);
    let cs = CallSpec { strike: 0.5, maturity: 0.5, valuation: 0.0, xi_s: 0.0 };
    let closed = binary_call_brownian(&bond, 1.0, &model.curve, &cs)?;
    let quad = model.call_price(&cs, CallMethod::Quadrature, ExerciseMode::Monotone)?;
    let mc = model.mc_call(&cs, opts.paths(1_000_000), opts.seed ^ 13, opts.workers)?;
    Ok(vec![
        CheckOutcome::mc("binary-option/monte-carlo", mc, closed),
        CheckOutcome::at_most("binary-option/quadrature", (quad - closed).abs(), 1e-7),
    ])
}

fn gamma_option(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let terminal = TerminalLaw::new(
        vec![Atom { z: 2.0, weight: 0.5 }],
        Some(DensityPart::Family { family: DensityFamily::Gamma { shape: 3.0, scale: 1.5 }, weight: 0.5 }),
    )?;
    let spec = LrbSpec::new(KernelFamily::Gamma { m: 4.0 }, 1.0, terminal)?;
    let model = InformationModel::new(spec, RateCurve::flat(0.03)?);
    let cs = CallSpec { strike: 3.0, maturity: 0.5, valuation: 0.0, xi_s: 0.0 };
    let closed = model.call_price(&cs, CallMethod::ClosedForm, ExerciseMode::Monotone)?;
    let quad = model.call_price(&cs, CallMethod::Quadrature, ExerciseMode::Monotone)?;
    let mc = model.mc_call(&cs, opts.paths(100_000), opts.seed ^ 17, opts.workers)?;
    Ok(vec![
        CheckOutcome::at_most("gamma-option/quadrature", (closed - quad).abs(), 1e-6),
        CheckOutcome::mc("gamma-option/monte-carlo", mc, closed),
    ])
}

fn binary_sde(opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let (spec, bond) = binary_brownian()?;
    let steps = 500;
    let dt = 1.0 / steps as f64;
    let grid: Vec<f64> = (1..steps).map(|k| k as f64 * dt).collect();
    let n = opts.paths(1_000);
    let paths = simulate_paths(&spec, &grid, opts.seed ^ 19, n, SamplerMethod::TerminalFirst, opts.workers)?;
    let (mut realized, mut predicted) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for p in &paths {
        let (mut qv, mut pred) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
        let mut x_prev = 1.0 - bond.p;
        let mut t_prev = 0.0;
        for (&t, &xi) in p.times.iter().zip(&p.values) {
            let (_, rho1) = crate::pricing::binary_posterior_brownian(&bond, 1.0, t, xi);
            let x = bond.k0 + (bond.k1 - bond.k0) * rho1;
            let sigma = binary_diffusion(&bond, 1.0, 1.0, t_prev, x_prev);
            qv.push((x - x_prev).powi(2));
            pred.push(sigma * sigma * dt);
            x_prev = x;
            t_prev = t;
        }
        realized.push(neumaier(qv));
        predicted.push(neumaier(pred));
    }
    let slope = slope_through_origin(&predicted, &realized);
    Ok(vec![CheckOutcome::at_most("binary-sde/qv-slope", (slope - 1.0).abs(), 0.05)])
}
