use lrb_core::bridge::BridgeSpec;
use lrb_core::lrb::integrate_transition;
use lrb_core::numerics::special::beta_reg;
use lrb_core::numerics::{find_root_monotone, integrate_piecewise, neumaier, MixedMeasure, Node, Singularity, Tolerance};
use lrb_core::pricing::binary_posterior_brownian;
use lrb_core::{
    Atom, BinaryBondSpec, CallMethod, CallSpec, DensityFamily, DensityPart, ExerciseMode, InformationModel,
    KernelFamily, LrbSpec, RateCurve, TerminalLaw,
};
use proptest::prelude::*;
use statrs::distribution::{Beta, Continuous, Normal};

const TIGHT: Tolerance = Tolerance { abs: 1e-13, rel: 1e-12, max_panels: 4000 };

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn continuous_kernel() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![Just(KernelFamily::Brownian), (0.3f64..4.0).prop_map(|m| KernelFamily::Gamma { m })]
}

/// `∫ g(y) dy` over the support of the kernel law `f_t`, with `g`
/// vanishing outside it.
fn integrate_kernel_support<G: Fn(&Node) -> f64>(k: KernelFamily, t: f64, g: G) -> f64 {
    match k {
        KernelFamily::Gamma { m } => {
            let sing = [Singularity { at: 0.0, exponent: m * t - 1.0 }];
            let mode = (m * t - 1.0).max(0.0);
            integrate_piecewise(g, 0.0, f64::INFINITY, &[mode + 1.0, m * t + 10.0 * (m * t).sqrt()], &sing, TIGHT)
                .unwrap()
                .value
        }
        _ => {
            let sd = t.sqrt();
            integrate_piecewise(g, f64::NEG_INFINITY, f64::INFINITY, &[-4.0 * sd, 0.0, 4.0 * sd], &[], TIGHT)
                .unwrap()
                .value
        }
    }
}

fn mixed_brownian() -> LrbSpec {
    let terminal = TerminalLaw::new(
        vec![Atom { z: 0.5, weight: 0.3 }],
        Some(DensityPart::Family { family: DensityFamily::Normal { mean: 0.2, variance: 1.5 }, weight: 0.7 }),
    )
    .unwrap();
    LrbSpec::new(KernelFamily::Brownian, 1.0, terminal).unwrap()
}

fn mixed_gamma() -> LrbSpec {
    let terminal = TerminalLaw::new(
        vec![Atom { z: 2.0, weight: 0.5 }],
        Some(DensityPart::Family { family: DensityFamily::Gamma { shape: 3.0, scale: 1.5 }, weight: 0.5 }),
    )
    .unwrap();
    LrbSpec::new(KernelFamily::Gamma { m: 4.0 }, 1.0, terminal).unwrap()
}

fn lattice() -> LrbSpec {
    let terminal =
        TerminalLaw::new(vec![Atom { z: 1.0, weight: 0.2 }, Atom { z: 3.0, weight: 0.5 }, Atom { z: 6.0, weight: 0.3 }], None)
            .unwrap();
    LrbSpec::new(KernelFamily::Poisson { lambda: 2.0 }, 1.0, terminal).unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn kernel_laws_normalize(k in continuous_kernel(), t in 0.05f64..2.0, lambda in 0.2f64..6.0) {
        let mass = integrate_kernel_support(k, t, |n| k.law(t, n.offset_from(0.0)));
        prop_assert!((mass - 1.0).abs() <= 1e-8, "{k:?} t={t}: {mass}");
        let p = KernelFamily::Poisson { lambda };
        let top = (lambda * t + 12.0 * (lambda * t).sqrt() + 40.0) as i64;
        let mass = neumaier((0..=top).map(|i| p.law(t, i as f64)));
        prop_assert!((mass - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn chapman_kolmogorov(k in continuous_kernel(), s in 0.05f64..1.0, dt in 0.05f64..1.0, x in -1.0f64..3.0, lambda in 0.2f64..5.0) {
        let t = s + dt;
        let conv = match k {
            KernelFamily::Gamma { m } => {
                let x = x.abs() + 0.05;
                let sing = [
                    Singularity { at: 0.0, exponent: m * s - 1.0 },
                    Singularity { at: x, exponent: m * dt - 1.0 },
                ];
                let v = integrate_piecewise(|n: &Node| k.law(s, n.offset_from(0.0)) * k.law(dt, n.offset_to(x)), 0.0, x, &[], &sing, TIGHT)
                    .unwrap()
                    .value;
                (v, k.law(t, x))
            }
            _ => {
                let mid = x * s / t;
                let v = integrate_piecewise(|n: &Node| k.law(s, n.z) * k.law(dt, x - n.z), f64::NEG_INFINITY, f64::INFINITY, &[mid - 3.0, mid, mid + 3.0], &[], TIGHT)
                    .unwrap()
                    .value;
                (v, k.law(t, x))
            }
        };
        prop_assert!((conv.0 - conv.1).abs() <= 1e-6, "{k:?}: {} vs {}", conv.0, conv.1);
        let p = KernelFamily::Poisson { lambda };
        for j in 0..10 {
            let sum = neumaier((0..=j).map(|i| p.law(s, i as f64) * p.law(dt, (j - i) as f64)));
            prop_assert!((sum - p.law(t, j as f64)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bridge_laws_normalize_and_match_reference_laws(
        k in continuous_kernel(),
        s in 0.0f64..0.5,
        x in 0.0f64..1.0,
        frac in 0.05f64..0.95,
        gap in 0.1f64..4.0,
    ) {
        let horizon = 1.0;
        let z = x + gap;
        let t = s + frac * (horizon - s);
        let b = BridgeSpec::new(k, s, x, horizon, z).unwrap();
        let mass = b.total_mass(t).unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-8, "{k:?}: {mass}");
        for u in [0.1, 0.37, 0.5, 0.81] {
            let (y, want) = match k {
                KernelFamily::Gamma { m } => {
                    let beta = Beta::new(m * (t - s), m * (horizon - t)).unwrap();
                    (x + u * gap, beta.pdf(u) / gap)
                }
                _ => {
                    let mean = ((horizon - t) * x + (t - s) * z) / (horizon - s);
                    let var = (t - s) * (horizon - t) / (horizon - s);
                    let y = mean + (u - 0.5) * 4.0 * var.sqrt();
                    (y, Normal::new(mean, var.sqrt()).unwrap().pdf(y))
                }
            };
            let got = b.transition_density(t, y).unwrap();
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1e-3), "{k:?} y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn lattice_bridge_masses_sum_to_one(lambda in 0.2f64..5.0, i in 0i64..4, jumps in 0i64..12, frac in 0.05f64..0.95) {
        let k = KernelFamily::Poisson { lambda };
        let b = BridgeSpec::new(k, 0.2, i as f64, 1.0, (i + jumps) as f64).unwrap();
        let t = 0.2 + frac * 0.8;
        let total = neumaier((i..=i + jumps).map(|j| b.transition_mass(t, j).unwrap()));
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn beta_reflection(a in 0.05f64..20.0, b in 0.05f64..20.0, x in 0.0f64..=1.0) {
        prop_assert!((beta_reg(a, b, x) + beta_reg(b, a, 1.0 - x) - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn integration_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, w in 0.05f64..0.95) {
        let normal = TerminalLaw::from_family(DensityFamily::Normal { mean: 0.3, variance: 0.8 }).unwrap();
        let gamma = TerminalLaw::from_family(DensityFamily::Gamma { shape: 2.5, scale: 0.7 }).unwrap();
        let g1 = |z: f64| z * z;
        let g2 = |z: f64| (-z.abs()).exp();
        let normal = normal.measure();
        let lhs = normal.integrate(|z| c1 * g1(z) + c2 * g2(z), TIGHT).unwrap();
        let rhs = c1 * normal.integrate(g1, TIGHT).unwrap() + c2 * normal.integrate(g2, TIGHT).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

        let tol = Tolerance::default();
        let mixture = TerminalLaw::new(
            vec![Atom { z: 1.0, weight: w * 0.5 }],
            Some(DensityPart::Family { family: DensityFamily::Gamma { shape: 2.5, scale: 0.7 }, weight: 1.0 - w * 0.5 }),
        )
        .unwrap();
        let lhs = mixture.measure().integrate(g2, TIGHT).unwrap();
        let rhs = w * 0.5 * g2(1.0) + (1.0 - w * 0.5) * gamma.measure().integrate(g2, TIGHT).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
        let atoms = MixedMeasure::atoms_only(vec![(0.5, w), (2.0, 1.0 - w)]);
        let lhs = atoms.integrate(|z| c1 * g1(z) + c2 * g2(z), tol).unwrap();
        let rhs = c1 * atoms.integrate(g1, tol).unwrap() + c2 * atoms.integrate(g2, tol).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn monotone_roots_do_not_depend_on_the_bracket(target in -2.0f64..2.0, widen_lo in 0.0f64..50.0, widen_hi in 0.0f64..50.0) {
        let f = |x: f64| x.atan() + 0.1 * x - target;
        let narrow = find_root_monotone(f, -10.0, 10.0, 1e-12).unwrap().root;
        let wide = find_root_monotone(f, -10.0 - widen_lo, 10.0 + widen_hi, 1e-12).unwrap().root;
        prop_assert!((narrow - wide).abs() <= 2e-12);
    }

    #[test]
    fn discount_factors_compose(r1 in 0.0f64..0.2, r2 in 0.0f64..0.2, s in 0.0f64..1.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let curve = RateCurve::piecewise(vec![(0.0, r1), (0.6, r2)]).unwrap();
        let (s, t) = (s, s + u);
        let tt = t + v;
        let p = curve.discount(s, tt).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!((p - curve.discount(s, t).unwrap() * curve.discount(t, tt).unwrap()).abs() <= 1e-15);
        prop_assert_eq!(curve.discount(s, s).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn posteriors_have_unit_mass(s in 0.05f64..0.95, u in 0.0f64..1.0) {
        let b = mixed_brownian();
        let mass = b.terminal_posterior(s, -2.0 + 4.0 * u).unwrap().total_mass().unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-10, "{mass}");
        let g = mixed_gamma();
        let mass = g.terminal_posterior(s, 0.1 + 4.0 * u).unwrap().total_mass().unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-10, "{mass}");
        let p = lattice();
        let mass = p.terminal_posterior(s, (6.0 * u).floor()).unwrap().total_mass().unwrap();
        prop_assert!((mass - 1.0).abs() <= 1e-12, "{mass}");
    }

    #[test]
    fn transition_laws_normalize(s in 0.0f64..0.8, dt in 0.02f64..0.19, u in 0.0f64..1.0) {
        let t = s + dt;
        for (spec, x) in [
            (mixed_brownian(), -1.5 + 3.0 * u),
            (mixed_gamma(), if s == 0.0 { 0.0 } else { 0.05 + 3.0 * u }),
            (lattice(), (5.0 * u).floor()),
        ] {
            let x = if s == 0.0 { 0.0 } else { x };
            let mass = integrate_transition(&spec, s, x, t, |_| 1.0, Tolerance::default()).unwrap();
            prop_assert!((mass - 1.0).abs() <= 1e-8, "{:?} s={s} x={x}: {mass}", spec.kernel);
        }
    }

    #[test]
    fn increment_law_is_permutation_invariant(
        y in proptest::collection::vec(0.05f64..1.5, 4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let alpha = [0.1, 0.2, 0.3, 0.4];
        for spec in [mixed_brownian(), mixed_gamma()] {
            let base = spec.increment_joint_density(&alpha, &y).unwrap().density;
            let pa: Vec<f64> = perm.iter().map(|&i| alpha[i]).collect();
            let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let moved = spec.increment_joint_density(&pa, &py).unwrap().density;
            prop_assert!((base - moved).abs() <= 1e-12 * base.max(1e-300), "{base} vs {moved}");
        }
    }

    #[test]
    fn conditionals_depend_only_on_the_observed_sum(a in 0.05f64..0.6, b in 0.05f64..0.6, q in 0.05f64..1.0) {
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::from_family(DensityFamily::Normal { mean: 0.5, variance: 1.0 }).unwrap()).unwrap();
        let alpha = [0.25, 0.25, 0.5];
        let sum = a + b;
        let one = spec.reordered_increment_conditional(&alpha, &[0, 1, 2], &[a, b], &[q]).unwrap();
        let two = spec.reordered_increment_conditional(&alpha, &[1, 0, 2], &[sum - 0.3, 0.3], &[q]).unwrap();
        prop_assert!((one - two).abs() <= 1e-12 * one.max(1.0));
        let none = spec.reordered_increment_conditional(&alpha, &[0, 1, 2], &[], &[a, b, q]).unwrap();
        let joint = spec.increment_joint_density(&alpha, &[a, b, q]).unwrap().density;
        prop_assert!((none - joint).abs() <= 1e-15 * joint.max(1.0));
    }

    #[test]
    fn restarts_compose(s1 in 0.05f64..0.45, ds in 0.05f64..0.45, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
        let s2 = s1 + ds;
        for (spec, x1, x2) in [
            (mixed_brownian(), -1.0 + 2.0 * u1, -1.0 + 2.0 * u2),
            (mixed_gamma(), 0.05 + 1.5 * u1, 0.05 + 1.5 * u1 + 1.5 * u2),
        ] {
            let twice = spec.restart(s1, x1).unwrap().restart(ds, x2 - x1).unwrap();
            let once = spec.restart(s2, x2).unwrap();
            prop_assert!((twice.horizon - once.horizon).abs() <= 1e-15);
            for (a, b) in twice.terminal.atoms.iter().zip(&once.terminal.atoms) {
                prop_assert!((a.z - b.z).abs() <= 1e-12);
                prop_assert!((a.weight - b.weight).abs() <= 1e-10, "{} vs {}", a.weight, b.weight);
            }
            for k in 0..20 {
                let z = -2.0 + 0.25 * k as f64;
                let (p, q) = (twice.terminal.density_at(z), once.terminal.density_at(z));
                prop_assert!((p - q).abs() <= 1e-10, "z={z}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn restarted_laws_are_conditional_laws(s in 0.05f64..0.4, d1 in 0.05f64..0.25, d2 in 0.05f64..0.25, u in 0.0f64..1.0, v1 in 0.0f64..1.0, v2 in 0.0f64..1.0) {
        let (t1, t2) = (s + d1, s + d1 + d2);
        for (spec, xi, y1, y2) in [
            (mixed_brownian(), -1.0 + 2.0 * u, -1.0 + 2.0 * v1, -1.0 + 2.0 * v2),
            (mixed_gamma(), 0.1 + u, 0.1 + u + v1, 0.1 + u + v1 + v2),
        ] {
            let restarted = spec.restart(s, xi).unwrap();
            let lhs = restarted.fdd_density(&[t1 - s, t2 - s], &[y1 - xi, y2 - xi]).unwrap();
            let rhs = spec.fdd_density(&[s, t1, t2], &[xi, y1, y2]).unwrap() / spec.fdd_density(&[s], &[xi]).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn binary_posteriors_agree(t in 0.0f64..0.95, xi in -2.0f64..3.0, p in 0.05f64..0.95) {
        let bond = BinaryBondSpec::new(-0.5, 1.5, p).unwrap();
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, bond.terminal_law().unwrap()).unwrap();
        let post = spec.terminal_posterior(t, xi).unwrap();
        let (r0, r1) = binary_posterior_brownian(&bond, 1.0, t, xi);
        prop_assert!((r0 + r1 - 1.0).abs() <= 1e-12);
        prop_assert!((post.weight_at(-0.5) - r0).abs() <= 1e-12);
        prop_assert!((post.weight_at(1.5) - r1).abs() <= 1e-12);
    }
}

fn call_models() -> Vec<InformationModel> {
    let bond = BinaryBondSpec::new(0.0, 1.0, 0.5).unwrap();
    vec![
        InformationModel::new(LrbSpec::new(KernelFamily::Brownian, 1.0, bond.terminal_law().unwrap()).unwrap(), RateCurve::flat(0.02).unwrap()),
        InformationModel::new(mixed_brownian(), RateCurve::flat(0.0).unwrap()),
        InformationModel::new(mixed_gamma(), RateCurve::flat(0.03).unwrap()),
    ]
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn bridge_probabilities_decrease_in_the_boundary(s in 0.0f64..0.3, ds in 0.1f64..0.4, z in 0.5f64..3.0, b1 in 0.0f64..2.0, gap in 0.0f64..1.0) {
        let t = s + ds;
        for (m, xi_s) in [(&call_models()[1], 0.2), (&call_models()[2], 0.3)] {
            let xi_s = if s == 0.0 { 0.0 } else { xi_s };
            for method in [CallMethod::ClosedForm, CallMethod::Quadrature] {
                let lo = m.bridge_probability(s, xi_s, t, z, &[(b1, f64::INFINITY)], method).unwrap();
                let hi = m.bridge_probability(s, xi_s, t, z, &[(b1 + gap, f64::INFINITY)], method).unwrap();
                prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
                prop_assert!(hi <= lo + 1e-12, "{method:?}: {hi} > {lo}");
            }
        }
    }

    #[test]
    fn call_prices_respect_bounds(k in 0.0f64..4.0, t in 0.2f64..0.7) {
        for m in call_models() {
            let cs = CallSpec { strike: k, maturity: t, valuation: 0.0, xi_s: 0.0 };
            let c = m.call_price(&cs, CallMethod::ClosedForm, ExerciseMode::Monotone).unwrap();
            let p_st = m.curve.discount(0.0, t).unwrap();
            let p_tt = m.curve.discount(t, 1.0).unwrap();
            let upper = p_st * m.spec.terminal.integrate(|z| (p_tt * z - k).max(0.0)).unwrap();
            let lower = (p_st * (p_tt * m.spec.terminal.mean().unwrap() - k)).max(0.0);
            prop_assert!(c >= lower - 1e-9 && c <= upper + 1e-9, "{lower} <= {c} <= {upper}");
        }
    }
}
