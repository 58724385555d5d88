//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.
//!
//! Every integral is split into segments. A segment is either a finite interval
//! integrated directly, a semi-infinite tail mapped onto `u ∈ (0, 1]` through
//! `z = origin ± (1 - u) / u`, or a panel adjacent to an algebraic endpoint
//! singularity `w^e` (`-1 < e < 0`) mapped through `w = len · v^(1/(1+e))`,
//! which makes the transformed integrand bounded. Panels from all segments
//! share one error budget; the panel with the largest error estimate is
//! bisected until the global estimate meets the tolerance.

use super::NumericsError;

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_643_474_262,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-9, max_panels: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }

    fn target(&self, estimate: f64) -> f64 {
        self.abs.max(self.rel * estimate.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub panels: usize,
}

/// Evaluation point handed to integrands.
///
/// `from_lo` and `to_hi` are the exact distances to the ends of the segment
/// containing `z`; near a singular endpoint they carry digits that `z` loses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub z: f64,
    pub lo: f64,
    pub hi: f64,
    pub from_lo: f64,
    pub to_hi: f64,
}

impl Node {
    pub fn at(z: f64) -> Self {
        Self { z, lo: f64::NAN, hi: f64::NAN, from_lo: f64::NAN, to_hi: f64::NAN }
    }

    /// `z - anchor`, exact when `anchor` is the left end of the segment.
    #[inline]
    pub fn offset_from(&self, anchor: f64) -> f64 {
        if anchor == self.lo {
            self.from_lo
        } else {
            self.z - anchor
        }
    }

    /// `anchor - z`, exact when `anchor` is the right end of the segment.
    #[inline]
    pub fn offset_to(&self, anchor: f64) -> f64 {
        if anchor == self.hi {
            self.to_hi
        } else {
            anchor - self.z
        }
    }

    /// The same point in coordinates translated by `shift` (`z + shift`).
    #[inline]
    pub fn translated(&self, shift: f64) -> Self {
        Self { z: self.z + shift, lo: self.lo + shift, hi: self.hi + shift, ..*self }
    }
}

/// Algebraic endpoint behaviour `|z - at|^exponent` on both sides of `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub at: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Direct,
    /// z = origin + (1 - u) / u
    RightTail(f64),
    /// z = origin - (1 - u) / u
    LeftTail(f64),
    /// z = lo + len · v^(1/beta)
    PowerLeft { len: f64, beta: f64 },
    /// z = hi - len · v^(1/beta)
    PowerRight { len: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    map: Map,
    lo: f64,
    hi: f64,
}

impl Piece {
    /// Returns the node in the original variable and the jacobian.
    #[inline]
    fn apply(&self, u: f64) -> (Node, f64) {
        let (lo, hi) = (self.lo, self.hi);
        match self.map {
            Map::Direct => (Node { z: u, lo, hi, from_lo: u - lo, to_hi: hi - u }, 1.0),
            Map::RightTail(o) => {
                let d = (1.0 - u) / u;
                let z = o + d;
                let from_lo = if o == lo { d } else { z - lo };
                (Node { z, lo, hi, from_lo, to_hi: f64::INFINITY }, 1.0 / (u * u))
            }
            Map::LeftTail(o) => {
                let d = (1.0 - u) / u;
                let z = o - d;
                let to_hi = if o == hi { d } else { hi - z };
                (Node { z, lo, hi, from_lo: f64::INFINITY, to_hi }, 1.0 / (u * u))
            }
            Map::PowerLeft { len, beta } => {
                let p = 1.0 / beta;
                let vp = u.powf(p);
                let w = len * vp;
                let node = Node { z: lo + w, lo, hi, from_lo: w, to_hi: (hi - lo) - w };
                (node, len * p * vp / u)
            }
            Map::PowerRight { len, beta } => {
                let p = 1.0 / beta;
                let vp = u.powf(p);
                let w = len * vp;
                let node = Node { z: hi - w, lo, hi, from_lo: (hi - lo) - w, to_hi: w };
                (node, len * p * vp / u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    piece: Piece,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    splittable: bool,
}

fn gk21<F: Fn(&Node) -> f64>(f: &F, piece: &Piece, a: f64, b: f64) -> Result<(f64, f64), NumericsError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |u: f64| -> Result<f64, NumericsError> {
        let (node, jac) = piece.apply(u);
        let v = f(&node);
        if v == 0.0 {
            return Ok(0.0);
        }
        let g = v * jac;
        if g.is_finite() {
            Ok(g)
        } else {
            Err(NumericsError::NonFinite { at: node.z })
        }
    };

    let fc = eval(centre)?;
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((value, err))
}

fn adaptive<F: Fn(&Node) -> f64>(
    f: &F,
    pieces: &[(Piece, f64, f64)],
    tol: Tolerance,
    span: (f64, f64),
) -> Result<QuadResult, NumericsError> {
    let mut panels: Vec<Panel> = Vec::with_capacity(pieces.len() * 4);
    let mut evals = 0;
    for &(piece, a, b) in pieces {
        if !(b > a) {
            continue;
        }
        let (value, error) = gk21(f, &piece, a, b)?;
        evals += 21;
        panels.push(Panel { piece, a, b, value, error, splittable: true });
    }

    loop {
        let total = neumaier(panels.iter().map(|p| p.value));
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if err <= tol.target(total) {
            return Ok(QuadResult { value: total, error: err, evals, panels: panels.len() });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < tol.max_panels) else {
            return Err(NumericsError::NonConvergence {
                lo: span.0,
                hi: span.1,
                estimate: total,
                error: err,
                evals,
                panels: panels.len(),
            });
        };
        let p = panels[i];
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            panels[i].splittable = false;
            continue;
        }
        let (v1, e1) = gk21(f, &p.piece, p.a, mid)?;
        let (v2, e2) = gk21(f, &p.piece, mid, p.b)?;
        evals += 42;
        panels[i] = Panel { b: mid, value: v1, error: e1, ..p };
        panels.push(Panel { a: mid, value: v2, error: e2, ..p });
    }
}

/// Compensated (Neumaier) summation in iteration order.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn singular(exp: f64) -> bool {
    exp < 0.0
}

/// Expands one segment into mapped pieces. Endpoint exponents below zero
/// select the power substitution on that side.
fn push_segment(lo: f64, hi: f64, lo_exp: f64, hi_exp: f64, out: &mut Vec<(Piece, f64, f64)>) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let len = hi - lo;
            match (singular(lo_exp), singular(hi_exp)) {
                (true, true) => {
                    // Both halves keep the full segment as their node frame.
                    let half = 0.5 * len;
                    let left = Map::PowerLeft { len: half, beta: lo_exp + 1.0 };
                    let right = Map::PowerRight { len: len - half, beta: hi_exp + 1.0 };
                    out.push((Piece { map: left, lo, hi }, 0.0, 1.0));
                    out.push((Piece { map: right, lo, hi }, 0.0, 1.0));
                }
                (true, false) => out.push((Piece { map: Map::PowerLeft { len, beta: lo_exp + 1.0 }, lo, hi }, 0.0, 1.0)),
                (false, true) => out.push((Piece { map: Map::PowerRight { len, beta: hi_exp + 1.0 }, lo, hi }, 0.0, 1.0)),
                (false, false) => out.push((Piece { map: Map::Direct, lo, hi }, lo, hi)),
            }
        }
        (true, false) => {
            let mut origin = lo;
            if singular(lo_exp) {
                out.push((Piece { map: Map::PowerLeft { len: 1.0, beta: lo_exp + 1.0 }, lo, hi }, 0.0, 1.0));
                origin = lo + 1.0;
            }
            out.push((Piece { map: Map::RightTail(origin), lo, hi }, 0.0, 0.5));
            out.push((Piece { map: Map::RightTail(origin), lo, hi }, 0.5, 1.0));
        }
        (false, true) => {
            let mut origin = hi;
            if singular(hi_exp) {
                out.push((Piece { map: Map::PowerRight { len: 1.0, beta: hi_exp + 1.0 }, lo, hi }, 0.0, 1.0));
                origin = hi - 1.0;
            }
            out.push((Piece { map: Map::LeftTail(origin), lo, hi }, 0.0, 0.5));
            out.push((Piece { map: Map::LeftTail(origin), lo, hi }, 0.5, 1.0));
        }
        (false, false) => {
            out.push((Piece { map: Map::LeftTail(0.0), lo, hi }, 0.0, 0.5));
            out.push((Piece { map: Map::LeftTail(0.0), lo, hi }, 0.5, 1.0));
            out.push((Piece { map: Map::RightTail(0.0), lo, hi }, 0.0, 0.5));
            out.push((Piece { map: Map::RightTail(0.0), lo, hi }, 0.5, 1.0));
        }
    }
}

/// Integrates `f` over `[lo, hi]` (either limit may be infinite), with the
/// initial panels split at `breaks` and at every singularity. A segment end
/// that coincides with a singularity uses the power substitution.
pub fn integrate_piecewise<F: Fn(&Node) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    singularities: &[Singularity],
    tol: Tolerance,
) -> Result<QuadResult, NumericsError> {
    if lo.is_nan() || hi.is_nan() {
        return Err(NumericsError::Domain("integration limit is NaN".into()));
    }
    if !(hi > lo) {
        if lo == hi {
            return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0, panels: 0 });
        }
        return Err(NumericsError::Domain(format!("reversed limits [{lo}, {hi}]")));
    }
    for s in singularities {
        if !(s.exponent > -1.0) {
            return Err(NumericsError::Domain(format!(
                "endpoint exponent {} at {} is not integrable",
                s.exponent, s.at
            )));
        }
    }
    let mut points: Vec<f64> = breaks
        .iter()
        .chain(singularities.iter().map(|s| &s.at))
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let exp_at = |x: f64| -> f64 {
        singularities
            .iter()
            .filter(|s| s.at == x)
            .map(|s| s.exponent)
            .fold(0.0, f64::min)
    };

    let mut edges = Vec::with_capacity(points.len() + 2);
    edges.push(lo);
    edges.extend(points);
    edges.push(hi);
    let mut pieces = Vec::with_capacity(edges.len() * 2);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let a_exp = if a.is_finite() { exp_at(a) } else { 0.0 };
        let b_exp = if b.is_finite() { exp_at(b) } else { 0.0 };
        push_segment(a, b, a_exp, b_exp, &mut pieces);
    }
    adaptive(&f, &pieces, tol, (lo, hi))
}

/// Integrates `f` over `[lo, hi]`; either limit may be infinite. Reversed
/// limits flip the sign.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<QuadResult, NumericsError> {
    integrate_with_breaks(f, lo, hi, &[], tol)
}

/// As [`integrate_interval`], with the initial panels split at `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult, NumericsError> {
    if lo > hi {
        let r = integrate_piecewise(|n: &Node| f(n.z), hi, lo, breaks, &[], tol)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    integrate_piecewise(|n: &Node| f(n.z), lo, hi, breaks, &[], tol)
}

/// Integrates `f(w)` over `[0, len]` where `f(w) ~ w^exponent` as `w → 0+`.
pub fn integrate_power_left<F: Fn(f64) -> f64>(
    f: F,
    len: f64,
    exponent: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult, NumericsError> {
    integrate_piecewise(
        |n: &Node| f(n.from_lo),
        0.0,
        len,
        breaks,
        &[Singularity { at: 0.0, exponent }],
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tight() -> Tolerance {
        Tolerance::new(1e-13, 1e-12)
    }

    #[test]
    fn kronrod_rule_is_exact_for_smooth_integrands() {
        let r = integrate_interval(f64::exp, 0.0, 1.0, tight()).unwrap();
        assert!((r.value - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn gaussian_over_the_real_line() {
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let r = integrate_interval(pdf, f64::NEG_INFINITY, f64::INFINITY, tight()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
        let m2 = integrate_interval(|x| x * x * pdf(x), f64::NEG_INFINITY, f64::INFINITY, tight())
            .unwrap();
        assert!((m2.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_tails_both_directions() {
        let r = integrate_interval(|x: f64| (-x).exp(), 0.0, f64::INFINITY, tight()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let l = integrate_interval(|x: f64| x.exp(), f64::NEG_INFINITY, 0.0, tight()).unwrap();
        assert!((l.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_the_sign() {
        let r = integrate_interval(|x| x, 1.0, 0.0, tight()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_resolve_a_narrow_peak() {
        let centre = 37.0;
        let w = 1e-3;
        let peak = |x: f64| {
            let d = (x - centre) / w;
            (-0.5 * d * d).exp() / (w * (2.0 * PI).sqrt())
        };
        let r = integrate_with_breaks(
            peak,
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[centre - 8.0 * w, centre, centre + 8.0 * w],
            tight(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn power_substitution_handles_strong_endpoint_singularity() {
        // ∫_0^1 w^-0.95 dw = 20
        let r = integrate_power_left(|w: f64| w.powf(-0.95), 1.0, -0.95, &[], tight()).unwrap();
        assert!((r.value - 20.0).abs() < 1e-10, "{}", r.value);
        // ∫_0^∞ w^-0.5 e^-w dw = Γ(1/2)
        let r = integrate_power_left(
            |w: f64| w.powf(-0.5) * (-w).exp(),
            f64::INFINITY,
            -0.5,
            &[],
            tight(),
        )
        .unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn bisection_alone_copes_with_mild_singularity_at_zero() {
        let r = integrate_interval(|w: f64| w.powf(-0.5), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let e = integrate_interval(|_| f64::NAN, 0.0, 1.0, tight()).unwrap_err();
        assert!(matches!(e, NumericsError::NonFinite { .. }));
    }

    #[test]
    fn exhausted_budget_is_reported_with_diagnostics() {
        let tol = Tolerance { abs: 1e-14, rel: 0.0, max_panels: 3 };
        let e = integrate_interval(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, tol).unwrap_err();
        match e {
            NumericsError::NonConvergence { panels, evals, .. } => {
                assert_eq!(panels, 3);
                assert!(evals > 21);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_sided_singularity_uses_exact_offsets() {
        // ∫ (y-a)^-0.9 (b-y)^-0.9 dy over [a, b] = (b-a)^-0.8 B(0.1, 0.1)
        let (a, b) = (0.7, 1.3);
        let e = -0.9;
        let r = integrate_piecewise(
            |n: &Node| n.offset_from(a).powf(e) * n.offset_to(b).powf(e),
            a,
            b,
            &[],
            &[Singularity { at: a, exponent: e }, Singularity { at: b, exponent: e }],
            tight(),
        )
        .unwrap();
        let want = (b - a).powf(-0.8) * super::super::special::beta(0.1, 0.1);
        assert!((r.value / want - 1.0).abs() < 1e-11, "{} vs {}", r.value, want);
    }

    #[test]
    fn interior_singularity_is_split() {
        // ∫_{-1}^{1} |y|^-0.5 dy = 4
        let r = integrate_piecewise(
            |n: &Node| n.z.abs().powf(-0.5),
            -1.0,
            1.0,
            &[],
            &[Singularity { at: 0.0, exponent: -0.5 }],
            tight(),
        )
        .unwrap();
        assert!((r.value - 4.0).abs() < 1e-11);
    }
}
