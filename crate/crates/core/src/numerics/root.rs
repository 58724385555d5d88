use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

/// Brent's method on a bracket with a sign change. Never leaves `[lo, hi]`.
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64) -> Result<RootResult, NumericsError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() {
        return Err(NumericsError::NonFinite { at: a });
    }
    if !fb.is_finite() {
        return Err(NumericsError::NonFinite { at: b });
    }
    if fa == 0.0 {
        return Ok(RootResult { root: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(RootResult { root: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(RootResult { root: b, residual: fb, iterations: iter });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericsError::NonFinite { at: b });
        }
    }
    Err(NumericsError::RootStalled { x: b, residual: fb })
}

/// Root of a function that should be monotone on `[lo, hi]`.
///
/// Monotonicity is checked on 17 equally spaced points before solving; a
/// direction change is reported as [`NumericsError::NonMonotone`].
pub fn find_root_monotone<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> Result<RootResult, NumericsError> {
    const PROBES: usize = 17;
    let mut dir = 0.0;
    let mut prev = f(lo);
    for i in 1..PROBES {
        let x = lo + (hi - lo) * i as f64 / (PROBES - 1) as f64;
        let v = f(x);
        if !v.is_finite() {
            return Err(NumericsError::NonFinite { at: x });
        }
        let step = v - prev;
        if step != 0.0 {
            if dir != 0.0 && step.signum() != dir {
                return Err(NumericsError::NonMonotone { lo, hi });
            }
            dir = step.signum();
        }
        prev = v;
    }
    brent(f, lo, hi, xtol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cube_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r.root - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_bracket_without_sign_change() {
        let e = brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(e, NumericsError::NoSignChange { .. }));
    }

    #[test]
    fn brent_stays_in_bracket_for_steep_functions() {
        let r = brent(|x: f64| (50.0 * (x - 0.3)).tanh(), 0.0, 1.0, 1e-14).unwrap();
        assert!((r.root - 0.3).abs() < 1e-12);
    }

    #[test]
    fn monotone_wrapper_detects_turning_point() {
        let e = find_root_monotone(|x: f64| (x - 0.5).powi(2) - 0.1, 0.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(e, NumericsError::NonMonotone { .. }));
        let r = find_root_monotone(|x: f64| x.exp() - 2.0, 0.0, 1.0, 1e-14).unwrap();
        assert!((r.root - 2f64.ln()).abs() < 1e-13);
    }
}
