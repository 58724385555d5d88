use super::quad::{integrate_piecewise, neumaier, Node, Singularity, Tolerance};
use super::root::brent;
use super::NumericsError;

/// Quantile search resolution in the sampled variable.
pub const INVERSION_XTOL: f64 = 1e-10;

/// Returns `y` with `∫_lo^y f = u · ∫_lo^hi f` for an unnormalised,
/// non-negative `f`, by segment-wise quadrature and Brent's method.
///
/// Segments run between consecutive breakpoints and singular points; the
/// cumulative mass picks the segment, and the root is solved from whichever
/// segment end is closer in mass so that endpoint singularities stay local.
pub fn invert_cdf<F: Fn(&Node) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    singularities: &[Singularity],
    u: f64,
    tol: Tolerance,
) -> Result<f64, NumericsError> {
    if !(0.0..1.0).contains(&u) {
        return Err(NumericsError::Domain(format!("uniform draw {u} outside [0, 1)")));
    }
    let mut edges: Vec<f64> = breaks
        .iter()
        .chain(singularities.iter().map(|s| &s.at))
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut masses = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        masses.push(integrate_piecewise(&f, w[0], w[1], &[], singularities, tol)?.value);
    }
    let total = neumaier(masses.iter().copied());
    if !(total > 0.0 && total.is_finite()) {
        return Err(NumericsError::Domain(format!("cannot invert a measure of mass {total}")));
    }
    let target = u * total;

    let mut k = masses.iter().rposition(|m| *m > 0.0).unwrap_or(masses.len() - 1);
    let mut acc = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 && target < acc + m {
            k = i;
            break;
        }
        acc += m;
    }
    let before = neumaier(masses[..k].iter().copied());
    let (a, b) = (edges[k], edges[k + 1]);
    let mass = masses[k];
    let rel = (target - before).clamp(0.0, mass);

    let from_left = rel <= 0.5 * mass;
    let g = |y: f64| -> f64 {
        let r = if from_left {
            integrate_piecewise(&f, a, y, &[], singularities, tol).map(|q| q.value - rel)
        } else {
            integrate_piecewise(&f, y, b, &[], singularities, tol).map(|q| (mass - q.value) - rel)
        };
        r.unwrap_or(f64::NAN)
    };

    let (lo_b, hi_b) = bracket(&g, a, b)?;
    Ok(brent(g, lo_b, hi_b, INVERSION_XTOL)?.root)
}

/// Finite bracket inside `[a, b]` where `g` changes sign; unbounded ends are
/// walked outwards geometrically.
fn bracket<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Result<(f64, f64), NumericsError> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => Ok((a, b)),
        (true, false) => {
            let mut step = 1.0_f64.max(a.abs() * 0.1);
            let mut lo = a;
            for _ in 0..200 {
                let hi = a + step;
                if g(hi) >= 0.0 {
                    return Ok((lo, hi));
                }
                lo = hi;
                step *= 2.0;
            }
            Err(NumericsError::Domain("upper quantile bracket not found".into()))
        }
        (false, true) => {
            let mut step = 1.0_f64.max(b.abs() * 0.1);
            let mut hi = b;
            for _ in 0..200 {
                let lo = b - step;
                if g(lo) <= 0.0 {
                    return Ok((lo, hi));
                }
                hi = lo;
                step *= 2.0;
            }
            Err(NumericsError::Domain("lower quantile bracket not found".into()))
        }
        (false, false) => {
            let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
            for _ in 0..200 {
                if g(lo) <= 0.0 {
                    break;
                }
                lo *= 2.0;
            }
            for _ in 0..200 {
                if g(hi) >= 0.0 {
                    break;
                }
                hi *= 2.0;
            }
            Ok((lo, hi))
        }
    }
}
