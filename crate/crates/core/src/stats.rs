//! Summary statistics for Monte Carlo checks. Sums are compensated, so
//! results depend only on the order of the input slice.

use crate::numerics::neumaier;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = neumaier(xs.iter().copied()) / n as f64;
        let var = sample_variance_about(xs, mean);
        Self { mean, se: (var / n as f64).sqrt(), n }
    }

    /// `|mean - target| ≤ k · se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }

    /// Deviation from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }
}

fn sample_variance_about(xs: &[f64], mean: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    neumaier(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let mean = neumaier(xs.iter().copied()) / xs.len() as f64;
    sample_variance_about(xs, mean)
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = neumaier(xs.iter().copied()) / n;
    let m2 = neumaier(xs.iter().map(|x| (x - mean).powi(2))) / n;
    let m4 = neumaier(xs.iter().map(|x| (x - mean).powi(4))) / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// `c(α)` of the Kolmogorov distribution at α = 1%.
const KS_C_01: f64 = 1.628;

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_critical_one_sample(n: usize) -> f64 {
    KS_C_01 / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_01 * ((n + m) / (n * m)).sqrt()
}

/// Least-squares fit `y ≈ β₀ + Σ β_k x_k`; returns coefficients and the
/// largest absolute residual.
pub fn affine_fit(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let p = rows.first().map_or(0, |r| r.len()) + 1;
    let design = |r: &[f64], k: usize| if k == 0 { 1.0 } else { r[k - 1] };
    // Normal equations, solved by Gaussian elimination with partial pivoting.
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = neumaier(rows.iter().map(|r| design(r, i) * design(r, j)));
        }
        a[i][p] = neumaier(rows.iter().zip(y).map(|(r, &v)| design(r, i) * v));
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).expect("non-empty");
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let resid = rows
        .iter()
        .zip(y)
        .map(|(r, &v)| (v - (0..p).map(|k| beta[k] * design(r, k)).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    (beta, resid)
}

/// Least-squares slope of `y ≈ β x` through the origin.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    neumaier(x.iter().zip(y).map(|(a, b)| a * b)) / neumaier(x.iter().map(|a| a * a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_a_constant() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        assert!(e.within(2.0, 3.0));
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let u: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&u, |x| x) - 0.005).abs() < 1e-12);
        assert!((ks_critical_two_sample(100, 100) - 1.628 * 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn affine_fit_recovers_a_plane() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 - 2.0 * r[0] + 0.25 * r[1]).collect();
        let (beta, resid) = affine_fit(&rows, &y);
        assert!((beta[0] - 1.5).abs() < 1e-12 && (beta[1] + 2.0).abs() < 1e-12 && (beta[2] - 0.25).abs() < 1e-12);
        assert!(resid < 1e-12);
        assert!((slope_through_origin(&[1.0, 2.0], &[2.0, 4.0]) - 2.0).abs() < 1e-15);
    }
}
