//! Small statistics toolkit: two-sample Kolmogorov–Smirnov, sample quantiles
//! and moments.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::compensated_sum;

/// Coefficient of the asymptotic 5% critical value of the two-sample KS test.
pub const KS_C_05: f64 = 1.358;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSResult {
    /// Sup-distance between the two empirical CDFs.
    pub statistic: f64,
    pub sample_sizes: (usize, usize),
    /// `1.358 √((m + n) / (m n))`.
    pub threshold: f64,
    pub reject_at_5pct: bool,
}

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Config("sample contains NaN".into()));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Exact two-sample KS statistic by merging the sorted samples; ties are
/// consumed together before the CDFs are compared.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KSResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("KS test needs two non-empty samples".into()));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < m && j < n {
        let x = a[i].min(b[j]);
        while i < m && a[i] == x {
            i += 1;
        }
        while j < n && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let (mf, nf) = (m as f64, n as f64);
    let threshold = KS_C_05 * ((mf + nf) / (mf * nf)).sqrt();
    Ok(KSResult {
        statistic: d,
        sample_sizes: (m, n),
        threshold,
        reject_at_5pct: d > threshold,
    })
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7) of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(values: &[f64], ps: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Config("quantiles of an empty sample".into()));
    }
    let s = sorted(values)?;
    Ok(ps.iter().map(|&p| quantile_sorted(&s, p)).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Seed;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Seed(seed).rng();
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_and_separated_samples() {
        let a = [3.0, 1.0, 2.0, 2.0];
        assert_eq!(ks_two_sample(&a, &[2.0, 1.0, 2.0, 3.0]).unwrap().statistic, 0.0);
        let r = ks_two_sample(&[0.0, 0.5], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.sample_sizes, (2, 3));
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_across_samples() {
        // ECDFs: a jumps to 1 at 1; b is 1/2 at 1 and 1 at 2.
        let r = ks_two_sample(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn brute_force_agreement() {
        let a = normals(300, 1);
        let b: Vec<f64> = normals(200, 2).iter().map(|x| x * 1.3 + 0.1).collect();
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        let mut d = 0.0f64;
        for x in a.iter().chain(&b) {
            d = d.max((ecdf(&a, *x) - ecdf(&b, *x)).abs());
        }
        assert!((ks_two_sample(&a, &b).unwrap().statistic - d).abs() < 1e-15);
    }

    #[test]
    fn calibration_under_the_null() {
        let mut rejections = 0;
        for r in 0..100u64 {
            let a = normals(10_000, 1000 + 2 * r);
            let b = normals(10_000, 1001 + 2 * r);
            if ks_two_sample(&a, &b).unwrap().reject_at_5pct {
                rejections += 1;
            }
        }
        assert!(rejections <= 10, "{rejections} rejections");
    }

    #[test]
    fn quantile_type7() {
        let v = [4.0, 1.0, 3.0, 2.0];
        let q = quantiles(&v, &[0.0, 0.25, 0.5, 1.0]).unwrap();
        assert_eq!(q, vec![1.0, 1.75, 2.5, 4.0]);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
    }
}
