//! Kolmogorov–Smirnov statistics with the asymptotic Kolmogorov p-value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum sample size accepted by the KS tests.
pub const KS_MIN_SAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`, with `Q(λ) = 1` for small `λ`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=200 {
        let jf = j as f64;
        let term = sign * 2.0 * (a * jf * jf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev.abs() || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        prev = term;
        sign = -sign;
    }
    // the alternating series has not settled: λ is tiny
    1.0
}

fn p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn finite_sorted(xs: &[f64], what: &str) -> Result<Vec<f64>> {
    if xs.len() < KS_MIN_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "{what} has {} points, KS needs at least {KS_MIN_SAMPLE}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("{what} contains non-finite values")));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sided two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = finite_sorted(a, "first sample")?;
    let b = finite_sorted(b, "second sample")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
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
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, na * nb / (na + nb)),
    })
}

/// Two-sided one-sample test against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let a = finite_sorted(a, "sample")?;
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n),
    })
}

/// KS distances of finite-`N` samples to one limit sample, per `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsLadderReport {
    pub n_values: Vec<usize>,
    pub results: Vec<KsResult>,
    pub non_increasing: bool,
    pub final_p: f64,
    pub passed: bool,
}

/// `ladder[i] = (N_i, t_observed, sample)`. Passes when the statistic does
/// not increase along the ladder and the last p-value exceeds `0.01`.
pub fn distributional_convergence_test(
    ladder: &[(usize, f64, Vec<f64>)],
    limit_time: f64,
    limit_sample: &[f64],
) -> Result<KsLadderReport> {
    if ladder.is_empty() {
        return Err(Error::InsufficientData("empty N-ladder".into()));
    }
    let mut results = Vec::with_capacity(ladder.len());
    for (n, t, sample) in ladder {
        if (t - limit_time).abs() > 1e-12 * limit_time.abs().max(1.0) {
            return Err(Error::Structure(format!(
                "N = {n} observed at t = {t}, limit sample at t = {limit_time}"
            )));
        }
        if limit_sample.len() < 10 * sample.len() {
            return Err(Error::InsufficientData(format!(
                "limit sample ({}) must be at least 10× the N = {n} ensemble ({})",
                limit_sample.len(),
                sample.len()
            )));
        }
        results.push(ks_two_sample(sample, limit_sample)?);
    }
    let non_increasing = results.windows(2).all(|w| w[1].statistic <= w[0].statistic);
    let final_p = results.last().map_or(0.0, |r| r.p_value);
    Ok(KsLadderReport {
        n_values: ladder.iter().map(|l| l.0).collect(),
        results,
        non_increasing,
        final_p,
        passed: non_increasing && final_p > 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedSpec, Stream};
    use rand::Rng;

    fn uniforms(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = SeedSpec::new(seed, 0).rng(Stream::Auxiliary(0));
        (0..n).map(|_| shift + rng.gen::<f64>()).collect()
    }

    #[test]
    fn identical_samples() {
        let a = uniforms(1, 100, 0.0);
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_uniforms() {
        let r = ks_two_sample(&uniforms(1, 1000, 0.0), &uniforms(2, 1000, 0.5)).unwrap();
        assert!((r.statistic - 0.5).abs() < 0.05);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn undersized_is_rejected() {
        assert!(matches!(
            ks_two_sample(&[0.0; 10], &[0.0; 30]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn q_function_values() {
        // tabulated Kolmogorov distribution: P(K > 1.36) ≈ 0.0494
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_q(0.5) - 0.9639).abs() < 5e-4);
    }

    #[test]
    fn one_sample_uniform() {
        let r = ks_one_sample(&uniforms(5, 5000, 0.0), |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value > 0.001);
        let r = ks_one_sample(&uniforms(5, 5000, 0.2), |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ladder_checks_times_and_sizes() {
        let lim = uniforms(9, 2000, 0.0);
        let ladder = vec![(10, 1.0, uniforms(1, 100, 0.0)), (20, 1.0, uniforms(2, 100, 0.0))];
        assert!(distributional_convergence_test(&ladder, 1.0, &lim).is_ok());
        assert!(matches!(
            distributional_convergence_test(&ladder, 2.0, &lim),
            Err(Error::Structure(_))
        ));
        assert!(distributional_convergence_test(&ladder, 1.0, &lim[..500]).is_err());
    }

    #[test]
    fn ladder_null_self_test() {
        let lim = uniforms(9, 20_000, 0.0);
        let ladder = vec![(1, 1.0, uniforms(11, 2000, 0.0))];
        let r = distributional_convergence_test(&ladder, 1.0, &lim).unwrap();
        assert!(r.final_p > 0.001);
    }
}
