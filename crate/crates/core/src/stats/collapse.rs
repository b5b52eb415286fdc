//! Empirical check that suprema of a non-critical observable vanish as `N`
//! grows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{SeedSpec, Stream};

/// Smallest ensemble accepted per ladder rung.
pub const COLLAPSE_MIN_REPLICAS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseTestSpec {
    pub label: String,
    /// Strictly increasing geometric ladder, at least three values.
    pub n_ladder: Vec<usize>,
    /// Exponent of the bound, reported next to the fitted slope.
    pub predicted_exponent: f64,
    pub confidence: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl CollapseTestSpec {
    pub fn new(label: impl Into<String>, n_ladder: Vec<usize>, predicted_exponent: f64) -> Self {
        Self {
            label: label.into(),
            n_ladder,
            predicted_exponent,
            confidence: 0.95,
            bootstrap_resamples: 2000,
            bootstrap_seed: 0x636f_6c6c,
        }
    }

    /// Spin-system bound for `Y_i²`: exponent `−(1 − 2/d)/8`.
    pub fn spin(label: impl Into<String>, n_ladder: Vec<usize>, d: f64) -> Self {
        Self::new(label, n_ladder, -(1.0 - 2.0 / d) / 8.0)
    }

    /// Rotator bound for `‖ρ̃_N‖²_r`: exponent `1/(2d) − 1/4`.
    pub fn rotator(label: impl Into<String>, n_ladder: Vec<usize>, d: f64) -> Self {
        Self::new(label, n_ladder, 1.0 / (2.0 * d) - 0.25)
    }

    fn validate(&self) -> Result<()> {
        let l = &self.n_ladder;
        if l.len() < 3 {
            return config(format!("collapse test needs at least 3 N-values, got {}", l.len()));
        }
        if l.windows(2).any(|w| w[1] <= w[0]) || l[0] == 0 {
            return config("N-ladder must be strictly increasing and positive");
        }
        let r0 = l[1] as f64 / l[0] as f64;
        if l.windows(2).any(|w| ((w[1] as f64 / w[0] as f64) / r0 - 1.0).abs() > 1e-9) {
            return config(format!("N-ladder {l:?} is not geometric"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) || self.bootstrap_resamples < 100 {
            return config("confidence must lie in (0,1) with at least 100 bootstrap resamples");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseVerdict {
    pub label: String,
    pub n_values: Vec<usize>,
    pub medians: Vec<f64>,
    /// Least-squares slope of `ln median` against `ln N`.
    pub slope: Option<f64>,
    /// Bootstrap percentile interval for the slope.
    pub ci: Option<(f64, f64)>,
    pub predicted_exponent: f64,
    pub strictly_decreasing: bool,
    /// Every median is zero.
    pub degenerate: bool,
    pub collapse: bool,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn log_slope(ns: &[usize], medians: &[f64]) -> Option<f64> {
    if medians.iter().any(|m| !(*m > 0.0)) {
        return None;
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `sups[i]` holds one `sup_{t≤T} |observable|` per replica at `n_ladder[i]`.
///
/// Collapse holds when the medians strictly decrease along the ladder and
/// the fitted log-log slope has its whole confidence interval below zero.
/// All-zero medians are a degenerate pass.
pub fn collapse_test(spec: &CollapseTestSpec, sups: &[Vec<f64>]) -> Result<CollapseVerdict> {
    spec.validate()?;
    if sups.len() != spec.n_ladder.len() {
        return Err(Error::Structure(format!(
            "{} samples for a ladder of {}",
            sups.len(),
            spec.n_ladder.len()
        )));
    }
    if let Some(s) = sups.iter().find(|s| s.len() < COLLAPSE_MIN_REPLICAS) {
        return Err(Error::InsufficientData(format!(
            "collapse test needs ≥ {COLLAPSE_MIN_REPLICAS} replicas per N, got {}",
            s.len()
        )));
    }
    if sups.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Numerical("suprema must be finite and non-negative".into()));
    }
    let medians: Vec<f64> = sups.iter().map(|s| median(&mut s.clone())).collect();
    let degenerate = medians.iter().all(|m| *m == 0.0);
    let strictly_decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let slope = log_slope(&spec.n_ladder, &medians);
    let ci = slope.map(|_| {
        let mut rng = SeedSpec::new(spec.bootstrap_seed, 0).rng(Stream::Auxiliary(1));
        let mut slopes = Vec::with_capacity(spec.bootstrap_resamples);
        let mut buf = Vec::new();
        for _ in 0..spec.bootstrap_resamples {
            let meds: Vec<f64> = sups
                .iter()
                .map(|s| {
                    buf.clear();
                    buf.extend((0..s.len()).map(|_| s[rng.gen_range(0..s.len())]));
                    median(&mut buf)
                })
                .collect();
            if let Some(b) = log_slope(&spec.n_ladder, &meds) {
                slopes.push(b);
            }
        }
        slopes.sort_by(f64::total_cmp);
        let alpha = 1.0 - spec.confidence;
        let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
        (q(alpha / 2.0), q(1.0 - alpha / 2.0))
    });
    let collapse = degenerate
        || (strictly_decreasing && matches!((slope, ci), (Some(s), Some((_, hi))) if s < 0.0 && hi < 0.0));
    Ok(CollapseVerdict {
        label: spec.label.clone(),
        n_values: spec.n_ladder.clone(),
        medians,
        slope,
        ci,
        predicted_exponent: spec.predicted_exponent,
        strictly_decreasing,
        degenerate,
        collapse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synthetic(ladder: &[usize], exponent: f64, noise: f64, reps: usize) -> Vec<Vec<f64>> {
        let mut rng = SeedSpec::new(77, 0).rng(Stream::Auxiliary(3));
        ladder
            .iter()
            .map(|&n| {
                (0..reps)
                    .map(|_| (n as f64).powf(exponent) * (1.0 + noise * (2.0 * rng.gen::<f64>() - 1.0)))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_observable_is_degenerate_pass() {
        let spec = CollapseTestSpec::spin("zero", vec![100, 400, 1600], 4.0);
        let v = collapse_test(&spec, &vec![vec![0.0; 100]; 3]).unwrap();
        assert!(v.collapse && v.degenerate && v.slope.is_none());
    }

    #[test]
    fn synthetic_power_law() {
        let ladder = vec![256, 1024, 4096, 16384];
        let spec = CollapseTestSpec::new("synthetic", ladder.clone(), -0.125);
        let v = collapse_test(&spec, &synthetic(&ladder, -0.125, 0.05, 200)).unwrap();
        let s = v.slope.unwrap();
        assert!((s + 0.125).abs() < 0.02, "slope {s}");
        assert!(v.collapse);
    }

    #[test]
    fn growing_observable_does_not_collapse() {
        let ladder = vec![100, 400, 1600];
        let spec = CollapseTestSpec::new("growing", ladder.clone(), -0.0625);
        let v = collapse_test(&spec, &synthetic(&ladder, 0.05, 0.3, 150)).unwrap();
        assert!(!v.collapse);
    }

    #[test]
    fn ladder_validation() {
        let spec = CollapseTestSpec::new("x", vec![100, 400, 1000], -0.1);
        assert!(matches!(collapse_test(&spec, &vec![vec![1.0; 100]; 3]), Err(Error::Config(_))));
        let spec = CollapseTestSpec::new("x", vec![100, 400], -0.1);
        assert!(collapse_test(&spec, &vec![vec![1.0; 100]; 2]).is_err());
        let spec = CollapseTestSpec::new("x", vec![100, 200, 400], -0.1);
        assert!(matches!(
            collapse_test(&spec, &vec![vec![1.0; 50]; 3]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(CollapseTestSpec::spin("a", vec![], 4.0).predicted_exponent, -1.0 / 16.0);
        assert_eq!(CollapseTestSpec::rotator("a", vec![], 4.0).predicted_exponent, -0.125);
    }
}
