//! Per-replica least-squares slopes of a critical observable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ensemble::{mean_and_variance, SampleSummary};

/// Ensembles smaller than this get a widened-interval warning.
pub const SLOPE_MIN_REPLICAS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub slopes: Vec<f64>,
    pub summary: SampleSummary,
    pub target_variance: Option<f64>,
    /// `|Var − target| / target`.
    pub relative_error: Option<f64>,
    pub warning: Option<String>,
}

/// Least-squares slope (with intercept) of each path over
/// `t ∈ [t_lo, t_hi]`; `paths[r][k]` is replica `r` at `times[k]`.
pub fn slope_regression(
    times: &[f64],
    paths: &[Vec<f64>],
    window: (f64, f64),
    target_variance: Option<f64>,
) -> Result<SlopeReport> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= window.0 - 1e-12 && times[k] <= window.1 + 1e-12)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InsufficientData("slope needs at least two times in the window".into()));
    }
    if paths.len() < 2 {
        return Err(Error::InsufficientData("slope variance needs at least two replicas".into()));
    }
    if paths.iter().any(|p| p.len() != times.len()) {
        return Err(Error::Structure("every path must be sampled on the common time grid".into()));
    }
    let t: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
    let k = t.len() as f64;
    let mt = t.iter().sum::<f64>() / k;
    let stt: f64 = t.iter().map(|x| (x - mt).powi(2)).sum();
    let slopes: Vec<f64> = paths
        .iter()
        .map(|p| {
            let y: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
            let my = y.iter().sum::<f64>() / k;
            t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum::<f64>() / stt
        })
        .collect();
    let summary = mean_and_variance(&slopes);
    let warning = (slopes.len() < SLOPE_MIN_REPLICAS).then(|| {
        format!(
            "only {} replicas (< {SLOPE_MIN_REPLICAS}): variance interval is wide",
            slopes.len()
        )
    });
    Ok(SlopeReport {
        relative_error: target_variance.map(|v| (summary.variance - v).abs() / v),
        target_variance,
        slopes,
        summary,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_lines() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let hs = [0.3, -1.2, 0.0, 2.5];
        let paths: Vec<Vec<f64>> = hs.iter().map(|h| times.iter().map(|t| 2.0 * h * t).collect()).collect();
        let r = slope_regression(&times, &paths, (0.0, 1.0), None).unwrap();
        for (s, h) in r.slopes.iter().zip(hs) {
            assert!((s - 2.0 * h).abs() < 1e-12);
        }
        assert!(r.warning.is_some());
    }

    #[test]
    fn window_restricts_fit() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let path: Vec<f64> = times.iter().map(|&t| if t <= 1.0 { t } else { 5.0 }).collect();
        let r = slope_regression(&times, &[path.clone(), path], (0.0, 1.0), None).unwrap();
        assert!((r.slopes[0] - 1.0).abs() < 1e-12);
    }
}
