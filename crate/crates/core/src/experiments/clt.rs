//! Gaussian fluctuations below the critical point.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{derived_seed, Check, CriterionReport, CwEnsemble, KuramotoEnsemble};
use crate::cw::{cw_clt_parameters, linearized_cw, CwProfile};
use crate::error::{Error, Result};
use crate::kuramoto::kuramoto_clt_system;
use crate::law::DisorderLaw;
use crate::limit::{terminal_samples, LimitSdeSpec, LinearOuSpec, StoppingRule};
use crate::measure::{SpaceScale, TimeScale};
use crate::params::KuramotoParams;
use crate::stats::mean_and_variance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltConfig {
    pub cw_beta: f64,
    pub cw_n: usize,
    pub cw_replicas: usize,
    pub cw_t: f64,
    pub kuramoto_theta: f64,
    pub kuramoto_omega: f64,
    pub kuramoto_n: usize,
    pub kuramoto_replicas: usize,
    pub kuramoto_t: f64,
    pub kuramoto_dt: f64,
    /// Harmonic compared with its Gaussian block.
    pub harmonic: usize,
    pub ou_paths: usize,
    /// Allowed deviation in standard errors.
    pub se_factor: f64,
    pub seed: u64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            cw_beta: 0.5,
            cw_n: 10_000,
            cw_replicas: 400,
            cw_t: 1.0,
            kuramoto_theta: 1.0,
            kuramoto_omega: 0.25,
            kuramoto_n: 1000,
            kuramoto_replicas: 400,
            kuramoto_t: 5.0,
            kuramoto_dt: 1e-2,
            harmonic: 2,
            ou_paths: 4000,
            se_factor: 3.0,
            seed: 4,
        }
    }
}

/// Ensemble variances of `√N`-fluctuations against the Gaussian limit.
pub(super) fn clt_subcritical(cfg: &CltConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(4, "clt-subcritical");

    let law = DisorderLaw::dirac_zero();
    let spec = linearized_cw(&law, cfg.cw_beta, 0.0);
    let clt = cw_clt_parameters(&spec, cfg.cw_beta, 0.0);
    let q = CwProfile::stationary(&law, cfg.cw_beta, 0.0);
    let observed = [cfg.cw_t];
    let ensemble = CwEnsemble {
        law: &law,
        beta: cfg.cw_beta,
        n: cfg.cw_n,
        q0: &q,
        reference: &q,
        basis: &spec.eigenvectors,
        space: SpaceScale::SqrtN,
        time: TimeScale::Unit,
        observed: &observed,
        record_events: false,
    };
    let runs = ensemble.run(cfg.cw_replicas, derived_seed(cfg.seed, 0))?;
    let xs: Vec<f64> = runs.iter().map(|s| s.values[s.values.len() - 1][0]).collect();
    let summary = mean_and_variance(&xs);
    let target = clt.predicted_variance(0, cfg.cw_t);
    report.check(Check::near(
        format!("CW Var √N m_N({}) (target {target:.4})", cfg.cw_t),
        summary.variance,
        target,
        cfg.se_factor * summary.se_variance,
    ));
    report.check(Check::near(
        "CW mean √N m_N",
        summary.mean,
        0.0,
        cfg.se_factor * summary.se_mean,
    ));

    let pair = DisorderLaw::symmetric_pair(1.0)?;
    let params = KuramotoParams::new(cfg.kuramoto_theta, cfg.kuramoto_omega, pair, cfg.kuramoto_n)?;
    let h = cfg.harmonic;
    if h < 2 {
        return Err(Error::Config("compared harmonic must be at least 2".into()));
    }
    let sys = kuramoto_clt_system(&params, h)?;
    let target = sys.covariance_at(h, cfg.kuramoto_t);
    if let Some(st) = sys.stationary_covariance(h) {
        report.info(format!("harmonic {h} stationary variance"), st[(0, 0)]);
    }

    let observed = [cfg.kuramoto_t];
    let ensemble = KuramotoEnsemble {
        params: &params,
        dt: cfg.kuramoto_dt,
        observed: &observed,
        h_max: h,
        r: 2.0,
        space: SpaceScale::SqrtN,
        time: TimeScale::Unit,
    };
    let runs = ensemble.run(cfg.kuramoto_replicas, derived_seed(cfg.seed, 1))?;
    for i in 0..4 {
        let label = format!("Y{h}_{}", i + 1);
        let xs: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.series
                    .column(&label)
                    .and_then(|c| c.last().copied())
                    .ok_or_else(|| Error::Structure(format!("missing column {label}")))
            })
            .collect::<Result<_>>()?;
        let s = mean_and_variance(&xs);
        report.check(Check::near(
            format!("rotators Var {label}"),
            s.variance,
            target[(i, i)],
            cfg.se_factor * s.se_variance,
        ));
    }

    let ou = LinearOuSpec::from_kuramoto(&sys, h)?;
    let exact = ou.covariance_at(cfg.kuramoto_t);
    let agreement = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| (exact[(i, j)] - target[(i, j)]).abs())
        .fold(0.0, f64::max);
    report.check(Check::at_most("OU covariance, exact vs integrated", agreement, 1e-8));
    let samples = terminal_samples(
        &LimitSdeSpec::LinearOu(ou),
        cfg.kuramoto_t,
        cfg.ou_paths,
        cfg.kuramoto_t / 10.0,
        derived_seed(cfg.seed, 2),
        StoppingRule::None,
    )?;
    for i in 0..4 {
        let xs: Vec<f64> = samples.iter().map(|s| s.value[i]).collect();
        let s = mean_and_variance(&xs);
        report.check(Check::near(
            format!("OU Var X{h}_{}", i + 1),
            s.variance,
            target[(i, i)],
            cfg.se_factor * s.se_variance,
        ));
    }
    Ok(report.finish(start))
}
