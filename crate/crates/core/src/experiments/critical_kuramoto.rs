//! Critical and explosive regimes of the rotator system.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    derived_seed, observed_grid, record_collapse, record_ks, Check, CriterionReport,
    KuramotoEnsemble,
};
use crate::error::{Error, Result};
use crate::kuramoto::euler_kernel_rate;
use crate::law::DisorderLaw;
use crate::limit::{
    kuramoto_cubic_coefficient, kuramoto_limit_noise, simulate_limit, terminal_samples,
    LimitSdeSpec, StoppingRule,
};
use crate::measure::{SpaceScale, TimeScale};
use crate::params::KuramotoParams;
use crate::rng::SeedSpec;
use crate::stats::{collapse_test, distributional_convergence_test, CollapseTestSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuramotoCriticalConfig {
    pub omega: f64,
    /// Defaults to `1 + 4ω²`.
    pub theta: Option<f64>,
    pub collapse_ladder: Vec<usize>,
    /// Subset of `collapse_ladder` used for the distributional test.
    pub ks_ladder: Vec<usize>,
    pub replicas: usize,
    pub dt: f64,
    pub t: f64,
    pub grid_points: usize,
    pub h_max: usize,
    /// Sobolev weight exponent of the norm.
    pub r: f64,
    pub d: f64,
    pub oracle_paths: usize,
    pub oracle_dt: f64,
    pub seed: u64,
}

impl Default for KuramotoCriticalConfig {
    fn default() -> Self {
        Self {
            omega: 0.25,
            theta: None,
            collapse_ladder: vec![256, 1024, 4096],
            ks_ladder: vec![1024, 4096],
            replicas: 200,
            dt: 1e-2,
            t: 1.0,
            grid_points: 51,
            h_max: 16,
            r: 2.0,
            d: 4.0,
            oracle_paths: 20_000,
            oracle_dt: 1e-4,
            seed: 7,
        }
    }
}

/// Collapse of the stable directions and convergence of the kernel
/// projection to the two-dimensional cubic diffusion.
pub(super) fn kuramoto_critical(cfg: &KuramotoCriticalConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(7, "thm-kuramoto-critical");
    let theta = cfg.theta.unwrap_or(1.0 + 4.0 * cfg.omega * cfg.omega);
    let law = DisorderLaw::symmetric_pair(1.0)?;
    if let Some(&n) = cfg.ks_ladder.iter().find(|n| !cfg.collapse_ladder.contains(n)) {
        return Err(Error::Config(format!("KS ladder value {n} is not in the collapse ladder")));
    }
    let observed = observed_grid(cfg.t, cfg.grid_points);
    let c = kuramoto_cubic_coefficient(cfg.omega);
    report.info("cubic coefficient c(ω)", c);
    let rate = euler_kernel_rate(theta, cfg.omega, &law, cfg.dt)?;
    report.info("Euler–Maruyama first-harmonic rate at dt", rate);
    for &n in &cfg.collapse_ladder {
        report.info(format!("same rate on the observed scale at N={n}"), rate * (n as f64).sqrt());
    }

    let mut sup_norm = Vec::new();
    let mut sup_stable = Vec::new();
    let mut ks_ladder = Vec::new();
    let mut tail = 0.0f64;
    for &n in &cfg.collapse_ladder {
        let params = KuramotoParams::new(theta, cfg.omega, law.clone(), n)?;
        params.require_critical_setting()?;
        let ensemble = KuramotoEnsemble {
            params: &params,
            dt: cfg.dt,
            observed: &observed,
            h_max: cfg.h_max,
            r: cfg.r,
            space: SpaceScale::Moderate,
            time: TimeScale::NHalf,
        };
        let runs = ensemble.run(cfg.replicas, derived_seed(cfg.seed, n as u64))?;
        let col = |s: &crate::measure::FluctuationSeries, l: &str| {
            s.column(l).ok_or_else(|| Error::Structure(format!("missing column {l}")))
        };
        let mut norms = Vec::with_capacity(runs.len());
        let mut stables = Vec::with_capacity(runs.len());
        let mut radii = Vec::with_capacity(runs.len());
        for run in &runs {
            let s = &run.series;
            tail = tail.max(run.tail_bound);
            norms.push(col(s, "norm_r")?.iter().map(|x| x * x).fold(0.0, f64::max));
            let (v3, v4) = (col(s, "V1_3")?, col(s, "V1_4")?);
            stables.push(v3.iter().zip(&v4).map(|(a, b)| a * a + b * b).fold(0.0, f64::max));
            let (v1, v2) = (col(s, "V1_1")?, col(s, "V1_2")?);
            let k = v1.len() - 1;
            radii.push(v1[k].hypot(v2[k]));
        }
        sup_norm.push(norms);
        sup_stable.push(stables);
        if cfg.ks_ladder.contains(&n) {
            ks_ladder.push((n, cfg.t, radii));
        }
    }
    report.info("largest truncation tail bound", tail);
    let spec = CollapseTestSpec::rotator("sup ‖ρ̃‖²_r", cfg.collapse_ladder.clone(), cfg.d);
    record_collapse(&mut report, &collapse_test(&spec, &sup_norm)?);
    let spec = CollapseTestSpec::rotator("sup V3²+V4²", cfg.collapse_ladder.clone(), cfg.d);
    record_collapse(&mut report, &collapse_test(&spec, &sup_stable)?);

    let limit: Vec<f64> = terminal_samples(
        &LimitSdeSpec::KuramotoCubic2d { omega: cfg.omega },
        cfg.t,
        cfg.oracle_paths,
        cfg.oracle_dt,
        derived_seed(cfg.seed, u64::MAX),
        StoppingRule::None,
    )?
    .into_iter()
    .map(|s| s.value[0].hypot(s.value[1]))
    .collect();
    let ks = distributional_convergence_test(&ks_ladder, cfg.t, &limit)?;
    record_ks(&mut report, "‖(V1,V2)‖", &ks);
    Ok(report.finish(start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuramotoExplosiveConfig {
    pub omega: f64,
    pub r_stop: f64,
    pub t: f64,
    pub coarse_dt: f64,
    pub fine_dt: f64,
    pub paths: usize,
    pub se_factor: f64,
    pub seed: u64,
}

impl Default for KuramotoExplosiveConfig {
    fn default() -> Self {
        Self {
            omega: 0.4,
            r_stop: 10.0,
            t: 5.0,
            coarse_dt: 1e-3,
            fine_dt: 1e-4,
            paths: 4000,
            se_factor: 3.0,
            seed: 8,
        }
    }
}

/// Localised simulation beyond `ω² = 1/8` and the coefficient closed forms.
pub(super) fn kuramoto_explosive(cfg: &KuramotoExplosiveConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(8, "thm-kuramoto-explosive");
    let spec = LimitSdeSpec::KuramotoCubic2d { omega: cfg.omega };
    let c = kuramoto_cubic_coefficient(cfg.omega);
    report.info("cubic coefficient c(ω)", c);
    report.check(Check::holds("regime is explosive", spec.is_explosive()));

    let rejected = match simulate_limit(&spec, cfg.t, cfg.coarse_dt, SeedSpec::new(cfg.seed, 0), StoppingRule::None, 1) {
        Err(Error::Config(msg)) => msg.contains("localization"),
        _ => false,
    };
    report.check(Check::holds("unlocalised explosive run is rejected", rejected));

    let stopping = StoppingRule::Radial { r_stop: cfg.r_stop };
    let fraction = |dt: f64, tag: u64| -> Result<f64> {
        let s = terminal_samples(&spec, cfg.t, cfg.paths, dt, derived_seed(cfg.seed, tag), stopping)?;
        Ok(s.iter().filter(|x| x.stopped_at.is_some()).count() as f64 / s.len() as f64)
    };
    let coarse = fraction(cfg.coarse_dt, 1)?;
    let fine = fraction(cfg.fine_dt, 2)?;
    let n = cfg.paths as f64;
    let se = (coarse * (1.0 - coarse) / n + fine * (1.0 - fine) / n).sqrt();
    report.info(format!("stopped fraction at dt={}", cfg.coarse_dt), coarse);
    report.info(format!("stopped fraction at dt={}", cfg.fine_dt), fine);
    report.check(Check::near(
        "stopped fraction, coarse vs fine step",
        coarse,
        fine,
        (cfg.se_factor * se).max(1e-12),
    ));
    report.check(Check::at_least("stopped fraction by the horizon", fine, 0.5));

    report.check(Check::near("c(0)", kuramoto_cubic_coefficient(0.0), 0.25, 1e-15));
    report.check(Check::near(
        "noise amplitude at ω=0",
        kuramoto_limit_noise(0.0),
        std::f64::consts::FRAC_1_SQRT_2,
        1e-15,
    ));
    report.check(Check::near(
        "c at ω²=1/8",
        kuramoto_cubic_coefficient((0.125f64).sqrt()),
        0.0,
        0.0,
    ));
    Ok(report.finish(start))
}
