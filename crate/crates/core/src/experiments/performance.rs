//! Wall-clock budgets and the pairwise reference step.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Check, CriterionReport};
use crate::cw::{critical_beta, initial_cw_state, simulate_cw, CwProfile, CwSimOptions};
use crate::error::{Error, Result};
use crate::kuramoto::{initial_kuramoto_state, simulate_kuramoto, step_pairwise, KuramotoStepper};
use crate::law::DisorderLaw;
use crate::params::{CwParams, KuramotoParams};
use crate::rng::{SeedSpec, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerformanceConfig {
    pub cw_n: usize,
    pub cw_t: f64,
    pub cw_budget_seconds: f64,
    pub kuramoto_n: usize,
    pub kuramoto_steps: usize,
    pub kuramoto_dt: f64,
    pub kuramoto_budget_seconds: f64,
    pub pairwise_n: usize,
    pub pairwise_steps: usize,
    pub pairwise_tolerance: f64,
    pub seed: u64,
}

impl Default for PerformanceConfig {
    fn default() -> Self {
        Self {
            cw_n: 1_000_000,
            cw_t: 10.0,
            cw_budget_seconds: 60.0,
            kuramoto_n: 100_000,
            kuramoto_steps: 1000,
            kuramoto_dt: 1e-2,
            kuramoto_budget_seconds: 30.0,
            pairwise_n: 200,
            pairwise_steps: 100,
            pairwise_tolerance: 1e-12,
            seed: 9,
        }
    }
}

pub(super) fn performance(cfg: &PerformanceConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(9, "performance");

    let law = DisorderLaw::symmetric_pair(0.3)?;
    let beta = critical_beta(&law).ok_or_else(|| Error::Numerical("no critical β".into()))?;
    let params = CwParams::new(beta, law.clone(), cfg.cw_n)?;
    let q0 = CwProfile::stationary(&law, beta, 0.0);
    let seed = SeedSpec::new(cfg.seed, 0);
    let clock = Instant::now();
    let state = initial_cw_state(&params, &q0, seed)?;
    let traj = simulate_cw(&state, beta, cfg.cw_t, &[cfg.cw_t], seed, CwSimOptions::default())?;
    let cw_time = clock.elapsed().as_secs_f64();
    report.info("spin flips", traj.n_events as f64);
    report.check(Check::at_most(
        format!("spin system N={} to t={} (s)", cfg.cw_n, cfg.cw_t),
        cw_time,
        cfg.cw_budget_seconds,
    ));

    let pair = DisorderLaw::symmetric_pair(1.0)?;
    let params = KuramotoParams::new(1.25, 0.25, pair, cfg.kuramoto_n)?;
    let clock = Instant::now();
    let state = initial_kuramoto_state(&params, &|_, _| 1.0, seed)?;
    simulate_kuramoto(&state, &params, cfg.kuramoto_dt, cfg.kuramoto_steps, &[cfg.kuramoto_steps], seed)?;
    let k_time = clock.elapsed().as_secs_f64();
    report.check(Check::at_most(
        format!("rotators N={} for {} steps (s)", cfg.kuramoto_n, cfg.kuramoto_steps),
        k_time,
        cfg.kuramoto_budget_seconds,
    ));

    let params = params.with_n(cfg.pairwise_n)?;
    let q0 = |x: f64, _: f64| 1.0 + 0.5 * x.cos();
    let mut stepper = KuramotoStepper::new(initial_kuramoto_state(&params, &q0, seed)?, &params);
    let mut rng = seed.rng(Stream::Dynamics);
    let mut worst = 0.0f64;
    for _ in 0..cfg.pairwise_steps {
        let noise: Vec<f64> = (0..cfg.pairwise_n).map(|_| rng.sample(StandardNormal)).collect();
        let reference = step_pairwise(stepper.state(), &params, cfg.kuramoto_dt, &noise);
        stepper.step_with(cfg.kuramoto_dt, |j| noise[j]);
        for (a, b) in stepper.state().angles.iter().zip(&reference.angles) {
            let d = (a - b).rem_euclid(TAU);
            worst = worst.max(d.min(TAU - d));
        }
    }
    report.check(Check::at_most("mean-field vs pairwise step", worst, cfg.pairwise_tolerance));
    Ok(report.finish(start))
}
