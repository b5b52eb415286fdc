//! Sample paths of the limiting diffusions.

use anyhow::{bail, Result};
use serde::Serialize;

use meanfield::cw::{critical_beta, cw_clt_parameters, linearized_cw};
use meanfield::kuramoto::kuramoto_clt_system;
use meanfield::limit::{simulate_limit, LimitSdeSpec, LinearOuSpec, StoppingRule};
use meanfield::stats::{mean_and_variance, run_ensemble};
use meanfield::{DisorderLaw, KuramotoParams, SeedSpec};

use super::{parse_law, require};
use crate::config::{LimitKind, LimitSdeConfig};
use crate::output::{num, RunOutput};

fn build_spec(cfg: &LimitSdeConfig) -> Result<LimitSdeSpec> {
    let law = |default: DisorderLaw| -> Result<DisorderLaw> {
        cfg.law.as_deref().map_or(Ok(default), parse_law)
    };
    Ok(match cfg.kind {
        LimitKind::CwCubic => LimitSdeSpec::CwCubic1d,
        LimitKind::CwRandomSlope => {
            let law = law(DisorderLaw::symmetric_pair(0.3)?)?;
            let beta = match cfg.beta.or_else(|| critical_beta(&law)) {
                Some(b) => b,
                None => bail!("the law has no critical β; pass --beta"),
            };
            LimitSdeSpec::cw_random_slope(&law, beta)
        }
        LimitKind::KuramotoCubic => LimitSdeSpec::KuramotoCubic2d {
            omega: require(cfg.omega, "omega")?,
        },
        LimitKind::CwOu => {
            let law = law(DisorderLaw::dirac_zero())?;
            let beta = require(cfg.beta, "beta")?;
            let spec = linearized_cw(&law, beta, 0.0);
            LimitSdeSpec::LinearOu(LinearOuSpec::from_cw(&cw_clt_parameters(&spec, beta, 0.0)))
        }
        LimitKind::KuramotoOu => {
            let omega = require(cfg.omega, "omega")?;
            let theta = require(cfg.theta, "theta")?;
            let params = KuramotoParams::new(theta, omega, law(DisorderLaw::symmetric_pair(1.0)?)?, 2)?;
            let sys = kuramoto_clt_system(&params, cfg.harmonic)?;
            LimitSdeSpec::LinearOu(LinearOuSpec::from_kuramoto(&sys, cfg.harmonic)?)
        }
    })
}

#[derive(Serialize)]
struct LimitSummary {
    paths: usize,
    t_end: f64,
    stopped_fraction: f64,
    terminal_mean: Vec<f64>,
    terminal_variance: Vec<f64>,
    labels: Vec<String>,
}

pub fn limit_sde(out: &mut RunOutput, cfg: &LimitSdeConfig) -> Result<()> {
    let spec = build_spec(cfg)?;
    let stopping = match cfg.r_stop {
        Some(r) => StoppingRule::Radial { r_stop: r },
        None => StoppingRule::None,
    };
    if cfg.paths == 0 {
        bail!("paths must be at least 1");
    }
    let paths = run_ensemble(cfg.paths, SeedSpec::new(cfg.seed, 0), |seed| {
        simulate_limit(&spec, cfg.t_end, cfg.dt, seed, stopping, cfg.record_every)
    })?;
    let labels = spec.labels();
    let mut header = vec!["path".to_string(), "t_observed".to_string()];
    header.extend(labels.iter().cloned());
    let mut rows = Vec::new();
    for (p, path) in paths.iter().enumerate() {
        for (t, v) in path.times.iter().zip(&path.values) {
            let mut row = vec![p.to_string(), num(*t)];
            row.extend(v.iter().map(|x| num(*x)));
            rows.push(row);
        }
    }
    out.csv(
        "paths.csv",
        &header,
        &rows,
        "limit diffusion sample paths; stopped paths are held at their stopped value",
    )?;
    let dim = labels.len();
    let terminal: Vec<Vec<f64>> = (0..dim)
        .map(|i| paths.iter().map(|p| p.values[p.values.len() - 1][i]).collect())
        .collect();
    let summaries: Vec<_> = terminal.iter().map(|xs| mean_and_variance(xs)).collect();
    let summary = LimitSummary {
        paths: paths.len(),
        t_end: cfg.t_end,
        stopped_fraction: paths.iter().filter(|p| p.stopped_at.is_some()).count() as f64 / paths.len() as f64,
        terminal_mean: summaries.iter().map(|s| s.mean).collect(),
        terminal_variance: summaries.iter().map(|s| s.variance).collect(),
        labels,
    };
    out.json("summary.json", &summary, "terminal moments and stopped fraction")
}
