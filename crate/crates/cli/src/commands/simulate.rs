//! Particle simulations: single runs and ensemble summaries.

use anyhow::{bail, Result};
use serde::Serialize;

use meanfield::cw::{cw_order_parameters, initial_cw_state, linearized_cw, simulate_cw, CwProfile, CwSimOptions};
use meanfield::kuramoto::{initial_kuramoto_state, kuramoto_order_parameters, order_parameter, simulate_kuramoto};
use meanfield::stats::{mean_and_variance, run_ensemble};
use meanfield::{CwParams, KuramotoParams, SeedSpec, SpaceScale, TimeScale};

use super::{observed_grid, parse_law};
use crate::config::{EnsembleConfig, Layout, SimulateCwConfig, SimulateKuramotoConfig};
use crate::output::{num, RunOutput};

/// One replica on the common observation grid.
pub struct Replica {
    pub times: Vec<f64>,
    /// `rows[k]` matches `labels`.
    pub rows: Vec<Vec<f64>>,
}

pub struct Replicas {
    pub labels: Vec<String>,
    pub runs: Vec<Replica>,
    pub doc: String,
}

pub fn cw_replicas(cfg: &SimulateCwConfig) -> Result<Replicas> {
    let law = parse_law(&cfg.law)?;
    let params = CwParams::new(cfg.beta, law.clone(), cfg.n)?;
    let q0 = match cfg.p_plus {
        Some(p) => CwProfile::constant(&law, p)?,
        None => CwProfile::stationary(&law, cfg.beta, 0.0),
    };
    let basis = linearized_cw(&law, cfg.beta, q0.magnetization()).eigenvectors;
    let space: SpaceScale = cfg.space_scale.into();
    let time: TimeScale = cfg.time_scale.into();
    let grid: Vec<f64> = observed_grid(cfg.t_end, cfg.grid_points)?
        .iter()
        .map(|&t| time.to_micro(t, cfg.n))
        .collect();
    let t_end = grid[grid.len() - 1];
    if cfg.replicas == 0 {
        bail!("replicas must be at least 1");
    }
    let runs = run_ensemble(cfg.replicas, SeedSpec::new(cfg.seed, 0), |seed| {
        let state = initial_cw_state(&params, &q0, seed)?;
        let traj = simulate_cw(&state, cfg.beta, t_end, &grid, seed, CwSimOptions::default())?;
        let series = cw_order_parameters(&traj, &basis, &q0, space, time)?;
        let rows = traj
            .snapshots
            .iter()
            .zip(&series.values)
            .map(|(s, y)| {
                let mut row = vec![s.spin_sum as f64 / traj.n as f64];
                row.extend(y);
                row
            })
            .collect();
        Ok(Replica {
            times: series.times,
            rows,
        })
    })?;
    let mut labels = vec!["m".to_string()];
    labels.extend((0..basis.len()).map(|i| format!("Y{i}")));
    Ok(Replicas {
        labels,
        runs,
        doc: "m: magnetization; Y<i>: scaled fluctuation projected on eigenfunction i of the linearised operator".into(),
    })
}

pub fn kuramoto_replicas(cfg: &SimulateKuramotoConfig) -> Result<Replicas> {
    let law = parse_law(&cfg.law)?;
    let params = KuramotoParams::new(cfg.theta, cfg.omega, law, cfg.n)?;
    let time: TimeScale = cfg.time_scale.into();
    if !(cfg.dt > 0.0) {
        bail!("dt must be positive, got {}", cfg.dt);
    }
    let steps: Vec<usize> = observed_grid(cfg.t_end, cfg.grid_points)?
        .iter()
        .map(|&t| (time.to_micro(t, cfg.n) / cfg.dt).round() as usize)
        .collect();
    let n_steps = steps[steps.len() - 1];
    if cfg.replicas == 0 {
        bail!("replicas must be at least 1");
    }
    let pair = params.law.is_unit_pair();
    let runs = run_ensemble(cfg.replicas, SeedSpec::new(cfg.seed, 0), |seed| {
        let state = initial_kuramoto_state(&params, &|_, _| 1.0, seed)?;
        let snaps = simulate_kuramoto(&state, &params, cfg.dt, n_steps, &steps, seed)?;
        let extra = if pair {
            Some(kuramoto_order_parameters(
                &snaps,
                cfg.omega,
                cfg.h_max,
                cfg.r,
                cfg.space_scale.into(),
                time,
            )?)
        } else {
            None
        };
        let rows = snaps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let z = order_parameter(&s.angles);
                let mut row = vec![z.r, z.psi];
                if let Some(e) = &extra {
                    row.extend(&e.series.values[k]);
                }
                row
            })
            .collect();
        Ok(Replica {
            times: steps.iter().map(|&k| time.to_observed(k as f64 * cfg.dt, cfg.n)).collect(),
            rows,
        })
    })?;
    let mut labels = vec!["r".to_string(), "psi".to_string()];
    if pair {
        labels.extend(meanfield::kuramoto::dynamics::kuramoto_labels(cfg.h_max));
    }
    Ok(Replicas {
        labels,
        runs,
        doc: "r, psi: coherence modulus and phase; V1_1..V1_4: first-harmonic projections \
              (kernel pair, then stable pair); Y<h>_<i>: harmonic h of (cos, sin, η cos, η sin); \
              norm_r: weighted norm of the non-kernel part"
            .into(),
    })
}

fn write_trajectories(out: &mut RunOutput, reps: &Replicas, layout: Layout) -> Result<()> {
    match layout {
        Layout::Long => {
            let mut header = vec!["replica".to_string(), "t_observed".to_string()];
            header.extend(reps.labels.iter().cloned());
            let mut rows = Vec::new();
            for (i, r) in reps.runs.iter().enumerate() {
                for (t, row) in r.times.iter().zip(&r.rows) {
                    let mut line = vec![i.to_string(), num(*t)];
                    line.extend(row.iter().map(|x| num(*x)));
                    rows.push(line);
                }
            }
            out.csv("trajectories.csv", &header, &rows, &reps.doc)
        }
        Layout::PerReplica => {
            let mut header = vec!["t_observed".to_string()];
            header.extend(reps.labels.iter().cloned());
            for (i, r) in reps.runs.iter().enumerate() {
                let rows: Vec<Vec<String>> = r
                    .times
                    .iter()
                    .zip(&r.rows)
                    .map(|(t, row)| std::iter::once(num(*t)).chain(row.iter().map(|x| num(*x))).collect())
                    .collect();
                out.csv(&format!("replica_{i:04}.csv"), &header, &rows, &reps.doc)?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ColumnSummary {
    label: String,
    mean: f64,
    variance: f64,
    se_mean: f64,
    se_variance: f64,
}

#[derive(Serialize)]
struct EnsembleSummary {
    replicas: usize,
    t_final: f64,
    terminal: Vec<ColumnSummary>,
}

fn summarize(reps: &Replicas) -> (Vec<Vec<f64>>, EnsembleSummary) {
    let times = &reps.runs[0].times;
    let mut table = Vec::with_capacity(times.len());
    let mut terminal = Vec::new();
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![*t];
        for c in 0..reps.labels.len() {
            let xs: Vec<f64> = reps.runs.iter().map(|r| r.rows[k][c]).collect();
            let s = mean_and_variance(&xs);
            row.push(s.mean);
            row.push(s.variance);
            if k + 1 == times.len() {
                terminal.push(ColumnSummary {
                    label: reps.labels[c].clone(),
                    mean: s.mean,
                    variance: s.variance,
                    se_mean: s.se_mean,
                    se_variance: s.se_variance,
                });
            }
        }
        table.push(row);
    }
    let summary = EnsembleSummary {
        replicas: reps.runs.len(),
        t_final: times[times.len() - 1],
        terminal,
    };
    (table, summary)
}

pub fn simulate(out: &mut RunOutput, reps: Replicas, layout: Layout) -> Result<()> {
    write_trajectories(out, &reps, layout)?;
    let (_, summary) = summarize(&reps);
    out.json("summary.json", &summary, "terminal ensemble moments per column")
}

pub fn ensemble(out: &mut RunOutput, cfg: &EnsembleConfig) -> Result<()> {
    let reps = match cfg {
        EnsembleConfig::Cw(c) => cw_replicas(c)?,
        EnsembleConfig::Kuramoto(c) => kuramoto_replicas(c)?,
    };
    let (table, summary) = summarize(&reps);
    let mut header = vec!["t_observed".to_string()];
    for l in &reps.labels {
        header.push(format!("mean_{l}"));
        header.push(format!("var_{l}"));
    }
    let rows: Vec<Vec<String>> = table.iter().map(|r| r.iter().map(|x| num(*x)).collect()).collect();
    out.csv(
        "ensemble.csv",
        &header,
        &rows,
        &format!("ensemble mean and variance over replicas; {}", reps.doc),
    )?;
    out.json("summary.json", &summary, "terminal ensemble moments per column")
}
