//! Deterministic pipelines: limiting profile equations and linear analysis.

use anyhow::{bail, Result};
use serde::Serialize;

use meanfield::cw::{critical_beta, cw_clt_parameters, cw_stationary_states, linearized_cw, mckean_vlasov_cw, CwProfile, Stability};
use meanfield::kuramoto::{linearized_kuramoto, mckean_vlasov_kuramoto, solve_r_star, theta_critical, KuramotoDensity};
use meanfield::limit::{kuramoto_cubic_coefficient, kuramoto_limit_noise};
use meanfield::{DisorderLaw, KuramotoParams};

use super::{parse_law, require};
use crate::config::{AnalyzeConfig, MckeanVlasovConfig, Model};
use crate::output::{num, RunOutput};

fn law_or(text: &Option<String>, default: DisorderLaw) -> Result<DisorderLaw> {
    match text {
        Some(t) => parse_law(t),
        None => Ok(default),
    }
}

pub fn mckean_vlasov(out: &mut RunOutput, cfg: &MckeanVlasovConfig) -> Result<()> {
    if cfg.record_every == 0 {
        bail!("record_every must be at least 1");
    }
    match cfg.model {
        Model::Cw => {
            let beta = require(cfg.beta, "beta")?;
            let law = law_or(&cfg.law, DisorderLaw::dirac_zero())?;
            let q0 = CwProfile::constant(&law, cfg.p_plus)?;
            let traj = mckean_vlasov_cw(&q0, beta, cfg.t_end, cfg.dt, cfg.record_every)?;
            let mut header = vec!["t_observed".to_string(), "m".to_string()];
            header.extend(law.values().iter().map(|v| format!("p_plus[{v}]")));
            let rows: Vec<Vec<String>> = traj
                .times
                .iter()
                .zip(&traj.profiles)
                .map(|(t, p)| {
                    let mut row = vec![num(*t), num(p.magnetization())];
                    row.extend(p.plus_probabilities().iter().map(|x| num(*x)));
                    row
                })
                .collect();
            out.csv(
                "profile.csv",
                &header,
                &rows,
                "m: limiting magnetization; p_plus[η]: probability of +1 given field η",
            )
        }
        Model::Kuramoto => {
            let theta = require(cfg.theta, "theta")?;
            let omega = require(cfg.omega, "omega")?;
            let law = law_or(&cfg.law, DisorderLaw::symmetric_pair(1.0)?)?;
            let a = cfg.amplitude;
            if a.abs() >= 1.0 {
                bail!("amplitude must satisfy |a| < 1 so the initial density is positive, got {a}");
            }
            let q0 = KuramotoDensity::from_fn(&law, cfg.truncation, &|x, _| 1.0 + a * x.cos())?;
            let traj = mckean_vlasov_kuramoto(&q0, theta, omega, cfg.t_end, cfg.dt, cfg.record_every)?;
            let header: Vec<String> = ["t_observed", "r", "psi", "min_density"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = traj
                .times
                .iter()
                .zip(&traj.densities)
                .map(|(t, d)| {
                    let z = d.order_parameter();
                    vec![num(*t), num(z.norm()), num(z.arg()), num(d.min_on_grid())]
                })
                .collect();
            out.csv(
                "profile.csv",
                &header,
                &rows,
                "r, psi: coherence of the limiting density; min_density: smallest value on a 512-point grid",
            )
        }
    }
}

#[derive(Serialize)]
struct CwStateSummary {
    m_star: f64,
    stability: Stability,
    criticality_gap: f64,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct CwAnalysis {
    beta: f64,
    beta_critical: Option<f64>,
    stationary_states: Vec<CwStateSummary>,
    warnings: Vec<String>,
    clt_noise: Vec<f64>,
    clt_drift_scale: f64,
    random_drift_variance: Vec<f64>,
}

#[derive(Serialize)]
struct KuramotoAnalysis {
    theta: f64,
    omega: f64,
    theta_critical: f64,
    effective_threshold: f64,
    r_star_roots: Vec<f64>,
    leading_eigenvalues: Vec<(f64, f64)>,
    cubic_coefficient: Option<f64>,
    limit_noise: Option<f64>,
}

pub fn analyze(out: &mut RunOutput, cfg: &AnalyzeConfig) -> Result<()> {
    match cfg.model {
        Model::Cw => {
            let law = law_or(&cfg.law, DisorderLaw::dirac_zero())?;
            let bc = critical_beta(&law);
            let beta = match (cfg.beta, bc) {
                (Some(b), _) => b,
                (None, Some(b)) => b,
                (None, None) => bail!("the law has no critical β; pass --beta"),
            };
            let scan = cw_stationary_states(&law, beta, 10_000)?;
            let mut rows = Vec::new();
            let mut states = Vec::new();
            for (s_idx, s) in scan.states.iter().enumerate() {
                let spec = linearized_cw(&law, beta, s.m_star);
                for (i, l) in spec.eigenvalues.iter().enumerate() {
                    rows.push(vec![s_idx.to_string(), num(s.m_star), i.to_string(), num(*l)]);
                }
                states.push(CwStateSummary {
                    m_star: s.m_star,
                    stability: s.stability,
                    criticality_gap: s.criticality_gap,
                    eigenvalues: spec.eigenvalues,
                });
            }
            let spec0 = linearized_cw(&law, beta, 0.0);
            let clt = cw_clt_parameters(&spec0, beta, 0.0);
            println!("β_c = {}", bc.map_or("none".into(), |b| format!("{b:.12}")));
            println!("β   = {beta}");
            println!("{:>6} {:>14} {:>10} {:>5} {:>16}", "state", "m*", "stability", "mode", "eigenvalue");
            for (s_idx, s) in states.iter().enumerate() {
                for (i, l) in s.eigenvalues.iter().enumerate() {
                    println!("{s_idx:>6} {:>14.10} {:>10} {i:>5} {l:>16.10}", s.m_star, format!("{:?}", s.stability));
                }
            }
            println!("CLT around m = 0: drift scale {}, noise {:?}", clt.drift_scale, clt.noise);
            out.csv(
                "spectrum.csv",
                &["state", "m_star", "mode", "eigenvalue"].map(String::from),
                &rows,
                "eigenvalues of the linearised operator at every stationary magnetization",
            )?;
            let summary = CwAnalysis {
                beta,
                beta_critical: bc,
                stationary_states: states,
                warnings: scan.warnings,
                clt_noise: clt.noise.clone(),
                clt_drift_scale: clt.drift_scale,
                random_drift_variance: (0..clt.modes()).map(|i| clt.cov_h[(i, i)]).collect(),
            };
            out.json("summary.json", &summary, "stationary states, spectra and Gaussian parameters")
        }
        Model::Kuramoto => {
            let omega = require(cfg.omega, "omega")?;
            let law = law_or(&cfg.law, DisorderLaw::symmetric_pair(1.0)?)?;
            let tc = theta_critical(omega, &law);
            let theta = cfg.theta.unwrap_or(tc.theta_c);
            let params = KuramotoParams::new(theta, omega, law.clone(), 2)?;
            let roots = solve_r_star(&params, 1024)?;
            let spec = linearized_kuramoto(&params, cfg.truncation)?;
            let rows: Vec<Vec<String>> = spec
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, l)| vec![i.to_string(), num(l.re), num(l.im)])
                .collect();
            let unit = law.is_unit_pair() && omega < 0.5;
            println!("θ_c = {:.12} (threshold {:.12})", tc.theta_c, tc.effective);
            println!("θ   = {theta}, ω = {omega}");
            println!("r* roots: {roots:?}");
            println!("{:>5} {:>16} {:>16}", "mode", "Re λ", "Im λ");
            for (i, l) in spec.eigenvalues.iter().take(12).enumerate() {
                println!("{i:>5} {:>16.10} {:>16.10}", l.re, l.im);
            }
            if unit {
                println!(
                    "cubic coefficient c(ω) = {:.10}, limit noise = {:.10}",
                    kuramoto_cubic_coefficient(omega),
                    kuramoto_limit_noise(omega)
                );
            }
            out.csv(
                "spectrum.csv",
                &["mode", "re", "im"].map(String::from),
                &rows,
                "eigenvalues of the linearised operator around the uniform density, by real part",
            )?;
            let summary = KuramotoAnalysis {
                theta,
                omega,
                theta_critical: tc.theta_c,
                effective_threshold: tc.effective,
                r_star_roots: roots,
                leading_eigenvalues: spec.eigenvalues.iter().take(12).map(|l| (l.re, l.im)).collect(),
                cubic_coefficient: unit.then(|| kuramoto_cubic_coefficient(omega)),
                limit_noise: unit.then(|| kuramoto_limit_noise(omega)),
            };
            out.json("summary.json", &summary, "thresholds, stationary coherences and spectrum")
        }
    }
}
