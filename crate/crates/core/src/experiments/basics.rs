//! Invariant-measure, stationarity and closed-form checks.

use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Check, CriterionReport};
use crate::cw::{
    critical_beta, cw_stationary_states, linearized_cw, mckean_vlasov_cw, simulate_cw,
    AggregatedCwState, CwSimOptions,
};
use crate::error::{Error, Result};
use crate::kuramoto::{
    kuramoto_stationary, linearized_kuramoto, mckean_vlasov_kuramoto, theta_critical,
    KuramotoDensity,
};
use crate::law::DisorderLaw;
use crate::params::KuramotoParams;
use crate::rng::SeedSpec;
use crate::stats::exact_gibbs_oracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactGibbsConfig {
    pub beta: f64,
    pub fields: Vec<f64>,
    pub t_end: f64,
    pub tv_tolerance: f64,
    pub balance_tolerance: f64,
    pub seed: u64,
}

impl Default for ExactGibbsConfig {
    fn default() -> Self {
        Self {
            beta: 1.1,
            fields: vec![0.3, 0.3, 0.3, -0.3, -0.3, -0.3],
            t_end: 1e5,
            tv_tolerance: 0.02,
            balance_tolerance: 1e-12,
            seed: 1,
        }
    }
}

/// Time-averaged occupation of the aggregated chain against the exact
/// stationary law, plus the detailed-balance residual of the oracle.
pub(super) fn exact_gibbs(cfg: &ExactGibbsConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(1, "exact-gibbs");
    let oracle = exact_gibbs_oracle(cfg.beta, &cfg.fields)?;
    let atoms: Vec<f64> = {
        let mut a: Vec<f64> = cfg.fields.clone();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    };
    let counts: Vec<[u64; 2]> = atoms
        .iter()
        .map(|&a| [0, cfg.fields.iter().filter(|&&f| f == a).count() as u64])
        .collect();
    let state = AggregatedCwState::from_counts(atoms.clone(), counts)?;
    let options = CwSimOptions {
        record_events: false,
        track_occupation: true,
    };
    let traj = simulate_cw(&state, cfg.beta, cfg.t_end, &[], SeedSpec::new(cfg.seed, 0), options)?;
    let occupation = traj
        .occupation
        .ok_or_else(|| Error::Structure("occupation was not tracked".into()))?;
    let total: f64 = occupation.values().sum();
    let exact = oracle.aggregated(&atoms)?;
    let keys: BTreeSet<&Vec<u64>> = occupation.keys().chain(exact.keys()).collect();
    let tv = 0.5
        * keys
            .into_iter()
            .map(|k| {
                let p = occupation.get(k).copied().unwrap_or(0.0) / total;
                let q = exact.get(k).copied().unwrap_or(0.0);
                (p - q).abs()
            })
            .sum::<f64>();
    report.check(Check::at_most("total variation", tv, cfg.tv_tolerance));
    report.check(Check::at_most(
        "detailed balance residual",
        oracle.detailed_balance_residual,
        cfg.balance_tolerance,
    ));
    report.check(Check::at_most("generator residual", oracle.generator_residual, 1e-10));
    report.info("events", traj.n_events as f64);
    report.info("independent stationary solve discrepancy", oracle.solve_discrepancy);
    Ok(report.finish(start))
}

/// One spin-system case of the stationarity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwStationarityCase {
    pub law: DisorderLaw,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityConfig {
    pub cw_cases: Vec<CwStationarityCase>,
    pub t_end: f64,
    pub dt: f64,
    pub tolerance: f64,
    pub kuramoto_omega: f64,
    pub kuramoto_theta: f64,
    pub kuramoto_truncation: usize,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        let pair = DisorderLaw::symmetric_pair(0.3).expect("valid law");
        Self {
            cw_cases: vec![
                CwStationarityCase {
                    law: DisorderLaw::dirac_zero(),
                    beta: 1.5,
                },
                CwStationarityCase { law: pair.clone(), beta: 1.5 },
                CwStationarityCase { law: pair, beta: 0.8 },
            ],
            t_end: 10.0,
            dt: 1e-3,
            tolerance: 1e-8,
            kuramoto_omega: 0.25,
            kuramoto_theta: 1.25,
            kuramoto_truncation: 32,
        }
    }
}

/// Every stationary point stays put under the limiting dynamics.
pub(super) fn stationarity(cfg: &StationarityConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(2, "stationarity");
    for case in &cfg.cw_cases {
        let scan = cw_stationary_states(&case.law, case.beta, 10_000)?;
        for w in &scan.warnings {
            report.notes.push(w.clone());
        }
        for s in &scan.states {
            let traj = mckean_vlasov_cw(&s.profile, case.beta, cfg.t_end, cfg.dt, 100)?;
            let drift = traj
                .profiles
                .iter()
                .map(|p| p.sup_distance(&s.profile))
                .fold(0.0, f64::max);
            report.check(Check::at_most(
                format!("CW β={} |supp μ|={} m*={:.6} drift", case.beta, case.law.len(), s.m_star),
                drift,
                cfg.tolerance,
            ));
        }
    }

    let law = DisorderLaw::symmetric_pair(1.0)?;
    let uniform = KuramotoDensity::uniform(&law, cfg.kuramoto_truncation);
    let traj = mckean_vlasov_kuramoto(
        &uniform,
        cfg.kuramoto_theta,
        cfg.kuramoto_omega,
        cfg.t_end,
        1e-2,
        10,
    )?;
    let drift = traj
        .densities
        .iter()
        .map(|d| d.coeff_distance(&uniform))
        .fold(0.0, f64::max);
    report.check(Check::at_most("Kuramoto uniform density drift", drift, cfg.tolerance));

    let params = KuramotoParams::new(cfg.kuramoto_theta, cfg.kuramoto_omega, law, 2)?;
    let st = kuramoto_stationary(0.0, &params, 1024)?;
    let flat = st
        .density
        .iter()
        .flatten()
        .map(|q| (q - 1.0 / (2.0 * std::f64::consts::PI)).abs())
        .fold(0.0, f64::max);
    report.check(Check::at_most("Kuramoto r*=0 density is uniform", flat, cfg.tolerance));
    Ok(report.finish(start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedFormConfig {
    pub omegas: Vec<f64>,
    pub spectrum_omega: f64,
    pub truncation: usize,
    pub cw_laws: Vec<DisorderLaw>,
}

impl Default for ClosedFormConfig {
    fn default() -> Self {
        Self {
            omegas: vec![0.0, 0.1, 0.25, 0.3, 0.35],
            spectrum_omega: 0.25,
            truncation: 32,
            cw_laws: vec![
                DisorderLaw::symmetric_pair(0.3).expect("valid law"),
                DisorderLaw::new(vec![(-0.7, 0.2), (-0.2, 0.3), (0.2, 0.3), (0.7, 0.2)])
                    .expect("valid law"),
            ],
        }
    }
}

/// Thresholds, spectra and kernels against their closed forms.
pub(super) fn closed_forms(cfg: &ClosedFormConfig) -> Result<CriterionReport> {
    let start = Instant::now();
    let mut report = CriterionReport::new(3, "closed-forms");
    let bc = critical_beta(&DisorderLaw::dirac_zero()).unwrap_or(f64::NAN);
    report.check(Check::near("β_c for a field-free system", bc, 1.0, 1e-10));

    let pair = DisorderLaw::symmetric_pair(1.0)?;
    for &w in &cfg.omegas {
        let tc = theta_critical(w, &pair);
        report.check(Check::near(format!("θ_c(ω={w})"), tc.theta_c, 1.0 + 4.0 * w * w, 1e-12));
    }

    let w = cfg.spectrum_omega;
    let theta = 1.0 + 4.0 * w * w;
    let params = KuramotoParams::new(theta, w, pair, 2)?;
    let spec = linearized_kuramoto(&params, cfg.truncation)?;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let required = vec![
        c(0.0, 0.0),
        c(0.0, 0.0),
        c(-0.5 + 2.0 * w * w, 0.0),
        c(-0.5 + 2.0 * w * w, 0.0),
        c(-2.0, 2.0 * w),
        c(-2.0, 2.0 * w),
        c(-2.0, -2.0 * w),
        c(-2.0, -2.0 * w),
    ];
    report.check(Check::at_most(
        "Kuramoto spectrum contains {0, −½+2ω², −2±2iω}",
        crate::kuramoto::analysis::match_spectra(&required, &spec.eigenvalues),
        1e-8,
    ));
    if let Some(mismatch) = spec.analytic_mismatch() {
        report.check(Check::at_most("Kuramoto spectrum, all harmonics", mismatch, 1e-8));
    }
    report.check(Check::at_most("Kuramoto kernel vectors", spec.kernel_residual(), 1e-10));

    for law in &cfg.cw_laws {
        let Some(beta) = critical_beta(law) else {
            return Err(Error::Numerical(format!("no critical β for a {}-atom law", law.len())));
        };
        let spec = linearized_cw(law, beta, 0.0);
        let tag = format!("CW |supp μ|={}", law.len());
        report.check(Check::at_most(format!("{tag} λ₀"), spec.eigenvalues[0].abs(), 1e-10));
        let lambda1 = spec.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY);
        report.check(Check::at_least(format!("{tag} λ₁"), lambda1, 1.0 - 1e-8));
        let target: Vec<f64> = law.values().iter().map(|&e| 1.0 / (beta * e).cosh()).collect();
        let phi = &spec.eigenvectors[0];
        let norm = spec.nu_inner(&target, &target).sqrt();
        let cos = (spec.nu_inner(phi, &target) / norm).abs();
        report.check(Check::near(format!("{tag} kernel ∝ 1/cosh(βη)"), cos, 1.0, 1e-10));
    }
    Ok(report.finish(start))
}
