//! The verification experiments, one per acceptance criterion, shared by
//! the command-line `verify` command and the acceptance test target.

mod basics;
mod clt;
mod critical_cw;
mod critical_kuramoto;
mod performance;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cw::{cw_order_parameters, initial_cw_state, simulate_cw, CwProfile, CwSimOptions, CwTrajectory};
use crate::error::Result;
use crate::kuramoto::{initial_kuramoto_state, kuramoto_order_parameters, simulate_kuramoto, KuramotoSeries};
use crate::law::DisorderLaw;
use crate::measure::{FluctuationSeries, SpaceScale, TimeScale};
use crate::params::{CwParams, KuramotoParams};
use crate::rng::SeedSpec;
use crate::stats::run_ensemble;

pub use basics::{ClosedFormConfig, ExactGibbsConfig, StationarityConfig};
pub use clt::CltConfig;
pub use critical_cw::{CwCriticalConfig, CwRandomSlopeConfig};
pub use critical_kuramoto::{KuramotoCriticalConfig, KuramotoExplosiveConfig};
pub use performance::PerformanceConfig;

/// One pass/fail comparison inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub condition: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            condition: format!("≤ {limit:e}"),
            passed: value <= limit,
        }
    }

    pub fn at_least(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            condition: format!("≥ {limit}"),
            passed: value >= limit,
        }
    }

    /// `|value − target| ≤ tol`.
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            label: label.into(),
            value,
            condition: format!("within {tol:e} of {target}"),
            passed: (value - target).abs() <= tol,
        }
    }

    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Self {
            label: label.into(),
            value: if ok { 1.0 } else { 0.0 },
            condition: "true".into(),
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Informational values that do not enter the verdict.
    pub info: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub elapsed_seconds: f64,
}

impl CriterionReport {
    fn new(id: u8, name: &str) -> Self {
        Self {
            id,
            name: name.into(),
            passed: false,
            checks: Vec::new(),
            info: Vec::new(),
            notes: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn info(&mut self, label: impl Into<String>, value: f64) {
        self.info.push((label.into(), value));
    }

    fn finish(mut self, start: Instant) -> Self {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self.elapsed_seconds = start.elapsed().as_secs_f64();
        self
    }

    /// `criterion N <name>: PASS|FAIL` followed by the failing checks.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:.6} (want {})", c.label, c.value, c.condition))
            .collect();
        let mut line = format!(
            "criterion {} {}: {verdict} [{} checks, {:.1}s]",
            self.id,
            self.name,
            self.checks.len(),
            self.elapsed_seconds
        );
        if !failed.is_empty() {
            line.push_str(" failing: ");
            line.push_str(&failed.join("; "));
        }
        line
    }
}

/// A named experiment with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    ExactGibbs(ExactGibbsConfig),
    Stationarity(StationarityConfig),
    ClosedForms(ClosedFormConfig),
    CltSubcritical(CltConfig),
    ThmCwCritical(CwCriticalConfig),
    ThmCwRandomSlope(CwRandomSlopeConfig),
    ThmKuramotoCritical(KuramotoCriticalConfig),
    ThmKuramotoExplosive(KuramotoExplosiveConfig),
    Performance(PerformanceConfig),
}

/// Names accepted by [`Experiment::by_name`], in criterion order.
pub const EXPERIMENT_NAMES: [&str; 9] = [
    "exact-gibbs",
    "stationarity",
    "closed-forms",
    "clt-subcritical",
    "thm-cw-critical",
    "thm-cw-random-slope",
    "thm-kuramoto-critical",
    "thm-kuramoto-explosive",
    "performance",
];

impl Experiment {
    /// Default configuration of a named experiment.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "exact-gibbs" => Experiment::ExactGibbs(Default::default()),
            "stationarity" => Experiment::Stationarity(Default::default()),
            "closed-forms" => Experiment::ClosedForms(Default::default()),
            "clt-subcritical" => Experiment::CltSubcritical(Default::default()),
            "thm-cw-critical" => Experiment::ThmCwCritical(Default::default()),
            "thm-cw-random-slope" => Experiment::ThmCwRandomSlope(Default::default()),
            "thm-kuramoto-critical" => Experiment::ThmKuramotoCritical(Default::default()),
            "thm-kuramoto-explosive" => Experiment::ThmKuramotoExplosive(Default::default()),
            "performance" => Experiment::Performance(Default::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        EXPERIMENT_NAMES[self.id() as usize - 1]
    }

    pub fn id(&self) -> u8 {
        match self {
            Experiment::ExactGibbs(_) => 1,
            Experiment::Stationarity(_) => 2,
            Experiment::ClosedForms(_) => 3,
            Experiment::CltSubcritical(_) => 4,
            Experiment::ThmCwCritical(_) => 5,
            Experiment::ThmCwRandomSlope(_) => 6,
            Experiment::ThmKuramotoCritical(_) => 7,
            Experiment::ThmKuramotoExplosive(_) => 8,
            Experiment::Performance(_) => 9,
        }
    }

    pub fn run(&self) -> Result<CriterionReport> {
        match self {
            Experiment::ExactGibbs(c) => basics::exact_gibbs(c),
            Experiment::Stationarity(c) => basics::stationarity(c),
            Experiment::ClosedForms(c) => basics::closed_forms(c),
            Experiment::CltSubcritical(c) => clt::clt_subcritical(c),
            Experiment::ThmCwCritical(c) => critical_cw::cw_critical(c),
            Experiment::ThmCwRandomSlope(c) => critical_cw::cw_random_slope(c),
            Experiment::ThmKuramotoCritical(c) => critical_kuramoto::kuramoto_critical(c),
            Experiment::ThmKuramotoExplosive(c) => critical_kuramoto::kuramoto_explosive(c),
            Experiment::Performance(c) => performance::performance(c),
        }
    }

    /// Overrides the base seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Experiment::ExactGibbs(c) => c.seed = seed,
            Experiment::Stationarity(_) | Experiment::ClosedForms(_) => {}
            Experiment::CltSubcritical(c) => c.seed = seed,
            Experiment::ThmCwCritical(c) => c.seed = seed,
            Experiment::ThmCwRandomSlope(c) => c.seed = seed,
            Experiment::ThmKuramotoCritical(c) => c.seed = seed,
            Experiment::ThmKuramotoExplosive(c) => c.seed = seed,
            Experiment::Performance(c) => c.seed = seed,
        }
        self
    }

    /// Overrides the replica count of ensemble experiments.
    pub fn with_replicas(mut self, replicas: usize) -> Self {
        match &mut self {
            Experiment::CltSubcritical(c) => {
                c.cw_replicas = replicas;
                c.kuramoto_replicas = replicas;
            }
            Experiment::ThmCwCritical(c) => c.replicas = replicas,
            Experiment::ThmCwRandomSlope(c) => c.replicas = replicas,
            Experiment::ThmKuramotoCritical(c) => c.replicas = replicas,
            Experiment::ThmKuramotoExplosive(c) => c.paths = replicas,
            _ => {}
        }
        self
    }
}

/// Independent seed for one rung of a ladder or one sub-experiment.
pub(crate) fn derived_seed(base: u64, tag: u64) -> SeedSpec {
    SeedSpec::new(base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15), 0)
}

/// Observation grid `0, t/(k−1), …, t`.
pub(crate) fn observed_grid(t: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| t * i as f64 / (points - 1) as f64).collect()
}

/// Settings shared by a spin-system ensemble.
pub(crate) struct CwEnsemble<'a> {
    pub law: &'a DisorderLaw,
    pub beta: f64,
    pub n: usize,
    pub q0: &'a CwProfile,
    pub reference: &'a CwProfile,
    pub basis: &'a [Vec<f64>],
    pub space: SpaceScale,
    pub time: TimeScale,
    pub observed: &'a [f64],
    pub record_events: bool,
}

impl CwEnsemble<'_> {
    pub fn run_one(&self, seed: SeedSpec) -> Result<(FluctuationSeries, CwTrajectory)> {
        let params = CwParams::new(self.beta, self.law.clone(), self.n)?;
        let state = initial_cw_state(&params, self.q0, seed)?;
        let grid: Vec<f64> = self.observed.iter().map(|&t| self.time.to_micro(t, self.n)).collect();
        let t_end = grid.last().copied().unwrap_or(0.0);
        let options = CwSimOptions {
            record_events: self.record_events,
            track_occupation: false,
        };
        let traj = simulate_cw(&state, self.beta, t_end, &grid, seed, options)?;
        let series = cw_order_parameters(&traj, self.basis, self.reference, self.space, self.time)?;
        Ok((series, traj))
    }

    pub fn run(&self, replicas: usize, seed: SeedSpec) -> Result<Vec<FluctuationSeries>> {
        run_ensemble(replicas, seed, |s| self.run_one(s).map(|r| r.0))
    }
}

/// Settings shared by a rotator ensemble started from uniform angles.
pub(crate) struct KuramotoEnsemble<'a> {
    pub params: &'a KuramotoParams,
    pub dt: f64,
    pub observed: &'a [f64],
    pub h_max: usize,
    pub r: f64,
    pub space: SpaceScale,
    pub time: TimeScale,
}

impl KuramotoEnsemble<'_> {
    pub fn run_one(&self, seed: SeedSpec) -> Result<KuramotoSeries> {
        let n = self.params.n_particles;
        let state = initial_kuramoto_state(self.params, &|_, _| 1.0, seed)?;
        let steps: Vec<usize> = self
            .observed
            .iter()
            .map(|&t| (self.time.to_micro(t, n) / self.dt).round() as usize)
            .collect();
        let n_steps = steps.last().copied().unwrap_or(0);
        let snaps = simulate_kuramoto(&state, self.params, self.dt, n_steps, &steps, seed)?;
        kuramoto_order_parameters(&snaps, self.params.omega, self.h_max, self.r, self.space, self.time)
    }

    pub fn run(&self, replicas: usize, seed: SeedSpec) -> Result<Vec<KuramotoSeries>> {
        run_ensemble(replicas, seed, |s| self.run_one(s))
    }
}

/// Adds a collapse verdict to a report: one check plus the fitted slope.
pub(crate) fn record_collapse(report: &mut CriterionReport, v: &crate::stats::CollapseVerdict) {
    report.check(Check::holds(format!("{} collapses", v.label), v.collapse));
    for (n, m) in v.n_values.iter().zip(&v.medians) {
        report.info(format!("{} median sup at N={n}", v.label), *m);
    }
    if let Some(s) = v.slope {
        report.info(format!("{} log-log slope", v.label), s);
    }
    if let Some((lo, hi)) = v.ci {
        report.info(format!("{} slope CI low", v.label), lo);
        report.info(format!("{} slope CI high", v.label), hi);
    }
    report.info(format!("{} bound exponent", v.label), v.predicted_exponent);
}

/// Adds a KS ladder report to a criterion report.
pub(crate) fn record_ks(report: &mut CriterionReport, label: &str, ks: &crate::stats::KsLadderReport) {
    for (n, r) in ks.n_values.iter().zip(&ks.results) {
        report.info(format!("{label} KS statistic at N={n}"), r.statistic);
        report.info(format!("{label} KS p-value at N={n}"), r.p_value);
    }
    report.check(Check::holds(
        format!("{label} KS statistic non-increasing in N"),
        ks.non_increasing,
    ));
    report.check(Check::at_least(format!("{label} final KS p-value"), ks.final_p, 0.01));
}
