//! Named verification experiments.

use anyhow::{anyhow, bail, Result};
use serde_json::Value;

use meanfield::experiments::{Experiment, EXPERIMENT_NAMES};

use crate::config::VerifyConfig;
use crate::output::RunOutput;

/// Resolves the experiment with the overrides applied.
pub fn resolve(cfg: &VerifyConfig) -> Result<Experiment> {
    let base = Experiment::by_name(&cfg.experiment).ok_or_else(|| {
        anyhow!(
            "unknown experiment `{}`; expected one of {}",
            cfg.experiment,
            EXPERIMENT_NAMES.join(", ")
        )
    })?;
    let mut value = serde_json::to_value(&base)?;
    let obj = value.as_object_mut().expect("experiments serialize to objects");
    if let Some(text) = &cfg.parameters {
        let overrides: Value = serde_json::from_str(text)?;
        let Value::Object(map) = overrides else {
            bail!("experiment parameters must be a JSON object");
        };
        for (k, v) in map {
            if k == "experiment" {
                bail!("the experiment name cannot be overridden");
            }
            obj.insert(k, v);
        }
    }
    if let Some(w) = cfg.omega {
        if !obj.contains_key("omega") {
            bail!("experiment `{}` has no omega parameter", cfg.experiment);
        }
        obj.insert("omega".into(), w.into());
    }
    let mut exp: Experiment = serde_json::from_value(value)?;
    exp = exp.with_seed(cfg.seed);
    if let Some(r) = cfg.replicas {
        exp = exp.with_replicas(r);
    }
    Ok(exp)
}

/// Runs the experiment; `Ok(false)` when a check failed.
pub fn verify(out: &mut RunOutput, cfg: &VerifyConfig) -> Result<bool> {
    let exp = resolve(cfg)?;
    let report = exp.run()?;
    println!("{}", report.summary_line());
    for c in &report.checks {
        println!(
            "  [{}] {} = {:.6} (want {})",
            if c.passed { "ok" } else { "FAIL" },
            c.label,
            c.value,
            c.condition
        );
    }
    out.json("experiment.json", &exp, "resolved experiment parameters")?;
    out.json("verdict.json", &report, "checks, informational values and overall verdict")?;
    Ok(report.passed)
}
