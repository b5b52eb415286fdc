pub mod analyze;
pub mod limit;
pub mod simulate;
pub mod verify;

use anyhow::{bail, Result};

use meanfield::DisorderLaw;

pub(crate) fn observed_grid(t_end: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || points < 2 {
        bail!("need t_end > 0 and at least 2 grid points, got t_end={t_end}, grid_points={points}");
    }
    Ok((0..points).map(|i| t_end * i as f64 / (points - 1) as f64).collect())
}

pub(crate) fn parse_law(text: &str) -> Result<DisorderLaw> {
    Ok(DisorderLaw::parse(text)?)
}

pub(crate) fn require(value: Option<f64>, name: &str) -> Result<f64> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing parameter `{name}`"),
    }
}
