//! Empirical measures on `{−1,+1} × supp(μ)` and their fluctuation fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin index within a cell pair: `0 ↔ σ = −1`, `1 ↔ σ = +1`.
#[inline]
pub fn spin_slot(spin: i8) -> usize {
    usize::from(spin > 0)
}

/// Spin value for a slot index.
#[inline]
pub fn slot_spin(slot: usize) -> f64 {
    if slot == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Counts of particles per `(spin, field atom)` cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    /// `counts[k][slot]`, `k` indexing the field atoms.
    pub counts: Vec<[u64; 2]>,
}

impl EmpiricalMeasure {
    pub fn new(counts: Vec<[u64; 2]>) -> Result<Self> {
        if counts.iter().all(|c| c[0] + c[1] == 0) {
            return Err(Error::Structure("empirical measure has no particles".into()));
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }

    /// Cell probabilities `ρ_N(σ, η_k)`.
    pub fn probabilities(&self) -> Vec<[f64; 2]> {
        let n = self.total() as f64;
        self.counts
            .iter()
            .map(|c| [c[0] as f64 / n, c[1] as f64 / n])
            .collect()
    }
}

/// Space normalisation of a fluctuation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceScale {
    /// `√N (ρ_N − q)`.
    SqrtN,
    /// `N^{1/4} (ρ_N − q)`, i.e. `N^{-1/4}` times the `√N` field.
    Moderate,
}

impl SpaceScale {
    pub fn factor(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            SpaceScale::SqrtN => n.sqrt(),
            SpaceScale::Moderate => n.powf(0.25),
        }
    }
}

/// Time rescaling between microscopic and observed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    Unit,
    NQuarter,
    NHalf,
}

impl TimeScale {
    /// Microscopic time per unit of observed time.
    pub fn factor(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            TimeScale::Unit => 1.0,
            TimeScale::NQuarter => n.powf(0.25),
            TimeScale::NHalf => n.sqrt(),
        }
    }

    pub fn to_micro(self, observed: f64, n: usize) -> f64 {
        observed * self.factor(n)
    }

    pub fn to_observed(self, micro: f64, n: usize) -> f64 {
        micro / self.factor(n)
    }
}

/// `scale · (ρ_N − q)` per cell, where `reference[k][slot]` is the cell mass
/// `q(σ, η_k) μ(η_k)` of a probability on the same cells.
pub fn empirical_to_fluctuation(
    rho: &EmpiricalMeasure,
    reference: &[[f64; 2]],
    scale: SpaceScale,
) -> Result<Vec<[f64; 2]>> {
    if rho.counts.len() != reference.len() {
        return Err(Error::Structure(format!(
            "empirical measure has {} field cells, reference has {}",
            rho.counts.len(),
            reference.len()
        )));
    }
    let ref_mass: f64 = reference.iter().map(|c| c[0] + c[1]).sum();
    if (ref_mass - 1.0).abs() > 1e-9 || reference.iter().flatten().any(|&p| p < 0.0) {
        return Err(Error::Structure(format!(
            "reference is not a probability on the cells (mass {ref_mass})"
        )));
    }
    let n = rho.total() as usize;
    let s = scale.factor(n);
    Ok(rho
        .probabilities()
        .iter()
        .zip(reference)
        .map(|(p, q)| [s * (p[0] - q[0]), s * (p[1] - q[1])])
        .collect())
}

/// Rescaled order parameters sampled along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSeries {
    /// Observed times (microscopic time divided by the time-scale factor).
    pub times: Vec<f64>,
    /// `values[t][i]` is observable `i` at `times[t]`.
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub space_scale: SpaceScale,
    pub time_scale: TimeScale,
    /// Total signed mass of the fluctuation field at each time.
    pub net_mass: Vec<f64>,
}

impl FluctuationSeries {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.values.iter().map(|row| row[i]).collect())
    }

    pub fn column_at(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[i]).collect()
    }

    /// `sup_t |observable|` over the recorded times.
    pub fn sup_abs(&self, i: usize) -> f64 {
        self.values.iter().map(|row| row[i].abs()).fold(0.0, f64::max)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.times.len() != self.values.len() || self.times.len() != self.net_mass.len() {
            return Err(Error::Structure("series rows do not match times".into()));
        }
        if self.values.iter().any(|r| r.len() != self.labels.len()) {
            return Err(Error::Structure("series columns do not match labels".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_measures_give_zero_fluctuation() {
        let rho = EmpiricalMeasure::new(vec![[1, 1], [1, 1]]).unwrap();
        let q = vec![[0.25, 0.25], [0.25, 0.25]];
        let f = empirical_to_fluctuation(&rho, &q, SpaceScale::SqrtN).unwrap();
        assert!(f.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn two_cell_arithmetic() {
        // N = 4, all spins up, single field atom at 0, q uniform on {±1}.
        let rho = EmpiricalMeasure::new(vec![[0, 4]]).unwrap();
        let f = empirical_to_fluctuation(&rho, &[[0.5, 0.5]], SpaceScale::SqrtN).unwrap();
        assert!((f[0][1] - 1.0).abs() < 1e-15);
        assert!((f[0][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_cells_are_rejected() {
        let rho = EmpiricalMeasure::new(vec![[0, 4]]).unwrap();
        let err = empirical_to_fluctuation(&rho, &[[0.25, 0.25], [0.25, 0.25]], SpaceScale::SqrtN);
        assert!(matches!(err, Err(Error::Structure(_))));
    }

    #[test]
    fn time_scale_round_trip() {
        let t = TimeScale::NHalf;
        assert_eq!(t.to_micro(1.0, 400), 20.0);
        assert_eq!(t.to_observed(20.0, 400), 1.0);
        assert_eq!(TimeScale::NQuarter.factor(16), 2.0);
    }
}
