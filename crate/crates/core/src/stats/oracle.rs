//! Exact enumeration of the spin system for small `N`, and a reference
//! per-spin simulator.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::{SeedSpec, Stream};

/// Largest system the enumeration accepts (`2^12` configurations).
pub const MAX_ORACLE_SPINS: usize = 12;

const DENSE_LIMIT: usize = 8;

/// Configuration `s` has `σ_j = +1` iff bit `j` of `s` is set.
fn spin(s: usize, j: usize) -> f64 {
    if s >> j & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOracleResult {
    pub beta: f64,
    pub fields: Vec<f64>,
    /// `H_N = −β/(2N) (Σσ)² − β Σ η_j σ_j` per configuration.
    pub energies: Vec<f64>,
    /// `e^{−H_N} / Z`.
    pub probabilities: Vec<f64>,
    /// Null vector of the generator, solved independently.
    pub stationary: Vec<f64>,
    /// `max_s |(π L)(s)|` for the Gibbs vector.
    pub generator_residual: f64,
    /// `max |π(s) r(s→s') − π(s') r(s'→s)|`.
    pub detailed_balance_residual: f64,
    /// `max |stationary − probabilities|`.
    pub solve_discrepancy: f64,
}

impl ExactOracleResult {
    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn configuration(&self, s: usize) -> Vec<i8> {
        (0..self.n()).map(|j| spin(s, j) as i8).collect()
    }

    /// Gibbs law pushed forward to `+1` counts per field value; `atoms`
    /// lists the distinct field values in the key order.
    pub fn aggregated(&self, atoms: &[f64]) -> Result<BTreeMap<Vec<u64>, f64>> {
        let slot: Vec<usize> = self
            .fields
            .iter()
            .map(|f| {
                atoms
                    .iter()
                    .position(|a| a == f)
                    .ok_or_else(|| Error::Structure(format!("field {f} is not among the atoms")))
            })
            .collect::<Result<_>>()?;
        let mut out = BTreeMap::new();
        for (s, p) in self.probabilities.iter().enumerate() {
            let mut key = vec![0u64; atoms.len()];
            for (j, &k) in slot.iter().enumerate() {
                if s >> j & 1 == 1 {
                    key[k] += 1;
                }
            }
            *out.entry(key).or_insert(0.0) += p;
        }
        Ok(out)
    }
}

fn rate(s: usize, j: usize, n: usize, beta: f64, fields: &[f64]) -> f64 {
    let m = (0..n).map(|k| spin(s, k)).sum::<f64>() / n as f64;
    (-beta * spin(s, j) * (m + fields[j])).exp()
}

/// Enumerates `{−1,+1}^N`, builds the generator from the flip rates
/// `exp(−βσ_j(m_N + η_j))`, solves for its stationary vector and checks it
/// against `exp(−H_N)`.
pub fn exact_gibbs_oracle(beta: f64, fields: &[f64]) -> Result<ExactOracleResult> {
    let n = fields.len();
    if n > MAX_ORACLE_SPINS {
        return Err(Error::Refused(format!(
            "exact enumeration is limited to N ≤ {MAX_ORACLE_SPINS}, got {n}"
        )));
    }
    if n == 0 {
        return config("need at least one spin");
    }
    if !(beta > 0.0) || fields.iter().any(|f| !f.is_finite()) {
        return config("beta must be positive and fields finite");
    }
    let size = 1usize << n;
    let energies: Vec<f64> = (0..size)
        .map(|s| {
            let total: f64 = (0..n).map(|j| spin(s, j)).sum();
            let field: f64 = (0..n).map(|j| fields[j] * spin(s, j)).sum();
            -beta / (2.0 * n as f64) * total * total - beta * field
        })
        .collect();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (e_min - e).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let rates: Vec<Vec<f64>> = (0..size).map(|s| (0..n).map(|j| rate(s, j, n, beta, fields)).collect()).collect();
    let exit: Vec<f64> = rates.iter().map(|r| r.iter().sum()).collect();

    let mut generator_residual: f64 = 0.0;
    let mut detailed_balance_residual: f64 = 0.0;
    for s in 0..size {
        // (πL)(s) = Σ_j π(s^j) r(s^j → s) − π(s) exit(s)
        let inflow: f64 = (0..n).map(|j| probabilities[s ^ (1 << j)] * rates[s ^ (1 << j)][j]).sum();
        generator_residual = generator_residual.max((inflow - probabilities[s] * exit[s]).abs());
        for j in 0..n {
            let t = s ^ (1 << j);
            let d = (probabilities[s] * rates[s][j] - probabilities[t] * rates[t][j]).abs();
            detailed_balance_residual = detailed_balance_residual.max(d);
        }
    }
    let stationary = if n <= DENSE_LIMIT {
        dense_stationary(&rates, &exit, n)?
    } else {
        gauss_seidel_stationary(&rates, &exit, n)?
    };
    let solve_discrepancy = stationary
        .iter()
        .zip(&probabilities)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ExactOracleResult {
        beta,
        fields: fields.to_vec(),
        energies,
        probabilities,
        stationary,
        generator_residual,
        detailed_balance_residual,
        solve_discrepancy,
    })
}

/// Solves `Lᵀπ = 0`, `Σπ = 1` by LU with the last equation replaced.
fn dense_stationary(rates: &[Vec<f64>], exit: &[f64], n: usize) -> Result<Vec<f64>> {
    let size = rates.len();
    let mut a = DMatrix::zeros(size, size);
    for s in 0..size {
        a[(s, s)] = -exit[s];
        for j in 0..n {
            let t = s ^ (1 << j);
            // inflow into s from t
            a[(s, t)] += rates[t][j];
        }
    }
    for c in 0..size {
        a[(size - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(size);
    b[size - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("generator system is singular".into()))?;
    Ok(x.iter().copied().collect())
}

fn gauss_seidel_stationary(rates: &[Vec<f64>], exit: &[f64], n: usize) -> Result<Vec<f64>> {
    let size = rates.len();
    let mut pi = vec![1.0 / size as f64; size];
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for s in 0..size {
            let inflow: f64 = (0..n).map(|j| pi[s ^ (1 << j)] * rates[s ^ (1 << j)][j]).sum();
            let new = inflow / exit[s];
            change = change.max((new - pi[s]).abs() / new.max(1e-300));
            pi[s] = new;
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        if change < 1e-15 {
            return Ok(pi);
        }
    }
    Err(Error::Numerical("Gauss–Seidel did not converge".into()))
}

/// Per-spin reference run: one rate per site, recomputed after every flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSpinRun {
    /// Spins at each grid time (pre-jump values).
    pub snapshots: Vec<Vec<i8>>,
    pub n_events: u64,
    /// Time spent in each configuration index, when `N ≤ 12`.
    pub occupation: Option<Vec<f64>>,
}

/// Direct Gillespie simulation over individual spins, `O(N)` per event.
pub fn simulate_cw_per_spin(
    spins: &[i8],
    fields: &[f64],
    beta: f64,
    t_end: f64,
    grid: &[f64],
    seed: SeedSpec,
) -> Result<PerSpinRun> {
    let n = spins.len();
    if n == 0 || fields.len() != n {
        return Err(Error::Structure("need one field per spin".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&g| g < 0.0 || g > t_end) {
        return config("observation grid must be sorted and inside [0, t_end]");
    }
    let mut rng = seed.rng(Stream::Dynamics);
    let mut sigma = spins.to_vec();
    let mut occupation = (n <= MAX_ORACLE_SPINS).then(|| vec![0.0; 1 << n]);
    let index = |s: &[i8]| s.iter().enumerate().fold(0usize, |acc, (j, &v)| acc | (usize::from(v > 0) << j));
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let mut t = 0.0;
    let mut n_events = 0;
    let mut rates = vec![0.0; n];
    loop {
        let m = sigma.iter().map(|&s| f64::from(s)).sum::<f64>() / n as f64;
        for j in 0..n {
            rates[j] = (-beta * f64::from(sigma[j]) * (m + fields[j])).exp();
        }
        let total: f64 = rates.iter().sum();
        let t_next = t + rng.sample::<f64, _>(Exp1) / total;
        while gi < grid.len() && grid[gi] < t_next {
            snapshots.push(sigma.clone());
            gi += 1;
        }
        if let Some(occ) = occupation.as_mut() {
            occ[index(&sigma)] += t_next.min(t_end) - t;
        }
        if t_next > t_end {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = n - 1;
        for (j, r) in rates.iter().enumerate() {
            if u < *r {
                chosen = j;
                break;
            }
            u -= r;
        }
        sigma[chosen] = -sigma[chosen];
        t = t_next;
        n_events += 1;
    }
    while gi < grid.len() {
        snapshots.push(sigma.clone());
        gi += 1;
    }
    Ok(PerSpinRun {
        snapshots,
        n_events,
        occupation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cw::{simulate_cw, AggregatedCwState, CwSimOptions};
    use crate::stats::ensemble::{mean_and_variance, run_ensemble};

    #[test]
    fn single_spin_symmetric() {
        let r = exact_gibbs_oracle(0.7, &[0.0]).unwrap();
        assert!((r.probabilities[0] - 0.5).abs() < 1e-15);
        assert!((r.stationary[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_spins_closed_form() {
        let r = exact_gibbs_oracle(1.0, &[0.0, 0.0]).unwrap();
        // aligned: e^{β/(2N)·4} = e^{1}, opposed: 1
        let z = 2.0 * 1f64.exp() + 2.0;
        let expect = [1f64.exp() / z, 1.0 / z, 1.0 / z, 1f64.exp() / z];
        for s in 0..4 {
            assert!((r.probabilities[s] - expect[s]).abs() < 1e-14);
            assert!((r.stationary[s] - expect[s]).abs() < 1e-14);
        }
    }

    #[test]
    fn six_mixed_fields() {
        let r = exact_gibbs_oracle(1.1, &[0.3, 0.3, 0.3, -0.3, -0.3, -0.3]).unwrap();
        assert!(r.detailed_balance_residual < 1e-12);
        assert!(r.generator_residual < 1e-12);
        assert!(r.solve_discrepancy < 1e-12);
        let agg = r.aggregated(&[-0.3, 0.3]).unwrap();
        assert_eq!(agg.len(), 16);
        assert!((agg.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iterative_solver_above_dense_limit() {
        let fields: Vec<f64> = (0..10).map(|j| if j % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let r = exact_gibbs_oracle(0.9, &fields).unwrap();
        assert!(r.solve_discrepancy < 1e-12, "{}", r.solve_discrepancy);
    }

    #[test]
    fn too_many_spins_refused() {
        assert!(matches!(exact_gibbs_oracle(1.0, &[0.0; 13]), Err(Error::Refused(_))));
    }

    #[test]
    fn per_spin_agrees_with_aggregated_in_mean() {
        let fields = [0.3, 0.3, -0.3, -0.3, 0.3];
        let spins = [1i8, 1, 1, -1, -1];
        let beta = 1.3;
        let reps = 4000;
        let per = run_ensemble(reps, SeedSpec::new(21, 0), |s| {
            let r = simulate_cw_per_spin(&spins, &fields, beta, 1.0, &[1.0], s)?;
            Ok(r.snapshots[0].iter().map(|&x| f64::from(x)).sum::<f64>())
        })
        .unwrap();
        let state = AggregatedCwState::from_counts(vec![-0.3, 0.3], vec![[1, 1], [1, 2]]).unwrap();
        let agg = run_ensemble(reps, SeedSpec::new(22, 0), |s| {
            let r = simulate_cw(&state, beta, 1.0, &[1.0], s, CwSimOptions::default())?;
            Ok(r.snapshots[0].spin_sum as f64)
        })
        .unwrap();
        let (a, b) = (mean_and_variance(&per), mean_and_variance(&agg));
        let se = (a.se_mean.powi(2) + b.se_mean.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se, "{} vs {} (se {se})", a.mean, b.mean);
    }
}
