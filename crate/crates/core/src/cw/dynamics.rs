//! Exact continuous-time Glauber dynamics, aggregated by `(spin, field)` cell.
//!
//! Flip rates depend on a site only through its spin and field value, so
//! the `N` individual clocks merge into `2m` channels, one per cell, with
//! rate `count(j,k)·exp(−βj(m_N+η_k))`. Each event costs `O(m)` and one
//! exponential.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::cw::analysis::CwProfile;
use crate::error::{config, Error, Result};
use crate::measure::{slot_spin, EmpiricalMeasure, FluctuationSeries, SpaceScale, TimeScale};
use crate::params::CwParams;
use crate::rng::{SeedSpec, Stream};

/// Occupation of each `(spin, field)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedCwState {
    pub fields: Vec<f64>,
    /// `counts[k] = [#(σ=−1, η_k), #(σ=+1, η_k)]`.
    pub counts: Vec<[u64; 2]>,
    /// `Σ_j σ_j`, kept exactly.
    pub spin_sum: i64,
    pub time: f64,
}

impl AggregatedCwState {
    pub fn from_counts(fields: Vec<f64>, counts: Vec<[u64; 2]>) -> Result<Self> {
        if fields.len() != counts.len() {
            return Err(Error::Structure(format!(
                "{} field values for {} count pairs",
                fields.len(),
                counts.len()
            )));
        }
        let n: u64 = counts.iter().map(|c| c[0] + c[1]).sum();
        if n == 0 {
            return config("state has no particles");
        }
        let spin_sum = counts.iter().map(|c| c[1] as i64 - c[0] as i64).sum();
        Ok(Self {
            fields,
            counts,
            spin_sum,
            time: 0.0,
        })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }

    /// `m_N = (1/N) Σ_j σ_j`.
    pub fn magnetization(&self) -> f64 {
        self.spin_sum as f64 / self.n() as f64
    }

    /// Particles per field value, conserved by the dynamics.
    pub fn field_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c[0] + c[1]).collect()
    }

    pub fn empirical_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            counts: self.counts.clone(),
        }
    }
}

/// Samples fields i.i.d. from the law and spins independently with
/// `P(σ = +1 | η) = q0(+1, η)`.
pub fn initial_cw_state(params: &CwParams, q0: &CwProfile, seed: SeedSpec) -> Result<AggregatedCwState> {
    if q0.law != params.law {
        return Err(Error::Structure("initial profile is defined on a different field law".into()));
    }
    for (a, q) in params.law.atoms().iter().zip(&q0.q) {
        if !(0.0..=1.0).contains(&q[1]) || (q[0] + q[1] - 1.0).abs() > 1e-10 {
            return config(format!("q0 at field {} is not a probability on {{−1,+1}}", a.value));
        }
    }
    let idx = params.law.sample_indices(params.n_particles, seed)?;
    let mut rng = seed.rng(Stream::InitialState);
    let mut counts = vec![[0u64; 2]; params.law.len()];
    for k in idx {
        let up = rng.gen::<f64>() < q0.q[k][1];
        counts[k][usize::from(up)] += 1;
    }
    AggregatedCwState::from_counts(params.law.values(), counts)
}

/// Flip intensity of every cell: `count(j,k)·exp(−βj(m_N + η_k))`.
pub fn cell_rates(state: &AggregatedCwState, beta: f64) -> Vec<[f64; 2]> {
    let m = state.magnetization();
    state
        .fields
        .iter()
        .zip(&state.counts)
        .map(|(&eta, c)| {
            [
                c[0] as f64 * (beta * (m + eta)).exp(),
                c[1] as f64 * (-beta * (m + eta)).exp(),
            ]
        })
        .collect()
}

/// One spin flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwEvent {
    pub time: f64,
    pub field_index: usize,
    /// Spin before the flip.
    pub from_spin: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwSnapshot {
    pub time: f64,
    pub counts: Vec<[u64; 2]>,
    pub spin_sum: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CwSimOptions {
    pub record_events: bool,
    /// Accumulate time spent in each aggregated state.
    pub track_occupation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwTrajectory {
    pub fields: Vec<f64>,
    pub n: u64,
    pub snapshots: Vec<CwSnapshot>,
    pub events: Option<Vec<CwEvent>>,
    pub n_events: u64,
    /// Time spent in each state, keyed by the `+1` counts per field atom.
    pub occupation: Option<BTreeMap<Vec<u64>, f64>>,
    pub final_state: AggregatedCwState,
}

/// Runs the chain from `state` up to microscopic time `t_end`.
///
/// `grid` holds observation times in `[0, t_end]`, non-decreasing; the
/// snapshot at a grid time is the cadlag value there.
pub fn simulate_cw(
    state: &AggregatedCwState,
    beta: f64,
    t_end: f64,
    grid: &[f64],
    seed: SeedSpec,
    options: CwSimOptions,
) -> Result<CwTrajectory> {
    if !(t_end > 0.0) {
        return config(format!("t_end must be positive, got {t_end}"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&g| g < 0.0 || g > t_end) {
        return config("observation grid must be sorted and inside [0, t_end]");
    }
    let mut rng = seed.rng(Stream::Dynamics);
    let n = state.n();
    let inv_n = 1.0 / n as f64;
    let mut counts = state.counts.clone();
    let mut spin_sum = state.spin_sum;
    // e^{∓βη_k}: rates factor into e^{−βjm}·e^{−βjη}
    let w_up: Vec<f64> = state.fields.iter().map(|e| (-beta * e).exp()).collect();
    let w_down: Vec<f64> = state.fields.iter().map(|e| (beta * e).exp()).collect();
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut events = options.record_events.then(Vec::new);
    let mut occupation = options.track_occupation.then(BTreeMap::new);
    let mut gi = 0;
    let mut t = state.time;
    let t_stop = state.time + t_end;
    let mut n_events = 0u64;
    loop {
        let a = (-beta * spin_sum as f64 * inv_n).exp();
        let (mut s_up, mut s_down) = (0.0, 0.0);
        for k in 0..counts.len() {
            s_up += counts[k][1] as f64 * w_up[k];
            s_down += counts[k][0] as f64 * w_down[k];
        }
        let up_total = a * s_up;
        let total = up_total + s_down / a;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical(format!("total flip rate is {total}")));
        }
        let tau: f64 = rng.sample::<f64, _>(Exp1) / total;
        let t_next = t + tau;
        while gi < grid.len() && state.time + grid[gi] < t_next {
            snapshots.push(CwSnapshot {
                time: grid[gi],
                counts: counts.clone(),
                spin_sum,
            });
            gi += 1;
        }
        if let Some(occ) = occupation.as_mut() {
            let key: Vec<u64> = counts.iter().map(|c| c[1]).collect();
            *occ.entry(key).or_insert(0.0) += t_next.min(t_stop) - t;
        }
        if t_next > t_stop {
            break;
        }
        // choose the channel
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = None;
        if u < up_total {
            for k in 0..counts.len() {
                let r = a * counts[k][1] as f64 * w_up[k];
                if u < r && counts[k][1] > 0 {
                    chosen = Some((k, 1usize));
                    break;
                }
                u -= r;
            }
        } else {
            u -= up_total;
            for k in 0..counts.len() {
                let r = counts[k][0] as f64 * w_down[k] / a;
                if u < r && counts[k][0] > 0 {
                    chosen = Some((k, 0usize));
                    break;
                }
                u -= r;
            }
        }
        // rounding can push u past the last nonempty channel
        let (k, slot) = match chosen {
            Some(c) => c,
            None => last_nonempty(&counts, u < up_total)
                .ok_or_else(|| Error::Numerical("no channel selected".into()))?,
        };
        counts[k][slot] -= 1;
        counts[k][1 - slot] += 1;
        let from = slot_spin(slot) as i64;
        spin_sum -= 2 * from;
        t = t_next;
        n_events += 1;
        if let Some(ev) = events.as_mut() {
            ev.push(CwEvent {
                time: t - state.time,
                field_index: k,
                from_spin: from as i8,
            });
        }
    }
    while gi < grid.len() {
        snapshots.push(CwSnapshot {
            time: grid[gi],
            counts: counts.clone(),
            spin_sum,
        });
        gi += 1;
    }
    let final_state = AggregatedCwState {
        fields: state.fields.clone(),
        counts,
        spin_sum,
        time: t_stop,
    };
    Ok(CwTrajectory {
        fields: state.fields.clone(),
        n,
        snapshots,
        events,
        n_events,
        occupation,
        final_state,
    })
}

fn last_nonempty(counts: &[[u64; 2]], up: bool) -> Option<(usize, usize)> {
    let slot = usize::from(up);
    (0..counts.len()).rev().find(|&k| counts[k][slot] > 0).map(|k| (k, slot))
}

/// `Y_i = scale · Σ_{σ,k} σ φ_i(η_k) [ρ_N(σ,η_k) − q(σ,η_k)μ(η_k)]` at every
/// snapshot, with observed time `t / time_scale`.
pub fn cw_order_parameters(
    traj: &CwTrajectory,
    basis: &[Vec<f64>],
    reference: &CwProfile,
    space_scale: SpaceScale,
    time_scale: TimeScale,
) -> Result<FluctuationSeries> {
    let m = traj.fields.len();
    if reference.q.len() != m || basis.iter().any(|phi| phi.len() != m) {
        return Err(Error::Structure(format!(
            "basis/reference must be defined on the {m} field atoms"
        )));
    }
    let n = traj.n as usize;
    let scale = space_scale.factor(n);
    let masses = reference.cell_masses();
    let inv_n = 1.0 / traj.n as f64;
    let mut times = Vec::with_capacity(traj.snapshots.len());
    let mut values = Vec::with_capacity(traj.snapshots.len());
    let mut net_mass = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let diff: Vec<[f64; 2]> = snap
            .counts
            .iter()
            .zip(&masses)
            .map(|(c, q)| [c[0] as f64 * inv_n - q[0], c[1] as f64 * inv_n - q[1]])
            .collect();
        let row = basis
            .iter()
            .map(|phi| {
                scale
                    * phi
                        .iter()
                        .zip(&diff)
                        .map(|(p, d)| p * (d[1] - d[0]))
                        .sum::<f64>()
            })
            .collect();
        times.push(time_scale.to_observed(snap.time, n));
        values.push(row);
        net_mass.push(scale * diff.iter().map(|d| d[0] + d[1]).sum::<f64>());
    }
    Ok(FluctuationSeries {
        times,
        values,
        labels: (0..basis.len()).map(|i| format!("Y{i}")).collect(),
        space_scale,
        time_scale,
        net_mass,
    })
}

/// Convenience: fields from `params`, all spins of field `k` set by `spins[k]`.
pub fn uniform_spin_state(params: &CwParams, field_counts: &[u64], spin: i8) -> Result<AggregatedCwState> {
    let slot = usize::from(spin > 0);
    let counts = field_counts
        .iter()
        .map(|&c| {
            let mut pair = [0u64; 2];
            pair[slot] = c;
            pair
        })
        .collect();
    AggregatedCwState::from_counts(params.law.values(), counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::DisorderLaw;

    #[test]
    fn rates_closed_forms() {
        let params = CwParams::new(1.0, DisorderLaw::dirac_zero(), 10).unwrap();
        let s = uniform_spin_state(&params, &[10], 1).unwrap();
        let r = cell_rates(&s, 1.0);
        assert!((r[0][1] - 10.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(r[0][0], 0.0);

        let s = AggregatedCwState::from_counts(vec![0.0], vec![[7, 7]]).unwrap();
        let r = cell_rates(&s, 2.3);
        assert_eq!(r[0], [7.0, 7.0]);
    }

    #[test]
    fn rate_arithmetic_example() {
        // counts(+1, 0.3) = 100 with m_N = 0.1: 1000 particles, spin sum 100
        let s = AggregatedCwState::from_counts(vec![-0.3, 0.3], vec![[450, 450], [0, 100]]).unwrap();
        assert!((s.magnetization() - 0.1).abs() < 1e-15);
        let r = cell_rates(&s, 1.116);
        let oracle = 100.0 * (-1.116f64 * 0.4).exp();
        assert!((r[1][1] - oracle).abs() < 1e-10);
        assert!((r[1][1] - 63.993).abs() < 1e-3);
    }

    #[test]
    fn deterministic_initial_spins() {
        let law = DisorderLaw::symmetric_pair(0.3).unwrap();
        let params = CwParams::new(1.0, law.clone(), 50).unwrap();
        let q0 = CwProfile::constant(&law, 1.0).unwrap();
        let s = initial_cw_state(&params, &q0, SeedSpec::new(3, 0)).unwrap();
        assert!(s.counts.iter().all(|c| c[0] == 0));
        assert_eq!(s.magnetization(), 1.0);
    }

    #[test]
    fn snapshots_and_conservation() {
        let law = DisorderLaw::symmetric_pair(0.3).unwrap();
        let params = CwParams::new(1.2, law.clone(), 200).unwrap();
        let q0 = CwProfile::constant(&law, 0.5).unwrap();
        let s = initial_cw_state(&params, &q0, SeedSpec::new(11, 0)).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let opts = CwSimOptions {
            record_events: true,
            track_occupation: false,
        };
        let tr = simulate_cw(&s, 1.2, 10.0, &grid, SeedSpec::new(11, 0), opts).unwrap();
        assert_eq!(tr.snapshots.len(), grid.len());
        assert_eq!(tr.snapshots[0].counts, s.counts);
        let ev = tr.events.as_ref().unwrap();
        assert_eq!(ev.len() as u64, tr.n_events);
        assert!(ev.windows(2).all(|w| w[1].time > w[0].time));
        for snap in &tr.snapshots {
            let totals: Vec<u64> = snap.counts.iter().map(|c| c[0] + c[1]).collect();
            assert_eq!(totals, s.field_totals());
            let sum: i64 = snap.counts.iter().map(|c| c[1] as i64 - c[0] as i64).sum();
            assert_eq!(sum, snap.spin_sum);
        }
        // replay the events from the start: snapshot counts are pre-jump values
        let mut counts = s.counts.clone();
        let mut e = 0;
        for snap in &tr.snapshots {
            while e < ev.len() && ev[e].time <= snap.time {
                let slot = usize::from(ev[e].from_spin > 0);
                counts[ev[e].field_index][slot] -= 1;
                counts[ev[e].field_index][1 - slot] += 1;
                e += 1;
            }
            assert_eq!(counts, snap.counts);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let params = CwParams::new(1.0, DisorderLaw::dirac_zero(), 100).unwrap();
        let q0 = CwProfile::constant(&params.law, 0.5).unwrap();
        let seed = SeedSpec::new(5, 9);
        let s = initial_cw_state(&params, &q0, seed).unwrap();
        let opts = CwSimOptions {
            record_events: true,
            track_occupation: false,
        };
        let a = simulate_cw(&s, 1.0, 5.0, &[1.0, 5.0], seed, opts).unwrap();
        let b = simulate_cw(&s, 1.0, 5.0, &[1.0, 5.0], seed, opts).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn bad_grid_and_horizon() {
        let s = AggregatedCwState::from_counts(vec![0.0], vec![[1, 1]]).unwrap();
        let seed = SeedSpec::new(0, 0);
        assert!(simulate_cw(&s, 1.0, 0.0, &[], seed, CwSimOptions::default()).is_err());
        assert!(simulate_cw(&s, 1.0, 1.0, &[0.5, 0.2], seed, CwSimOptions::default()).is_err());
        assert!(simulate_cw(&s, 1.0, 1.0, &[2.0], seed, CwSimOptions::default()).is_err());
    }

    #[test]
    fn order_parameters_vanish_at_reference() {
        let law = DisorderLaw::symmetric_pair(0.3).unwrap();
        let q = CwProfile::constant(&law, 0.5).unwrap();
        let s = AggregatedCwState::from_counts(law.values(), vec![[25, 25], [25, 25]]).unwrap();
        let tr = simulate_cw(&s, 0.1, 1e-9, &[0.0], SeedSpec::new(1, 1), CwSimOptions::default()).unwrap();
        let series = cw_order_parameters(&tr, &[vec![1.0, 1.0], vec![-1.0, 1.0]], &q, SpaceScale::SqrtN, TimeScale::Unit).unwrap();
        assert!(series.values[0].iter().all(|v| v.abs() < 1e-15));
        series.check_shape().unwrap();
    }

    #[test]
    fn homogeneous_single_cell_reduction() {
        let law = DisorderLaw::dirac_zero();
        let q = CwProfile::constant(&law, 0.5).unwrap();
        let s = AggregatedCwState::from_counts(vec![0.0], vec![[30, 70]]).unwrap();
        let tr = simulate_cw(&s, 1.0, 1e-9, &[0.0], SeedSpec::new(1, 1), CwSimOptions::default()).unwrap();
        let series = cw_order_parameters(&tr, &[vec![1.0]], &q, SpaceScale::Moderate, TimeScale::NQuarter).unwrap();
        let expect = 100f64.powf(0.25) * 0.4;
        assert!((series.values[0][0] - expect).abs() < 1e-12);
        assert!(series.net_mass[0].abs() < 1e-12);
    }

    #[test]
    fn basis_mismatch_is_structural() {
        let law = DisorderLaw::dirac_zero();
        let q = CwProfile::constant(&law, 0.5).unwrap();
        let s = AggregatedCwState::from_counts(vec![0.0], vec![[3, 3]]).unwrap();
        let tr = simulate_cw(&s, 1.0, 1.0, &[0.0], SeedSpec::new(1, 1), CwSimOptions::default()).unwrap();
        assert!(matches!(
            cw_order_parameters(&tr, &[vec![1.0, 2.0]], &q, SpaceScale::SqrtN, TimeScale::Unit),
            Err(Error::Structure(_))
        ));
    }
}
