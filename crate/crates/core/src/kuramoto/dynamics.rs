//! Euler–Maruyama simulation of the random Kuramoto diffusion.
//!
//! The interaction `(θ/N) Σ_k sin(x_k − x_j)` equals `θ r_N sin(Ψ_N − x_j)`,
//! so one pass computes `Σ cos x_k`, `Σ sin x_k` and the next pass uses them
//! for every particle: `O(N)` per step.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::measure::{FluctuationSeries, SpaceScale, TimeScale};
use crate::params::KuramotoParams;
use crate::rng::{SeedSpec, Stream};

/// Number of cells used to invert the initial density.
pub const INITIAL_GRID: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatorState {
    /// Angles in `[0, 2π)`.
    pub angles: Vec<f64>,
    /// Disorder values `η_j`, constant in time.
    pub freqs: Vec<f64>,
    pub time: f64,
}

impl RotatorState {
    pub fn n(&self) -> usize {
        self.angles.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterSample {
    pub r: f64,
    pub psi: f64,
}

/// `r e^{iΨ} = (1/N) Σ_j e^{i x_j}`.
pub fn order_parameter(angles: &[f64]) -> OrderParameterSample {
    let (c, s) = angles
        .iter()
        .fold((0.0, 0.0), |(c, s), x| (c + x.cos(), s + x.sin()));
    let n = angles.len() as f64;
    let z = Complex64::new(c / n, s / n);
    OrderParameterSample {
        r: z.norm().min(1.0),
        psi: z.arg().rem_euclid(TAU),
    }
}

/// Samples frequencies from the law and angles from `q0(x, η)` by inverting
/// its cumulative distribution on a 2048-cell grid.
pub fn initial_kuramoto_state(
    params: &KuramotoParams,
    q0: &dyn Fn(f64, f64) -> f64,
    seed: SeedSpec,
) -> Result<RotatorState> {
    let n = params.n_particles;
    let idx = params.law.sample_indices(n, seed)?;
    let values = params.law.values();
    let h = TAU / INITIAL_GRID as f64;
    let mut cdfs = Vec::with_capacity(values.len());
    for &eta in &values {
        let dens: Vec<f64> = (0..=INITIAL_GRID).map(|i| q0(i as f64 * h, eta)).collect();
        if dens.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return config(format!("initial density for η = {eta} is negative or not finite"));
        }
        let mut cdf = vec![0.0; INITIAL_GRID + 1];
        for i in 0..INITIAL_GRID {
            cdf[i + 1] = cdf[i] + 0.5 * h * (dens[i] + dens[i + 1]);
        }
        let total = cdf[INITIAL_GRID];
        if !(total > 0.0) || !total.is_finite() {
            return config(format!("initial density for η = {eta} is not normalisable"));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        cdfs.push(cdf);
    }
    let mut rng = seed.rng(Stream::InitialState);
    let angles = idx
        .iter()
        .map(|&k| {
            let cdf = &cdfs[k];
            let u: f64 = rng.gen();
            let i = cdf.partition_point(|&c| c <= u).clamp(1, INITIAL_GRID) - 1;
            let width = cdf[i + 1] - cdf[i];
            let frac = if width > 0.0 { (u - cdf[i]) / width } else { 0.5 };
            ((i as f64 + frac) * h).rem_euclid(TAU)
        })
        .collect();
    Ok(RotatorState {
        angles,
        freqs: idx.iter().map(|&k| values[k]).collect(),
        time: 0.0,
    })
}

/// Holds a state together with cached `cos x_j`, `sin x_j` and their sums.
#[derive(Debug, Clone)]
pub struct KuramotoStepper {
    theta: f64,
    omega: f64,
    state: RotatorState,
    cos: Vec<f64>,
    sin: Vec<f64>,
    sum_cos: f64,
    sum_sin: f64,
    displacement: Option<Vec<f64>>,
}

impl KuramotoStepper {
    pub fn new(state: RotatorState, params: &KuramotoParams) -> Self {
        let cos: Vec<f64> = state.angles.iter().map(|x| x.cos()).collect();
        let sin: Vec<f64> = state.angles.iter().map(|x| x.sin()).collect();
        let sum_cos = cos.iter().sum();
        let sum_sin = sin.iter().sum();
        Self {
            theta: params.theta,
            omega: params.omega,
            state,
            cos,
            sin,
            sum_cos,
            sum_sin,
            displacement: None,
        }
    }

    /// Also accumulate each particle's unwrapped displacement.
    pub fn track_displacement(mut self) -> Self {
        self.displacement = Some(vec![0.0; self.state.n()]);
        self
    }

    pub fn state(&self) -> &RotatorState {
        &self.state
    }

    pub fn into_state(self) -> RotatorState {
        self.state
    }

    pub fn displacement(&self) -> Option<&[f64]> {
        self.displacement.as_deref()
    }

    pub fn order_parameter(&self) -> OrderParameterSample {
        let n = self.state.n() as f64;
        let z = Complex64::new(self.sum_cos / n, self.sum_sin / n);
        OrderParameterSample {
            r: z.norm().min(1.0),
            psi: z.arg().rem_euclid(TAU),
        }
    }

    /// Drift of particle `j`: `ωη_j + θ r_N sin(Ψ_N − x_j)`.
    pub fn drift(&self, j: usize) -> f64 {
        let n = self.state.n() as f64;
        self.omega * self.state.freqs[j]
            + self.theta * (self.sum_sin * self.cos[j] - self.sum_cos * self.sin[j]) / n
    }

    /// One step with standard normal increments supplied by `noise(j)`.
    pub fn step_with(&mut self, dt: f64, mut noise: impl FnMut(usize) -> f64) {
        let n = self.state.n() as f64;
        let sd = dt.sqrt();
        let (coupled_sin, coupled_cos) = (self.theta * self.sum_sin / n, self.theta * self.sum_cos / n);
        let (mut new_cos, mut new_sin) = (0.0, 0.0);
        for j in 0..self.state.angles.len() {
            let drift = self.omega * self.state.freqs[j] + coupled_sin * self.cos[j] - coupled_cos * self.sin[j];
            let dx = drift * dt + sd * noise(j);
            if let Some(d) = self.displacement.as_mut() {
                d[j] += dx;
            }
            let x = (self.state.angles[j] + dx).rem_euclid(TAU);
            // rem_euclid can round up to exactly 2π
            let x = if x >= TAU { 0.0 } else { x };
            self.state.angles[j] = x;
            let (s, c) = x.sin_cos();
            self.cos[j] = c;
            self.sin[j] = s;
            new_cos += c;
            new_sin += s;
        }
        self.sum_cos = new_cos;
        self.sum_sin = new_sin;
        self.state.time += dt;
    }

    pub fn step<R: Rng>(&mut self, dt: f64, rng: &mut R) {
        self.step_with(dt, |_| rng.sample(StandardNormal));
    }
}

/// Reference step that evaluates `(θ/N) Σ_k sin(x_k − x_j)` pairwise,
/// `O(N²)`, with the increments `noise[j]` supplied.
pub fn step_pairwise(state: &RotatorState, params: &KuramotoParams, dt: f64, noise: &[f64]) -> RotatorState {
    let n = state.n();
    let sd = dt.sqrt();
    let angles = (0..n)
        .map(|j| {
            let xj = state.angles[j];
            let coupling: f64 = state.angles.iter().map(|&xk| (xk - xj).sin()).sum::<f64>() * params.theta / n as f64;
            let x = (xj + (params.omega * state.freqs[j] + coupling) * dt + sd * noise[j]).rem_euclid(TAU);
            if x >= TAU {
                0.0
            } else {
                x
            }
        })
        .collect();
    RotatorState {
        angles,
        freqs: state.freqs.clone(),
        time: state.time + dt,
    }
}

/// One Euler–Maruyama step of `dx_j = [ωη_j + θ r_N sin(Ψ_N − x_j)]dt + dW_j`.
pub fn step_kuramoto<R: Rng>(state: &RotatorState, params: &KuramotoParams, dt: f64, rng: &mut R) -> Result<RotatorState> {
    if !(dt > 0.0) {
        return config(format!("dt must be positive, got {dt}"));
    }
    let mut stepper = KuramotoStepper::new(state.clone(), params);
    stepper.step(dt, rng);
    Ok(stepper.into_state())
}

/// Runs `n_steps` steps and returns copies of the state after each step
/// listed in `snapshot_steps` (step 0 is the initial state).
pub fn simulate_kuramoto(
    state: &RotatorState,
    params: &KuramotoParams,
    dt: f64,
    n_steps: usize,
    snapshot_steps: &[usize],
    seed: SeedSpec,
) -> Result<Vec<RotatorState>> {
    if !(dt > 0.0) {
        return config(format!("dt must be positive, got {dt}"));
    }
    if snapshot_steps.windows(2).any(|w| w[1] < w[0]) || snapshot_steps.last().is_some_and(|&s| s > n_steps) {
        return config("snapshot steps must be sorted and at most n_steps");
    }
    let mut rng = seed.rng(Stream::Dynamics);
    let mut stepper = KuramotoStepper::new(state.clone(), params);
    let mut out = Vec::with_capacity(snapshot_steps.len());
    let mut next = 0;
    for step in 0..=n_steps {
        if step > 0 {
            stepper.step(dt, &mut rng);
        }
        while next < snapshot_steps.len() && snapshot_steps[next] == step {
            out.push(stepper.state().clone());
            next += 1;
        }
    }
    Ok(out)
}

/// Order parameters of a rotator trajectory around the uniform density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoSeries {
    pub series: FluctuationSeries,
    /// Upper bound on the squared-norm contribution of harmonics `h > h_max`.
    pub tail_bound: f64,
}

/// Harmonic means `(1/N) Σ (cos hx, sin hx, η cos hx, η sin hx)` for `h = 1..=h_max`.
pub fn harmonic_means(state: &RotatorState, h_max: usize) -> Vec<[f64; 4]> {
    let mut acc = vec![[0.0; 4]; h_max + 1];
    for (&x, &eta) in state.angles.iter().zip(&state.freqs) {
        let z = Complex64::new(x.cos(), x.sin());
        let mut zh = Complex64::new(1.0, 0.0);
        for a in acc.iter_mut().skip(1) {
            zh *= z;
            a[0] += zh.re;
            a[1] += zh.im;
            a[2] += eta * zh.re;
            a[3] += eta * zh.im;
        }
    }
    let n = state.n() as f64;
    acc.iter_mut().flatten().for_each(|v| *v /= n);
    acc
}

pub fn kuramoto_labels(h_max: usize) -> Vec<String> {
    let mut labels: Vec<String> = (1..=4).map(|i| format!("V1_{i}")).collect();
    for h in 2..=h_max {
        for i in 1..=4 {
            labels.push(format!("Y{h}_{i}"));
        }
    }
    labels.push("norm_r".into());
    labels
}

/// `V_1^{(i)}`, `Y_h^{(i)}` (`2 ≤ h ≤ h_max`) and the weighted norm
/// `‖ρ̃‖_r` for every snapshot, referenced to `q_* = 1/(2π)`.
///
/// The kernel pair is `v_1^{(1)} = cos x − 2ωη sin x`,
/// `v_1^{(2)} = sin x + 2ωη cos x`, the stable pair
/// `v_1^{(3)} = η cos x + 2ω sin x`, `v_1^{(4)} = 2ω cos x − η sin x`.
pub fn kuramoto_order_parameters(
    snapshots: &[RotatorState],
    omega: f64,
    h_max: usize,
    r: f64,
    space_scale: SpaceScale,
    time_scale: TimeScale,
) -> Result<KuramotoSeries> {
    if h_max < 2 {
        return config(format!("h_max must be at least 2, got {h_max}"));
    }
    if !(r >= 1.0) {
        return config(format!("norm exponent r must be ≥ 1, got {r}"));
    }
    let n = snapshots.first().map_or(0, RotatorState::n);
    if snapshots.iter().any(|s| s.n() != n) || n == 0 {
        return Err(Error::Structure("snapshots must share a nonzero particle count".into()));
    }
    let scale = space_scale.factor(n);
    let weights: Vec<f64> = (0..=h_max).map(|h| (1.0 + (h * h) as f64).powf(-r)).collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for snap in snapshots {
        let m = harmonic_means(snap, h_max);
        let [c1, s1, ec1, es1] = m[1];
        let mut row = vec![
            scale * (c1 - 2.0 * omega * es1),
            scale * (s1 + 2.0 * omega * ec1),
            scale * (ec1 + 2.0 * omega * s1),
            scale * (2.0 * omega * c1 - es1),
        ];
        let mut norm2 = row[2] * row[2] + row[3] * row[3];
        for h in 2..=h_max {
            for v in m[h] {
                let y = scale * v;
                norm2 += weights[h] * y * y;
                row.push(y);
            }
        }
        row.push(norm2.sqrt());
        times.push(time_scale.to_observed(snap.time, n));
        values.push(row);
    }
    // |Y_h^{(i)}| ≤ scale, and Σ_{h>H} (1+h²)^{-r} ≤ H^{1−2r}/(2r−1)
    let hm = h_max as f64;
    let tail_bound = 4.0 * scale * scale * hm.powf(1.0 - 2.0 * r) / (2.0 * r - 1.0);
    Ok(KuramotoSeries {
        series: FluctuationSeries {
            net_mass: vec![0.0; times.len()],
            times,
            values,
            labels: kuramoto_labels(h_max),
            space_scale,
            time_scale,
        },
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::DisorderLaw;

    fn params(theta: f64, omega: f64, n: usize) -> KuramotoParams {
        KuramotoParams::new(theta, omega, DisorderLaw::symmetric_pair(1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn order_parameter_matches_mean_phasor() {
        let angles = [0.1, 1.3, 2.9, 4.4, 6.0];
        let op = order_parameter(&angles);
        let (c, s) = angles.iter().fold((0.0, 0.0), |a, x| (a.0 + x.cos() / 5.0, a.1 + x.sin() / 5.0));
        assert!((op.r * op.psi.cos() - c).abs() < 1e-12);
        assert!((op.r * op.psi.sin() - s).abs() < 1e-12);
    }

    #[test]
    fn coherent_start_is_synchronised() {
        let p = params(1.0, 0.2, 2000);
        let sigma: f64 = 0.02;
        let q0 = |x: f64, _eta: f64| {
            (-2..=2)
                .map(|k| {
                    let d = x - k as f64 * TAU;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .sum::<f64>()
        };
        let s = initial_kuramoto_state(&p, &q0, SeedSpec::new(8, 0)).unwrap();
        assert!(s.angles.iter().all(|&x| (0.0..TAU).contains(&x)));
        assert!((order_parameter(&s.angles).r - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_densities() {
        let p = params(1.0, 0.2, 10);
        assert!(initial_kuramoto_state(&p, &|_, _| 0.0, SeedSpec::new(1, 0)).is_err());
        assert!(initial_kuramoto_state(&p, &|x, _| x - 1.0, SeedSpec::new(1, 0)).is_err());
    }

    #[test]
    fn deterministic_drift_without_noise() {
        let p = KuramotoParams::new(1e-300, 1.0, DisorderLaw::symmetric_pair(1.0).unwrap(), 3).unwrap();
        let x0 = vec![0.5, 3.0, 6.0];
        let state = RotatorState {
            angles: x0.clone(),
            freqs: vec![1.0; 3],
            time: 0.0,
        };
        let mut st = KuramotoStepper::new(state, &p);
        for _ in 0..100 {
            st.step_with(0.01, |_| 0.0);
        }
        for (x, x0) in st.state().angles.iter().zip(&x0) {
            let expect = (x0 + 1.0f64).rem_euclid(TAU);
            assert!((x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_field_step_equals_pairwise_step() {
        let p = params(1.4, 0.3, 200);
        let q0 = |x: f64, _| 1.0 + 0.5 * x.cos();
        let mut st = KuramotoStepper::new(initial_kuramoto_state(&p, &q0, SeedSpec::new(4, 0)).unwrap(), &p);
        let mut rng = SeedSpec::new(4, 0).rng(Stream::Dynamics);
        for _ in 0..50 {
            let noise: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
            let reference = step_pairwise(st.state(), &p, 0.01, &noise);
            st.step_with(0.01, |j| noise[j]);
            for (a, b) in st.state().angles.iter().zip(&reference.angles) {
                let d = (a - b).rem_euclid(TAU);
                assert!(d.min(TAU - d) < 1e-12);
            }
        }
    }

    #[test]
    fn h_max_below_two_is_rejected() {
        let s = RotatorState {
            angles: vec![0.0, 1.0],
            freqs: vec![1.0, -1.0],
            time: 0.0,
        };
        assert!(kuramoto_order_parameters(&[s], 0.25, 1, 2.0, SpaceScale::SqrtN, TimeScale::Unit).is_err());
    }

    #[test]
    fn equispaced_angles_have_no_low_harmonics() {
        let n = 64;
        let s = RotatorState {
            angles: (0..n).map(|j| TAU * j as f64 / n as f64).collect(),
            freqs: (0..n).map(|j| if j % 3 == 0 { 1.0 } else { -1.0 }).collect(),
            time: 0.0,
        };
        let m = harmonic_means(&s, 63);
        for h in 1..64 {
            assert!(m[h][0].abs() < 1e-12 && m[h][1].abs() < 1e-12, "h = {h}");
        }
    }

    #[test]
    fn zero_omega_kernel_is_plain_cosine() {
        let s = RotatorState {
            angles: vec![0.3, 1.9, 2.2, 5.1],
            freqs: vec![1.0, -1.0, 1.0, -1.0],
            time: 0.0,
        };
        let out = kuramoto_order_parameters(&[s.clone()], 0.0, 4, 2.0, SpaceScale::Moderate, TimeScale::NHalf).unwrap();
        let m = harmonic_means(&s, 1);
        let y11 = 4f64.powf(0.25) * m[1][0];
        assert_eq!(out.series.values[0][0], y11);
    }
}
