//! Limiting diffusions of the critical and Gaussian fluctuation theory.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::cw::CwCltParameters;
use crate::error::{config, Error, Result};
use crate::kuramoto::KuramotoCltSystem;
use crate::law::DisorderLaw;
use crate::rng::{SeedSpec, Stream};

/// Largest step accepted for the cubic diffusions.
pub const CUBIC_MAX_DT: f64 = 1e-3;

/// Cubic coefficient `c(ω) = (1+4ω²)²(1−8ω²) / (4(1−4ω²)³(1+ω²))`.
///
/// `1 − 8ω²` is snapped to zero within `4ε`, so the marginal frequency
/// `1/(2√2)` gives exactly `0`.
pub fn kuramoto_cubic_coefficient(omega: f64) -> f64 {
    let w2 = omega * omega;
    let mut marginal = 1.0 - 8.0 * w2;
    if marginal.abs() <= 4.0 * f64::EPSILON {
        marginal = 0.0;
    }
    (1.0 + 4.0 * w2).powi(2) * marginal / (4.0 * (1.0 - 4.0 * w2).powi(3) * (1.0 + w2))
}

/// Noise amplitude `√((1+4ω²)/2)` of the critical Kuramoto diffusion.
pub fn kuramoto_limit_noise(omega: f64) -> f64 {
    ((1.0 + 4.0 * omega * omega) / 2.0).sqrt()
}

/// Linear SDE `dX = A X dt + B dW` with `X(0) ~ N(0, Σ₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOuSpec {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub initial_covariance: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl LinearOuSpec {
    pub fn new(drift: DMatrix<f64>, diffusion: DMatrix<f64>, initial_covariance: DMatrix<f64>) -> Result<Self> {
        let d = drift.nrows();
        if drift.ncols() != d
            || diffusion.nrows() != d
            || initial_covariance.shape() != (d, d)
            || (&initial_covariance - initial_covariance.transpose()).amax() > 1e-12
        {
            return Err(Error::Structure("OU matrices must be d×d (Σ₀ symmetric) and B d×k".into()));
        }
        Ok(Self {
            drift,
            diffusion,
            initial_covariance,
            labels: (0..d).map(|i| format!("X{i}")).collect(),
        })
    }

    /// Gaussian fluctuation limit of the spin system: state `(X, ℋ)` with
    /// `dX = 2(ℋ − ΛX)dt + noise dW`, `dℋ = 0`.
    pub fn from_cw(clt: &CwCltParameters) -> Self {
        let m = clt.modes();
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        let mut b = DMatrix::zeros(2 * m, m);
        for i in 0..m {
            a[(i, i)] = -clt.relaxation_rate(i);
            a[(i, m + i)] = clt.drift_scale;
            b[(i, i)] = clt.noise[i];
        }
        let labels = (0..m).map(|i| format!("X{i}")).chain((0..m).map(|i| format!("H{i}"))).collect();
        Self {
            drift: a,
            diffusion: b,
            initial_covariance: clt.joint_initial_covariance(),
            labels,
        }
    }

    /// Block of harmonic `h` of the Kuramoto Gaussian system.
    pub fn from_kuramoto(sys: &KuramotoCltSystem, h: usize) -> Result<Self> {
        if h == 0 || h > sys.h_max() {
            return config(format!("harmonic {h} outside 1..={}", sys.h_max()));
        }
        let a = &sys.drift[h - 1];
        let s = &sys.initial_covariance[h - 1];
        Ok(Self {
            drift: DMatrix::from_fn(4, 4, |i, j| a[(i, j)]),
            diffusion: DMatrix::identity(4, 4) * sys.noise[h - 1],
            initial_covariance: DMatrix::from_fn(4, 4, |i, j| s[(i, j)]),
            labels: (1..=4).map(|i| format!("X{h}_{i}")).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Exact transition over `dt`: `X(t+dt) = Φ X(t) + N(0, Q)`, from the
    /// exponential of `[[−A, BBᵀ], [0, Aᵀ]] dt`.
    pub fn transition(&self, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&(-&self.drift * dt));
        m.view_mut((0, d), (d, d)).copy_from(&(&self.diffusion * self.diffusion.transpose() * dt));
        m.view_mut((d, d), (d, d)).copy_from(&(self.drift.transpose() * dt));
        let e = m.exp();
        let phi = e.view((d, d), (d, d)).transpose();
        let q = &phi * e.view((0, d), (d, d));
        let q = (&q + q.transpose()) * 0.5;
        (phi, q)
    }

    /// `Cov X(t)` in closed form.
    pub fn covariance_at(&self, t: f64) -> DMatrix<f64> {
        let (phi, q) = self.transition(t);
        &phi * &self.initial_covariance * phi.transpose() + q
    }
}

/// `L` with `L Lᵀ = Σ` for a symmetric positive semi-definite `Σ`; tiny
/// negative eigenvalues from rounding are clipped.
pub fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sigma.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::Numerical("covariance is not positive semi-definite".into()));
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn gaussian<R: Rng>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// The limiting processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LimitSdeSpec {
    /// `dY = −⅔ Y³ dt + 2 dW`, `Y(0) = 0`.
    CwCubic1d,
    /// `Y₀(t) = 2ℋt`, `ℋ ~ N(0, v)`.
    CwRandomSlope { slope_variance: f64 },
    /// `dV = −c(ω) V ‖V‖² dt + √((1+4ω²)/2) dW` in two dimensions, `V(0) = 0`.
    KuramotoCubic2d { omega: f64 },
    LinearOu(LinearOuSpec),
}

impl LimitSdeSpec {
    /// Random slope with `v = ∫ tanh²(βη) μ(dη)`.
    pub fn cw_random_slope(law: &DisorderLaw, beta: f64) -> Self {
        LimitSdeSpec::CwRandomSlope {
            slope_variance: law.expect(|e| (beta * e).tanh().powi(2)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LimitSdeSpec::CwCubic1d | LimitSdeSpec::CwRandomSlope { .. } => 1,
            LimitSdeSpec::KuramotoCubic2d { .. } => 2,
            LimitSdeSpec::LinearOu(ou) => ou.dim(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            LimitSdeSpec::CwCubic1d | LimitSdeSpec::CwRandomSlope { .. } => vec!["Y".into()],
            LimitSdeSpec::KuramotoCubic2d { .. } => vec!["V1".into(), "V2".into()],
            LimitSdeSpec::LinearOu(ou) => ou.labels.clone(),
        }
    }

    /// Cubic drift coefficient and noise amplitude of the cubic kinds.
    fn cubic(&self) -> Option<(f64, f64)> {
        match self {
            LimitSdeSpec::CwCubic1d => Some((2.0 / 3.0, 2.0)),
            LimitSdeSpec::KuramotoCubic2d { omega } => {
                Some((kuramoto_cubic_coefficient(*omega), kuramoto_limit_noise(*omega)))
            }
            _ => None,
        }
    }

    /// Whether paths can reach infinity in finite time.
    pub fn is_explosive(&self) -> bool {
        self.cubic().is_some_and(|(c, _)| c < 0.0)
    }
}

/// Localisation: stop at the first grid time with `Σ_i V_i² ≥ r_stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StoppingRule {
    None,
    Radial { r_stop: f64 },
}

impl StoppingRule {
    fn triggered(&self, v: &[f64]) -> bool {
        match self {
            StoppingRule::None => false,
            StoppingRule::Radial { r_stop } => v.iter().map(|x| x * x).sum::<f64>() >= *r_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// First grid time at which the stopping rule fired.
    pub stopped_at: Option<f64>,
}

fn validate(spec: &LimitSdeSpec, t_end: f64, dt: f64, stopping: StoppingRule) -> Result<()> {
    if !(t_end >= 0.0) || !(dt > 0.0) {
        return config("need t_end ≥ 0 and dt > 0");
    }
    if let StoppingRule::Radial { r_stop } = stopping {
        if !(r_stop > 0.0) {
            return config(format!("stopping radius must be positive, got {r_stop}"));
        }
    }
    match spec {
        LimitSdeSpec::CwRandomSlope { slope_variance } if !(*slope_variance >= 0.0) => {
            return config("slope variance must be non-negative");
        }
        LimitSdeSpec::KuramotoCubic2d { omega } if !(*omega >= 0.0 && *omega < 0.5) => {
            return config(format!("critical Kuramoto diffusion needs 0 ≤ ω < 1/2, got {omega}"));
        }
        _ => {}
    }
    if spec.cubic().is_some() && dt > CUBIC_MAX_DT {
        return config(format!("cubic diffusions need dt ≤ {CUBIC_MAX_DT}, got {dt}"));
    }
    if spec.is_explosive() && stopping == StoppingRule::None {
        return config("explosive regime requires localization: supply a stopping rule");
    }
    Ok(())
}

/// Drives one path on the grid `k·dt`, calling `record(step, t, v)` for
/// every step with `step % record_every == 0` and at the end. Returns the
/// final value and the stopping time.
fn drive<R: Rng>(
    spec: &LimitSdeSpec,
    t_end: f64,
    dt: f64,
    stopping: StoppingRule,
    rng: &mut R,
    mut record: impl FnMut(f64, &[f64]),
    record_every: usize,
) -> Result<(Vec<f64>, Option<f64>)> {
    let steps = (t_end / dt).round() as usize;
    let steps = if (steps as f64 * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        (t_end / dt).ceil() as usize
    } else {
        steps
    };
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    match spec {
        LimitSdeSpec::CwRandomSlope { slope_variance } => {
            let z: f64 = rng.sample(StandardNormal);
            let slope = 2.0 * slope_variance.sqrt() * z;
            let mut stopped = None;
            let mut v = vec![0.0];
            for k in 0..=steps {
                let t = k as f64 * h;
                if stopped.is_none() {
                    v[0] = slope * t;
                    if stopping.triggered(&v) {
                        stopped = Some(t);
                    }
                }
                if k % record_every == 0 || k == steps {
                    record(t, &v);
                }
            }
            Ok((v, stopped))
        }
        LimitSdeSpec::LinearOu(ou) => {
            let d = ou.dim();
            let (phi, q) = ou.transition(h.max(f64::MIN_POSITIVE));
            let lq = psd_factor(&q)?;
            let l0 = psd_factor(&ou.initial_covariance)?;
            let mut x = &l0 * gaussian(rng, d);
            let mut stopped = stopping.triggered(x.as_slice()).then_some(0.0);
            record(0.0, x.as_slice());
            for k in 1..=steps {
                if stopped.is_none() {
                    x = &phi * &x + &lq * gaussian(rng, d);
                    if stopping.triggered(x.as_slice()) {
                        stopped = Some(k as f64 * h);
                    }
                }
                if k % record_every == 0 || k == steps {
                    record(k as f64 * h, x.as_slice());
                }
            }
            Ok((x.as_slice().to_vec(), stopped))
        }
        LimitSdeSpec::CwCubic1d | LimitSdeSpec::KuramotoCubic2d { .. } => {
            let (c, sigma) = spec.cubic().expect("cubic kind");
            let tame = c >= 0.0;
            let d = spec.dim();
            let sd = sigma * h.sqrt();
            let mut v = vec![0.0; d];
            let mut drift = vec![0.0; d];
            let mut stopped = None;
            record(0.0, &v);
            for k in 1..=steps {
                if stopped.is_none() {
                    let r2: f64 = v.iter().map(|x| x * x).sum();
                    for (b, x) in drift.iter_mut().zip(&v) {
                        *b = -c * x * r2;
                    }
                    let factor = if tame {
                        let norm = drift.iter().map(|b| b * b).sum::<f64>().sqrt();
                        h / (1.0 + h * norm)
                    } else {
                        h
                    };
                    for (x, b) in v.iter_mut().zip(&drift) {
                        let z: f64 = rng.sample(StandardNormal);
                        *x += factor * b + sd * z;
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Numerical("limit path overflowed before stopping".into()));
                    }
                    if stopping.triggered(&v) {
                        stopped = Some(k as f64 * h);
                    }
                }
                if k % record_every == 0 || k == steps {
                    record(k as f64 * h, &v);
                }
            }
            Ok((v, stopped))
        }
    }
}

/// One path on the grid `k·dt`, recorded every `record_every` steps; after
/// a stop the path is held at its stopped value.
pub fn simulate_limit(
    spec: &LimitSdeSpec,
    t_end: f64,
    dt: f64,
    seed: SeedSpec,
    stopping: StoppingRule,
    record_every: usize,
) -> Result<LimitPath> {
    validate(spec, t_end, dt, stopping)?;
    if record_every == 0 {
        return config("record_every must be at least 1");
    }
    let mut rng = seed.rng(Stream::Dynamics);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let (_, stopped_at) = drive(
        spec,
        t_end,
        dt,
        stopping,
        &mut rng,
        |t, v| {
            times.push(t);
            values.push(v.to_vec());
        },
        record_every,
    )?;
    Ok(LimitPath {
        times,
        values,
        labels: spec.labels(),
        stopped_at,
    })
}

/// Value at time `t` (or at the stopping time) of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSample {
    pub value: Vec<f64>,
    pub stopped_at: Option<f64>,
}

/// Terminal values of `n_paths` independent paths; path `p` uses replica
/// `p` of `seed`. Runs in parallel, result order follows `p`.
pub fn terminal_samples(
    spec: &LimitSdeSpec,
    t: f64,
    n_paths: usize,
    dt: f64,
    seed: SeedSpec,
    stopping: StoppingRule,
) -> Result<Vec<TerminalSample>> {
    validate(spec, t, dt, stopping)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seed.replica(p).rng(Stream::Dynamics);
            let (value, stopped_at) = drive(spec, t, dt, stopping, &mut rng, |_, _| {}, usize::MAX)?;
            Ok(TerminalSample { value, stopped_at })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMoments {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub stopped_fraction: f64,
    pub n_paths: usize,
}

/// Monte Carlo mean and variance of `‖V(t ∧ T)‖²`.
pub fn radial_moments(
    spec: &LimitSdeSpec,
    t: f64,
    n_paths: usize,
    dt: f64,
    seed: SeedSpec,
    stopping: StoppingRule,
) -> Result<RadialMoments> {
    if n_paths < 2 {
        return Err(Error::InsufficientData("radial moments need at least 2 paths".into()));
    }
    let samples = terminal_samples(spec, t, n_paths, dt, seed, stopping)?;
    let r2: Vec<f64> = samples.iter().map(|s| s.value.iter().map(|x| x * x).sum()).collect();
    let n = n_paths as f64;
    let mean = r2.iter().sum::<f64>() / n;
    let variance = r2.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = r2.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Ok(RadialMoments {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        se_variance: ((m4 - variance * variance).max(0.0) / n).sqrt(),
        stopped_fraction: samples.iter().filter(|s| s.stopped_at.is_some()).count() as f64 / n,
        n_paths,
    })
}

/// Stationary law of `‖V‖` for the ergodic Kuramoto diffusion: density
/// `∝ ρ exp(−c ρ⁴ / (2σ²))`, so `P(‖V‖ ≤ ρ) = erf(√(c/(2σ²)) ρ²)`.
pub fn kuramoto_stationary_radius_cdf(omega: f64) -> Result<impl Fn(f64) -> f64> {
    let c = kuramoto_cubic_coefficient(omega);
    if !(c > 0.0) {
        return config(format!("no stationary law for ω = {omega} (c = {c})"));
    }
    let s2 = kuramoto_limit_noise(omega).powi(2);
    let a = (c / (2.0 * s2)).sqrt();
    Ok(move |rho: f64| if rho <= 0.0 { 0.0 } else { erf(a * rho * rho) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_coefficient_values() {
        assert_eq!(kuramoto_cubic_coefficient(0.0), 0.25);
        assert_eq!(kuramoto_cubic_coefficient(1.0 / (2.0 * 2f64.sqrt())), 0.0);
        assert_abs_diff_eq!(kuramoto_cubic_coefficient(0.25), 0.78125 / 1.792_968_75, epsilon = 1e-12);
        assert_abs_diff_eq!(kuramoto_cubic_coefficient(0.25), 0.43573, epsilon = 1e-5);
        assert_abs_diff_eq!(kuramoto_cubic_coefficient(0.4), -3.4788, epsilon = 1e-4);
        assert_eq!(kuramoto_limit_noise(0.0), 0.5f64.sqrt());
    }

    #[test]
    fn explosive_regime_needs_stopping() {
        let spec = LimitSdeSpec::KuramotoCubic2d { omega: 0.4 };
        let err = simulate_limit(&spec, 1.0, 1e-3, SeedSpec::new(1, 0), StoppingRule::None, 1).unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("localization")));
        assert!(simulate_limit(&spec, 1.0, 1e-3, SeedSpec::new(1, 0), StoppingRule::Radial { r_stop: 10.0 }, 10).is_ok());
    }

    #[test]
    fn coarse_step_rejected_for_cubic() {
        let r = simulate_limit(&LimitSdeSpec::CwCubic1d, 1.0, 1e-2, SeedSpec::new(1, 0), StoppingRule::None, 1);
        assert!(r.is_err());
    }

    #[test]
    fn degenerate_slope_is_zero() {
        let spec = LimitSdeSpec::cw_random_slope(&DisorderLaw::dirac_zero(), 1.0);
        let p = simulate_limit(&spec, 2.0, 0.1, SeedSpec::new(4, 0), StoppingRule::None, 1).unwrap();
        assert!(p.values.iter().all(|v| v[0] == 0.0));
        assert_eq!(p.times.len(), 21);
    }

    #[test]
    fn random_slope_is_linear() {
        let spec = LimitSdeSpec::cw_random_slope(&DisorderLaw::symmetric_pair(1.0).unwrap(), 1.0);
        let p = simulate_limit(&spec, 1.0, 0.25, SeedSpec::new(4, 0), StoppingRule::None, 1).unwrap();
        let slope = p.values[4][0];
        for (t, v) in p.times.iter().zip(&p.values) {
            assert_abs_diff_eq!(v[0], slope * t, epsilon = 1e-15);
        }
    }

    #[test]
    fn stopping_freezes_path() {
        let spec = LimitSdeSpec::KuramotoCubic2d { omega: 0.45 };
        let p = simulate_limit(&spec, 5.0, 1e-3, SeedSpec::new(2, 0), StoppingRule::Radial { r_stop: 4.0 }, 1).unwrap();
        let ts = p.stopped_at.expect("explosive path stops");
        let k = p.times.iter().position(|&t| t == ts).unwrap();
        let r2 = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        assert!(r2(&p.values[k]) >= 4.0);
        assert!(p.values[..k].iter().all(|v| r2(v) < 4.0));
        assert!(p.values[k..].iter().all(|v| v == &p.values[k]));
    }

    #[test]
    fn ou_transition_matches_scalar_formula() {
        let ou = LinearOuSpec::new(
            DMatrix::from_element(1, 1, -0.7),
            DMatrix::from_element(1, 1, 1.3),
            DMatrix::from_element(1, 1, 0.4),
        )
        .unwrap();
        let (phi, q) = ou.transition(0.5);
        assert_abs_diff_eq!(phi[(0, 0)], (-0.35f64).exp(), epsilon = 1e-14);
        let qv = 1.69 * (1.0 - (-0.7f64).exp()) / 1.4;
        assert_abs_diff_eq!(q[(0, 0)], qv, epsilon = 1e-13);
        let var = ou.covariance_at(2.0)[(0, 0)];
        assert_abs_diff_eq!(var, 0.4 * (-2.8f64).exp() + 1.69 * (1.0 - (-2.8f64).exp()) / 1.4, epsilon = 1e-12);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let l = psd_factor(&s).unwrap();
        assert!((&l * l.transpose() - &s).amax() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_factor(&bad).is_err());
    }

    #[test]
    fn radius_cdf_matches_quadrature() {
        let cdf = kuramoto_stationary_radius_cdf(0.0).unwrap();
        // density ∝ ρ e^{−ρ⁴/4}
        let f = |r: f64| r * (-r.powi(4) / 4.0).exp();
        let integ = |b: f64| {
            let n = 20_000;
            let h = b / n as f64;
            (0..n).map(|i| f((i as f64 + 0.5) * h) * h).sum::<f64>()
        };
        let z = integ(8.0);
        for r in [0.3, 1.0, 1.7] {
            assert_abs_diff_eq!(cdf(r), integ(r) / z, epsilon = 1e-7);
        }
        assert!(kuramoto_stationary_radius_cdf(0.4).is_err());
    }

    #[test]
    fn terminal_samples_are_reproducible() {
        let spec = LimitSdeSpec::CwCubic1d;
        let a = terminal_samples(&spec, 0.5, 16, 1e-3, SeedSpec::new(9, 0), StoppingRule::None).unwrap();
        let b = terminal_samples(&spec, 0.5, 16, 1e-3, SeedSpec::new(9, 0), StoppingRule::None).unwrap();
        assert_eq!(a, b);
    }
}
