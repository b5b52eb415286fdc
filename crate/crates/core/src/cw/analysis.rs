//! Deterministic side of the random Curie-Weiss model.
//!
//! The macroscopic state is a table `q(σ, η)` over `{−1,+1} × supp(μ)`;
//! everything here is finite-dimensional because `μ` has finite support.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::law::DisorderLaw;

/// Macroscopic spin profile: `q[k] = [q(−1, η_k), q(+1, η_k)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwProfile {
    pub law: DisorderLaw,
    pub q: Vec<[f64; 2]>,
}

impl CwProfile {
    /// Profile from the probability of `σ = +1` at each field atom.
    pub fn from_plus_probabilities(law: &DisorderLaw, p_plus: &[f64]) -> Result<Self> {
        if p_plus.len() != law.len() {
            return Err(Error::Structure(format!(
                "{} probabilities for {} field atoms",
                p_plus.len(),
                law.len()
            )));
        }
        for (a, &p) in law.atoms().iter().zip(p_plus) {
            if !(0.0..=1.0).contains(&p) {
                return config(format!("q0(+1 | {}) = {p} is outside [0,1]", a.value));
            }
        }
        Ok(Self {
            law: law.clone(),
            q: p_plus.iter().map(|&p| [1.0 - p, p]).collect(),
        })
    }

    /// The same probability of `+1` at every atom.
    pub fn constant(law: &DisorderLaw, p_plus: f64) -> Result<Self> {
        Self::from_plus_probabilities(law, &vec![p_plus; law.len()])
    }

    /// `q(σ,η) = e^{βσ(m+η)} / (2 cosh(β(m+η)))`.
    pub fn stationary(law: &DisorderLaw, beta: f64, m: f64) -> Self {
        let q = law
            .atoms()
            .iter()
            .map(|a| {
                let h = beta * (m + a.value);
                // logistic form avoids overflow for large |h|
                let plus = 1.0 / (1.0 + (-2.0 * h).exp());
                [1.0 - plus, plus]
            })
            .collect();
        Self { law: law.clone(), q }
    }

    /// `m_q = ∫ [q(1,η) − q(−1,η)] μ(dη)`.
    pub fn magnetization(&self) -> f64 {
        self.law
            .atoms()
            .iter()
            .zip(&self.q)
            .map(|(a, q)| a.weight * (q[1] - q[0]))
            .sum()
    }

    pub fn plus_probabilities(&self) -> Vec<f64> {
        self.q.iter().map(|q| q[1]).collect()
    }

    /// Cell masses `q(σ, η_k) μ(η_k)` of the joint probability.
    pub fn cell_masses(&self) -> Vec<[f64; 2]> {
        self.law
            .atoms()
            .iter()
            .zip(&self.q)
            .map(|(a, q)| [q[0] * a.weight, q[1] * a.weight])
            .collect()
    }

    /// `max_η |q(1,η) + q(−1,η) − 1|`.
    pub fn normalization_error(&self) -> f64 {
        self.q
            .iter()
            .map(|q| (q[0] + q[1] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &CwProfile) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }
}

/// Stability of a stationary magnetization under the limiting dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Neutral,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwStationaryState {
    pub m_star: f64,
    pub profile: CwProfile,
    pub stability: Stability,
    /// `β ∫ μ(dη)/cosh²(β(m_*+η)) − 1`; its sign decides `stability`.
    pub criticality_gap: f64,
}

/// Stationary states found by a grid scan plus the scan's warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryScan {
    pub states: Vec<CwStationaryState>,
    pub warnings: Vec<String>,
}

/// `β ∫ μ(dη) / cosh²(β(m+η))`.
pub fn criticality_function(law: &DisorderLaw, beta: f64, m: f64) -> f64 {
    beta * law.expect(|eta| {
        let c = (beta * (m + eta)).cosh();
        1.0 / (c * c)
    })
}

fn self_consistency(law: &DisorderLaw, beta: f64, m: f64) -> f64 {
    law.expect(|eta| (beta * (m + eta)).tanh()) - m
}

const NEUTRAL_TOL: f64 = 1e-10;

fn classify(gap: f64) -> Stability {
    if gap.abs() <= NEUTRAL_TOL {
        Stability::Neutral
    } else if gap < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 || (b - a) < tol {
            return mid;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Positive roots of the odd function `F` on `(0, 1]`, by sign changes on a
/// uniform grid of `points` nodes plus tangential near-roots.
fn positive_roots(f: &impl Fn(f64) -> f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / points as f64;
    let mut crossings = Vec::new();
    let mut tangents = Vec::new();
    let xs: Vec<f64> = (1..=points).map(|i| i as f64 * h).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in 0..xs.len() - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let (fa, fb) = (fs[i], fs[i + 1]);
        if fa == 0.0 {
            crossings.push(a);
        } else if fa * fb < 0.0 {
            crossings.push(bisect(f, a, b, 1e-15));
        } else if i > 0 {
            // local extremum of F touching zero without crossing
            let fp = fs[i - 1];
            let is_min = fa.abs() <= fp.abs() && fa.abs() <= fb.abs();
            if is_min && fa.abs() < 1e-8 && fp * fa > 0.0 {
                let (mut lo, mut hi) = (xs[i - 1], b);
                for _ in 0..200 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if f(m1).abs() < f(m2).abs() {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let x = 0.5 * (lo + hi);
                if f(x).abs() < 1e-12 {
                    tangents.push(x);
                }
            }
        }
    }
    (crossings, tangents)
}

/// All solutions of `m = ∫ tanh(β(m+η)) μ(dη)` in `[−1, 1]`.
///
/// `m = 0` is always reported. Nonzero roots come in `±` pairs because the
/// law is even. Tangential (double) roots are reported as neutral.
pub fn cw_stationary_states(law: &DisorderLaw, beta: f64, grid_points: usize) -> Result<StationaryScan> {
    if grid_points < 10 {
        return config("stationary-state scan needs at least 10 grid points");
    }
    let f = |m: f64| self_consistency(law, beta, m);
    // the scan covers [−1, 1]; by oddness only (0, 1] is evaluated
    let half = grid_points / 2;
    let (crossings, tangents) = positive_roots(&f, half);
    let mut warnings = Vec::new();
    let (fine, _) = positive_roots(&f, 2 * half);
    if fine.len() != crossings.len() {
        warnings.push(format!(
            "grid of {grid_points} points may be too coarse: {} positive roots vs {} on a doubled grid",
            crossings.len(),
            fine.len()
        ));
    }
    let mut states = Vec::new();
    let mut push = |m: f64, forced_neutral: bool| {
        let gap = criticality_function(law, beta, m) - 1.0;
        states.push(CwStationaryState {
            m_star: m,
            profile: CwProfile::stationary(law, beta, m),
            stability: if forced_neutral { Stability::Neutral } else { classify(gap) },
            criticality_gap: gap,
        });
    };
    push(0.0, false);
    for &m in &crossings {
        push(m, false);
        push(-m, false);
    }
    for &m in &tangents {
        push(m, true);
        push(-m, true);
    }
    states.sort_by(|a, b| a.m_star.total_cmp(&b.m_star));
    Ok(StationaryScan { states, warnings })
}

/// Smallest `β > 0` with `β ∫ μ(dη)/cosh²(βη) = 1`, or `None` when the left
/// side never reaches one.
pub fn critical_beta(law: &DisorderLaw) -> Option<f64> {
    let g = |b: f64| criticality_function(law, b, 0.0) - 1.0;
    // geometric scan of (1e-3, 1e4]; g(β) ≤ β so no root lies below 1
    let steps = 100_000;
    let (lo, hi) = (1e-3f64.ln(), 1e4f64.ln());
    let mut prev_b = 1e-3;
    let mut prev_g = g(prev_b);
    for i in 1..=steps {
        let b = (lo + (hi - lo) * i as f64 / steps as f64).exp();
        let gb = g(b);
        if gb == 0.0 {
            return Some(b);
        }
        if prev_g < 0.0 && gb > 0.0 {
            let root = bisect(g, prev_b, b, 1e-15);
            return Some(root);
        }
        prev_b = b;
        prev_g = gb;
    }
    None
}

/// Integrates `∂_t q = ∇^σ[e^{−βσ(m_q+η)} q]` with classical RK4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwMvTrajectory {
    pub times: Vec<f64>,
    pub profiles: Vec<CwProfile>,
}

fn mv_rhs(weights: &[f64], fields: &[f64], beta: f64, q: &[[f64; 2]], out: &mut [[f64; 2]]) {
    let m: f64 = weights.iter().zip(q).map(|(w, q)| w * (q[1] - q[0])).sum();
    for ((o, q), &eta) in out.iter_mut().zip(q).zip(fields) {
        let up = (-beta * (m + eta)).exp(); // rate of + → −
        let down = (beta * (m + eta)).exp(); // rate of − → +
        let flux = down * q[0] - up * q[1];
        *o = [-flux, flux];
    }
}

/// Solves the limiting profile equation from `q0` up to `t_end`.
///
/// Every step is recorded when `record_every == 1`; the final time is always
/// recorded.
pub fn mckean_vlasov_cw(
    q0: &CwProfile,
    beta: f64,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<CwMvTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return config(format!("need dt > 0 and t_end ≥ 0, got dt={dt}, t_end={t_end}"));
    }
    if q0.normalization_error() > 1e-10 {
        return config("initial profile is not normalised per field value");
    }
    let weights = q0.law.weights();
    let fields = q0.law.values();
    let n = q0.q.len();
    let steps = (t_end / dt).ceil() as usize;
    let record_every = record_every.max(1);
    let mut q = q0.q.clone();
    let mut times = vec![0.0];
    let mut profiles = vec![q0.clone()];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![[0.0; 2]; n],
        vec![[0.0; 2]; n],
        vec![[0.0; 2]; n],
        vec![[0.0; 2]; n],
        vec![[0.0; 2]; n],
    );
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { t_end - t } else { dt };
        mv_rhs(&weights, &fields, beta, &q, &mut k1);
        for i in 0..n {
            for s in 0..2 {
                tmp[i][s] = q[i][s] + 0.5 * h * k1[i][s];
            }
        }
        mv_rhs(&weights, &fields, beta, &tmp, &mut k2);
        for i in 0..n {
            for s in 0..2 {
                tmp[i][s] = q[i][s] + 0.5 * h * k2[i][s];
            }
        }
        mv_rhs(&weights, &fields, beta, &tmp, &mut k3);
        for i in 0..n {
            for s in 0..2 {
                tmp[i][s] = q[i][s] + h * k3[i][s];
            }
        }
        mv_rhs(&weights, &fields, beta, &tmp, &mut k4);
        for i in 0..n {
            for s in 0..2 {
                q[i][s] += h / 6.0 * (k1[i][s] + 2.0 * k2[i][s] + 2.0 * k3[i][s] + k4[i][s]);
            }
        }
        t += h;
        let drift = q.iter().map(|c| (c[0] + c[1] - 1.0).abs()).fold(0.0, f64::max);
        let outside = q
            .iter()
            .flatten()
            .any(|&p| !p.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&p));
        if drift > 1e-6 || outside {
            return Err(Error::StepSize(format!(
                "dt = {dt} lets the profile leave the simplex at t = {t:.4} (normalisation drift {drift:.3e})"
            )));
        }
        if step % record_every == 0 || step == steps {
            times.push(t);
            profiles.push(CwProfile {
                law: q0.law.clone(),
                q: q.clone(),
            });
        }
    }
    Ok(CwMvTrajectory { times, profiles })
}

/// Linearised operator around a stationary magnetization, with its
/// `L²(ν)`-orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecompositionCw {
    pub fields: Vec<f64>,
    pub mu_weights: Vec<f64>,
    /// `ν(η) = μ(η) / cosh(β(m_*+η))`.
    pub nu_weights: Vec<f64>,
    /// `matrix[(a, b)]`: coefficient of `φ(η_b)` in `(𝔏φ)(η_a)`.
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i][k] = φ_i(η_k)`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralDecompositionCw {
    pub fn nu_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.nu_weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(phi);
        (&self.matrix * v).iter().copied().collect()
    }

    /// `max_i ‖𝔏φ_i − λ_i φ_i‖_∞`.
    pub fn eigen_residual(&self) -> f64 {
        self.eigenvectors
            .iter()
            .zip(&self.eigenvalues)
            .map(|(phi, &lam)| {
                self.apply(phi)
                    .iter()
                    .zip(phi)
                    .map(|(a, b)| (a - lam * b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max_{ij} |⟨φ_i, φ_j⟩_ν − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.eigenvectors.len();
        let mut err: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                let ip = self.nu_inner(&self.eigenvectors[i], &self.eigenvectors[j]);
                err = err.max((ip - target).abs());
            }
        }
        err
    }
}

/// One shifted inverse-iteration step per eigenvector, then modified
/// Gram-Schmidt in ascending eigenvalue order.
fn polish_eigenvectors(
    sym: &DMatrix<f64>,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    order: &[usize],
) -> Vec<nalgebra::DVector<f64>> {
    let m = sym.nrows();
    let norm = sym.amax().max(1.0);
    let mut out: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(m);
    for &i in order {
        let u0 = eig.eigenvectors.column(i).into_owned();
        let shift = eig.eigenvalues[i] + 1e-10 * norm;
        let shifted = sym - DMatrix::identity(m, m) * shift;
        let mut u = match shifted.lu().solve(&u0) {
            Some(x) if x.iter().all(|v| v.is_finite()) && x.norm() > 0.0 => x.normalize(),
            _ => u0,
        };
        if u.dot(&eig.eigenvectors.column(i)) < 0.0 {
            u = -u;
        }
        for prev in &out {
            let c = prev.dot(&u);
            u -= prev * c;
        }
        out.push(u.normalize());
    }
    out
}

/// Assembles `𝔏φ(η) = cosh(β(m_*+η))φ(η) − β ∫ φ/cosh(β(m_*+·)) dμ` on
/// `supp(μ)` and diagonalises it in `L²(ν)`.
pub fn linearized_cw(law: &DisorderLaw, beta: f64, m_star: f64) -> SpectralDecompositionCw {
    let fields = law.values();
    let mu = law.weights();
    let m = fields.len();
    let cosh: Vec<f64> = fields.iter().map(|&e| (beta * (m_star + e)).cosh()).collect();
    let nu: Vec<f64> = mu.iter().zip(&cosh).map(|(w, c)| w / c).collect();
    let matrix = DMatrix::from_fn(m, m, |a, b| {
        let diag = if a == b { cosh[a] } else { 0.0 };
        diag - beta * nu[b]
    });
    // D^{1/2} 𝔏 D^{-1/2} with D = diag(ν) is symmetric
    let sq: Vec<f64> = nu.iter().map(|v| v.sqrt()).collect();
    let sym = DMatrix::from_fn(m, m, |a, b| {
        let diag = if a == b { cosh[a] } else { 0.0 };
        diag - beta * sq[a] * sq[b]
    });
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let polished = polish_eigenvectors(&sym, &eig, &order);
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = Vec::with_capacity(m);
    for (&i, u) in order.iter().zip(&polished) {
        let mut phi: Vec<f64> = (0..m).map(|k| u[k] / sq[k]).collect();
        let norm: f64 = phi.iter().zip(&nu).map(|(p, w)| w * p * p).sum::<f64>().sqrt();
        phi.iter_mut().for_each(|p| *p /= norm);
        // sign convention: positive ν-mean, or first nonzero entry positive
        let mean: f64 = phi.iter().zip(&nu).map(|(p, w)| w * p).sum();
        let flip = if mean.abs() > 1e-12 {
            mean < 0.0
        } else {
            phi.iter().find(|p| p.abs() > 1e-12).is_some_and(|p| *p < 0.0)
        };
        if flip {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        eigenvalues.push(eig.eigenvalues[i]);
        eigenvectors.push(phi);
    }
    SpectralDecompositionCw {
        fields,
        mu_weights: mu,
        nu_weights: nu,
        matrix,
        eigenvalues,
        eigenvectors,
    }
}

/// Gaussian fluctuation limit around a stationary state.
///
/// Mode `i` follows `dX_i = drift_scale·(ℋ_i − λ_i X_i) dt + noise_i dW_i`
/// with `drift_scale = 2` and `noise_i = 2 (∫φ_i² dν)^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwCltParameters {
    pub cov_x0: DMatrix<f64>,
    pub cov_h: DMatrix<f64>,
    /// `cov_hx0[(i, j)] = Cov(ℋ_i, X_j(0))`.
    pub cov_hx0: DMatrix<f64>,
    pub noise: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub drift_scale: f64,
}

impl CwCltParameters {
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Relaxation rate `2λ_i` of mode `i`.
    pub fn relaxation_rate(&self, i: usize) -> f64 {
        self.drift_scale * self.eigenvalues[i]
    }

    /// `Var X_i(t)` from the closed-form solution of the linear SDE.
    pub fn predicted_variance(&self, i: usize, t: f64) -> f64 {
        let k = self.relaxation_rate(i);
        let s = self.drift_scale;
        // X(t) = e^{-kt} X(0) + a(t) ℋ + noise, a(t) = s (1 − e^{-kt}) / k
        let (decay, a, noise_var) = if k.abs() < 1e-14 {
            (1.0, s * t, self.noise[i].powi(2) * t)
        } else {
            let e = (-k * t).exp();
            (
                e,
                s * (1.0 - e) / k,
                self.noise[i].powi(2) * (1.0 - (-2.0 * k * t).exp()) / (2.0 * k),
            )
        };
        decay * decay * self.cov_x0[(i, i)]
            + a * a * self.cov_h[(i, i)]
            + 2.0 * decay * a * self.cov_hx0[(i, i)]
            + noise_var
    }

    /// Joint covariance of `(X(0), ℋ)`, ordered `[X_0..X_{m-1}, ℋ_0..ℋ_{m-1}]`.
    pub fn joint_initial_covariance(&self) -> DMatrix<f64> {
        let m = self.modes();
        let mut c = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                c[(i, j)] = self.cov_x0[(i, j)];
                c[(m + i, m + j)] = self.cov_h[(i, j)];
                c[(m + i, j)] = self.cov_hx0[(i, j)];
                c[(j, m + i)] = self.cov_hx0[(i, j)];
            }
        }
        c
    }
}

/// Covariances of the initial fluctuations and the random drifts, plus the
/// noise amplitudes of each eigenmode.
pub fn cw_clt_parameters(spec: &SpectralDecompositionCw, beta: f64, m_star: f64) -> CwCltParameters {
    let m = spec.eigenvalues.len();
    let mu = &spec.mu_weights;
    let h: Vec<f64> = spec.fields.iter().map(|&e| beta * (m_star + e)).collect();
    let tanh: Vec<f64> = h.iter().map(|x| x.tanh()).collect();
    let sinh: Vec<f64> = h.iter().map(|x| x.sinh()).collect();
    let int = |f: &dyn Fn(usize) -> f64| -> f64 { (0..mu.len()).map(|k| mu[k] * f(k)).sum() };
    let phi = &spec.eigenvectors;
    let int_tanh: Vec<f64> = (0..m).map(|i| int(&|k| phi[i][k] * tanh[k])).collect();
    let int_sinh: Vec<f64> = (0..m).map(|i| int(&|k| phi[i][k] * sinh[k])).collect();
    let cov_x0 = DMatrix::from_fn(m, m, |i, j| int(&|k| phi[i][k] * phi[j][k]) - int_tanh[i] * int_tanh[j]);
    let cov_h = DMatrix::from_fn(m, m, |i, j| {
        int(&|k| phi[i][k] * phi[j][k] * sinh[k] * sinh[k]) - int_sinh[i] * int_sinh[j]
    });
    let cov_hx0 = DMatrix::from_fn(m, m, |i, j| {
        int(&|k| phi[i][k] * phi[j][k] * sinh[k] * tanh[k]) - int_sinh[i] * int_tanh[j]
    });
    let noise = (0..m)
        .map(|i| 2.0 * spec.nu_inner(&phi[i], &phi[i]).sqrt())
        .collect();
    CwCltParameters {
        cov_x0,
        cov_h,
        cov_hx0,
        noise,
        eigenvalues: spec.eigenvalues.clone(),
        drift_scale: 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> DisorderLaw {
        DisorderLaw::symmetric_pair(0.3).unwrap()
    }

    #[test]
    fn homogeneous_subcritical_has_single_stable_root() {
        let scan = cw_stationary_states(&DisorderLaw::dirac_zero(), 0.5, 10_000).unwrap();
        assert_eq!(scan.states.len(), 1);
        assert_eq!(scan.states[0].m_star, 0.0);
        assert_eq!(scan.states[0].stability, Stability::Stable);
    }

    #[test]
    fn homogeneous_supercritical_roots() {
        // oracle: plain bisection on m − tanh(2m) over [0.5, 1]
        let (mut a, mut b) = (0.5f64, 1.0f64);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if c - (2.0 * c).tanh() < 0.0 {
                a = c
            } else {
                b = c
            }
        }
        let m_plus = 0.5 * (a + b);
        assert!((m_plus - 0.9575).abs() < 1e-4);
        let scan = cw_stationary_states(&DisorderLaw::dirac_zero(), 2.0, 10_000).unwrap();
        let ms: Vec<f64> = scan.states.iter().map(|s| s.m_star).collect();
        assert_eq!(ms.len(), 3);
        assert!((ms[2] - m_plus).abs() < 1e-12 && (ms[0] + m_plus).abs() < 1e-12);
        assert_eq!(scan.states[1].stability, Stability::Unstable);
        assert_eq!(scan.states[0].stability, Stability::Stable);
        for s in &scan.states {
            let f = DisorderLaw::dirac_zero().expect(|e| (2.0 * (s.m_star + e)).tanh()) - s.m_star;
            assert!(f.abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_grid_is_refused() {
        assert!(cw_stationary_states(&DisorderLaw::dirac_zero(), 2.0, 3).is_err());
    }

    #[test]
    fn critical_beta_values() {
        let b = critical_beta(&DisorderLaw::dirac_zero()).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        assert!(critical_beta(&DisorderLaw::symmetric_pair(1.0).unwrap()).is_none());
        let bc = critical_beta(&pair()).unwrap();
        assert!(bc > 1.10 && bc < 1.20, "{bc}");
        assert!((criticality_function(&pair(), bc, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_pair_criticality_maximum_is_below_one() {
        // scan β ↦ β / cosh²(β)
        let max = (1..200_000)
            .map(|i| {
                let b = i as f64 * 1e-4;
                b / b.cosh().powi(2)
            })
            .fold(0.0, f64::max);
        assert!(max < 0.45 && max > 0.44, "{max}");
    }

    #[test]
    fn critical_pair_root_is_neutral() {
        let law = pair();
        let bc = critical_beta(&law).unwrap();
        let scan = cw_stationary_states(&law, bc, 10_000).unwrap();
        let zero = scan.states.iter().find(|s| s.m_star == 0.0).unwrap();
        assert_eq!(zero.stability, Stability::Neutral);
        assert!(zero.criticality_gap.abs() < 1e-10);
    }

    #[test]
    fn homogeneous_critical_operator_is_zero() {
        let s = linearized_cw(&DisorderLaw::dirac_zero(), 1.0, 0.0);
        assert_eq!(s.eigenvalues.len(), 1);
        assert!(s.eigenvalues[0].abs() < 1e-15);
        assert!((s.eigenvectors[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn critical_kernel_is_inverse_cosh() {
        let law = DisorderLaw::new(vec![(-0.8, 0.1), (-0.3, 0.25), (0.0, 0.3), (0.3, 0.25), (0.8, 0.1)]).unwrap();
        let bc = critical_beta(&law).unwrap();
        let s = linearized_cw(&law, bc, 0.0);
        assert!(s.eigenvalues[0].abs() < 1e-10);
        for &l in &s.eigenvalues[1..] {
            assert!(l >= 1.0 - 1e-8);
        }
        let target: Vec<f64> = law.values().iter().map(|e| 1.0 / (bc * e).cosh()).collect();
        let ratio = s.eigenvectors[0][0] / target[0];
        for (p, t) in s.eigenvectors[0].iter().zip(&target) {
            assert!((p - ratio * t).abs() < 1e-10);
        }
        assert!(s.eigen_residual() < 1e-10);
        assert!(s.orthonormality_error() < 1e-10);
    }

    #[test]
    fn operator_is_nu_self_adjoint() {
        let law = DisorderLaw::new(vec![(-1.0, 0.2), (-0.2, 0.3), (0.2, 0.3), (1.0, 0.2)]).unwrap();
        let s = linearized_cw(&law, 0.9, 0.1);
        let f = [0.3, -1.2, 0.7, 2.0];
        let g = [1.1, 0.4, -0.5, 0.9];
        let lhs = s.nu_inner(&s.apply(&f), &g);
        let rhs = s.nu_inner(&f, &s.apply(&g));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_clt_has_no_random_drift() {
        let law = DisorderLaw::dirac_zero();
        let s = linearized_cw(&law, 0.7, 0.0);
        let p = cw_clt_parameters(&s, 0.7, 0.0);
        assert_eq!(p.cov_h[(0, 0)], 0.0);
        assert_eq!(p.cov_hx0[(0, 0)], 0.0);
        assert!((p.cov_x0[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((p.noise[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_drift_variance_on_kernel() {
        let law = pair();
        let bc = critical_beta(&law).unwrap();
        let s = linearized_cw(&law, bc, 0.0);
        let p = cw_clt_parameters(&s, bc, 0.0);
        // φ_0 = c / cosh(βη): Var ℋ_0 = c² ∫ tanh²(βη) dμ
        let c = s.eigenvectors[0][0] * (bc * law.values()[0]).cosh();
        let oracle = c * c * law.expect(|e| (bc * e).tanh().powi(2));
        assert!((p.cov_h[(0, 0)] - oracle).abs() < 1e-12);
        for cov in [&p.cov_x0, &p.cov_h, &p.joint_initial_covariance()] {
            let ev = SymmetricEigen::new(cov.clone()).eigenvalues;
            assert!(ev.iter().all(|&l| l > -1e-10));
        }
    }

    #[test]
    fn mv_holds_stationary_profiles() {
        for (law, beta) in [(DisorderLaw::dirac_zero(), 2.0), (pair(), 1.5)] {
            let scan = cw_stationary_states(&law, beta, 10_000).unwrap();
            for s in scan.states {
                let tr = mckean_vlasov_cw(&s.profile, beta, 10.0, 1e-2, 1).unwrap();
                let dev = tr.profiles.iter().map(|p| p.sup_distance(&s.profile)).fold(0.0, f64::max);
                assert!(dev < 1e-8, "m* = {}: {dev}", s.m_star);
            }
        }
    }

    #[test]
    fn mv_subcritical_relaxation_is_monotone() {
        let law = DisorderLaw::dirac_zero();
        let q0 = CwProfile::constant(&law, 0.75).unwrap();
        let tr = mckean_vlasov_cw(&q0, 0.6, 20.0, 1e-2, 1).unwrap();
        let ms: Vec<f64> = tr.profiles.iter().map(CwProfile::magnetization).collect();
        assert!((ms[0] - 0.5).abs() < 1e-15);
        assert!(ms.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(ms.last().unwrap().abs() < 1e-3);
        for p in &tr.profiles {
            assert!(p.normalization_error() < 1e-9);
        }
    }

    #[test]
    fn mv_rejects_huge_steps() {
        let law = DisorderLaw::dirac_zero();
        let q0 = CwProfile::constant(&law, 0.9).unwrap();
        assert!(matches!(
            mckean_vlasov_cw(&q0, 3.0, 10.0, 5.0, 1),
            Err(Error::StepSize(_))
        ));
    }

    #[test]
    fn invalid_initial_probabilities() {
        assert!(CwProfile::from_plus_probabilities(&pair(), &[0.5, 1.2]).is_err());
    }
}
