//! Deterministic side of the Kuramoto model.
//!
//! Densities are stored by their Fourier coefficients
//! `q(x, η) = Σ_h c_h(η) e^{ihx}` with `c_0 = 1/(2π)` and `c_{−h} = c̄_h`.
//! With `C = Σ_η μ(η) c_1(η)` the interaction `θ r sin(Ψ − x)` equals
//! `iπθ (C e^{ix} − C̄ e^{−ix})`, and the McKean–Vlasov equation becomes
//!
//! ```text
//! ċ_h = −½h² c_h − ihωη c_h + πθh (C c_{h−1} − C̄ c_{h+1}).
//! ```

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::law::DisorderLaw;
use crate::params::KuramotoParams;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which condition sets the stability threshold of the incoherent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalBranch {
    /// `θ_c` itself.
    ThetaC,
    /// The `θ = 2` bound of the symmetric two-point law.
    Two,
    /// Found numerically from the first-harmonic block.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCritical {
    pub theta_c: f64,
    /// Coupling at which `q = 1/(2π)` loses linear stability.
    pub effective: f64,
    pub branch: CriticalBranch,
}

/// `θ_c = [∫ μ(dη) / (1 + 4ω²η²)]^{−1}` and the effective threshold.
///
/// For `½(δ₁ + δ₋₁)` the threshold is `min(θ_c, 2)`. For a single atom it
/// is `θ_c`. Otherwise it is located by bisection on the spectral abscissa
/// of the first-harmonic block.
pub fn theta_critical(omega: f64, law: &DisorderLaw) -> ThetaCritical {
    let theta_c = 1.0 / law.expect(|e| 1.0 / (1.0 + 4.0 * omega * omega * e * e));
    if law.is_unit_pair() {
        return if theta_c <= 2.0 {
            ThetaCritical {
                theta_c,
                effective: theta_c,
                branch: CriticalBranch::ThetaC,
            }
        } else {
            ThetaCritical {
                theta_c,
                effective: 2.0,
                branch: CriticalBranch::Two,
            }
        };
    }
    if law.len() == 1 {
        return ThetaCritical {
            theta_c,
            effective: theta_c,
            branch: CriticalBranch::ThetaC,
        };
    }
    let abscissa = |theta: f64| {
        first_harmonic_block(law, theta, omega, 1)
            .schur()
            .eigenvalues()
            .map_or(f64::NAN, |ev| ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    };
    // at θ = 0 the abscissa is −½; it grows with θ
    let mut hi = theta_c.max(1.0);
    while abscissa(hi) < 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if abscissa(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let effective = 0.5 * (lo + hi);
    let branch = if (effective - theta_c).abs() <= 1e-9 * theta_c {
        CriticalBranch::ThetaC
    } else {
        CriticalBranch::Numeric
    };
    ThetaCritical {
        theta_c,
        effective,
        branch,
    }
}

/// Block of the linearised operator acting on `e^{ihx} a(η)` for `h = ±1`:
/// `(−½ + ihωη_k) a_k + (θ/2) Σ_l μ_l a_l`.
fn first_harmonic_block(law: &DisorderLaw, theta: f64, omega: f64, h: i64) -> DMatrix<Complex64> {
    let m = law.len();
    let w = law.weights();
    let eta = law.values();
    DMatrix::from_fn(m, m, |k, l| {
        let mut v = Complex64::new(0.5 * theta * w[l], 0.0);
        if k == l {
            v += Complex64::new(-0.5, h as f64 * omega * eta[k]);
        }
        v
    })
}

/// Largest real growth rate of the first harmonic around `q = 1/(2π)` for
/// the Euler–Maruyama chain with step `dt`, per unit microscopic time: the
/// root `λ` of `(θ dt/2) Σ_k μ_k a_k/(e^{λ dt} − a_k) = 1` with
/// `a_k = e^{(iωη_k − ½) dt}`. Tends to the spectral abscissa of the
/// first-harmonic block as `dt → 0`.
pub fn euler_kernel_rate(theta: f64, omega: f64, law: &DisorderLaw, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return config(format!("dt must be positive, got {dt}"));
    }
    let w = law.weights();
    let a: Vec<Complex64> = law
        .values()
        .iter()
        .map(|&e| Complex64::new(-0.5 * dt, omega * e * dt).exp())
        .collect();
    let f = |lambda: f64| -> f64 {
        let z = (lambda * dt).exp();
        let s: Complex64 = w.iter().zip(&a).map(|(w, a)| *w * a / (z - a)).sum();
        0.5 * theta * dt * s.re - 1.0
    };
    let (lo, hi, steps) = (-0.45, 2.0 * theta, 20_000);
    let mut upper = hi;
    let mut f_upper = f(upper);
    for i in 1..=steps {
        let l = hi - (hi - lo) * i as f64 / steps as f64;
        let fl = f(l);
        if f_upper < 0.0 && fl >= 0.0 {
            let (mut a, mut b) = (l, upper);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if f(mid) >= 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(0.5 * (a + b));
        }
        upper = l;
        f_upper = fl;
    }
    Err(Error::Numerical("no real first-harmonic rate above −0.45".into()))
}

/// Fourier–Galerkin representation of `q(x, η)`, harmonics `0..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoDensity {
    pub law: DisorderLaw,
    pub k: usize,
    /// `coeffs[atom][h]` for `h = 0..=k`.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl KuramotoDensity {
    pub fn uniform(law: &DisorderLaw, k: usize) -> Self {
        let mut row = vec![ZERO; k + 1];
        row[0] = Complex64::new(1.0 / TAU, 0.0);
        Self {
            law: law.clone(),
            k,
            coeffs: vec![row; law.len()],
        }
    }

    /// Projects a non-negative density `f(x, η)` onto harmonics `0..=k` and
    /// normalises each `f(·, η)` to a probability.
    pub fn from_fn(law: &DisorderLaw, k: usize, f: &dyn Fn(f64, f64) -> f64) -> Result<Self> {
        let n = (8 * k).max(1024);
        let dx = TAU / n as f64;
        let mut coeffs = Vec::with_capacity(law.len());
        for eta in law.values() {
            let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * dx, eta)).collect();
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return config(format!("density for η = {eta} is negative or not finite"));
            }
            let mass: f64 = vals.iter().sum::<f64>() * dx;
            if !(mass > 0.0) {
                return config(format!("density for η = {eta} has zero mass"));
            }
            let row = (0..=k)
                .map(|h| {
                    let s: Complex64 = vals
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * Complex64::from_polar(1.0, -(h as f64) * i as f64 * dx))
                        .sum();
                    s * dx / (TAU * mass)
                })
                .collect();
            coeffs.push(row);
        }
        Ok(Self {
            law: law.clone(),
            k,
            coeffs,
        })
    }

    /// `c_h(η_atom)` for any integer `h`, zero beyond the truncation.
    pub fn coeff(&self, atom: usize, h: i64) -> Complex64 {
        let a = h.unsigned_abs() as usize;
        if a > self.k {
            return ZERO;
        }
        let c = self.coeffs[atom][a];
        if h < 0 {
            c.conj()
        } else {
            c
        }
    }

    pub fn eval(&self, atom: usize, x: f64) -> f64 {
        let row = &self.coeffs[atom];
        row[0].re + 2.0 * (1..=self.k).map(|h| (row[h] * Complex64::from_polar(1.0, h as f64 * x)).re).sum::<f64>()
    }

    /// Density of atom `atom` on `n` equispaced points of `[0, 2π)`.
    pub fn values_on_grid(&self, atom: usize, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.eval(atom, TAU * i as f64 / n as f64)).collect()
    }

    /// Smallest value over all atoms on a 512-point grid.
    pub fn min_on_grid(&self) -> f64 {
        (0..self.law.len())
            .flat_map(|a| self.values_on_grid(a, 512))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_η |2π c_0(η) − 1|`.
    pub fn normalization_error(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|r| (TAU * r[0] - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// `C = Σ_η μ(η) c_1(η)`.
    pub fn total_c1(&self) -> Complex64 {
        if self.k == 0 {
            return ZERO;
        }
        self.law
            .weights()
            .iter()
            .zip(&self.coeffs)
            .map(|(w, r)| r[1] * *w)
            .sum()
    }

    /// `r e^{iΨ} = ∫∫ e^{ix} q dx μ(dη) = 2π C̄`.
    pub fn order_parameter(&self) -> Complex64 {
        self.total_c1().conj() * TAU
    }

    /// Largest coefficient difference over common harmonics, with the
    /// excess harmonics of the longer expansion counted against zero.
    pub fn coeff_distance(&self, other: &KuramotoDensity) -> f64 {
        let k = self.k.max(other.k) as i64;
        let mut d: f64 = 0.0;
        for a in 0..self.law.len().min(other.law.len()) {
            for h in 0..=k {
                d = d.max((self.coeff(a, h) - other.coeff(a, h)).norm());
            }
        }
        d
    }
}

/// Diagonal linear rates `−½h² − ihωη` per atom and harmonic.
fn linear_rates(law: &DisorderLaw, k: usize, omega: f64) -> Vec<Vec<Complex64>> {
    law.values()
        .iter()
        .map(|&eta| {
            (0..=k)
                .map(|h| {
                    let hf = h as f64;
                    Complex64::new(-0.5 * hf * hf, -hf * omega * eta)
                })
                .collect()
        })
        .collect()
}

/// Coupling term `πθh (C c_{h−1} − C̄ c_{h+1})` with `c_{k+1} := 0`.
fn coupling(weights: &[f64], theta: f64, c: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let k = c[0].len() - 1;
    let total: Complex64 = if k == 0 {
        ZERO
    } else {
        weights.iter().zip(c).map(|(w, r)| r[1] * *w).sum()
    };
    c.iter()
        .map(|row| {
            (0..=k)
                .map(|h| {
                    if h == 0 {
                        return ZERO;
                    }
                    let next = if h < k { row[h + 1] } else { ZERO };
                    (total * row[h - 1] - total.conj() * next) * (PI * theta * h as f64)
                })
                .collect()
        })
        .collect()
}

/// Full right-hand side `ċ_h(η)` of the Galerkin system, `h = 0..=k`.
pub fn galerkin_rhs(q: &KuramotoDensity, theta: f64, omega: f64) -> Vec<Vec<Complex64>> {
    let lin = linear_rates(&q.law, q.k, omega);
    let nl = coupling(&q.law.weights(), theta, &q.coeffs);
    q.coeffs
        .iter()
        .zip(&lin)
        .zip(&nl)
        .map(|((c, l), n)| (0..=q.k).map(|h| l[h] * c[h] + n[h]).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoMvTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<KuramotoDensity>,
}

impl KuramotoMvTrajectory {
    /// `|r(t)|` at each recorded time.
    pub fn order_parameter_modulus(&self) -> Vec<f64> {
        self.densities.iter().map(|d| d.order_parameter().norm()).collect()
    }

    pub fn last(&self) -> &KuramotoDensity {
        self.densities.last().expect("trajectory holds the initial density")
    }
}

/// Integrates the Galerkin system with integrating-factor RK4: the diagonal
/// part is solved exactly, RK4 handles the coupling.
pub fn mckean_vlasov_kuramoto(
    q0: &KuramotoDensity,
    theta: f64,
    omega: f64,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<KuramotoMvTrajectory> {
    if q0.k < 8 {
        return config(format!("Galerkin truncation must be at least 8, got {}", q0.k));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) || record_every == 0 {
        return config("need dt > 0, t_end ≥ 0 and record_every ≥ 1");
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let w = q0.law.weights();
    let lin = linear_rates(&q0.law, q0.k, omega);
    let e1: Vec<Vec<Complex64>> = lin.iter().map(|r| r.iter().map(|l| (l * h).exp()).collect()).collect();
    let e2: Vec<Vec<Complex64>> = lin.iter().map(|r| r.iter().map(|l| (l * (0.5 * h)).exp()).collect()).collect();
    let combine = |a: &[Vec<Complex64>], f: &dyn Fn(usize, usize, Complex64) -> Complex64| -> Vec<Vec<Complex64>> {
        a.iter()
            .enumerate()
            .map(|(i, r)| r.iter().enumerate().map(|(j, v)| f(i, j, *v)).collect())
            .collect()
    };
    let mut c = q0.coeffs.clone();
    let mut times = vec![0.0];
    let mut densities = vec![q0.clone()];
    for step in 1..=steps {
        let k1 = coupling(&w, theta, &c);
        let y2 = combine(&c, &|i, j, v| e2[i][j] * (v + k1[i][j] * (0.5 * h)));
        let k2 = coupling(&w, theta, &y2);
        let y3 = combine(&c, &|i, j, v| e2[i][j] * v + k2[i][j] * (0.5 * h));
        let k3 = coupling(&w, theta, &y3);
        let y4 = combine(&c, &|i, j, v| e1[i][j] * v + e2[i][j] * k3[i][j] * h);
        let k4 = coupling(&w, theta, &y4);
        c = combine(&c, &|i, j, v| {
            e1[i][j] * v + (e1[i][j] * k1[i][j] + e2[i][j] * (k2[i][j] + k3[i][j]) * 2.0 + k4[i][j]) * (h / 6.0)
        });
        if c.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::StepSize(format!("Galerkin solution blew up at t = {}", step as f64 * h)));
        }
        if step % record_every == 0 || step == steps {
            times.push(step as f64 * h);
            densities.push(KuramotoDensity {
                law: q0.law.clone(),
                k: q0.k,
                coeffs: c.clone(),
            });
        }
    }
    Ok(KuramotoMvTrajectory { times, densities })
}

/// Reruns with twice the harmonics and returns the final coefficient
/// distance; errors when it exceeds `1e-6`.
pub fn galerkin_truncation_error(q0: &KuramotoDensity, theta: f64, omega: f64, t_end: f64, dt: f64) -> Result<f64> {
    let mut wide = KuramotoDensity::uniform(&q0.law, 2 * q0.k);
    for (dst, src) in wide.coeffs.iter_mut().zip(&q0.coeffs) {
        dst[..src.len()].copy_from_slice(src);
    }
    let a = mckean_vlasov_kuramoto(q0, theta, omega, t_end, dt, usize::MAX)?;
    let b = mckean_vlasov_kuramoto(&wide, theta, omega, t_end, dt, usize::MAX)?;
    let d = a.last().coeff_distance(b.last());
    if d > 1e-6 {
        return Err(Error::Numerical(format!(
            "doubling the truncation {} changes the solution by {d:.3e}",
            q0.k
        )));
    }
    Ok(d)
}

/// Stationary density for a given `r_*` and the self-consistency residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoStationaryState {
    pub r_star: f64,
    /// Grid `x_i = 2πi/n`, `i < n`.
    pub grid: Vec<f64>,
    /// `density[atom][i] = q_*(x_i, η_atom)`.
    pub density: Vec<Vec<f64>>,
    /// Normalising constant per atom.
    pub z_star: Vec<f64>,
    /// `∫∫ cos x q_* dx μ(dη)`.
    pub mapped_r: f64,
    /// `|mapped_r − r_star|`.
    pub residual: f64,
}

struct StationaryProfile {
    density: Vec<Vec<f64>>,
    z_star: Vec<f64>,
    mapped_r: f64,
}

/// Stationary density for `Ψ_* = 0`. With `φ(x) = 2(ωηx + θr cos x)`,
/// `q_* ∝ e^{φ(x)} [e^{4πωη} ∫_x^{2π} e^{−φ} + ∫_0^x e^{−φ}]`.
/// Cumulative integrals use a four-point rule on each cell.
fn stationary_profile(r: f64, theta: f64, omega: f64, law: &DisorderLaw, n: usize) -> Result<StationaryProfile> {
    let h = TAU / n as f64;
    let mut density = Vec::with_capacity(law.len());
    let mut z_star = Vec::with_capacity(law.len());
    let mut mapped_r = 0.0;
    for atom in law.atoms() {
        let eta = atom.value;
        let phi = |x: f64| 2.0 * (omega * eta * x + theta * r * x.cos());
        // e^{−φ} on x_{−1}..x_{n+1}
        let g: Vec<f64> = (0..n + 3).map(|i| (-phi((i as f64 - 1.0) * h)).exp()).collect();
        let mut cum = vec![0.0; n + 1];
        for i in 0..n {
            let cell = h / 24.0 * (-g[i] + 13.0 * g[i + 1] + 13.0 * g[i + 2] - g[i + 3]);
            cum[i + 1] = cum[i] + cell;
        }
        let total = cum[n];
        let wrap = (4.0 * PI * omega * eta).exp();
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 * h;
                phi(x).exp() * (wrap * (total - cum[i]) + cum[i])
            })
            .collect();
        let z: f64 = vals.iter().sum::<f64>() * h;
        if !z.is_finite() || !(z > 0.0) {
            return Err(Error::Numerical(format!("stationary density for η = {eta} overflows")));
        }
        let vals: Vec<f64> = vals.iter().map(|v| v / z).collect();
        mapped_r += atom.weight * h * vals.iter().enumerate().map(|(i, v)| v * (i as f64 * h).cos()).sum::<f64>();
        density.push(vals);
        z_star.push(z);
    }
    Ok(StationaryProfile {
        density,
        z_star,
        mapped_r,
    })
}

/// `r ↦ ∫∫ cos x q_*(x, η; r) dx μ(dη)`.
pub fn self_consistency_map(r: f64, params: &KuramotoParams, grid: usize) -> Result<f64> {
    Ok(stationary_profile(r, params.theta, params.omega, &params.law, grid)?.mapped_r)
}

/// Stationary density at `r_guess`, with the self-consistency residual.
/// Errors when doubling the grid moves the mapped `r` by more than `1e-6`.
pub fn kuramoto_stationary(r_guess: f64, params: &KuramotoParams, grid: usize) -> Result<KuramotoStationaryState> {
    if grid < 512 {
        return config(format!("stationary quadrature needs at least 512 points, got {grid}"));
    }
    if !(0.0..=1.0).contains(&r_guess) {
        return config(format!("r must lie in [0, 1], got {r_guess}"));
    }
    let p = stationary_profile(r_guess, params.theta, params.omega, &params.law, grid)?;
    let fine = stationary_profile(r_guess, params.theta, params.omega, &params.law, 2 * grid)?;
    if (fine.mapped_r - p.mapped_r).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "quadrature not converged: {} vs {} on doubled grid",
            p.mapped_r, fine.mapped_r
        )));
    }
    Ok(KuramotoStationaryState {
        r_star: r_guess,
        grid: (0..grid).map(|i| TAU * i as f64 / grid as f64).collect(),
        density: p.density,
        z_star: p.z_star,
        mapped_r: p.mapped_r,
        residual: (p.mapped_r - r_guess).abs(),
    })
}

/// All fixed points of the self-consistency map in `[0, 1]`, ascending,
/// `0` always first. Sign changes of `map(r) − r` are located on a
/// 400-point scan and refined by bisection to `1e-10`.
pub fn solve_r_star(params: &KuramotoParams, grid: usize) -> Result<Vec<f64>> {
    if grid < 512 {
        return config(format!("stationary quadrature needs at least 512 points, got {grid}"));
    }
    let g = |r: f64| self_consistency_map(r, params, grid).map(|m| m - r);
    let mut roots = vec![0.0];
    let scan = 400;
    let pts: Vec<f64> = std::iter::once(1e-6).chain((1..=scan).map(|i| i as f64 / scan as f64)).collect();
    let mut prev = (pts[0], g(pts[0])?);
    for &r in &pts[1..] {
        let cur = (r, g(r)?);
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1 * cur.1 < 0.0 {
            let (mut lo, mut hi, glo) = (prev.0, cur.0, prev.1);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if g(mid)? * glo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    Ok(roots)
}

/// Matrix of the linearised operator on `e^{ihx} a(η)`, `1 ≤ |h| ≤ k`,
/// with its eigen-decomposition.
///
/// The `η`-only functions (`h = 0`) always lie in the kernel and are left
/// out of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecompositionK {
    pub theta: f64,
    pub omega: f64,
    pub law: DisorderLaw,
    pub k: usize,
    /// `(h, atom)` for each basis index.
    pub index: Vec<(i64, usize)>,
    pub matrix: DMatrix<Complex64>,
    /// Sorted by real part descending, then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<DVector<Complex64>>,
    /// `{0, −½+2ω², −h²/2 ± ihω}` for the symmetric two-point law at
    /// `θ = 1+4ω²`, each twice.
    pub analytic: Option<Vec<Complex64>>,
}

impl SpectralDecompositionK {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of eigenvalues with modulus below `tol`.
    pub fn kernel_dimension(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|z| z.norm() < tol).count()
    }

    /// Coordinates of `cos x − 2ωη sin x` and `sin x + 2ωη cos x`.
    pub fn kernel_candidates(&self) -> [DVector<Complex64>; 2] {
        let eta = self.law.values();
        let v1 = DVector::from_iterator(
            self.index.len(),
            self.index.iter().map(|&(h, a)| match h {
                1 => Complex64::new(0.5, self.omega * eta[a]),
                -1 => Complex64::new(0.5, -self.omega * eta[a]),
                _ => ZERO,
            }),
        );
        // sin x + 2ωη cos x = −i(½ + iωη) e^{ix} + conj
        let v2 = DVector::from_iterator(
            self.index.len(),
            self.index.iter().map(|&(h, a)| match h {
                1 => -I * Complex64::new(0.5, self.omega * eta[a]),
                -1 => I * Complex64::new(0.5, -self.omega * eta[a]),
                _ => ZERO,
            }),
        );
        [v1, v2]
    }

    /// `max ‖𝔏v‖/‖v‖` over the two kernel candidates.
    pub fn kernel_residual(&self) -> f64 {
        self.kernel_candidates()
            .iter()
            .map(|v| (&self.matrix * v).norm() / v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest distance in a nearest-unused matching of the analytic set.
    pub fn analytic_mismatch(&self) -> Option<f64> {
        let reference = self.analytic.as_ref()?;
        Some(match_spectra(reference, &self.eigenvalues))
    }

    /// `max ‖𝔏v − λv‖` over the computed pairs.
    pub fn eigen_residual(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(l, v)| (&self.matrix * v - v * *l).norm())
            .fold(0.0, f64::max)
    }
}

/// Greedy nearest matching; returns the largest matched distance, or
/// infinity when `computed` is shorter than `reference`.
pub fn match_spectra(reference: &[Complex64], computed: &[Complex64]) -> f64 {
    if computed.len() < reference.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for r in reference {
        let (j, d) = computed
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, c)| (j, (c - r).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// `{0, −½+2ω², −h²/2 ± ihω (2 ≤ h ≤ k)}`, each with multiplicity two.
pub fn analytic_kuramoto_spectrum(omega: f64, k: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO, ZERO, Complex64::new(-0.5 + 2.0 * omega * omega, 0.0)];
    out.push(out[2]);
    for h in 2..=k {
        let hf = h as f64;
        for s in [1.0, -1.0] {
            let z = Complex64::new(-0.5 * hf * hf, s * hf * omega);
            out.push(z);
            out.push(z);
        }
    }
    out
}

/// Assembles `𝔏φ = ½φ'' + ωηφ' + θ[cos x ⟨cos, φ⟩ + sin x ⟨sin, φ⟩]`
/// around `q = 1/(2π)` on `e^{ihx}` times functions of `η`.
pub fn linearized_kuramoto(params: &KuramotoParams, k: usize) -> Result<SpectralDecompositionK> {
    if k < 8 {
        return config(format!("truncation must be at least 8, got {k}"));
    }
    let m = params.law.len();
    let eta = params.law.values();
    let hs: Vec<i64> = (-(k as i64)..=-1).chain(1..=k as i64).collect();
    let index: Vec<(i64, usize)> = hs.iter().flat_map(|&h| (0..m).map(move |a| (h, a))).collect();
    let dim = index.len();
    let mut matrix = DMatrix::from_element(dim, dim, ZERO);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut eigenvectors = Vec::with_capacity(dim);
    for (b, &h) in hs.iter().enumerate() {
        let off = b * m;
        let block = if h.abs() == 1 {
            first_harmonic_block(&params.law, params.theta, params.omega, h)
        } else {
            let hf = h as f64;
            DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    Complex64::new(-0.5 * hf * hf, hf * params.omega * eta[i])
                } else {
                    ZERO
                }
            })
        };
        matrix.view_mut((off, off), (m, m)).copy_from(&block);
        for (lambda, v) in block_eigenpairs(&block)? {
            let mut full = DVector::from_element(dim, ZERO);
            full.rows_mut(off, m).copy_from(&v);
            eigenvalues.push(lambda);
            eigenvectors.push(full);
        }
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (eigenvalues[a], eigenvalues[b]);
        y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im))
    });
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let eigenvectors: Vec<DVector<Complex64>> = order.iter().map(|&i| eigenvectors[i].clone()).collect();
    let at_critical = (params.theta - (1.0 + 4.0 * params.omega * params.omega)).abs() < 1e-12;
    let analytic = (params.law.is_unit_pair() && at_critical).then(|| analytic_kuramoto_spectrum(params.omega, k));
    Ok(SpectralDecompositionK {
        theta: params.theta,
        omega: params.omega,
        law: params.law.clone(),
        k,
        index,
        matrix,
        eigenvalues,
        eigenvectors,
        analytic,
    })
}

fn block_eigenpairs(block: &DMatrix<Complex64>) -> Result<Vec<(Complex64, DVector<Complex64>)>> {
    let m = block.nrows();
    let diagonal = (0..m).all(|i| (0..m).all(|j| i == j || block[(i, j)] == ZERO));
    if diagonal {
        return Ok((0..m)
            .map(|i| {
                let mut v = DVector::from_element(m, ZERO);
                v[i] = Complex64::new(1.0, 0.0);
                (block[(i, i)], v)
            })
            .collect());
    }
    let values = block
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Schur form did not converge".into()))?;
    values
        .iter()
        .map(|&lambda| {
            let shifted = block - DMatrix::from_diagonal_element(m, m, lambda);
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
            let j = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            let v: DVector<Complex64> = v_t.row(j).transpose().map(|z| z.conj());
            Ok((lambda, v))
        })
        .collect()
}

/// Linear Gaussian system for the harmonics `(cos hx, sin hx, η cos hx,
/// η sin hx)` of the fluctuation field, `h = 1..=h_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoCltSystem {
    pub theta: f64,
    pub omega: f64,
    /// `drift[h−1]` is the 4×4 block of harmonic `h`.
    pub drift: Vec<Matrix4<f64>>,
    /// Per-component noise amplitude of harmonic `h`: `h/√2`.
    pub noise: Vec<f64>,
    /// Covariance of the fluctuations of i.i.d. uniform angles: `½ I`.
    pub initial_covariance: Vec<Matrix4<f64>>,
}

/// Drift block of harmonic `h`.
pub fn clt_drift_block(theta: f64, omega: f64, h: usize) -> Matrix4<f64> {
    let hf = h as f64;
    let top = 0.5 * (if h == 1 { theta } else { 0.0 } - hf * hf);
    let bottom = -0.5 * hf * hf;
    let c = hf * omega;
    Matrix4::new(
        top, 0.0, 0.0, -c, //
        0.0, top, c, 0.0, //
        0.0, -c, bottom, 0.0, //
        c, 0.0, 0.0, bottom,
    )
}

pub fn kuramoto_clt_system(params: &KuramotoParams, h_max: usize) -> Result<KuramotoCltSystem> {
    params.require_unit_pair()?;
    if h_max == 0 {
        return config("h_max must be at least 1");
    }
    Ok(KuramotoCltSystem {
        theta: params.theta,
        omega: params.omega,
        drift: (1..=h_max).map(|h| clt_drift_block(params.theta, params.omega, h)).collect(),
        noise: (1..=h_max).map(|h| h as f64 / 2f64.sqrt()).collect(),
        initial_covariance: vec![Matrix4::identity() * 0.5; h_max],
    })
}

impl KuramotoCltSystem {
    pub fn h_max(&self) -> usize {
        self.drift.len()
    }

    fn diffusion(&self, h: usize) -> Matrix4<f64> {
        let s = self.noise[h - 1];
        Matrix4::identity() * (s * s)
    }

    /// Solves `AΣ + ΣAᵀ + Q = 0` through the 16×16 Kronecker system.
    /// `None` when the block is not strictly stable.
    pub fn stationary_covariance(&self, h: usize) -> Option<Matrix4<f64>> {
        let a = self.drift[h - 1];
        let ev = a.complex_eigenvalues();
        if ev.iter().any(|z| z.re >= -1e-12) {
            return None;
        }
        let id = Matrix4::<f64>::identity();
        let kron = id.kronecker(&a) + a.kronecker(&id);
        let q = self.diffusion(h);
        let rhs = SVector::<f64, 16>::from_iterator(q.iter().map(|v| -v));
        let sol = SMatrix::<f64, 16, 16>::from_iterator(kron.iter().copied()).lu().solve(&rhs)?;
        let s = Matrix4::from_iterator(sol.iter().copied());
        Some((s + s.transpose()) * 0.5)
    }

    /// `Σ(t)` from `Σ(0) = initial_covariance`, by RK4 on
    /// `Σ' = AΣ + ΣAᵀ + Q`.
    pub fn covariance_at(&self, h: usize, t: f64) -> Matrix4<f64> {
        let a = self.drift[h - 1];
        let q = self.diffusion(h);
        let f = |s: &Matrix4<f64>| a * s + s * a.transpose() + q;
        let rate = a.abs().max().max(1.0);
        let steps = ((t * rate / 0.01).ceil() as usize).max(1);
        let dt = t / steps as f64;
        let mut s = self.initial_covariance[h - 1];
        for _ in 0..steps {
            let k1 = f(&s);
            let k2 = f(&(s + k1 * (0.5 * dt)));
            let k3 = f(&(s + k2 * (0.5 * dt)));
            let k4 = f(&(s + k3 * dt));
            s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_rate_at_threshold() {
        let law = DisorderLaw::symmetric_pair(1.0).unwrap();
        let r = euler_kernel_rate(1.25, 0.25, &law, 1e-2).unwrap();
        assert!((r + 2.5e-3).abs() < 1e-4, "{r}");
        let fine = euler_kernel_rate(1.25, 0.25, &law, 1e-6).unwrap();
        assert!(fine.abs() < 1e-6, "{fine}");
    }

    #[test]
    fn euler_rate_tends_to_spectral_abscissa() {
        // (θ/2)(λ+½)/((λ+½)²+ω²) = 1 for the symmetric pair
        let (theta, omega) = (1.5f64, 0.25f64);
        let s = 0.25 * theta + (theta * theta / 16.0 - omega * omega).sqrt();
        let law = DisorderLaw::symmetric_pair(1.0).unwrap();
        let r = euler_kernel_rate(theta, omega, &law, 1e-6).unwrap();
        assert!((r - (s - 0.5)).abs() < 1e-5, "{r} vs {}", s - 0.5);
    }
    use approx::assert_abs_diff_eq;

    fn unit_pair() -> DisorderLaw {
        DisorderLaw::symmetric_pair(1.0).unwrap()
    }

    fn params(theta: f64, omega: f64, law: DisorderLaw) -> KuramotoParams {
        KuramotoParams::new(theta, omega, law, 1).unwrap()
    }

    #[test]
    fn theta_c_examples() {
        let t = theta_critical(0.25, &unit_pair());
        assert_abs_diff_eq!(t.theta_c, 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(t.effective, 1.25, epsilon = 1e-14);
        let t = theta_critical(0.45, &unit_pair());
        assert_abs_diff_eq!(t.theta_c, 1.81, epsilon = 1e-12);
        assert_eq!(t.branch, CriticalBranch::ThetaC);
        assert_eq!(theta_critical(0.0, &DisorderLaw::parse("-2:0.25,0:0.5,2:0.25").unwrap()).theta_c, 1.0);
        let t = theta_critical(0.7, &unit_pair());
        assert_eq!((t.effective, t.branch), (2.0, CriticalBranch::Two));
    }

    #[test]
    fn numeric_threshold_agrees_with_closed_form_for_pair() {
        // a pair ±a with ω scaled so ωa plays the role of ω
        let law = DisorderLaw::symmetric_pair(2.0).unwrap();
        let t = theta_critical(0.125, &law);
        assert_abs_diff_eq!(t.effective, 1.25, epsilon = 1e-9);
        let t = theta_critical(0.35, &law);
        assert_abs_diff_eq!(t.effective, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn uniform_is_a_fixed_point() {
        let q = KuramotoDensity::uniform(&unit_pair(), 12);
        let tr = mckean_vlasov_kuramoto(&q, 1.7, 0.3, 2.0, 0.01, 50).unwrap();
        for d in &tr.densities {
            assert_eq!(d.coeffs, q.coeffs);
        }
    }

    #[test]
    fn from_fn_recovers_coefficients() {
        let law = unit_pair();
        let q = KuramotoDensity::from_fn(&law, 8, &|x, eta| 1.0 + 0.3 * (x - eta).cos()).unwrap();
        assert!(q.normalization_error() < 1e-14);
        // c_1 = 0.3/2 e^{-iη} / 2π
        let expect = Complex64::from_polar(0.15 / TAU, -1.0);
        assert!((q.coeff(1, 1) - expect).norm() < 1e-12);
        assert!((q.coeff(1, -1) - expect.conj()).norm() < 1e-12);
        assert!(q.coeff(0, 2).norm() < 1e-14);
        assert!((q.eval(1, 0.7) - (1.0 + 0.3 * (0.7f64 - 1.0).cos()) / TAU).abs() < 1e-12);
        assert!(q.min_on_grid() > 0.0);
    }

    fn perturbed(law: &DisorderLaw, k: usize, eps: f64) -> KuramotoDensity {
        KuramotoDensity::from_fn(law, k, &|x, _| 1.0 + eps * x.cos()).unwrap()
    }

    #[test]
    fn stability_dichotomy() {
        let law = unit_pair();
        let q = perturbed(&law, 16, 0.01);
        let r0 = q.order_parameter().norm();
        let below = mckean_vlasov_kuramoto(&q, 1.0, 0.25, 20.0, 0.01, 2000).unwrap();
        assert!(below.last().order_parameter().norm() < 0.5 * r0);
        let above = mckean_vlasov_kuramoto(&q, 1.6, 0.25, 20.0, 0.01, 2000).unwrap();
        assert!(above.last().order_parameter().norm() > 2.0 * r0);
        assert!(above.last().normalization_error() < 1e-12);
        assert!(above.last().min_on_grid() > -1e-6);
    }

    #[test]
    fn small_truncation_is_rejected() {
        let q = KuramotoDensity::uniform(&unit_pair(), 4);
        assert!(mckean_vlasov_kuramoto(&q, 1.0, 0.1, 1.0, 0.01, 1).is_err());
    }

    #[test]
    fn truncation_check_passes_for_smooth_data() {
        let q = perturbed(&unit_pair(), 12, 0.2);
        let d = galerkin_truncation_error(&q, 1.5, 0.25, 1.0, 0.01).unwrap();
        assert!(d < 1e-6);
    }

    #[test]
    fn galerkin_jacobian_matches_linearisation() {
        let law = unit_pair();
        let (theta, omega, k) = (1.25, 0.25, 8);
        let p = params(theta, omega, law.clone());
        let spec = linearized_kuramoto(&p, k).unwrap();
        let base = KuramotoDensity::uniform(&law, k);
        let eps = 1e-7;
        // forward block at harmonic h equals the operator block at −h
        for (col, &(h, atom)) in spec.index.iter().enumerate() {
            if h < 0 {
                continue;
            }
            let mut q = base.clone();
            q.coeffs[atom][h as usize] += eps;
            let rhs = galerkin_rhs(&q, theta, omega);
            let col_op = spec.index.iter().position(|&(hh, a)| hh == -h && a == atom).unwrap();
            for (row, &(h2, a2)) in spec.index.iter().enumerate() {
                if h2 < 0 {
                    continue;
                }
                let fd = rhs[a2][h2 as usize] / eps;
                let row_op = spec.index.iter().position(|&(hh, a)| hh == -h2 && a == a2).unwrap();
                let expect = spec.matrix[(row_op, col_op)];
                assert!((fd - expect).norm() < 1e-6, "({row},{col}): {fd} vs {expect}");
            }
        }
    }

    #[test]
    fn stationary_uniform_when_r_zero() {
        let p = params(1.0, 0.3, unit_pair());
        let s = kuramoto_stationary(0.0, &p, 512).unwrap();
        for row in &s.density {
            for v in row {
                assert!((v - 1.0 / TAU).abs() < 1e-12);
            }
        }
        assert!(s.residual < 1e-12);
    }

    fn von_mises_ratio(x: f64) -> f64 {
        // I₁(x)/I₀(x) by power series
        let (mut i0, mut i1) = (0.0, 0.0);
        let mut term0 = 1.0;
        for k in 0..200 {
            let kf = k as f64;
            if k > 0 {
                term0 *= (x / 2.0).powi(2) / (kf * kf);
            }
            i0 += term0;
            i1 += term0 * (x / 2.0) / (kf + 1.0);
        }
        i1 / i0
    }

    #[test]
    fn von_mises_fixed_point() {
        let p = params(2.0, 0.0, DisorderLaw::dirac_zero());
        let roots = solve_r_star(&p, 1024).unwrap();
        assert_eq!(roots[0], 0.0);
        assert_eq!(roots.len(), 2);
        let (mut lo, mut hi) = (0.1, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if von_mises_ratio(4.0 * mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((roots[1] - lo).abs() < 1e-6, "{} vs {lo}", roots[1]);
        let s = kuramoto_stationary(roots[1], &p, 1024).unwrap();
        assert!(s.residual < 1e-8);
    }

    #[test]
    fn stationary_normalisation_random_parameters() {
        for (r, theta, omega) in [(0.3, 1.7, 0.2), (0.8, 3.0, 0.45), (0.05, 0.9, 0.1)] {
            let p = params(theta, omega, unit_pair());
            let s = kuramoto_stationary(r, &p, 512).unwrap();
            let h = TAU / 512.0;
            for row in &s.density {
                assert!((row.iter().sum::<f64>() * h - 1.0).abs() < 1e-8);
                assert!(row.iter().all(|v| *v > 0.0));
            }
        }
    }

    #[test]
    fn stationary_solves_fokker_planck() {
        // stationarity: ½q' − (ωη − θr sin x) q is constant in x
        let (r, theta, omega) = (0.4, 1.8, 0.3);
        let p = params(theta, omega, unit_pair());
        let n = 2048;
        let s = kuramoto_stationary(r, &p, n).unwrap();
        let h = TAU / n as f64;
        for (a, eta) in [(0, -1.0), (1, 1.0)] {
            let q = &s.density[a];
            let flux: Vec<f64> = (0..n)
                .map(|i| {
                    let dq = (q[(i + 1) % n] - q[(i + n - 1) % n]) / (2.0 * h);
                    0.5 * dq - (omega * eta - theta * r * (i as f64 * h).sin()) * q[i]
                })
                .collect();
            let spread = flux.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - flux.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread < 1e-5, "η = {eta}: spread {spread}");
        }
    }

    #[test]
    fn subcritical_has_only_zero_root() {
        let p = params(1.1, 0.25, unit_pair());
        assert_eq!(solve_r_star(&p, 512).unwrap(), vec![0.0]);
    }

    #[test]
    fn critical_spectrum_matches_analytic() {
        let p = params(1.25, 0.25, unit_pair());
        let spec = linearized_kuramoto(&p, 32).unwrap();
        assert_eq!(spec.eigenvalues.len(), 128);
        assert!(spec.analytic_mismatch().unwrap() < 1e-8);
        assert_eq!(spec.kernel_dimension(1e-8), 2);
        assert!(spec.kernel_residual() < 1e-12);
        assert!(spec.eigen_residual() < 1e-10);
        let has = |z: Complex64| spec.eigenvalues.iter().filter(|e| (*e - z).norm() < 1e-8).count();
        assert_eq!(has(Complex64::new(-0.375, 0.0)), 2);
        assert_eq!(has(Complex64::new(-2.0, 0.5)), 2);
        assert_eq!(has(Complex64::new(-4.5, -0.75)), 2);
    }

    #[test]
    fn zero_omega_kernel_is_cos_sin() {
        let p = params(1.0, 0.0, unit_pair());
        let spec = linearized_kuramoto(&p, 8).unwrap();
        assert_eq!(spec.kernel_dimension(1e-10), 2);
        assert!(spec.kernel_residual() < 1e-14);
    }

    #[test]
    fn subcritical_has_no_kernel() {
        let p = params(1.15, 0.25, unit_pair());
        let spec = linearized_kuramoto(&p, 16).unwrap();
        assert!(spec.max_real_part() < 0.0);
        assert_eq!(spec.kernel_dimension(1e-6), 0);
        assert!(spec.analytic.is_none());
    }

    #[test]
    fn spectrum_stable_under_doubling() {
        let p = params(1.25, 0.25, unit_pair());
        let a = linearized_kuramoto(&p, 10).unwrap();
        let b = linearized_kuramoto(&p, 20).unwrap();
        let low: Vec<Complex64> = a.eigenvalues.clone();
        assert!(match_spectra(&low, &b.eigenvalues) < 1e-8);
    }

    #[test]
    fn clt_blocks() {
        let p = params(1.25, 0.25, unit_pair());
        let sys = kuramoto_clt_system(&p, 4).unwrap();
        let a1 = sys.drift[0];
        assert_abs_diff_eq!(a1[(0, 0)], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(1, 1)], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(2, 2)], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(0, 3)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(a1[(3, 0)], 0.25, epsilon = 1e-15);
        let a2 = sys.drift[1];
        for i in 0..4 {
            assert_abs_diff_eq!(a2[(i, i)], -2.0, epsilon = 1e-15);
        }
        assert!(sys.stationary_covariance(1).is_none());
    }

    #[test]
    fn lyapunov_solution_is_half_identity() {
        let p = params(1.25, 0.25, unit_pair());
        let sys = kuramoto_clt_system(&p, 3).unwrap();
        for h in 2..=3 {
            let s = sys.stationary_covariance(h).unwrap();
            let a = sys.drift[h - 1];
            let resid = a * s + s * a.transpose() + sys.diffusion(h);
            assert!(resid.abs().max() < 1e-12);
            assert!((s - Matrix4::identity() * 0.5).abs().max() < 1e-12);
            assert!((sys.covariance_at(h, 3.0) - s).abs().max() < 1e-10);
        }
    }

    #[test]
    fn clt_requires_unit_pair() {
        let p = params(1.0, 0.25, DisorderLaw::symmetric_pair(0.5).unwrap());
        assert!(kuramoto_clt_system(&p, 2).is_err());
    }
}
