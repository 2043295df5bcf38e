//! Classical reference integrators on shared noise paths.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{commutator_norm, exp_and_phi1, expm, RMatrix};
use crate::model::{NoiseKind, SdeProblem};
use crate::noise::{companion_normals, NoisePath};
use crate::{Error, Result};

/// Pairwise commutator tolerance (Frobenius) for the Milstein scheme and the
/// closed-form multiplicative solution.
pub const COMMUTE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
    ExactApproximate,
    Explicit,
}

/// States at `t_0, …, t_{N_T}`, one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: RMatrix,
    pub scheme: Scheme,
}

impl SamplePath {
    fn from_rows(problem: &SdeProblem, rows: Vec<DVector<f64>>, scheme: Scheme) -> Self {
        let d = problem.dim();
        let states = RMatrix::from_fn(rows.len(), d, |k, i| rows[k][i]);
        SamplePath {
            times: (0..rows.len()).map(|k| problem.time(k)).collect(),
            states,
            scheme,
        }
    }

    pub fn state(&self, k: usize) -> Vec<f64> {
        self.states.row(k).iter().copied().collect()
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.state(self.states.nrows() - 1)
    }
}

fn check_path(problem: &SdeProblem, path: &NoisePath) -> Result<()> {
    problem.validate()?;
    if path.steps != problem.steps || path.channels != problem.noise_dim() {
        return Err(Error::DimensionMismatch {
            context: "noise path shape",
            expected: problem.steps * problem.noise_dim(),
            found: path.steps * path.channels,
        });
    }
    Ok(())
}

fn noise_column(problem: &SdeProblem, dw: &[f64]) -> DVector<f64> {
    &problem.noise * DVector::from_column_slice(dw)
}

/// Euler–Maruyama; also returns the number of scalar multiply-adds performed.
pub fn euler_maruyama_counted(problem: &SdeProblem, path: &NoisePath) -> Result<(SamplePath, u64)> {
    check_path(problem, path)?;
    let dt = problem.dt();
    let d = problem.dim() as u64;
    let m = problem.noise_dim() as u64;
    let mut x = problem.x0.clone();
    let mut rows = vec![x.clone()];
    let mut ops = 0u64;
    for dw in path.rows() {
        let drift = &problem.drift * &x * dt;
        let kick = match problem.kind {
            NoiseKind::MultiplicativeGaussian => {
                ops += m * d * d;
                problem
                    .noise_mult
                    .iter()
                    .zip(dw)
                    .fold(DVector::zeros(x.len()), |acc, (b, &w)| acc + b * &x * w)
            }
            _ => {
                ops += d * m;
                noise_column(problem, dw)
            }
        };
        ops += d * d + d;
        x += drift + kick;
        rows.push(x.clone());
    }
    Ok((SamplePath::from_rows(problem, rows, Scheme::EulerMaruyama), ops))
}

/// `x + AxΔt + BΔW` (additive), `x + AxΔt + Σ B^(l) x ΔW^(l)` (multiplicative),
/// `x + AxΔt + BΔL` (Lévy).
pub fn euler_maruyama(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    Ok(euler_maruyama_counted(problem, path)?.0)
}

fn require_commuting(mats: &[&RMatrix]) -> Result<()> {
    let mut worst = 0.0_f64;
    for (i, a) in mats.iter().enumerate() {
        for b in &mats[i + 1..] {
            worst = worst.max(commutator_norm(a, b));
        }
    }
    if worst > COMMUTE_TOL {
        return Err(Error::NonCommuting { norm: worst });
    }
    Ok(())
}

fn require_multiplicative(problem: &SdeProblem) -> Result<()> {
    if problem.kind != NoiseKind::MultiplicativeGaussian {
        return Err(Error::Unsupported("this scheme needs multiplicative noise".into()));
    }
    Ok(())
}

/// Milstein scheme for multiplicative noise with pairwise commuting `B^(l)`:
/// `x + AxΔt + Σ_l B_l x ΔW_l + ½ Σ_l B_l² x (ΔW_l² − Δt) + ½ Σ_{l≠j} B_l B_j x ΔW_l ΔW_j`.
pub fn milstein_1d(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    require_multiplicative(problem)?;
    check_path(problem, path)?;
    require_commuting(&problem.noise_mult.iter().collect::<Vec<_>>())?;
    let dt = problem.dt();
    let bs = &problem.noise_mult;
    let mut x = problem.x0.clone();
    let mut rows = vec![x.clone()];
    for dw in path.rows() {
        let bx: Vec<DVector<f64>> = bs.iter().map(|b| b * &x).collect();
        let mut next = &x + &problem.drift * &x * dt;
        for (l, b) in bs.iter().enumerate() {
            next += &bx[l] * dw[l];
            next += b * &bx[l] * (0.5 * (dw[l] * dw[l] - dt));
            for j in 0..bs.len() {
                if j != l {
                    next += b * &bx[j] * (0.5 * dw[l] * dw[j]);
                }
            }
        }
        x = next;
        rows.push(x.clone());
    }
    Ok(SamplePath::from_rows(problem, rows, Scheme::Milstein))
}

/// Exact propagation of the approximate equation with constant forcing on
/// each step: `X ← e^{AΔt} X + Δt φ₁(AΔt) f_k`, with `f_k = BΔW_k/Δt` for
/// Gaussian noise and `BΔL_k/Δt` for Lévy noise.
pub fn exact_approx_additive(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    if !problem.kind.is_additive() {
        return Err(Error::Unsupported("this scheme needs additive noise".into()));
    }
    check_path(problem, path)?;
    let dt = problem.dt();
    let (e, phi) = exp_and_phi1(&problem.drift, dt);
    let mut x = problem.x0.clone();
    let mut rows = vec![x.clone()];
    for dw in path.rows() {
        let forcing = noise_column(problem, dw) / dt;
        x = &e * &x + &phi * forcing;
        rows.push(x.clone());
    }
    Ok(SamplePath::from_rows(problem, rows, Scheme::ExactApproximate))
}

/// `X ← exp(Ã_k Δt) X` with `Ã_k = A − ½ Σ B_l² + Σ B_l ΔW_l/Δt`.
pub fn exact_approx_multiplicative(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    require_multiplicative(problem)?;
    check_path(problem, path)?;
    let dt = problem.dt();
    let mut correction = problem.drift.clone();
    for b in &problem.noise_mult {
        correction -= b * b * 0.5;
    }
    let mut x = problem.x0.clone();
    let mut rows = vec![x.clone()];
    for dw in path.rows() {
        let mut m = correction.clone();
        for (b, &w) in problem.noise_mult.iter().zip(dw) {
            m += b * (w / dt);
        }
        x = if m.nrows() == 1 {
            DVector::from_element(1, x[0] * (m[(0, 0)] * dt).exp())
        } else {
            expm(&(m * dt)) * &x
        };
        rows.push(x.clone());
    }
    Ok(SamplePath::from_rows(problem, rows, Scheme::ExactApproximate))
}

/// Exact pathwise solutions on the given increments.
///
/// Scalar OU `dX = aX dt + r dW`: `X_{k+1} = e^{aΔt} X_k + r η_k` with
/// `η_k = βΔW_k + γζ_k` drawn jointly Gaussian with `ΔW_k`, where
/// `β = c/Δt`, `γ² = v − c²/Δt`, `c = (e^{aΔt} − 1)/a`, `v = (e^{2aΔt} − 1)/(2a)`
/// and `ζ_k` are the path's companion normals.
///
/// Multiplicative noise with `A` and every `B^(l)` commuting:
/// `X(t) = exp((A − ½ΣB_l²)t + ΣB_l W_l(t)) x_0`.
pub fn explicit_solution(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    check_path(problem, path)?;
    match problem.kind {
        NoiseKind::AdditiveGaussian if problem.dim() == 1 && problem.noise_dim() == 1 => explicit_ou(problem, path),
        NoiseKind::MultiplicativeGaussian => explicit_commuting(problem, path),
        _ => Err(Error::Unsupported(
            "explicit solutions cover the scalar OU process and commuting multiplicative noise".into(),
        )),
    }
}

/// Coefficients `(e^{aΔt}, β, γ)` of the exact OU increment.
pub fn ou_increment_coefficients(a: f64, dt: f64) -> (f64, f64, f64) {
    let decay = (a * dt).exp();
    let (cov, var) = if a.abs() * dt < 1e-8 {
        (dt * (1.0 + 0.5 * a * dt), dt * (1.0 + a * dt))
    } else {
        ((a * dt).exp_m1() / a, (2.0 * a * dt).exp_m1() / (2.0 * a))
    };
    let beta = cov / dt;
    let gamma = (var - cov * cov / dt).max(0.0).sqrt();
    (decay, beta, gamma)
}

fn explicit_ou(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    let a = problem.drift[(0, 0)];
    let r = problem.noise[(0, 0)];
    let (decay, beta, gamma) = ou_increment_coefficients(a, problem.dt());
    let zeta = companion_normals(path);
    let mut x = problem.x0[0];
    let mut rows = vec![DVector::from_element(1, x)];
    for (k, dw) in path.rows().enumerate() {
        x = decay * x + r * (beta * dw[0] + gamma * zeta[k]);
        rows.push(DVector::from_element(1, x));
    }
    Ok(SamplePath::from_rows(problem, rows, Scheme::Explicit))
}

fn explicit_commuting(problem: &SdeProblem, path: &NoisePath) -> Result<SamplePath> {
    let mut all: Vec<&RMatrix> = vec![&problem.drift];
    all.extend(problem.noise_mult.iter());
    require_commuting(&all)?;
    let mut base = problem.drift.clone();
    for b in &problem.noise_mult {
        base -= b * b * 0.5;
    }
    let cumulative = path.cumulative();
    let rows = cumulative
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let mut exponent = &base * problem.time(k);
            for (b, &wl) in problem.noise_mult.iter().zip(w) {
                exponent += b * wl;
            }
            if exponent.nrows() == 1 {
                DVector::from_element(1, problem.x0[0] * exponent[(0, 0)].exp())
            } else {
                expm(&exponent) * &problem.x0
            }
        })
        .collect();
    Ok(SamplePath::from_rows(problem, rows, Scheme::Explicit))
}
