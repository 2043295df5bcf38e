//! Error metrics, order regression and the gate-cost model.
//!
//! Cost expressions are evaluated with unit constants and natural logarithms,
//! so they are comparative figures rather than absolute gate counts.

use serde::{Deserialize, Serialize};

use crate::linalg::{compensated_sum, max_abs_real};
use crate::model::{NoiseKind, SdeProblem};
use crate::noise::NoisePath;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Root of the mean squared Euclidean distance.
    Mse,
    /// Mean Euclidean distance.
    Mae,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "MSE",
            Metric::Mae => "MAE",
        }
    }

    pub fn evaluate(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<ErrorReport> {
        match self {
            Metric::Mse => mse(a, b),
            Metric::Mae => mae(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metric: Metric,
    pub value: f64,
    pub sample_count: usize,
}

fn distances(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "paired sample sets",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("sample set"));
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    context: "sample state",
                    expected: x.len(),
                    found: y.len(),
                });
            }
            Ok(x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        })
        .collect()
}

/// `√(mean ‖a_j − b_j‖²)` over samples paired by index.
pub fn mse(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<ErrorReport> {
    let d = distances(a, b)?;
    let n = d.len();
    Ok(ErrorReport {
        metric: Metric::Mse,
        value: (compensated_sum(d.iter().map(|x| x * x)) / n as f64).sqrt(),
        sample_count: n,
    })
}

/// `mean ‖a_j − b_j‖`.
pub fn mae(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<ErrorReport> {
    let d = distances(a, b)?;
    let n = d.len();
    Ok(ErrorReport {
        metric: Metric::Mae,
        value: compensated_sum(d) / n as f64,
        sample_count: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log(error)` against `log(h)`.
pub fn convergence_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("order fit needs at least two points".into()));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0)) {
        return Err(Error::InvalidParameter(
            "order fit needs positive step sizes and errors".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("order fit needs distinct step sizes".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Additive,
    Multiplicative,
    Levy,
}

/// Scalar inputs of the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub kind: CostKind,
    pub t_final: f64,
    pub dt: f64,
    pub dp: f64,
    /// State dimension `d`.
    pub dim: usize,
    /// Noise channels `m`.
    pub noise_dim: usize,
    /// Samples simulated together, `N`.
    pub samples: usize,
    /// `‖A‖max`.
    pub drift_max: f64,
    /// `‖B‖max`.
    pub noise_max: f64,
    /// `max_{j,k} |ΔW_k^{(j)}|` (or `|ΔL|` for Lévy noise).
    pub increment_max: f64,
    /// Lévy scale `ε`; ignored otherwise.
    pub eps: f64,
}

impl CostInputs {
    pub fn from_problem(problem: &SdeProblem, paths: &[NoisePath], dp: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyInput("noise paths"));
        }
        let (kind, noise_max, eps) = match problem.kind {
            NoiseKind::AdditiveGaussian => (CostKind::Additive, max_abs_real(&problem.noise), 0.0),
            NoiseKind::MultiplicativeGaussian => (
                CostKind::Multiplicative,
                problem.noise_mult.iter().map(max_abs_real).fold(0.0, f64::max),
                0.0,
            ),
            NoiseKind::AdditiveStable { eps, .. } => (CostKind::Levy, max_abs_real(&problem.noise), eps),
        };
        Ok(CostInputs {
            kind,
            t_final: problem.t_final,
            dt: problem.dt(),
            dp,
            dim: problem.dim(),
            noise_dim: problem.noise_dim(),
            samples: paths.len(),
            drift_max: max_abs_real(&problem.drift),
            noise_max,
            increment_max: paths.iter().map(NoisePath::max_abs).fold(0.0, f64::max),
            eps,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("T", self.t_final), ("Δt", self.dt), ("Δp", self.dp)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dim == 0 || self.samples == 0 || self.noise_dim == 0 {
            return Err(Error::InvalidParameter(
                "dimensions and sample count must be ≥ 1".into(),
            ));
        }
        if self.drift_max < 0.0 || self.noise_max < 0.0 || self.increment_max < 0.0 {
            return Err(Error::InvalidParameter("norms must be nonnegative".into()));
        }
        Ok(())
    }

    /// `N d`.
    fn nd(&self) -> f64 {
        (self.samples * self.dim) as f64
    }

    /// The norm factor of the cost:
    /// additive `‖A‖ + |ΔW|/√Δt`, Lévy `‖A‖ + ε|ΔL|`,
    /// multiplicative `‖A‖ + m‖B‖² + m‖B‖|ΔW|/Δt`.
    pub fn norm_factor(&self) -> f64 {
        let m = self.noise_dim as f64;
        match self.kind {
            CostKind::Additive => self.drift_max + self.increment_max / self.dt.sqrt(),
            CostKind::Levy => self.drift_max + self.eps * self.increment_max,
            CostKind::Multiplicative => {
                self.drift_max + m * self.noise_max * self.noise_max + m * self.noise_max * self.increment_max / self.dt
            }
        }
    }
}

/// `T d/Δp · (ln(1/Δp) + ln(N d)) · norm_factor`.
pub fn gate_count(inputs: &CostInputs) -> Result<f64> {
    inputs.validate()?;
    let d = inputs.dim as f64;
    Ok(inputs.t_final * d / inputs.dp * ((1.0 / inputs.dp).ln() + inputs.nd().ln()) * inputs.norm_factor())
}

/// Euler–Maruyama (additive, Lévy) or Milstein (multiplicative) operation
/// count: `N d² T/Δt`, times `m` for Milstein.
pub fn classical_flops(inputs: &CostInputs) -> f64 {
    let d = inputs.dim as f64;
    let base = inputs.samples as f64 * d * d * inputs.t_final / inputs.dt;
    match inputs.kind {
        CostKind::Multiplicative => base * inputs.noise_dim as f64,
        _ => base,
    }
}

/// Almost-sure modulus-of-continuity scale `√(Δt ln(1/Δt))` of Brownian
/// increments.
pub fn levy_modulus_bound(dt: f64) -> f64 {
    (dt * (1.0 / dt).ln()).sqrt()
}

/// The step parameter `τ`: `Δt√(ln(1/Δt))/Δp` for additive noise,
/// `√(Δt ln(1/Δt))/Δp` for multiplicative noise.
pub fn tau(inputs: &CostInputs) -> f64 {
    let log = (1.0 / inputs.dt).ln();
    match inputs.kind {
        CostKind::Multiplicative => (inputs.dt * log).sqrt() / inputs.dp,
        _ => inputs.dt * log.sqrt() / inputs.dp,
    }
}

/// Both sides of the multi-sample advantage condition `lhs ≳ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageCheck {
    /// `N d / ln(N d)`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Additive/Lévy: `rhs = Δt/Δp (1 − ln Δp / ln(Nd)) norm_factor`.
/// Multiplicative: `rhs = √Δt/Δp (1 − ln Δp / ln(Nd)) ((‖A‖/m + ‖B‖²)√Δt + ‖B‖|ΔW|/√Δt)`.
pub fn advantage(inputs: &CostInputs) -> Result<AdvantageCheck> {
    inputs.validate()?;
    let nd = inputs.nd();
    if nd < 2.0 {
        return Err(Error::InvalidParameter("advantage condition needs N d ≥ 2".into()));
    }
    let log_nd = nd.ln();
    let shape = 1.0 - inputs.dp.ln() / log_nd;
    let rhs = match inputs.kind {
        CostKind::Multiplicative => {
            let m = inputs.noise_dim as f64;
            let sq = inputs.dt.sqrt();
            sq / inputs.dp
                * shape
                * ((inputs.drift_max / m + inputs.noise_max * inputs.noise_max) * sq
                    + inputs.noise_max * inputs.increment_max / sq)
        }
        _ => inputs.dt / inputs.dp * shape * inputs.norm_factor(),
    };
    let lhs = nd / log_nd;
    Ok(AdvantageCheck {
        lhs,
        rhs,
        holds: lhs >= rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub inputs: CostInputs,
    /// `⌈log₂ 2N_p⌉ + ⌈log₂(N d̃)⌉`.
    pub qubits: u32,
    /// Row sparsity of the simulated Hamiltonian.
    pub sparsity: usize,
    /// `(π/Δp + 1) · norm_factor`, the bound on `‖H̃_k‖max`.
    pub max_norm: f64,
    pub gate_count: f64,
    pub classical_flops: f64,
    pub tau: f64,
    /// `|ΔW|max` predicted by the modulus of continuity (Gaussian noise).
    pub modulus_increment: Option<f64>,
    pub advantage: Option<AdvantageCheck>,
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

pub fn estimate(inputs: &CostInputs, half_width: f64) -> Result<ComplexityEstimate> {
    let gates = gate_count(inputs)?;
    let grid_points = (2.0 * half_width / inputs.dp).round().max(1.0) as usize;
    let ext = match inputs.kind {
        CostKind::Multiplicative => inputs.dim,
        _ => inputs.dim + 1,
    };
    Ok(ComplexityEstimate {
        inputs: *inputs,
        qubits: ceil_log2(grid_points) + ceil_log2(inputs.samples * ext),
        sparsity: ext,
        max_norm: (std::f64::consts::PI / inputs.dp + 1.0) * inputs.norm_factor(),
        gate_count: gates,
        classical_flops: classical_flops(inputs),
        tau: tau(inputs),
        modulus_increment: (inputs.kind != CostKind::Levy).then(|| levy_modulus_bound(inputs.dt)),
        advantage: advantage(inputs).ok(),
    })
}

/// Cost estimate for simulating `paths` of `problem` on a grid of spacing `dp`
/// and half-width `half_width`.
pub fn gate_complexity(
    problem: &SdeProblem,
    paths: &[NoisePath],
    dp: f64,
    half_width: f64,
) -> Result<ComplexityEstimate> {
    estimate(&CostInputs::from_problem(problem, paths, dp)?, half_width)
}
