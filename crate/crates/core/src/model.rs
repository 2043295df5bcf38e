//! Linear SDE problems and the per-step matrices of the approximate equation.
//!
//! On `(t_k, t_{k+1}]` the noise is frozen into a constant forcing, which
//! gives a homogeneous linear ODE `dz/dt = Ã_k z`. For additive noise the
//! state is extended by one constant auxiliary component so that the forcing
//! becomes part of `Ã_k`.

use nalgebra::DVector;

use crate::linalg::{commutator_norm, complexify, CMatrix, RMatrix, C64};
use crate::noise::NoisePath;
use crate::{Error, Result};

/// Lévy scale factor used when none is given.
pub const DEFAULT_LEVY_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    AdditiveGaussian,
    MultiplicativeGaussian,
    /// Additive symmetric α-stable noise with the coupling scaled by `eps`.
    AdditiveStable {
        alpha: f64,
        eps: f64,
    },
}

impl NoiseKind {
    pub fn is_additive(&self) -> bool {
        !matches!(self, NoiseKind::MultiplicativeGaussian)
    }
}

#[derive(Debug, Clone)]
pub struct SdeProblem {
    pub kind: NoiseKind,
    /// Drift `A`, `d × d`.
    pub drift: RMatrix,
    /// Additive noise matrix `B`, `d × m` (empty for multiplicative noise).
    pub noise: RMatrix,
    /// Multiplicative noise matrices `B^{(l)}`, each `d × d`.
    pub noise_mult: Vec<RMatrix>,
    pub x0: DVector<f64>,
    pub t_final: f64,
    pub steps: usize,
}

impl SdeProblem {
    /// `dX = AX dt + B dW`.
    pub fn additive(drift: RMatrix, noise: RMatrix, x0: DVector<f64>, t_final: f64, steps: usize) -> Result<Self> {
        let p = SdeProblem {
            kind: NoiseKind::AdditiveGaussian,
            drift,
            noise,
            noise_mult: Vec::new(),
            x0,
            t_final,
            steps,
        };
        p.validate()?;
        Ok(p)
    }

    /// `dX = AX dt + Σ_l B^{(l)} X dW^{(l)}`.
    pub fn multiplicative(
        drift: RMatrix,
        noise_mult: Vec<RMatrix>,
        x0: DVector<f64>,
        t_final: f64,
        steps: usize,
    ) -> Result<Self> {
        let d = drift.nrows();
        let p = SdeProblem {
            kind: NoiseKind::MultiplicativeGaussian,
            drift,
            noise: RMatrix::zeros(d, 0),
            noise_mult,
            x0,
            t_final,
            steps,
        };
        p.validate()?;
        Ok(p)
    }

    /// `dX = AX dt + B dL^α`.
    pub fn stable(
        drift: RMatrix,
        noise: RMatrix,
        x0: DVector<f64>,
        alpha: f64,
        eps: f64,
        t_final: f64,
        steps: usize,
    ) -> Result<Self> {
        let p = SdeProblem {
            kind: NoiseKind::AdditiveStable { alpha, eps },
            drift,
            noise,
            noise_mult: Vec::new(),
            x0,
            t_final,
            steps,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scalar Ornstein–Uhlenbeck process `dX = aX dt + r dW`.
    pub fn ornstein_uhlenbeck(a: f64, r: f64, x0: f64, t_final: f64, steps: usize) -> Result<Self> {
        Self::additive(
            RMatrix::from_element(1, 1, a),
            RMatrix::from_element(1, 1, r),
            DVector::from_element(1, x0),
            t_final,
            steps,
        )
    }

    /// Scalar geometric Brownian motion `dX = μX dt + σX dW`.
    pub fn geometric_brownian(mu: f64, sigma: f64, x0: f64, t_final: f64, steps: usize) -> Result<Self> {
        Self::multiplicative(
            RMatrix::from_element(1, 1, mu),
            vec![RMatrix::from_element(1, 1, sigma)],
            DVector::from_element(1, x0),
            t_final,
            steps,
        )
    }

    /// Scalar Lévy flight `dX = μX dt + σ dL^α`.
    pub fn levy_flight(mu: f64, sigma: f64, alpha: f64, eps: f64, x0: f64, t_final: f64, steps: usize) -> Result<Self> {
        Self::stable(
            RMatrix::from_element(1, 1, mu),
            RMatrix::from_element(1, 1, sigma),
            DVector::from_element(1, x0),
            alpha,
            eps,
            t_final,
            steps,
        )
    }

    /// Same problem on a different number of time steps.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let mut p = self.clone();
        p.steps = steps;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.drift.nrows();
        if d == 0 {
            return Err(Error::InvalidParameter("state dimension must be at least 1".into()));
        }
        if self.drift.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "drift columns",
                expected: d,
                found: self.drift.ncols(),
            });
        }
        if self.x0.len() != d {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: d,
                found: self.x0.len(),
            });
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("number of steps must be at least 1".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        match self.kind {
            NoiseKind::AdditiveGaussian | NoiseKind::AdditiveStable { .. } => {
                if self.noise.nrows() != d {
                    return Err(Error::DimensionMismatch {
                        context: "noise matrix rows",
                        expected: d,
                        found: self.noise.nrows(),
                    });
                }
                if self.noise.ncols() == 0 {
                    return Err(Error::InvalidParameter("noise matrix has no columns".into()));
                }
            }
            NoiseKind::MultiplicativeGaussian => {
                if self.noise_mult.is_empty() {
                    return Err(Error::EmptyInput("multiplicative noise matrices"));
                }
                for b in &self.noise_mult {
                    if b.nrows() != d || b.ncols() != d {
                        return Err(Error::DimensionMismatch {
                            context: "multiplicative noise matrix",
                            expected: d,
                            found: if b.nrows() != d { b.nrows() } else { b.ncols() },
                        });
                    }
                }
            }
        }
        if let NoiseKind::AdditiveStable { alpha, eps } = self.kind {
            if !(alpha > 1.0 && alpha <= 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "stability index must lie in (1, 2], got {alpha}"
                )));
            }
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Lévy scale must be positive, got {eps}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Number of scalar noise channels `m`.
    pub fn noise_dim(&self) -> usize {
        match self.kind {
            NoiseKind::MultiplicativeGaussian => self.noise_mult.len(),
            _ => self.noise.ncols(),
        }
    }

    /// `d̃`: `d + 1` with additive noise, `d` with multiplicative noise.
    pub fn extended_dim(&self) -> usize {
        if self.kind.is_additive() {
            self.dim() + 1
        } else {
            self.dim()
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// Constant auxiliary component of the extended state, if any.
    pub fn auxiliary_value(&self) -> Option<f64> {
        let dt = self.dt();
        match self.kind {
            NoiseKind::AdditiveGaussian => Some(1.0 / dt.sqrt()),
            NoiseKind::AdditiveStable { eps, .. } => Some(1.0 / (eps * dt)),
            NoiseKind::MultiplicativeGaussian => None,
        }
    }

    /// Initial extended state `z_0`.
    pub fn extended_initial(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.x0.iter().copied().collect();
        if let Some(aux) = self.auxiliary_value() {
            z.push(aux);
        }
        z
    }

    /// `Ã_k` for step `k` of the given path.
    pub fn extended_matrix(&self, path: &NoisePath, k: usize) -> Result<ExtendedMatrix> {
        let row = path.row(k);
        match self.kind {
            NoiseKind::AdditiveGaussian => build_additive(self, row, path.dt, k),
            NoiseKind::MultiplicativeGaussian => build_multiplicative(self, row, path.dt, k),
            NoiseKind::AdditiveStable { .. } => build_levy(self, row, path.dt, k),
        }
    }

    /// Multiplicative noise matrices pairwise commute within `tol` (Frobenius).
    pub fn noise_commutes(&self, tol: f64) -> std::result::Result<(), f64> {
        let mut worst = 0.0_f64;
        for (i, a) in self.noise_mult.iter().enumerate() {
            for b in &self.noise_mult[i + 1..] {
                worst = worst.max(commutator_norm(a, b));
            }
        }
        if worst <= tol {
            Ok(())
        } else {
            Err(worst)
        }
    }
}

/// The matrix `Ã_k` of the approximate equation on one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMatrix {
    pub entries: CMatrix,
    pub step: usize,
}

impl ExtendedMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `Ã = H1 + i H2` with both parts Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPair {
    pub h1: CMatrix,
    pub h2: CMatrix,
}

impl HermitianPair {
    pub fn dim(&self) -> usize {
        self.h1.nrows()
    }

    /// `H1 + i H2`.
    pub fn recompose(&self) -> CMatrix {
        &self.h1 + &self.h2 * C64::i()
    }
}

fn check_increment(problem: &SdeProblem, increment: &[f64]) -> Result<()> {
    let m = problem.noise_dim();
    if increment.len() != m {
        return Err(Error::DimensionMismatch {
            context: "noise increment",
            expected: m,
            found: increment.len(),
        });
    }
    Ok(())
}

fn bordered(drift: &RMatrix, column: &DVector<f64>, step: usize) -> ExtendedMatrix {
    let d = drift.nrows();
    let mut entries = CMatrix::zeros(d + 1, d + 1);
    for r in 0..d {
        for c in 0..d {
            entries[(r, c)] = C64::new(drift[(r, c)], 0.0);
        }
        entries[(r, d)] = C64::new(column[r], 0.0);
    }
    ExtendedMatrix { entries, step }
}

/// `[[A, B ΔW_k / √Δt], [0, 0]]`; pairs with the auxiliary component `1/√Δt`.
pub fn build_additive(problem: &SdeProblem, dw: &[f64], dt: f64, step: usize) -> Result<ExtendedMatrix> {
    if problem.kind != NoiseKind::AdditiveGaussian {
        return Err(Error::Unsupported(
            "additive builder needs additive Gaussian noise".into(),
        ));
    }
    check_increment(problem, dw)?;
    let column = &problem.noise * DVector::from_column_slice(dw) / dt.sqrt();
    Ok(bordered(&problem.drift, &column, step))
}

/// `A − ½ Σ (B^{(l)})² + Σ B^{(l)} ΔW_k^{(l)} / Δt`.
pub fn build_multiplicative(problem: &SdeProblem, dw: &[f64], dt: f64, step: usize) -> Result<ExtendedMatrix> {
    if problem.kind != NoiseKind::MultiplicativeGaussian {
        return Err(Error::Unsupported(
            "multiplicative builder needs multiplicative Gaussian noise".into(),
        ));
    }
    if problem.noise_mult.is_empty() {
        return Err(Error::EmptyInput("multiplicative noise matrices"));
    }
    check_increment(problem, dw)?;
    let mut m = problem.drift.clone();
    for (b, &w) in problem.noise_mult.iter().zip(dw) {
        m -= b * b * 0.5;
        m += b * (w / dt);
    }
    Ok(ExtendedMatrix {
        entries: complexify(&m),
        step,
    })
}

/// `[[A, ε B ΔL_k], [0, 0]]`; pairs with the auxiliary component `1/(εΔt)`.
pub fn build_levy(problem: &SdeProblem, dl: &[f64], _dt: f64, step: usize) -> Result<ExtendedMatrix> {
    let NoiseKind::AdditiveStable { alpha, eps } = problem.kind else {
        return Err(Error::Unsupported("Lévy builder needs α-stable noise".into()));
    };
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "stability index must lie in (1, 2], got {alpha}"
        )));
    }
    check_increment(problem, dl)?;
    let column = &problem.noise * DVector::from_column_slice(dl) * eps;
    Ok(bordered(&problem.drift, &column, step))
}

/// `H1 = (Ã + Ã†)/2`, `H2 = (Ã − Ã†)/(2i)`.
pub fn hermitian_split(a: &ExtendedMatrix) -> HermitianPair {
    let adj = a.entries.adjoint();
    let h1 = (&a.entries + &adj) * C64::new(0.5, 0.0);
    // 1/(2i) = -i/2
    let h2 = (&a.entries - &adj) * C64::new(0.0, -0.5);
    HermitianPair { h1, h2 }
}

/// Block system that advances `N` samples at once.
///
/// Additive/Lévy layout, size `N(d+1)`: the first `Nd` rows hold
/// `diag(A, …, A)` and, in column `Nd + j`, sample `j`'s coupling block; the
/// last `N` rows are zero. Multiplicative layout: `diag(Ã_k^{(1)}, …)`.
pub fn assemble_multisample(problem: &SdeProblem, paths: &[NoisePath], k: usize) -> Result<ExtendedMatrix> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("sample paths"));
    }
    let d = problem.dim();
    let n = paths.len();
    let blocks = paths
        .iter()
        .map(|p| problem.extended_matrix(p, k))
        .collect::<Result<Vec<_>>>()?;
    if problem.kind.is_additive() {
        let mut entries = CMatrix::zeros(n * (d + 1), n * (d + 1));
        for (j, block) in blocks.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    entries[(j * d + r, j * d + c)] = block.entries[(r, c)];
                }
                entries[(j * d + r, n * d + j)] = block.entries[(r, d)];
            }
        }
        Ok(ExtendedMatrix { entries, step: k })
    } else {
        let mut entries = CMatrix::zeros(n * d, n * d);
        for (j, block) in blocks.iter().enumerate() {
            entries.view_mut((j * d, j * d), (d, d)).copy_from(&block.entries);
        }
        Ok(ExtendedMatrix { entries, step: k })
    }
}

/// Initial state matching [`assemble_multisample`]'s layout.
pub fn multisample_initial(problem: &SdeProblem, samples: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(samples * problem.extended_dim());
    for _ in 0..samples {
        z.extend(problem.x0.iter());
    }
    if let Some(aux) = problem.auxiliary_value() {
        z.extend(std::iter::repeat_n(aux, samples));
    }
    z
}

/// Largest number of nonzeros in any row or column.
pub fn sparsity(m: &CMatrix) -> usize {
    let rows = m
        .row_iter()
        .map(|r| r.iter().filter(|x| **x != C64::new(0.0, 0.0)).count());
    let cols = m
        .column_iter()
        .map(|c| c.iter().filter(|x| **x != C64::new(0.0, 0.0)).count());
    rows.chain(cols).max().unwrap_or(0)
}
