//! Recovery of the SDE state from the warped variable by normalized
//! integration over a window `[p*, p_right)` of the auxiliary grid.

use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_max_eigenvalue, C64};
use crate::model::HermitianPair;
use crate::spectral::{GridState, SpectralGrid};
use crate::{Error, Result};

/// How the left end `p*` of the recovery window is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum RecoveryWindow {
    /// `[p_star, p_right)`.
    Fixed { p_star: f64, p_right: f64 },
    /// `p* = λ⁺max(H1) T + margin`, maximum taken over all steps.
    EigBound { margin: f64, p_right: f64 },
    /// `p*(t) = argmax_j |v(t, p_j)| + offset`, re-evaluated at every `t_k`.
    Moving { offset: f64, p_right: f64 },
    /// `p* = T max_k ‖b_k‖ / 4` with `b_k` the coupling column of `Ã_k`
    /// (additive and Lévy noise only).
    CouplingBound { p_right: f64 },
}

/// Per-sample quantities some windows depend on.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowContext {
    pub t_final: f64,
    /// `max_k λ⁺max(H1,k)`, zero when no eigenvalue is positive.
    pub lambda_plus_max: Option<f64>,
    /// `max_k ‖b_k‖₂`.
    pub coupling_max: Option<f64>,
}

impl RecoveryWindow {
    pub fn p_right(&self) -> f64 {
        match *self {
            RecoveryWindow::Fixed { p_right, .. }
            | RecoveryWindow::EigBound { p_right, .. }
            | RecoveryWindow::Moving { p_right, .. }
            | RecoveryWindow::CouplingBound { p_right } => p_right,
        }
    }

    pub fn needs_eigen_bound(&self) -> bool {
        matches!(self, RecoveryWindow::EigBound { .. })
    }

    pub fn needs_coupling(&self) -> bool {
        matches!(self, RecoveryWindow::CouplingBound { .. })
    }

    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        let p_right = self.p_right();
        if !p_right.is_finite() || p_right > grid.half_width() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "window right end {p_right} must not exceed the half-width {}",
                grid.half_width()
            )));
        }
        match *self {
            RecoveryWindow::Fixed { p_star, p_right } if !(p_star < p_right) => Err(Error::InvalidParameter(format!(
                "window [{p_star}, {p_right}) is empty"
            ))),
            RecoveryWindow::EigBound { margin, .. } if !(margin >= 0.0) => Err(Error::InvalidParameter(format!(
                "eigenvalue margin must be ≥ 0, got {margin}"
            ))),
            RecoveryWindow::Moving { offset, .. } if !(offset > 0.0) => Err(Error::InvalidParameter(format!(
                "moving offset must be > 0, got {offset}"
            ))),
            _ => Ok(()),
        }
    }

    /// Resolved `(p_star, p_right)` for the state `w` at the current time.
    pub fn resolve(
        &self,
        ctx: &WindowContext,
        w: &GridState,
        grid: &SpectralGrid,
        solution_channels: usize,
    ) -> Result<(f64, f64)> {
        let p_right = self.p_right();
        let p_star = match *self {
            RecoveryWindow::Fixed { p_star, .. } => p_star,
            RecoveryWindow::EigBound { margin, .. } => {
                let lambda = ctx
                    .lambda_plus_max
                    .ok_or_else(|| Error::Unsupported("eigenvalue window needs the per-step spectra".into()))?;
                lambda.max(0.0) * ctx.t_final + margin
            }
            RecoveryWindow::Moving { offset, .. } => moving_pstar(w, grid, solution_channels, offset)?,
            RecoveryWindow::CouplingBound { .. } => {
                let b = ctx
                    .coupling_max
                    .ok_or_else(|| Error::Unsupported("coupling window needs additive or Lévy noise".into()))?;
                ctx.t_final * b / 4.0
            }
        };
        Ok((p_star, p_right))
    }
}

fn snap(grid: &SpectralGrid) -> f64 {
    1e-9 * grid.dp()
}

/// Indices `j` with `p_star ≤ p_j < p_right`, up to a `1e-9 Δp` snap so that
/// endpoints meant to sit on the grid are not lost to rounding.
pub fn window_indices(grid: &SpectralGrid, p_star: f64, p_right: f64) -> std::ops::Range<usize> {
    let tol = snap(grid);
    let pts = grid.points();
    let start = pts.partition_point(|&p| p < p_star - tol);
    let end = pts.partition_point(|&p| p < p_right - tol);
    start..end.max(start)
}

/// `Σ_{p_j ∈ U} w(p_j) / Σ_{p_j ∈ U} e^{−p_j}` over `U = [p_star, p_right)`.
pub fn normalized_integration(w: &GridState, grid: &SpectralGrid, p_star: f64, p_right: f64) -> Result<Vec<C64>> {
    if w.values.len() != grid.len() * w.channels {
        return Err(Error::DimensionMismatch {
            context: "grid state length",
            expected: grid.len() * w.channels,
            found: w.values.len(),
        });
    }
    let range = window_indices(grid, p_star, p_right);
    if range.len() < 2 {
        return Err(Error::EmptyWindow {
            p_star,
            p_right,
            points: range.len(),
        });
    }
    let mut num = vec![C64::new(0.0, 0.0); w.channels];
    let mut den = 0.0;
    for j in range {
        den += (-grid.points()[j]).exp();
        for (acc, v) in num.iter_mut().zip(w.at(j)) {
            *acc += v;
        }
    }
    Ok(num.into_iter().map(|x| x / den).collect())
}

/// `T · max_k λ⁺max(H1,k) + margin`.
pub fn eig_bound_pstar(pairs: &[HermitianPair], t_final: f64, margin: f64) -> Result<f64> {
    Ok(lambda_plus_max(pairs)? * t_final + margin)
}

/// `max_k λ⁺max(H1,k)`, or zero when every `H1,k` is negative semi-definite.
pub fn lambda_plus_max(pairs: &[HermitianPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("Hermitian pairs"));
    }
    let mut best = 0.0_f64;
    for pair in pairs {
        best = best.max(hermitian_max_eigenvalue(&pair.h1)?);
    }
    Ok(best)
}

/// Grid point maximizing the Euclidean norm of the first `solution_channels`
/// channels, plus `offset`. Ties go to the smallest `p`.
pub fn moving_pstar(w: &GridState, grid: &SpectralGrid, solution_channels: usize, offset: f64) -> Result<f64> {
    let ch = solution_channels.clamp(1, w.channels);
    let mut best = (0usize, 0.0_f64);
    for j in 0..w.points() {
        let norm: f64 = w.at(j)[..ch].iter().map(|v| v.norm_sqr()).sum();
        if norm > best.1 {
            best = (j, norm);
        }
    }
    if best.1 == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(grid.points()[best.0] + offset)
}
