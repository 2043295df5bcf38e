//! The auxiliary `p` grid and the discrete Fourier pair between grid values
//! and Fourier coefficients.
//!
//! Grid values are stored grid-major (`index = j * channels + h`) and
//! coefficients frequency-major (`index = l * channels + h`). With
//! `μ_l = π(l − N)/L` (0-based `l`) the pair is
//!
//! ```text
//! w_h(p_j) = Σ_l c_l^{(h)} e^{i μ_l (p_j + L)} = (−1)^j · IDFT(c^{(h)})_j
//! c^{(h)}  = DFT((−1)^j w_h(p_j)) / 2N
//! ```
//!
//! so `‖w‖² = 2N ‖c‖²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::linalg::C64;
use crate::{Error, Result};

/// `e^{-L}` above this is flagged: the periodic box is too small for the
/// warped initial data to decay.
pub const BOUNDARY_DECAY_THRESHOLD: f64 = 1e-4;

#[derive(Clone)]
pub struct SpectralGrid {
    half_width: f64,
    dp: f64,
    two_n: usize,
    points: Vec<f64>,
    freqs: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("half_width", &self.half_width)
            .field("dp", &self.dp)
            .field("two_n", &self.two_n)
            .finish_non_exhaustive()
    }
}

impl SpectralGrid {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    /// Number of grid points `2N`.
    pub fn len(&self) -> usize {
        self.two_n
    }

    pub fn is_empty(&self) -> bool {
        self.two_n == 0
    }

    /// `p_j = −L + j Δp`, `j = 0..2N`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `μ_l = π(l − N)/L`, `l = 0..2N`.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// `max_l |μ_l| = πN/L`.
    pub fn max_freq(&self) -> f64 {
        self.freqs[0].abs()
    }

    pub fn boundary_decay(&self) -> f64 {
        (-self.half_width).exp()
    }

    pub fn boundary_warning(&self) -> bool {
        self.boundary_decay() > BOUNDARY_DECAY_THRESHOLD
    }
}

/// Builds the grid on `[−L, L)` with spacing `dp`; `2L/dp` must be an even
/// integer (to relative tolerance `1e-9`).
pub fn build_grid(half_width: f64, dp: f64) -> Result<SpectralGrid> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half-width must be positive, got {half_width}"
        )));
    }
    if !(dp > 0.0 && dp.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {dp}"
        )));
    }
    let ratio = 2.0 * half_width / dp;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 * ratio || rounded < 2.0 || !(rounded as u64).is_multiple_of(2) {
        return Err(Error::GridNotIntegral { half_width, dp, ratio });
    }
    let two_n = rounded as usize;
    let n = two_n / 2;
    let points = (0..two_n).map(|j| -half_width + j as f64 * dp).collect();
    let freqs = (0..two_n).map(|l| PI * (l as f64 - n as f64) / half_width).collect();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(two_n);
    let inverse = planner.plan_fft_inverse(two_n);
    Ok(SpectralGrid {
        half_width,
        dp,
        two_n,
        points,
        freqs,
        forward,
        inverse,
    })
}

/// Grid values `v_h(t, p_j)`, grid-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub values: Vec<C64>,
    pub channels: usize,
    pub t: f64,
}

impl GridState {
    pub fn at(&self, j: usize) -> &[C64] {
        &self.values[j * self.channels..(j + 1) * self.channels]
    }

    pub fn points(&self) -> usize {
        self.values.len() / self.channels
    }
}

/// Fourier coefficients `c_l^{(h)}(t)`, frequency-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub coeffs: Vec<C64>,
    pub channels: usize,
    pub t: f64,
}

impl CoefficientState {
    pub fn mode(&self, l: usize) -> &[C64] {
        &self.coeffs[l * self.channels..(l + 1) * self.channels]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `Σ_l (1 + μ_l²) ‖c_l‖²`, the discrete H¹ energy.
    pub fn h1_energy(&self, grid: &SpectralGrid) -> f64 {
        self.coeffs
            .chunks_exact(self.channels)
            .zip(grid.freqs())
            .map(|(block, mu)| (1.0 + mu * mu) * block.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// `v(0, p_j) = e^{−|p_j|} z_0`.
pub fn warped_initial(z0: &[f64], grid: &SpectralGrid) -> GridState {
    let channels = z0.len();
    let mut values = Vec::with_capacity(grid.len() * channels);
    for &p in grid.points() {
        let decay = (-p.abs()).exp();
        values.extend(z0.iter().map(|&z| C64::new(decay * z, 0.0)));
    }
    GridState {
        values,
        channels,
        t: 0.0,
    }
}

fn check_len(found: usize, channels: usize, grid: &SpectralGrid) -> Result<()> {
    if channels == 0 || found != grid.len() * channels {
        return Err(Error::DimensionMismatch {
            context: "spectral state length",
            expected: grid.len() * channels.max(1),
            found,
        });
    }
    Ok(())
}

fn alternate(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Grid values to Fourier coefficients.
pub fn to_coefficients(w: &GridState, grid: &SpectralGrid) -> Result<CoefficientState> {
    check_len(w.values.len(), w.channels, grid)?;
    let (n, ch) = (grid.len(), w.channels);
    let scale = 1.0 / n as f64;
    let mut coeffs = vec![C64::new(0.0, 0.0); n * ch];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for h in 0..ch {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = w.values[j * ch + h] * alternate(j);
        }
        grid.forward.process(&mut buf);
        for (l, b) in buf.iter().enumerate() {
            coeffs[l * ch + h] = b * scale;
        }
    }
    Ok(CoefficientState {
        coeffs,
        channels: ch,
        t: w.t,
    })
}

/// Fourier coefficients to grid values.
pub fn from_coefficients(c: &CoefficientState, grid: &SpectralGrid) -> Result<GridState> {
    check_len(c.coeffs.len(), c.channels, grid)?;
    let (n, ch) = (grid.len(), c.channels);
    let mut values = vec![C64::new(0.0, 0.0); n * ch];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for h in 0..ch {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = c.coeffs[l * ch + h];
        }
        grid.inverse.process(&mut buf);
        for (j, b) in buf.iter().enumerate() {
            values[j * ch + h] = b * alternate(j);
        }
    }
    Ok(GridState {
        values,
        channels: ch,
        t: c.t,
    })
}

/// Trigonometric interpolant `Σ_l c_l e^{iμ_l(p+L)}` at an arbitrary `p`.
pub fn evaluate_at(c: &CoefficientState, p: f64, grid: &SpectralGrid) -> Result<Vec<C64>> {
    check_len(c.coeffs.len(), c.channels, grid)?;
    let half = grid.half_width();
    if !(-half..=half).contains(&p) {
        return Err(Error::OutOfDomain { p, half_width: half });
    }
    let mut out = vec![C64::new(0.0, 0.0); c.channels];
    for (block, mu) in c.coeffs.chunks_exact(c.channels).zip(grid.freqs()) {
        let phase = C64::from_polar(1.0, mu * (p + half));
        for (o, x) in out.iter_mut().zip(block) {
            *o += x * phase;
        }
    }
    Ok(out)
}
