//! Time stepping of the Fourier-coefficient system
//! `dc_l/dt = −i(μ_l H1,k − H2,k) c_l` on each SDE interval.
//!
//! Two steppers are provided: the three-stage i-stable Runge–Kutta scheme
//! (`R(z) = 1 + z + z²/2 + z³/6`) and an exact per-mode unitary propagator.
//! The sample drivers run RK2 on a real split representation that only
//! stores the modes with `μ_l ≤ 0`: for real `Ã_k` and real initial data the
//! remaining coefficients are complex conjugates.

use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_propagator, CMatrix, C64};
use crate::model::{hermitian_split, ExtendedMatrix, HermitianPair, SdeProblem};
use crate::noise::NoisePath;
use crate::recover::{lambda_plus_max, normalized_integration, RecoveryWindow, WindowContext};
use crate::spectral::{from_coefficients, to_coefficients, warped_initial, CoefficientState, SpectralGrid};
use crate::{Error, Result};

/// `√3`, where `|R(iy)| = 1` on the imaginary axis.
pub const IMAGINARY_AXIS_LIMIT: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    #[default]
    Rk2,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepOptions {
    pub stepper: Stepper,
    /// Minimum number of RK2 steps per SDE interval.
    pub substeps: usize,
    /// Subdivide further whenever the stability indicator exceeds `√3`.
    pub adaptive: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            stepper: Stepper::Rk2,
            substeps: 1,
            adaptive: true,
        }
    }
}

impl StepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        Ok(())
    }

    /// RK2 steps used on an interval whose one-step indicator is `indicator`.
    pub fn substeps_for(&self, indicator: f64) -> usize {
        if self.stepper == Stepper::Exact {
            return 1;
        }
        let mut n = self.substeps.max(1);
        if self.adaptive && indicator / n as f64 > IMAGINARY_AXIS_LIMIT {
            n = (indicator / IMAGINARY_AXIS_LIMIT).ceil() as usize;
            while indicator / n as f64 > IMAGINARY_AXIS_LIMIT {
                n += 1;
            }
        }
        n
    }
}

/// One interval's generator together with how to advance it.
#[derive(Debug, Clone)]
pub struct StepOperator<'a> {
    pub pair: &'a HermitianPair,
    pub stepper: Stepper,
    pub substeps: usize,
}

impl StepOperator<'_> {
    pub fn advance(&self, c: &CoefficientState, grid: &SpectralGrid, h: f64) -> Result<CoefficientState> {
        match self.stepper {
            Stepper::Exact => step_exact(c, self.pair, grid, h),
            Stepper::Rk2 => {
                let n = self.substeps.max(1);
                let sub = h / n as f64;
                let mut state = step_rk2(c, self.pair, grid, sub)?;
                for _ in 1..n {
                    state = step_rk2(&state, self.pair, grid, sub)?;
                }
                Ok(state)
            }
        }
    }
}

fn check_pair(c: &CoefficientState, pair: &HermitianPair, grid: &SpectralGrid) -> Result<()> {
    let d = pair.dim();
    if c.channels != d || c.coeffs.len() != grid.len() * d {
        return Err(Error::DimensionMismatch {
            context: "coefficient state vs generator",
            expected: grid.len() * d,
            found: c.coeffs.len(),
        });
    }
    Ok(())
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {h}")));
    }
    Ok(())
}

/// `F c` with `F = −i(D_μ ⊗ H1 − I ⊗ H2)`, applied mode by mode.
pub fn apply_generator(c: &CoefficientState, pair: &HermitianPair, grid: &SpectralGrid) -> Result<CoefficientState> {
    check_pair(c, pair, grid)?;
    let d = pair.dim();
    let minus_i = C64::new(0.0, -1.0);
    let mut out = vec![C64::new(0.0, 0.0); c.coeffs.len()];
    for (l, &mu) in grid.freqs().iter().enumerate() {
        let x = &c.coeffs[l * d..(l + 1) * d];
        for r in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for (col, xc) in x.iter().enumerate() {
                acc += (pair.h1[(r, col)] * mu - pair.h2[(r, col)]) * xc;
            }
            out[l * d + r] = minus_i * acc;
        }
    }
    Ok(CoefficientState {
        coeffs: out,
        channels: d,
        t: c.t,
    })
}

fn axpy(x: &CoefficientState, a: f64, y: &CoefficientState) -> CoefficientState {
    CoefficientState {
        coeffs: x.coeffs.iter().zip(&y.coeffs).map(|(u, v)| u + v * a).collect(),
        channels: x.channels,
        t: x.t,
    }
}

/// `K1 = Fc`, `K2 = F(c + hK1/3)`, `K3 = F(c + hK2/2)`, `c' = c + hK3`.
pub fn step_rk2(c: &CoefficientState, pair: &HermitianPair, grid: &SpectralGrid, h: f64) -> Result<CoefficientState> {
    check_step(h)?;
    let k1 = apply_generator(c, pair, grid)?;
    let k2 = apply_generator(&axpy(c, h / 3.0, &k1), pair, grid)?;
    let k3 = apply_generator(&axpy(c, h / 2.0, &k2), pair, grid)?;
    let mut next = axpy(c, h, &k3);
    next.t = c.t + h;
    Ok(next)
}

/// Mode `l` multiplied by `exp(−i(μ_l H1 − H2)h)`.
pub fn step_exact(c: &CoefficientState, pair: &HermitianPair, grid: &SpectralGrid, h: f64) -> Result<CoefficientState> {
    check_step(h)?;
    check_pair(c, pair, grid)?;
    let d = pair.dim();
    let mut out = Vec::with_capacity(c.coeffs.len());
    for (l, &mu) in grid.freqs().iter().enumerate() {
        let g: CMatrix = &pair.h1 * C64::new(mu, 0.0) - &pair.h2;
        let u = hermitian_propagator(&g, h)?;
        let x = nalgebra::DVector::from_column_slice(&c.coeffs[l * d..(l + 1) * d]);
        out.extend((u * x).iter());
    }
    Ok(CoefficientState {
        coeffs: out,
        channels: d,
        t: c.t + h,
    })
}

/// `h · μ_max · (‖H1‖_F + ‖H2‖_F)`, a cheap bound on `h · max_l ρ(μ_l H1 − H2)`.
pub fn stability_indicator(pair: &HermitianPair, grid: &SpectralGrid, h: f64) -> f64 {
    h * grid.max_freq() * (pair.h1.norm() + pair.h2.norm())
}

/// Coefficients of the modes `l = 0..=N` as real and imaginary parts,
/// channel-major (`index = h * modes + l`).
#[derive(Debug, Clone)]
struct HalfSpectrum {
    channels: usize,
    modes: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    mus: Vec<f64>,
}

impl HalfSpectrum {
    fn from_state(c: &CoefficientState, grid: &SpectralGrid) -> Self {
        let modes = grid.len() / 2 + 1;
        let ch = c.channels;
        let mut re = vec![0.0; ch * modes];
        let mut im = vec![0.0; ch * modes];
        for l in 0..modes {
            for h in 0..ch {
                let v = c.coeffs[l * ch + h];
                re[h * modes + l] = v.re;
                im[h * modes + l] = v.im;
            }
        }
        HalfSpectrum {
            channels: ch,
            modes,
            re,
            im,
            mus: grid.freqs()[..modes].to_vec(),
        }
    }

    fn to_state(&self, grid: &SpectralGrid, t: f64) -> CoefficientState {
        let two_n = grid.len();
        let ch = self.channels;
        let mut coeffs = vec![C64::new(0.0, 0.0); two_n * ch];
        for l in 0..self.modes {
            for h in 0..ch {
                let v = C64::new(self.re[h * self.modes + l], self.im[h * self.modes + l]);
                coeffs[l * ch + h] = v;
                if l > 0 && l < self.modes - 1 {
                    coeffs[(two_n - l) * ch + h] = v.conj();
                }
            }
        }
        CoefficientState {
            coeffs,
            channels: ch,
            t,
        }
    }

    fn rk2(&mut self, s: &[f64], k: &[f64], h: f64) {
        match self.channels {
            1 => self.rk2_fixed::<1>(s, k, h),
            2 => self.rk2_fixed::<2>(s, k, h),
            3 => self.rk2_fixed::<3>(s, k, h),
            4 => self.rk2_fixed::<4>(s, k, h),
            _ => unreachable!("half-spectrum stepping is limited to four channels"),
        }
    }

    fn rk2_fixed<const D: usize>(&mut self, s: &[f64], k: &[f64], h: f64) {
        let mut sm = [[0.0; D]; D];
        let mut km = [[0.0; D]; D];
        for r in 0..D {
            for c in 0..D {
                sm[r][c] = s[r * D + c];
                km[r][c] = k[r * D + c];
            }
        }
        let n = self.modes;
        let (re, im) = (&mut self.re[..D * n], &mut self.im[..D * n]);
        let mus = &self.mus[..n];
        // y = (−iμS + K) x on real and imaginary parts
        let apply = |mu: f64, xr: &[f64; D], xi: &[f64; D]| {
            let mut yr = [0.0; D];
            let mut yi = [0.0; D];
            for r in 0..D {
                let (mut sr, mut si, mut kr, mut ki) = (0.0, 0.0, 0.0, 0.0);
                for c in 0..D {
                    sr += sm[r][c] * xr[c];
                    si += sm[r][c] * xi[c];
                    kr += km[r][c] * xr[c];
                    ki += km[r][c] * xi[c];
                }
                yr[r] = mu * si + kr;
                yi[r] = ki - mu * sr;
            }
            (yr, yi)
        };
        let (third, half) = (h / 3.0, h / 2.0);
        for l in 0..n {
            let mu = mus[l];
            let mut xr = [0.0; D];
            let mut xi = [0.0; D];
            for c in 0..D {
                xr[c] = re[c * n + l];
                xi[c] = im[c * n + l];
            }
            let (k1r, k1i) = apply(mu, &xr, &xi);
            let mut tr = [0.0; D];
            let mut ti = [0.0; D];
            for c in 0..D {
                tr[c] = xr[c] + third * k1r[c];
                ti[c] = xi[c] + third * k1i[c];
            }
            let (k2r, k2i) = apply(mu, &tr, &ti);
            for c in 0..D {
                tr[c] = xr[c] + half * k2r[c];
                ti[c] = xi[c] + half * k2i[c];
            }
            let (k3r, k3i) = apply(mu, &tr, &ti);
            for c in 0..D {
                re[c * n + l] = xr[c] + h * k3r[c];
                im[c * n + l] = xi[c] + h * k3i[c];
            }
        }
    }
}

enum Modes {
    Half(HalfSpectrum),
    Full(CoefficientState),
}

impl Modes {
    fn state(&self, grid: &SpectralGrid, t: f64) -> CoefficientState {
        match self {
            Modes::Half(half) => half.to_state(grid, t),
            Modes::Full(c) => {
                let mut c = c.clone();
                c.t = t;
                c
            }
        }
    }
}

/// `(Ã + Ãᵀ)/2` and `(Ã − Ãᵀ)/2` for a real `Ã`, row-major.
fn real_split(a: &ExtendedMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let mut s = vec![0.0; n * n];
    let mut k = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (a.entries[(r, c)], a.entries[(c, r)]);
            if x.im != 0.0 {
                return Err(Error::Unsupported("half-spectrum stepping needs a real Ã".into()));
            }
            s[r * n + c] = 0.5 * (x.re + y.re);
            k[r * n + c] = 0.5 * (x.re - y.re);
        }
    }
    Ok((s, k))
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Stepping diagnostics of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Largest stability indicator over the steps actually taken.
    pub stability_max: f64,
    pub max_substeps: usize,
    /// Intervals on which adaptive subdivision was triggered.
    pub subdivided_steps: usize,
}

fn check_path(problem: &SdeProblem, path: &NoisePath) -> Result<()> {
    problem.validate()?;
    if path.steps != problem.steps {
        return Err(Error::DimensionMismatch {
            context: "noise path steps",
            expected: problem.steps,
            found: path.steps,
        });
    }
    if path.channels != problem.noise_dim() {
        return Err(Error::DimensionMismatch {
            context: "noise path channels",
            expected: problem.noise_dim(),
            found: path.channels,
        });
    }
    if (path.dt - problem.dt()).abs() > 1e-12 * problem.dt() {
        return Err(Error::InvalidParameter(format!(
            "noise path step {} does not match the problem step {}",
            path.dt,
            problem.dt()
        )));
    }
    Ok(())
}

/// Extended matrices of every step and the window context they induce.
pub fn path_matrices(
    problem: &SdeProblem,
    path: &NoisePath,
    need_eigen: bool,
) -> Result<(Vec<ExtendedMatrix>, WindowContext)> {
    check_path(problem, path)?;
    let mats = (0..problem.steps)
        .map(|k| problem.extended_matrix(path, k))
        .collect::<Result<Vec<_>>>()?;
    let d = problem.dim();
    let coupling_max = problem.kind.is_additive().then(|| {
        mats.iter()
            .map(|m| (0..d).map(|r| m.entries[(r, d)].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    });
    let lambda = if need_eigen {
        let pairs: Vec<HermitianPair> = mats.iter().map(hermitian_split).collect();
        Some(lambda_plus_max(&pairs)?)
    } else {
        None
    };
    Ok((
        mats,
        WindowContext {
            t_final: problem.t_final,
            lambda_plus_max: lambda,
            coupling_max,
        },
    ))
}

/// Advances the warped initial state through every interval, calling
/// `observe(k, modes)` after step `k` (and with `k = 0` before the first step
/// when `every_step`).
fn drive<F>(
    problem: &SdeProblem,
    mats: &[ExtendedMatrix],
    grid: &SpectralGrid,
    options: &StepOptions,
    every_step: bool,
    mut observe: F,
) -> Result<StepDiagnostics>
where
    F: FnMut(usize, &Modes) -> Result<()>,
{
    options.validate()?;
    let z0 = problem.extended_initial();
    let c0 = to_coefficients(&warped_initial(&z0, grid), grid)?;
    let half = options.stepper == Stepper::Rk2 && z0.len() <= 4;
    let mut modes = if half {
        Modes::Half(HalfSpectrum::from_state(&c0, grid))
    } else {
        Modes::Full(c0)
    };
    if every_step {
        observe(0, &modes)?;
    }
    let dt = problem.dt();
    let mut diag = StepDiagnostics::default();
    for (k, a) in mats.iter().enumerate() {
        match &mut modes {
            Modes::Half(state) => {
                let (s, skew) = real_split(a)?;
                let indicator = dt * grid.max_freq() * (frobenius(&s) + frobenius(&skew));
                let n = options.substeps_for(indicator);
                if n > options.substeps {
                    diag.subdivided_steps += 1;
                }
                diag.max_substeps = diag.max_substeps.max(n);
                diag.stability_max = diag.stability_max.max(indicator / n as f64);
                let h = dt / n as f64;
                for _ in 0..n {
                    state.rk2(&s, &skew, h);
                }
            }
            Modes::Full(state) => {
                let pair = hermitian_split(a);
                let indicator = stability_indicator(&pair, grid, dt);
                let n = options.substeps_for(indicator);
                if n > options.substeps && options.stepper == Stepper::Rk2 {
                    diag.subdivided_steps += 1;
                }
                diag.max_substeps = diag.max_substeps.max(n);
                diag.stability_max = diag.stability_max.max(indicator / n as f64);
                let op = StepOperator {
                    pair: &pair,
                    stepper: options.stepper,
                    substeps: n,
                };
                *state = op.advance(state, grid, dt)?;
            }
        }
        if every_step || k + 1 == mats.len() {
            observe(k + 1, &modes)?;
        }
    }
    Ok(diag)
}

/// Recovered value at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    /// Real parts of the first `d` channels.
    pub values: Vec<f64>,
    /// Real part of the auxiliary channel (additive and Lévy noise).
    pub auxiliary: Option<f64>,
    /// `‖Im‖/‖Re‖` over the solution channels.
    pub imag_ratio: f64,
    pub window: (f64, f64),
}

fn recover_one(
    problem: &SdeProblem,
    c: &CoefficientState,
    grid: &SpectralGrid,
    ctx: &WindowContext,
    windows: &[RecoveryWindow],
) -> Result<Vec<Recovered>> {
    let w = from_coefficients(c, grid)?;
    let d = problem.dim();
    windows
        .iter()
        .map(|window| {
            let (p_star, p_right) = window.resolve(ctx, &w, grid, d)?;
            let z = normalized_integration(&w, grid, p_star, p_right)?;
            let re: f64 = z[..d].iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
            let im: f64 = z[..d].iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
            let imag_ratio = if im == 0.0 { 0.0 } else { im / re };
            Ok(Recovered {
                values: z[..d].iter().map(|v| v.re).collect(),
                auxiliary: problem.kind.is_additive().then(|| z[d].re),
                imag_ratio,
                window: (p_star, p_right),
            })
        })
        .collect()
}

/// Recovered trajectory of one sample at `t_0, …, t_{N_T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Recovered>,
    /// `max_k ‖Im‖/‖Re‖`.
    pub imag_residual: f64,
    pub diagnostics: StepDiagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> &Recovered {
        self.states.last().expect("trajectory includes t_0")
    }
}

/// Full pipeline for one sample: warp, transform, step, recover at every `t_k`.
pub fn simulate_sample(
    problem: &SdeProblem,
    path: &NoisePath,
    grid: &SpectralGrid,
    options: &StepOptions,
    window: RecoveryWindow,
) -> Result<Trajectory> {
    window.validate(grid)?;
    let (mats, ctx) = path_matrices(problem, path, window.needs_eigen_bound())?;
    let mut states = Vec::with_capacity(problem.steps + 1);
    let windows = [window];
    let diagnostics = drive(problem, &mats, grid, options, true, |k, modes| {
        let c = modes.state(grid, problem.time(k));
        states.push(recover_one(problem, &c, grid, &ctx, &windows)?.remove(0));
        Ok(())
    })?;
    let imag_residual = states.iter().map(|s| s.imag_ratio).fold(0.0, f64::max);
    Ok(Trajectory {
        times: (0..=problem.steps).map(|k| problem.time(k)).collect(),
        states,
        imag_residual,
        diagnostics,
    })
}

/// Final-time recovery under several windows, sharing one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalRecovery {
    pub per_window: Vec<Recovered>,
    pub imag_residual: f64,
    pub diagnostics: StepDiagnostics,
}

/// Like [`simulate_sample`] but only recovers at `T`. Moving windows are
/// resolved on the final state.
pub fn simulate_final(
    problem: &SdeProblem,
    path: &NoisePath,
    grid: &SpectralGrid,
    options: &StepOptions,
    windows: &[RecoveryWindow],
) -> Result<FinalRecovery> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("recovery windows"));
    }
    for w in windows {
        w.validate(grid)?;
    }
    let need_eigen = windows.iter().any(RecoveryWindow::needs_eigen_bound);
    let (mats, ctx) = path_matrices(problem, path, need_eigen)?;
    let mut per_window = Vec::new();
    let diagnostics = drive(problem, &mats, grid, options, false, |k, modes| {
        let c = modes.state(grid, problem.time(k));
        per_window = recover_one(problem, &c, grid, &ctx, windows)?;
        Ok(())
    })?;
    let imag_residual = per_window.iter().map(|r| r.imag_ratio).fold(0.0, f64::max);
    Ok(FinalRecovery {
        per_window,
        imag_residual,
        diagnostics,
    })
}

/// Coefficient states at every `t_k` (no recovery), for diagnostics and tests.
pub fn coefficient_trajectory(
    problem: &SdeProblem,
    path: &NoisePath,
    grid: &SpectralGrid,
    options: &StepOptions,
) -> Result<(Vec<CoefficientState>, StepDiagnostics)> {
    let (mats, _) = path_matrices(problem, path, false)?;
    let mut out = Vec::with_capacity(problem.steps + 1);
    let diag = drive(problem, &mats, grid, options, true, |k, modes| {
        out.push(modes.state(grid, problem.time(k)));
        Ok(())
    })?;
    Ok((out, diag))
}
