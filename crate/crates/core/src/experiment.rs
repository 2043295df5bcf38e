//! Experiment presets, the Monte Carlo driver and CSV/JSON reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{convergence_order, gate_complexity, mae, mse, ComplexityEstimate, Metric, OrderFit};
use crate::evolve::{simulate_final, StepOptions};
use crate::linalg::RMatrix;
use crate::model::{NoiseKind, SdeProblem, DEFAULT_LEVY_SCALE};
use crate::noise::{gaussian_path, stable_path_isotropic, NoisePath};
use crate::recover::RecoveryWindow;
use crate::reference::{
    euler_maruyama, exact_approx_additive, exact_approx_multiplicative, explicit_solution, milstein_1d,
};
use crate::spectral::build_grid;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "preset",
    "T",
    "dt",
    "dp",
    "window",
    "metric",
    "value",
    "n_samples",
    "seed",
    "imag_residual",
    "stability_max",
];

/// Label of the Euler–Maruyama comparison rows.
pub const EM_LABEL: &str = "EM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ou,
    Gbm,
    Levy,
    Custom,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Ou => "ou",
            Preset::Gbm => "gbm",
            Preset::Levy => "levy",
            Preset::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ou" => Ok(Preset::Ou),
            "gbm" => Ok(Preset::Gbm),
            "levy" => Ok(Preset::Levy),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Additive,
    Multiplicative,
    Stable,
}

/// Matrices of a linear SDE as they appear in a config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// `d × d`, row by row.
    pub drift: Vec<Vec<f64>>,
    /// `d × m` (additive and stable noise).
    #[serde(default)]
    pub noise: Vec<Vec<f64>>,
    /// `m` matrices of size `d × d` (multiplicative noise).
    #[serde(default)]
    pub noise_mult: Vec<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<RMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what} rows have different lengths")));
    }
    Ok(RMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

impl ProblemSpec {
    pub fn build(&self, t_final: f64, steps: usize) -> Result<SdeProblem> {
        let drift = matrix(&self.drift, "drift")?;
        let x0 = DVector::from_column_slice(&self.x0);
        match self.kind {
            ProblemKind::Additive => SdeProblem::additive(drift, matrix(&self.noise, "noise")?, x0, t_final, steps),
            ProblemKind::Multiplicative => {
                let bs = self
                    .noise_mult
                    .iter()
                    .map(|b| matrix(b, "noise_mult"))
                    .collect::<Result<Vec<_>>>()?;
                SdeProblem::multiplicative(drift, bs, x0, t_final, steps)
            }
            ProblemKind::Stable => SdeProblem::stable(
                drift,
                matrix(&self.noise, "noise")?,
                x0,
                self.alpha
                    .ok_or_else(|| Error::Config("stable noise needs `alpha`".into()))?,
                self.eps.unwrap_or(DEFAULT_LEVY_SCALE),
                t_final,
                steps,
            ),
        }
    }

    fn scalar(kind: ProblemKind, drift: f64, noise: f64, x0: f64) -> Self {
        let (noise, noise_mult) = match kind {
            ProblemKind::Multiplicative => (Vec::new(), vec![vec![vec![noise]]]),
            _ => (vec![vec![noise]], Vec::new()),
        };
        ProblemSpec {
            kind,
            drift: vec![vec![drift]],
            noise,
            noise_mult,
            x0: vec![x0],
            alpha: None,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRow {
    pub dt: f64,
    pub dp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub name: String,
    #[serde(flatten)]
    pub window: RecoveryWindow,
}

/// What the recovered state and Euler–Maruyama are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// Exact propagation of the approximate equation.
    Approximate,
    /// Closed-form pathwise solution.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub problem: ProblemSpec,
    /// Grid half-width `L`.
    pub half_width: f64,
    pub t_final: f64,
    pub rows: Vec<MeshRow>,
    pub windows: Vec<WindowSpec>,
    pub samples: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub step: StepOptions,
    #[serde(default)]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub comparator: Option<Comparator>,
    #[serde(default = "yes")]
    pub include_em: bool,
    #[serde(default)]
    pub parallel_rows: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_101;

fn fixed(name: &str, p_star: f64) -> WindowSpec {
    WindowSpec {
        name: name.into(),
        window: RecoveryWindow::Fixed { p_star, p_right: 10.0 },
    }
}

impl ExperimentConfig {
    /// Parameter sets of the three worked examples; `custom` starts from the
    /// noiseless scalar equation `dX = −X dt`.
    pub fn preset(preset: Preset) -> Self {
        let gaussian_rows = vec![
            MeshRow { dt: 2e-3, dp: 8e-2 },
            MeshRow { dt: 1e-3, dp: 4e-2 },
            MeshRow { dt: 5e-4, dp: 2e-2 },
        ];
        let (problem, rows, windows) = match preset {
            Preset::Ou => (
                ProblemSpec::scalar(ProblemKind::Additive, -1.0, 1.0, 1.0),
                gaussian_rows,
                vec![
                    fixed("Int", 1.5),
                    WindowSpec {
                        name: "Intp".into(),
                        window: RecoveryWindow::CouplingBound { p_right: 10.0 },
                    },
                ],
            ),
            Preset::Levy => {
                let mut p = ProblemSpec::scalar(ProblemKind::Stable, -1.0, 1.0, 1.0);
                p.alpha = Some(1.5);
                p.eps = Some(DEFAULT_LEVY_SCALE);
                (p, gaussian_rows, vec![fixed("Int", 1.5)])
            }
            Preset::Gbm => (
                ProblemSpec::scalar(ProblemKind::Multiplicative, -1.0, 1.0, 1.0),
                vec![
                    MeshRow { dt: 5e-4, dp: 0.2 },
                    MeshRow { dt: 2.5e-4, dp: 0.1 },
                    MeshRow { dt: 1.25e-4, dp: 0.05 },
                ],
                vec![
                    fixed("Int2", 2.0),
                    WindowSpec {
                        name: "MovInt".into(),
                        window: RecoveryWindow::Moving {
                            offset: 1.0,
                            p_right: 10.0,
                        },
                    },
                ],
            ),
            Preset::Custom => (
                ProblemSpec::scalar(ProblemKind::Additive, -1.0, 0.0, 1.0),
                vec![MeshRow { dt: 1e-3, dp: 4e-2 }],
                vec![fixed("Int", 1.5)],
            ),
        };
        ExperimentConfig {
            preset,
            problem,
            half_width: 10.0,
            t_final: 1.0,
            rows,
            windows,
            samples: DEFAULT_SAMPLES,
            master_seed: DEFAULT_SEED,
            step: StepOptions::default(),
            metric: None,
            comparator: None,
            include_em: true,
            parallel_rows: false,
            output: None,
        }
    }

    /// Parses a TOML document. Keys it sets override the defaults of its
    /// `preset` (tables merge, arrays replace).
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let preset: Preset = match doc.get("preset") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`preset` must be a string".into())),
            None => Preset::Custom,
        };
        let base = toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(base, doc);
        let config: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::Config("at least one (dt, dp) row is required".into()));
        }
        if self.windows.is_empty() {
            return Err(Error::Config("at least one recovery window is required".into()));
        }
        self.step.validate()?;
        for row in &self.rows {
            let grid = build_grid(self.half_width, row.dp)?;
            for w in &self.windows {
                w.window
                    .validate(&grid)
                    .map_err(|e| Error::Config(format!("window `{}`: {e}", w.name)))?;
            }
            self.problem_for(row.dt)?;
        }
        Ok(())
    }

    /// The problem on the mesh with step `dt`; `T/dt` must be an integer.
    pub fn problem_for(&self, dt: f64) -> Result<SdeProblem> {
        let ratio = self.t_final / dt;
        let steps = ratio.round();
        if !(dt > 0.0) || steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "T = {} is not an integer multiple of dt = {dt}",
                self.t_final
            )));
        }
        self.problem.build(self.t_final, steps as usize)
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(match self.problem.kind {
            ProblemKind::Stable => Metric::Mae,
            _ => Metric::Mse,
        })
    }

    pub fn comparator(&self) -> Comparator {
        self.comparator.unwrap_or(match self.problem.kind {
            ProblemKind::Multiplicative => Comparator::Explicit,
            _ => Comparator::Approximate,
        })
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

/// Increments for sample `id` of `problem`.
pub fn sample_path(problem: &SdeProblem, master_seed: u64, id: u64) -> Result<NoisePath> {
    let (steps, m, dt) = (problem.steps, problem.noise_dim(), problem.dt());
    match problem.kind {
        NoiseKind::AdditiveStable { alpha, .. } => stable_path_isotropic(master_seed, id, steps, m, alpha, dt),
        _ => gaussian_path(master_seed, id, steps, m, dt),
    }
}

/// Comparator state at `T`.
pub fn comparator_final(problem: &SdeProblem, path: &NoisePath, comparator: Comparator) -> Result<Vec<f64>> {
    let path = match (comparator, problem.kind.is_additive()) {
        (Comparator::Approximate, true) => exact_approx_additive(problem, path)?,
        (Comparator::Approximate, false) => exact_approx_multiplicative(problem, path)?,
        (Comparator::Explicit, _) => explicit_solution(problem, path)?,
    };
    Ok(path.final_state())
}

struct SampleOutcome {
    per_window: Vec<Option<Vec<f64>>>,
    imag: Vec<f64>,
    stability: f64,
    substeps: usize,
    comparator: Vec<f64>,
    em: Option<Vec<f64>>,
    error: Option<String>,
}

fn run_sample(
    config: &ExperimentConfig,
    problem: &SdeProblem,
    path: &NoisePath,
    row: &MeshRow,
) -> Result<SampleOutcome> {
    let grid = build_grid(config.half_width, row.dp)?;
    let comparator = comparator_final(problem, path, config.comparator())?;
    let em = if config.include_em {
        Some(euler_maruyama(problem, path)?.final_state())
    } else {
        None
    };
    let nw = config.windows.len();
    let mut outcome = SampleOutcome {
        per_window: vec![None; nw],
        imag: vec![0.0; nw],
        stability: 0.0,
        substeps: 0,
        comparator,
        em,
        error: None,
    };
    let windows: Vec<RecoveryWindow> = config.windows.iter().map(|w| w.window).collect();
    match simulate_final(problem, path, &grid, &config.step, &windows) {
        Ok(run) => {
            for (i, r) in run.per_window.into_iter().enumerate() {
                outcome.imag[i] = r.imag_ratio;
                outcome.per_window[i] = Some(r.values);
            }
            outcome.stability = run.diagnostics.stability_max;
            outcome.substeps = run.diagnostics.max_substeps;
        }
        Err(first) => {
            // retry window by window so one bad window does not sink the rest
            outcome.error = Some(first.to_string());
            for (i, w) in windows.iter().enumerate() {
                if let Ok(run) = simulate_final(problem, path, &grid, &config.step, std::slice::from_ref(w)) {
                    let r = &run.per_window[0];
                    outcome.imag[i] = r.imag_ratio;
                    outcome.per_window[i] = Some(r.values.clone());
                    outcome.stability = outcome.stability.max(run.diagnostics.stability_max);
                    outcome.substeps = outcome.substeps.max(run.diagnostics.max_substeps);
                }
            }
        }
    }
    Ok(outcome)
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub preset: String,
    pub t_final: f64,
    pub dt: f64,
    pub dp: f64,
    pub window: String,
    pub metric: Metric,
    /// `NaN` when every sample failed.
    pub value: f64,
    /// Samples that contributed to `value`.
    pub n_samples: usize,
    pub seed: u64,
    pub imag_residual: Option<f64>,
    pub stability_max: Option<f64>,
    pub failed_samples: usize,
}

impl ReportRow {
    pub fn is_partial(&self) -> bool {
        self.failed_samples > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTiming {
    pub dt: f64,
    pub dp: f64,
    pub wall_seconds: f64,
    pub max_substeps: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub timings: Vec<RowTiming>,
}

impl RunReport {
    /// The row for window `name` at step `dt`.
    pub fn value(&self, name: &str, dt: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.window == name && (r.dt - dt).abs() <= 1e-12 * dt)
            .map(|r| r.value)
    }

    /// Values of window `name` in row order.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.window == name).map(|r| r.value).collect()
    }
}

fn run_row(config: &ExperimentConfig, row: &MeshRow) -> Result<(Vec<ReportRow>, RowTiming)> {
    let problem = config.problem_for(row.dt)?;
    let paths: Vec<NoisePath> = (0..config.samples as u64)
        .map(|id| sample_path(&problem, config.master_seed, id))
        .collect::<Result<_>>()?;
    row_from_paths(config, &problem, row, &paths)
}

fn row_from_paths(
    config: &ExperimentConfig,
    problem: &SdeProblem,
    row: &MeshRow,
    paths: &[NoisePath],
) -> Result<(Vec<ReportRow>, RowTiming)> {
    let start = Instant::now();
    let outcomes: Vec<SampleOutcome> = paths
        .par_iter()
        .map(|path| run_sample(config, problem, path, row))
        .collect::<Result<_>>()?;
    let metric = config.metric();
    let evaluate = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Result<f64> {
        if a.is_empty() {
            return Ok(f64::NAN);
        }
        Ok(match metric {
            Metric::Mse => mse(a, b)?.value,
            Metric::Mae => mae(a, b)?.value,
        })
    };
    let base = |window: &str| ReportRow {
        preset: config.preset.name().into(),
        t_final: config.t_final,
        dt: row.dt,
        dp: row.dp,
        window: window.into(),
        metric,
        value: f64::NAN,
        n_samples: 0,
        seed: config.master_seed,
        imag_residual: None,
        stability_max: None,
        failed_samples: 0,
    };
    let stability = outcomes.iter().map(|o| o.stability).fold(0.0, f64::max);
    let mut rows = Vec::new();
    for (i, w) in config.windows.iter().enumerate() {
        let (mut got, mut want, mut imag) = (Vec::new(), Vec::new(), 0.0_f64);
        for o in &outcomes {
            if let Some(v) = &o.per_window[i] {
                got.push(v.clone());
                want.push(o.comparator.clone());
                imag = imag.max(o.imag[i]);
            }
        }
        rows.push(ReportRow {
            value: evaluate(&got, &want)?,
            n_samples: got.len(),
            imag_residual: Some(imag),
            stability_max: Some(stability),
            failed_samples: outcomes.len() - got.len(),
            ..base(&w.name)
        });
    }
    if config.include_em {
        let em: Vec<Vec<f64>> = outcomes.iter().filter_map(|o| o.em.clone()).collect();
        let cmp: Vec<Vec<f64>> = outcomes.iter().map(|o| o.comparator.clone()).collect();
        rows.push(ReportRow {
            value: evaluate(&em, &cmp)?,
            n_samples: em.len(),
            ..base(EM_LABEL)
        });
    }
    let timing = RowTiming {
        dt: row.dt,
        dp: row.dp,
        wall_seconds: start.elapsed().as_secs_f64(),
        max_substeps: outcomes.iter().map(|o| o.substeps).max().unwrap_or(0),
        first_error: outcomes.iter().find_map(|o| o.error.clone()),
    };
    Ok((rows, timing))
}

/// Runs every mesh row and window of `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let results: Vec<(Vec<ReportRow>, RowTiming)> = if config.parallel_rows {
        config
            .rows
            .par_iter()
            .map(|r| run_row(config, r))
            .collect::<Result<_>>()?
    } else {
        config.rows.iter().map(|r| run_row(config, r)).collect::<Result<_>>()?
    };
    let mut report = RunReport {
        config: config.clone(),
        rows: Vec::new(),
        timings: Vec::new(),
    };
    for (rows, timing) in results {
        report.rows.extend(rows);
        report.timings.push(timing);
    }
    Ok(report)
}

/// Runs `config`'s first mesh row on externally supplied increments; the step
/// `dt` is taken from the paths.
pub fn replay(config: &ExperimentConfig, paths: &[NoisePath]) -> Result<RunReport> {
    let first = paths.first().ok_or(Error::EmptyInput("replayed noise paths"))?;
    if paths
        .iter()
        .any(|p| p.steps != first.steps || p.channels != first.channels)
    {
        return Err(Error::NoiseFormat("replayed paths differ in shape".into()));
    }
    let dp = config.rows.first().ok_or(Error::EmptyInput("mesh rows"))?.dp;
    let row = MeshRow { dt: first.dt, dp };
    let mut cfg = config.clone();
    cfg.t_final = first.dt * first.steps as f64;
    cfg.rows = vec![row];
    cfg.samples = paths.len();
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.t_final, first.steps)?;
    let (rows, timing) = row_from_paths(&cfg, &problem, &row, paths)?;
    Ok(RunReport {
        config: cfg,
        rows,
        timings: vec![timing],
    })
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// CSV with the fixed header; wall times are left to the JSON summary.
pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.preset.clone(),
            fmt_float(r.t_final),
            fmt_float(r.dt),
            fmt_float(r.dp),
            r.window.clone(),
            r.metric.name().to_string(),
            fmt_float(r.value),
            r.n_samples.to_string(),
            r.seed.to_string(),
            fmt_opt(r.imag_residual),
            fmt_opt(r.stability_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `base.csv` and `base.json` next to each other.
pub fn output_paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("csv"), base.with_extension("json"))
}

pub fn write_report(report: &RunReport, base: &Path) -> Result<(PathBuf, PathBuf)> {
    let (csv_path, json_path) = output_paths(base);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(fs::File::create(&csv_path)?, &report.rows)?;
    fs::write(&json_path, serde_json::to_string_pretty(report)?)?;
    Ok((csv_path, json_path))
}

/// A scheme paired with the reference it is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPair {
    /// Approximate equation against the explicit solution.
    ApproxVsExplicit,
    /// Approximate equation against Milstein.
    ApproxVsMilstein,
    EulerVsExplicit,
    MilsteinVsExplicit,
}

impl OrderPair {
    pub fn label(&self) -> &'static str {
        match self {
            OrderPair::ApproxVsExplicit => "approx_vs_explicit",
            OrderPair::ApproxVsMilstein => "approx_vs_milstein",
            OrderPair::EulerVsExplicit => "em_vs_explicit",
            OrderPair::MilsteinVsExplicit => "milstein_vs_explicit",
        }
    }

    /// Pairs that make sense for `kind`.
    pub fn defaults(kind: ProblemKind) -> Vec<OrderPair> {
        match kind {
            ProblemKind::Additive => vec![OrderPair::ApproxVsExplicit, OrderPair::EulerVsExplicit],
            ProblemKind::Multiplicative => vec![
                OrderPair::ApproxVsMilstein,
                OrderPair::EulerVsExplicit,
                OrderPair::MilsteinVsExplicit,
            ],
            ProblemKind::Stable => Vec::new(),
        }
    }

    fn evaluate(&self, problem: &SdeProblem, path: &NoisePath) -> Result<(Vec<f64>, Vec<f64>)> {
        let approx = |p: &SdeProblem, q: &NoisePath| {
            if p.kind.is_additive() {
                exact_approx_additive(p, q)
            } else {
                exact_approx_multiplicative(p, q)
            }
        };
        let (a, b) = match self {
            OrderPair::ApproxVsExplicit => (approx(problem, path)?, explicit_solution(problem, path)?),
            OrderPair::ApproxVsMilstein => (approx(problem, path)?, milstein_1d(problem, path)?),
            OrderPair::EulerVsExplicit => (euler_maruyama(problem, path)?, explicit_solution(problem, path)?),
            OrderPair::MilsteinVsExplicit => (milstein_1d(problem, path)?, explicit_solution(problem, path)?),
        };
        Ok((a.final_state(), b.final_state()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub pair: OrderPair,
    pub points: Vec<(f64, f64)>,
    pub fit: OrderFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub preset: String,
    pub samples: usize,
    pub seed: u64,
    pub metric: Metric,
    pub entries: Vec<ConvergenceEntry>,
}

/// Strong-error regression of each pair over the step sizes `dts`, using
/// `config`'s problem, sample count, seed and metric.
pub fn run_convergence(config: &ExperimentConfig, dts: &[f64], pairs: &[OrderPair]) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(Error::Config("convergence runs need at least three step sizes".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Config("no scheme pairs to compare".into()));
    }
    if config.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let metric = config.metric();
    let mut points: Vec<Vec<(f64, f64)>> = vec![Vec::new(); pairs.len()];
    for &dt in dts {
        let problem = config.problem_for(dt)?;
        let finals: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..config.samples as u64)
            .into_par_iter()
            .map(|id| {
                let path = sample_path(&problem, config.master_seed, id)?;
                pairs
                    .iter()
                    .map(|p| p.evaluate(&problem, &path))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for (i, pts) in points.iter_mut().enumerate() {
            let (a, b): (Vec<Vec<f64>>, Vec<Vec<f64>>) = finals.iter().map(|f| f[i].clone()).unzip();
            pts.push((dt, metric.evaluate(&a, &b)?.value));
        }
    }
    let entries = pairs
        .iter()
        .zip(points)
        .map(|(&pair, pts)| {
            Ok(ConvergenceEntry {
                pair,
                fit: convergence_order(&pts)?,
                points: pts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceReport {
        preset: config.preset.name().into(),
        samples: config.samples,
        seed: config.master_seed,
        metric,
        entries,
    })
}

/// Cost estimates for each mesh row, using `config.samples` generated paths.
pub fn complexity_report(config: &ExperimentConfig) -> Result<Vec<ComplexityEstimate>> {
    config.validate()?;
    config
        .rows
        .iter()
        .map(|row| {
            let problem = config.problem_for(row.dt)?;
            let paths: Vec<NoisePath> = (0..config.samples as u64)
                .map(|id| sample_path(&problem, config.master_seed, id))
                .collect::<Result<_>>()?;
            gate_complexity(&problem, &paths, row.dp, config.half_width)
        })
        .collect()
}
