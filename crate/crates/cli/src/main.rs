use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use schro_sde::analysis::Metric;
use schro_sde::evolve::Stepper;
use schro_sde::experiment::{
    complexity_report, replay, run_convergence, run_experiment, sample_path, write_csv, write_report, Comparator,
    ExperimentConfig, MeshRow, OrderPair, Preset, RunReport,
};
use schro_sde::noise::{read_dump, write_dump};

/// Schrödingerisation emulator for linear SDEs.
///
/// Every subcommand starts from a preset (or a TOML config whose `preset`
/// key picks the defaults) and applies the flags on top.
#[derive(Parser)]
#[command(name = "schro-sde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo error table for each (dt, dp) row and recovery window.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output base path; writes BASE.csv and BASE.json. CSV goes to stdout
        /// when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Strong-error slopes of the reference schemes over a list of steps.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Step sizes, comma separated (at least three).
        #[arg(long, value_delimiter = ',', default_values_t = [4e-3, 2e-3, 1e-3])]
        dts: Vec<f64>,
        /// Scheme pairs to regress; defaults depend on the noise type.
        #[arg(long, value_enum, value_delimiter = ',')]
        pairs: Vec<PairArg>,
    },
    /// Gate-count model, classical cost and advantage check for each row.
    Complexity {
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the first row on increments read from noise dump files.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Step size the dumped increments were drawn with.
        #[arg(long)]
        dt: f64,
        /// Dump files, read in order.
        #[arg(required = true)]
        dumps: Vec<PathBuf>,
        /// Output base path; CSV goes to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the increments of the first row's samples to a dump file.
    DumpNoise {
        #[command(flatten)]
        common: Common,
        /// Destination file.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; its keys override the preset defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Preset used when no config is given.
    #[arg(short, long, value_enum, default_value = "ou")]
    preset: PresetArg,
    /// Number of Monte Carlo samples N.
    #[arg(short = 'n', long)]
    samples: Option<usize>,
    /// Master seed; sample k always draws the same noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Mesh rows as DT:DP, comma separated, e.g. 1e-3:0.04,5e-4:0.02.
    #[arg(long, value_delimiter = ',', value_parser = parse_row)]
    rows: Vec<MeshRow>,
    /// Final time T.
    #[arg(long)]
    t_final: Option<f64>,
    /// Grid half-width L.
    #[arg(long)]
    half_width: Option<f64>,
    /// Time stepper for the spectral evolution.
    #[arg(long, value_enum)]
    stepper: Option<StepperArg>,
    /// Minimum RK2 substeps per SDE interval.
    #[arg(long)]
    substeps: Option<usize>,
    /// Never subdivide RK2 steps automatically.
    #[arg(long)]
    no_adaptive: bool,
    /// Error metric.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Reference the recovered state is compared with.
    #[arg(long, value_enum)]
    comparator: Option<ComparatorArg>,
    /// Skip the Euler–Maruyama column.
    #[arg(long)]
    no_em: bool,
    /// Run mesh rows concurrently.
    #[arg(long)]
    parallel_rows: bool,
    /// Number of worker threads (defaults to all cores).
    #[arg(short = 'j', long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Ou,
    Gbm,
    Levy,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepperArg {
    Rk2,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Mse,
    Mae,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComparatorArg {
    Approximate,
    Explicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    ApproxVsExplicit,
    ApproxVsMilstein,
    EmVsExplicit,
    MilsteinVsExplicit,
}

fn parse_row(s: &str) -> std::result::Result<MeshRow, String> {
    let (dt, dp) = s.split_once(':').ok_or_else(|| format!("expected DT:DP, got `{s}`"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok(MeshRow {
        dt: num(dt)?,
        dp: num(dp)?,
    })
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::preset(match self.preset {
                PresetArg::Ou => Preset::Ou,
                PresetArg::Gbm => Preset::Gbm,
                PresetArg::Levy => Preset::Levy,
                PresetArg::Custom => Preset::Custom,
            }),
        };
        if let Some(n) = self.samples {
            c.samples = n;
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if !self.rows.is_empty() {
            c.rows = self.rows.clone();
        }
        if let Some(t) = self.t_final {
            c.t_final = t;
        }
        if let Some(l) = self.half_width {
            c.half_width = l;
        }
        if let Some(s) = self.stepper {
            c.step.stepper = match s {
                StepperArg::Rk2 => Stepper::Rk2,
                StepperArg::Exact => Stepper::Exact,
            };
        }
        if let Some(s) = self.substeps {
            c.step.substeps = s;
        }
        if self.no_adaptive {
            c.step.adaptive = false;
        }
        if let Some(m) = self.metric {
            c.metric = Some(match m {
                MetricArg::Mse => Metric::Mse,
                MetricArg::Mae => Metric::Mae,
            });
        }
        if let Some(k) = self.comparator {
            c.comparator = Some(match k {
                ComparatorArg::Approximate => Comparator::Approximate,
                ComparatorArg::Explicit => Comparator::Explicit,
            });
        }
        if self.no_em {
            c.include_em = false;
        }
        if self.parallel_rows {
            c.parallel_rows = true;
        }
        if let Some(j) = self.threads {
            rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn emit(report: &RunReport, output: Option<PathBuf>) -> Result<()> {
    match output {
        Some(base) => {
            let (csv, json) = write_report(report, &base)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        None => write_csv(io::stdout().lock(), &report.rows)?,
    }
    for t in &report.timings {
        eprintln!("dt={:e} dp={:e}: {:.2} s", t.dt, t.dp, t.wall_seconds);
        if let Some(e) = &t.first_error {
            eprintln!("  partial failures, first: {e}");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, output } => {
            let mut config = common.config()?;
            let output = output.or_else(|| config.output.clone());
            config.output = output.clone();
            emit(&run_experiment(&config)?, output)
        }
        Command::Convergence { common, dts, pairs } => {
            let config = common.config()?;
            let pairs: Vec<OrderPair> = if pairs.is_empty() {
                OrderPair::defaults(config.problem.kind)
            } else {
                pairs
                    .iter()
                    .map(|p| match p {
                        PairArg::ApproxVsExplicit => OrderPair::ApproxVsExplicit,
                        PairArg::ApproxVsMilstein => OrderPair::ApproxVsMilstein,
                        PairArg::EmVsExplicit => OrderPair::EulerVsExplicit,
                        PairArg::MilsteinVsExplicit => OrderPair::MilsteinVsExplicit,
                    })
                    .collect()
            };
            if pairs.is_empty() {
                bail!("no reference pairs for this noise type; pass --pairs");
            }
            let report = run_convergence(&config, &dts, &pairs)?;
            let mut out = io::stdout().lock();
            writeln!(out, "pair,slope,intercept,r_squared")?;
            for e in &report.entries {
                writeln!(
                    out,
                    "{},{:.16e},{:.16e},{:.16e}",
                    e.pair.label(),
                    e.fit.slope,
                    e.fit.intercept,
                    e.fit.r_squared
                )?;
            }
            Ok(())
        }
        Command::Complexity { common } => {
            let config = common.config()?;
            let estimates = complexity_report(&config)?;
            println!("{}", serde_json::to_string_pretty(&estimates)?);
            Ok(())
        }
        Command::Replay {
            common,
            dt,
            dumps,
            output,
        } => {
            let config = common.config()?;
            let mut paths = Vec::new();
            for d in &dumps {
                let file = File::open(d).with_context(|| format!("opening {}", d.display()))?;
                paths.extend(read_dump(&mut BufReader::new(file), dt)?);
            }
            emit(&replay(&config, &paths)?, output)
        }
        Command::DumpNoise { common, output } => {
            let config = common.config()?;
            let problem = config.problem_for(config.rows[0].dt)?;
            let mut out = BufWriter::new(File::create(&output)?);
            for id in 0..config.samples as u64 {
                write_dump(&mut out, &sample_path(&problem, config.master_seed, id)?)?;
            }
            out.flush()?;
            eprintln!("wrote {} paths to {}", config.samples, output.display());
            Ok(())
        }
    }
}
