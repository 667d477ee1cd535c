//! `motifpersist`: synthetic panels, persistence analysis, portfolio
//! experiments and run reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use motif_persistence::filtergraph::{MotifKind, TriangleClassing};
use motif_persistence::ingest::write_returns_csv;
use motif_persistence::pipeline::{
    cmd_analyze, cmd_portfolio, render_report, AnalysisSummary, Precision, RunConfig, RunDir,
};
use motif_persistence::portfolio::ZeroScore;
use motif_persistence::synth::{generate, generate_prices, ScenarioSpec};
use motif_persistence::Error as CoreError;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("config: {path}: {message}")]
    ConfigFile { path: String, message: String },
    #[error("config: cannot start {threads} worker threads: {message}")]
    Threads { threads: usize, message: String },
}

#[derive(Parser, Debug)]
#[command(
    name = "motifpersist",
    version,
    about = "Temporal persistence of TMFG motifs"
)]
struct Cli {
    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Root directory for run directories.
    #[arg(
        long,
        short,
        global = true,
        env = "MOTIFPERSIST_OUT",
        default_value = "runs"
    )]
    output: PathBuf,

    /// Run directory name; a timestamp is used when absent.
    #[arg(long, global = true)]
    run_name: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a price panel from a TOML scenario file.
    Synth {
        /// Scenario file.
        spec: PathBuf,
        /// Output file; `<run dir>/prices.csv` (or `returns.csv`) when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write log-returns instead of prices.
        #[arg(long)]
        returns: bool,
    },
    /// Persistence curves, regime fits, rankings and node scores.
    Analyze(RunArgs),
    /// Motif-vs-random and 1/σ-vs-1/P experiments.
    Portfolio {
        #[command(flatten)]
        run: RunArgs,
        /// Reuse `analysis.json` from this run directory instead of recomputing.
        #[arg(long)]
        analysis: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report {
        /// Run directory containing `manifest.json`.
        dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Price CSV in long `date,asset,close` format.
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML file with a full run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keep only the first N assets.
    #[arg(long)]
    assets: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Number of starting layers T.
    #[arg(long)]
    starts: Option<usize>,
    /// Largest shift.
    #[arg(long)]
    max_shift: Option<usize>,
    /// Day index of the first window end.
    #[arg(long)]
    first_end: Option<usize>,
    /// Plateau start, overriding the fitted breakpoint.
    #[arg(long)]
    tau_plat: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Minimum points per fitted segment.
    #[arg(long)]
    min_segment: Option<usize>,
    /// Motif class of the portfolio motifs.
    #[arg(long)]
    kind: Option<MotifKind>,
    /// Require a triangle to keep its face or separator role across layers.
    #[arg(long)]
    strict_triangles: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_random: Option<usize>,
    #[arg(long)]
    n_selections: Option<usize>,
    #[arg(long)]
    selection_size: Option<usize>,
    /// Leave zero-score assets out of 1/P portfolios instead of capping them.
    #[arg(long)]
    exclude_zero_scores: bool,
    #[arg(long)]
    min_eval_days: Option<usize>,
    /// Compute in single precision.
    #[arg(long)]
    f32: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.input {
            cfg.input = p.clone();
        }
        if cfg.input.as_os_str().is_empty() {
            return Err(CoreError::Config("no input file given (--input)".into()).into());
        }
        let l = &mut cfg.layers;
        set(&mut l.window, self.window);
        set(&mut l.theta, self.theta);
        set(&mut l.n_starts, self.starts);
        set(&mut l.max_shift, self.max_shift);
        if self.first_end.is_some() {
            l.first_end = self.first_end;
        }
        if self.strict_triangles {
            l.classing = TriangleClassing::Strict;
        }
        let e = &mut cfg.experiment;
        set(&mut e.seed, self.seed);
        set(&mut e.n_random, self.n_random);
        set(&mut e.n_selections, self.n_selections);
        set(&mut e.selection_size, self.selection_size);
        if self.exclude_zero_scores {
            e.zero_score = ZeroScore::Exclude;
        }
        if self.assets.is_some() {
            cfg.assets = self.assets;
        }
        if self.tau_plat.is_some() {
            cfg.tau_plat = self.tau_plat;
        }
        set(&mut cfg.top_k, self.top_k);
        set(&mut cfg.min_segment, self.min_segment);
        set(&mut cfg.portfolio_kind, self.kind);
        set(&mut cfg.min_evaluation_days, self.min_eval_days);
        if self.f32 {
            cfg.precision = Precision::F32;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let err = |message: String| CliError::ConfigFile {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    toml::from_str(&text).map_err(|e| err(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Threads {
                threads,
                message: e.to_string(),
            })?;
    }
    let run_dir = || RunDir::create(&cli.output, cli.run_name.as_deref());
    match &cli.command {
        Command::Synth { spec, out, returns } => {
            let spec = ScenarioSpec::load(spec).map_err(CoreError::from)?;
            let target = match out {
                Some(p) => p.clone(),
                None => run_dir()?.file(if *returns {
                    "returns.csv"
                } else {
                    "prices.csv"
                }),
            };
            let written = if *returns {
                let r = generate::<f64>(&spec).map_err(CoreError::from)?;
                write_returns_csv(&r, &target)
            } else {
                generate_prices::<f64>(&spec)
                    .map_err(CoreError::from)?
                    .write_csv(&target)
            };
            written.map_err(CoreError::from)?;
            println!("{}", target.display());
        }
        Command::Analyze(args) => {
            let cfg = args.config()?;
            let dir = run_dir()?;
            let summary = cmd_analyze(&cfg, &dir)?;
            for f in &summary.fits {
                println!(
                    "{}: exponents {:.4} / {:.4}, tau_plat {}",
                    f.kind, f.exponent_decay, f.exponent_plateau, f.tau_plat
                );
            }
            println!("{}", dir.path.display());
        }
        Command::Portfolio { run, analysis } => {
            let cfg = run.config()?;
            let stored = analysis
                .as_ref()
                .map(|d| AnalysisSummary::load(&d.join("analysis.json")))
                .transpose()?;
            let dir = run_dir()?;
            let out = cmd_portfolio(&cfg, &dir, stored.as_ref())?;
            let m = &out.motif_vs_random;
            let p = &out.vol_vs_persist;
            if let Some(pct) = m.percentile {
                println!("motif portfolio volatility percentile {pct:.2}");
            }
            if let Some(w) = p.fraction_persist_wins {
                println!("1/P beats 1/sigma in {:.1}% of selections", 100.0 * w);
            }
            println!("{}", dir.path.display());
        }
        Command::Report { dir } => print!("{}", render_report(dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
