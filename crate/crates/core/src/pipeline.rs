//! End-to-end runs: load prices, build the layer series, measure persistence,
//! fit regimes and run the portfolio experiments, writing every artifact and
//! a manifest of their hashes into one run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::filtergraph::{Motif, MotifKind};
use crate::ingest::{load_prices, log_returns, ReturnPanel};
use crate::persistence::{
    build_layer_series, edge_correlation_stats, independence_gap, node_persistence, overlap_report,
    persistence_curve, rank_motifs, write_curves_csv, write_ranking_json, EdgeCorrelationStats,
    LayerConfig, NodePersistence, PersistenceError,
};
use crate::portfolio::{
    run_experiment_motif_vs_random, run_experiment_vol_vs_persist, write_summary_json,
    EvaluationSplit, ExperimentConfig, ExperimentSummary,
};
use crate::regimefit::{fit_two_regimes, write_fit_reports, FitReport};
use crate::scalar::Scalar;
use crate::Error;

/// Floating-point width used for the whole computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Everything that determines the numbers a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Keep only the first `assets` columns (sorted by name).
    pub assets: Option<usize>,
    pub layers: LayerConfig,
    /// Motifs in each ranking and in the motif portfolio.
    pub top_k: usize,
    pub min_segment: usize,
    /// Plateau start used instead of the fitted breakpoint.
    pub tau_plat: Option<usize>,
    /// Motif class the portfolio is built from.
    pub portfolio_kind: MotifKind,
    pub experiment: ExperimentConfig,
    pub min_evaluation_days: usize,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            assets: None,
            layers: LayerConfig::default(),
            top_k: 10,
            min_segment: 10,
            tau_plat: None,
            portfolio_kind: MotifKind::FaceTriangle,
            experiment: ExperimentConfig::default(),
            min_evaluation_days: 60,
            precision: Precision::F64,
        }
    }
}

impl RunConfig {
    /// Checks that need no data.
    pub fn validate(&self) -> Result<(), Error> {
        let cfg = |m: String| Err(Error::Config(m));
        if let Some(n) = self.assets {
            if n < 4 {
                return cfg(format!("at least 4 assets are needed, got {n}"));
            }
            if n >= self.layers.window {
                return cfg(format!(
                    "{n} assets need a window longer than {n} days (N < window), got window {}",
                    self.layers.window
                ));
            }
        }
        if self.top_k == 0 {
            return cfg("top-k must be at least 1".into());
        }
        if let Some(tp) = self.tau_plat {
            if tp >= self.layers.max_shift {
                return cfg(format!(
                    "plateau start {tp} must be below the maximum shift {}",
                    self.layers.max_shift
                ));
            }
        }
        if self.experiment.selection_size == 0 {
            return cfg("selection size must be positive".into());
        }
        self.layers.validate().map_err(Error::Persistence)
    }

    /// Evaluation split implied by the layer ranges: estimation covers every
    /// day of every compared window.
    pub fn split(&self, n_days: usize) -> Result<EvaluationSplit, Error> {
        let l = &self.layers;
        let start = l.first_end() + 1 - l.window;
        Ok(EvaluationSplit::new(
            start,
            l.last_end(),
            n_days,
            self.min_evaluation_days,
        )?)
    }
}

/// Where run artifacts go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// `root/name`, or `root/run-<local timestamp>` when no name is given.
    pub fn create(root: &Path, name: Option<&str>) -> Result<Self, Error> {
        let name = match name {
            Some(n) => n.to_string(),
            None => chrono::Local::now().format("run-%Y%m%d-%H%M%S").to_string(),
        };
        let path = root.join(name);
        fs::create_dir_all(&path).map_err(|e| io_error(&path, e))?;
        Ok(Self { path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Loads the price file, applies the asset cap and converts to log-returns.
pub fn load_returns<T: Scalar>(cfg: &RunConfig) -> Result<ReturnPanel<T>, Error> {
    let (prices, report) = load_prices::<T>(&cfg.input)?;
    if !report.dropped.is_empty() {
        log::warn!(
            "{} dates dropped while aligning {}",
            report.dropped.len(),
            cfg.input.display()
        );
    }
    let r = log_returns(&prices);
    match cfg.assets {
        None => Ok(r),
        Some(n) if n <= r.n_assets() => Ok(r.select_assets(&(0..n).collect::<Vec<_>>())),
        Some(n) => Err(Error::Config(format!(
            "{n} assets requested but {} has only {}",
            cfg.input.display(),
            r.n_assets()
        ))),
    }
}

/// Data needed by the portfolio stage, also written as `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub assets: Vec<String>,
    pub n_days: usize,
    pub first_window_end: String,
    pub last_window_end: String,
    pub n_layers: usize,
    pub fits: Vec<FitReport>,
    /// Plateau start used for clique and node scores.
    pub tau_plat_clique: usize,
    /// Plateau start used for the portfolio motif ranking.
    pub tau_plat_portfolio: usize,
    pub portfolio_kind: MotifKind,
    /// Vertex indices of the top-ranked motifs of `portfolio_kind`.
    pub top_motifs: Vec<Vec<usize>>,
    pub top_scores: Vec<f64>,
    pub node_scores: Vec<f64>,
    pub independence_gap_mean: Option<f64>,
    pub edge_correlation: Option<EdgeCorrelationStats>,
    pub mean_overlap: f64,
}

impl AnalysisSummary {
    pub fn top_motifs(&self) -> Vec<Motif> {
        self.top_motifs
            .iter()
            .map(|v| Motif::new(self.portfolio_kind, v.clone()))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_error(path, e))
    }
}

fn fit_or_override(
    cfg: &RunConfig,
    fits: &BTreeMap<MotifKind, FitReport>,
    kind: MotifKind,
) -> Result<usize, Error> {
    if let Some(tp) = cfg.tau_plat {
        return Ok(tp);
    }
    fits.get(&kind).map(|f| f.tau_plat).ok_or_else(|| {
        Error::Config(format!(
            "no {kind} fit available to place the plateau; set tau_plat explicitly"
        ))
    })
}

/// Runs the persistence analysis and writes its artifacts into `dir`.
pub fn run_analysis<T: Scalar>(
    cfg: &RunConfig,
    r: &ReturnPanel<T>,
    dir: &RunDir,
) -> Result<AnalysisSummary, Error> {
    if r.n_assets() >= cfg.layers.window {
        return Err(Error::Config(format!(
            "{} assets need a window longer than {} days (N < window), got window {}",
            r.n_assets(),
            r.n_assets(),
            cfg.layers.window
        )));
    }
    log::info!(
        "building {} layers over {} assets",
        cfg.layers.n_layers(),
        r.n_assets()
    );
    let series = build_layer_series(r, &cfg.layers)?;

    let mut curves = Vec::new();
    for kind in MotifKind::ALL {
        match persistence_curve(&series, kind) {
            Ok(c) => curves.push(c),
            Err(PersistenceError::EmptyClass(k, t)) => {
                log::warn!("skipping {k} curve: starting layer {t} has none")
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_curves_csv(&curves, &dir.file("curves.csv"))?;

    let mut fits = BTreeMap::new();
    for c in &curves {
        match fit_two_regimes(c, cfg.min_segment) {
            Ok(f) => {
                fits.insert(c.kind, FitReport::new(c.kind, &f));
            }
            Err(e) if cfg.tau_plat.is_some() => log::warn!("{} fit skipped: {e}", c.kind),
            Err(e) => return Err(e.into()),
        }
    }
    let fit_list: Vec<FitReport> = fits.values().cloned().collect();
    write_fit_reports(&fit_list, &dir.file("fits.json"))?;

    let tau_clique = fit_or_override(cfg, &fits, MotifKind::Tetrahedron)?;
    let tau_for = |kind| fit_or_override(cfg, &fits, kind).unwrap_or(tau_clique);

    let mut ranked_by_kind = BTreeMap::new();
    for kind in MotifKind::ALL {
        let ranking = rank_motifs(&series, kind, tau_for(kind), cfg.top_k)?;
        write_ranking_json(
            &ranking,
            series.assets(),
            &dir.file(&format!("ranking_{kind}.json")),
        )?;
        ranked_by_kind.insert(kind, ranking);
    }
    let tau_portfolio = tau_for(cfg.portfolio_kind);
    let top = &ranked_by_kind[&cfg.portfolio_kind];

    let np: NodePersistence<T> = node_persistence(&series, tau_clique)?;
    np.write_csv(&dir.file("node_persistence.csv"))?;

    let tri_tp = tau_for(MotifKind::FaceTriangle);
    let tri_ranking = &ranked_by_kind[&MotifKind::FaceTriangle];
    let overlap = overlap_report(&series, tri_ranking, cfg.top_k)?;
    let mut text = String::from("layer,end_date,overlap\n");
    for row in &overlap {
        text.push_str(&format!(
            "{},{},{}\n",
            row.layer,
            r.dates()[row.end_index],
            row.overlap
        ));
    }
    fs::write(dir.file("overlap.csv"), text).map_err(|e| io_error(&dir.file("overlap.csv"), e))?;
    let mean_overlap =
        overlap.iter().map(|o| o.overlap as f64).sum::<f64>() / overlap.len().max(1) as f64;

    let gap = if cfg.layers.window <= cfg.layers.max_shift {
        let g = independence_gap(&series, tri_tp, cfg.layers.window)?;
        let mut text = String::from("tau,mean_gap\n");
        for (tau, v) in g.taus.iter().zip(&g.mean_gap) {
            text.push_str(&format!("{tau},{v:.12e}\n"));
        }
        let p = dir.file("independence_gap.csv");
        fs::write(&p, text).map_err(|e| io_error(&p, e))?;
        Some(g.overall_mean.to_f64_lossy())
    } else {
        None
    };
    let edge_stats = edge_correlation_stats(&series, tri_tp).ok();

    let summary = AnalysisSummary {
        assets: r.assets().to_vec(),
        n_days: r.n_days(),
        first_window_end: r.dates()[series.end_index(0)].to_string(),
        last_window_end: r.dates()[series.end_index(series.n_layers() - 1)].to_string(),
        n_layers: series.n_layers(),
        fits: fit_list,
        tau_plat_clique: tau_clique,
        tau_plat_portfolio: tau_portfolio,
        portfolio_kind: cfg.portfolio_kind,
        top_motifs: top.iter().map(|m| m.motif.vertices.clone()).collect(),
        top_scores: top
            .iter()
            .map(|m| m.plateau_persistence.to_f64_lossy())
            .collect(),
        node_scores: np.scores.iter().map(|s| s.to_f64_lossy()).collect(),
        independence_gap_mean: gap,
        edge_correlation: edge_stats,
        mean_overlap,
    };
    write_json(&summary, &dir.file("analysis.json"))?;
    Ok(summary)
}

/// Summaries of both portfolio experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioOutcome {
    pub motif_vs_random: ExperimentSummary,
    pub vol_vs_persist: ExperimentSummary,
}

/// Runs both portfolio experiments from an analysis summary.
pub fn run_portfolio<T: Scalar>(
    cfg: &RunConfig,
    r: &ReturnPanel<T>,
    analysis: &AnalysisSummary,
    dir: &RunDir,
) -> Result<PortfolioOutcome, Error> {
    if analysis.assets != r.assets() {
        return Err(Error::Config(
            "analysis was computed on a different asset list".into(),
        ));
    }
    let split = cfg.split(r.n_days())?;
    let exp = &cfg.experiment;

    let top = analysis.top_motifs();
    let mvr = run_experiment_motif_vs_random(r, &top, &split, exp)?;
    mvr.write_distribution_csv(&dir.file("motif_vs_random.csv"))?;
    let mvr_summary = mvr.summary();
    write_summary_json(&mvr_summary, &dir.file("motif_vs_random.json"))?;

    let np = NodePersistence {
        assets: analysis.assets.clone(),
        scores: analysis.node_scores.iter().map(|&s| T::lit(s)).collect(),
    };
    let paired = run_experiment_vol_vs_persist(r, &np, &split, exp)?;
    paired.write_pairs_csv(&dir.file("vol_vs_persist.csv"))?;
    paired.write_selections_csv(r.assets(), &dir.file("vol_vs_persist_selections.csv"))?;
    let paired_summary = paired.summary();
    write_summary_json(&paired_summary, &dir.file("vol_vs_persist.json"))?;

    Ok(PortfolioOutcome {
        motif_vs_random: mvr_summary,
        vol_vs_persist: paired_summary,
    })
}

/// Reproduction record: configuration, seed and the hash of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    /// File name to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Hashes every file in `dir` except the manifest and writes the manifest.
pub fn write_manifest(cfg: &RunConfig, command: &str, dir: &RunDir) -> Result<Manifest, Error> {
    let mut artifacts = BTreeMap::new();
    let entries = fs::read_dir(&dir.path).map_err(|e| io_error(&dir.path, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_error(&dir.path, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.path().is_file() {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|e| io_error(&entry.path(), e))?;
        artifacts.insert(name, hex::encode(Sha256::digest(&bytes)));
    }
    let manifest = Manifest {
        tool: "motifpersist".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.experiment.seed,
        config: cfg.clone(),
        artifacts,
    };
    write_json(&manifest, &dir.file(MANIFEST_FILE))?;
    Ok(manifest)
}

fn analyze_typed<T: Scalar>(cfg: &RunConfig, dir: &RunDir) -> Result<AnalysisSummary, Error> {
    let r = load_returns::<T>(cfg)?;
    run_analysis(cfg, &r, dir)
}

fn portfolio_typed<T: Scalar>(
    cfg: &RunConfig,
    dir: &RunDir,
    analysis: Option<&AnalysisSummary>,
) -> Result<PortfolioOutcome, Error> {
    let r = load_returns::<T>(cfg)?;
    let owned;
    let analysis = match analysis {
        Some(a) => a,
        None => {
            owned = run_analysis(cfg, &r, dir)?;
            &owned
        }
    };
    run_portfolio(cfg, &r, analysis, dir)
}

/// `analyze`: persistence curves, fits, rankings and node scores.
pub fn cmd_analyze(cfg: &RunConfig, dir: &RunDir) -> Result<AnalysisSummary, Error> {
    cfg.validate()?;
    let out = match cfg.precision {
        Precision::F64 => analyze_typed::<f64>(cfg, dir)?,
        Precision::F32 => analyze_typed::<f32>(cfg, dir)?,
    };
    write_manifest(cfg, "analyze", dir)?;
    Ok(out)
}

/// `portfolio`: both experiments, reusing `analysis` or computing it inline.
pub fn cmd_portfolio(
    cfg: &RunConfig,
    dir: &RunDir,
    analysis: Option<&AnalysisSummary>,
) -> Result<PortfolioOutcome, Error> {
    cfg.validate()?;
    let out = match cfg.precision {
        Precision::F64 => portfolio_typed::<f64>(cfg, dir, analysis)?,
        Precision::F32 => portfolio_typed::<f32>(cfg, dir, analysis)?,
    };
    write_manifest(cfg, "portfolio", dir)?;
    Ok(out)
}

/// Human-readable digest of a run directory.
pub fn render_report(dir: &Path) -> Result<String, Error> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_error(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| io_error(&manifest_path, e))?;
    let mut out = String::new();
    out.push_str(&format!(
        "run {} ({} {}, command {}, seed {})\n",
        dir.display(),
        manifest.tool,
        manifest.version,
        manifest.command,
        manifest.seed
    ));
    let l = &manifest.config.layers;
    out.push_str(&format!(
        "window {} theta {} starts {} max shift {}\n",
        l.window, l.theta, l.n_starts, l.max_shift
    ));
    let analysis_path = dir.join("analysis.json");
    if analysis_path.exists() {
        let a = AnalysisSummary::load(&analysis_path)?;
        out.push_str(&format!(
            "{} assets, {} layers, windows ending {} .. {}\n",
            a.assets.len(),
            a.n_layers,
            a.first_window_end,
            a.last_window_end
        ));
        out.push_str("fits (kind: decay exponent, plateau exponent, tau_plat, combined mse)\n");
        for f in &a.fits {
            out.push_str(&format!(
                "  {}: {:.4} {:.4} {} {:.3e}\n",
                f.kind, f.exponent_decay, f.exponent_plateau, f.tau_plat, f.combined_mse
            ));
        }
        out.push_str(&format!(
            "top {} {} motifs\n",
            a.top_motifs.len(),
            a.portfolio_kind
        ));
        for (m, s) in a.top_motifs.iter().zip(&a.top_scores) {
            let names: Vec<&str> = m.iter().map(|&v| a.assets[v].as_str()).collect();
            out.push_str(&format!("  {:.4} {}\n", s, names.join(" ")));
        }
        if let Some(g) = a.independence_gap_mean {
            out.push_str(&format!(
                "mean independence gap of top-decile triangles {g:.4}\n"
            ));
        }
        out.push_str(&format!(
            "mean overlap with top-correlated triplets {:.2}\n",
            a.mean_overlap
        ));
    }
    for name in ["motif_vs_random.json", "vol_vs_persist.json"] {
        let p = dir.join(name);
        if p.exists() {
            let text = fs::read_to_string(&p).map_err(|e| io_error(&p, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| io_error(&p, e))?;
            out.push_str(&format!("{}:\n", v["experiment"].as_str().unwrap_or(name)));
            if let Some(map) = v.as_object() {
                for (k, val) in map {
                    if k != "experiment" && k != "split" {
                        out.push_str(&format!("  {k} = {val}\n"));
                    }
                }
            }
        }
    }
    out.push_str(&format!(
        "{} artifacts hashed in the manifest\n",
        manifest.artifacts.len()
    ));
    Ok(out)
}
