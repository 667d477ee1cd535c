//! Temporal layer series and soft-persistence statistics.
//!
//! Layer `k` is the filtered graph of the window ending on day
//! `first_end + k`. A start `t < T` paired with a shift `τ ≤ 𝒯` compares
//! layers `t` and `t + τ`, so `T + 𝒯` layers cover every pair and each one
//! is built exactly once.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::{
    correlation_matrix, exponential_weights, CorrelationError, CorrelationMatrix,
};
use crate::filtergraph::{
    build_tmfg_with, extract_motifs, unpack, GainTransform, GraphError, Motif, MotifCatalog,
    MotifKind, TriangleClassing,
};
use crate::ingest::{slice_window, IngestError, ReturnPanel};
use crate::scalar::{pearson, CompensatedSum, Scalar};

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("insufficient history: need {required} trading days, have {available}")]
    History { required: usize, available: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no {0} motifs in starting layer {1}")]
    EmptyClass(MotifKind, usize),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PersistenceError + '_ {
    move |e| PersistenceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parameters of the rolling layer construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerConfig {
    /// Correlation window length in trading days.
    pub window: usize,
    /// Decay constant of the exponential weights.
    pub theta: f64,
    /// Number of starting layers `T`.
    pub n_starts: usize,
    /// Largest shift `𝒯`.
    pub max_shift: usize,
    /// Day index of the first window end, `window - 1` when unset.
    pub first_end: Option<usize>,
    pub classing: TriangleClassing,
    pub gain: GainTransform,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            window: 126,
            theta: 46.0,
            n_starts: 200,
            max_shift: 900,
            first_end: None,
            classing: TriangleClassing::Unified,
            gain: GainTransform::Raw,
        }
    }
}

impl LayerConfig {
    pub fn first_end(&self) -> usize {
        self.first_end.unwrap_or(self.window.saturating_sub(1))
    }

    pub fn n_layers(&self) -> usize {
        self.n_starts + self.max_shift
    }

    /// Day index of the last window end.
    pub fn last_end(&self) -> usize {
        self.first_end() + self.n_layers() - 1
    }

    /// Number of return rows the series needs.
    pub fn required_days(&self) -> usize {
        self.first_end() + self.n_layers()
    }

    pub fn validate(&self) -> Result<(), PersistenceError> {
        let bad = |m: String| Err(PersistenceError::Parameter(m));
        if self.window < 2 {
            return bad(format!(
                "window must be at least 2 days, got {}",
                self.window
            ));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return bad(format!("theta must be positive, got {}", self.theta));
        }
        if self.n_starts == 0 {
            return bad("number of starting layers must be at least 1".into());
        }
        if self.first_end() + 1 < self.window {
            return bad(format!(
                "first window end {} leaves fewer than {} rows",
                self.first_end(),
                self.window
            ));
        }
        Ok(())
    }
}

/// Motif catalogs of consecutive windows plus the correlation matrices of the
/// starting layers.
#[derive(Debug, Clone)]
pub struct LayerSeries<T> {
    assets: Vec<String>,
    n_starts: usize,
    max_shift: usize,
    first_end: usize,
    classing: TriangleClassing,
    layers: Vec<MotifCatalog>,
    start_matrices: Vec<CorrelationMatrix<T>>,
}

impl<T: Scalar> LayerSeries<T> {
    /// Series from precomputed catalogs; `layers[k]` is the layer at offset `k`.
    pub fn from_catalogs(
        assets: Vec<String>,
        layers: Vec<MotifCatalog>,
        n_starts: usize,
        max_shift: usize,
        classing: TriangleClassing,
    ) -> Result<Self, PersistenceError> {
        if n_starts == 0 {
            return Err(PersistenceError::Parameter(
                "number of starting layers must be at least 1".into(),
            ));
        }
        if layers.len() != n_starts + max_shift {
            return Err(PersistenceError::Parameter(format!(
                "expected {} layers for T={n_starts} and max shift {max_shift}, got {}",
                n_starts + max_shift,
                layers.len()
            )));
        }
        Ok(Self {
            assets,
            n_starts,
            max_shift,
            first_end: 0,
            classing,
            layers,
            start_matrices: Vec::new(),
        })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_starts(&self) -> usize {
        self.n_starts
    }

    pub fn max_shift(&self) -> usize {
        self.max_shift
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn classing(&self) -> TriangleClassing {
        self.classing
    }

    /// Same layers, different triangle matching rule.
    pub fn with_classing(mut self, classing: TriangleClassing) -> Self {
        self.classing = classing;
        self
    }

    /// Layer compared at start `t` and shift `tau`.
    pub fn layer(&self, t: usize, tau: usize) -> &MotifCatalog {
        &self.layers[t + tau]
    }

    pub fn layers(&self) -> &[MotifCatalog] {
        &self.layers
    }

    /// Day index of the window end of layer `k`.
    pub fn end_index(&self, k: usize) -> usize {
        self.first_end + k
    }

    /// Unfiltered matrix of starting layer `t`, when the series was built from returns.
    pub fn start_matrix(&self, t: usize) -> Option<&CorrelationMatrix<T>> {
        self.start_matrices.get(t)
    }
}

/// Builds one filtered graph per window end `first_end + k`, `k < T + 𝒯`.
pub fn build_layer_series<T: Scalar>(
    r: &ReturnPanel<T>,
    cfg: &LayerConfig,
) -> Result<LayerSeries<T>, PersistenceError> {
    cfg.validate()?;
    let n = r.n_assets();
    if n < 4 {
        return Err(GraphError::Size(n).into());
    }
    if cfg.window <= n {
        return Err(IngestError::IllConditioned {
            window: cfg.window,
            assets: n,
        }
        .into());
    }
    let required = cfg.required_days();
    if required > r.n_days() {
        return Err(PersistenceError::History {
            required,
            available: r.n_days(),
        });
    }
    let weights = exponential_weights(cfg.window, T::lit(cfg.theta))?;
    let first_end = cfg.first_end();
    let n_starts = cfg.n_starts;

    let built: Vec<(MotifCatalog, Option<CorrelationMatrix<T>>)> = (0..cfg.n_layers())
        .into_par_iter()
        .map(|k| {
            let win = slice_window(r, first_end + k, cfg.window)?;
            let c = correlation_matrix(&win, &weights)?;
            let g = build_tmfg_with(&c, cfg.gain)?;
            log::debug!("layer {k}: window ending {}", r.dates()[first_end + k]);
            Ok((extract_motifs(&g), (k < n_starts).then_some(c)))
        })
        .collect::<Result<_, PersistenceError>>()?;

    let mut layers = Vec::with_capacity(built.len());
    let mut start_matrices = Vec::with_capacity(n_starts);
    for (cat, m) in built {
        layers.push(cat);
        start_matrices.extend(m);
    }
    Ok(LayerSeries {
        assets: r.assets().to_vec(),
        n_starts,
        max_shift: cfg.max_shift,
        first_end,
        classing: cfg.classing,
        layers,
        start_matrices,
    })
}

/// Soft persistence of one motif between two layers: present in both.
pub fn soft_persistent(
    motif: &Motif,
    a: &MotifCatalog,
    b: &MotifCatalog,
    classing: TriangleClassing,
) -> bool {
    a.contains(motif, classing) && b.contains(motif, classing)
}

/// Average fraction of a layer's motifs still present after each shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceCurve<T> {
    pub kind: MotifKind,
    pub taus: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> PersistenceCurve<T> {
    /// `(τ, value)` pairs as `f64`.
    pub fn points(&self) -> Vec<(usize, f64)> {
        self.taus
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| (t, v.to_f64_lossy()))
            .collect()
    }
}

/// Curve value at each shift `τ = 0..=𝒯`:
/// `(1/T) Σ_t |{c ∈ C_t : c present at t + τ}| / |C_t|`.
pub fn persistence_curve<T: Scalar>(
    s: &LayerSeries<T>,
    kind: MotifKind,
) -> Result<PersistenceCurve<T>, PersistenceError> {
    for t in 0..s.n_starts {
        if s.layers[t].count(kind) == 0 {
            return Err(PersistenceError::EmptyClass(kind, t));
        }
    }
    let taus: Vec<usize> = (0..=s.max_shift).collect();
    let n_starts = T::from_count(s.n_starts);
    let values = taus
        .par_iter()
        .map(|&tau| {
            let mut acc = T::zero();
            for t in 0..s.n_starts {
                let keys = s.layers[t].keys(kind);
                let later = &s.layers[t + tau];
                let hits = keys
                    .iter()
                    .filter(|&&k| later.has_key(kind, k, s.classing))
                    .count();
                acc = acc + T::from_count(hits) / T::from_count(keys.len());
            }
            acc / n_starts
        })
        .collect();
    Ok(PersistenceCurve { kind, taus, values })
}

/// Writes curves as `kind,tau,value`.
pub fn write_curves_csv<T: Scalar>(
    curves: &[PersistenceCurve<T>],
    path: &Path,
) -> Result<(), PersistenceError> {
    let io = io_err(path);
    let mut f = BufWriter::new(File::create(path).map_err(&io)?);
    writeln!(f, "kind,tau,value").map_err(&io)?;
    for c in curves {
        for (tau, v) in c.taus.iter().zip(&c.values) {
            writeln!(f, "{},{},{:.12e}", c.kind, tau, v).map_err(&io)?;
        }
    }
    f.flush().map_err(&io)
}

/// Per-layer presence of a fixed set of motifs, stored as prefix counts.
#[derive(Debug, Clone)]
pub struct PresenceIndex {
    kind: MotifKind,
    keys: Vec<u64>,
    n_starts: usize,
    max_shift: usize,
    /// `prefix[m][k]` = number of layers `< k` containing motif `m`.
    prefix: Vec<Vec<u32>>,
}

/// Keys that count as a motif of `kind` in one layer under `classing`.
fn matching_keys(
    cat: &MotifCatalog,
    kind: MotifKind,
    classing: TriangleClassing,
) -> impl Iterator<Item = u64> + '_ {
    let unified_triangle = classing == TriangleClassing::Unified
        && matches!(kind, MotifKind::FaceTriangle | MotifKind::Separator);
    let (a, b): (&[u64], &[u64]) = if unified_triangle {
        (
            cat.keys(MotifKind::FaceTriangle),
            cat.keys(MotifKind::Separator),
        )
    } else {
        (cat.keys(kind), &[])
    };
    a.iter().chain(b).copied()
}

impl PresenceIndex {
    /// Every motif of `kind` seen in at least one starting layer.
    pub fn for_starting_layers<T: Scalar>(s: &LayerSeries<T>, kind: MotifKind) -> Self {
        let mut keys: Vec<u64> = (0..s.n_starts)
            .flat_map(|t| matching_keys(&s.layers[t], kind, s.classing))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        Self::with_keys(s, kind, keys)
    }

    fn with_keys<T: Scalar>(s: &LayerSeries<T>, kind: MotifKind, keys: Vec<u64>) -> Self {
        let slot: HashMap<u64, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let n_layers = s.layers.len();
        let mut prefix = vec![vec![0u32; n_layers + 1]; keys.len()];
        for (k, cat) in s.layers.iter().enumerate() {
            for key in matching_keys(cat, kind, s.classing) {
                if let Some(&m) = slot.get(&key) {
                    prefix[m][k + 1] = 1;
                }
            }
        }
        for p in &mut prefix {
            for k in 0..n_layers {
                p[k + 1] += p[k];
            }
        }
        Self {
            kind,
            keys,
            n_starts: s.n_starts,
            max_shift: s.max_shift,
            prefix,
        }
    }

    /// Index over explicitly chosen motifs, all of the same kind.
    pub fn for_motifs<T: Scalar>(
        s: &LayerSeries<T>,
        motifs: &[Motif],
    ) -> Result<Self, PersistenceError> {
        let Some(first) = motifs.first() else {
            return Err(PersistenceError::Parameter("empty motif list".into()));
        };
        if motifs.iter().any(|m| m.kind != first.kind) {
            return Err(PersistenceError::Parameter(
                "motifs of mixed kinds in one index".into(),
            ));
        }
        let mut keys: Vec<u64> = motifs.iter().map(Motif::key).collect();
        keys.sort_unstable();
        keys.dedup();
        Ok(Self::with_keys(s, first.kind, keys))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn kind(&self) -> MotifKind {
        self.kind
    }

    pub fn motif(&self, m: usize) -> Motif {
        Motif {
            kind: self.kind,
            vertices: unpack(self.keys[m]),
        }
    }

    pub fn position(&self, motif: &Motif) -> Option<usize> {
        self.keys.binary_search(&motif.key()).ok()
    }

    fn present(&self, m: usize, k: usize) -> bool {
        self.prefix[m][k + 1] > self.prefix[m][k]
    }

    /// Number of starts `t` where motif `m` is present at both `t` and `t + tau`.
    pub fn joint_count(&self, m: usize, tau: usize) -> usize {
        (0..self.n_starts)
            .filter(|&t| self.present(m, t) && self.present(m, t + tau))
            .count()
    }

    /// Number of `(t, τ)` pairs with `τ ∈ [lo, hi)` where motif `m` persists.
    pub fn joint_count_range(&self, m: usize, lo: usize, hi: usize) -> usize {
        let p = &self.prefix[m];
        (0..self.n_starts)
            .filter(|&t| self.present(m, t))
            .map(|t| (p[t + hi] - p[t + lo]) as usize)
            .sum()
    }

    /// Plateau persistence of motif `m` over shifts `[tau_plat, 𝒯)`.
    pub fn plateau<T: Scalar>(&self, m: usize, tau_plat: usize) -> Result<T, PersistenceError> {
        check_plateau(tau_plat, self.max_shift)?;
        let hits = self.joint_count_range(m, tau_plat, self.max_shift);
        Ok(T::from_count(hits)
            / (T::from_count(self.n_starts) * T::from_count(self.max_shift - tau_plat)))
    }

    /// Fraction of starts where motif `m` persists at shift `tau`.
    pub fn fraction_at<T: Scalar>(&self, m: usize, tau: usize) -> T {
        T::from_count(self.joint_count(m, tau)) / T::from_count(self.n_starts)
    }
}

fn check_plateau(tau_plat: usize, max_shift: usize) -> Result<(), PersistenceError> {
    if tau_plat >= max_shift {
        return Err(PersistenceError::Parameter(format!(
            "plateau start {tau_plat} must be below the maximum shift {max_shift}"
        )));
    }
    Ok(())
}

/// `(1/T)(1/(𝒯 − τ_plat)) Σ_t Σ_{τ ∈ [τ_plat, 𝒯)} P(c, t, t+τ)` for one motif.
pub fn plateau_persistence<T: Scalar>(
    s: &LayerSeries<T>,
    motif: &Motif,
    tau_plat: usize,
) -> Result<T, PersistenceError> {
    let idx = PresenceIndex::for_motifs(s, std::slice::from_ref(motif))?;
    idx.plateau(0, tau_plat)
}

/// Fraction of starts where `motif` persists at shift `tau`.
pub fn motif_persistence_at<T: Scalar>(
    s: &LayerSeries<T>,
    motif: &Motif,
    tau: usize,
) -> Result<T, PersistenceError> {
    check_shift(s, tau)?;
    let idx = PresenceIndex::for_motifs(s, std::slice::from_ref(motif))?;
    Ok(idx.fraction_at(0, tau))
}

fn check_shift<T>(s: &LayerSeries<T>, tau: usize) -> Result<(), PersistenceError> {
    if tau > s.max_shift {
        return Err(PersistenceError::Parameter(format!(
            "shift {tau} exceeds the maximum shift {}",
            s.max_shift
        )));
    }
    Ok(())
}

/// Product of the persistence fractions of a triangle's three edges at `tau`.
pub fn edge_independence_product<T: Scalar>(
    motif: &Motif,
    s: &LayerSeries<T>,
    tau: usize,
) -> Result<T, PersistenceError> {
    if motif.vertices.len() != 3 {
        return Err(PersistenceError::Parameter(format!(
            "independence product needs a triangle, got a {}",
            motif.kind
        )));
    }
    check_shift(s, tau)?;
    let edges = motif.edges();
    let idx = PresenceIndex::for_motifs(s, &edges)?;
    Ok(edges.iter().fold(T::one(), |acc, e| {
        let m = idx.position(e).expect("edge indexed");
        acc * idx.fraction_at::<T>(m, tau)
    }))
}

/// Per-asset sum of plateau persistence over the tracked tetrahedra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodePersistence<T> {
    pub assets: Vec<String>,
    pub scores: Vec<T>,
}

impl<T: Scalar> NodePersistence<T> {
    /// Sums `(clique, score)` contributions onto their member vertices.
    pub fn from_cliques(assets: Vec<String>, cliques: &[(Motif, T)]) -> Self {
        let mut sums: Vec<CompensatedSum<T>> =
            (0..assets.len()).map(|_| CompensatedSum::new()).collect();
        for (c, p) in cliques {
            for &v in &c.vertices {
                sums[v].add(*p);
            }
        }
        Self {
            assets,
            scores: sums.iter().map(CompensatedSum::total).collect(),
        }
    }

    pub fn score(&self, asset: &str) -> Option<T> {
        self.assets
            .iter()
            .position(|a| a == asset)
            .map(|i| self.scores[i])
    }

    /// Writes `asset,score`.
    pub fn write_csv(&self, path: &Path) -> Result<(), PersistenceError> {
        let io = io_err(path);
        let mut f = BufWriter::new(File::create(path).map_err(&io)?);
        writeln!(f, "asset,score").map_err(&io)?;
        for (a, s) in self.assets.iter().zip(&self.scores) {
            writeln!(f, "{a},{s:.12e}").map_err(&io)?;
        }
        f.flush().map_err(&io)
    }
}

/// Plateau persistence of every tetrahedron seen in a starting layer.
pub fn clique_plateau_scores<T: Scalar>(
    s: &LayerSeries<T>,
    tau_plat: usize,
) -> Result<Vec<(Motif, T)>, PersistenceError> {
    check_plateau(tau_plat, s.max_shift)?;
    let idx = PresenceIndex::for_starting_layers(s, MotifKind::Tetrahedron);
    (0..idx.len())
        .map(|m| Ok((idx.motif(m), idx.plateau(m, tau_plat)?)))
        .collect()
}

/// Node scores over the union of tetrahedra of the starting layers.
pub fn node_persistence<T: Scalar>(
    s: &LayerSeries<T>,
    tau_plat: usize,
) -> Result<NodePersistence<T>, PersistenceError> {
    let cliques = clique_plateau_scores(s, tau_plat)?;
    Ok(NodePersistence::from_cliques(s.assets.clone(), &cliques))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMotif<T> {
    pub motif: Motif,
    pub plateau_persistence: T,
}

fn rank_index<T: Scalar>(
    idx: &PresenceIndex,
    tau_plat: usize,
) -> Result<Vec<RankedMotif<T>>, PersistenceError> {
    let mut out = (0..idx.len())
        .map(|m| {
            Ok(RankedMotif {
                motif: idx.motif(m),
                plateau_persistence: idx.plateau::<T>(m, tau_plat)?,
            })
        })
        .collect::<Result<Vec<_>, PersistenceError>>()?;
    // keys ascend with the vertex tuple, so a stable sort keeps ties lexicographic
    out.sort_by(|a, b| {
        b.plateau_persistence
            .partial_cmp(&a.plateau_persistence)
            .expect("finite persistence")
    });
    Ok(out)
}

/// Top `k` motifs of a kind by plateau persistence, ties by vertex tuple.
///
/// The universe is every motif of the kind seen in a starting layer; under
/// unified classing the two triangle kinds share one universe.
pub fn rank_motifs<T: Scalar>(
    s: &LayerSeries<T>,
    kind: MotifKind,
    tau_plat: usize,
    k: usize,
) -> Result<Vec<RankedMotif<T>>, PersistenceError> {
    if k == 0 {
        return Err(PersistenceError::Parameter("k must be at least 1".into()));
    }
    check_plateau(tau_plat, s.max_shift)?;
    let idx = PresenceIndex::for_starting_layers(s, kind);
    let mut ranked = rank_index(&idx, tau_plat)?;
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Serialize)]
struct RankingRow<'a> {
    vertices: Vec<&'a str>,
    kind: MotifKind,
    plateau_persistence: f64,
}

/// Writes a ranking as a JSON list of `{vertices, kind, plateau_persistence}`.
pub fn write_ranking_json<T: Scalar>(
    ranking: &[RankedMotif<T>],
    assets: &[String],
    path: &Path,
) -> Result<(), PersistenceError> {
    let rows: Vec<RankingRow> = ranking
        .iter()
        .map(|r| RankingRow {
            vertices: r.motif.labels(assets),
            kind: r.motif.kind,
            plateau_persistence: r.plateau_persistence.to_f64_lossy(),
        })
        .collect();
    let io = io_err(path);
    let mut f = BufWriter::new(File::create(path).map_err(&io)?);
    serde_json::to_writer_pretty(&mut f, &rows).map_err(|e| PersistenceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(f).map_err(&io)?;
    f.flush().map_err(&io)
}

/// Mean gap between triangle persistence and its edge-independence product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceGap<T> {
    /// Triangles in the top decile by plateau persistence.
    pub triangles: Vec<Motif>,
    pub taus: Vec<usize>,
    /// Mean over the triangles of `persistence − product`, one value per shift.
    pub mean_gap: Vec<T>,
    /// Mean of `mean_gap` over all listed shifts.
    pub overall_mean: T,
}

/// Independence gap of the top-decile triangles for `τ ∈ [tau_from, 𝒯]`.
pub fn independence_gap<T: Scalar>(
    s: &LayerSeries<T>,
    tau_plat: usize,
    tau_from: usize,
) -> Result<IndependenceGap<T>, PersistenceError> {
    check_shift(s, tau_from)?;
    let tri = PresenceIndex::for_starting_layers(s, MotifKind::FaceTriangle);
    if tri.is_empty() {
        return Err(PersistenceError::EmptyClass(MotifKind::FaceTriangle, 0));
    }
    let ranked = rank_index::<T>(&tri, tau_plat)?;
    let top: Vec<Motif> = ranked
        .into_iter()
        .take(tri.len().div_ceil(10))
        .map(|r| r.motif)
        .collect();
    let edges: Vec<Motif> = top.iter().flat_map(Motif::edges).collect();
    let eidx = PresenceIndex::for_motifs(s, &edges)?;
    let slots: Vec<(usize, [usize; 3])> = top
        .iter()
        .map(|m| {
            let e = m.edges();
            (
                tri.position(m).expect("ranked triangle indexed"),
                [0, 1, 2].map(|i| eidx.position(&e[i]).expect("edge indexed")),
            )
        })
        .collect();
    let taus: Vec<usize> = (tau_from..=s.max_shift).collect();
    let mean_gap: Vec<T> = taus
        .par_iter()
        .map(|&tau| {
            let gaps: CompensatedSum<T> = slots
                .iter()
                .map(|(m, e)| {
                    let prod = e
                        .iter()
                        .fold(T::one(), |acc, &ei| acc * eidx.fraction_at::<T>(ei, tau));
                    tri.fraction_at::<T>(*m, tau) - prod
                })
                .collect();
            gaps.total() / T::from_count(slots.len())
        })
        .collect();
    let overall_mean = mean_gap
        .iter()
        .copied()
        .collect::<CompensatedSum<T>>()
        .total()
        / T::from_count(taus.len());
    Ok(IndependenceGap {
        triangles: top,
        taus,
        mean_gap,
        overall_mean,
    })
}

/// How well triangle plateau persistence is explained by edge correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCorrelationStats {
    pub n_triangles: usize,
    /// Squared Pearson correlation with the mean edge-correlation sum.
    pub r2_sum: Option<f64>,
    /// Squared Pearson correlation with the mean edge-correlation product.
    pub r2_product: Option<f64>,
}

/// Relates each triangle's plateau persistence to the sum and the product of
/// its edge correlations, averaged over the starting layers.
pub fn edge_correlation_stats<T: Scalar>(
    s: &LayerSeries<T>,
    tau_plat: usize,
) -> Result<EdgeCorrelationStats, PersistenceError> {
    if s.start_matrices.len() != s.n_starts {
        return Err(PersistenceError::Parameter(
            "series has no correlation matrices".into(),
        ));
    }
    let tri = PresenceIndex::for_starting_layers(s, MotifKind::FaceTriangle);
    let mut pers = Vec::with_capacity(tri.len());
    let mut sums = Vec::with_capacity(tri.len());
    let mut prods = Vec::with_capacity(tri.len());
    let n_starts = s.n_starts as f64;
    for m in 0..tri.len() {
        let v = unpack(tri.keys[m]);
        let (mut sum, mut prod) = (0.0, 0.0);
        for c in &s.start_matrices {
            let e =
                [c.get(v[0], v[1]), c.get(v[0], v[2]), c.get(v[1], v[2])].map(Scalar::to_f64_lossy);
            sum += e[0] + e[1] + e[2];
            prod += e[0] * e[1] * e[2];
        }
        pers.push(tri.plateau::<f64>(m, tau_plat)?);
        sums.push(sum / n_starts);
        prods.push(prod / n_starts);
    }
    Ok(EdgeCorrelationStats {
        n_triangles: tri.len(),
        r2_sum: pearson(&pers, &sums).map(|r| r * r),
        r2_product: pearson(&pers, &prods).map(|r| r * r),
    })
}

/// The `k` vertex triples with the highest mean pairwise correlation,
/// ties broken by the smaller triple.
pub fn top_correlated_triplets<T: Scalar>(c: &CorrelationMatrix<T>, k: usize) -> Vec<[usize; 3]> {
    let n = c.n();
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) * n.saturating_sub(2) / 6);
    for a in 0..n {
        for b in a + 1..n {
            let ab = c.get(a, b);
            for d in b + 1..n {
                all.push((ab + c.get(a, d) + c.get(b, d), [a, b, d]));
            }
        }
    }
    let cmp = |x: &(T, [usize; 3]), y: &(T, [usize; 3])| {
        y.0.partial_cmp(&x.0)
            .expect("finite correlation")
            .then(x.1.cmp(&y.1))
    };
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all.into_iter().map(|(_, t)| t).collect()
}

/// Size of the intersection between the top `k` ranked triangles and the top
/// `k` triplets by mean pairwise correlation in starting layer `layer`.
pub fn overlap_with_top_correlated<T: Scalar>(
    s: &LayerSeries<T>,
    ranking: &[RankedMotif<T>],
    layer: usize,
    k: usize,
) -> Result<usize, PersistenceError> {
    let c = s.start_matrix(layer).ok_or_else(|| {
        PersistenceError::Parameter(format!("no correlation matrix for starting layer {layer}"))
    })?;
    let top = top_correlated_triplets(c, k);
    Ok(ranking
        .iter()
        .take(k)
        .filter(|r| {
            r.motif.vertices.len() == 3 && top.iter().any(|t| t[..] == r.motif.vertices[..])
        })
        .count())
}

/// One overlap value per starting layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub layer: usize,
    pub end_index: usize,
    pub overlap: usize,
}

pub fn overlap_report<T: Scalar>(
    s: &LayerSeries<T>,
    ranking: &[RankedMotif<T>],
    k: usize,
) -> Result<Vec<OverlapRow>, PersistenceError> {
    (0..s.n_starts)
        .into_par_iter()
        .map(|t| {
            Ok(OverlapRow {
                layer: t,
                end_index: s.end_index(t),
                overlap: overlap_with_top_correlated(s, ranking, t, k)?,
            })
        })
        .collect()
}
