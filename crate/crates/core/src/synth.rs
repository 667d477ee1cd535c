//! Synthetic return panels with planted correlation blocks.
//!
//! Returns are Gaussian: each day draws i.i.d. standard normals and applies
//! the Cholesky factor of that day's block correlation matrix. Days sharing
//! the same set of active blocks share one factor.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtergraph::{Motif, MotifKind};
use crate::ingest::{IngestError, PricePanel, ReturnPanel};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("correlation structure of blocks {blocks:?} is not positive definite")]
    NotPositiveDefinite { blocks: Vec<usize> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// A group of assets sharing one pairwise correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    /// Zero-based asset indices.
    pub members: Vec<usize>,
    pub correlation: f64,
    /// Active day range `[start, end)`; the whole panel when absent.
    #[serde(default)]
    pub active: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_assets: usize,
    /// Number of return days.
    pub n_days: usize,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    /// Daily standard deviation of every asset.
    #[serde(default = "default_volatility")]
    pub base_volatility: f64,
    pub seed: u64,
    /// Date of the initial price; returns start on the next business day.
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Blocks may share assets only when set. On shared pairs the block
    /// declared last wins.
    #[serde(default)]
    pub allow_overlap: bool,
}

fn default_volatility() -> f64 {
    0.01
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_assets == 0 {
            return bad("n_assets must be positive".into());
        }
        if self.n_days < 2 {
            return bad(format!("n_days must be at least 2, got {}", self.n_days));
        }
        if !(self.base_volatility.is_finite() && self.base_volatility > 0.0) {
            return bad(format!(
                "base_volatility must be positive, got {}",
                self.base_volatility
            ));
        }
        let mut owner = vec![None; self.n_assets];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.members.len() < 2 {
                return bad(format!("block {b} needs at least 2 members"));
            }
            if !(block.correlation > -1.0 && block.correlation < 1.0) {
                return bad(format!(
                    "block {b} correlation {} outside (-1, 1)",
                    block.correlation
                ));
            }
            if let Some([s, e]) = block.active {
                if s >= e || e > self.n_days {
                    return bad(format!("block {b} active range [{s}, {e}) is invalid"));
                }
            }
            let mut seen = block.members.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("block {b} lists an asset twice"));
            }
            for &m in &block.members {
                if m >= self.n_assets {
                    return bad(format!("block {b} member {m} outside 0..{}", self.n_assets));
                }
                if let Some(prev) = owner[m] {
                    if !self.allow_overlap {
                        return bad(format!(
                            "asset {m} is in blocks {prev} and {b}; set allow_overlap to permit this"
                        ));
                    }
                }
                owner[m] = Some(b);
            }
        }
        Ok(())
    }

    fn active(&self, b: usize, day: usize) -> bool {
        self.blocks[b]
            .active
            .is_none_or(|[s, e]| (s..e).contains(&day))
    }

    fn permanent(&self, b: usize) -> bool {
        self.blocks[b]
            .active
            .is_none_or(|[s, e]| s == 0 && e >= self.n_days)
    }

    /// Asset names `A000`, `A001`, ...
    pub fn asset_names(&self) -> Vec<String> {
        let width = self.n_assets.saturating_sub(1).to_string().len().max(3);
        (0..self.n_assets)
            .map(|i| format!("A{i:0width$}"))
            .collect()
    }

    /// `n_days + 1` business days starting at `start_date` (rolled forward off weekends).
    pub fn price_dates(&self) -> Vec<NaiveDate> {
        let mut d = self.start_date;
        let mut out = Vec::with_capacity(self.n_days + 1);
        while out.len() <= self.n_days {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                out.push(d);
            }
            d = d + Days::new(1);
        }
        out
    }

    /// Block correlation matrix with the listed blocks switched on.
    pub fn correlation_for(&self, blocks: &[usize]) -> DMatrix<f64> {
        let n = self.n_assets;
        let mut c = DMatrix::identity(n, n);
        for &b in blocks {
            let block = &self.blocks[b];
            for (i, &x) in block.members.iter().enumerate() {
                for &y in &block.members[i + 1..] {
                    c[(x, y)] = block.correlation;
                    c[(y, x)] = block.correlation;
                }
            }
        }
        c
    }
}

/// Lower Cholesky factor per distinct set of active blocks.
fn factors(spec: &ScenarioSpec) -> Result<BTreeMap<Vec<usize>, Option<DMatrix<f64>>>, SynthError> {
    let mut out = BTreeMap::new();
    for day in 0..spec.n_days {
        let key: Vec<usize> = (0..spec.blocks.len())
            .filter(|&b| spec.active(b, day))
            .collect();
        if out.contains_key(&key) {
            continue;
        }
        let l = if key.is_empty() {
            None
        } else {
            let chol = spec.correlation_for(&key).cholesky().ok_or_else(|| {
                SynthError::NotPositiveDefinite {
                    blocks: key.clone(),
                }
            })?;
            Some(chol.l())
        };
        out.insert(key, l);
    }
    Ok(out)
}

/// Draws the return panel; identical specs give identical panels.
pub fn generate<T: Scalar>(spec: &ScenarioSpec) -> Result<ReturnPanel<T>, SynthError> {
    spec.validate()?;
    let factors = factors(spec)?;
    let n = spec.n_assets;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(n * spec.n_days);
    for day in 0..spec.n_days {
        let z = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let key: Vec<usize> = (0..spec.blocks.len())
            .filter(|&b| spec.active(b, day))
            .collect();
        let x = match &factors[&key] {
            Some(l) => l * z,
            None => z,
        };
        values.extend(x.iter().map(|v| T::lit(v * spec.base_volatility)));
    }
    let dates = spec.price_dates()[1..].to_vec();
    Ok(ReturnPanel::new(dates, spec.asset_names(), values)?)
}

/// Prices starting at 100 on `start_date`, ready for the ingest CSV format.
pub fn generate_prices<T: Scalar>(spec: &ScenarioSpec) -> Result<PricePanel<T>, SynthError> {
    let r = generate::<T>(spec)?;
    Ok(r.to_prices(T::lit(100.0), spec.price_dates()[0])?)
}

/// Every triangle and tetrahedron inside a block active over the whole panel.
pub fn ground_truth_motifs(spec: &ScenarioSpec) -> Vec<Motif> {
    let mut out = Vec::new();
    for (b, block) in spec.blocks.iter().enumerate() {
        if block.members.len() < 3 || !spec.permanent(b) {
            continue;
        }
        let mut m = block.members.clone();
        m.sort_unstable();
        let k = m.len();
        for i in 0..k {
            for j in i + 1..k {
                for l in j + 1..k {
                    out.push(Motif::new(MotifKind::FaceTriangle, vec![m[i], m[j], m[l]]));
                    for q in l + 1..k {
                        out.push(Motif::new(
                            MotifKind::Tetrahedron,
                            vec![m[i], m[j], m[l], m[q]],
                        ));
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
