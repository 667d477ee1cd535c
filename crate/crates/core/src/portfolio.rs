//! Long-only portfolio construction and out-of-sample volatility experiments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::filtergraph::Motif;
use crate::ingest::ReturnPanel;
use crate::persistence::NodePersistence;
use crate::scalar::{mean, median, sample_std, CompensatedSum, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("asset {0} has zero volatility over the estimation range")]
    DegenerateAsset(String),
    #[error("invalid evaluation split: {0}")]
    Split(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Asset indices with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio<T> {
    holdings: Vec<(usize, T)>,
}

impl<T: Scalar> Portfolio<T> {
    /// Validates and sorts holdings by asset index.
    pub fn new(mut holdings: Vec<(usize, T)>) -> Result<Self, PortfolioError> {
        if holdings.is_empty() {
            return Err(PortfolioError::Weights("empty portfolio".into()));
        }
        holdings.sort_by_key(|h| h.0);
        if holdings.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(PortfolioError::Weights("asset listed twice".into()));
        }
        if let Some(h) = holdings
            .iter()
            .find(|h| !(h.1 >= T::zero()) || !h.1.is_finite())
        {
            return Err(PortfolioError::Weights(format!(
                "weight {} for asset {} is not a non-negative number",
                h.1, h.0
            )));
        }
        let total = holdings
            .iter()
            .map(|h| h.1)
            .collect::<CompensatedSum<T>>()
            .total();
        let tol = T::lit(1e-12).max(T::from_count(holdings.len()) * T::epsilon());
        if (total - T::one()).abs() > tol {
            return Err(PortfolioError::Weights(format!("weights sum to {total}")));
        }
        Ok(Self { holdings })
    }

    /// Normalizes positive raw weights.
    pub fn from_raw(raw: Vec<(usize, T)>) -> Result<Self, PortfolioError> {
        let total = raw
            .iter()
            .map(|h| h.1)
            .collect::<CompensatedSum<T>>()
            .total();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(PortfolioError::Weights(format!(
                "raw weights sum to {total}"
            )));
        }
        Self::new(raw.into_iter().map(|(a, w)| (a, w / total)).collect())
    }

    pub fn equal(assets: &[usize]) -> Result<Self, PortfolioError> {
        let w = T::one() / T::from_count(assets.len().max(1));
        Self::new(assets.iter().map(|&a| (a, w)).collect())
    }

    pub fn holdings(&self) -> &[(usize, T)] {
        &self.holdings
    }

    pub fn assets(&self) -> Vec<usize> {
        self.holdings.iter().map(|h| h.0).collect()
    }

    pub fn len(&self) -> usize {
        self.holdings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holdings.is_empty()
    }

    pub fn weight(&self, asset: usize) -> T {
        self.holdings
            .binary_search_by_key(&asset, |h| h.0)
            .map_or(T::zero(), |i| self.holdings[i].1)
    }
}

/// Estimation and evaluation day ranges, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSplit {
    pub estimation_start: usize,
    pub estimation_end: usize,
    pub evaluation_start: usize,
    pub evaluation_end: usize,
}

impl EvaluationSplit {
    /// Evaluation runs from the day after `estimation_end` to the last panel day.
    pub fn new(
        estimation_start: usize,
        estimation_end: usize,
        n_days: usize,
        min_evaluation: usize,
    ) -> Result<Self, PortfolioError> {
        if estimation_start > estimation_end {
            return Err(PortfolioError::Split(format!(
                "estimation range [{estimation_start}, {estimation_end}] is empty"
            )));
        }
        let available = n_days.saturating_sub(estimation_end + 1);
        if available < min_evaluation.max(2) {
            return Err(PortfolioError::Split(format!(
                "{available} evaluation days after day {estimation_end}, need {}",
                min_evaluation.max(2)
            )));
        }
        Ok(Self {
            estimation_start,
            estimation_end,
            evaluation_start: estimation_end + 1,
            evaluation_end: n_days - 1,
        })
    }

    pub fn evaluation_days(&self) -> usize {
        self.evaluation_end + 1 - self.evaluation_start
    }
}

/// Equal weights over the distinct vertices of the given motifs.
pub fn motif_portfolio<T: Scalar>(top: &[Motif]) -> Result<Portfolio<T>, PortfolioError> {
    if top.is_empty() {
        return Err(PortfolioError::Parameter("empty motif list".into()));
    }
    let mut assets: Vec<usize> = top
        .iter()
        .flat_map(|m| m.vertices.iter().copied())
        .collect();
    assets.sort_unstable();
    assets.dedup();
    Portfolio::equal(&assets)
}

/// Uniform sample of `size` assets without replacement, equally weighted.
pub fn sample_random_portfolio<T: Scalar>(
    universe: &[usize],
    size: usize,
    seed: u64,
) -> Result<Portfolio<T>, PortfolioError> {
    if size == 0 || size > universe.len() {
        return Err(PortfolioError::Parameter(format!(
            "cannot draw {size} assets from a universe of {}",
            universe.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<usize> = rand::seq::index::sample(&mut rng, universe.len(), size)
        .into_iter()
        .map(|i| universe[i])
        .collect();
    Portfolio::equal(&picked)
}

/// Weights proportional to `1/σ`, σ the sample standard deviation over
/// `[range.0, range.1]`.
pub fn weights_inverse_volatility<T: Scalar>(
    r: &ReturnPanel<T>,
    assets: &[usize],
    range: (usize, usize),
) -> Result<Portfolio<T>, PortfolioError> {
    if range.1 < range.0 + 1 || range.1 >= r.n_days() {
        return Err(PortfolioError::Split(format!(
            "estimation range [{}, {}] needs at least 2 of {} days",
            range.0,
            range.1,
            r.n_days()
        )));
    }
    let raw = assets
        .iter()
        .map(|&a| {
            let sigma = sample_std(&r.column_range(a, range.0, range.1)).unwrap_or(T::zero());
            if !(sigma > T::zero()) {
                return Err(PortfolioError::DegenerateAsset(r.assets()[a].clone()));
            }
            Ok((a, sigma.recip()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Portfolio::from_raw(raw)
}

/// Treatment of selected assets whose persistence score is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroScore {
    /// Weigh them as if they had the smallest positive score in the selection.
    #[default]
    Cap,
    /// Leave them out of the portfolio.
    Exclude,
}

/// Weights proportional to `1/P` of each asset's node persistence.
///
/// A selection without any positive score falls back to equal weights.
pub fn weights_inverse_persistence<T: Scalar>(
    np: &NodePersistence<T>,
    assets: &[usize],
    zero: ZeroScore,
) -> Result<Portfolio<T>, PortfolioError> {
    if assets.is_empty() {
        return Err(PortfolioError::Parameter("empty selection".into()));
    }
    let scores: Vec<T> = assets.iter().map(|&a| np.scores[a]).collect();
    let min_positive = scores
        .iter()
        .copied()
        .filter(|&s| s > T::zero())
        .fold(None, |m: Option<T>, s| Some(m.map_or(s, |m| m.min(s))));
    let Some(floor) = min_positive else {
        log::warn!("no selected asset has a positive persistence score, using equal weights");
        return Portfolio::equal(assets);
    };
    let raw = assets
        .iter()
        .zip(&scores)
        .filter_map(|(&a, &s)| match (s > T::zero(), zero) {
            (true, _) => Some((a, s.recip())),
            (false, ZeroScore::Cap) => Some((a, floor.recip())),
            (false, ZeroScore::Exclude) => None,
        })
        .collect();
    Portfolio::from_raw(raw)
}

/// Daily returns of the portfolio over the evaluation range.
pub fn portfolio_returns<T: Scalar>(
    p: &Portfolio<T>,
    r: &ReturnPanel<T>,
    split: &EvaluationSplit,
) -> Result<Vec<T>, PortfolioError> {
    if split.evaluation_end >= r.n_days() || split.evaluation_start > split.evaluation_end {
        return Err(PortfolioError::Split(format!(
            "evaluation range [{}, {}] outside a panel of {} days",
            split.evaluation_start,
            split.evaluation_end,
            r.n_days()
        )));
    }
    if let Some(h) = p.holdings.iter().find(|h| h.0 >= r.n_assets()) {
        return Err(PortfolioError::Parameter(format!(
            "asset index {} out of range",
            h.0
        )));
    }
    Ok((split.evaluation_start..=split.evaluation_end)
        .map(|t| {
            let row = r.row(t);
            p.holdings
                .iter()
                .fold(T::zero(), |acc, &(a, w)| acc + w * row[a])
        })
        .collect())
}

/// Sample standard deviation of daily portfolio returns over the evaluation range.
pub fn out_of_sample_volatility<T: Scalar>(
    p: &Portfolio<T>,
    r: &ReturnPanel<T>,
    split: &EvaluationSplit,
) -> Result<T, PortfolioError> {
    let series = portfolio_returns(p, r, split)?;
    sample_std(&series).ok_or_else(|| PortfolioError::Split("fewer than 2 evaluation days".into()))
}

/// Parameters shared by both experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Random portfolios drawn against the motif portfolio.
    pub n_random: usize,
    /// Paired selections in the weighting comparison.
    pub n_selections: usize,
    pub selection_size: usize,
    pub zero_score: ZeroScore,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_random: 100_000,
            n_selections: 1000,
            selection_size: 25,
            zero_score: ZeroScore::Cap,
        }
    }
}

fn derived_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}

/// Motif portfolio volatility against a distribution of random portfolios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotifRandomReport<T> {
    pub seed: u64,
    pub motif_assets: Vec<usize>,
    pub motif_volatility: T,
    /// Share of random portfolios with lower volatility, in percent.
    pub percentile: f64,
    pub random_volatilities: Vec<T>,
    pub mean_random: T,
    pub median_random: T,
    pub split: EvaluationSplit,
}

pub fn run_experiment_motif_vs_random<T: Scalar>(
    r: &ReturnPanel<T>,
    top: &[Motif],
    split: &EvaluationSplit,
    cfg: &ExperimentConfig,
) -> Result<MotifRandomReport<T>, PortfolioError> {
    if cfg.n_random == 0 {
        return Err(PortfolioError::Parameter(
            "need at least one random portfolio".into(),
        ));
    }
    let motif = motif_portfolio::<T>(top)?;
    let motif_volatility = out_of_sample_volatility(&motif, r, split)?;
    let universe: Vec<usize> = (0..r.n_assets()).collect();
    let size = motif.len();
    let random_volatilities = (0..cfg.n_random)
        .into_par_iter()
        .map(|i| {
            let p = sample_random_portfolio(&universe, size, derived_seed(cfg.seed, i))?;
            out_of_sample_volatility(&p, r, split)
        })
        .collect::<Result<Vec<T>, _>>()?;
    let below = random_volatilities
        .iter()
        .filter(|&&v| v < motif_volatility)
        .count();
    Ok(MotifRandomReport {
        seed: cfg.seed,
        motif_assets: motif.assets(),
        motif_volatility,
        percentile: 100.0 * below as f64 / cfg.n_random as f64,
        mean_random: mean(&random_volatilities).expect("non-empty"),
        median_random: median(&random_volatilities).expect("non-empty"),
        random_volatilities,
        split: *split,
    })
}

/// One selection evaluated under both weighting schemes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow<T> {
    pub selection_id: usize,
    pub assets: Vec<usize>,
    pub vol_weighted: T,
    pub persist_weighted: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedReport<T> {
    pub seed: u64,
    pub rows: Vec<PairedRow<T>>,
    pub mean_vol: T,
    pub mean_persist: T,
    pub std_vol: T,
    pub std_persist: T,
    pub fraction_persist_wins: f64,
    pub welch: WelchTest,
    pub split: EvaluationSplit,
}

/// 1/σ against 1/P weighting over the same random selections.
pub fn run_experiment_vol_vs_persist<T: Scalar>(
    r: &ReturnPanel<T>,
    np: &NodePersistence<T>,
    split: &EvaluationSplit,
    cfg: &ExperimentConfig,
) -> Result<PairedReport<T>, PortfolioError> {
    if cfg.n_selections < 2 {
        return Err(PortfolioError::Parameter(
            "need at least two selections".into(),
        ));
    }
    if np.scores.len() != r.n_assets() {
        return Err(PortfolioError::Parameter(format!(
            "{} persistence scores for {} assets",
            np.scores.len(),
            r.n_assets()
        )));
    }
    let universe: Vec<usize> = (0..r.n_assets()).collect();
    let est = (split.estimation_start, split.estimation_end);
    let rows = (0..cfg.n_selections)
        .into_par_iter()
        .map(|i| {
            let pick = sample_random_portfolio::<T>(
                &universe,
                cfg.selection_size,
                derived_seed(cfg.seed, i),
            )?
            .assets();
            let vol = weights_inverse_volatility(r, &pick, est)?;
            let per = weights_inverse_persistence(np, &pick, cfg.zero_score)?;
            Ok(PairedRow {
                selection_id: i,
                vol_weighted: out_of_sample_volatility(&vol, r, split)?,
                persist_weighted: out_of_sample_volatility(&per, r, split)?,
                assets: pick,
            })
        })
        .collect::<Result<Vec<_>, PortfolioError>>()?;
    let vols: Vec<T> = rows.iter().map(|r| r.vol_weighted).collect();
    let pers: Vec<T> = rows.iter().map(|r| r.persist_weighted).collect();
    let wins = rows
        .iter()
        .filter(|r| r.persist_weighted < r.vol_weighted)
        .count();
    let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
    Ok(PairedReport {
        seed: cfg.seed,
        mean_vol: mean(&vols).expect("non-empty"),
        mean_persist: mean(&pers).expect("non-empty"),
        std_vol: sample_std(&vols).expect("two selections"),
        std_persist: sample_std(&pers).expect("two selections"),
        fraction_persist_wins: wins as f64 / rows.len() as f64,
        welch: welch_t_test(&f(&vols), &f(&pers))?,
        rows,
        split: *split,
    })
}

/// Two-sided Welch two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, PortfolioError> {
    let (Some(ma), Some(mb), Some(sa), Some(sb)) = (mean(a), mean(b), sample_std(a), sample_std(b))
    else {
        return Err(PortfolioError::Parameter(
            "each sample needs at least two values".into(),
        ));
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        return Ok(WelchTest {
            t: 0.0,
            df: na + nb - 2.0,
            p_value,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| PortfolioError::Parameter(format!("t distribution: {e}")))?;
    Ok(WelchTest {
        t,
        df,
        p_value: (2.0 * dist.cdf(-t.abs())).min(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub seed: u64,
    pub n_portfolios: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motif_volatility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_random: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_random: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_persist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_persist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_persist_wins: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welch_p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection_size: Option<usize>,
    pub split: EvaluationSplit,
}

impl<T: Scalar> MotifRandomReport<T> {
    pub fn summary(&self) -> ExperimentSummary {
        ExperimentSummary {
            experiment: "motif-vs-random".into(),
            seed: self.seed,
            n_portfolios: self.random_volatilities.len(),
            motif_volatility: Some(self.motif_volatility.to_f64_lossy()),
            percentile: Some(self.percentile),
            mean_random: Some(self.mean_random.to_f64_lossy()),
            median_random: Some(self.median_random.to_f64_lossy()),
            mean_vol: None,
            mean_persist: None,
            std_vol: None,
            std_persist: None,
            fraction_persist_wins: None,
            welch_p_value: None,
            selection_size: Some(self.motif_assets.len()),
            split: self.split,
        }
    }

    /// Writes `portfolio_id,volatility`.
    pub fn write_distribution_csv(&self, path: &Path) -> Result<(), PortfolioError> {
        let io = io_err(path);
        let mut f = BufWriter::new(File::create(path).map_err(&io)?);
        writeln!(f, "portfolio_id,volatility").map_err(&io)?;
        for (i, v) in self.random_volatilities.iter().enumerate() {
            writeln!(f, "{i},{v:.12e}").map_err(&io)?;
        }
        f.flush().map_err(&io)
    }
}

impl<T: Scalar> PairedReport<T> {
    pub fn summary(&self) -> ExperimentSummary {
        ExperimentSummary {
            experiment: "vol-vs-persist".into(),
            seed: self.seed,
            n_portfolios: self.rows.len(),
            motif_volatility: None,
            percentile: None,
            mean_random: None,
            median_random: None,
            mean_vol: Some(self.mean_vol.to_f64_lossy()),
            mean_persist: Some(self.mean_persist.to_f64_lossy()),
            std_vol: Some(self.std_vol.to_f64_lossy()),
            std_persist: Some(self.std_persist.to_f64_lossy()),
            fraction_persist_wins: Some(self.fraction_persist_wins),
            welch_p_value: Some(self.welch.p_value),
            selection_size: self.rows.first().map(|r| r.assets.len()),
            split: self.split,
        }
    }

    /// Writes `selection_id,vol_weighted,persist_weighted`.
    pub fn write_pairs_csv(&self, path: &Path) -> Result<(), PortfolioError> {
        let io = io_err(path);
        let mut f = BufWriter::new(File::create(path).map_err(&io)?);
        writeln!(f, "selection_id,vol_weighted,persist_weighted").map_err(&io)?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{:.12e},{:.12e}",
                r.selection_id, r.vol_weighted, r.persist_weighted
            )
            .map_err(&io)?;
        }
        f.flush().map_err(&io)
    }

    /// Writes `selection_id,assets` with assets separated by `;`.
    pub fn write_selections_csv(
        &self,
        assets: &[String],
        path: &Path,
    ) -> Result<(), PortfolioError> {
        let io = io_err(path);
        let mut f = BufWriter::new(File::create(path).map_err(&io)?);
        writeln!(f, "selection_id,assets").map_err(&io)?;
        for r in &self.rows {
            let names: Vec<&str> = r.assets.iter().map(|&a| assets[a].as_str()).collect();
            writeln!(f, "{},{}", r.selection_id, names.join(";")).map_err(&io)?;
        }
        f.flush().map_err(&io)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PortfolioError + '_ {
    move |e| PortfolioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes experiment summaries as pretty JSON.
pub fn write_summary_json(summary: &ExperimentSummary, path: &Path) -> Result<(), PortfolioError> {
    let io = io_err(path);
    let mut f = BufWriter::new(File::create(path).map_err(&io)?);
    serde_json::to_writer_pretty(&mut f, summary).map_err(|e| PortfolioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(f).map_err(&io)?;
    f.flush().map_err(&io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtergraph::MotifKind;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn panel(cols: &[Vec<f64>]) -> ReturnPanel<f64> {
        let n_days = cols[0].len();
        let d0 = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let dates = (0..n_days)
            .map(|i| d0 + chrono::Days::new(i as u64))
            .collect();
        let assets = (0..cols.len()).map(|i| format!("S{i}")).collect();
        let mut v = Vec::with_capacity(n_days * cols.len());
        for t in 0..n_days {
            for c in cols {
                v.push(c[t]);
            }
        }
        ReturnPanel::new(dates, assets, v).unwrap()
    }

    fn noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| z.sample(&mut rng)).collect()
    }

    fn tri(v: [usize; 3]) -> Motif {
        Motif::new(MotifKind::FaceTriangle, v.to_vec())
    }

    fn np(scores: Vec<f64>) -> NodePersistence<f64> {
        NodePersistence {
            assets: (0..scores.len()).map(|i| format!("S{i}")).collect(),
            scores,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn motif_portfolio_examples() {
        let disjoint: Vec<Motif> = (0..10)
            .map(|i| tri([3 * i, 3 * i + 1, 3 * i + 2]))
            .collect();
        let p = motif_portfolio::<f64>(&disjoint).unwrap();
        assert_eq!(p.len(), 30);
        assert!(p.holdings().iter().all(|h| close(h.1, 1.0 / 30.0)));

        let shared = [tri([0, 1, 2]), tri([0, 3, 4]), tri([0, 5, 6])];
        let p = motif_portfolio::<f64>(&shared).unwrap();
        assert_eq!(p.assets(), (0..7).collect::<Vec<_>>());

        let p = motif_portfolio::<f64>(&[tri([4, 7, 9])]).unwrap();
        assert_eq!(p.assets(), vec![4, 7, 9]);
        assert!(close(p.weight(7), 1.0 / 3.0));
        assert_eq!(
            motif_portfolio::<f64>(&[]),
            Err(PortfolioError::Parameter("empty motif list".into()))
        );
    }

    #[test]
    fn random_portfolio_examples() {
        let u: Vec<usize> = (0..10).collect();
        let p = sample_random_portfolio::<f64>(&u, 10, 3).unwrap();
        assert_eq!(p.assets(), u);
        let a = sample_random_portfolio::<f64>(&u, 4, 11).unwrap();
        let b = sample_random_portfolio::<f64>(&u, 4, 11).unwrap();
        assert_eq!(a, b);
        assert!(sample_random_portfolio::<f64>(&u, 11, 0).is_err());
    }

    #[test]
    fn inclusion_frequency() {
        let u: Vec<usize> = (0..100).collect();
        let mut hits = vec![0usize; 100];
        let n = 100_000;
        for i in 0..n {
            for a in sample_random_portfolio::<f64>(&u, 25, derived_seed(5, i))
                .unwrap()
                .assets()
            {
                hits[a] += 1;
            }
        }
        for h in hits {
            let f = h as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn inverse_volatility_examples() {
        // alternating ±s has sample std s·sqrt(n/(n-1)), common to every column
        let alt = |s: f64| {
            (0..10)
                .map(|t| if t % 2 == 0 { s } else { -s })
                .collect::<Vec<_>>()
        };
        let r = panel(&[alt(0.1), alt(0.2)]);
        let p = weights_inverse_volatility(&r, &[0, 1], (0, 9)).unwrap();
        assert!(close(p.weight(0), 2.0 / 3.0) && close(p.weight(1), 1.0 / 3.0));

        let r = panel(&[alt(0.01), alt(0.02), alt(0.04)]);
        let p = weights_inverse_volatility(&r, &[0, 1, 2], (0, 9)).unwrap();
        for (a, w) in [(0, 4.0 / 7.0), (1, 2.0 / 7.0), (2, 1.0 / 7.0)] {
            assert!(close(p.weight(a), w));
        }
        let r = panel(&[alt(0.3), alt(0.3)]);
        let p = weights_inverse_volatility(&r, &[0, 1], (0, 9)).unwrap();
        assert!(close(p.weight(0), 0.5));

        let r = panel(&[alt(0.3), vec![0.01; 10]]);
        assert_eq!(
            weights_inverse_volatility(&r, &[0, 1], (0, 9)),
            Err(PortfolioError::DegenerateAsset("S1".into()))
        );
    }

    #[test]
    fn inverse_persistence_examples() {
        let s = np(vec![0.5, 1.0, 0.0, 0.25]);
        let p = weights_inverse_persistence(&s, &[0, 1], ZeroScore::Cap).unwrap();
        assert!(close(p.weight(0), 2.0 / 3.0) && close(p.weight(1), 1.0 / 3.0));

        let s2 = np(vec![0.7; 4]);
        let p = weights_inverse_persistence(&s2, &[0, 1, 2, 3], ZeroScore::Cap).unwrap();
        assert!(p.holdings().iter().all(|h| close(h.1, 0.25)));

        // the zero-score asset gets the weight of the smallest positive score (0.5)
        let p = weights_inverse_persistence(&s, &[0, 1, 2], ZeroScore::Cap).unwrap();
        assert!(close(p.weight(2), p.weight(0)));
        assert!(close(p.weight(2), 0.4));
        let p = weights_inverse_persistence(&s, &[0, 1, 2], ZeroScore::Exclude).unwrap();
        assert_eq!(p.assets(), vec![0, 1]);

        let z = np(vec![0.0; 3]);
        let p = weights_inverse_persistence(&z, &[0, 2], ZeroScore::Cap).unwrap();
        assert!(close(p.weight(0), 0.5));
    }

    fn split(n_days: usize) -> EvaluationSplit {
        EvaluationSplit::new(0, 0, n_days, 2).unwrap()
    }

    #[test]
    fn volatility_examples() {
        let x = noise(201, 0.02, 1);
        let r = panel(&[x.clone(), x.iter().map(|v| -v).collect()]);
        let sp = split(201);
        let single = Portfolio::<f64>::equal(&[0]).unwrap();
        let want = sample_std(&x[1..]).unwrap();
        assert!(close(
            out_of_sample_volatility(&single, &r, &sp).unwrap(),
            want
        ));
        let hedge = Portfolio::<f64>::equal(&[0, 1]).unwrap();
        assert!(out_of_sample_volatility(&hedge, &r, &sp).unwrap() < 1e-15);

        let r = panel(&[noise(10_001, 0.01, 2), noise(10_001, 0.01, 3)]);
        let v = out_of_sample_volatility(&Portfolio::equal(&[0, 1]).unwrap(), &r, &split(10_001))
            .unwrap();
        assert!((v - 0.01 / 2f64.sqrt()).abs() < 2e-4, "{v}");
    }

    #[test]
    fn split_rules() {
        assert!(EvaluationSplit::new(0, 90, 100, 60).is_err());
        let s = EvaluationSplit::new(5, 39, 100, 60).unwrap();
        assert_eq!(
            (s.evaluation_start, s.evaluation_end, s.evaluation_days()),
            (40, 99, 60)
        );
        assert!(EvaluationSplit::new(9, 3, 100, 2).is_err());
    }

    #[test]
    fn welch_matches_reference() {
        // reference: scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0];
        let b = [
            28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0,
            23.9, 21.6, 24.3, 20.4, 23.9, 13.3,
        ];
        let w = welch_t_test(&a, &b).unwrap();
        assert!((w.t + 2.225_512_039_969_852).abs() < 1e-10, "{}", w.t);
        assert!((w.df - 24.524_634_944_257_343).abs() < 1e-9, "{}", w.df);
        assert!(
            (w.p_value - 0.035_484_530_830_010_325).abs() < 1e-8,
            "{}",
            w.p_value
        );
        let same = welch_t_test(&a, &a).unwrap();
        assert!((same.p_value - 1.0).abs() < 1e-12);
    }

    fn small_panel() -> ReturnPanel<f64> {
        let common = noise(400, 0.01, 10);
        let mut cols = Vec::new();
        for i in 0..12 {
            let own = noise(400, 0.01, 100 + i);
            if i < 4 {
                cols.push(common.iter().zip(&own).map(|(c, o)| c + 0.3 * o).collect());
            } else {
                cols.push(own);
            }
        }
        panel(&cols)
    }

    #[test]
    fn experiments_are_reproducible() {
        let r = small_panel();
        let sp = EvaluationSplit::new(0, 199, 400, 60).unwrap();
        let cfg = ExperimentConfig {
            seed: 42,
            n_random: 300,
            n_selections: 50,
            selection_size: 5,
            zero_score: ZeroScore::Cap,
        };
        let top = [tri([0, 1, 2]), tri([1, 2, 3])];
        let a = run_experiment_motif_vs_random(&r, &top, &sp, &cfg).unwrap();
        let b = run_experiment_motif_vs_random(&r, &top, &sp, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.percentile >= 90.0, "{}", a.percentile);

        let scores = np((0..12).map(|i| if i < 4 { 3.0 } else { 0.5 }).collect());
        let p = run_experiment_vol_vs_persist(&r, &scores, &sp, &cfg).unwrap();
        assert_eq!(
            p,
            run_experiment_vol_vs_persist(&r, &scores, &sp, &cfg).unwrap()
        );
        assert_eq!(p.rows.len(), 50);
        assert!(p.mean_persist < p.mean_vol);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        p.write_pairs_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("selection_id,vol_weighted,persist_weighted\n0,"));
        let path = dir.path().join("summary.json");
        write_summary_json(&p.summary(), &path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["experiment"], "vol-vs-persist");
        assert!(v["fraction_persist_wins"].is_number());
        assert!(v.get("percentile").is_none());
        write_summary_json(&a.summary(), &path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(v["percentile"].is_number() && v["motif_volatility"].is_number());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_stay_on_simplex(
            scores in proptest::collection::vec(prop_oneof![Just(0.0), 0.001f64..10.0], 2..30),
            exclude in any::<bool>(),
        ) {
            let n = scores.len();
            let s = np(scores);
            let all: Vec<usize> = (0..n).collect();
            let rule = if exclude { ZeroScore::Exclude } else { ZeroScore::Cap };
            let p = weights_inverse_persistence(&s, &all, rule).unwrap();
            let total: f64 = p.holdings().iter().map(|h| h.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.holdings().iter().all(|h| h.1 >= 0.0));
            // a zero-score asset never outweighs the lowest scored one
            let max_pos = p.holdings().iter().filter(|h| s.scores[h.0] > 0.0).map(|h| h.1).fold(0.0, f64::max);
            for h in p.holdings() {
                if s.scores[h.0] == 0.0 && max_pos > 0.0 {
                    prop_assert!(h.1 <= max_pos * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn volatility_ignores_order_and_zero_weights(seed in 0u64..500, k in 2usize..6) {
            let cols: Vec<Vec<f64>> = (0..6).map(|i| noise(80, 0.01, seed * 10 + i)).collect();
            let r = panel(&cols);
            let sp = EvaluationSplit::new(0, 9, 80, 20).unwrap();
            let raw: Vec<(usize, f64)> = (0..k).map(|a| (a, 1.0 + a as f64)).collect();
            let p = Portfolio::from_raw(raw.clone()).unwrap();
            let mut rev = raw.clone();
            rev.reverse();
            let q = Portfolio::from_raw(rev).unwrap();
            let mut padded = p.holdings().to_vec();
            padded.push((5, 0.0));
            let z = Portfolio::new(padded).unwrap();
            let v = out_of_sample_volatility(&p, &r, &sp).unwrap();
            prop_assert_eq!(v, out_of_sample_volatility(&q, &r, &sp).unwrap());
            prop_assert!((v - out_of_sample_volatility(&z, &r, &sp).unwrap()).abs() <= 1e-15);
        }
    }
}
