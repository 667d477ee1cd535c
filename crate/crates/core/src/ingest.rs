//! Price loading, date alignment, log-returns and rolling windows.
//!
//! Input is long-format CSV with header `date,asset,close` and ISO-8601
//! dates. Assets are sorted lexicographically and only dates present for
//! every asset are kept; the rest are reported as dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid price on {date} for asset {asset}: {value}")]
    NonPositivePrice {
        date: NaiveDate,
        asset: String,
        value: f64,
    },
    #[error("duplicate observation on {date} for asset {asset} (line {line})")]
    Duplicate {
        date: NaiveDate,
        asset: String,
        line: u64,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("window [{start}, {end}] out of range for panel of {available} rows")]
    Bounds {
        start: i64,
        end: usize,
        available: usize,
    },
    #[error("window of {window} days is not longer than the {assets} assets it covers (need N < window)")]
    IllConditioned { window: usize, assets: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Close prices, rows = dates, columns = assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel<T> {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Vec<T>,
}

/// Daily log-returns aligned with the price panel they were derived from.
///
/// `dates[t]` is the date of the later price in the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel<T> {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Vec<T>,
}

/// A contiguous run of rows `[end_index - length + 1, end_index]`.
#[derive(Debug, Clone, Copy)]
pub struct ReturnWindow<'a, T> {
    panel: &'a ReturnPanel<T>,
    end_index: usize,
    length: usize,
}

/// A date excluded by the intersection alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedDate {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped: Vec<DroppedDate>,
}

impl LoadReport {
    /// Writes the report as CSV `date,reason`.
    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["date", "reason"])?;
        for d in &self.dropped {
            w.write_record([d.date.to_string(), d.reason.clone()])?;
        }
        w.flush().map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(())
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<(), IngestError> {
    if rows * cols != len {
        return Err(IngestError::Shape(format!(
            "{rows} x {cols} matrix needs {} values, got {len}",
            rows * cols
        )));
    }
    Ok(())
}

impl<T: Scalar> PricePanel<T> {
    /// Builds a panel from row-major values, validating every invariant.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: Vec<T>,
    ) -> Result<Self, IngestError> {
        check_shape(dates.len(), assets.len(), values.len())?;
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::Shape(
                "dates must be strictly increasing".into(),
            ));
        }
        let n = assets.len();
        for (k, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > T::zero()) {
                return Err(IngestError::NonPositivePrice {
                    date: dates[k / n],
                    asset: assets[k % n].clone(),
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn get(&self, t: usize, asset: usize) -> T {
        self.values[t * self.assets.len() + asset]
    }

    pub fn row(&self, t: usize) -> &[T] {
        let n = self.assets.len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Writes the panel back out in the long `date,asset,close` format.
    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["date", "asset", "close"])?;
        for (t, date) in self.dates.iter().enumerate() {
            let d = date.to_string();
            for (i, asset) in self.assets.iter().enumerate() {
                w.write_record([d.as_str(), asset.as_str(), &self.get(t, i).to_string()])?;
            }
        }
        w.flush().map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(())
    }
}

/// Loads long-format prices and aligns them on the dates common to every asset.
pub fn load_prices<T: Scalar>(path: &Path) -> Result<(PricePanel<T>, LoadReport), IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_prices(file)
}

/// Same as [`load_prices`] but from any reader.
pub fn read_prices<T: Scalar, R: std::io::Read>(
    reader: R,
) -> Result<(PricePanel<T>, LoadReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["date", "asset", "close"] {
        return Err(IngestError::Parse {
            line: 1,
            message: format!(
                "expected header `date,asset,close`, found `{}`",
                names.join(",")
            ),
        });
    }

    let mut obs: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut all_dates = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(IngestError::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let date =
            NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| IngestError::Parse {
                line,
                message: format!("bad date `{}`: {e}", &record[0]),
            })?;
        let asset = record[1].to_string();
        if asset.is_empty() {
            return Err(IngestError::Parse {
                line,
                message: "empty asset identifier".into(),
            });
        }
        let close: f64 = record[2].parse().map_err(|_| IngestError::Parse {
            line,
            message: format!("bad close price `{}`", &record[2]),
        })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(IngestError::NonPositivePrice {
                date,
                asset,
                value: close,
            });
        }
        let series = obs.entry(asset.clone()).or_default();
        if series.insert(date, close).is_some() {
            return Err(IngestError::Duplicate { date, asset, line });
        }
        all_dates.insert(date);
    }

    let assets: Vec<String> = obs.keys().cloned().collect();
    let mut dates = Vec::new();
    let mut report = LoadReport::default();
    for &date in &all_dates {
        let missing: Vec<&str> = assets
            .iter()
            .filter(|a| !obs[*a].contains_key(&date))
            .map(String::as_str)
            .collect();
        if missing.is_empty() {
            dates.push(date);
        } else {
            report.dropped.push(DroppedDate {
                date,
                reason: format!("missing for {}", missing.join(" ")),
            });
        }
    }
    if dates.len() < 2 {
        return Err(IngestError::InsufficientData(format!(
            "{} common dates across {} assets, need at least 2",
            dates.len(),
            assets.len()
        )));
    }
    if !report.dropped.is_empty() {
        log::warn!(
            "dropped {} dates not shared by all assets",
            report.dropped.len()
        );
    }

    let mut values = Vec::with_capacity(dates.len() * assets.len());
    for date in &dates {
        for a in &assets {
            values.push(T::lit(obs[a][date]));
        }
    }
    Ok((PricePanel::new(dates, assets, values)?, report))
}

/// `r[t][i] = ln p[t+1][i] - ln p[t][i]`.
pub fn log_returns<T: Scalar>(prices: &PricePanel<T>) -> ReturnPanel<T> {
    let n = prices.n_assets();
    let mut values = Vec::with_capacity((prices.n_dates() - 1) * n);
    for t in 0..prices.n_dates() - 1 {
        let (a, b) = (prices.row(t), prices.row(t + 1));
        values.extend(a.iter().zip(b).map(|(&p0, &p1)| p1.ln() - p0.ln()));
    }
    ReturnPanel {
        dates: prices.dates[1..].to_vec(),
        assets: prices.assets.clone(),
        values,
    }
}

impl<T: Scalar> ReturnPanel<T> {
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: Vec<T>,
    ) -> Result<Self, IngestError> {
        check_shape(dates.len(), assets.len(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(IngestError::Shape(format!(
                "non-finite return at row {} column {}",
                k / assets.len(),
                k % assets.len()
            )));
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn get(&self, t: usize, asset: usize) -> T {
        self.values[t * self.assets.len() + asset]
    }

    pub fn row(&self, t: usize) -> &[T] {
        let n = self.assets.len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Returns over the inclusive day range `[start, end]` for one asset.
    pub fn column_range(&self, asset: usize, start: usize, end: usize) -> Vec<T> {
        (start..=end).map(|t| self.get(t, asset)).collect()
    }

    /// Keeps the listed asset columns, in the given order.
    pub fn select_assets(&self, keep: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.n_days() * keep.len());
        for t in 0..self.n_days() {
            let row = self.row(t);
            values.extend(keep.iter().map(|&i| row[i]));
        }
        Self {
            dates: self.dates.clone(),
            assets: keep.iter().map(|&i| self.assets[i].clone()).collect(),
            values,
        }
    }

    /// Rebuilds a price path from `initial` so that `log_returns` maps it back here.
    pub fn to_prices(
        &self,
        initial: T,
        first_date: NaiveDate,
    ) -> Result<PricePanel<T>, IngestError> {
        let n = self.n_assets();
        let mut values = Vec::with_capacity((self.n_days() + 1) * n);
        let mut log_level = vec![initial.ln(); n];
        values.extend(std::iter::repeat_n(initial, n));
        for t in 0..self.n_days() {
            for (i, level) in log_level.iter_mut().enumerate() {
                *level = *level + self.get(t, i);
                values.push(level.exp());
            }
        }
        let mut dates = Vec::with_capacity(self.n_days() + 1);
        dates.push(first_date);
        dates.extend_from_slice(&self.dates);
        PricePanel::new(dates, self.assets.clone(), values)
    }
}

/// Window of `length` rows ending (inclusive) at `end_index`.
pub fn slice_window<T: Scalar>(
    returns: &ReturnPanel<T>,
    end_index: usize,
    length: usize,
) -> Result<ReturnWindow<'_, T>, IngestError> {
    let start = end_index as i64 - length as i64 + 1;
    if length == 0 || start < 0 || end_index >= returns.n_days() {
        return Err(IngestError::Bounds {
            start,
            end: end_index,
            available: returns.n_days(),
        });
    }
    if length < returns.n_assets() {
        return Err(IngestError::IllConditioned {
            window: length,
            assets: returns.n_assets(),
        });
    }
    Ok(ReturnWindow {
        panel: returns,
        end_index,
        length,
    })
}

impl<'a, T: Scalar> ReturnWindow<'a, T> {
    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn start_index(&self) -> usize {
        self.end_index + 1 - self.length
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn n_assets(&self) -> usize {
        self.panel.n_assets()
    }

    pub fn assets(&self) -> &'a [String] {
        self.panel.assets()
    }

    /// Row `k` of the window, `k = 0` being the oldest day.
    pub fn row(&self, k: usize) -> &'a [T] {
        self.panel.row(self.start_index() + k)
    }

    /// Chronological returns of one asset over the window.
    pub fn column(&self, asset: usize) -> Vec<T> {
        self.panel
            .column_range(asset, self.start_index(), self.end_index)
    }
}

/// Writes returns as long-format CSV `date,asset,log_return`.
pub fn write_returns_csv<T: Scalar>(
    returns: &ReturnPanel<T>,
    path: &Path,
) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(f, "date,asset,log_return").map_err(io_err)?;
    for t in 0..returns.n_days() {
        for (i, a) in returns.assets().iter().enumerate() {
            writeln!(f, "{},{},{}", returns.dates()[t], a, returns.get(t, i)).map_err(io_err)?;
        }
    }
    f.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<(PricePanel<f64>, LoadReport), IngestError> {
        read_prices(text.as_bytes())
    }

    fn full_csv() -> String {
        let mut s = String::from("date,asset,close\n");
        for d in 1..=5 {
            for (a, p) in [("C", 30.0), ("A", 10.0), ("B", 20.0)] {
                s.push_str(&format!("2020-01-0{d},{a},{}\n", p + d as f64));
            }
        }
        s
    }

    #[test]
    fn full_panel_loads_sorted() {
        let (p, rep) = load(&full_csv()).unwrap();
        assert_eq!(p.n_dates(), 5);
        assert_eq!(p.assets(), ["A", "B", "C"]);
        assert!(rep.dropped.is_empty());
        assert_eq!(p.get(0, 0), 11.0);
        assert_eq!(p.get(4, 2), 35.0);
    }

    #[test]
    fn missing_date_is_dropped() {
        let text: String = full_csv()
            .lines()
            .filter(|l| *l != "2020-01-03,B,23")
            .map(|l| format!("{l}\n"))
            .collect();
        let (p, rep) = load(&text).unwrap();
        assert_eq!(p.n_dates(), 4);
        assert_eq!(rep.dropped.len(), 1);
        assert_eq!(rep.dropped[0].date.to_string(), "2020-01-03");
        assert!(rep.dropped[0].reason.contains('B'));
    }

    #[test]
    fn zero_price_rejected() {
        let err = load("date,asset,close\n2020-01-01,A,0.0\n2020-01-02,A,1.0\n").unwrap_err();
        match err {
            IngestError::NonPositivePrice { asset, date, .. } => {
                assert_eq!(asset, "A");
                assert_eq!(date.to_string(), "2020-01-01");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = load("date,asset,close\n2020-01-01,A,1.0\n2020-01-02,A,abc\n").unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let err = load("date,asset,close\n2020-13-01,A,1.0\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 2, .. }));
    }

    #[test]
    fn single_common_date_is_insufficient() {
        let err = load("date,asset,close\n2020-01-01,A,1.0\n2020-01-02,B,1.0\n2020-01-02,A,1.0\n")
            .unwrap_err();
        assert!(matches!(err, IngestError::InsufficientData(_)));
    }

    #[test]
    fn duplicate_and_bad_header() {
        let err = load("date,asset,close\n2020-01-01,A,1\n2020-01-01,A,2\n").unwrap_err();
        assert!(matches!(err, IngestError::Duplicate { line: 3, .. }));
        let err = load("day,asset,close\n2020-01-01,A,1\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 1, .. }));
    }

    fn single_asset(prices: &[f64]) -> PricePanel<f64> {
        let dates = (0..prices.len())
            .map(|d| NaiveDate::from_ymd_opt(2020, 1, 1 + d as u32).unwrap())
            .collect();
        PricePanel::new(dates, vec!["A".into()], prices.to_vec()).unwrap()
    }

    #[test]
    fn log_return_examples() {
        let r = log_returns(&single_asset(&[5.0; 4]));
        assert!(r.values.iter().all(|&v| v == 0.0));

        let r = log_returns(&single_asset(&[1.0, 2.0, 4.0, 8.0]));
        for &v in &r.values {
            assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        }

        let r = log_returns(&single_asset(&[100.0, 110.0, 99.0]));
        assert_eq!(r.n_days(), 2);
        // ln(1.1), ln(0.9)
        assert!((r.get(0, 0) - 0.095_310_179_804_324_9).abs() < 1e-12);
        assert!((r.get(1, 0) + 0.105_360_515_657_826_3).abs() < 1e-12);
        assert_eq!(r.dates()[0].to_string(), "2020-01-02");
    }

    fn index_panel(days: usize) -> ReturnPanel<f64> {
        let dates = (0..days)
            .map(|d| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(d as u64))
            .collect();
        ReturnPanel::new(
            dates,
            vec!["A".into()],
            (0..days).map(|d| d as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn window_slicing() {
        let r = index_panel(300);
        let w = slice_window(&r, 125, 126).unwrap();
        assert_eq!(w.column(0), (0..126).map(|d| d as f64).collect::<Vec<_>>());
        let w = slice_window(&r, 126, 126).unwrap();
        assert_eq!(w.start_index(), 1);
        assert_eq!(w.column(0)[125], 126.0);
        assert!(matches!(
            slice_window(&r, 50, 126),
            Err(IngestError::Bounds { .. })
        ));
        assert!(slice_window(&r, 300, 10).is_err());
    }

    #[test]
    fn window_shorter_than_universe_is_ill_conditioned() {
        let dates: Vec<_> = (0..60)
            .map(|d| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(d))
            .collect();
        let assets: Vec<String> = (0..100).map(|i| format!("A{i:03}")).collect();
        let r = ReturnPanel::new(dates, assets, vec![0.0_f64; 6000]).unwrap();
        assert!(matches!(
            slice_window(&r, 55, 50),
            Err(IngestError::IllConditioned {
                window: 50,
                assets: 100
            })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn price_path_round_trips(steps in proptest::collection::vec(-0.1f64..0.1, 1..200), p0 in 1.0f64..1000.0) {
                let mut prices = vec![p0];
                for s in &steps {
                    let last = *prices.last().unwrap();
                    prices.push(last * s.exp());
                }
                let dates = (0..prices.len())
                    .map(|d| NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(d as u64))
                    .collect();
                let panel = PricePanel::new(dates, vec!["A".into()], prices.clone()).unwrap();
                let r = log_returns(&panel);
                let mut cum = 0.0;
                for t in 0..r.n_days() {
                    cum += r.get(t, 0);
                    let rebuilt = p0 * cum.exp();
                    prop_assert!(((rebuilt - prices[t + 1]) / prices[t + 1]).abs() < 1e-9);
                }
            }

            #[test]
            fn adjacent_windows_share_all_but_one_row(len in 1usize..50, e in 0usize..100) {
                let r = index_panel(200);
                let e = e + len - 1;
                let a = slice_window(&r, e, len).unwrap().column(0);
                let b = slice_window(&r, e + 1, len).unwrap().column(0);
                prop_assert_eq!(&a[1..], &b[..len - 1]);
            }
        }
    }
}
