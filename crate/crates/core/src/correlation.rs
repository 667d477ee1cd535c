//! Exponentially weighted Kendall correlation.
//!
//! For observations `(x_i, y_i)` with weights `w_i` the coefficient is
//!
//! ```text
//! tau_w = sum_{i<j} w_i w_j sgn(x_i - x_j) sgn(y_i - y_j) / sum_{i<j} w_i w_j
//! ```
//!
//! with `sgn(0) = 0`, so ties contribute nothing to the numerator (tau-a).
//! Weights are rescaled by their maximum before forming products. The
//! coefficient is scale invariant, and with uniform weights every product
//! is exactly one, which makes the uniform case agree bit for bit with the
//! integer concordance count.
//!
//! Pair terms are accumulated in `(i, j)` lexicographic order: the numerator
//! with a plain running sum, the normalizer with compensated summation.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::ingest::ReturnWindow;
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("insufficient data: need at least 2 observations, got {0}")]
    InsufficientData(usize),
    #[error("asset {0} has a constant return series in the window")]
    DegenerateAsset(String),
    #[error("invalid correlation matrix: {0}")]
    InvalidMatrix(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Normalised observation weights, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    weights: Vec<T>,
    theta: Option<T>,
}

impl<T: Scalar> WeightVector<T> {
    /// Equal weights `1/length`.
    pub fn uniform(length: usize) -> Result<Self, CorrelationError> {
        if length < 2 {
            return Err(CorrelationError::InsufficientData(length));
        }
        let w = T::one() / T::from_count(length);
        Ok(Self {
            weights: vec![w; length],
            theta: None,
        })
    }

    /// Arbitrary non-negative weights, normalised to sum one.
    pub fn from_raw(raw: Vec<T>) -> Result<Self, CorrelationError> {
        if raw.len() < 2 {
            return Err(CorrelationError::InsufficientData(raw.len()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(CorrelationError::Parameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total = raw.iter().copied().collect::<CompensatedSum<T>>().total();
        if total <= T::zero() {
            return Err(CorrelationError::Parameter("weights sum to zero".into()));
        }
        Ok(Self {
            weights: raw.into_iter().map(|w| w / total).collect(),
            theta: None,
        })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Decay constant, when built by [`exponential_weights`].
    pub fn theta(&self) -> Option<T> {
        self.theta
    }

    /// Weights divided by their maximum (largest weight exactly one).
    fn unit_max(&self) -> Vec<T> {
        let max = self
            .weights
            .iter()
            .copied()
            .fold(T::zero(), |a, b| if b > a { b } else { a });
        if max <= T::zero() {
            return self.weights.clone();
        }
        self.weights.iter().map(|&w| w / max).collect()
    }
}

/// `w[t] ∝ exp((t - length) / theta)` for `t = 1..=length`, most recent last.
pub fn exponential_weights<T: Scalar>(
    length: usize,
    theta: T,
) -> Result<WeightVector<T>, CorrelationError> {
    if length < 2 {
        return Err(CorrelationError::InsufficientData(length));
    }
    if !(theta.is_finite() && theta > T::zero()) {
        return Err(CorrelationError::Parameter(format!(
            "theta must be positive and finite, got {theta}"
        )));
    }
    let raw: Vec<T> = (1..=length)
        .map(|t| ((T::from_count(t) - T::from_count(length)) / theta).exp())
        .collect();
    let mut wv = WeightVector::from_raw(raw)?;
    wv.theta = Some(theta);
    Ok(wv)
}

#[inline]
fn sign<T: Scalar>(a: T, b: T) -> T {
    match a.partial_cmp(&b) {
        Some(Ordering::Greater) => T::one(),
        Some(Ordering::Less) => -T::one(),
        _ => T::zero(),
    }
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

/// Weighted Kendall tau-a of two series.
pub fn weighted_kendall<T: Scalar>(
    x: &[T],
    y: &[T],
    w: &WeightVector<T>,
) -> Result<T, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() != w.len() {
        return Err(CorrelationError::Dimension {
            expected: w.len(),
            got: x.len(),
        });
    }
    if x.len() < 2 {
        return Err(CorrelationError::InsufficientData(x.len()));
    }
    let v = w.unit_max();
    let n = x.len();
    let mut num = T::zero();
    let mut den = CompensatedSum::new();
    for i in 0..n {
        for j in i + 1..n {
            let pw = v[i] * v[j];
            num = num + pw * sign(x[i], x[j]) * sign(y[i], y[j]);
            den.add(pw);
        }
    }
    let den = den.total();
    if den <= T::zero() {
        return Err(CorrelationError::Parameter(
            "all pair weights are zero".into(),
        ));
    }
    Ok(clamp_unit(num / den))
}

/// Symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    assets: Vec<String>,
    values: Vec<T>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Wraps a row-major matrix after checking symmetry, diagonal and range.
    pub fn new(assets: Vec<String>, values: Vec<T>) -> Result<Self, CorrelationError> {
        let n = assets.len();
        if values.len() != n * n {
            return Err(CorrelationError::Dimension {
                expected: n * n,
                got: values.len(),
            });
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
        for i in 0..n {
            if (values[i * n + i] - T::one()).abs() > tol {
                return Err(CorrelationError::InvalidMatrix(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v.abs() > T::one() + tol {
                    return Err(CorrelationError::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - values[j * n + i]).abs() > tol {
                    return Err(CorrelationError::InvalidMatrix(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { assets, values })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n(&self) -> usize {
        self.assets.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.assets.len() + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Full matrix as CSV with asset ids on the first row and column, 12 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<(), CorrelationError> {
        let io = |e: std::io::Error| CorrelationError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        write!(f, "asset").map_err(io)?;
        for a in &self.assets {
            write!(f, ",{a}").map_err(io)?;
        }
        writeln!(f).map_err(io)?;
        for (i, a) in self.assets.iter().enumerate() {
            write!(f, "{a}").map_err(io)?;
            for j in 0..self.n() {
                write!(f, ",{:.11e}", self.get(i, j)).map_err(io)?;
            }
            writeln!(f).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Weighted Kendall matrix over the columns of a return window.
///
/// Per-pair arithmetic is identical to [`weighted_kendall`]; the pair signs
/// and weight products are only precomputed once per window.
pub fn correlation_matrix<T: Scalar>(
    win: &ReturnWindow<'_, T>,
    w: &WeightVector<T>,
) -> Result<CorrelationMatrix<T>, CorrelationError> {
    let len = win.len();
    if w.len() != len {
        return Err(CorrelationError::Dimension {
            expected: len,
            got: w.len(),
        });
    }
    if len < 2 {
        return Err(CorrelationError::InsufficientData(len));
    }
    let n = win.n_assets();
    let v = w.unit_max();
    let n_pairs = len * (len - 1) / 2;

    let mut pair_w = Vec::with_capacity(n_pairs);
    let mut den = CompensatedSum::new();
    for i in 0..len {
        for j in i + 1..len {
            let pw = v[i] * v[j];
            pair_w.push(pw);
            den.add(pw);
        }
    }
    let den = den.total();
    if den <= T::zero() {
        return Err(CorrelationError::Parameter(
            "all pair weights are zero".into(),
        ));
    }

    let mut signs: Vec<Vec<T>> = Vec::with_capacity(n);
    for a in 0..n {
        let col = win.column(a);
        if col.iter().all(|&c| c == col[0]) {
            return Err(CorrelationError::DegenerateAsset(win.assets()[a].clone()));
        }
        let mut s = Vec::with_capacity(n_pairs);
        for i in 0..len {
            for j in i + 1..len {
                s.push(sign(col[i], col[j]));
            }
        }
        signs.push(s);
    }

    let mut values = vec![T::zero(); n * n];
    for a in 0..n {
        values[a * n + a] = T::one();
        for b in a + 1..n {
            let (sa, sb) = (&signs[a], &signs[b]);
            let mut num = T::zero();
            for p in 0..n_pairs {
                num = num + pair_w[p] * sa[p] * sb[p];
            }
            let tau = clamp_unit(num / den);
            values[a * n + b] = tau;
            values[b * n + a] = tau;
        }
    }
    CorrelationMatrix::new(win.assets().to_vec(), values)
}
