//! Log-log power-law fits and the two-regime breakpoint search.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtergraph::MotifKind;
use crate::persistence::PersistenceCurve;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum RegimeError {
    #[error("non-positive value {value} at tau {tau} cannot be log-transformed")]
    Domain { tau: usize, value: f64 },
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Treatment of values that cannot be log-transformed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NonPositive {
    /// Skip the point and log a warning.
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit<T> {
    /// Log-log slope.
    pub exponent: T,
    pub log_intercept: T,
    /// Mean squared residual in log-log space.
    pub mse: T,
    /// Inclusive shift range the fit was restricted to.
    pub range: (usize, usize),
    pub n_points: usize,
}

impl<T: Scalar> PowerLawFit<T> {
    pub fn predict(&self, tau: usize) -> T {
        (self.log_intercept + self.exponent * T::from_count(tau).ln()).exp()
    }
}

/// Points with `tau ≥ 1` inside `range`, log-transformed.
fn usable<T: Scalar>(
    points: &[(usize, T)],
    range: (usize, usize),
    policy: NonPositive,
) -> Result<Vec<(T, T)>, RegimeError> {
    let mut out = Vec::with_capacity(points.len());
    for &(tau, v) in points {
        if tau == 0 || tau < range.0 || tau > range.1 {
            continue;
        }
        if !(v > T::zero()) || !v.is_finite() {
            match policy {
                NonPositive::Drop => {
                    log::warn!("dropping point tau={tau} with value {v} from log-log fit");
                    continue;
                }
                NonPositive::Error => {
                    return Err(RegimeError::Domain {
                        tau,
                        value: v.to_f64_lossy(),
                    })
                }
            }
        }
        out.push((T::from_count(tau).ln(), v.ln()));
    }
    Ok(out)
}

/// Ordinary least squares on already log-transformed points.
fn ols<T: Scalar>(xy: &[(T, T)], range: (usize, usize)) -> Result<PowerLawFit<T>, RegimeError> {
    let n = xy.len();
    if n < 2 {
        return Err(RegimeError::InsufficientData { needed: 2, got: n });
    }
    let nf = T::from_count(n);
    let mx = xy.iter().map(|p| p.0).sum::<T>() / nf;
    let my = xy.iter().map(|p| p.1).sum::<T>() / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y) in xy {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    if !(sxx > T::zero()) {
        return Err(RegimeError::InsufficientData { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = xy
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<T>();
    Ok(PowerLawFit {
        exponent: slope,
        log_intercept: intercept,
        mse: sse / nf,
        range,
        n_points: n,
    })
}

/// OLS fit of `ln value` on `ln tau` over `tau ∈ [range.0, range.1]`, `tau ≥ 1`.
pub fn fit_power_law<T: Scalar>(
    points: &[(usize, T)],
    range: (usize, usize),
    policy: NonPositive,
) -> Result<PowerLawFit<T>, RegimeError> {
    ols(&usable(points, range, policy)?, range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoRegimeFit<T> {
    pub decay: PowerLawFit<T>,
    pub plateau: PowerLawFit<T>,
    pub tau_plat: usize,
    pub combined_mse: T,
}

impl<T: Scalar> TwoRegimeFit<T> {
    /// Whether the plateau decays no faster than the first regime.
    pub fn regimes_ordered(&self) -> bool {
        self.plateau.exponent.abs() <= self.decay.exponent.abs()
    }
}

fn same_within_tolerance<T: Scalar>(a: T, b: T) -> bool {
    let eps = T::epsilon();
    (a - b).abs() <= eps + T::lit(8.0) * eps * a.abs().max(b.abs())
}

/// Two-segment fit sharing the breakpoint point, evaluated at one candidate.
fn fit_at<T: Scalar>(
    xy: &[(T, T)],
    taus: &[usize],
    b: usize,
) -> Result<TwoRegimeFit<T>, RegimeError> {
    let last = taus.len() - 1;
    let decay = ols(&xy[..=b], (taus[0], taus[b]))?;
    let plateau = ols(&xy[b..], (taus[b], taus[last]))?;
    Ok(TwoRegimeFit {
        decay,
        plateau,
        tau_plat: taus[b],
        combined_mse: (decay.mse + plateau.mse) / T::lit(2.0),
    })
}

/// Exhaustive breakpoint search minimizing the mean of the two segment MSEs.
///
/// Both segments keep at least `min_segment` points; near-equal minima
/// resolve to the earliest breakpoint.
pub fn fit_two_regimes<T: Scalar>(
    curve: &PersistenceCurve<T>,
    min_segment: usize,
) -> Result<TwoRegimeFit<T>, RegimeError> {
    let points: Vec<(usize, T)> = curve
        .taus
        .iter()
        .copied()
        .zip(curve.values.iter().copied())
        .collect();
    fit_two_regimes_points(&points, min_segment)
}

/// [`fit_two_regimes`] on raw `(tau, value)` points.
pub fn fit_two_regimes_points<T: Scalar>(
    points: &[(usize, T)],
    min_segment: usize,
) -> Result<TwoRegimeFit<T>, RegimeError> {
    if min_segment < 2 {
        return Err(RegimeError::Parameter(format!(
            "segments need at least 2 points, got {min_segment}"
        )));
    }
    let mut kept: Vec<(usize, T)> = points
        .iter()
        .copied()
        .filter(|&(tau, v)| {
            if tau == 0 {
                return false;
            }
            let ok = v > T::zero() && v.is_finite();
            if !ok {
                log::warn!("dropping point tau={tau} with value {v} from log-log fit");
            }
            ok
        })
        .collect();
    kept.sort_by_key(|p| p.0);
    let n = kept.len();
    if n < 2 * min_segment {
        return Err(RegimeError::InsufficientData {
            needed: 2 * min_segment,
            got: n,
        });
    }
    let taus: Vec<usize> = kept.iter().map(|p| p.0).collect();
    let xy: Vec<(T, T)> = kept
        .iter()
        .map(|&(tau, v)| (T::from_count(tau).ln(), v.ln()))
        .collect();

    let candidates: Vec<TwoRegimeFit<T>> = (min_segment - 1..=n - min_segment)
        .into_par_iter()
        .map(|b| fit_at(&xy, &taus, b))
        .collect::<Result<_, _>>()?;
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.combined_mse < best.combined_mse
            && !same_within_tolerance(c.combined_mse, best.combined_mse)
        {
            best = *c;
        }
    }
    if !best.regimes_ordered() {
        log::warn!(
            "plateau exponent {} is steeper than decay exponent {}",
            best.plateau.exponent,
            best.decay.exponent
        );
    }
    Ok(best)
}

/// Combined MSE of the two-segment fit with its breakpoint at shift `tau_plat`.
pub fn combined_mse_at<T: Scalar>(
    points: &[(usize, T)],
    tau_plat: usize,
) -> Result<T, RegimeError> {
    let first = fit_power_law(points, (1, tau_plat), NonPositive::Drop)?;
    let second = fit_power_law(points, (tau_plat, usize::MAX), NonPositive::Drop)?;
    Ok((first.mse + second.mse) / T::lit(2.0))
}

/// Exponent of a triangle under the independence null: three edges must
/// persist together, so the edge-level exponent is a third of it.
pub fn adjusted_triangle_exponent<T: Scalar>(triangle_exponent: T) -> T {
    triangle_exponent / T::lit(3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: MotifKind,
    pub exponent_decay: f64,
    pub exponent_plateau: f64,
    pub tau_plat: usize,
    pub mse_decay: f64,
    pub mse_plateau: f64,
    pub combined_mse: f64,
}

impl FitReport {
    pub fn new<T: Scalar>(kind: MotifKind, fit: &TwoRegimeFit<T>) -> Self {
        Self {
            kind,
            exponent_decay: fit.decay.exponent.to_f64_lossy(),
            exponent_plateau: fit.plateau.exponent.to_f64_lossy(),
            tau_plat: fit.tau_plat,
            mse_decay: fit.decay.mse.to_f64_lossy(),
            mse_plateau: fit.plateau.mse.to_f64_lossy(),
            combined_mse: fit.combined_mse.to_f64_lossy(),
        }
    }
}

/// Writes fit reports as a JSON list.
pub fn write_fit_reports(reports: &[FitReport], path: &Path) -> Result<(), RegimeError> {
    let err = |m: String| RegimeError::Io {
        path: path.display().to_string(),
        message: m,
    };
    let mut f = BufWriter::new(File::create(path).map_err(|e| err(e.to_string()))?);
    serde_json::to_writer_pretty(&mut f, reports).map_err(|e| err(e.to_string()))?;
    writeln!(f).map_err(|e| err(e.to_string()))?;
    f.flush().map_err(|e| err(e.to_string()))
}
