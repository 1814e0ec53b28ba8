//! Parametric survival curves fitted to a handful of `(t, S(t))` points by
//! least squares on a linearising transform.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::scalar::Scalar;

/// Survival values at or below zero are clamped here before logs.
pub const SURVIVAL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exponential,
    Weibull,
    Loglogistic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParametricFit<T> {
    /// `S(t) = exp(-rate t)`; `rate == 0` encodes a flat curve at 1.
    Exponential { rate: T },
    /// `S(t) = exp(-(t / scale)^shape)`.
    Weibull { shape: T, scale: T },
    /// `S(t) = 1 / (1 + (t / scale)^shape)`.
    Loglogistic { shape: T, scale: T },
}

impl<T: Scalar> ParametricFit<T> {
    pub fn family(&self) -> Family {
        match self {
            ParametricFit::Exponential { .. } => Family::Exponential,
            ParametricFit::Weibull { .. } => Family::Weibull,
            ParametricFit::Loglogistic { .. } => Family::Loglogistic,
        }
    }

    pub fn survival(&self, t: T) -> T {
        match *self {
            ParametricFit::Exponential { rate } => (-rate * t).exp(),
            ParametricFit::Weibull { shape, scale } => (-(t / scale).powf(shape)).exp(),
            ParametricFit::Loglogistic { shape, scale } => {
                T::one() / (T::one() + (t / scale).powf(shape))
            }
        }
    }
}

fn clamp_survival<T: Scalar>(s: T) -> Result<T> {
    if !(s <= T::one()) || s.is_nan() {
        return Err(SurvError::invalid(format!(
            "survival value {s} outside (0, 1]"
        )));
    }
    if s <= T::zero() {
        log::warn!("survival value {s} clamped to {SURVIVAL_FLOOR} before log transform");
        return Ok(T::lit(SURVIVAL_FLOOR));
    }
    Ok(s)
}

/// Ordinary least squares `y = slope x + intercept`.
fn ols<T: Scalar>(xs: &[T], ys: &[T]) -> Result<(T, T)> {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > T::zero()) {
        return Err(SurvError::invalid(
            "degenerate regression: all time points are equal",
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fits `family` to `(t, S)` points.
///
/// * exponential: `rate = sum t (-ln S) / sum t²` (least squares through the origin);
/// * Weibull: regression of `ln(-ln S)` on `ln t`;
/// * log-logistic: regression of `logit(1 - S)` on `ln t`.
pub fn fit_parametric<T: Scalar>(points: &[(T, T)], family: Family) -> Result<ParametricFit<T>> {
    if points.is_empty() {
        return Err(SurvError::invalid(
            "parametric fit needs at least one point",
        ));
    }
    if let Some((t, _)) = points
        .iter()
        .find(|(t, _)| !(*t > T::zero()) || !t.is_finite())
    {
        return Err(SurvError::invalid(format!("fit time {t} must be positive")));
    }
    let pts = points
        .iter()
        .map(|&(t, s)| Ok((t, clamp_survival(s)?)))
        .collect::<Result<Vec<_>>>()?;
    match family {
        Family::Exponential => {
            let num: T = pts.iter().map(|&(t, s)| t * -s.ln()).sum();
            let den: T = pts.iter().map(|&(t, _)| t * t).sum();
            Ok(ParametricFit::Exponential {
                rate: (num / den).max(T::zero()),
            })
        }
        Family::Weibull | Family::Loglogistic => {
            if pts.len() < 2 {
                return Err(SurvError::invalid(format!(
                    "{family:?} fit needs at least two points"
                )));
            }
            if pts.iter().any(|&(_, s)| s >= T::one()) {
                return Err(SurvError::invalid(format!(
                    "{family:?} fit needs S < 1 at every point"
                )));
            }
            let xs: Vec<T> = pts.iter().map(|&(t, _)| t.ln()).collect();
            let ys: Vec<T> = pts
                .iter()
                .map(|&(_, s)| match family {
                    Family::Weibull => (-s.ln()).ln(),
                    _ => ((T::one() - s) / s).ln(),
                })
                .collect();
            let (slope, intercept) = ols(&xs, &ys)?;
            if !(slope > T::zero()) {
                return Err(SurvError::invalid(format!(
                    "{family:?} fit produced non-positive shape {slope}"
                )));
            }
            let scale = (-intercept / slope).exp();
            Ok(match family {
                Family::Weibull => ParametricFit::Weibull {
                    shape: slope,
                    scale,
                },
                _ => ParametricFit::Loglogistic {
                    shape: slope,
                    scale,
                },
            })
        }
    }
}

/// `S(3)` under `fit` as a percent rounded to the nearest multiple of 5
/// (ties away from zero).
pub fn three_year_percent<T: Scalar>(fit: &ParametricFit<T>) -> u8 {
    percent_nearest_5(fit.survival(T::lit(3.0)).as_f64())
}

pub fn percent_nearest_5(survival: f64) -> u8 {
    let pct = (survival * 100.0).clamp(0.0, 100.0);
    ((pct / 5.0).round() * 5.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn exponential_exact_points() {
        let p = [(1.0, 0.9), (3.0, 0.729), (5.0, 0.59049)];
        match fit_parametric(&p, Family::Exponential).unwrap() {
            ParametricFit::Exponential { rate } => assert!(rel(rate, -(0.9f64).ln()) < 1e-9),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_point_exponential() {
        match fit_parametric(&[(3.0, 0.5)], Family::Exponential).unwrap() {
            ParametricFit::Exponential { rate } => assert!((rate - 2f64.ln() / 3.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn weibull_recovery() {
        let (k, lam) = (2.0f64, 4.0f64);
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0]
            .iter()
            .map(|&t| (t, (-(t / lam).powf(k)).exp()))
            .collect();
        match fit_parametric(&pts, Family::Weibull).unwrap() {
            ParametricFit::Weibull { shape, scale } => {
                assert!(rel(shape, k) < 1e-9);
                assert!(rel(scale, lam) < 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn loglogistic_recovery() {
        let (b, a) = (1.5f64, 2.5f64);
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0]
            .iter()
            .map(|&t| (t, 1.0 / (1.0 + (t / a).powf(b))))
            .collect();
        match fit_parametric(&pts, Family::Loglogistic).unwrap() {
            ParametricFit::Loglogistic { shape, scale } => {
                assert!(rel(shape, b) < 1e-9);
                assert!(rel(scale, a) < 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_parametric(&[(3.0, 0.5)], Family::Weibull).is_err());
        assert!(fit_parametric(&[(3.0, 0.5), (3.0, 0.4)], Family::Loglogistic).is_err());
        assert!(fit_parametric::<f64>(&[], Family::Exponential).is_err());
        assert!(fit_parametric(&[(3.0, 1.5)], Family::Exponential).is_err());
        // zero survival is clamped rather than rejected
        match fit_parametric(&[(1.0, 0.0)], Family::Exponential).unwrap() {
            ParametricFit::Exponential { rate } => {
                assert!((rate + SURVIVAL_FLOOR.ln()).abs() < 1e-12)
            }
            _ => unreachable!(),
        }
        match fit_parametric(&[(1.0, 1.0), (3.0, 1.0)], Family::Exponential).unwrap() {
            ParametricFit::Exponential { rate } => assert_eq!(rate, 0.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rounding_to_nearest_five() {
        let half = ParametricFit::Exponential {
            rate: 2f64.ln() / 3.0,
        };
        assert_eq!(three_year_percent(&half), 50);
        assert_eq!(percent_nearest_5(0.729), 75);
        assert_eq!(percent_nearest_5(0.975), 100);
        assert_eq!(percent_nearest_5(0.0), 0);
        assert_eq!(percent_nearest_5(0.024), 0);
        assert_eq!(percent_nearest_5(0.025), 5);
        assert_eq!(percent_nearest_5(1.0), 100);
    }

    #[test]
    fn single_precision_fit() {
        match fit_parametric(&[(3.0f32, 0.5f32)], Family::Exponential).unwrap() {
            ParametricFit::Exponential { rate } => assert!((rate - 2f32.ln() / 3.0).abs() < 1e-6),
            _ => unreachable!(),
        }
    }
}
