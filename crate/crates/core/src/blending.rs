//! Verbalized-probability curves and their convex blend with the
//! hidden-state curve.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::metrics::c_td;
use crate::outcome::Outcome;
use crate::scalar::Scalar;
use crate::survival::SurvivalCurve;

/// Percent used in place of 0 before taking the log.
pub const PERCENT_FLOOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendConfig {
    /// Fixed weight; `None` selects it on validation data.
    pub lambda: Option<f64>,
    pub grid: Vec<f64>,
    /// Mean-impute missing verbalized curves for the verbalized-only channel.
    pub mean_impute: bool,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            lambda: None,
            grid: default_lambda_grid(),
            mean_impute: true,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.grid)?;
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(SurvError::invalid(format!("lambda {l} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `{0.00, 0.05, ..., 1.00}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if let Some(l) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(SurvError::invalid(format!(
            "lambda grid value {l} outside [0, 1]"
        )));
    }
    if !grid.contains(&0.0) || !grid.contains(&1.0) {
        return Err(SurvError::invalid("lambda grid must contain 0 and 1"));
    }
    Ok(())
}

/// `S^v(t) = exp(-rho t)` with `rho = -ln(percent / 100) / 3`, evaluated on
/// `times`. A percent of 0 is floored to [`PERCENT_FLOOR`]; callers
/// building many curves should report [`count_floored`] once.
pub fn verbalized_curve<T: Scalar>(percent: f64, times: &[T]) -> Result<SurvivalCurve<T>> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(SurvError::invalid(format!(
            "verbalized percent {percent} outside [0, 100]"
        )));
    }
    let p = if percent == 0.0 {
        log::debug!("verbalized percent 0 floored to {PERCENT_FLOOR}% before the log");
        PERCENT_FLOOR
    } else {
        percent
    };
    let rho = -(p / 100.0).ln() / 3.0;
    let values = times
        .iter()
        .map(|&t| T::lit((-rho * t.as_f64()).exp()))
        .collect();
    SurvivalCurve::new(times.to_vec(), values)
}

/// Warns once about percents that [`verbalized_curve`] will floor.
pub fn count_floored<'a>(percents: impl IntoIterator<Item = &'a f64>) -> usize {
    let n = percents.into_iter().filter(|&&p| p == 0.0).count();
    if n > 0 {
        log::warn!("{n} verbalized percents of 0 floored to {PERCENT_FLOOR}% before the log");
    }
    n
}

/// Pointwise `(1 - lambda) S + lambda S^v`.
pub fn combine<T: Scalar>(
    s: &SurvivalCurve<T>,
    sv: &SurvivalCurve<T>,
    lambda: T,
) -> Result<SurvivalCurve<T>> {
    if s.times() != sv.times() {
        return Err(SurvError::invalid(
            "combine: curves are on different time grids",
        ));
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(SurvError::invalid(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    let values = s
        .values()
        .iter()
        .zip(sv.values())
        .map(|(&a, &b)| {
            ((T::one() - lambda) * a + lambda * b)
                .min(a.max(b))
                .max(a.min(b))
        })
        .collect();
    SurvivalCurve::new(s.times().to_vec(), values)
}

/// Pointwise mean of curves sharing a grid; `None` when empty.
pub fn mean_curve<T: Scalar>(curves: &[&SurvivalCurve<T>]) -> Result<Option<SurvivalCurve<T>>> {
    let Some(first) = curves.first() else {
        return Ok(None);
    };
    let mut acc = vec![T::zero(); first.values().len()];
    for c in curves {
        if c.times() != first.times() {
            return Err(SurvError::invalid(
                "mean curve: curves are on different time grids",
            ));
        }
        for (a, &v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let n = T::from_usize_lossy(curves.len());
    let mut values: Vec<T> = acc.into_iter().map(|a| a / n).collect();
    values[0] = T::one();
    for k in 1..values.len() {
        values[k] = values[k].min(values[k - 1]);
    }
    SurvivalCurve::new(first.times().to_vec(), values).map(Some)
}

/// The three prediction channels for one evaluation set.
#[derive(Clone, Debug)]
pub struct Channels<T> {
    pub hidden: Vec<SurvivalCurve<T>>,
    /// Missing entries mean-imputed; `None` when no sample has a verbalized
    /// probability.
    pub verbalized: Option<Vec<SurvivalCurve<T>>>,
    pub combined: Vec<SurvivalCurve<T>>,
    pub missing: usize,
}

/// Builds the combined and verbalized-only channels. A sample without a
/// verbalized curve keeps its hidden-state curve in the combined channel
/// and receives the mean of the present verbalized curves in the
/// verbalized-only channel.
pub fn blend_channels<T: Scalar>(
    hidden: Vec<SurvivalCurve<T>>,
    verbalized: &[Option<SurvivalCurve<T>>],
    lambda: T,
) -> Result<Channels<T>> {
    if hidden.len() != verbalized.len() {
        return Err(SurvError::dim(
            "verbalized curves",
            hidden.len(),
            verbalized.len(),
        ));
    }
    let combined = hidden
        .iter()
        .zip(verbalized)
        .map(|(s, v)| match v {
            Some(v) => combine(s, v, lambda),
            None => Ok(s.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let present: Vec<&SurvivalCurve<T>> = verbalized.iter().flatten().collect();
    let missing = verbalized.len() - present.len();
    let verbalized_eval = match mean_curve(&present)? {
        Some(mean) => Some(
            verbalized
                .iter()
                .map(|v| v.clone().unwrap_or_else(|| mean.clone()))
                .collect(),
        ),
        None => {
            log::warn!("no extractable verbalized probabilities; verbalized channel skipped");
            None
        }
    };
    Ok(Channels {
        hidden,
        verbalized: verbalized_eval,
        combined,
        missing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub c_td: f64,
    pub scores: Vec<(f64, f64)>,
}

/// Picks the grid value maximising validation `C^td` of the combined
/// curves; ties go to the smallest lambda.
pub fn select_lambda<T: Scalar>(
    hidden: &[SurvivalCurve<T>],
    verbalized: &[Option<SurvivalCurve<T>>],
    outcomes: &[Outcome<T>],
    grid: &[f64],
) -> Result<LambdaSelection> {
    validate_grid(grid)?;
    if hidden.len() != verbalized.len() {
        return Err(SurvError::dim(
            "verbalized curves",
            hidden.len(),
            verbalized.len(),
        ));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut scores = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for &l in &sorted {
        let combined = hidden
            .iter()
            .zip(verbalized)
            .map(|(s, v)| match v {
                Some(v) => combine(s, v, T::lit(l)),
                None => Ok(s.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        let c = c_td(&combined, outcomes)?;
        scores.push((l, c));
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    let (lambda, c) = best.expect("grid contains 0 and 1");
    Ok(LambdaSelection {
        lambda,
        c_td: c,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<f64> {
        (0..=60).map(|k| k as f64 * 0.1).collect()
    }

    #[test]
    fn verbalized_anchor_points() {
        let g = grid();
        let half = verbalized_curve(50.0, &g).unwrap();
        assert!((half.eval(3.0) - 0.5).abs() < 1e-12);
        let one = verbalized_curve(100.0, &g).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        let ninety = verbalized_curve(90.0, &g).unwrap();
        assert!((ninety.eval(6.0) - 0.81).abs() < 1e-12);
        let zero = verbalized_curve(0.0, &g).unwrap();
        assert!((zero.eval(3.0) - 0.005).abs() < 1e-12);
        assert!(verbalized_curve(101.0, &g).is_err());
    }

    #[test]
    fn combine_arithmetic() {
        let t = vec![0.0, 1.0];
        let s = SurvivalCurve::new(t.clone(), vec![1.0, 0.8]).unwrap();
        let v = SurvivalCurve::new(t.clone(), vec![1.0, 0.6]).unwrap();
        assert_eq!(combine(&s, &v, 0.0).unwrap(), s);
        assert_eq!(combine(&s, &v, 1.0).unwrap(), v);
        assert!((combine(&s, &v, 0.5).unwrap().eval(1.0) - 0.7f64).abs() < 1e-15);
        let other = SurvivalCurve::new(vec![0.0, 2.0], vec![1.0, 0.6]).unwrap();
        assert!(combine(&s, &other, 0.5).is_err());
    }

    #[test]
    fn combine_monotone_in_lambda() {
        let g = grid();
        let s = verbalized_curve(80.0, &g).unwrap();
        let v = verbalized_curve(30.0, &g).unwrap();
        let mut prev = s.clone();
        for k in 1..=10 {
            let c = combine(&s, &v, k as f64 / 10.0).unwrap();
            for (a, b) in c.values().iter().zip(prev.values()) {
                assert!(a <= b);
            }
            prev = c;
        }
    }

    #[test]
    fn missing_verbalized_fallbacks() {
        let g = grid();
        let hidden = vec![verbalized_curve(70.0, &g).unwrap(); 3];
        let v = vec![
            Some(verbalized_curve(40.0, &g).unwrap()),
            None,
            Some(verbalized_curve(60.0, &g).unwrap()),
        ];
        let ch = blend_channels(hidden.clone(), &v, 0.5).unwrap();
        assert_eq!(ch.combined[1], hidden[1]);
        assert_eq!(ch.missing, 1);
        let imputed = &ch.verbalized.as_ref().unwrap()[1];
        let expect = 0.5 * (0.4f64 + 0.6);
        assert!((imputed.eval(3.0) - expect).abs() < 1e-12);
        assert_eq!(ch.verbalized.as_ref().unwrap()[0], v[0].clone().unwrap());
        let none = blend_channels(hidden, &[None, None, None], 0.5).unwrap();
        assert!(none.verbalized.is_none());
    }

    #[test]
    fn identical_channels_pick_zero() {
        let g = grid();
        let outcomes: Vec<_> = (1..=5).map(|k| Outcome::event(k as f64)).collect();
        let hidden: Vec<_> = (1..=5)
            .map(|k| verbalized_curve(10.0 + 15.0 * k as f64, &g).unwrap())
            .collect();
        let v: Vec<_> = hidden.iter().cloned().map(Some).collect();
        let sel = select_lambda(&hidden, &v, &outcomes, &default_lambda_grid()).unwrap();
        assert_eq!(sel.lambda, 0.0);
        assert_eq!(sel.scores.len(), 21);
    }

    #[test]
    fn anti_concordant_verbalized_picks_zero() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let outcomes: Vec<_> = (1..=10).map(|k| Outcome::event(0.5 * k as f64)).collect();
        // hidden: longer survivors get higher curves; verbalized: reversed
        // and on a much steeper scale plus noise
        let hidden: Vec<_> = (1..=10)
            .map(|k| verbalized_curve(40.0 + 5.0 * k as f64, &g).unwrap())
            .collect();
        let v: Vec<_> = (1..=10)
            .map(|k| {
                Some(
                    verbalized_curve(
                        (95.0 - 9.0 * k as f64 + rng.random_range(-2.0..2.0)).clamp(1.0, 99.0),
                        &g,
                    )
                    .unwrap(),
                )
            })
            .collect();
        let sel = select_lambda(&hidden, &v, &outcomes, &default_lambda_grid()).unwrap();
        assert_eq!(sel.lambda, 0.0);
        assert_eq!(sel.c_td, 1.0);
        let c1 = sel.scores.iter().find(|(l, _)| *l == 1.0).unwrap().1;
        assert!(sel.c_td >= c1);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.0, 0.5]).is_err());
        assert!(validate_grid(&[0.0, 1.5, 1.0]).is_err());
        assert!(BlendConfig::default().validate().is_ok());
    }
}
