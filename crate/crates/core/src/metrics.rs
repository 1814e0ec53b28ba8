//! Time-dependent concordance and IPCW integrated Brier score.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::outcome::Outcome;
use crate::scalar::Scalar;
use crate::survival::SurvivalCurve;

pub const DEFAULT_IBS_SUBINTERVALS: usize = 512;

/// Kaplan–Meier estimate of the censoring survival function `G`, treating
/// censorings as the events of interest.
#[derive(Clone, Debug, PartialEq)]
pub struct CensoringKM<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> CensoringKM<T> {
    pub fn fit(outcomes: &[Outcome<T>]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(SurvError::invalid(
                "censoring Kaplan-Meier needs at least one subject",
            ));
        }
        let mut sorted: Vec<(T, bool)> = outcomes.iter().map(|o| (o.time, o.event)).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n = sorted.len();
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut g = T::one();
        let mut i = 0;
        while i < n {
            let t = sorted[i].0;
            let mut j = i;
            let mut censored = 0usize;
            while j < n && sorted[j].0 == t {
                censored += usize::from(!sorted[j].1);
                j += 1;
            }
            if censored > 0 {
                let at_risk = n - i;
                g *= T::one() - T::from_usize_lossy(censored) / T::from_usize_lossy(at_risk);
                times.push(t);
                values.push(g);
            }
            i = j;
        }
        Ok(CensoringKM { times, values })
    }

    /// `G(t)`, right-continuous.
    pub fn value(&self, t: T) -> T {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            T::one()
        } else {
            self.values[k - 1]
        }
    }

    /// `G(t-)`.
    pub fn left_limit(&self, t: T) -> T {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            T::one()
        } else {
            self.values[k - 1]
        }
    }

    pub fn jump_times(&self) -> &[T] {
        &self.times
    }

    pub fn jump_values(&self) -> &[T] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub concordant: u64,
    pub tied: u64,
    pub comparable: u64,
}

impl PairCounts {
    pub fn c_index(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(SurvError::NoComparablePairs);
        }
        Ok((2 * self.concordant + self.tied) as f64 / (2 * self.comparable) as f64)
    }
}

fn check_lengths<T>(curves: &[SurvivalCurve<T>], outcomes: &[Outcome<T>]) -> Result<()> {
    if curves.len() != outcomes.len() {
        return Err(SurvError::dim(
            "curves vs outcomes",
            outcomes.len(),
            curves.len(),
        ));
    }
    Ok(())
}

/// Pair counts behind the time-dependent concordance: pairs with
/// `t_i < t_j` and an event at `t_i`, compared at `t_i`.
pub fn concordance_counts<T: Scalar>(
    curves: &[SurvivalCurve<T>],
    outcomes: &[Outcome<T>],
) -> Result<PairCounts> {
    check_lengths(curves, outcomes)?;
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| outcomes[a].time.partial_cmp(&outcomes[b].time).unwrap());
    let mut counts = PairCounts::default();
    for (pos, &i) in order.iter().enumerate() {
        let oi = outcomes[i];
        if !oi.event {
            continue;
        }
        let si = curves[i].eval(oi.time);
        // first index strictly later in time
        let start = pos + order[pos..].partition_point(|&j| outcomes[j].time <= oi.time);
        for &j in &order[start..] {
            let sj = curves[j].eval(oi.time);
            counts.comparable += 1;
            if si < sj {
                counts.concordant += 1;
            } else if si == sj {
                counts.tied += 1;
            }
        }
    }
    Ok(counts)
}

/// Time-dependent concordance `P(S_i(t_i) < S_j(t_i) | t_i < t_j, e_i = 1)`.
pub fn c_td<T: Scalar>(curves: &[SurvivalCurve<T>], outcomes: &[Outcome<T>]) -> Result<f64> {
    concordance_counts(curves, outcomes)?.c_index()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbsResult {
    pub ibs: f64,
    pub t_max: f64,
    pub subintervals: usize,
    /// Brier terms skipped because their IPCW denominator was zero.
    pub dropped_terms: u64,
}

/// IPCW integrated Brier score over `[0, t_max]`, `t_max` the largest
/// observed time, by the composite midpoint rule on `subintervals` equal
/// cells, further cut at every curve knot and outcome time so the step
/// integrand is constant on each piece. `G` is estimated from
/// `outcomes`. Event terms are weighted by `1 / G(t_i-)`, at-risk terms by
/// `1 / G(t)`.
pub fn ibs<T: Scalar>(
    curves: &[SurvivalCurve<T>],
    outcomes: &[Outcome<T>],
    subintervals: usize,
) -> Result<IbsResult> {
    check_lengths(curves, outcomes)?;
    let km = CensoringKM::fit(outcomes)?;
    ibs_with_censoring(curves, outcomes, &km, subintervals)
}

pub fn ibs_with_censoring<T: Scalar>(
    curves: &[SurvivalCurve<T>],
    outcomes: &[Outcome<T>],
    km: &CensoringKM<T>,
    subintervals: usize,
) -> Result<IbsResult> {
    check_lengths(curves, outcomes)?;
    if outcomes.is_empty() {
        return Err(SurvError::invalid(
            "integrated Brier score needs at least one subject",
        ));
    }
    if subintervals == 0 {
        return Err(SurvError::invalid(
            "integrated Brier score needs at least one subinterval",
        ));
    }
    let t_max = outcomes
        .iter()
        .map(|o| o.time.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let event_weights: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| {
            let g = km.left_limit(o.time).as_f64();
            (o.event && g > 0.0).then(|| 1.0 / g)
        })
        .collect();
    let n = outcomes.len() as f64;
    let h = t_max / subintervals as f64;
    // The integrand only jumps at curve knots and outcome times; cutting the
    // uniform grid there makes the midpoint rule exact on every piece.
    let mut cuts: Vec<f64> = (0..=subintervals).map(|k| k as f64 * h).collect();
    cuts.extend(outcomes.iter().map(|o| o.time.as_f64()));
    for c in curves {
        cuts.extend(c.times().iter().map(|t| t.as_f64()));
    }
    cuts.retain(|&c| c > 0.0 && c < t_max);
    cuts.push(0.0);
    cuts.push(t_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut dropped = 0u64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        let t = 0.5 * (w[0] + w[1]);
        let tt = T::lit(t);
        let g_t = km.value(tt).as_f64();
        let mut sum = 0.0;
        for ((curve, o), w) in curves.iter().zip(outcomes).zip(&event_weights) {
            let ti = o.time.as_f64();
            if ti <= t {
                if o.event {
                    match w {
                        Some(w) => sum += curve.eval(tt).as_f64().powi(2) * w,
                        None => dropped += 1,
                    }
                }
            } else if g_t > 0.0 {
                sum += (1.0 - curve.eval(tt).as_f64()).powi(2) / g_t;
            } else {
                dropped += 1;
            }
        }
        total += width * sum / n;
    }
    if dropped > 0 {
        log::warn!("integrated Brier score: {dropped} terms dropped for a zero censoring-survival denominator");
    }
    Ok(IbsResult {
        ibs: total / t_max,
        t_max,
        subintervals,
        dropped_terms: dropped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub c_td: f64,
    pub ibs: f64,
    pub dropped_terms: u64,
}

pub fn evaluate<T: Scalar>(
    curves: &[SurvivalCurve<T>],
    outcomes: &[Outcome<T>],
    subintervals: usize,
) -> Result<ChannelMetrics> {
    let c = c_td(curves, outcomes)?;
    let b = ibs(curves, outcomes, subintervals)?;
    Ok(ChannelMetrics {
        c_td: c,
        ibs: b.ibs,
        dropped_terms: b.dropped_terms,
    })
}
