//! Cox proportional hazards: negative partial log-likelihood with Breslow
//! ties, Breslow baseline hazard and per-subject survival curves.

use std::cmp::Ordering;

use crate::error::{Result, SurvError};
use crate::outcome::Outcome;
use crate::scalar::Scalar;
use crate::survival::SurvivalCurve;

fn check_inputs<T: Scalar>(scores: &[T], outcomes: &[Outcome<T>]) -> Result<usize> {
    if scores.len() != outcomes.len() {
        return Err(SurvError::dim("cox scores", outcomes.len(), scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(SurvError::NonFinite(format!("cox score of subject {i}")));
    }
    let events = outcomes.iter().filter(|o| o.event).count();
    if events == 0 {
        return Err(SurvError::NoEvents(
            "partial likelihood needs at least one event".into(),
        ));
    }
    Ok(events)
}

fn ascending_order<T: Scalar>(outcomes: &[Outcome<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| {
        outcomes[a]
            .time
            .partial_cmp(&outcomes[b].time)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// `-(1/E) sum_{i: e_i} (g_i - log sum_{j: t_j >= t_i} exp(g_j))` and its
/// gradient w.r.t. the scores. Tied times share one risk set.
pub fn cox_loss<T: Scalar>(scores: &[T], outcomes: &[Outcome<T>]) -> Result<(T, Vec<T>)> {
    let n_events = check_inputs(scores, outcomes)?;
    let n = scores.len();
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let order = ascending_order(outcomes);
    let w: Vec<T> = order.iter().map(|&i| (scores[i] - m).exp()).collect();

    // group boundaries over sorted positions
    let mut group_start = vec![0usize; n];
    let mut group_end = vec![0usize; n];
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && outcomes[order[e]].time == outcomes[order[s]].time {
            e += 1;
        }
        for k in s..e {
            group_start[k] = s;
            group_end[k] = e;
        }
        s = e;
    }

    let mut suffix = vec![T::zero(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + w[k];
    }

    let inv_e = T::one() / T::from_usize_lossy(n_events);
    let mut total = T::zero();
    // cumulative sum of 1/R over events up to (and including) each tie group
    let mut inv_risk_prefix = vec![T::zero(); n + 1];
    for k in 0..n {
        let i = order[k];
        let mut add = T::zero();
        if outcomes[i].event {
            let r = suffix[group_start[k]];
            total += scores[i] - m - r.ln();
            add = T::one() / r;
        }
        inv_risk_prefix[k + 1] = inv_risk_prefix[k] + add;
    }

    let mut grad = vec![T::zero(); n];
    for k in 0..n {
        let i = order[k];
        let c = inv_risk_prefix[group_end[k]];
        let e = if outcomes[i].event {
            T::one()
        } else {
            T::zero()
        };
        grad[i] = -(e - w[k] * c) * inv_e;
    }
    Ok((-total * inv_e, grad))
}

/// Cumulative baseline hazard as a step function over distinct event times.
#[derive(Clone, Debug, PartialEq)]
pub struct BreslowBaseline<T> {
    pub times: Vec<T>,
    pub increments: Vec<T>,
    pub cumulative: Vec<T>,
}

impl<T: Scalar> BreslowBaseline<T> {
    /// `H_0(t)`, right-continuous, 0 before the first event time.
    pub fn cumulative_at(&self, t: T) -> T {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative[k - 1]
        }
    }
}

/// At each distinct event time `tau_k`: `d_k / sum_{j: t_j >= tau_k} exp(g_j)`.
pub fn breslow_baseline<T: Scalar>(
    scores: &[T],
    outcomes: &[Outcome<T>],
) -> Result<BreslowBaseline<T>> {
    check_inputs(scores, outcomes)?;
    let n = scores.len();
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let order = ascending_order(outcomes);
    let mut suffix = vec![T::zero(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + (scores[order[k]] - m).exp();
    }
    let shift = (-m).exp();
    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = T::zero();
    let mut s = 0;
    while s < n {
        let t = outcomes[order[s]].time;
        let mut e = s;
        let mut d = 0usize;
        while e < n && outcomes[order[e]].time == t {
            if outcomes[order[e]].event {
                d += 1;
            }
            e += 1;
        }
        if d > 0 {
            let inc = T::from_usize_lossy(d) / suffix[s] * shift;
            acc += inc;
            times.push(t);
            increments.push(inc);
            cumulative.push(acc);
        }
        s = e;
    }
    Ok(BreslowBaseline {
        times,
        increments,
        cumulative,
    })
}

/// `S(t | g) = exp(-H_0(t) exp(g))` at 0 and every baseline event time.
pub fn cox_curve<T: Scalar>(score: T, baseline: &BreslowBaseline<T>) -> Result<SurvivalCurve<T>> {
    if baseline.times.is_empty() {
        return Err(SurvError::invalid("empty Breslow baseline"));
    }
    let risk = score.exp();
    let mut times = Vec::with_capacity(baseline.times.len() + 1);
    let mut values = Vec::with_capacity(baseline.times.len() + 1);
    times.push(T::zero());
    values.push(T::one());
    for (&t, &h) in baseline.times.iter().zip(&baseline.cumulative) {
        times.push(t);
        values.push((-h * risk).exp());
    }
    SurvivalCurve::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_cox(g: &[f64], o: &[Outcome<f64>]) -> f64 {
        let e = o.iter().filter(|x| x.event).count() as f64;
        let mut s = 0.0;
        for i in 0..g.len() {
            if o[i].event {
                let risk: f64 = (0..g.len())
                    .filter(|&j| o[j].time >= o[i].time)
                    .map(|j| g[j].exp())
                    .sum();
                s += g[i] - risk.ln();
            }
        }
        -s / e
    }

    fn random_case(seed: u64, n: usize) -> (Vec<f64>, Vec<Outcome<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut o: Vec<Outcome<f64>> = (0..n)
            .map(|_| Outcome {
                // coarse times so that ties occur
                time: (rng.random_range(1..6) as f64) * 0.5,
                event: rng.random_bool(0.6),
            })
            .collect();
        o[0].event = true;
        (g, o)
    }

    #[test]
    fn two_subject_case_is_ln2() {
        let o = [Outcome::event(1.0), Outcome::censored(2.0)];
        let (l, _) = cox_loss(&[0.0f64, 0.0], &o).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_event_subject_is_zero() {
        let (l, g) = cox_loss(&[1.7f64], &[Outcome::event(2.0)]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn zero_events_rejected() {
        assert!(matches!(
            cox_loss(&[0.0f64], &[Outcome::censored(1.0)]),
            Err(SurvError::NoEvents(_))
        ));
        assert!(breslow_baseline(&[0.0f64], &[Outcome::censored(1.0)]).is_err());
    }

    #[test]
    fn matches_direct_summation() {
        for seed in 0..20 {
            let (g, o) = random_case(seed, 5);
            let (l, _) = cox_loss(&g, &o).unwrap();
            assert!((l - brute_cox(&g, &o)).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn breslow_zero_scores_is_nelson_aalen() {
        let o = [
            Outcome::event(1.0),
            Outcome::event(2.0),
            Outcome::censored(2.5),
            Outcome::event(3.0),
        ];
        let b = breslow_baseline(&[0.0f64; 4], &o).unwrap();
        assert_eq!(b.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(b.increments, vec![1.0 / 4.0, 1.0 / 3.0, 1.0 / 1.0]);
    }

    #[test]
    fn breslow_tied_events() {
        let o = [
            Outcome::event(1.0),
            Outcome::event(1.0),
            Outcome::censored(2.0),
            Outcome::event(3.0),
        ];
        let b = breslow_baseline(&[0.0f64; 4], &o).unwrap();
        assert_eq!(b.increments[0], 2.0 / 4.0);
        assert_eq!(b.cumulative_at(0.5), 0.0);
        assert_eq!(b.cumulative_at(1.0), 0.5);
        assert_eq!(b.cumulative_at(2.9), 0.5);
    }

    #[test]
    fn breslow_shift_scales_increments() {
        let (g, o) = random_case(4, 8);
        let c = 0.7;
        let shifted: Vec<f64> = g.iter().map(|x| x + c).collect();
        let a = breslow_baseline(&g, &o).unwrap();
        let b = breslow_baseline(&shifted, &o).unwrap();
        for (x, y) in a.increments.iter().zip(&b.increments) {
            assert!((y - x * (-c).exp()).abs() < 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn curve_examples() {
        let base = BreslowBaseline {
            times: vec![1.0, 2.0],
            increments: vec![std::f64::consts::LN_2, 0.1],
            cumulative: vec![std::f64::consts::LN_2, std::f64::consts::LN_2 + 0.1],
        };
        let c = cox_curve(0.0, &base).unwrap();
        assert!((c.eval(1.0) - 0.5).abs() < 1e-15);
        let c = cox_curve(f64::NEG_INFINITY, &base).unwrap();
        assert!(c.values().iter().all(|&v| v == 1.0));
        let g = -0.4;
        let c = cox_curve(g, &base).unwrap();
        for (k, t) in base.times.iter().enumerate() {
            let h: f64 = base.increments[..=k].iter().sum();
            assert!((c.eval(*t) - (-h * g.exp()).exp()).abs() < 1e-15);
        }
        let empty = BreslowBaseline::<f64> {
            times: vec![],
            increments: vec![],
            cumulative: vec![],
        };
        assert!(cox_curve(0.0, &empty).is_err());
    }

    proptest! {
        #[test]
        fn shift_and_permutation_invariance(seed in any::<u64>(), c in -5.0f64..5.0) {
            let (g, o) = random_case(seed, 7);
            let (l, _) = cox_loss(&g, &o).unwrap();
            let shifted: Vec<f64> = g.iter().map(|x| x + c).collect();
            let (ls, _) = cox_loss(&shifted, &o).unwrap();
            prop_assert!((l - ls).abs() < 1e-12);
            let perm: Vec<usize> = (0..7).rev().collect();
            let gp: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
            let op: Vec<Outcome<f64>> = perm.iter().map(|&i| o[i]).collect();
            let (lp, gradp) = cox_loss(&gp, &op).unwrap();
            let (_, grad) = cox_loss(&g, &o).unwrap();
            prop_assert!((l - lp).abs() < 1e-12);
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((gradp[k] - grad[i]).abs() < 1e-12);
            }
        }
    }
}
