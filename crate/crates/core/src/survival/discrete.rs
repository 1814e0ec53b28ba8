//! Discrete-time hazards: bin grid, event/at-risk targets, masked Bernoulli
//! loss and survival curves `S(t_b) = prod_{k<=b} (1 - h_k)`.

use crate::error::{Result, SurvError};
use crate::outcome::Outcome;
use crate::scalar::{sigmoid, Scalar};
use crate::survival::SurvivalCurve;

/// Probabilities are clipped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before logs.
pub const BCE_CLAMP: f64 = 1e-12;

/// Bin edges `0 = t_0 < t_1 < ... < t_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    edges: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(edges: Vec<T>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(SurvError::invalid("time grid needs at least one bin"));
        }
        if edges[0] != T::zero() {
            return Err(SurvError::invalid("time grid must start at 0"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || !edges[edges.len() - 1].is_finite() {
            return Err(SurvError::invalid(
                "time grid edges must be finite and strictly increasing",
            ));
        }
        Ok(TimeGrid { edges })
    }

    /// `bins` equal-width bins on `[0, horizon]`.
    pub fn equal_width(bins: usize, horizon: T) -> Result<Self> {
        if bins == 0 {
            return Err(SurvError::invalid("number of bins must be positive"));
        }
        let width = horizon / T::from_usize_lossy(bins);
        let mut edges: Vec<T> = (0..bins).map(|b| T::from_usize_lossy(b) * width).collect();
        edges.push(horizon);
        Self::new(edges)
    }

    /// Inner edges at quantiles of `event_times`, last edge at `horizon`.
    /// Duplicate quantiles are merged, so fewer than `bins` bins may result.
    pub fn quantile(bins: usize, event_times: &[T], horizon: T) -> Result<Self> {
        if bins == 0 {
            return Err(SurvError::invalid("number of bins must be positive"));
        }
        let mut ts: Vec<T> = event_times
            .iter()
            .copied()
            .filter(|&t| t > T::zero() && t < horizon)
            .collect();
        if ts.is_empty() {
            return Self::equal_width(bins, horizon);
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut edges = vec![T::zero()];
        for b in 1..bins {
            let q = b as f64 / bins as f64;
            let idx = ((ts.len() as f64 - 1.0) * q).round() as usize;
            let e = ts[idx];
            if e > *edges.last().unwrap() && e < horizon {
                edges.push(e);
            }
        }
        edges.push(horizon);
        Self::new(edges)
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.edges[self.edges.len() - 1]
    }
}

/// Row-major `N x B` event indicators `y` and at-risk mask `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTargets {
    pub n: usize,
    pub bins: usize,
    pub y: Vec<bool>,
    pub a: Vec<bool>,
}

impl DiscreteTargets {
    pub fn row_y(&self, i: usize) -> &[bool] {
        &self.y[i * self.bins..(i + 1) * self.bins]
    }

    pub fn row_a(&self, i: usize) -> &[bool] {
        &self.a[i * self.bins..(i + 1) * self.bins]
    }

    /// Targets for a subset of rows.
    pub fn select(&self, rows: &[usize]) -> DiscreteTargets {
        let mut y = Vec::with_capacity(rows.len() * self.bins);
        let mut a = Vec::with_capacity(rows.len() * self.bins);
        for &r in rows {
            y.extend_from_slice(self.row_y(r));
            a.extend_from_slice(self.row_a(r));
        }
        DiscreteTargets {
            n: rows.len(),
            bins: self.bins,
            y,
            a,
        }
    }
}

/// `y_ib = 1{e_i, t_{b-1} < t_i <= t_b}`; `a_ib = 1{t_i > t_{b-1}}`, i.e. the
/// subject has neither died nor been censored before the start of bin `b`.
pub fn build_discrete_targets<T: Scalar>(
    outcomes: &[Outcome<T>],
    grid: &TimeGrid<T>,
) -> Result<DiscreteTargets> {
    let bins = grid.num_bins();
    let edges = grid.edges();
    let mut y = vec![false; outcomes.len() * bins];
    let mut a = vec![false; outcomes.len() * bins];
    for (i, o) in outcomes.iter().enumerate() {
        if !(o.time > T::zero()) || o.time > grid.horizon() {
            return Err(SurvError::invalid(format!(
                "subject {i}: time {} outside grid (0, {}]",
                o.time,
                grid.horizon()
            )));
        }
        for b in 0..bins {
            let start = edges[b];
            let end = edges[b + 1];
            if o.time > start {
                a[i * bins + b] = true;
                if o.event && o.time <= end {
                    y[i * bins + b] = true;
                }
            }
        }
    }
    Ok(DiscreteTargets {
        n: outcomes.len(),
        bins,
        y,
        a,
    })
}

/// `sum a_ib BCE(sigmoid(o_ib), y_ib) / sum a_ib` and its gradient w.r.t. the
/// row-major logits. Cells whose probability is clipped get zero gradient.
pub fn discrete_loss<T: Scalar>(logits: &[T], targets: &DiscreteTargets) -> Result<(T, Vec<T>)> {
    if logits.len() != targets.n * targets.bins {
        return Err(SurvError::dim(
            "discrete logits",
            targets.n * targets.bins,
            logits.len(),
        ));
    }
    let n_risk = targets.a.iter().filter(|&&a| a).count();
    if n_risk == 0 {
        return Err(SurvError::invalid(
            "discrete loss: at-risk mask is all zero",
        ));
    }
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let inv = T::one() / T::from_usize_lossy(n_risk);
    let mut total = T::zero();
    let mut grad = vec![T::zero(); logits.len()];
    for (k, &o) in logits.iter().enumerate() {
        if !targets.a[k] {
            continue;
        }
        let p = sigmoid(o);
        let pc = p.max(lo).min(hi);
        let y = targets.y[k];
        total += if y { -pc.ln() } else { -(T::one() - pc).ln() };
        if p > lo && p < hi {
            let yv = if y { T::one() } else { T::zero() };
            grad[k] = (p - yv) * inv;
        }
    }
    Ok((total * inv, grad))
}

/// Survival at every grid edge from one subject's `B` logits.
pub fn discrete_curve<T: Scalar>(logits: &[T], grid: &TimeGrid<T>) -> Result<SurvivalCurve<T>> {
    if logits.len() != grid.num_bins() {
        return Err(SurvError::dim(
            "discrete logits",
            grid.num_bins(),
            logits.len(),
        ));
    }
    let mut values = Vec::with_capacity(logits.len() + 1);
    let mut s = T::one();
    values.push(s);
    for &o in logits {
        s *= T::one() - sigmoid(o);
        values.push(s);
    }
    SurvivalCurve::new(grid.edges().to_vec(), values)
}
