//! Self-attention pooling of token hidden states into one text embedding.
//!
//! `A = softmax_rows(H Hᵀ)`, `H' = A H`, `z = mean over rows of H'`. No
//! temperature and no `1/sqrt(d)` scaling.

use crate::error::{Result, SurvError};
use crate::scalar::Scalar;

/// Row-major `L x d` token hidden states for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStateMatrix<T> {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> HiddenStateMatrix<T> {
    pub fn new(id: impl Into<String>, rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SurvError::invalid(format!(
                "hidden states must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(SurvError::dim(
                "hidden-state values",
                rows * cols,
                values.len(),
            ));
        }
        Ok(HiddenStateMatrix {
            id: id.into(),
            rows,
            cols,
            values,
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Row-stochastic attention matrix `softmax_rows(H Hᵀ)`, row-major `L x L`.
pub fn attention_weights<T: Scalar>(h: &HiddenStateMatrix<T>) -> Result<Vec<T>> {
    if let Some(i) = h.values.iter().position(|v| !v.is_finite()) {
        return Err(SurvError::NonFinite(format!(
            "hidden states of `{}` (row {}, col {})",
            h.id,
            i / h.cols,
            i % h.cols
        )));
    }
    let l = h.rows;
    let mut a = vec![T::zero(); l * l];
    for i in 0..l {
        let ri = h.row(i);
        let scores = &mut a[i * l..(i + 1) * l];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = ri.iter().zip(h.row(j)).map(|(&x, &y)| x * y).sum();
        }
        let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for s in scores.iter_mut() {
            *s = (*s - m).exp();
            total += *s;
        }
        for s in scores.iter_mut() {
            *s /= total;
        }
    }
    Ok(a)
}

/// Pools `H` into a length-`d` embedding.
pub fn attention_pool<T: Scalar>(h: &HiddenStateMatrix<T>) -> Result<Vec<T>> {
    let a = attention_weights(h)?;
    let l = h.rows;
    // mean_r (A H)_r = sum_m colmean(A)_m H_m
    let inv_l = T::one() / T::from_usize_lossy(l);
    let mut z = vec![T::zero(); h.cols];
    for m in 0..l {
        let w: T = (0..l).map(|r| a[r * l + m]).sum::<T>() * inv_l;
        for (zk, &hk) in z.iter_mut().zip(h.row(m)) {
            *zk += w * hk;
        }
    }
    log::trace!("pooled `{}` over {} tokens", h.id, l);
    Ok(z)
}
