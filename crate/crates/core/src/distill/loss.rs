//! Span- and number-weighted token cross-entropy.
//!
//! `L = L_full + (w - 1) L_vprob + (w_num - 1) L_num` where every sub-loss is
//! normalised by the full token count, so a token carries weight 1 outside
//! the probability sentence, `w` inside it and `w + w_num - 1` on the number.

use crate::error::{Result, SurvError};
use crate::scalar::Scalar;

pub const DEFAULT_SPAN_WEIGHT: f64 = 2.0;
pub const DEFAULT_NUMBER_WEIGHT: f64 = 5.0;

pub fn token_weights<T: Scalar>(vprob: &[bool], num: &[bool], w: T, w_num: T) -> Vec<T> {
    vprob
        .iter()
        .zip(num)
        .map(|(&v, &n)| {
            let mut k = T::one();
            if v {
                k += w - T::one();
            }
            if n {
                k += w_num - T::one();
            }
            k
        })
        .collect()
}

/// Weighted loss from per-token NLLs; also returns `dL/d nll` per token.
pub fn weighted_text_loss<T: Scalar>(
    nll: &[T],
    vprob: &[bool],
    num: &[bool],
    w: T,
    w_num: T,
) -> Result<(T, Vec<T>)> {
    if nll.is_empty() {
        return Err(SurvError::invalid(
            "weighted text loss: empty token sequence",
        ));
    }
    if vprob.len() != nll.len() || num.len() != nll.len() {
        return Err(SurvError::dim(
            "token masks",
            nll.len(),
            vprob.len().min(num.len()),
        ));
    }
    let inv = T::one() / T::from_usize_lossy(nll.len());
    let weights = token_weights(vprob, num, w, w_num);
    let total: T = nll.iter().zip(&weights).map(|(&l, &k)| l * k).sum();
    Ok((total * inv, weights.into_iter().map(|k| k * inv).collect()))
}

/// Per-token NLL `-log softmax(logits_k)[target_k]` for row-major
/// `tokens x vocab` logits, with the gradient of `sum_k c_k nll_k` w.r.t.
/// the logits given coefficients `c`. This is the hook a token-level text
/// model plugs into.
pub fn softmax_nll<T: Scalar>(logits: &[T], vocab: usize, targets: &[usize]) -> Result<Vec<T>> {
    if vocab == 0 || logits.len() != targets.len() * vocab {
        return Err(SurvError::dim(
            "token logits",
            targets.len() * vocab,
            logits.len(),
        ));
    }
    targets
        .iter()
        .zip(logits.chunks_exact(vocab))
        .map(|(&t, row)| {
            if t >= vocab {
                return Err(SurvError::invalid(format!(
                    "target token {t} outside vocabulary of {vocab}"
                )));
            }
            Ok(crate::scalar::log_sum_exp(row) - row[t])
        })
        .collect()
}

pub fn softmax_nll_backward<T: Scalar>(
    logits: &[T],
    vocab: usize,
    targets: &[usize],
    coeffs: &[T],
) -> Result<Vec<T>> {
    if logits.len() != targets.len() * vocab || coeffs.len() != targets.len() {
        return Err(SurvError::dim(
            "token logits",
            targets.len() * vocab,
            logits.len(),
        ));
    }
    let mut grad = vec![T::zero(); logits.len()];
    for (k, (row, &t)) in logits.chunks_exact(vocab).zip(targets).enumerate() {
        let lse = crate::scalar::log_sum_exp(row);
        let g = &mut grad[k * vocab..(k + 1) * vocab];
        for (gv, &x) in g.iter_mut().zip(row) {
            *gv = coeffs[k] * (x - lse).exp();
        }
        g[t] -= coeffs[k];
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use proptest::prelude::*;

    #[test]
    fn unit_weights_give_mean_nll() {
        let nll = [0.5f64, 1.5, 2.0];
        let (l, _) =
            weighted_text_loss(&nll, &[false, true, true], &[false, false, true], 1.0, 1.0)
                .unwrap();
        assert!((l - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn numeric_token_weight_worked_example() {
        let (l, g) =
            weighted_text_loss(&[1.0f64, 1.0], &[false, true], &[false, true], 2.0, 5.0).unwrap();
        assert_eq!(l, 3.5);
        assert_eq!(g, vec![0.5, 3.0]);
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(weighted_text_loss::<f64>(&[], &[], &[], 2.0, 5.0).is_err());
    }

    #[test]
    fn matches_three_term_decomposition() {
        let nll = [0.3f64, 0.9, 1.7, 0.2, 2.2];
        let v = [false, false, true, true, true];
        let n = [false, false, false, true, false];
        let (w, wn) = (DEFAULT_SPAN_WEIGHT, DEFAULT_NUMBER_WEIGHT);
        let len = nll.len() as f64;
        let full: f64 = nll.iter().sum::<f64>() / len;
        let lv: f64 = nll
            .iter()
            .zip(&v)
            .filter(|(_, &m)| m)
            .map(|(x, _)| x)
            .sum::<f64>()
            / len;
        let ln: f64 = nll
            .iter()
            .zip(&n)
            .filter(|(_, &m)| m)
            .map(|(x, _)| x)
            .sum::<f64>()
            / len;
        let (l, _) = weighted_text_loss(&nll, &v, &n, w, wn).unwrap();
        assert!((l - (full + (w - 1.0) * lv + (wn - 1.0) * ln)).abs() < 1e-14);
    }

    #[test]
    fn logits_gradient_matches_finite_differences() {
        let logits: Vec<f64> = (0..12)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3)
            .collect();
        let targets = [1usize, 3, 0];
        let v = [false, true, true];
        let n = [false, false, true];
        let loss = |lg: &Vec<f64>| {
            let nll = softmax_nll(lg, 4, &targets).unwrap();
            weighted_text_loss(&nll, &v, &n, 2.0, 5.0).unwrap().0
        };
        let nll = softmax_nll(&logits, 4, &targets).unwrap();
        let (_, dnll) = weighted_text_loss(&nll, &v, &n, 2.0, 5.0).unwrap();
        let g = softmax_nll_backward(&logits, 4, &targets, &dnll).unwrap();
        let err = finite_difference_check(&logits, &g, loss, None, 1e-6);
        assert!(err < 1e-6, "{err}");
        assert!(softmax_nll(&logits, 4, &[9, 0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn weights_are_monotone(nll in proptest::collection::vec(0.01f64..5.0, 1..10), w in 1.0f64..4.0, dw in 0.1f64..2.0) {
            let n = nll.len();
            let v: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
            let num: Vec<bool> = (0..n).map(|i| i == n - 1).collect();
            let empty = vec![false; n];
            let (plain, _) = weighted_text_loss(&nll, &empty, &empty, w, w).unwrap();
            prop_assert!((plain - nll.iter().sum::<f64>() / n as f64).abs() < 1e-12);
            let (a, _) = weighted_text_loss(&nll, &v, &num, w, 5.0).unwrap();
            let (b, _) = weighted_text_loss(&nll, &v, &num, w + dw, 5.0).unwrap();
            let (c, _) = weighted_text_loss(&nll, &v, &num, w, 5.0 + dw).unwrap();
            if v.iter().any(|&x| x) { prop_assert!(b > a); }
            prop_assert!(c > a);
        }
    }
}
