use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::nn::Params;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment buffers for one parameter group. Moments are allocated on the first
/// step from the parameter shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<T> {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamWState<T> {
    pub fn new(config: AdamWConfig) -> Self {
        AdamWState {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// One decoupled-weight-decay Adam update:
///
/// `p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)`
///
/// Gradients are validated before anything is mutated; a non-finite entry
/// aborts the step and names the offending tensor.
pub fn adamw_step<T, P, G>(
    params: &mut P,
    grads: &G,
    state: &mut AdamWState<T>,
    lr: T,
) -> Result<()>
where
    T: Scalar,
    P: Params<T>,
    G: Params<T>,
{
    let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    let g = grads.tensors();
    if g.len() != shapes.len() {
        return Err(SurvError::dim(
            "adamw gradient tensors",
            shapes.len(),
            g.len(),
        ));
    }
    for ((name, gt), &n) in g.iter().zip(&shapes) {
        if gt.len() != n {
            return Err(SurvError::dim(
                format!("adamw gradient `{name}`"),
                n,
                gt.len(),
            ));
        }
        if let Some(i) = gt.iter().position(|x| !x.is_finite()) {
            return Err(SurvError::NonFinite(format!("gradient `{name}`[{i}]")));
        }
    }
    if state.m.is_empty() {
        state.m = shapes.iter().map(|&n| vec![T::zero(); n]).collect();
        state.v = state.m.clone();
    } else if state.m.len() != shapes.len()
        || state.m.iter().zip(&shapes).any(|(m, &n)| m.len() != n)
    {
        return Err(SurvError::invalid(
            "adamw state shapes do not match parameters",
        ));
    }

    state.step += 1;
    let c = state.config;
    let b1 = T::lit(c.beta1);
    let b2 = T::lit(c.beta2);
    let eps = T::lit(c.eps);
    let decay = T::one() - lr * T::lit(c.weight_decay);
    let t = state.step as i32;
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);

    for (((p, gt), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(g.iter().map(|(_, t)| *t))
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            let gi = gt[i];
            m[i] = b1 * m[i] + (T::one() - b1) * gi;
            v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut p = vec![1.5f64, -2.0, 0.25];
        let before = p.clone();
        let mut st = AdamWState::new(AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        adamw_step(&mut p, &vec![0.0; 3], &mut st, 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_grad_applies_decoupled_decay() {
        let mut p = vec![1.5f64, -2.0, 0.25];
        let before = p.clone();
        let mut st = AdamWState::new(AdamWConfig::default());
        adamw_step(&mut p, &vec![0.0; 3], &mut st, 1e-3).unwrap();
        for (a, b) in p.iter().zip(&before) {
            assert!((a - b * (1.0 - 1e-5)).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn scalar_first_step_matches_hand_computation() {
        // m = 0.1, v = 0.001; bias-corrected both equal 1 -> step = lr / (1 + eps)
        let lr = 1e-3;
        let mut p = vec![0.0f64];
        let mut st = AdamWState::new(AdamWConfig::default());
        adamw_step(&mut p, &vec![1.0], &mut st, lr).unwrap();
        let m_hat = (0.1f64) / (1.0 - 0.9);
        let v_hat = (0.001f64) / (1.0 - 0.999);
        let expected = -lr * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + lr / (1.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = vec![3.0f64, -1.0];
        let mut st = AdamWState::new(AdamWConfig::default());
        for _ in 0..5 {
            adamw_step(&mut p, &vec![0.7, -0.2], &mut st, 0.0).unwrap();
        }
        assert_eq!(p, vec![3.0, -1.0]);
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut p = vec![1.0f64, 2.0];
        let mut st = AdamWState::new(AdamWConfig::default());
        let err = adamw_step(&mut p, &vec![0.1, f64::NAN], &mut st, 1e-3).unwrap_err();
        assert!(err.to_string().contains("values"), "{err}");
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![1.0f64, 2.0];
        let mut st = AdamWState::new(AdamWConfig::default());
        assert!(adamw_step(&mut p, &vec![0.1], &mut st, 1e-3).is_err());
    }
}
