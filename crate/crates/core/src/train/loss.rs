//! `L = L_surv + α L_AE + β L_text` over one mini-batch.

use serde::{Deserialize, Serialize};

use crate::autoencoder::reconstruction_loss;
use crate::error::{Result, SurvError};
use crate::survival::{build_discrete_targets, cox_loss, discrete_loss, HeadKind};
use crate::train::data::Example;
use crate::train::model::{ModelGrads, SampleForward, SampleMasks, SurvModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub surv: f64,
    pub ae: f64,
    pub text: f64,
    /// Samples contributing to the text term.
    pub text_samples: usize,
}

/// Survival loss of fused outputs with its gradient per output entry.
pub fn survival_loss(
    model: &SurvModel,
    outputs: &[Vec<f64>],
    batch: &[&Example],
) -> Result<(f64, Vec<f64>)> {
    let outcomes: Vec<_> = batch.iter().map(|e| e.outcome).collect();
    match model.head_kind {
        HeadKind::Discrete => {
            let grid = model
                .grid
                .as_ref()
                .ok_or_else(|| SurvError::invalid("discrete head without a time grid"))?;
            let targets = build_discrete_targets(&outcomes, grid)?;
            let flat: Vec<f64> = outputs.iter().flatten().copied().collect();
            discrete_loss(&flat, &targets)
        }
        HeadKind::Coxph => {
            let scores: Vec<f64> = outputs.iter().map(|o| o[0]).collect();
            cox_loss(&scores, &outcomes)
        }
    }
}

/// Mean text loss over samples with NLLs that calibration correction keeps.
pub fn batch_text_loss(batch: &[&Example]) -> (f64, usize) {
    let kept: Vec<f64> = batch
        .iter()
        .filter(|e| e.text_included)
        .filter_map(|e| e.text_loss)
        .collect();
    if kept.is_empty() {
        (0.0, 0)
    } else {
        (kept.iter().sum::<f64>() / kept.len() as f64, kept.len())
    }
}

/// Loss of one batch; gradients are accumulated into `grads` when given.
/// Returns `None` for a CoxPH batch without events, which has no partial
/// likelihood.
pub fn total_loss(
    model: &SurvModel,
    batch: &[&Example],
    masks: Option<&[SampleMasks]>,
    w: LossWeights,
    grads: Option<&mut ModelGrads>,
) -> Result<Option<LossBreakdown>> {
    if batch.is_empty() {
        return Err(SurvError::invalid("empty batch"));
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(SurvError::dim("dropout masks", batch.len(), m.len()));
        }
    }
    if model.head_kind == HeadKind::Coxph && !batch.iter().any(|e| e.outcome.event) {
        return Ok(None);
    }
    let fwd: Vec<SampleForward> = batch
        .iter()
        .enumerate()
        .map(|(i, e)| model.forward(&e.input(), masks.map(|m| &m[i])))
        .collect::<Result<_>>()?;
    let outputs: Vec<Vec<f64>> = fwd.iter().map(|f| f.output.clone()).collect();
    let (surv, surv_grad) = survival_loss(model, &outputs, batch)?;

    let (ae, recon_grads) = if model.ae.is_some() {
        let inputs: Vec<&[f64]> = batch
            .iter()
            .map(|e| {
                e.ge.as_deref().ok_or_else(|| {
                    SurvError::invalid(format!("sample `{}` has no gene expression", e.id))
                })
            })
            .collect::<Result<_>>()?;
        let recons: Vec<&[f64]> = fwd
            .iter()
            .map(|f| f.ae.as_ref().expect("ae forward").reconstruction.as_slice())
            .collect();
        let (l, g) = reconstruction_loss(&inputs, &recons)?;
        (l, Some(g))
    } else {
        (0.0, None)
    };
    let (text, text_samples) = batch_text_loss(batch);
    let total = surv + w.alpha * ae + w.beta * text;
    if !total.is_finite() {
        let ids: Vec<&str> = batch.iter().map(|e| e.id.as_str()).collect();
        return Err(SurvError::Diverged(format!(
            "non-finite loss: L_surv={surv} L_AE={ae} L_text={text} alpha={} beta={} batch={ids:?}",
            w.alpha, w.beta
        )));
    }

    if let Some(grads) = grads {
        let width = model.output_dim();
        for (i, f) in fwd.iter().enumerate() {
            let up = &surv_grad[i * width..(i + 1) * width];
            // the text term has no parameters here, so it adds no gradient
            let rg: Option<Vec<f64>> = match &recon_grads {
                Some(g) if w.alpha != 0.0 => Some(g[i].iter().map(|v| v * w.alpha).collect()),
                _ => None,
            };
            model.backward(f, up, rg.as_deref(), grads)?;
        }
    }
    Ok(Some(LossBreakdown {
        total,
        surv,
        ae,
        text,
        text_samples,
    }))
}
