//! Turns a loaded cohort into per-sample training examples on a fixed split.

use crate::cohort::{split_cohort, Cohort, CohortSplit};
use crate::distill::{
    build_target_sequence, calibration_mask, horizon_means, process_teacher, sample_text_loss,
    CALIBRATION_HORIZON, CALIBRATION_THRESHOLD,
};
use crate::error::{Result, SurvError};
use crate::fusion::{Modality, ModalitySet};
use crate::outcome::Outcome;
use crate::train::config::RunConfig;
use crate::train::model::{InputDims, ModelInput};

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub outcome: Outcome<f64>,
    /// Pooled text representation.
    pub text: Option<Vec<f64>>,
    pub cov: Option<Vec<f64>>,
    pub ge: Option<Vec<f64>>,
    /// Rounded 3-year percent from the teacher, when any response parsed.
    pub verbalized_percent: Option<f64>,
    /// Weighted text loss from supplied token NLLs.
    pub text_loss: Option<f64>,
    /// False when calibration correction masks this sample's text loss.
    pub text_included: bool,
}

impl Example {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            text: self.text.as_deref(),
            cov: self.cov.as_deref(),
            ge: self.ge.as_deref(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreparedData {
    pub examples: Vec<Example>,
    pub split: CohortSplit,
    pub dims: InputDims,
    /// Training samples with a text loss.
    pub text_samples: usize,
    /// Training samples whose text loss calibration correction removed.
    pub masked_samples: usize,
}

impl PreparedData {
    pub fn subset(&self, idx: &[usize]) -> Vec<&Example> {
        idx.iter().map(|&i| &self.examples[i]).collect()
    }
}

/// Drops incomplete samples, pools text, splits, fits covariate scaling on
/// the training split and derives teacher targets with training-split means.
pub fn prepare(cohort: &Cohort, cfg: &RunConfig) -> Result<PreparedData> {
    let mods = cfg.modalities;
    let available = cohort.available();
    if let Some(m) = mods.iter().find(|&m| !available.contains(m)) {
        return Err(SurvError::invalid(format!(
            "modality `{m}` is configured but the cohort has no `{m}` data"
        )));
    }
    let mut cohort = cohort.clone();
    cohort.retain_complete(mods);
    if mods.text {
        cohort.pool_text()?;
    }
    let split = split_cohort(cohort.len(), cfg.split_ratios, cfg.split_seed)?;
    cohort.preprocess_covariates(&split)?;

    let means = horizon_means(
        split
            .train
            .iter()
            .filter_map(|&i| cohort.samples[i].teacher.as_ref()),
    );
    let mut examples = Vec::with_capacity(cohort.len());
    for s in &cohort.samples {
        let mut ex = Example {
            id: s.id.clone(),
            outcome: s.outcome,
            text: None,
            cov: None,
            ge: None,
            verbalized_percent: None,
            text_loss: None,
            text_included: true,
        };
        if mods.text {
            ex.text = s.text_pooled.clone();
            if let Some(line) = &s.teacher {
                let any = line.extracted().iter().any(Option::is_some);
                // with no parsable response and no training means there is nothing to fit
                match process_teacher(line, means) {
                    Ok(rec) => {
                        if any {
                            ex.verbalized_percent = Some(f64::from(rec.percent));
                        }
                        if let Some(nll) = &s.token_nll {
                            let target = build_target_sequence(&rec.explanation, rec.percent)?;
                            ex.text_loss = Some(
                                sample_text_loss(&target, nll, cfg.span_weight, cfg.number_weight)
                                    .map_err(|e| {
                                        SurvError::invalid(format!(
                                            "token NLLs of `{}` do not fit its target: {e}",
                                            s.id
                                        ))
                                    })?,
                            );
                            if cfg.calibration_correction {
                                ex.text_included = calibration_mask(
                                    f64::from(rec.percent),
                                    &s.outcome,
                                    CALIBRATION_HORIZON,
                                    CALIBRATION_THRESHOLD,
                                );
                            }
                        }
                    }
                    Err(e) if any => return Err(e),
                    Err(_) => {}
                }
            }
        }
        if mods.cov {
            ex.cov = s.cov.clone();
        }
        if mods.ge {
            ex.ge = s.ge.clone();
        }
        examples.push(ex);
    }
    let dims = dims_of(&examples, mods);
    let text_samples = split
        .train
        .iter()
        .filter(|&&i| examples[i].text_loss.is_some())
        .count();
    let masked_samples = split
        .train
        .iter()
        .filter(|&&i| examples[i].text_loss.is_some() && !examples[i].text_included)
        .count();
    Ok(PreparedData {
        examples,
        split,
        dims,
        text_samples,
        masked_samples,
    })
}

fn dims_of(examples: &[Example], mods: ModalitySet) -> InputDims {
    let first = |f: fn(&Example) -> Option<usize>| examples.iter().find_map(f);
    InputDims {
        text: if mods.contains(Modality::Text) {
            first(|e| e.text.as_ref().map(Vec::len))
        } else {
            None
        },
        cov: if mods.contains(Modality::Cov) {
            first(|e| e.cov.as_ref().map(Vec::len))
        } else {
            None
        },
        ge: if mods.contains(Modality::Ge) {
            first(|e| e.ge.as_ref().map(Vec::len))
        } else {
            None
        },
    }
}
