//! Training loop with early stopping, evaluation of the three prediction
//! channels, head pre-training and checkpoints.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blending::{
    blend_channels, combine, count_floored, select_lambda, verbalized_curve, Channels,
    LambdaSelection,
};
use crate::cohort::Cohort;
use crate::error::{Result, SurvError};
use crate::fusion::{Modality, ModalitySet};
use crate::metrics::{c_td, evaluate};
use crate::nn::{adamw_step, AdamWConfig, AdamWState, Checkpoint, Params};
use crate::outcome::Outcome;
use crate::survival::{
    breslow_baseline, cox_curve, discrete_curve, BreslowBaseline, HeadKind, SurvivalCurve,
};
use crate::train::config::{FusionMode, RunConfig};
use crate::train::data::{prepare, Example, PreparedData};
use crate::train::loss::{survival_loss, total_loss, LossBreakdown, LossWeights};
use crate::train::model::{InputDims, ModelGrads, SurvModel};
use crate::train::report::{
    ChannelReport, EpochTrace, FitSummary, GateValues, PretrainSummary, RunReport,
};

/// Stream used for parameter initialisation.
pub const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_PRETRAIN: u64 = 16;

/// Independent ChaCha8 stream `stream` under the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Schedule for one optimisation phase.
#[derive(Clone, Copy, Debug)]
pub struct FitPlan {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Offset added to the shuffle and dropout stream ids.
    pub stream_offset: u64,
    /// Heads (and, for ge, the autoencoder) left untouched.
    pub frozen: ModalitySet,
}

impl FitPlan {
    pub fn joint(cfg: &RunConfig) -> Self {
        FitPlan {
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            patience: cfg.patience,
            stream_offset: 0,
            frozen: if cfg.pretrain && cfg.freeze_pretrained {
                let mut s = ModalitySet::default();
                for m in [Modality::Cov, Modality::Ge] {
                    if cfg.modalities.contains(m) {
                        s.insert(m);
                    }
                }
                s
            } else {
                ModalitySet::default()
            },
        }
    }
}

struct Optim {
    joint: AdamWState<f64>,
    heads: [AdamWState<f64>; 3],
    ae: AdamWState<f64>,
    gates: AdamWState<f64>,
}

impl Optim {
    fn new(weight_decay: f64) -> Self {
        let c = AdamWConfig {
            weight_decay,
            ..AdamWConfig::default()
        };
        Optim {
            joint: AdamWState::new(c),
            heads: [AdamWState::new(c), AdamWState::new(c), AdamWState::new(c)],
            ae: AdamWState::new(c),
            gates: AdamWState::new(c),
        }
    }

    fn step(
        &mut self,
        model: &mut SurvModel,
        grads: &ModelGrads,
        cfg: &RunConfig,
        frozen: ModalitySet,
    ) -> Result<()> {
        if let (Some(p), Some(g)) = (model.joint.as_mut(), grads.joint.as_ref()) {
            adamw_step(p, g, &mut self.joint, cfg.lr)?;
        }
        for (k, m) in Modality::ALL.into_iter().enumerate() {
            if frozen.contains(m) {
                continue;
            }
            let g = match m {
                Modality::Text => grads.text_head.as_ref(),
                Modality::Cov => grads.cov_head.as_ref(),
                Modality::Ge => grads.ge_head.as_ref(),
            };
            if let (Some(p), Some(g)) = (model.head_slot_mut(m).as_mut(), g) {
                adamw_step(p, g, &mut self.heads[k], cfg.lr)?;
            }
        }
        if !frozen.ge {
            if let (Some(p), Some(g)) = (model.ae.as_mut(), grads.ae.as_ref()) {
                adamw_step(p, g, &mut self.ae, cfg.ae_lr)?;
            }
        }
        if model.gates.num_params() > 0 {
            adamw_step(&mut model.gates, &grads.gates, &mut self.gates, cfg.gate_lr)?;
        }
        Ok(())
    }
}

/// Evaluation-mode outputs for `examples`.
pub fn predict_all(model: &SurvModel, examples: &[&Example]) -> Result<Vec<Vec<f64>>> {
    examples.iter().map(|e| model.predict(&e.input())).collect()
}

/// Survival loss on a held-out set without dropout; `None` when a CoxPH
/// set has no events.
pub fn eval_survival_loss(model: &SurvModel, examples: &[&Example]) -> Result<Option<f64>> {
    if examples.is_empty()
        || (model.head_kind == HeadKind::Coxph && !examples.iter().any(|e| e.outcome.event))
    {
        return Ok(None);
    }
    let out = predict_all(model, examples)?;
    Ok(Some(survival_loss(model, &out, examples)?.0))
}

/// Mini-batch AdamW on the training split, monitored by validation
/// `L_surv`; the best epoch's parameters are restored at the end.
pub fn fit_model(
    model: &mut SurvModel,
    cfg: &RunConfig,
    data: &PreparedData,
    plan: FitPlan,
) -> Result<FitSummary> {
    let weights = LossWeights {
        alpha: cfg.alpha(),
        beta: cfg.beta(),
    };
    let train = data.split.train.clone();
    let val = data.subset(&data.split.val);
    if train.is_empty() {
        return Err(SurvError::invalid("training split is empty"));
    }
    let mut shuffle_rng = stream_rng(cfg.seed, STREAM_SHUFFLE + plan.stream_offset);
    let mut dropout_rng = stream_rng(cfg.seed, STREAM_DROPOUT + plan.stream_offset);
    let mut optim = Optim::new(cfg.weight_decay);
    let mut grads = ModelGrads::zeros_like(model);
    let mut summary = FitSummary::default();
    let mut best: Option<(f64, SurvModel)> = None;
    let mut wait = 0;
    let mut order = train;

    for epoch in 1..=plan.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossBreakdown::default();
        let mut seen = 0usize;
        for chunk in order.chunks(plan.batch_size) {
            let batch = data.subset(chunk);
            let masks: Vec<_> = batch
                .iter()
                .map(|_| model.sample_masks(&mut dropout_rng))
                .collect();
            grads.zero();
            let Some(l) = total_loss(model, &batch, Some(&masks), weights, Some(&mut grads))?
            else {
                summary.skipped_batches += 1;
                continue;
            };
            optim
                .step(model, &grads, cfg, plan.frozen)
                .map_err(|e| match e {
                    SurvError::NonFinite(m) => SurvError::Diverged(format!("epoch {epoch}: {m}")),
                    e => e,
                })?;
            let n = batch.len() as f64;
            sums.total += l.total * n;
            sums.surv += l.surv * n;
            sums.ae += l.ae * n;
            sums.text += l.text * n;
            sums.text_samples += l.text_samples;
            seen += batch.len();
        }
        let denom = seen.max(1) as f64;
        let train_mean = LossBreakdown {
            total: sums.total / denom,
            surv: sums.surv / denom,
            ae: sums.ae / denom,
            text: sums.text / denom,
            text_samples: sums.text_samples,
        };
        // a CoxPH validation split without events falls back to the training loss
        let monitor = eval_survival_loss(model, &val)?.unwrap_or(train_mean.surv);
        if !monitor.is_finite() {
            return Err(SurvError::Diverged(format!(
                "epoch {epoch}: validation L_surv = {monitor}"
            )));
        }
        summary.trace.push(EpochTrace {
            epoch,
            train: train_mean,
            val_surv: monitor,
        });
        summary.epochs_run = epoch;
        if best.as_ref().is_none_or(|(b, _)| monitor < *b) {
            best = Some((monitor, model.clone()));
            summary.best_epoch = Some(epoch);
            summary.best_val_loss = Some(monitor);
            wait = 0;
        } else {
            wait += 1;
        }
        log::debug!(
            "epoch {epoch}: train {:.5} val L_surv {:.5}",
            train_mean.total,
            monitor
        );
        if wait >= plan.patience {
            break;
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    if summary.skipped_batches > 0 {
        log::info!("{} batches without events skipped", summary.skipped_batches);
    }
    Ok(summary)
}

/// Trains the cov and ge heads alone (ge together with its autoencoder)
/// under the pre-training schedule and copies them into `model`.
pub fn pretrain_heads(
    cfg: &RunConfig,
    data: &PreparedData,
    model: &mut SurvModel,
) -> Result<Vec<PretrainSummary>> {
    if model.fusion != FusionMode::Late {
        return Err(SurvError::invalid("pre-training needs late fusion"));
    }
    let mut out = Vec::new();
    for (k, m) in [Modality::Cov, Modality::Ge].into_iter().enumerate() {
        let Some(head) = model.head(m).cloned() else {
            continue;
        };
        let sub_cfg = RunConfig {
            modalities: ModalitySet::only(m),
            beta: Some(0.0),
            ..cfg.clone()
        };
        let mut sub = SurvModel {
            modalities: ModalitySet::only(m),
            ae: if m == Modality::Ge {
                model.ae.clone()
            } else {
                None
            },
            joint: None,
            text_head: None,
            cov_head: None,
            ge_head: None,
            gates: crate::fusion::FusionGates::new(ModalitySet::only(m), model.output_dim()),
            ..model.clone()
        };
        *sub.head_slot_mut(m) = Some(head);
        let plan = FitPlan {
            batch_size: cfg.pretrain_batch_size,
            epochs: cfg.pretrain_epochs,
            patience: cfg.pretrain_patience,
            stream_offset: STREAM_PRETRAIN * (k as u64 + 1),
            frozen: ModalitySet::default(),
        };
        let fit = fit_model(&mut sub, &sub_cfg, data, plan)?;
        *model.head_slot_mut(m) = sub.head(m).cloned();
        if m == Modality::Ge {
            model.ae = sub.ae;
        }
        out.push(PretrainSummary { modality: m, fit });
    }
    Ok(out)
}

/// Hidden-state survival curves: discrete curves on the bin edges, or
/// Breslow curves from `baseline`.
pub fn hidden_curves(
    model: &SurvModel,
    examples: &[&Example],
    baseline: Option<&BreslowBaseline<f64>>,
) -> Result<Vec<SurvivalCurve<f64>>> {
    let out = predict_all(model, examples)?;
    match model.head_kind {
        HeadKind::Discrete => {
            let grid = model
                .grid
                .as_ref()
                .ok_or_else(|| SurvError::invalid("discrete head without a time grid"))?;
            out.iter().map(|o| discrete_curve(o, grid)).collect()
        }
        HeadKind::Coxph => {
            let b = baseline
                .ok_or_else(|| SurvError::invalid("CoxPH curves need a Breslow baseline"))?;
            out.iter().map(|o| cox_curve(o[0], b)).collect()
        }
    }
}

/// Breslow baseline on the combined training and validation splits.
pub fn fit_baseline(
    model: &SurvModel,
    data: &PreparedData,
) -> Result<Option<BreslowBaseline<f64>>> {
    if model.head_kind != HeadKind::Coxph {
        return Ok(None);
    }
    let idx: Vec<usize> = data
        .split
        .train
        .iter()
        .chain(&data.split.val)
        .copied()
        .collect();
    let ex = data.subset(&idx);
    let scores: Vec<f64> = predict_all(model, &ex)?.into_iter().map(|o| o[0]).collect();
    let outcomes: Vec<Outcome<f64>> = ex.iter().map(|e| e.outcome).collect();
    breslow_baseline(&scores, &outcomes).map(Some)
}

fn verbalized_curves(
    examples: &[&Example],
    hidden: &[SurvivalCurve<f64>],
) -> Result<Vec<Option<SurvivalCurve<f64>>>> {
    count_floored(
        examples
            .iter()
            .filter_map(|e| e.verbalized_percent.as_ref()),
    );
    examples
        .iter()
        .zip(hidden)
        .map(|(e, h)| {
            e.verbalized_percent
                .map(|p| verbalized_curve(p, h.times()))
                .transpose()
        })
        .collect()
}

fn channel_report(
    channels: &Channels<f64>,
    outcomes: &[Outcome<f64>],
    with_verbal: bool,
    subintervals: usize,
) -> Result<ChannelReport> {
    let hidden = evaluate(&channels.hidden, outcomes, subintervals)?;
    let (verbalized, combined) = match (&channels.verbalized, with_verbal) {
        (Some(v), true) => (
            Some(evaluate(v, outcomes, subintervals)?),
            Some(evaluate(&channels.combined, outcomes, subintervals)?),
        ),
        _ => (None, None),
    };
    Ok(ChannelReport {
        n: outcomes.len(),
        hidden,
        verbalized,
        combined,
        missing_verbalized: if with_verbal { channels.missing } else { 0 },
    })
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub lambda: Option<LambdaSelection>,
    pub validation: ChannelReport,
    pub test: ChannelReport,
    pub test_ids: Vec<String>,
    pub test_channels: Channels<f64>,
}

/// Hidden, verbalized and combined channels on validation and test; the
/// blend weight is chosen on validation unless fixed by the config.
pub fn evaluate_model(
    model: &SurvModel,
    cfg: &RunConfig,
    data: &PreparedData,
) -> Result<Evaluation> {
    let baseline = fit_baseline(model, data)?;
    let val = data.subset(&data.split.val);
    let test = data.subset(&data.split.test);
    let val_hidden = hidden_curves(model, &val, baseline.as_ref())?;
    let test_hidden = hidden_curves(model, &test, baseline.as_ref())?;
    let val_verbal = verbalized_curves(&val, &val_hidden)?;
    let test_verbal = verbalized_curves(&test, &test_hidden)?;
    let val_out: Vec<Outcome<f64>> = val.iter().map(|e| e.outcome).collect();
    let test_out: Vec<Outcome<f64>> = test.iter().map(|e| e.outcome).collect();

    let with_verbal =
        cfg.modalities.text && (val_verbal.iter().chain(&test_verbal).any(Option::is_some));
    let lambda = if !with_verbal {
        None
    } else if let Some(l) = cfg.lambda {
        let combined = val_hidden
            .iter()
            .zip(&val_verbal)
            .map(|(s, v)| v.as_ref().map_or(Ok(s.clone()), |v| combine(s, v, l)))
            .collect::<Result<Vec<_>>>()?;
        let c = c_td(&combined, &val_out)?;
        Some(LambdaSelection {
            lambda: l,
            c_td: c,
            scores: vec![(l, c)],
        })
    } else {
        Some(select_lambda(
            &val_hidden,
            &val_verbal,
            &val_out,
            &cfg.lambda_grid,
        )?)
    };
    let l = lambda.as_ref().map_or(0.0, |s| s.lambda);
    let val_channels = blend_channels(val_hidden, &val_verbal, l)?;
    let test_channels = blend_channels(test_hidden, &test_verbal, l)?;
    Ok(Evaluation {
        validation: channel_report(&val_channels, &val_out, with_verbal, cfg.ibs_subintervals)?,
        test: channel_report(&test_channels, &test_out, with_verbal, cfg.ibs_subintervals)?,
        lambda,
        test_ids: test.iter().map(|e| e.id.clone()).collect(),
        test_channels,
    })
}

pub fn gate_values(model: &SurvModel) -> GateValues {
    GateValues {
        cov: model.gates.cov_values(),
        ge: model.gates.ge_values(),
    }
}

pub fn build_report(
    cfg: &RunConfig,
    data: &PreparedData,
    fit: FitSummary,
    pretrain: Vec<PretrainSummary>,
    model: &SurvModel,
    eval: &Evaluation,
) -> RunReport {
    RunReport {
        name: cfg.name.clone(),
        head: cfg.head,
        fusion: cfg.fusion,
        modalities: cfg.modalities,
        seed: cfg.seed,
        split_seed: cfg.split_seed,
        n_train: data.split.train.len(),
        n_val: data.split.val.len(),
        n_test: data.split.test.len(),
        fit,
        pretrain,
        gates: gate_values(model),
        lambda: eval.lambda.clone(),
        text_loss_samples: data.text_samples,
        masked_samples: data.masked_samples,
        validation: eval.validation.clone(),
        test: eval.test.clone(),
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SurvModel,
    pub report: RunReport,
    pub evaluation: Evaluation,
    pub data: PreparedData,
}

/// Full run: prepare data, initialise, optionally pre-train, train jointly
/// and evaluate.
pub fn train(cfg: &RunConfig, cohort: &Cohort) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare(cohort, cfg)?;
    train_prepared(cfg, data)
}

pub fn train_prepared(cfg: &RunConfig, data: PreparedData) -> Result<TrainOutcome> {
    let mut model = SurvModel::new(cfg, data.dims, &mut stream_rng(cfg.seed, STREAM_INIT))?;
    let pretrain = if cfg.pretrain {
        pretrain_heads(cfg, &data, &mut model)?
    } else {
        Vec::new()
    };
    let fit = fit_model(&mut model, cfg, &data, FitPlan::joint(cfg))?;
    let evaluation = evaluate_model(&model, cfg, &data)?;
    let report = build_report(cfg, &data, fit, pretrain, &model, &evaluation);
    Ok(TrainOutcome {
        model,
        report,
        evaluation,
        data,
    })
}

pub fn save_checkpoint(
    model: &SurvModel,
    cfg: &RunConfig,
    dims: InputDims,
    epochs: u64,
    path: &Path,
) -> Result<()> {
    let mut ck = Checkpoint::new(cfg.seed, epochs);
    ck.meta = serde_json::json!({ "config": cfg, "dims": dims });
    ck.push_params("model", model);
    ck.save(path)
}

/// Rebuilds the architecture from the stored config and loads its weights.
pub fn load_checkpoint(path: &Path) -> Result<(SurvModel, RunConfig, InputDims)> {
    let ck = Checkpoint::load(path)?;
    let bad =
        |e: serde_json::Error| SurvError::invalid(format!("checkpoint {}: {e}", path.display()));
    let cfg: RunConfig = serde_json::from_value(ck.meta["config"].clone()).map_err(bad)?;
    let dims: InputDims = serde_json::from_value(ck.meta["dims"].clone()).map_err(bad)?;
    let mut model = SurvModel::new(&cfg, dims, &mut stream_rng(cfg.seed, STREAM_INIT))?;
    ck.load_params("model", &mut model)?;
    Ok((model, cfg, dims))
}
