//! Joint optimisation of `L_surv + α L_AE + β L_text`, early stopping,
//! evaluation and experiment suites.

pub mod config;
pub mod data;
pub mod loss;
pub mod model;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{FusionMode, RunConfig};
pub use data::{prepare, Example, PreparedData};
pub use loss::{batch_text_loss, survival_loss, total_loss, LossBreakdown, LossWeights};
pub use model::{InputDims, ModelGrads, ModelInput, SampleForward, SampleMasks, SurvModel};
pub use report::{
    format_table, ChannelReport, EpochTrace, FitSummary, GateValues, PretrainSummary, RunReport,
};
pub use run::{
    eval_survival_loss, evaluate_model, fit_baseline, fit_model, hidden_curves, load_checkpoint,
    predict_all, pretrain_heads, save_checkpoint, stream_rng, train, train_prepared, Evaluation,
    FitPlan, TrainOutcome, STREAM_INIT,
};
pub use suite::{run_experiment_suite, SuiteReport, SuiteRow};
