//! Multimodal survival modeling.
//!
//! Token hidden states, tabular covariates and gene expression are fused into
//! discrete-time or CoxPH survival heads; teacher-verbalized probabilities
//! are parsed into training targets and blended with the model's curves; and
//! predictions are scored with time-dependent concordance and IPCW Brier
//! scores.
//!
//! Numeric modules are generic over [`Scalar`] (`f32`/`f64`); the training
//! pipeline runs in `f64`, and the aliases below name the concrete types.

// `!(a > b)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod blending;
pub mod cohort;
pub mod distill;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod outcome;
pub mod pooling;
pub mod scalar;
pub mod survival;
pub mod synth;
pub mod train;

pub use error::{Result, SurvError};
pub use outcome::{administrative_censor, Outcome};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Autoencoder64 = autoencoder::Autoencoder<f64>;
pub type SurvivalCurve64 = survival::SurvivalCurve<f64>;
pub type SurvivalCurve32 = survival::SurvivalCurve<f32>;
pub type TimeGrid64 = survival::TimeGrid<f64>;
pub type HiddenStates64 = pooling::HiddenStateMatrix<f64>;
pub type HiddenStates32 = pooling::HiddenStateMatrix<f32>;
