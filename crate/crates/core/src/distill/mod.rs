//! Teacher-to-student distillation: probability extraction, parametric
//! fits, target-sequence construction, weighted text loss and calibration
//! correction.

pub mod extract;
pub mod fit;
pub mod loss;
pub mod target;
pub mod teacher;

pub use extract::extract_probability;
pub use fit::{fit_parametric, percent_nearest_5, three_year_percent, Family, ParametricFit};
pub use loss::{
    softmax_nll, softmax_nll_backward, token_weights, weighted_text_loss, DEFAULT_NUMBER_WEIGHT,
    DEFAULT_SPAN_WEIGHT,
};
pub use target::{
    build_target_sequence, token_masks, whitespace_offsets, TargetSequence, VPROB_CLOSE, VPROB_OPEN,
};
pub use teacher::{
    build_target_record, calibration_mask, complete_horizons, horizon_means, process_teacher,
    read_jsonl, sample_text_loss, write_jsonl, TargetRecord, TeacherLine, TeacherRecord,
    TeacherResponses, TokenNllLine, CALIBRATION_HORIZON, CALIBRATION_THRESHOLD, HORIZONS,
};
