use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::scalar::Scalar;

/// Right-censored outcome: follow-up time in years and whether death was observed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T = f64> {
    pub time: T,
    pub event: bool,
}

impl<T: Scalar> Outcome<T> {
    pub fn new(time: T, event: bool) -> Result<Self> {
        if !(time > T::zero()) || !time.is_finite() {
            return Err(SurvError::invalid(format!(
                "follow-up time must be positive and finite, got {time}"
            )));
        }
        Ok(Outcome { time, event })
    }

    pub fn event(time: T) -> Self {
        Outcome { time, event: true }
    }

    pub fn censored(time: T) -> Self {
        Outcome { time, event: false }
    }
}

/// Truncates follow-up at `horizon`: later times become `(horizon, censored)`.
pub fn administrative_censor<T: Scalar>(outcome: Outcome<T>, horizon: T) -> Outcome<T> {
    if outcome.time > horizon {
        Outcome {
            time: horizon,
            event: false,
        }
    } else {
        outcome
    }
}
