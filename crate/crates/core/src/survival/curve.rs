use std::io::Write;

use crate::error::{Result, SurvError};
use crate::scalar::Scalar;

/// Right-continuous step survival function.
///
/// `times[0] == 0`, `values[0] == 1`; between knots the value is held from
/// the preceding knot and after the last knot it stays constant.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> SurvivalCurve<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(SurvError::dim(
                "survival curve values",
                times.len(),
                values.len(),
            ));
        }
        if times[0] != T::zero() {
            return Err(SurvError::invalid(format!(
                "survival curve must start at t = 0, got {}",
                times[0]
            )));
        }
        if values[0] != T::one() {
            return Err(SurvError::invalid(format!(
                "S(0) must be 1, got {}",
                values[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SurvError::invalid(
                    "survival curve times must be strictly increasing",
                ));
            }
        }
        for (k, w) in values.windows(2).enumerate() {
            if !(w[1] <= w[0]) {
                return Err(SurvError::invalid(format!(
                    "survival curve increases at t = {} ({} -> {})",
                    times[k + 1],
                    w[0],
                    w[1]
                )));
            }
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(SurvError::invalid(format!(
                "survival value {v} outside [0, 1]"
            )));
        }
        Ok(SurvivalCurve { times, values })
    }

    /// Curve equal to 1 everywhere.
    pub fn constant_one() -> Self {
        SurvivalCurve {
            times: vec![T::zero()],
            values: vec![T::one()],
        }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `S(t)`; 1 for `t < 0`.
    pub fn eval(&self, t: T) -> T {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            T::one()
        } else {
            self.values[k - 1]
        }
    }

    /// Step evaluation on new knots (must start at 0 and increase).
    pub fn resample(&self, times: &[T]) -> Result<Self> {
        let values = times.iter().map(|&t| self.eval(t)).collect();
        Self::new(times.to_vec(), values)
    }

    pub fn write_csv<W: Write>(&self, id: &str, w: &mut W) -> std::io::Result<()> {
        for (t, s) in self.times.iter().zip(&self.values) {
            writeln!(w, "{id},{t},{s}")?;
        }
        Ok(())
    }
}
