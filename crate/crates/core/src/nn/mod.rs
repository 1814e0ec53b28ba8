//! Minimal feed-forward stack: dense ReLU networks with exact backward
//! passes, AdamW, a central-difference gradient checker and a binary
//! checkpoint format.

pub mod adamw;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use checkpoint::{Checkpoint, CheckpointTensor};
pub use gradcheck::{finite_difference_check, relative_error};
pub use mlp::{Activation, Dense, DropoutMask, Mlp, MlpCache, MlpGrads};

use crate::scalar::Scalar;

/// Ordered view over a set of parameter (or gradient) tensors.
///
/// Gradients for a parameter set expose the same tensors in the same order,
/// which is what [`adamw_step`] and [`finite_difference_check`] rely on.
pub trait Params<T: Scalar> {
    fn tensors(&self) -> Vec<(String, &[T])>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= s;
            }
        }
    }
}

impl<T: Scalar> Params<T> for Vec<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        vec![("values".to_string(), self.as_slice())]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.as_mut_slice()]
    }
}
