//! Dense arrays, the LSTM cell, optimizers, dropout and gradient checking.

pub mod array;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod rng;

pub use array::{log_sum_exp, softmax, DenseArray};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{lstm_step, LstmCache, LstmIds, LstmWeights};
pub use optim::{decayed_learning_rate, OptimizerKind, OptimizerState};
pub use params::{GradBuffer, ParamId, ParamStore};
pub use rng::{dropout_apply, RngState};

/// Uniform Glorot-style initialization for a `rows × cols` matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut RngState) -> DenseArray {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    DenseArray::from_vec(&[rows, cols], values).expect("positive extents")
}
