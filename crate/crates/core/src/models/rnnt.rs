//! Locally normalized transducer: `p(y_i | y_{0:i−1}, x) = softmax(f_i + g_i)`.

use crate::encoders::PredictionIds;
use crate::error::{Error, Result};
use crate::numerics::array::log_softmax;
use crate::numerics::{DenseArray, GradBuffer, ParamStore};

use super::ncrft::{set_nll, SetNll, SetScoring};

pub fn rnnt_step_log_probs(f_i: &[f64], g_i: &[f64]) -> Result<Vec<f64>> {
    if f_i.len() != g_i.len() || f_i.is_empty() {
        return Err(Error::Shape(format!(
            "score rows of length {} and {}",
            f_i.len(),
            g_i.len()
        )));
    }
    let z: Vec<f64> = f_i.iter().zip(g_i).map(|(a, b)| a + b).collect();
    Ok(log_softmax(&z))
}

/// Teacher-forced `−log p(gold | x)`. Prediction-network gradients go to
/// `grads`; the gradient for `f` is returned.
pub fn rnnt_nll(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    gold: &[usize],
    grads: &mut GradBuffer,
) -> Result<SetNll> {
    if gold.len() != f.rows() {
        return Err(Error::InvalidArgument(format!(
            "gold length {} for {} positions",
            gold.len(),
            f.rows()
        )));
    }
    set_nll(store, ids, f, gold, &[], SetScoring::Local, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        let lp = rnnt_step_log_probs(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        for v in lp {
            assert!((v - 0.5f64.ln()).abs() < 1e-15);
        }
        assert_eq!(rnnt_step_log_probs(&[2.5], &[-1.0]).unwrap(), vec![0.0]);
        let lp = rnnt_step_log_probs(&[0.2, 0.1, 0.4], &[0.3, 0.4, 0.1]).unwrap();
        for v in lp {
            assert!((v + 3f64.ln()).abs() < 1e-15);
        }
        assert!(rnnt_step_log_probs(&[1.0], &[1.0, 2.0]).is_err());
    }
}
