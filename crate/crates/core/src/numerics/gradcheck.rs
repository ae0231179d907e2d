use crate::error::{Error, Result};

use super::params::{GradBuffer, ParamId, ParamStore};
use super::rng::RngState;

/// Result of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compare the analytic gradient produced by `loss` against central
/// differences `(L(θ+ε) − L(θ−ε)) / 2ε` on sampled coordinates.
///
/// `loss` must return the loss and add its gradient into the supplied buffer.
/// When `samples` covers every coordinate, all of them are checked.
pub fn grad_check<F>(
    mut loss: F,
    params: &mut ParamStore,
    epsilon: f64,
    samples: usize,
    rng: &mut RngState,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore, &mut GradBuffer) -> Result<f64>,
{
    let mut analytic = GradBuffer::for_store(params);
    let base = loss(params, &mut analytic)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss {}", base)));
    }
    let dense: Vec<Vec<f64>> = params.ids().map(|id| analytic.to_dense(id)).collect();

    let mut coords: Vec<(ParamId, usize)> = params
        .ids()
        .flat_map(|id| (0..params.value(id).len()).map(move |k| (id, k)))
        .collect();
    if samples < coords.len() {
        rng.shuffle(&mut coords);
        coords.truncate(samples);
    }

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: coords.len(),
    };
    let mut scratch = GradBuffer::for_store(params);
    for (id, k) in coords {
        let orig = params.value(id).values()[k];
        params.value_mut(id).values_mut()[k] = orig + epsilon;
        let plus = loss(params, &mut scratch);
        params.value_mut(id).values_mut()[k] = orig - epsilon;
        let minus = loss(params, &mut scratch);
        params.value_mut(id).values_mut()[k] = orig;
        let (plus, minus) = (plus?, minus?);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at perturbed {}[{}]",
                params.name(id),
                k
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = dense[id.0][k];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((params.name(id).to_string(), k));
        }
    }
    Ok(report)
}
