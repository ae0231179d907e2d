//! Character CNN: embed characters, zero-pad `(width − 1) / 2` positions on
//! each side, convolve, then max-pool each filter over positions.

use crate::error::{Error, Result};
use crate::numerics::array::{axpy, dot};
use crate::numerics::{GradBuffer, ParamId, ParamStore};

use super::config::EncoderConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharCnnIds {
    pub emb: ParamId,
    /// `filters × (width · char_dim)`
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone)]
pub struct CharCnnTape {
    chars: Vec<usize>,
    /// `(len + 2·pad) × char_dim`, pad rows are zero.
    padded: Vec<f64>,
    /// Winning window start per filter.
    argmax: Vec<usize>,
    pub output: Vec<f64>,
}

pub fn char_cnn_encode(
    store: &ParamStore,
    ids: &CharCnnIds,
    config: &EncoderConfig,
    chars: &[usize],
) -> Result<CharCnnTape> {
    if chars.is_empty() {
        return Err(Error::Empty("char CNN needs at least one character".into()));
    }
    let emb = store.value(ids.emb);
    let w = store.value(ids.w);
    let b = store.value(ids.b).values();
    let dim = config.char_dim;
    let pad = config.char_pad();
    let width = config.char_width;
    let rows = chars.len() + 2 * pad;
    let mut padded = vec![0.0; rows * dim];
    for (t, &c) in chars.iter().enumerate() {
        if c >= emb.rows() {
            return Err(Error::InvalidArgument(format!(
                "char id {} out of range ({} chars)",
                c,
                emb.rows()
            )));
        }
        padded[(t + pad) * dim..(t + pad + 1) * dim].copy_from_slice(emb.row(c));
    }
    let windows = rows + 1 - width;
    let span = width * dim;
    let mut output = vec![f64::NEG_INFINITY; config.char_filters];
    let mut argmax = vec![0; config.char_filters];
    for t in 0..windows {
        let window = &padded[t * dim..t * dim + span];
        for (f, out) in output.iter_mut().enumerate() {
            let v = dot(w.row(f), window) + b[f];
            if v > *out {
                *out = v;
                argmax[f] = t;
            }
        }
    }
    Ok(CharCnnTape {
        chars: chars.to_vec(),
        padded,
        argmax,
        output,
    })
}

pub fn char_cnn_backward(
    store: &ParamStore,
    ids: &CharCnnIds,
    config: &EncoderConfig,
    tape: &CharCnnTape,
    dout: &[f64],
    grads: &mut GradBuffer,
) {
    let w = store.value(ids.w);
    let dim = config.char_dim;
    let span = config.char_width * dim;
    let pad = config.char_pad();
    let mut dpadded = vec![0.0; tape.padded.len()];
    {
        let dw = grads.dense(ids.w);
        for (f, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let t = tape.argmax[f];
            axpy(d, &tape.padded[t * dim..t * dim + span], &mut dw[f * span..(f + 1) * span]);
            axpy(d, w.row(f), &mut dpadded[t * dim..t * dim + span]);
        }
    }
    for (db, &d) in grads.dense(ids.b).iter_mut().zip(dout) {
        *db += d;
    }
    for (t, &c) in tape.chars.iter().enumerate() {
        let src = &dpadded[(t + pad) * dim..(t + pad + 1) * dim];
        if src.iter().any(|&v| v != 0.0) {
            axpy(1.0, src, grads.row(ids.emb, c));
        }
    }
}
