//! Standard LSTM cell (no peepholes).
//!
//! Gate pre-activations are stacked `[input, forget, candidate, output]` in
//! `z = Wx·x + Wh·h + b`, so `Wx` is `4H × D`, `Wh` is `4H × H`, `b` is `4H`.

use crate::error::{Error, Result};

use super::array::{matvec_acc, matvec_t_acc, outer_acc, sigmoid, DenseArray};
use super::params::{GradBuffer, ParamId};

#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub wx: &'a DenseArray,
    pub wh: &'a DenseArray,
    pub b: &'a DenseArray,
}

impl<'a> LstmWeights<'a> {
    pub fn hidden(&self) -> usize {
        self.wh.cols()
    }

    pub fn input(&self) -> usize {
        self.wx.cols()
    }

    fn check(&self, x: usize, h: usize, c: usize) -> Result<()> {
        let hd = self.hidden();
        let ok = self.wx.rows() == 4 * hd
            && self.wh.rows() == 4 * hd
            && self.b.len() == 4 * hd
            && x == self.input()
            && h == hd
            && c == hd;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "lstm step: x {} h {} c {} against Wx {:?} Wh {:?} b {:?}",
                x,
                h,
                c,
                self.wx.shape(),
                self.wh.shape(),
                self.b.shape()
            )))
        }
    }
}

/// Parameter ids of one LSTM cell inside a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmIds {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

/// Everything the backward pass of one step needs.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One forward step, returning `(h', c')`.
pub fn lstm_step(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w: &LstmWeights<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = lstm_step_cached(x, h, c, w)?;
    Ok((cache.h, cache.c))
}

pub fn lstm_step_cached(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w: &LstmWeights<'_>,
) -> Result<LstmCache> {
    w.check(x.len(), h.len(), c.len())?;
    let hd = w.hidden();
    let mut z = w.b.values().to_vec();
    matvec_acc(w.wx.values(), x.len(), x, &mut z);
    matvec_acc(w.wh.values(), hd, h, &mut z);

    let mut gates = z;
    for (k, v) in gates.iter_mut().enumerate() {
        *v = if k / hd == 2 { v.tanh() } else { sigmoid(*v) };
    }
    let mut c_new = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut h_new = vec![0.0; hd];
    for j in 0..hd {
        let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
        c_new[j] = f * c[j] + i * g;
        tanh_c[j] = c_new[j].tanh();
        h_new[j] = o * tanh_c[j];
    }
    Ok(LstmCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        c_prev: c.to_vec(),
        gates,
        c: c_new,
        tanh_c,
        h: h_new,
    })
}

/// Gradients flowing out of one step.
#[derive(Debug, Clone)]
pub struct LstmStepGrad {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Backward through one step given `dh` and `dc` arriving at `(h', c')`.
/// Weight gradients are added into `grads` under `ids`.
pub fn lstm_step_backward(
    cache: &LstmCache,
    w: &LstmWeights<'_>,
    ids: &LstmIds,
    dh: &[f64],
    dc: &[f64],
    grads: &mut GradBuffer,
) -> LstmStepGrad {
    let hd = w.hidden();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for j in 0..hd {
        let (i, f, cand, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
        let th = cache.tanh_c[j];
        let dct = dc[j] + dh[j] * o * (1.0 - th * th);
        dz[j] = dct * cand * i * (1.0 - i);
        dz[hd + j] = dct * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * hd + j] = dct * i * (1.0 - cand * cand);
        dz[3 * hd + j] = dh[j] * th * o * (1.0 - o);
        dc_prev[j] = dct * f;
    }
    outer_acc(grads.dense(ids.wx), &dz, &cache.x);
    outer_acc(grads.dense(ids.wh), &dz, &cache.h_prev);
    for (gb, d) in grads.dense(ids.b).iter_mut().zip(&dz) {
        *gb += d;
    }
    let mut dx = vec![0.0; cache.x.len()];
    matvec_t_acc(w.wx.values(), cache.x.len(), &dz, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    matvec_t_acc(w.wh.values(), hd, &dz, &mut dh_prev);
    LstmStepGrad {
        dx,
        dh_prev,
        dc_prev,
    }
}
