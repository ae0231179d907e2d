//! Prediction network: label embedding → uni-LSTM → linear layer. The row
//! `g_i` is read off the state after consuming `y₀..y_{i−1}` with `y₀ = <bos>`.

use crate::error::{Error, Result};
use crate::numerics::array::{axpy, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::lstm::{lstm_step_backward, lstm_step_cached};
use crate::numerics::{
    glorot, DenseArray, GradBuffer, LstmCache, LstmIds, LstmWeights, ParamId, ParamStore,
    RngState,
};

use super::config::EncoderConfig;
use super::transcription::{lstm_weights, register_lstm, resolve_lstm};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionIds {
    /// `(K + 1) × label_dim`; the last row embeds `<bos>`.
    pub label_emb: ParamId,
    pub lstm: LstmIds,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
}

impl PredictionIds {
    pub fn register(
        store: &mut ParamStore,
        config: &EncoderConfig,
        num_labels: usize,
        rng: &mut RngState,
    ) -> Result<Self> {
        let label_emb = store.insert("g.label_emb", glorot(num_labels + 1, config.label_dim, rng))?;
        let lstm = register_lstm(store, "g.lstm", config.label_dim, config.g_hidden, rng)?;
        let proj_w = store.insert("g.proj.w", glorot(num_labels, config.g_hidden, rng))?;
        let proj_b = store.insert("g.proj.b", DenseArray::zeros(&[num_labels]))?;
        Ok(PredictionIds {
            label_emb,
            lstm,
            proj_w,
            proj_b,
        })
    }

    pub fn resolve(store: &ParamStore, config: &EncoderConfig, num_labels: usize) -> Result<Self> {
        Ok(PredictionIds {
            label_emb: store.expect("g.label_emb", &[num_labels + 1, config.label_dim])?,
            lstm: resolve_lstm(store, "g.lstm", config.label_dim, config.g_hidden)?,
            proj_w: store.expect("g.proj.w", &[num_labels, config.g_hidden])?,
            proj_b: store.expect("g.proj.b", &[num_labels])?,
        })
    }
}

/// Recurrent state of the prediction network.
#[derive(Debug, Clone, PartialEq)]
pub struct GState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Read-only view of the prediction network over a parameter store.
#[derive(Clone, Copy)]
pub struct PredictionNet<'a> {
    store: &'a ParamStore,
    ids: &'a PredictionIds,
    weights: LstmWeights<'a>,
}

impl<'a> PredictionNet<'a> {
    pub fn new(store: &'a ParamStore, ids: &'a PredictionIds) -> Self {
        PredictionNet {
            store,
            ids,
            weights: lstm_weights(store, &ids.lstm),
        }
    }

    /// K, the number of predictable labels.
    pub fn num_labels(&self) -> usize {
        self.store.value(self.ids.proj_w).rows()
    }

    pub fn bos(&self) -> usize {
        self.num_labels()
    }

    pub fn zero_state(&self) -> GState {
        let h = self.weights.hidden();
        GState {
            h: vec![0.0; h],
            c: vec![0.0; h],
        }
    }

    fn embedding(&self, label: usize) -> Result<&'a [f64]> {
        let emb = self.store.value(self.ids.label_emb);
        if label >= emb.rows() {
            return Err(Error::InvalidArgument(format!(
                "label id {} out of range ({} with <bos>)",
                label,
                emb.rows()
            )));
        }
        Ok(emb.row(label))
    }

    /// Consume one label.
    pub fn advance(&self, state: &GState, label: usize) -> Result<GState> {
        let cache = self.advance_cached(state, label)?;
        Ok(GState {
            h: cache.h,
            c: cache.c,
        })
    }

    pub fn advance_cached(&self, state: &GState, label: usize) -> Result<LstmCache> {
        lstm_step_cached(self.embedding(label)?, &state.h, &state.c, &self.weights)
    }

    /// State after consuming `<bos>`; its scores give `g₁`.
    pub fn start(&self) -> Result<GState> {
        self.advance(&self.zero_state(), self.bos())
    }

    /// The K-dimensional score row read from a hidden vector.
    pub fn scores(&self, h: &[f64]) -> Vec<f64> {
        let mut out = self.store.value(self.ids.proj_b).values().to_vec();
        matvec_acc(self.store.value(self.ids.proj_w).values(), h.len(), h, &mut out);
        out
    }

    /// Backward of [`Self::scores`]; returns the gradient w.r.t. `h`.
    pub fn scores_backward(&self, h: &[f64], dg: &[f64], grads: &mut GradBuffer) -> Vec<f64> {
        outer_acc(grads.dense(self.ids.proj_w), dg, h);
        axpy(1.0, dg, grads.dense(self.ids.proj_b));
        let mut dh = vec![0.0; h.len()];
        matvec_t_acc(self.store.value(self.ids.proj_w).values(), h.len(), dg, &mut dh);
        dh
    }

    /// Backward of [`Self::advance_cached`] for the step that consumed `label`.
    /// Returns `(dh_prev, dc_prev)`.
    pub fn advance_backward(
        &self,
        cache: &LstmCache,
        label: usize,
        dh: &[f64],
        dc: &[f64],
        grads: &mut GradBuffer,
    ) -> (Vec<f64>, Vec<f64>) {
        let g = lstm_step_backward(cache, &self.weights, &self.ids.lstm, dh, dc, grads);
        axpy(1.0, &g.dx, grads.row(self.ids.label_emb, label));
        (g.dh_prev, g.dc_prev)
    }
}

#[derive(Debug, Clone)]
pub struct PredictionOutput {
    /// `n × K`, row `i` scores the label at position `i + 1`.
    pub g: DenseArray,
    /// State after consuming each prefix symbol.
    pub states: Vec<GState>,
}

/// Whole-sequence evaluation over `y₀..y_{n−1}` where `y₀` must be `<bos>`.
pub fn prediction_forward(
    store: &ParamStore,
    ids: &PredictionIds,
    prefix: &[usize],
) -> Result<PredictionOutput> {
    let net = PredictionNet::new(store, ids);
    if prefix.first() != Some(&net.bos()) {
        return Err(Error::InvalidArgument(
            "label prefix must start with <bos>".into(),
        ));
    }
    let k = net.num_labels();
    let mut g = DenseArray::zeros(&[prefix.len(), k]);
    let mut states = Vec::with_capacity(prefix.len());
    let mut state = net.zero_state();
    for (i, &label) in prefix.iter().enumerate() {
        if i > 0 && label >= k {
            return Err(Error::InvalidArgument(format!(
                "prefix position {} holds non-label id {}",
                i, label
            )));
        }
        state = net.advance(&state, label)?;
        g.row_mut(i).copy_from_slice(&net.scores(&state.h));
        states.push(state.clone());
    }
    Ok(PredictionOutput { g, states })
}
