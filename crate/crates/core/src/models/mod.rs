//! Model heads over the shared encoders, plus exhaustive oracles and
//! checkpoint serialization.

pub mod beam;
pub mod checkpoint;
pub mod linear_chain;
pub mod mask;
pub mod ncrft;
pub mod oracle;
pub mod rnnt;

use std::fmt;
use std::str::FromStr;

pub use beam::{
    beam_search, beam_search_decode, early_update_loss, early_update_set, Beam, BeamEntry,
    EarlyUpdate, EarlyUpdateSet,
};
pub use checkpoint::{round_to_f32, ModelCheckpoint};
pub use linear_chain::{lc_log_z, lc_nll_and_grad, lc_viterbi, CrfIds, TransitionTable};
pub use mask::TransitionMask;
pub use ncrft::{
    exact_log_z, ncrft_potentials, ncrft_sequence_potential, set_nll, PotentialDesign, SetScoring,
};
pub use oracle::{brute_force_oracle, enumerate_sequences, lc_brute_force, OracleResult};
pub use rnnt::{rnnt_nll, rnnt_step_log_probs};

use crate::encoders::{
    transcription_backward, transcription_forward, EncodedSentence, EncoderConfig,
    PredictionIds, PredictionNet, TranscriptionIds, TranscriptionTape,
};
use crate::error::{Error, Result};
use crate::numerics::array::axpy;
use crate::numerics::{DenseArray, GradBuffer, ParamStore, RngState};

use linear_chain::lc_viterbi_masked;
use oracle::DEFAULT_ORACLE_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LinearChain,
    Rnnt,
    Ncrft,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::LinearChain => 0,
            ModelKind::Rnnt => 1,
            ModelKind::Ncrft => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::LinearChain),
            1 => Ok(ModelKind::Rnnt),
            2 => Ok(ModelKind::Ncrft),
            t => Err(Error::Checkpoint(format!("unknown model kind tag {}", t))),
        }
    }

    fn uses_prediction(self) -> bool {
        self != ModelKind::LinearChain
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LinearChain => "linear-chain",
            ModelKind::Rnnt => "rnnt",
            ModelKind::Ncrft => "ncrft",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear-chain" | "lc" | "crf" => Ok(ModelKind::LinearChain),
            "rnnt" => Ok(ModelKind::Rnnt),
            "ncrft" => Ok(ModelKind::Ncrft),
            other => Err(Error::Config(format!("unknown model kind '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabSizes {
    pub words: usize,
    pub chars: usize,
    /// K, excluding `<bos>`.
    pub labels: usize,
}

/// Training objective for the globally normalized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Normalize over every label sequence; only for small `K^n`.
    Exact { cap: usize },
    /// Beam-approximated normalizer with early updates.
    EarlyUpdate { width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceLoss {
    pub loss: f64,
    /// Early-update step, when the gold prefix left the beam.
    pub fell_out_at: Option<usize>,
}

/// Parameter layout of one model; values live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub design: PotentialDesign,
    pub config: EncoderConfig,
    pub sizes: VocabSizes,
    pub transcription: TranscriptionIds,
    pub prediction: Option<PredictionIds>,
    pub crf: Option<CrfIds>,
}

impl Model {
    /// Fresh randomly initialized parameters.
    pub fn init(
        kind: ModelKind,
        design: PotentialDesign,
        config: EncoderConfig,
        sizes: VocabSizes,
        rng: &mut RngState,
    ) -> Result<(Model, ParamStore)> {
        if sizes.words == 0 || sizes.chars == 0 || sizes.labels == 0 {
            return Err(Error::Config(format!("empty vocabulary {:?}", sizes)));
        }
        let mut store = ParamStore::new();
        let k = sizes.labels;
        let transcription =
            TranscriptionIds::register(&mut store, &config, sizes.words, sizes.chars, k, rng)?;
        let prediction = if kind.uses_prediction() {
            Some(PredictionIds::register(&mut store, &config, k, rng)?)
        } else {
            None
        };
        let crf = if kind == ModelKind::LinearChain {
            Some(CrfIds::register(&mut store, k, rng)?)
        } else {
            None
        };
        let model = Model {
            kind,
            design,
            config,
            sizes,
            transcription,
            prediction,
            crf,
        };
        Ok((model, store))
    }

    /// Bind to an existing store, checking that every parameter is present
    /// with the expected shape and nothing else is.
    pub fn bind(
        kind: ModelKind,
        design: PotentialDesign,
        config: EncoderConfig,
        sizes: VocabSizes,
        store: &ParamStore,
    ) -> Result<Model> {
        let k = sizes.labels;
        let transcription = TranscriptionIds::resolve(store, &config, sizes.words, sizes.chars, k)?;
        let prediction = if kind.uses_prediction() {
            Some(PredictionIds::resolve(store, &config, k)?)
        } else {
            None
        };
        let crf = if kind == ModelKind::LinearChain {
            Some(CrfIds::resolve(store, k)?)
        } else {
            None
        };
        let model = Model {
            kind,
            design,
            config,
            sizes,
            transcription,
            prediction,
            crf,
        };
        let expected = model.param_count();
        if store.len() != expected {
            return Err(Error::Checkpoint(format!(
                "store holds {} parameters, a {} model has {}",
                store.len(),
                kind,
                expected
            )));
        }
        Ok(model)
    }

    fn param_count(&self) -> usize {
        let f = 4 + 2 + 6 * self.transcription.layers.len();
        let g = if self.prediction.is_some() { 6 } else { 0 };
        let c = if self.crf.is_some() { 3 } else { 0 };
        f + g + c
    }

    pub fn num_labels(&self) -> usize {
        self.sizes.labels
    }

    fn prediction_ids(&self) -> Result<&PredictionIds> {
        self.prediction
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} model has no prediction network", self.kind)))
    }

    pub fn prediction_net<'a>(&'a self, store: &'a ParamStore) -> Result<PredictionNet<'a>> {
        Ok(PredictionNet::new(store, self.prediction_ids()?))
    }

    pub fn transitions(&self, store: &ParamStore) -> Result<TransitionTable> {
        self.crf
            .as_ref()
            .map(|c| c.table(store))
            .ok_or_else(|| Error::InvalidArgument(format!("{} model has no transition table", self.kind)))
    }

    /// Transcription scores `f` for a sentence (with tape for backward).
    pub fn transcribe(
        &self,
        store: &ParamStore,
        sentence: &EncodedSentence,
        dropout: Option<&mut RngState>,
    ) -> Result<TranscriptionTape> {
        let dropout = if self.config.dropout > 0.0 { dropout } else { None };
        transcription_forward(store, &self.transcription, &self.config, sentence, dropout)
    }

    /// Loss of one labeled sentence; gradients are added to `grads`.
    pub fn sentence_loss(
        &self,
        store: &ParamStore,
        sentence: &EncodedSentence,
        objective: Objective,
        dropout: Option<&mut RngState>,
        grads: &mut GradBuffer,
    ) -> Result<SentenceLoss> {
        let gold = sentence.gold()?;
        let tape = self.transcribe(store, sentence, dropout)?;
        let f = &tape.scores;
        let (loss, df, fell_out_at) = match self.kind {
            ModelKind::LinearChain => {
                let ids = self.crf.as_ref().expect("linear-chain ids");
                let g = lc_nll_and_grad(f, &ids.table(store), gold)?;
                axpy(1.0, g.table.trans.values(), grads.dense(ids.trans));
                axpy(1.0, &g.table.begin, grads.dense(ids.begin));
                axpy(1.0, &g.table.end, grads.dense(ids.end));
                (g.loss, g.df, None)
            }
            ModelKind::Rnnt => {
                let r = rnnt_nll(store, self.prediction_ids()?, f, gold, grads)?;
                (r.loss, r.df, None)
            }
            ModelKind::Ncrft => {
                let ids = self.prediction_ids()?;
                match objective {
                    Objective::Exact { cap } => {
                        ncrft::check_cap(f.rows(), f.cols(), cap)?;
                        let others: Vec<Vec<usize>> =
                            enumerate_sequences(f.rows(), f.cols()).collect();
                        let r = set_nll(store, ids, f, gold, &others, SetScoring::Global(self.design), grads)?;
                        (r.loss, r.df, None)
                    }
                    Objective::EarlyUpdate { width } => {
                        let r = early_update_loss(store, ids, f, gold, self.design, width, grads)?;
                        (r.loss, r.df, r.set.fell_out_at)
                    }
                }
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("sentence loss {}", loss)));
        }
        transcription_backward(store, &self.transcription, &self.config, &tape, &df, grads);
        Ok(SentenceLoss { loss, fell_out_at })
    }

    /// Exact `−log p(gold | x)` without gradients. For the globally
    /// normalized model this enumerates all `K^n` sequences.
    pub fn exact_nll(&self, store: &ParamStore, sentence: &EncodedSentence, cap: usize) -> Result<f64> {
        let gold = sentence.gold()?;
        let f = self.transcribe(store, sentence, None)?.scores;
        match self.kind {
            ModelKind::LinearChain => {
                let t = self.transitions(store)?;
                Ok(lc_log_z(&f, &t)? - t.sequence_score(&f, gold))
            }
            ModelKind::Rnnt => {
                let mut scratch = GradBuffer::for_store(store);
                Ok(rnnt_nll(store, self.prediction_ids()?, &f, gold, &mut scratch)?.loss)
            }
            ModelKind::Ncrft => {
                let ids = self.prediction_ids()?;
                let lz = exact_log_z(store, ids, &f, self.design, cap)?;
                Ok(lz - ncrft_sequence_potential(store, ids, &f, gold, self.design)?)
            }
        }
    }

    /// Predicted label ids. `width` is the beam width for the transducers.
    pub fn decode(
        &self,
        store: &ParamStore,
        sentence: &EncodedSentence,
        width: usize,
        mask: Option<&TransitionMask>,
    ) -> Result<Vec<usize>> {
        let f = self.transcribe(store, sentence, None)?.scores;
        self.decode_scores(store, &f, width, mask)
    }

    pub fn decode_scores(
        &self,
        store: &ParamStore,
        f: &DenseArray,
        width: usize,
        mask: Option<&TransitionMask>,
    ) -> Result<Vec<usize>> {
        let y = match self.kind {
            ModelKind::LinearChain => lc_viterbi_masked(f, &self.transitions(store)?, mask)?.0,
            ModelKind::Rnnt => {
                beam_search_decode(&self.prediction_net(store)?, f, SetScoring::Local, width, mask)?.0
            }
            ModelKind::Ncrft => {
                let net = self.prediction_net(store)?;
                beam_search_decode(&net, f, SetScoring::Global(self.design), width, mask)?.0
            }
        };
        Ok(y)
    }
}

/// Default enumeration ceiling for [`Model::exact_nll`].
pub const EXACT_CAP: usize = DEFAULT_ORACLE_CAP;
