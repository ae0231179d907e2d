//! Finite-difference checks of every training loss on tiny random models.

use crate::encoders::{transcription_backward, EncodedSentence, EncoderConfig};
use crate::error::Result;
use crate::models::{
    early_update_set, set_nll, Model, ModelKind, Objective, PotentialDesign, SetScoring, VocabSizes,
};
use crate::numerics::{grad_check, GradBuffer, GradCheckReport, ParamStore, RngState};

const WORDS: usize = 6;
const CHARS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LinearChain,
    Rnnt,
    NcrftExact(PotentialDesign),
    /// Early-update objective with the beam membership computed once at the
    /// starting point and held fixed while parameters are perturbed.
    NcrftFrozenBeam(PotentialDesign, usize),
}

impl LossKind {
    pub fn label(&self) -> String {
        match self {
            LossKind::LinearChain => "linear-chain nll".into(),
            LossKind::Rnnt => "rnnt nll".into(),
            LossKind::NcrftExact(d) => format!("ncrft exact nll ({})", d),
            LossKind::NcrftFrozenBeam(d, w) => format!("ncrft early update ({}, beam {})", d, w),
        }
    }

    fn model_kind(&self) -> ModelKind {
        match self {
            LossKind::LinearChain => ModelKind::LinearChain,
            LossKind::Rnnt => ModelKind::Rnnt,
            _ => ModelKind::Ncrft,
        }
    }

    fn design(&self) -> PotentialDesign {
        match self {
            LossKind::NcrftExact(d) | LossKind::NcrftFrozenBeam(d, _) => *d,
            _ => PotentialDesign::LogSoftmax,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckCase {
    pub loss: LossKind,
    pub length: usize,
    pub labels: usize,
    pub hidden: usize,
    pub seed: u64,
}

/// A randomly initialized model with small encoders and non-zero biases.
pub fn tiny_model(kind: ModelKind, design: PotentialDesign, labels: usize, hidden: usize, seed: u64) -> Result<(Model, ParamStore)> {
    let config = EncoderConfig {
        word_dim: 3,
        char_dim: 2,
        char_filters: 3,
        char_width: 3,
        f_hidden: hidden,
        f_layers: 1,
        g_hidden: hidden,
        label_dim: 3,
        dropout: 0.0,
    };
    let sizes = VocabSizes {
        words: WORDS,
        chars: CHARS,
        labels,
    };
    let (model, mut store) = Model::init(kind, design, config, sizes, &mut RngState::new(seed))?;
    let mut rng = RngState::new(seed).derive(1);
    for (name, p) in store.iter_mut() {
        if name.ends_with(".b") || name.starts_with("crf.") {
            for v in p.value.values_mut() {
                *v += rng.uniform(-0.5, 0.5);
            }
        }
    }
    Ok((model, store))
}

pub fn tiny_sentence(n: usize, labels: usize, rng: &mut RngState) -> EncodedSentence {
    let words = (0..n).map(|_| rng.below(WORDS as u64) as usize).collect();
    let chars = (0..n)
        .map(|_| {
            let len = 1 + rng.below(3) as usize;
            (0..len).map(|_| rng.below(CHARS as u64) as usize).collect()
        })
        .collect();
    let gold = (0..n).map(|_| rng.below(labels as u64) as usize).collect();
    EncodedSentence {
        words,
        chars,
        labels: Some(gold),
    }
}

/// Check `samples` randomly chosen coordinates (all of them when `samples`
/// exceeds the parameter count) with step `epsilon`.
pub fn check_case(case: &GradCheckCase, epsilon: f64, samples: usize) -> Result<GradCheckReport> {
    let (model, mut store) = tiny_model(case.loss.model_kind(), case.loss.design(), case.labels, case.hidden, case.seed)?;
    let root = RngState::new(case.seed);
    let s = tiny_sentence(case.length, case.labels, &mut root.derive(2));
    let mut coords = root.derive(3);
    match case.loss {
        LossKind::NcrftFrozenBeam(design, width) => {
            let gold = s.gold()?.to_vec();
            let f = model.transcribe(&store, &s, None)?.scores;
            let set = early_update_set(&model.prediction_net(&store)?, &f, &gold, SetScoring::Global(design), width)?;
            let ids = model.prediction.clone().expect("transducer has a prediction network");
            grad_check(
                |p: &ParamStore, g: &mut GradBuffer| {
                    let tape = model.transcribe(p, &s, None)?;
                    let r = set_nll(p, &ids, &tape.scores, &set.gold, &set.others, SetScoring::Global(design), g)?;
                    transcription_backward(p, &model.transcription, &model.config, &tape, &r.df, g);
                    Ok(r.loss)
                },
                &mut store,
                epsilon,
                samples,
                &mut coords,
            )
        }
        _ => grad_check(
            |p: &ParamStore, g: &mut GradBuffer| {
                Ok(model
                    .sentence_loss(p, &s, Objective::Exact { cap: crate::models::EXACT_CAP }, None, g)?
                    .loss)
            },
            &mut store,
            epsilon,
            samples,
            &mut coords,
        ),
    }
}

/// The standard suite: every loss at `seeds` seeds on `n = 4, K = 3, hidden 4`.
pub fn standard_cases(seeds: std::ops::Range<u64>) -> Vec<GradCheckCase> {
    let losses = [
        LossKind::LinearChain,
        LossKind::Rnnt,
        LossKind::NcrftExact(PotentialDesign::Additive),
        LossKind::NcrftExact(PotentialDesign::LogSoftmax),
        LossKind::NcrftFrozenBeam(PotentialDesign::Additive, 2),
        LossKind::NcrftFrozenBeam(PotentialDesign::LogSoftmax, 2),
    ];
    losses
        .iter()
        .flat_map(|&loss| {
            seeds.clone().map(move |seed| GradCheckCase {
                loss,
                length: 4,
                labels: 3,
                hidden: 4,
                seed,
            })
        })
        .collect()
}
