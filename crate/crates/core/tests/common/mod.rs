#![allow(dead_code)]

use ncrft::encoders::{EncodedSentence, EncoderConfig, PredictionIds};
use ncrft::models::{Model, ModelKind, PotentialDesign, TransitionTable, VocabSizes};
use ncrft::numerics::{DenseArray, ParamStore, RngState};

pub fn tiny_config(hidden: usize) -> EncoderConfig {
    EncoderConfig {
        word_dim: 3,
        char_dim: 2,
        char_filters: 3,
        char_width: 3,
        f_hidden: hidden,
        f_layers: 1,
        g_hidden: hidden,
        label_dim: 3,
        dropout: 0.0,
    }
}

pub fn tiny_model(kind: ModelKind, design: PotentialDesign, k: usize, hidden: usize, seed: u64) -> (Model, ParamStore) {
    let sizes = VocabSizes {
        words: 6,
        chars: 5,
        labels: k,
    };
    let (m, mut s) = Model::init(kind, design, tiny_config(hidden), sizes, &mut RngState::new(seed)).unwrap();
    // non-zero biases so that no coordinate starts at a symmetric point
    let mut rng = RngState::new(seed ^ 0xA5A5);
    for (name, p) in s.iter_mut() {
        if name.ends_with(".b") || name.starts_with("crf.") {
            for v in p.value.values_mut() {
                *v += rng.uniform(-0.5, 0.5);
            }
        }
    }
    (m, s)
}

pub fn random_sentence(n: usize, k: usize, rng: &mut RngState) -> EncodedSentence {
    let words = (0..n).map(|_| rng.below(6) as usize).collect();
    let chars = (0..n)
        .map(|_| {
            let len = 1 + rng.below(3) as usize;
            (0..len).map(|_| rng.below(5) as usize).collect()
        })
        .collect();
    let labels = (0..n).map(|_| rng.below(k as u64) as usize).collect();
    EncodedSentence {
        words,
        chars,
        labels: Some(labels),
    }
}

pub fn random_scores(n: usize, k: usize, scale: f64, rng: &mut RngState) -> DenseArray {
    DenseArray::from_vec(&[n, k], (0..n * k).map(|_| rng.uniform(-scale, scale)).collect()).unwrap()
}

pub fn random_table(k: usize, scale: f64, rng: &mut RngState) -> TransitionTable {
    TransitionTable {
        trans: random_scores(k, k, scale, rng),
        begin: (0..k).map(|_| rng.uniform(-scale, scale)).collect(),
        end: (0..k).map(|_| rng.uniform(-scale, scale)).collect(),
    }
}

/// A prediction network alone, weights scaled up so `ψ` varies visibly.
pub fn random_prediction(k: usize, hidden: usize, seed: u64) -> (PredictionIds, ParamStore) {
    let config = EncoderConfig {
        g_hidden: hidden,
        label_dim: 3,
        ..EncoderConfig::default()
    };
    let mut store = ParamStore::new();
    let mut rng = RngState::new(seed);
    let ids = PredictionIds::register(&mut store, &config, k, &mut rng).unwrap();
    for (_, p) in store.iter_mut() {
        for v in p.value.values_mut() {
            *v = 2.0 * *v + rng.uniform(-0.3, 0.3);
        }
    }
    (ids, store)
}
