//! Transcription network: token embeddings → bi-LSTM → linear layer giving
//! one K-dimensional score row per token.

use crate::error::{Error, Result};
use crate::numerics::array::{axpy, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::lstm::{lstm_step_backward, lstm_step_cached};
use crate::numerics::rng::dropout_mask;
use crate::numerics::{
    glorot, DenseArray, GradBuffer, LstmCache, LstmIds, LstmWeights, ParamId, ParamStore,
    RngState,
};

use super::char_cnn::{char_cnn_backward, char_cnn_encode, CharCnnIds, CharCnnTape};
use super::config::EncoderConfig;
use super::vocab::EncodedSentence;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptionIds {
    pub word_emb: ParamId,
    pub char_cnn: CharCnnIds,
    /// `(forward, backward)` cells per layer.
    pub layers: Vec<(LstmIds, LstmIds)>,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
}

/// Register an LSTM cell under `prefix.{wx,wh,b}` with Glorot matrices and
/// forget-gate bias 1.
pub(crate) fn register_lstm(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    rng: &mut RngState,
) -> Result<LstmIds> {
    let wx = store.insert(&format!("{}.wx", prefix), glorot(4 * hidden, input, rng))?;
    let wh = store.insert(&format!("{}.wh", prefix), glorot(4 * hidden, hidden, rng))?;
    let mut bias = DenseArray::zeros(&[4 * hidden]);
    bias.values_mut()[hidden..2 * hidden].fill(1.0);
    let b = store.insert(&format!("{}.b", prefix), bias)?;
    Ok(LstmIds { wx, wh, b })
}

pub(crate) fn resolve_lstm(
    store: &ParamStore,
    prefix: &str,
    input: usize,
    hidden: usize,
) -> Result<LstmIds> {
    Ok(LstmIds {
        wx: store.expect(&format!("{}.wx", prefix), &[4 * hidden, input])?,
        wh: store.expect(&format!("{}.wh", prefix), &[4 * hidden, hidden])?,
        b: store.expect(&format!("{}.b", prefix), &[4 * hidden])?,
    })
}

pub(crate) fn lstm_weights<'a>(store: &'a ParamStore, ids: &LstmIds) -> LstmWeights<'a> {
    LstmWeights {
        wx: store.value(ids.wx),
        wh: store.value(ids.wh),
        b: store.value(ids.b),
    }
}

impl TranscriptionIds {
    pub fn register(
        store: &mut ParamStore,
        config: &EncoderConfig,
        num_words: usize,
        num_chars: usize,
        num_labels: usize,
        rng: &mut RngState,
    ) -> Result<Self> {
        config.validate()?;
        let word_emb = store.insert("word_emb", glorot(num_words, config.word_dim, rng))?;
        let char_cnn = CharCnnIds {
            emb: store.insert("char_emb", glorot(num_chars, config.char_dim, rng))?,
            w: store.insert(
                "char_cnn.w",
                glorot(config.char_filters, config.char_width * config.char_dim, rng),
            )?,
            b: store.insert("char_cnn.b", DenseArray::zeros(&[config.char_filters]))?,
        };
        let mut layers = Vec::with_capacity(config.f_layers);
        for l in 0..config.f_layers {
            let input = if l == 0 {
                config.token_dim()
            } else {
                2 * config.f_hidden
            };
            let fwd = register_lstm(store, &format!("f.l{}.fwd", l), input, config.f_hidden, rng)?;
            let bwd = register_lstm(store, &format!("f.l{}.bwd", l), input, config.f_hidden, rng)?;
            layers.push((fwd, bwd));
        }
        let proj_w = store.insert("f.proj.w", glorot(num_labels, 2 * config.f_hidden, rng))?;
        let proj_b = store.insert("f.proj.b", DenseArray::zeros(&[num_labels]))?;
        Ok(TranscriptionIds {
            word_emb,
            char_cnn,
            layers,
            proj_w,
            proj_b,
        })
    }

    pub fn resolve(
        store: &ParamStore,
        config: &EncoderConfig,
        num_words: usize,
        num_chars: usize,
        num_labels: usize,
    ) -> Result<Self> {
        config.validate()?;
        let layers = (0..config.f_layers)
            .map(|l| {
                let input = if l == 0 {
                    config.token_dim()
                } else {
                    2 * config.f_hidden
                };
                Ok((
                    resolve_lstm(store, &format!("f.l{}.fwd", l), input, config.f_hidden)?,
                    resolve_lstm(store, &format!("f.l{}.bwd", l), input, config.f_hidden)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TranscriptionIds {
            word_emb: store.expect("word_emb", &[num_words, config.word_dim])?,
            char_cnn: CharCnnIds {
                emb: store.expect("char_emb", &[num_chars, config.char_dim])?,
                w: store.expect(
                    "char_cnn.w",
                    &[config.char_filters, config.char_width * config.char_dim],
                )?,
                b: store.expect("char_cnn.b", &[config.char_filters])?,
            },
            layers,
            proj_w: store.expect("f.proj.w", &[num_labels, 2 * config.f_hidden])?,
            proj_b: store.expect("f.proj.b", &[num_labels])?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmbedTape {
    words: Vec<usize>,
    chars: Vec<CharCnnTape>,
    mask: Option<Vec<f64>>,
    /// `n × (word_dim + char_filters)`, after dropout.
    pub output: DenseArray,
}

/// Concatenate word embedding rows with char-CNN features; dropout when
/// `dropout` carries an rng.
pub fn embed_tokens(
    store: &ParamStore,
    ids: &TranscriptionIds,
    config: &EncoderConfig,
    sentence: &EncodedSentence,
    dropout: Option<&mut RngState>,
) -> Result<EmbedTape> {
    let n = sentence.len();
    if n == 0 || sentence.chars.len() != n {
        return Err(Error::Shape(format!(
            "sentence with {} words and {} char lists",
            n,
            sentence.chars.len()
        )));
    }
    let emb = store.value(ids.word_emb);
    let width = config.token_dim();
    let mut out = DenseArray::zeros(&[n, width]);
    let mut chars = Vec::with_capacity(n);
    for (i, (&w, cs)) in sentence.words.iter().zip(&sentence.chars).enumerate() {
        if w >= emb.rows() {
            return Err(Error::InvalidArgument(format!(
                "word id {} out of range ({} words)",
                w,
                emb.rows()
            )));
        }
        let tape = char_cnn_encode(store, &ids.char_cnn, config, cs)?;
        let row = out.row_mut(i);
        row[..config.word_dim].copy_from_slice(emb.row(w));
        row[config.word_dim..].copy_from_slice(&tape.output);
        chars.push(tape);
    }
    let mask = match dropout {
        Some(rng) => dropout_mask(out.len(), config.dropout, rng, true)?,
        None => None,
    };
    if let Some(m) = &mask {
        out.values_mut().iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
    Ok(EmbedTape {
        words: sentence.words.clone(),
        chars,
        mask,
        output: out,
    })
}

#[derive(Debug, Clone)]
struct BiLstmTape {
    fwd: Vec<LstmCache>,
    bwd: Vec<LstmCache>,
    input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct TranscriptionTape {
    pub embed: Option<EmbedTape>,
    layers: Vec<BiLstmTape>,
    out_mask: Option<Vec<f64>>,
    /// Input of the projection, `n × 2H`.
    top: DenseArray,
    /// Transcription scores `f`, `n × K`.
    pub scores: DenseArray,
}

/// Full transcription pass over an encoded sentence.
pub fn transcription_forward(
    store: &ParamStore,
    ids: &TranscriptionIds,
    config: &EncoderConfig,
    sentence: &EncodedSentence,
    mut dropout: Option<&mut RngState>,
) -> Result<TranscriptionTape> {
    let embed = embed_tokens(store, ids, config, sentence, dropout.as_deref_mut())?;
    let mut tape = transcription_forward_embedded(store, ids, config, &embed.output, dropout)?;
    tape.embed = Some(embed);
    Ok(tape)
}

/// Transcription pass starting from already-embedded tokens (`n × D`).
pub fn transcription_forward_embedded(
    store: &ParamStore,
    ids: &TranscriptionIds,
    config: &EncoderConfig,
    embedded: &DenseArray,
    dropout: Option<&mut RngState>,
) -> Result<TranscriptionTape> {
    let n = embedded.rows();
    if n == 0 {
        return Err(Error::Empty("transcription of an empty sentence".into()));
    }
    let hd = config.f_hidden;
    let mut input = embedded.clone();
    let mut layers = Vec::with_capacity(ids.layers.len());
    for (fwd_ids, bwd_ids) in &ids.layers {
        let fw = lstm_weights(store, fwd_ids);
        let bw = lstm_weights(store, bwd_ids);
        if input.cols() != fw.input() {
            return Err(Error::Shape(format!(
                "bi-LSTM input width {} vs weights {}",
                input.cols(),
                fw.input()
            )));
        }
        let mut out = DenseArray::zeros(&[n, 2 * hd]);
        let mut fwd = Vec::with_capacity(n);
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for t in 0..n {
            let cache = lstm_step_cached(input.row(t), &h, &c, &fw)?;
            out.row_mut(t)[..hd].copy_from_slice(&cache.h);
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            fwd.push(cache);
        }
        // bwd[k] is the step at position n - 1 - k
        let mut bwd = Vec::with_capacity(n);
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for t in (0..n).rev() {
            let cache = lstm_step_cached(input.row(t), &h, &c, &bw)?;
            out.row_mut(t)[hd..].copy_from_slice(&cache.h);
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            bwd.push(cache);
        }
        layers.push(BiLstmTape {
            fwd,
            bwd,
            input_dim: input.cols(),
        });
        input = out;
    }
    let out_mask = match dropout {
        Some(rng) => dropout_mask(input.len(), config.dropout, rng, true)?,
        None => None,
    };
    if let Some(m) = &out_mask {
        input.values_mut().iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
    let pw = store.value(ids.proj_w);
    let pb = store.value(ids.proj_b).values();
    let k = pw.rows();
    let mut scores = DenseArray::zeros(&[n, k]);
    for t in 0..n {
        let row = scores.row_mut(t);
        row.copy_from_slice(pb);
        matvec_acc(pw.values(), 2 * hd, input.row(t), row);
    }
    Ok(TranscriptionTape {
        embed: None,
        layers,
        out_mask,
        top: input,
        scores,
    })
}

/// Backpropagate `d_scores` (`n × K`) through the transcription pass.
/// Returns the gradient with respect to the embedded input.
pub fn transcription_backward(
    store: &ParamStore,
    ids: &TranscriptionIds,
    config: &EncoderConfig,
    tape: &TranscriptionTape,
    d_scores: &DenseArray,
    grads: &mut GradBuffer,
) -> DenseArray {
    let n = tape.scores.rows();
    let hd = config.f_hidden;
    let pw = store.value(ids.proj_w);
    let mut d_top = DenseArray::zeros(&[n, 2 * hd]);
    for t in 0..n {
        let ds = d_scores.row(t);
        outer_acc(grads.dense(ids.proj_w), ds, tape.top.row(t));
        axpy(1.0, ds, grads.dense(ids.proj_b));
        matvec_t_acc(pw.values(), 2 * hd, ds, d_top.row_mut(t));
    }
    if let Some(m) = &tape.out_mask {
        d_top.values_mut().iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }

    let mut d_out = d_top;
    for (layer, (fwd_ids, bwd_ids)) in tape.layers.iter().zip(&ids.layers).rev() {
        let fw = lstm_weights(store, fwd_ids);
        let bw = lstm_weights(store, bwd_ids);
        let mut d_in = DenseArray::zeros(&[n, layer.input_dim]);
        let (mut dh, mut dc) = (vec![0.0; hd], vec![0.0; hd]);
        for t in (0..n).rev() {
            axpy(1.0, &d_out.row(t)[..hd], &mut dh);
            let g = lstm_step_backward(&layer.fwd[t], &fw, fwd_ids, &dh, &dc, grads);
            axpy(1.0, &g.dx, d_in.row_mut(t));
            dh = g.dh_prev;
            dc = g.dc_prev;
        }
        let (mut dh, mut dc) = (vec![0.0; hd], vec![0.0; hd]);
        for t in 0..n {
            axpy(1.0, &d_out.row(t)[hd..], &mut dh);
            let g = lstm_step_backward(&layer.bwd[n - 1 - t], &bw, bwd_ids, &dh, &dc, grads);
            axpy(1.0, &g.dx, d_in.row_mut(t));
            dh = g.dh_prev;
            dc = g.dc_prev;
        }
        d_out = d_in;
    }

    if let Some(embed) = &tape.embed {
        embed_backward(store, ids, config, embed, &d_out, grads);
    }
    d_out
}

fn embed_backward(
    store: &ParamStore,
    ids: &TranscriptionIds,
    config: &EncoderConfig,
    tape: &EmbedTape,
    d_embedded: &DenseArray,
    grads: &mut GradBuffer,
) {
    let mut d = d_embedded.clone();
    if let Some(m) = &tape.mask {
        d.values_mut().iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
    for (t, (&w, ctape)) in tape.words.iter().zip(&tape.chars).enumerate() {
        let row = d.row(t);
        axpy(1.0, &row[..config.word_dim], grads.row(ids.word_emb, w));
        char_cnn_backward(store, &ids.char_cnn, config, ctape, &row[config.word_dim..], grads);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            word_dim: 3,
            char_dim: 2,
            char_filters: 2,
            char_width: 3,
            f_hidden: 3,
            f_layers: 1,
            g_hidden: 3,
            label_dim: 2,
            dropout: 0.5,
        }
    }

    fn sentence() -> EncodedSentence {
        EncodedSentence {
            words: vec![1, 2, 1],
            chars: vec![vec![1, 2], vec![3], vec![1, 2]],
            labels: None,
        }
    }

    #[test]
    fn default_sized_layers() {
        let c = EncoderConfig::default();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 5, 4, 3, &mut RngState::new(0)).unwrap();
        assert_eq!(s.value(ids.proj_w).shape(), &[3, 400]);
        let sent = EncodedSentence {
            words: vec![1],
            chars: vec![vec![1]],
            labels: None,
        };
        let e = embed_tokens(&s, &ids, &c, &sent, None).unwrap();
        assert_eq!(e.output.shape(), &[1, 130]);
    }

    #[test]
    fn zero_parameters_give_zero_scores() {
        let c = tiny();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 4, 5, 3, &mut RngState::new(0)).unwrap();
        for (_, p) in s.iter_mut() {
            p.value.fill(0.0);
        }
        let e = embed_tokens(&s, &ids, &c, &sentence(), None).unwrap();
        assert!(e.output.values().iter().all(|&v| v == 0.0));
        let tape = transcription_forward(&s, &ids, &c, &sentence(), None).unwrap();
        assert!(tape.scores.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_token_gives_identical_rows() {
        let c = tiny();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 4, 5, 3, &mut RngState::new(4)).unwrap();
        let e = embed_tokens(&s, &ids, &c, &sentence(), None).unwrap();
        assert_eq!(e.output.row(0), e.output.row(2));
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let c = tiny();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 4, 5, 3, &mut RngState::new(0)).unwrap();
        let mut bad = sentence();
        bad.words[1] = 4;
        assert!(embed_tokens(&s, &ids, &c, &bad, None).is_err());
    }

    #[test]
    fn reversal_with_swapped_directions() {
        let c = tiny();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 4, 5, 3, &mut RngState::new(9)).unwrap();
        let emb = embed_tokens(&s, &ids, &c, &sentence(), None).unwrap().output;
        let f = transcription_forward_embedded(&s, &ids, &c, &emb, None).unwrap().scores;

        // Swap the forward/backward cells and the two halves of the projection.
        let mut t = s.clone();
        let (fw, bw) = ids.layers[0];
        for (a, b) in [(fw.wx, bw.wx), (fw.wh, bw.wh), (fw.b, bw.b)] {
            let va = s.value(a).clone();
            *t.value_mut(a) = s.value(b).clone();
            *t.value_mut(b) = va;
        }
        let h = c.f_hidden;
        let pw = t.value_mut(ids.proj_w);
        for r in 0..pw.rows() {
            let row = pw.row_mut(r);
            let (left, right) = row.split_at_mut(h);
            left.swap_with_slice(right);
        }
        let n = emb.rows();
        let mut rev = DenseArray::zeros(emb.shape());
        for i in 0..n {
            rev.row_mut(i).copy_from_slice(emb.row(n - 1 - i));
        }
        let g = transcription_forward_embedded(&t, &ids, &c, &rev, None).unwrap().scores;
        for i in 0..n {
            for (a, b) in f.row(i).iter().zip(g.row(n - 1 - i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_only_when_rng_given() {
        let c = tiny();
        let mut s = ParamStore::new();
        let ids = TranscriptionIds::register(&mut s, &c, 4, 5, 3, &mut RngState::new(1)).unwrap();
        let a = transcription_forward(&s, &ids, &c, &sentence(), None).unwrap().scores;
        let b = transcription_forward(&s, &ids, &c, &sentence(), None).unwrap().scores;
        assert_eq!(a, b);
        let d = transcription_forward(&s, &ids, &c, &sentence(), Some(&mut RngState::new(2)))
            .unwrap()
            .scores;
        assert_ne!(a, d);
    }
}
