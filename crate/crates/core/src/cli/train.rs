//! Mini-batch training with per-epoch dev evaluation and early stopping.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::Corpus;
use crate::encoders::{build_vocab, load_embeddings, EncodedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::models::{
    round_to_f32, Model, ModelCheckpoint, ModelKind, Objective, VocabSizes, EXACT_CAP,
};
use crate::numerics::{decayed_learning_rate, GradBuffer, OptimizerState, ParamStore, RngState};

use super::config::{NcrftObjective, RunConfig};
use super::evaluate::{read_corpus, score_corpus, RunDir};

// Independent rng streams under the run seed.
const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sentence training loss.
    pub train_loss: f64,
    /// Dev metric, or the training loss when no dev set is given.
    pub metric: f64,
    /// Sentences whose gold prefix fell out of the training beam.
    pub early_updates: usize,
    pub seconds: f64,
}

impl EpochLog {
    fn tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.3}\n",
            self.epoch, self.lr, self.train_loss, self.metric, self.early_updates, self.seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Best parameters, rounded to checkpoint precision.
    pub params: ParamStore,
    pub vocab: Vocabulary,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub test: Option<MetricsReport>,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint::new(&self.model, &self.params)
    }
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::Config(format!("no {} file given", what)))
}

fn labeled(corpus: &Corpus, vocab: &Vocabulary, what: &str) -> Result<Vec<EncodedSentence>> {
    let enc = vocab
        .encode_corpus(corpus)
        .map_err(|e| Error::Data(format!("{}: {}", what, e)))?;
    if enc.iter().any(|s| s.labels.is_none()) {
        return Err(Error::Data(format!("{} has sentences without tags", what)));
    }
    Ok(enc)
}

fn load_pretrained(config: &RunConfig, dir: &Path) -> Result<(Vocabulary, ParamStore, VocabSizes)> {
    let run = RunDir::open(dir)?;
    if run.checkpoint.kind != ModelKind::Rnnt {
        return Err(Error::Config(format!(
            "pretrained run {} holds a {} model, expected rnnt",
            dir.display(),
            run.checkpoint.kind
        )));
    }
    if run.checkpoint.config != config.encoder {
        return Err(Error::Config(format!(
            "pretrained encoder sizes {:?} differ from the configured {:?}",
            run.checkpoint.config, config.encoder
        )));
    }
    Ok((run.vocab, run.checkpoint.params, run.checkpoint.sizes))
}

fn apply_embeddings(model: &Model, params: &mut ParamStore, vocab: &Vocabulary, path: &Path) -> Result<usize> {
    let (dim, table) = load_embeddings(path)?;
    if dim != model.config.word_dim {
        return Err(Error::Config(format!(
            "embeddings in {} have {} dimensions, word_dim is {}",
            path.display(),
            dim,
            model.config.word_dim
        )));
    }
    let emb = params.value_mut(model.transcription.word_emb);
    let mut found = 0;
    for (i, w) in vocab.words().iter().enumerate() {
        let hit = table.get(w).or_else(|| table.get(&w.to_lowercase()));
        if let Some(v) = hit {
            emb.row_mut(i).copy_from_slice(v);
            found += 1;
        }
    }
    Ok(found)
}

fn improved(task_higher: bool, candidate: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) if task_higher => candidate > b,
        Some(b) => candidate < b,
    }
}

/// Train according to `config`. `on_epoch` sees every epoch as it finishes.
///
/// When `out_dir` is set it receives `config.txt`, `vocab.txt`, `metrics.tsv`
/// and the best-on-dev `model.ckpt`.
pub fn run_train(config: &RunConfig, on_epoch: &mut dyn FnMut(&EpochLog)) -> Result<TrainOutcome> {
    config.validate()?;
    let train_path = required(&config.train, "train")?;
    let train = read_corpus(&train_path, config)?;
    let dev = config.dev.as_ref().map(|p| read_corpus(p, config)).transpose()?;
    let test = config.test.as_ref().map(|p| read_corpus(p, config)).transpose()?;
    if let Some(p) = &config.embeddings {
        if !p.is_file() {
            return Err(Error::Config(format!("embeddings file {} not found", p.display())));
        }
    }

    let root = RngState::new(config.seed);
    let pretrained = match &config.pretrained {
        Some(dir) if config.model == ModelKind::Ncrft => Some(load_pretrained(config, dir)?),
        _ => None,
    };
    let vocab = match &pretrained {
        Some((v, _, _)) => v.clone(),
        None => build_vocab(&train, config.unk_max_freq)?,
    };
    let train_enc = labeled(&train, &vocab, "train")?;
    let dev_enc = dev.as_ref().map(|c| labeled(c, &vocab, "dev")).transpose()?;
    let test_enc = test.as_ref().map(|c| labeled(c, &vocab, "test")).transpose()?;

    let sizes = VocabSizes {
        words: vocab.num_words(),
        chars: vocab.num_chars(),
        labels: vocab.num_labels(),
    };
    let (model, mut params) = Model::init(
        config.model,
        config.design,
        config.encoder,
        sizes,
        &mut root.derive(INIT_STREAM),
    )?;
    match &pretrained {
        Some((_, src, src_sizes)) => {
            if *src_sizes != sizes {
                return Err(Error::Checkpoint(format!(
                    "pretrained sizes {:?} differ from {:?}",
                    src_sizes, sizes
                )));
            }
            let copied = params.copy_values_from(src)?;
            if copied != params.len() {
                return Err(Error::Checkpoint(format!(
                    "pretrained run supplied {} of {} parameters",
                    copied,
                    params.len()
                )));
            }
        }
        None => {
            if let Some(p) = &config.embeddings {
                apply_embeddings(&model, &mut params, &vocab, p)?;
            }
        }
    }

    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write(&dir.join("config.txt"), config.to_text())?;
        vocab.save(&dir.join("vocab.txt"))?;
        write(
            &dir.join("metrics.tsv"),
            "epoch\tlr\ttrain_loss\tmetric\tearly_updates\tseconds\n".to_string(),
        )?;
    }

    let objective = match config.objective {
        NcrftObjective::EarlyUpdate => Objective::EarlyUpdate { width: config.train_beam },
        NcrftObjective::Exact => Objective::Exact { cap: EXACT_CAP },
    };
    let lr0 = config.learning_rate();
    let mut opt = OptimizerState::new(config.optimizer_kind(), lr0)?;
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let higher = dev.is_some() && config.task.higher_is_better();
    let dropout_root = root.derive(DROPOUT_STREAM);

    for epoch in 0..config.max_epochs {
        let started = Instant::now();
        let lr = decayed_learning_rate(lr0, config.lr_decay, epoch);
        opt.set_learning_rate(lr);
        let mut order: Vec<usize> = (0..train_enc.len()).collect();
        if config.shuffle {
            root.derive(SHUFFLE_STREAM).derive(epoch as u64).shuffle(&mut order);
        }
        let epoch_dropout = dropout_root.derive(epoch as u64);
        let mut total = 0.0;
        let mut early_updates = 0;
        for batch in order.chunks(config.batch_size) {
            let results = config.execution.map(batch, |_, &i| {
                let mut grads = GradBuffer::for_store(&params);
                let mut rng = epoch_dropout.derive(i as u64);
                model
                    .sentence_loss(&params, &train_enc[i], objective, Some(&mut rng), &mut grads)
                    .map(|l| (l, grads))
            });
            params.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            // reduce in batch order so the sum does not depend on scheduling
            for r in results {
                let (l, grads) = r?;
                total += l.loss;
                early_updates += l.fell_out_at.is_some() as usize;
                params.accumulate(&grads, scale);
            }
            params.clip_grad_norm(config.clip);
            opt.step(&mut params)?;
        }
        let train_loss = total / train_enc.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("epoch {} training loss {}", epoch + 1, train_loss)));
        }
        let metric = match (&dev, &dev_enc) {
            (Some(c), Some(enc)) => {
                let report = score_corpus(&model, &params, &vocab, c, enc, config, config.decode_beam)?;
                report
                    .get(config.task.metric_name())
                    .expect("score_corpus reports the task metric")
            }
            _ => train_loss,
        };
        let log = EpochLog {
            epoch: epoch + 1,
            lr,
            train_loss,
            metric,
            early_updates,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        if let Some(dir) = &config.out_dir {
            append(&dir.join("metrics.tsv"), &log.tsv())?;
        }
        if improved(higher, metric, best.as_ref().map(|b| b.1)) {
            let mut snapshot = params.clone();
            round_to_f32(&mut snapshot);
            if let Some(dir) = &config.out_dir {
                ModelCheckpoint::new(&model, &snapshot).save(&dir.join("model.ckpt"))?;
            }
            best = Some((epoch + 1, metric, snapshot));
        }
        history.push(log);
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch + 1 - best_epoch >= config.patience {
            break;
        }
    }

    let (best_epoch, best_metric, params) = best.ok_or_else(|| Error::Empty("no epochs ran".into()))?;
    let test = match (&test, &test_enc) {
        (Some(c), Some(enc)) => {
            let report = score_corpus(&model, &params, &vocab, c, enc, config, config.decode_beam)?;
            if let Some(dir) = &config.out_dir {
                write(&dir.join("test_metrics.tsv"), report.machine_lines())?;
            }
            Some(report)
        }
        _ => None,
    };
    Ok(TrainOutcome {
        model,
        params,
        vocab,
        history,
        best_epoch,
        best_metric,
        test,
    })
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn append(path: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    f.write_all(line.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
