//! Loading run directories, scoring corpora and tagging files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{read_conll, Corpus, TagScheme};
use crate::encoders::{EncodedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{extract_entities, extract_entities_bio, mean_std, micro_f1, token_accuracy, MetricsReport};
use crate::models::{Model, ModelCheckpoint, TransitionMask, VocabSizes, EXACT_CAP};
use crate::numerics::ParamStore;

use super::config::{RunConfig, Task};

/// Read a column file as configured: an unset tag column means the last
/// column, absent when the file has a single column. BIO tags are
/// converted to BIOES when `bioes` is on.
pub fn read_corpus(path: &Path, config: &RunConfig) -> Result<Corpus> {
    let mut corpus = read_conll(path, config.token_col, config.tag_col)?;
    if config.tag_col.is_none() {
        let width = corpus.sentences[0].columns[0].len();
        if width > 1 && width - 1 != config.token_col {
            for s in &mut corpus.sentences {
                s.tags = s.columns.iter().map(|c| c[width - 1].clone()).collect();
            }
            let header = std::mem::take(&mut corpus.header);
            let source = corpus.source.take();
            corpus = Corpus::from_sentences(std::mem::take(&mut corpus.sentences));
            corpus.header = header;
            corpus.source = source;
        }
    }
    if config.bioes {
        corpus.to_bioes()?;
    }
    Ok(corpus)
}

/// The artifacts `train` leaves in its output directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub checkpoint: ModelCheckpoint,
}

impl RunDir {
    /// Accepts the directory itself or the `model.ckpt` inside it.
    pub fn open(path: &Path) -> Result<Self> {
        let dir = if path.is_file() {
            path.parent().unwrap_or(Path::new(".")).to_path_buf()
        } else {
            path.to_path_buf()
        };
        if !dir.is_dir() {
            return Err(Error::Data(format!("run directory {} not found", dir.display())));
        }
        let config = RunConfig::from_file(&dir.join("config.txt"))?;
        let vocab = Vocabulary::load(&dir.join("vocab.txt"))?;
        let checkpoint = ModelCheckpoint::load(&dir.join("model.ckpt"))?;
        let sizes = VocabSizes {
            words: vocab.num_words(),
            chars: vocab.num_chars(),
            labels: vocab.num_labels(),
        };
        if checkpoint.sizes != sizes {
            return Err(Error::Checkpoint(format!(
                "checkpoint sizes {:?} do not match vocabulary {:?}",
                checkpoint.sizes, sizes
            )));
        }
        Ok(RunDir {
            path: dir,
            config,
            vocab,
            checkpoint,
        })
    }

    pub fn model(&self) -> Result<Model> {
        self.checkpoint.model()
    }
}

/// BIOES constraints when requested and the label set has entity shapes.
pub fn decode_mask(vocab: &Vocabulary, constrained: bool) -> Option<TransitionMask> {
    if !constrained {
        return None;
    }
    Some(TransitionMask::from_labels(&vocab.labels()[..vocab.num_labels()]))
}

/// Decode every sentence and report the configured task metric, plus
/// token accuracy. For `nll` the exact per-sentence NLL is averaged.
pub fn score_corpus(
    model: &Model,
    params: &ParamStore,
    vocab: &Vocabulary,
    corpus: &Corpus,
    encoded: &[EncodedSentence],
    config: &RunConfig,
    beam: usize,
) -> Result<MetricsReport> {
    let mask = decode_mask(vocab, config.constrained);
    let decoded = config
        .execution
        .map(encoded, |_, s| model.decode(params, s, beam, mask.as_ref()));
    let decoded: Vec<Vec<usize>> = decoded.into_iter().collect::<Result<_>>()?;
    let mut gold_all = Vec::new();
    let mut pred_all = Vec::new();
    for (s, y) in encoded.iter().zip(&decoded) {
        gold_all.extend_from_slice(s.gold()?);
        pred_all.extend_from_slice(y);
    }
    let mut report = MetricsReport::new(&format!("{} model, {} sentences", model.kind, encoded.len()));
    report.push("sentences", encoded.len() as f64);
    report.push("tokens", gold_all.len() as f64);
    report.push("accuracy", token_accuracy(&gold_all, &pred_all)?);
    match config.task {
        Task::Accuracy => {}
        Task::F1 => {
            let extract = |tags: &[String]| match corpus.scheme {
                TagScheme::Bio => extract_entities_bio(tags),
                _ => extract_entities(tags),
            };
            let gold: Vec<_> = corpus.sentences.iter().map(|s| extract(&s.tags)).collect::<Result<_>>()?;
            let pred: Vec<_> = decoded
                .iter()
                .map(|y| extract(&vocab.decode_labels(y)))
                .collect::<Result<_>>()?;
            let prf = micro_f1(&gold, &pred)?;
            report.push("precision", prf.precision);
            report.push("recall", prf.recall);
            report.push("f1", prf.f1);
        }
        Task::Nll => {
            let nll = config.execution.map(encoded, |_, s| model.exact_nll(params, s, EXACT_CAP));
            let total: f64 = nll.into_iter().collect::<Result<Vec<_>>>()?.iter().sum();
            let mean = total / encoded.len() as f64;
            if !mean.is_finite() {
                return Err(Error::NonFinite(format!("dev nll {}", mean)));
            }
            report.push("nll", mean);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Overrides the decode beam stored with each run.
    pub beam: Option<usize>,
    pub constrained: Option<bool>,
    pub task: Option<Task>,
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub runs: Vec<MetricsReport>,
    /// `<metric>_mean` and `<metric>_std` over runs, when there are several.
    pub aggregate: Option<MetricsReport>,
}

pub fn eval_run(run: &RunDir, data: &Path, opts: &EvalOptions) -> Result<MetricsReport> {
    let mut config = run.config.clone();
    if let Some(c) = opts.constrained {
        config.constrained = c;
    }
    if let Some(t) = opts.task {
        config.task = t;
    }
    let corpus = read_corpus(data, &config)?;
    let encoded = run.vocab.encode_corpus(&corpus)?;
    if encoded.iter().any(|s| s.labels.is_none()) {
        return Err(Error::Data(format!("{} has no gold tags", data.display())));
    }
    let model = run.model()?;
    let beam = opts.beam.unwrap_or(config.decode_beam);
    let mut report = score_corpus(&model, &run.checkpoint.params, &run.vocab, &corpus, &encoded, &config, beam)?;
    report.title = format!("{} on {}: {}", run.path.display(), data.display(), report.title);
    Ok(report)
}

/// Mean and sample standard deviation of every metric shared by all reports.
pub fn aggregate(reports: &[MetricsReport]) -> Option<MetricsReport> {
    let first = reports.first()?;
    let mut out = MetricsReport::new(&format!("mean ± std over {} runs", reports.len()));
    for (name, _) in &first.entries {
        let values: Option<Vec<f64>> = reports.iter().map(|r| r.get(name)).collect();
        if let Some((m, s)) = values.as_deref().and_then(mean_std) {
            out.push(&format!("{}_mean", name), m);
            out.push(&format!("{}_std", name), s);
        }
    }
    Some(out)
}

pub fn run_eval(runs: &[PathBuf], data: &Path, opts: &EvalOptions) -> Result<EvalSummary> {
    if runs.is_empty() {
        return Err(Error::Config("no runs to evaluate".into()));
    }
    let reports = runs
        .iter()
        .map(|r| eval_run(&RunDir::open(r)?, data, opts))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = if reports.len() > 1 { aggregate(&reports) } else { None };
    Ok(EvalSummary {
        runs: reports,
        aggregate,
    })
}

/// Tag a column file. Every input line is copied; token lines gain a final
/// predicted-tag column. Header comments, `-DOCSTART-` lines and blank
/// lines pass through unchanged.
pub fn predict_text(run: &RunDir, text: &str, beam: Option<usize>, constrained: Option<bool>) -> Result<String> {
    let model = run.model()?;
    let params = &run.checkpoint.params;
    let beam = beam.unwrap_or(run.config.decode_beam);
    let mask = decode_mask(&run.vocab, constrained.unwrap_or(run.config.constrained));
    let col = run.config.token_col;

    let mut out = String::with_capacity(text.len() * 2);
    let mut pending: Vec<&str> = Vec::new();
    let flush = |pending: &mut Vec<&str>, out: &mut String| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let tokens = pending
            .iter()
            .map(|l| {
                l.split_whitespace()
                    .nth(col)
                    .map(str::to_string)
                    .ok_or_else(|| Error::Data(format!("line {:?} has no column {}", l, col)))
            })
            .collect::<Result<Vec<_>>>()?;
        let sentence = crate::data::Sentence::new(tokens, Vec::new());
        let enc = run.vocab.encode(&sentence)?;
        let tags = run.vocab.decode_labels(&model.decode(params, &enc, beam, mask.as_ref())?);
        for (line, tag) in pending.iter().zip(tags) {
            out.push_str(line);
            out.push(' ');
            out.push_str(&tag);
            out.push('\n');
        }
        pending.clear();
        Ok(())
    };
    let mut seen_token = false;
    let mut lines = text.split('\n').peekable();
    while let Some(raw) = lines.next() {
        let last = lines.peek().is_none();
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim();
        let passthrough = trimmed.is_empty()
            || trimmed.starts_with("-DOCSTART-")
            || (!seen_token && line.starts_with('#'));
        if passthrough {
            flush(&mut pending, &mut out)?;
            out.push_str(line);
            if !last {
                out.push('\n');
            }
        } else {
            seen_token = true;
            pending.push(line.trim_end());
            if last {
                flush(&mut pending, &mut out)?;
            }
        }
    }
    Ok(out)
}

pub fn run_predict(run: &Path, input: &Path, output: Option<&Path>, beam: Option<usize>) -> Result<String> {
    let run = RunDir::open(run)?;
    let text = fs::read_to_string(input).map_err(|e| Error::io(format!("reading {}", input.display()), e))?;
    let tagged = predict_text(&run, &text, beam, None)?;
    if let Some(p) = output {
        fs::write(p, &tagged).map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
    }
    Ok(tagged)
}
