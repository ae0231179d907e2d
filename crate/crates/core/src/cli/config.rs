//! Run configuration: a line-oriented `key = value` file, overridable key by
//! key from the command line, and written back next to every checkpoint.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::models::{ModelKind, PotentialDesign};
use crate::numerics::OptimizerKind;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Accuracy,
    F1,
    /// Mean exact per-sentence negative log-likelihood (small label spaces).
    Nll,
}

impl Task {
    pub fn higher_is_better(self) -> bool {
        self != Task::Nll
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Accuracy => "accuracy",
            Task::F1 => "f1",
            Task::Nll => "nll",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.metric_name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Task::Accuracy),
            "f1" => Ok(Task::F1),
            "nll" => Ok(Task::Nll),
            other => Err(Error::Config(format!("unknown task '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerName {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerName::Sgd => "sgd",
            OptimizerName::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerName::Sgd),
            "adam" => Ok(OptimizerName::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcrftObjective {
    EarlyUpdate,
    Exact,
}

impl fmt::Display for NcrftObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NcrftObjective::EarlyUpdate => "early-update",
            NcrftObjective::Exact => "exact",
        })
    }
}

impl FromStr for NcrftObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early-update" => Ok(NcrftObjective::EarlyUpdate),
            "exact" => Ok(NcrftObjective::Exact),
            other => Err(Error::Config(format!("unknown objective '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub design: PotentialDesign,
    pub encoder: EncoderConfig,
    pub optimizer: OptimizerName,
    /// Unset means 0.01, or 5e-3 for the transducer CRF.
    pub lr: Option<f64>,
    pub momentum: f64,
    pub lr_decay: f64,
    pub clip: f64,
    pub train_beam: usize,
    pub decode_beam: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub task: Task,
    pub objective: NcrftObjective,
    pub token_col: usize,
    /// Unset means the last column.
    pub tag_col: Option<usize>,
    pub unk_max_freq: usize,
    pub bioes: bool,
    pub constrained: bool,
    pub shuffle: bool,
    pub execution: Execution,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Run directory of a trained transducer to initialize from.
    pub pretrained: Option<PathBuf>,
    pub cold_start: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Ncrft,
            design: PotentialDesign::LogSoftmax,
            encoder: EncoderConfig::default(),
            optimizer: OptimizerName::Sgd,
            lr: None,
            momentum: 0.9,
            lr_decay: 0.05,
            clip: 5.0,
            train_beam: 128,
            decode_beam: 512,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            seed: 1,
            task: Task::Accuracy,
            objective: NcrftObjective::EarlyUpdate,
            token_col: 0,
            tag_col: None,
            unk_max_freq: 1,
            bioes: true,
            constrained: false,
            shuffle: true,
            execution: Execution::Parallel,
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            out_dir: None,
            pretrained: None,
            cold_start: false,
        }
    }
}

/// Every key accepted in a config file, in the order they are written.
pub const KEYS: &[&str] = &[
    "model", "design", "word_dim", "char_dim", "char_filters", "char_width", "f_hidden",
    "f_layers", "g_hidden", "label_dim", "dropout", "optimizer", "lr", "momentum", "lr_decay",
    "clip", "train_beam", "decode_beam", "batch_size", "max_epochs", "patience", "seed", "task",
    "objective", "token_col", "tag_col", "unk_max_freq", "bioes", "constrained", "shuffle",
    "execution", "train", "dev", "test", "embeddings", "out_dir", "pretrained", "cold_start",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{}: cannot parse {:?}", key, value)))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{}: expected true or false, got {:?}", key, value))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let e = &mut self.encoder;
        match key {
            "model" => self.model = v.parse()?,
            "design" => self.design = v.parse()?,
            "word_dim" => e.word_dim = parse(key, v)?,
            "char_dim" => e.char_dim = parse(key, v)?,
            "char_filters" => e.char_filters = parse(key, v)?,
            "char_width" => e.char_width = parse(key, v)?,
            "f_hidden" => e.f_hidden = parse(key, v)?,
            "f_layers" => e.f_layers = parse(key, v)?,
            "g_hidden" => e.g_hidden = parse(key, v)?,
            "label_dim" => e.label_dim = parse(key, v)?,
            "dropout" => e.dropout = parse(key, v)?,
            "optimizer" => self.optimizer = v.parse()?,
            "lr" => self.lr = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "momentum" => self.momentum = parse(key, v)?,
            "lr_decay" => self.lr_decay = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "train_beam" => self.train_beam = parse(key, v)?,
            "decode_beam" => self.decode_beam = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "task" => self.task = v.parse()?,
            "objective" => self.objective = v.parse()?,
            "token_col" => self.token_col = parse(key, v)?,
            "tag_col" => self.tag_col = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "unk_max_freq" => self.unk_max_freq = parse(key, v)?,
            "bioes" => self.bioes = parse_bool(key, v)?,
            "constrained" => self.constrained = parse_bool(key, v)?,
            "shuffle" => self.shuffle = parse_bool(key, v)?,
            "execution" => self.execution = v.parse()?,
            "train" => self.train = opt_path(v),
            "dev" => self.dev = opt_path(v),
            "test" => self.test = opt_path(v),
            "embeddings" => self.embeddings = opt_path(v),
            "out_dir" => self.out_dir = opt_path(v),
            "pretrained" => self.pretrained = opt_path(v),
            "cold_start" => self.cold_start = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{}'", other))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let e = &self.encoder;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Ok(match key {
            "model" => self.model.to_string(),
            "design" => self.design.to_string(),
            "word_dim" => e.word_dim.to_string(),
            "char_dim" => e.char_dim.to_string(),
            "char_filters" => e.char_filters.to_string(),
            "char_width" => e.char_width.to_string(),
            "f_hidden" => e.f_hidden.to_string(),
            "f_layers" => e.f_layers.to_string(),
            "g_hidden" => e.g_hidden.to_string(),
            "label_dim" => e.label_dim.to_string(),
            "dropout" => e.dropout.to_string(),
            "optimizer" => self.optimizer.to_string(),
            "lr" => self.lr.map(|v| v.to_string()).unwrap_or_default(),
            "momentum" => self.momentum.to_string(),
            "lr_decay" => self.lr_decay.to_string(),
            "clip" => self.clip.to_string(),
            "train_beam" => self.train_beam.to_string(),
            "decode_beam" => self.decode_beam.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "seed" => self.seed.to_string(),
            "task" => self.task.to_string(),
            "objective" => self.objective.to_string(),
            "token_col" => self.token_col.to_string(),
            "tag_col" => self.tag_col.map(|v| v.to_string()).unwrap_or_default(),
            "unk_max_freq" => self.unk_max_freq.to_string(),
            "bioes" => self.bioes.to_string(),
            "constrained" => self.constrained.to_string(),
            "shuffle" => self.shuffle.to_string(),
            "execution" => self.execution.to_string(),
            "train" => path(&self.train),
            "dev" => path(&self.dev),
            "test" => path(&self.test),
            "embeddings" => path(&self.embeddings),
            "out_dir" => path(&self.out_dir),
            "pretrained" => path(&self.pretrained),
            "cold_start" => self.cold_start.to_string(),
            other => return Err(Error::Config(format!("unknown config key '{}'", other))),
        })
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut c = RunConfig::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{} = {}\n", k, self.get(k).expect("known key")))
            .collect()
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.model {
            ModelKind::Ncrft => 5e-3,
            _ => 0.01,
        })
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        match self.optimizer {
            OptimizerName::Sgd => OptimizerKind::sgd(self.momentum),
            OptimizerName::Adam => OptimizerKind::adam(),
        }
    }

    /// Checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.lr_decay >= 0.0) || !(self.clip > 0.0) {
            return Err(Error::Config("lr_decay must be ≥ 0 and clip > 0".into()));
        }
        for (name, v) in [
            ("train_beam", self.train_beam),
            ("decode_beam", self.decode_beam),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{} must be at least 1", name)));
            }
        }
        if self.tag_col == Some(self.token_col) {
            return Err(Error::Config("tag_col and token_col coincide".into()));
        }
        if self.model == ModelKind::Ncrft && self.pretrained.is_none() && !self.cold_start {
            return Err(Error::Config(
                "ncrft training starts from a trained rnnt: set pretrained = <run dir> or cold_start = true".into(),
            ));
        }
        if self.model != ModelKind::Ncrft && self.pretrained.is_some() {
            return Err(Error::Config("pretrained initialization applies to ncrft only".into()));
        }
        Ok(())
    }
}
