//! Synthetic labeling tasks with known generator entropy.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{write_conll, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::numerics::RngState;

/// Every observation token; the labels carry all the structure.
pub const OBSERVATION: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthTask {
    /// K = 2; `y₁, y₂` uniform, then `yᵢ = yᵢ₋₁ XOR yᵢ₋₂`.
    SecondOrderParity,
    /// K = 2; `y₁` uniform, then `yᵢ = yᵢ₋₁` with probability `stay`.
    FirstOrderChain { stay: f64 },
}

impl SynthTask {
    pub fn name(&self) -> &'static str {
        match self {
            SynthTask::SecondOrderParity => "second-order-parity",
            SynthTask::FirstOrderChain { .. } => "first-order-chain",
        }
    }

    /// Per-sequence entropy in nats for sequences of length `n ≥ 2`.
    pub fn entropy(&self, n: usize) -> f64 {
        match *self {
            SynthTask::SecondOrderParity => 2.0 * std::f64::consts::LN_2,
            SynthTask::FirstOrderChain { stay } => {
                let h = if stay <= 0.0 || stay >= 1.0 {
                    0.0
                } else {
                    -(stay * stay.ln() + (1.0 - stay) * (1.0 - stay).ln())
                };
                std::f64::consts::LN_2 + (n.saturating_sub(1)) as f64 * h
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut RngState) -> Vec<u8> {
        match *self {
            SynthTask::SecondOrderParity => {
                let a = rng.below(2) as u8;
                let b = rng.below(2) as u8;
                parity_tags((a, b), n)
            }
            SynthTask::FirstOrderChain { stay } => {
                let mut y = Vec::with_capacity(n);
                let mut cur = rng.below(2) as u8;
                for i in 0..n {
                    if i > 0 && rng.next_f64() >= stay {
                        cur ^= 1;
                    }
                    y.push(cur);
                }
                y
            }
        }
    }
}

impl fmt::Display for SynthTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthTask::SecondOrderParity => f.write_str(self.name()),
            SynthTask::FirstOrderChain { stay } => write!(f, "{}:{}", self.name(), stay),
        }
    }
}

impl FromStr for SynthTask {
    type Err = Error;
    /// `second-order-parity`, `first-order-chain` or `first-order-chain:<stay>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        match (name, arg) {
            ("second-order-parity", None) => Ok(SynthTask::SecondOrderParity),
            ("first-order-chain", None) => Ok(SynthTask::FirstOrderChain { stay: 0.9 }),
            ("first-order-chain", Some(p)) => {
                let stay: f64 = p
                    .parse()
                    .map_err(|_| Error::Config(format!("bad stay probability {:?}", p)))?;
                if !(0.0..=1.0).contains(&stay) {
                    return Err(Error::Config(format!("stay probability {} outside [0, 1]", stay)));
                }
                Ok(SynthTask::FirstOrderChain { stay })
            }
            _ => Err(Error::Config(format!("unknown synthetic task '{}'", s))),
        }
    }
}

/// The parity recurrence from a two-label prefix.
pub fn parity_tags(prefix: (u8, u8), n: usize) -> Vec<u8> {
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let v = match i {
            0 => prefix.0,
            1 => prefix.1,
            _ => y[i - 1] ^ y[i - 2],
        };
        y.push(v);
    }
    y
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub task: SynthTask,
    pub length: usize,
    pub train: usize,
    pub dev: usize,
    pub seed: u64,
}

impl SynthSpec {
    fn corpus(&self, count: usize, stream: u64, split: &str) -> Corpus {
        let mut rng = RngState::new(self.seed).derive(stream);
        let sentences = (0..count)
            .map(|_| {
                let tags = self.task.sample(self.length, &mut rng);
                Sentence::new(
                    vec![OBSERVATION.to_string(); self.length],
                    tags.iter().map(|t| t.to_string()).collect(),
                )
            })
            .collect();
        let mut c = Corpus::from_sentences(sentences);
        c.header = vec![format!(
            "synth task={} length={} count={} seed={} split={} entropy={:.6}",
            self.task,
            self.length,
            count,
            self.seed,
            split,
            self.task.entropy(self.length)
        )];
        c
    }

    pub fn generate(&self) -> Result<(Corpus, Corpus)> {
        if self.length < 2 || self.train == 0 || self.dev == 0 {
            return Err(Error::Config("synthetic corpora need length ≥ 2 and non-empty splits".into()));
        }
        Ok((self.corpus(self.train, 0, "train"), self.corpus(self.dev, 1, "dev")))
    }
}

/// Write `train.txt` and `dev.txt` into `out_dir`.
pub fn run_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let (train, dev) = spec.generate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let tp = out_dir.join("train.txt");
    let dp = out_dir.join("dev.txt");
    write_conll(&tp, &train)?;
    write_conll(&dp, &dev)?;
    Ok((tp, dp))
}
