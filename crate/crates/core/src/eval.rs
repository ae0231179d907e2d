//! Token accuracy and entity-level micro-averaged F1 over BIOES tags.

use std::fmt;

use crate::data::tag_shape;
use crate::error::{Error, Result};

/// Inclusive token span `[start, end]` labeled with an entity type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(kind: &str, start: usize, end: usize) -> Self {
        EntitySpan {
            kind: kind.to_string(),
            start,
            end,
        }
    }
}

pub fn token_accuracy<T: PartialEq>(gold: &[T], pred: &[T]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} gold vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Ok(1.0);
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Strict BIOES span extraction: a run yields a span only when it is a
/// single `S-X` or a `B-X I-X* E-X` run of one type. Broken runs score nothing.
pub fn extract_entities<S: AsRef<str>>(tags: &[S]) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, t) in tags.iter().enumerate() {
        let t = t.as_ref();
        let (p, ty) = tag_shape(t).ok_or_else(|| Error::Data(format!("not a BIOES tag: {:?}", t)))?;
        match p {
            'O' => open = None,
            'S' => {
                open = None;
                spans.push(EntitySpan::new(ty, i, i));
            }
            'B' => open = Some((i, ty)),
            'I' => {
                if !matches!(open, Some((_, oty)) if oty == ty) {
                    open = None;
                }
            }
            'E' => {
                if let Some((start, oty)) = open {
                    if oty == ty {
                        spans.push(EntitySpan::new(ty, start, i));
                    }
                }
                open = None;
            }
            _ => unreachable!(),
        }
    }
    Ok(spans)
}

/// Span extraction for BIO tags, conlleval style: `I-X` after anything but
/// an open `X` starts a new span.
pub fn extract_entities_bio<S: AsRef<str>>(tags: &[S]) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, t) in tags.iter().enumerate() {
        let t = t.as_ref();
        let (p, ty) = tag_shape(t)
            .filter(|(p, _)| matches!(p, 'O' | 'B' | 'I'))
            .ok_or_else(|| Error::Data(format!("not a BIO tag: {:?}", t)))?;
        let continues = p == 'I' && matches!(open, Some((_, oty)) if oty == ty);
        if !continues {
            if let Some((start, oty)) = open.take() {
                spans.push(EntitySpan::new(oty, start, i - 1));
            }
            if p != 'O' {
                open = Some((i, ty));
            }
        }
    }
    if let Some((start, ty)) = open {
        spans.push(EntitySpan::new(ty, start, tags.len() - 1));
    }
    Ok(spans)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Micro-averaged precision, recall and F1 with exact type+boundary matching,
/// counts pooled over sentences. Empty denominators score 1 when the other
/// side is also empty and 0 otherwise.
pub fn micro_f1(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold sentences vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut correct = 0;
    let mut n_gold = 0;
    let mut n_pred = 0;
    for (g, p) in gold.iter().zip(pred) {
        n_gold += g.len();
        n_pred += p.len();
        let mut remaining: Vec<&EntitySpan> = g.iter().collect();
        for span in p {
            if let Some(pos) = remaining.iter().position(|s| *s == span) {
                remaining.swap_remove(pos);
                correct += 1;
            }
        }
    }
    let ratio = |num: usize, den: usize, other: usize| {
        if den == 0 {
            if other == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(correct, n_pred, n_gold);
    let recall = ratio(correct, n_gold, n_pred);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
        correct,
        predicted: n_pred,
        gold: n_gold,
    })
}

/// Ordered `(metric, value)` pairs, printable as text or as tab-separated records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub title: String,
    pub entries: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn new(title: &str) -> Self {
        MetricsReport {
            title: title.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, value: f64) {
        self.entries.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// One `metric<TAB>value` line per entry.
    pub fn machine_lines(&self) -> String {
        self.entries
            .iter()
            .map(|(n, v)| format!("{}\t{}\n", n, v))
            .collect()
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        for (n, v) in &self.entries {
            writeln!(f, "  {:<12} {:.4}", n, v)?;
        }
        Ok(())
    }
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}
