//! Position-synchronous beam search over label prefixes, and the early-update
//! training objective built on it.

use std::cmp::Ordering;

use crate::encoders::{GState, PredictionIds, PredictionNet};
use crate::error::{Error, Result};
use crate::numerics::array::log_softmax;
use crate::numerics::{DenseArray, GradBuffer, ParamStore};

use super::mask::TransitionMask;
use super::ncrft::{set_nll, PotentialDesign, SetScoring};

#[derive(Debug, Clone, PartialEq)]
pub struct BeamEntry {
    /// `y₁..y_j`
    pub prefix: Vec<usize>,
    /// Partial potential of the prefix.
    pub score: f64,
    /// Prediction state after `<bos>, y₁..y_j`.
    pub state: GState,
    pub alive: bool,
    /// Whether the prefix equals the gold prefix.
    pub gold: bool,
}

/// Entries sorted by score, descending; equal scores ordered by prefix,
/// lexicographically ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub width: usize,
    pub entries: Vec<BeamEntry>,
}

impl Beam {
    pub fn contains_gold(&self) -> bool {
        self.entries.iter().any(|e| e.gold)
    }

    pub fn best(&self) -> Option<&BeamEntry> {
        self.entries.first()
    }
}

#[derive(Debug, Clone)]
pub struct BeamOutcome {
    pub beam: Beam,
    /// First step (1-based) whose beam lost the gold prefix.
    pub fell_out_at: Option<usize>,
}

fn step_scores(scoring: SetScoring, f_row: &[f64], g_row: &[f64]) -> Vec<f64> {
    match scoring {
        SetScoring::Global(d) => {
            let phi = d.apply(f_row);
            let psi = d.apply(g_row);
            phi.iter().zip(&psi).map(|(a, b)| a + b).collect()
        }
        SetScoring::Local => {
            let z: Vec<f64> = f_row.iter().zip(g_row).map(|(a, b)| a + b).collect();
            log_softmax(&z)
        }
    }
}

/// Run the beam over all positions, or until the gold prefix drops out when
/// `gold` is given.
pub fn beam_search(
    net: &PredictionNet<'_>,
    f: &DenseArray,
    scoring: SetScoring,
    width: usize,
    gold: Option<&[usize]>,
    mask: Option<&TransitionMask>,
) -> Result<BeamOutcome> {
    let (n, k) = (f.rows(), f.cols());
    if width == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    if n == 0 || k != net.num_labels() {
        return Err(Error::Shape(format!(
            "scores {:?} for a {}-label prediction network",
            f.shape(),
            net.num_labels()
        )));
    }
    if let Some(g) = gold {
        if g.len() != n || g.iter().any(|&l| l >= k) {
            return Err(Error::InvalidArgument(format!("gold sequence {:?} invalid", g)));
        }
    }
    if let Some(m) = mask {
        if m.num_labels() != k {
            return Err(Error::Shape("transition mask size differs from label count".into()));
        }
    }

    let mut entries = vec![BeamEntry {
        prefix: Vec::new(),
        score: 0.0,
        state: net.start()?,
        alive: true,
        gold: gold.is_some(),
    }];
    for i in 0..n {
        let steps: Vec<Vec<f64>> = entries
            .iter()
            .map(|e| step_scores(scoring, f.row(i), &net.scores(&e.state.h)))
            .collect();
        // Lexicographic rank of each parent prefix for tie-breaking.
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| entries[a].prefix.cmp(&entries[b].prefix));
        let mut rank = vec![0; entries.len()];
        for (r, &p) in order.iter().enumerate() {
            rank[p] = r;
        }

        let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(entries.len() * k);
        for (p, e) in entries.iter().enumerate() {
            for l in 0..k {
                if let Some(m) = mask {
                    let ok = match e.prefix.last() {
                        None => m.start_allowed(l),
                        Some(&prev) => m.allowed(prev, l),
                    } && (i + 1 < n || m.end_allowed(l));
                    if !ok {
                        continue;
                    }
                }
                cand.push((e.score + steps[p][l], p, l));
            }
        }
        if cand.is_empty() {
            return Err(Error::InvalidArgument(
                "transition mask admits no label sequence".into(),
            ));
        }
        let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| -> Ordering {
            b.0.total_cmp(&a.0)
                .then(rank[a.1].cmp(&rank[b.1]))
                .then(a.2.cmp(&b.2))
        };
        if cand.len() > width {
            cand.select_nth_unstable_by(width - 1, cmp);
            cand.truncate(width);
        }
        cand.sort_by(cmp);

        let mut next = Vec::with_capacity(cand.len());
        for &(score, p, l) in &cand {
            let parent = &entries[p];
            let mut prefix = Vec::with_capacity(i + 1);
            prefix.extend_from_slice(&parent.prefix);
            prefix.push(l);
            next.push(BeamEntry {
                prefix,
                score,
                state: net.advance(&parent.state, l)?,
                alive: score.is_finite(),
                gold: parent.gold && gold.map_or(false, |g| g[i] == l),
            });
        }
        entries = next;
        if gold.is_some() && !entries.iter().any(|e| e.gold) {
            return Ok(BeamOutcome {
                beam: Beam { width, entries },
                fell_out_at: Some(i + 1),
            });
        }
    }
    Ok(BeamOutcome {
        beam: Beam { width, entries },
        fell_out_at: None,
    })
}

/// Highest-scoring complete sequence found by a width-`width` beam.
pub fn beam_search_decode(
    net: &PredictionNet<'_>,
    f: &DenseArray,
    scoring: SetScoring,
    width: usize,
    mask: Option<&TransitionMask>,
) -> Result<(Vec<usize>, f64)> {
    let out = beam_search(net, f, scoring, width, None, mask)?;
    let best = out.beam.best().expect("non-empty beam");
    Ok((best.prefix.clone(), best.score))
}

/// Gold prefix and competing prefixes that define the early-update
/// normalizer, found with the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyUpdateSet {
    pub gold: Vec<usize>,
    pub others: Vec<Vec<usize>>,
    pub fell_out_at: Option<usize>,
}

impl EarlyUpdateSet {
    /// Number of positions covered, `j`.
    pub fn depth(&self) -> usize {
        self.gold.len()
    }
}

pub fn early_update_set(
    net: &PredictionNet<'_>,
    f: &DenseArray,
    gold: &[usize],
    scoring: SetScoring,
    width: usize,
) -> Result<EarlyUpdateSet> {
    let out = beam_search(net, f, scoring, width, Some(gold), None)?;
    let j = out.fell_out_at.unwrap_or(f.rows());
    Ok(EarlyUpdateSet {
        gold: gold[..j].to_vec(),
        others: out
            .beam
            .entries
            .into_iter()
            .filter(|e| !e.gold && e.alive)
            .map(|e| e.prefix)
            .collect(),
        fell_out_at: out.fell_out_at,
    })
}

#[derive(Debug, Clone)]
pub struct EarlyUpdate {
    pub loss: f64,
    pub df: DenseArray,
    pub set: EarlyUpdateSet,
}

/// `−u(y*₁:j) + log Σ_{B_j} exp u` with `B_j` the beam at the first step the
/// gold prefix fell out, plus that prefix; `j = n` if it never fell out.
/// Beam membership is held fixed when differentiating.
pub fn early_update_loss(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    gold: &[usize],
    design: PotentialDesign,
    width: usize,
    grads: &mut GradBuffer,
) -> Result<EarlyUpdate> {
    let net = PredictionNet::new(store, ids);
    let scoring = SetScoring::Global(design);
    let set = early_update_set(&net, f, gold, scoring, width)?;
    let r = set_nll(store, ids, f, &set.gold, &set.others, scoring, grads)?;
    Ok(EarlyUpdate {
        loss: r.loss,
        df: r.df,
        set,
    })
}
