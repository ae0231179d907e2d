//! Globally normalized transducer: node potentials from `f`, clique
//! potentials from the prediction network, one partition function over
//! whole label sequences.

use std::fmt;
use std::str::FromStr;

use crate::encoders::{prediction_forward, PredictionIds, PredictionNet};
use crate::error::{Error, Result};
use crate::numerics::array::{log_softmax, logsumexp, softmax_slice};
use crate::numerics::{DenseArray, GradBuffer, LstmCache, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialDesign {
    /// `φ = f`, `ψ = g`.
    Additive,
    /// `φ = log_softmax(f)`, `ψ = log_softmax(g)`.
    LogSoftmax,
}

impl PotentialDesign {
    pub fn tag(self) -> u8 {
        match self {
            PotentialDesign::Additive => 0,
            PotentialDesign::LogSoftmax => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(PotentialDesign::Additive),
            1 => Ok(PotentialDesign::LogSoftmax),
            t => Err(Error::Checkpoint(format!("unknown potential design tag {}", t))),
        }
    }

    /// Map a raw score row to a potential row.
    pub fn apply(self, row: &[f64]) -> Vec<f64> {
        match self {
            PotentialDesign::Additive => row.to_vec(),
            PotentialDesign::LogSoftmax => log_softmax(row),
        }
    }

    /// Pull a potential-row gradient back to the raw row.
    pub fn backward(self, row: &[f64], d_pot: &[f64]) -> Vec<f64> {
        match self {
            PotentialDesign::Additive => d_pot.to_vec(),
            PotentialDesign::LogSoftmax => {
                let total: f64 = d_pot.iter().sum();
                softmax_slice(row)
                    .iter()
                    .zip(d_pot)
                    .map(|(p, d)| d - p * total)
                    .collect()
            }
        }
    }
}

impl fmt::Display for PotentialDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialDesign::Additive => "additive",
            PotentialDesign::LogSoftmax => "logsoftmax",
        })
    }
}

impl FromStr for PotentialDesign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "additive" => Ok(PotentialDesign::Additive),
            "logsoftmax" | "log-softmax" => Ok(PotentialDesign::LogSoftmax),
            other => Err(Error::Config(format!("unknown potential design '{}'", other))),
        }
    }
}

/// `(φ_i, ψ_i)` for one position.
pub fn ncrft_potentials(f_i: &[f64], g_i: &[f64], design: PotentialDesign) -> (Vec<f64>, Vec<f64>) {
    (design.apply(f_i), design.apply(g_i))
}

/// `u(y) = Σ_i φ_i(y_i) + ψ_i(y_{0:i−1}, y_i)` with `ψ` from a fresh
/// whole-sequence pass of the prediction network.
pub fn ncrft_sequence_potential(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    y: &[usize],
    design: PotentialDesign,
) -> Result<f64> {
    let k = f.cols();
    if y.len() != f.rows() || y.iter().any(|&l| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "label sequence {:?} invalid for {} positions and {} labels",
            y,
            f.rows(),
            k
        )));
    }
    let mut prefix = Vec::with_capacity(y.len());
    prefix.push(k);
    prefix.extend_from_slice(&y[..y.len() - 1]);
    let g = prediction_forward(store, ids, &prefix)?.g;
    let mut u = 0.0;
    for (i, &l) in y.iter().enumerate() {
        let (phi, psi) = ncrft_potentials(f.row(i), g.row(i), design);
        u += phi[l] + psi[l];
    }
    Ok(u)
}

/// How a trie leaf is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetScoring {
    /// Global potentials; loss is `−u(gold) + log Σ_set exp u`.
    Global(PotentialDesign),
    /// Local softmax of `f + g` per step; loss is `−log p(gold)` and the set
    /// must be the gold sequence alone.
    Local,
}

struct Node {
    parent: usize,
    label: usize,
    depth: usize,
    children: Vec<(usize, usize)>,
    cache: Option<LstmCache>,
    /// Raw `g` row read from this node's state (internal nodes only).
    g: Vec<f64>,
    score: f64,
}

/// Label-prefix trie. Node `d` levels deep stands for `y₁..y_d`; the root
/// holds the prediction state after `<bos>`.
struct PrefixTree {
    nodes: Vec<Node>,
}

impl PrefixTree {
    fn new(bos: usize) -> Self {
        PrefixTree {
            nodes: vec![Node {
                parent: usize::MAX,
                label: bos,
                depth: 0,
                children: Vec::new(),
                cache: None,
                g: Vec::new(),
                score: 0.0,
            }],
        }
    }

    fn insert(&mut self, seq: &[usize]) -> usize {
        let mut at = 0;
        for &l in seq {
            at = match self.nodes[at].children.iter().find(|(c, _)| *c == l) {
                Some(&(_, id)) => id,
                None => {
                    let id = self.nodes.len();
                    let depth = self.nodes[at].depth + 1;
                    self.nodes.push(Node {
                        parent: at,
                        label: l,
                        depth,
                        children: Vec::new(),
                        cache: None,
                        g: Vec::new(),
                        score: 0.0,
                    });
                    self.nodes[at].children.push((l, id));
                    id
                }
            };
        }
        at
    }
}

#[derive(Debug, Clone)]
pub struct SetNll {
    pub loss: f64,
    /// Gradient with respect to the rows `f₁..f_j` that the set touches;
    /// later rows are zero.
    pub df: DenseArray,
}

/// Negative log-likelihood of `gold` against the set `{gold} ∪ others`,
/// all sequences of equal length `j ≤ n`. Shared prefixes share prediction
/// network steps. Prediction-network gradients go to `grads`; the gradient
/// for `f` is returned.
pub fn set_nll(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    gold: &[usize],
    others: &[Vec<usize>],
    scoring: SetScoring,
    grads: &mut GradBuffer,
) -> Result<SetNll> {
    let net = PredictionNet::new(store, ids);
    let k = net.num_labels();
    let j = gold.len();
    if f.cols() != k || j == 0 || j > f.rows() {
        return Err(Error::Shape(format!(
            "{}-label prefix of length {} against scores {:?}",
            k,
            j,
            f.shape()
        )));
    }
    for seq in std::iter::once(gold).chain(others.iter().map(|s| s.as_slice())) {
        if seq.len() != j || seq.iter().any(|&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "sequence {:?} not a length-{} label prefix",
                seq, j
            )));
        }
    }
    if scoring == SetScoring::Local && !others.is_empty() {
        return Err(Error::InvalidArgument(
            "local scoring takes the gold sequence alone".into(),
        ));
    }

    let mut tree = PrefixTree::new(net.bos());
    let gold_leaf = tree.insert(gold);
    let mut leaves = vec![gold_leaf];
    let mut seen = std::collections::HashSet::from([gold_leaf]);
    for seq in others {
        let leaf = tree.insert(seq);
        if seen.insert(leaf) {
            leaves.push(leaf);
        }
    }

    // Forward: parents precede children in creation order. Every sequence
    // in the set has length j, so a per-position normalizer on φ shifts all
    // scores equally and cancels; raw f rows give the same loss exactly.
    let zero = net.zero_state();
    for id in 0..tree.nodes.len() {
        let (parent, label, depth) = {
            let n = &tree.nodes[id];
            (n.parent, n.label, n.depth)
        };
        if depth > 0 {
            let p = &tree.nodes[parent];
            let step = match scoring {
                SetScoring::Global(d) => f.get(depth - 1, label) + d.apply(&p.g)[label],
                SetScoring::Local => {
                    let z: Vec<f64> = f.row(depth - 1).iter().zip(&p.g).map(|(a, b)| a + b).collect();
                    log_softmax(&z)[label]
                }
            };
            tree.nodes[id].score = p.score + step;
        }
        if depth < j {
            let cache = if depth == 0 {
                net.advance_cached(&zero, label)?
            } else {
                let pc = tree.nodes[parent].cache.as_ref().expect("parent expanded");
                net.advance_cached(
                    &crate::encoders::GState {
                        h: pc.h.clone(),
                        c: pc.c.clone(),
                    },
                    label,
                )?
            };
            tree.nodes[id].g = net.scores(&cache.h);
            tree.nodes[id].cache = Some(cache);
        }
    }

    let leaf_scores: Vec<f64> = leaves.iter().map(|&l| tree.nodes[l].score).collect();
    let (loss, weights) = match scoring {
        SetScoring::Global(_) => {
            let lz = logsumexp(&leaf_scores);
            let mut w: Vec<f64> = leaf_scores.iter().map(|s| (s - lz).exp()).collect();
            w[0] -= 1.0;
            (lz - leaf_scores[0], w)
        }
        SetScoring::Local => (-leaf_scores[0], vec![-1.0]),
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("set loss {}", loss)));
    }

    // Subtree weight: d loss / d (step score) for every edge into a node.
    let mut weight = vec![0.0; tree.nodes.len()];
    for (&leaf, &w) in leaves.iter().zip(&weights) {
        weight[leaf] += w;
    }
    for id in (1..tree.nodes.len()).rev() {
        let p = tree.nodes[id].parent;
        if p != 0 {
            weight[p] += weight[id];
        }
    }

    let mut df = DenseArray::zeros(f.shape());
    // d loss / d raw g row, per internal node; and d/d raw f rows.
    let mut dg_raw: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
    match scoring {
        SetScoring::Global(design) => {
            let mut dphi = vec![vec![0.0; k]; j];
            let mut dpsi: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
            for id in 1..tree.nodes.len() {
                let n = &tree.nodes[id];
                if weight[id] == 0.0 {
                    continue;
                }
                dphi[n.depth - 1][n.label] += weight[id];
                let slot = &mut dpsi[n.parent];
                if slot.is_empty() {
                    slot.resize(k, 0.0);
                }
                slot[n.label] += weight[id];
            }
            for (i, d) in dphi.iter().enumerate() {
                df.row_mut(i).copy_from_slice(d);
            }
            for (id, d) in dpsi.iter().enumerate() {
                if !d.is_empty() {
                    dg_raw[id] = design.backward(&tree.nodes[id].g, d);
                }
            }
        }
        SetScoring::Local => {
            // single chain: step score log_softmax(f + g)[label]
            for id in 1..tree.nodes.len() {
                let n = &tree.nodes[id];
                let p = &tree.nodes[n.parent];
                let z: Vec<f64> = f.row(n.depth - 1).iter().zip(&p.g).map(|(a, b)| a + b).collect();
                let mut d: Vec<f64> = softmax_slice(&z).iter().map(|q| -weight[id] * q).collect();
                d[n.label] += weight[id];
                df.row_mut(n.depth - 1).copy_from_slice(&d);
                dg_raw[n.parent] = d;
            }
        }
    }

    // Backward through the prediction network in reverse creation order.
    let hdim = zero.h.len();
    let mut dh: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
    let mut dc: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
    for id in (0..tree.nodes.len()).rev() {
        let Some(cache) = tree.nodes[id].cache.as_ref() else {
            continue;
        };
        let mut h_grad = std::mem::take(&mut dh[id]);
        if h_grad.is_empty() {
            h_grad = vec![0.0; hdim];
        }
        let c_grad = std::mem::take(&mut dc[id]);
        let c_grad = if c_grad.is_empty() { vec![0.0; hdim] } else { c_grad };
        if !dg_raw[id].is_empty() {
            let from_g = net.scores_backward(&cache.h, &dg_raw[id], grads);
            h_grad.iter_mut().zip(&from_g).for_each(|(a, b)| *a += b);
        }
        if h_grad.iter().all(|&v| v == 0.0) && c_grad.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (dhp, dcp) = net.advance_backward(cache, tree.nodes[id].label, &h_grad, &c_grad, grads);
        if id != 0 {
            let p = tree.nodes[id].parent;
            for (slot, src) in [(&mut dh[p], dhp), (&mut dc[p], dcp)] {
                if slot.is_empty() {
                    *slot = src;
                } else {
                    slot.iter_mut().zip(&src).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
    Ok(SetNll { loss, df })
}

/// Exact log partition function by level-wise expansion over all `K^n`
/// sequences with incremental prediction steps. Refuses when `K^n > cap`.
pub fn exact_log_z(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    design: PotentialDesign,
    cap: usize,
) -> Result<f64> {
    let net = PredictionNet::new(store, ids);
    let (n, k) = (f.rows(), f.cols());
    check_cap(n, k, cap)?;
    let mut level = vec![(0.0, net.start()?)];
    for i in 0..n {
        let phi = design.apply(f.row(i));
        let mut next = Vec::with_capacity(level.len() * k);
        for (score, state) in &level {
            let psi = design.apply(&net.scores(&state.h));
            for l in 0..k {
                let s = score + phi[l] + psi[l];
                let st = if i + 1 < n { net.advance(state, l)? } else { state.clone() };
                next.push((s, st));
            }
        }
        level = next;
    }
    let scores: Vec<f64> = level.iter().map(|(s, _)| *s).collect();
    Ok(logsumexp(&scores))
}

pub(crate) fn check_cap(n: usize, k: usize, cap: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total
            .checked_mul(k)
            .filter(|&t| t <= cap)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}^{} label sequences exceed the enumeration cap {}",
                    k, n, cap
                ))
            })?;
    }
    Ok(total)
}
