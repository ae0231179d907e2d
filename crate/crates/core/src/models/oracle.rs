//! Exhaustive enumeration over all `K^n` label sequences, for testing and for
//! exact evaluation of small instances.

use crate::encoders::PredictionIds;
use crate::error::Result;
use crate::numerics::array::logsumexp;
use crate::numerics::{DenseArray, ParamStore};

use super::linear_chain::TransitionTable;
use super::ncrft::{check_cap, ncrft_sequence_potential, PotentialDesign};

/// Default ceiling on enumerated sequences.
pub const DEFAULT_ORACLE_CAP: usize = 100_000;

/// All length-`n` sequences over `0..k` in lexicographic order.
pub fn enumerate_sequences(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = if k == 0 { None } else { Some(vec![0; n]) };
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut succ = cur.clone();
        for pos in (0..n).rev() {
            if succ[pos] + 1 < k {
                succ[pos] += 1;
                next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(cur)
    })
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub log_z: f64,
    /// Highest-potential sequence; the lexicographically smallest on ties.
    pub argmax: Vec<usize>,
    pub max_score: f64,
    /// `(sequence, log p)` in lexicographic order.
    pub distribution: Vec<(Vec<usize>, f64)>,
}

fn summarize(scored: Vec<(Vec<usize>, f64)>) -> OracleResult {
    let scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
    let log_z = logsumexp(&scores);
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    OracleResult {
        log_z,
        argmax: scored[best].0.clone(),
        max_score: scores[best],
        distribution: scored.into_iter().map(|(y, s)| (y, s - log_z)).collect(),
    }
}

/// Exact quantities of the globally normalized transducer, scoring each
/// sequence with an independent whole-sequence pass.
pub fn brute_force_oracle(
    store: &ParamStore,
    ids: &PredictionIds,
    f: &DenseArray,
    design: PotentialDesign,
    cap: usize,
) -> Result<OracleResult> {
    let (n, k) = (f.rows(), f.cols());
    check_cap(n, k, cap)?;
    let scored = enumerate_sequences(n, k)
        .map(|y| {
            let u = ncrft_sequence_potential(store, ids, f, &y, design)?;
            Ok((y, u))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(scored))
}

/// Exact quantities of a linear-chain model by enumeration.
pub fn lc_brute_force(f: &DenseArray, table: &TransitionTable, cap: usize) -> Result<OracleResult> {
    let (n, k) = (f.rows(), f.cols());
    check_cap(n, k, cap)?;
    let scored = enumerate_sequences(n, k)
        .map(|y| {
            let s = table.sequence_score(f, &y);
            (y, s)
        })
        .collect();
    Ok(summarize(scored))
}
