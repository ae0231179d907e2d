//! Linear-chain CRF head: node scores `f` plus a first-order transition table.

use crate::error::{Error, Result};
use crate::numerics::array::logsumexp;
use crate::numerics::{glorot, DenseArray, ParamId, ParamStore, RngState};

use super::mask::TransitionMask;

/// `trans[j, k]` scores label `j` followed by `k`; `begin`/`end` score the
/// first and last labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub trans: DenseArray,
    pub begin: Vec<f64>,
    pub end: Vec<f64>,
}

impl TransitionTable {
    pub fn zeros(k: usize) -> Self {
        TransitionTable {
            trans: DenseArray::zeros(&[k, k]),
            begin: vec![0.0; k],
            end: vec![0.0; k],
        }
    }

    pub fn num_labels(&self) -> usize {
        self.begin.len()
    }

    /// Total score of one label sequence.
    pub fn sequence_score(&self, f: &DenseArray, y: &[usize]) -> f64 {
        let mut s = self.begin[y[0]] + f.get(0, y[0]);
        for i in 1..y.len() {
            s += self.trans.get(y[i - 1], y[i]) + f.get(i, y[i]);
        }
        s + self.end[y[y.len() - 1]]
    }

    fn check(&self, f: &DenseArray) -> Result<()> {
        let k = self.num_labels();
        if f.rank() != 2 || f.rows() == 0 || f.cols() != k || self.trans.shape() != [k, k] {
            return Err(Error::Shape(format!(
                "scores {:?} against a {}-label transition table",
                f.shape(),
                k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrfIds {
    pub trans: ParamId,
    pub begin: ParamId,
    pub end: ParamId,
}

impl CrfIds {
    pub fn register(store: &mut ParamStore, k: usize, rng: &mut RngState) -> Result<Self> {
        Ok(CrfIds {
            trans: store.insert("crf.trans", glorot(k, k, rng))?,
            begin: store.insert("crf.begin", DenseArray::zeros(&[k]))?,
            end: store.insert("crf.end", DenseArray::zeros(&[k]))?,
        })
    }

    pub fn resolve(store: &ParamStore, k: usize) -> Result<Self> {
        Ok(CrfIds {
            trans: store.expect("crf.trans", &[k, k])?,
            begin: store.expect("crf.begin", &[k])?,
            end: store.expect("crf.end", &[k])?,
        })
    }

    pub fn table(&self, store: &ParamStore) -> TransitionTable {
        TransitionTable {
            trans: store.value(self.trans).clone(),
            begin: store.value(self.begin).values().to_vec(),
            end: store.value(self.end).values().to_vec(),
        }
    }
}

fn forward_alphas(f: &DenseArray, t: &TransitionTable) -> DenseArray {
    let (n, k) = (f.rows(), f.cols());
    let mut alpha = DenseArray::zeros(&[n, k]);
    for j in 0..k {
        alpha.set(0, j, t.begin[j] + f.get(0, j));
    }
    let mut buf = vec![0.0; k];
    for i in 1..n {
        for y in 0..k {
            for (p, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(i - 1, p) + t.trans.get(p, y);
            }
            alpha.set(i, y, f.get(i, y) + logsumexp(&buf));
        }
    }
    alpha
}

fn backward_betas(f: &DenseArray, t: &TransitionTable) -> DenseArray {
    let (n, k) = (f.rows(), f.cols());
    let mut beta = DenseArray::zeros(&[n, k]);
    beta.row_mut(n - 1).copy_from_slice(&t.end);
    let mut buf = vec![0.0; k];
    for i in (0..n - 1).rev() {
        for p in 0..k {
            for (y, b) in buf.iter_mut().enumerate() {
                *b = t.trans.get(p, y) + f.get(i + 1, y) + beta.get(i + 1, y);
            }
            beta.set(i, p, logsumexp(&buf));
        }
    }
    beta
}

/// Log partition function by the forward recursion.
pub fn lc_log_z(f: &DenseArray, table: &TransitionTable) -> Result<f64> {
    table.check(f)?;
    let alpha = forward_alphas(f, table);
    let last: Vec<f64> = alpha
        .row(f.rows() - 1)
        .iter()
        .zip(&table.end)
        .map(|(a, e)| a + e)
        .collect();
    Ok(logsumexp(&last))
}

#[derive(Debug, Clone)]
pub struct LcGrad {
    pub loss: f64,
    pub df: DenseArray,
    pub table: TransitionTable,
}

/// Negative log-likelihood of `gold` and its gradients from forward–backward marginals.
pub fn lc_nll_and_grad(f: &DenseArray, table: &TransitionTable, gold: &[usize]) -> Result<LcGrad> {
    table.check(f)?;
    let (n, k) = (f.rows(), f.cols());
    if gold.len() != n || gold.iter().any(|&y| y >= k) {
        return Err(Error::InvalidArgument(format!(
            "gold sequence {:?} invalid for {} positions and {} labels",
            gold, n, k
        )));
    }
    let alpha = forward_alphas(f, table);
    let beta = backward_betas(f, table);
    let log_z = logsumexp(
        &alpha
            .row(n - 1)
            .iter()
            .zip(&table.end)
            .map(|(a, e)| a + e)
            .collect::<Vec<_>>(),
    );
    let loss = log_z - table.sequence_score(f, gold);

    let mut grad = TransitionTable::zeros(k);
    let mut df = DenseArray::zeros(&[n, k]);
    for i in 0..n {
        for y in 0..k {
            let p = (alpha.get(i, y) + beta.get(i, y) - log_z).exp();
            df.set(i, y, p);
            if i == 0 {
                grad.begin[y] += p;
            }
            if i == n - 1 {
                grad.end[y] += p;
            }
        }
        if i > 0 {
            for a in 0..k {
                for b in 0..k {
                    let p = (alpha.get(i - 1, a)
                        + table.trans.get(a, b)
                        + f.get(i, b)
                        + beta.get(i, b)
                        - log_z)
                        .exp();
                    let cur = grad.trans.get(a, b);
                    grad.trans.set(a, b, cur + p);
                }
            }
        }
    }
    for (i, &y) in gold.iter().enumerate() {
        df.set(i, y, df.get(i, y) - 1.0);
        if i > 0 {
            let cur = grad.trans.get(gold[i - 1], y);
            grad.trans.set(gold[i - 1], y, cur - 1.0);
        }
    }
    grad.begin[gold[0]] -= 1.0;
    grad.end[gold[n - 1]] -= 1.0;
    Ok(LcGrad {
        loss,
        df,
        table: grad,
    })
}

/// Best label sequence and its score. Among equal-scoring sequences the
/// lexicographically smallest wins.
pub fn lc_viterbi(f: &DenseArray, table: &TransitionTable) -> Result<(Vec<usize>, f64)> {
    lc_viterbi_masked(f, table, None)
}

pub fn lc_viterbi_masked(
    f: &DenseArray,
    table: &TransitionTable,
    mask: Option<&TransitionMask>,
) -> Result<(Vec<usize>, f64)> {
    table.check(f)?;
    let (n, k) = (f.rows(), f.cols());
    let edge = |a: usize, b: usize| match mask {
        Some(m) if !m.allowed(a, b) => f64::NEG_INFINITY,
        _ => table.trans.get(a, b),
    };
    let begin = |b: usize| match mask {
        Some(m) if !m.start_allowed(b) => f64::NEG_INFINITY,
        _ => table.begin[b],
    };
    let end = |b: usize| match mask {
        Some(m) if !m.end_allowed(b) => f64::NEG_INFINITY,
        _ => table.end[b],
    };
    // best[i][y]: best score of positions i.. given y_i = y
    let mut best = DenseArray::zeros(&[n, k]);
    for y in 0..k {
        best.set(n - 1, y, f.get(n - 1, y) + end(y));
    }
    for i in (0..n - 1).rev() {
        for y in 0..k {
            let m = (0..k)
                .map(|z| edge(y, z) + best.get(i + 1, z))
                .fold(f64::NEG_INFINITY, f64::max);
            best.set(i, y, f.get(i, y) + m);
        }
    }
    let pick = |scores: &mut dyn Iterator<Item = f64>| {
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (z, s) in scores.enumerate() {
            if s > top {
                top = s;
                arg = z;
            }
        }
        arg
    };
    let mut path = Vec::with_capacity(n);
    path.push(pick(&mut (0..k).map(|y| begin(y) + best.get(0, y))));
    for i in 1..n {
        let prev = path[i - 1];
        path.push(pick(&mut (0..k).map(|z| edge(prev, z) + best.get(i, z))));
    }
    let score = table.sequence_score(f, &path);
    Ok((path, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::oracle::enumerate_sequences;
    use approx::assert_abs_diff_eq;

    fn random_instance(n: usize, k: usize, seed: u64) -> (DenseArray, TransitionTable) {
        let mut rng = RngState::new(seed);
        let mut r = |len: usize| (0..len).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>();
        let f = DenseArray::from_vec(&[n, k], r(n * k)).unwrap();
        let t = TransitionTable {
            trans: DenseArray::from_vec(&[k, k], r(k * k)).unwrap(),
            begin: r(k),
            end: r(k),
        };
        (f, t)
    }

    fn brute(f: &DenseArray, t: &TransitionTable) -> (f64, Vec<usize>) {
        let mut scores = Vec::new();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for y in enumerate_sequences(f.rows(), f.cols()) {
            let s = t.sequence_score(f, &y);
            scores.push(s);
            if best.as_ref().map_or(true, |(b, _)| s > *b) {
                best = Some((s, y));
            }
        }
        (logsumexp(&scores), best.unwrap().1)
    }

    #[test]
    fn uniform_potentials() {
        let f = DenseArray::zeros(&[3, 2]);
        let z = lc_log_z(&f, &TransitionTable::zeros(2)).unwrap();
        assert_abs_diff_eq!(z, 3.0 * 2f64.ln(), epsilon = 1e-12);
        let g = lc_nll_and_grad(&f, &TransitionTable::zeros(2), &[0, 1, 1]).unwrap();
        assert_abs_diff_eq!(g.loss, 3.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn single_position() {
        let (f, t) = random_instance(1, 4, 3);
        let direct: Vec<f64> = (0..4).map(|k| f.get(0, k) + t.begin[k] + t.end[k]).collect();
        assert_abs_diff_eq!(lc_log_z(&f, &t).unwrap(), logsumexp(&direct), epsilon = 1e-12);
        let (y, _) = lc_viterbi(&f, &t).unwrap();
        assert_eq!(y, vec![crate::numerics::array::argmax(&direct)]);
    }

    #[test]
    fn matches_enumeration() {
        let (f, t) = random_instance(5, 3, 17);
        let (z, arg) = brute(&f, &t);
        let dp = lc_log_z(&f, &t).unwrap();
        assert!((dp - z).abs() <= 1e-9 * z.abs().max(1.0));
        let (y, s) = lc_viterbi(&f, &t).unwrap();
        assert_eq!(y, arg);
        assert_abs_diff_eq!(s, t.sequence_score(&f, &arg), epsilon = 1e-12);
    }

    #[test]
    fn zero_transitions_decode_per_position() {
        let (f, _) = random_instance(6, 4, 8);
        let (y, _) = lc_viterbi(&f, &TransitionTable::zeros(4)).unwrap();
        let expect: Vec<usize> = (0..6).map(|i| crate::numerics::array::argmax(f.row(i))).collect();
        assert_eq!(y, expect);
    }

    #[test]
    fn ties_prefer_lexicographically_smallest() {
        let (y, _) = lc_viterbi(&DenseArray::zeros(&[4, 3]), &TransitionTable::zeros(3)).unwrap();
        assert_eq!(y, vec![0, 0, 0, 0]);
    }

    #[test]
    fn saturated_gold_has_tiny_loss() {
        let gold = [2, 0, 1, 1];
        let mut f = DenseArray::filled(&[4, 3], -50.0);
        for (i, &y) in gold.iter().enumerate() {
            f.set(i, y, 50.0);
        }
        let g = lc_nll_and_grad(&f, &TransitionTable::zeros(3), &gold).unwrap();
        assert!(g.loss < 1e-6 && g.loss >= 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (f, t) = random_instance(4, 3, 99);
        let gold = [1, 0, 2, 2];
        let g = lc_nll_and_grad(&f, &t, &gold).unwrap();
        let loss = |f: &DenseArray, t: &TransitionTable| lc_nll_and_grad(f, t, &gold).unwrap().loss;
        let eps = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / (a.abs() + b.abs()).max(1e-8);
        for idx in 0..f.len() {
            let mut p = f.clone();
            p.values_mut()[idx] += eps;
            let mut m = f.clone();
            m.values_mut()[idx] -= eps;
            let num = (loss(&p, &t) - loss(&m, &t)) / (2.0 * eps);
            assert!(rel(num, g.df.values()[idx]) < 1e-6, "f[{}]", idx);
        }
        for idx in 0..9 {
            let mut p = t.clone();
            p.trans.values_mut()[idx] += eps;
            let mut m = t.clone();
            m.trans.values_mut()[idx] -= eps;
            let num = (loss(&f, &p) - loss(&f, &m)) / (2.0 * eps);
            assert!(rel(num, g.table.trans.values()[idx]) < 1e-6, "A[{}]", idx);
        }
        for idx in 0..3 {
            let mut p = t.clone();
            p.begin[idx] += eps;
            let mut m = t.clone();
            m.begin[idx] -= eps;
            let num = (loss(&f, &p) - loss(&f, &m)) / (2.0 * eps);
            assert!(rel(num, g.table.begin[idx]) < 1e-6);
            let mut p = t.clone();
            p.end[idx] += eps;
            let mut m = t.clone();
            m.end[idx] -= eps;
            let num = (loss(&f, &p) - loss(&f, &m)) / (2.0 * eps);
            assert!(rel(num, g.table.end[idx]) < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let f = DenseArray::zeros(&[3, 2]);
        assert!(lc_log_z(&f, &TransitionTable::zeros(3)).is_err());
        assert!(lc_nll_and_grad(&f, &TransitionTable::zeros(2), &[0, 2, 0]).is_err());
    }
}
