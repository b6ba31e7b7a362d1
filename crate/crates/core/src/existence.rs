//! Existence diagnostics and the closed-form estimate for decomposable graphs.
//!
//! The coreness rule is sufficient only: when the maximal coreness is below
//! the rank budget of `S` the estimate exists with probability one. A
//! decomposable graph whose cliques fit inside the rank budget also has an
//! estimate, given in closed form by [`decomposable_mle`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GgmError, Result};
use crate::graph::Graph;
use crate::likelihood::SampleStats;
use crate::numkernel::{gather, pd_inverse_raw, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    GuaranteedExists,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub max_coreness: usize,
    /// Smallest sample size `n` with `n - 1 > max_coreness`.
    pub n_required_core_rule: usize,
    pub rank_budget: usize,
    pub decomposable: bool,
    pub max_clique_size: Option<usize>,
    pub verdict: Verdict,
}

pub fn check_existence(g: &Graph, stats: &SampleStats) -> ExistenceVerdict {
    verdict_for(g, stats.rank_budget())
}

pub fn verdict_for(g: &Graph, rank_budget: usize) -> ExistenceVerdict {
    let max_coreness = g.max_coreness();
    let max_clique_size = perfect_sequence(g).map(|p| p.cliques.iter().map(Vec::len).max().unwrap_or(0));
    let decomposable = max_clique_size.is_some();
    let by_cliques = max_clique_size.is_some_and(|m| m <= rank_budget);
    let verdict = if by_cliques || rank_budget > max_coreness {
        Verdict::GuaranteedExists
    } else {
        Verdict::Unknown
    };
    ExistenceVerdict {
        max_coreness,
        n_required_core_rule: max_coreness + 2,
        rank_budget,
        decomposable,
        max_clique_size,
        verdict,
    }
}

/// Maximum cardinality search. Ties go to the smallest vertex index.
pub fn mcs_order(g: &Graph) -> Vec<usize> {
    let d = g.d();
    let mut weight = vec![0usize; d];
    let mut numbered = vec![false; d];
    let mut order = Vec::with_capacity(d);
    for _ in 0..d {
        let v = (0..d)
            .filter(|&v| !numbered[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("an unnumbered vertex remains");
        numbered[v] = true;
        order.push(v);
        for &w in g.boundary(v).expect("vertex in range") {
            if !numbered[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// Cliques in a perfect (running intersection) order, with separators
/// `S_j = C_j ∩ (C_1 ∪ ... ∪ C_{j-1})`. Empty separators are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerfectSequence {
    pub cliques: Vec<Vec<usize>>,
    pub separators: Vec<Vec<usize>>,
}

/// `None` when `g` is not decomposable.
pub fn perfect_sequence(g: &Graph) -> Option<PerfectSequence> {
    let order = mcs_order(g);
    let mut rank = vec![0usize; g.d()];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    let mut earlier: Vec<Vec<usize>> = Vec::with_capacity(g.d());
    for (i, &v) in order.iter().enumerate() {
        let pa: Vec<usize> = g.boundary(v).unwrap().iter().copied().filter(|&w| rank[w] < i).collect();
        if !g.is_complete_set(&pa) {
            return None;
        }
        earlier.push(pa);
    }
    // {v_i} ∪ pa(v_i) is maximal exactly when the next vertex does not extend it.
    let mut cliques = Vec::new();
    for i in 0..order.len() {
        let maximal = i + 1 == order.len() || earlier[i + 1].len() <= earlier[i].len();
        if maximal {
            let mut c = earlier[i].clone();
            c.push(order[i]);
            c.sort_unstable();
            cliques.push(c);
        }
    }
    let mut seen = vec![false; g.d()];
    let mut separators = Vec::with_capacity(cliques.len());
    for c in &cliques {
        separators.push(c.iter().copied().filter(|&v| seen[v]).collect());
        c.iter().for_each(|&v| seen[v] = true);
    }
    Some(PerfectSequence { cliques, separators })
}

pub fn is_decomposable(g: &Graph) -> bool {
    perfect_sequence(g).is_some()
}

/// `K = sum_C [(S_CC)^{-1}]^V - sum_S [(S_SS)^{-1}]^V` over the cliques and
/// separators of a perfect sequence, `[.]^V` padding with zeros.
pub fn decomposable_mle(stats: &SampleStats, g: &Graph) -> Result<SymMatrix> {
    if g.d() != stats.d() {
        return Err(GgmError::DimensionMismatch { expected: stats.d(), found: g.d() });
    }
    let seq = perfect_sequence(g).ok_or(GgmError::NotDecomposable)?;
    let s = stats.s().matrix();
    let mut k = DMatrix::zeros(g.d(), g.d());
    let mut add = |set: &[usize], sign: f64| -> Result<()> {
        if set.is_empty() {
            return Ok(());
        }
        let inv = pd_inverse_raw(&gather(s, set, set)).map_err(|_| GgmError::LocalMarginalSingular(set.to_vec()))?;
        for (a, &i) in set.iter().enumerate() {
            for (b, &j) in set.iter().enumerate() {
                k[(i, j)] += sign * inv[(a, b)];
            }
        }
        Ok(())
    };
    for c in &seq.cliques {
        add(c, 1.0)?;
    }
    for sep in &seq.separators {
        add(sep, -1.0)?;
    }
    Ok(SymMatrix::symmetrized(k))
}
