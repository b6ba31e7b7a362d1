//! Undirected simple graphs and the benchmark graph families.
//!
//! Vertices are `0..d`. The edge list is kept sorted with `u < v` in each
//! pair, and adjacency lists are sorted ascending, so every query that
//! returns a vertex set returns it in ascending order.
//!
//! The text format used on disk is 1-based:
//!
//! ```text
//! # comment
//! d 4
//! 1 2
//! 2 3
//! ```

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GgmError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    d: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge iterator. Pairs may be given in either
    /// orientation; repeated pairs are merged. Self-loops are rejected.
    pub fn new<I>(d: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if d == 0 {
            return Err(GgmError::ZeroDimension);
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w >= d {
                    return Err(GgmError::VertexOutOfRange { vertex: w, d });
                }
            }
            if u == v {
                return Err(GgmError::InvalidConfig(format!("self-loop at vertex {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();
        let mut adj = vec![Vec::new(); d];
        for &(u, v) in &list {
            adj[u].push(v);
            adj[v].push(u);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Ok(Graph { d, edges: list, adj })
    }

    pub fn empty(d: usize) -> Result<Self> {
        Graph::new(d, std::iter::empty())
    }

    pub fn complete(d: usize) -> Result<Self> {
        Graph::new(d, (0..d).flat_map(|u| (u + 1..d).map(move |v| (u, v))))
    }

    /// Path `0 - 1 - ... - (d-1)`.
    pub fn path(d: usize) -> Result<Self> {
        Graph::new(d, (1..d).map(|v| (v - 1, v)))
    }

    /// Cycle `0 - 1 - ... - (d-1) - 0`; requires `d >= 3`.
    pub fn cycle(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(GgmError::InvalidConfig("a cycle needs at least 3 vertices".into()));
        }
        Graph::new(d, (0..d).map(|v| (v, (v + 1) % d)))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Edges as `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.d && v < self.d && self.adj[u].binary_search(&v).is_ok()
    }

    /// Neighbours of `u` in ascending order.
    pub fn boundary(&self, u: usize) -> Result<&[usize]> {
        self.check_vertex(u)?;
        Ok(&self.adj[u])
    }

    /// Vertices that are neither `u` nor adjacent to `u`, ascending.
    pub fn rest(&self, u: usize) -> Result<Vec<usize>> {
        self.check_vertex(u)?;
        let nbrs = &self.adj[u];
        let mut out = Vec::with_capacity(self.d - 1 - nbrs.len());
        let mut k = 0;
        for v in 0..self.d {
            if k < nbrs.len() && nbrs[k] == v {
                k += 1;
            } else if v != u {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// True when every pair in `set` is adjacent.
    pub fn is_complete_set(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    fn check_vertex(&self, u: usize) -> Result<()> {
        if u >= self.d {
            Err(GgmError::VertexOutOfRange { vertex: u, d: self.d })
        } else {
            Ok(())
        }
    }

    /// All maximal cliques, each ascending, sorted lexicographically.
    ///
    /// Bron-Kerbosch with Tomita pivoting over bitsets. The number of maximal
    /// cliques can be exponential in `d`.
    pub fn cliques(&self) -> Vec<Vec<usize>> {
        let words = self.d.div_ceil(64);
        let nbr_bits: Vec<Bits> = self
            .adj
            .iter()
            .map(|nbrs| {
                let mut b = Bits::zeros(words);
                nbrs.iter().for_each(|&v| b.insert(v));
                b
            })
            .collect();
        let mut all = Bits::zeros(words);
        (0..self.d).for_each(|v| all.insert(v));
        let mut out = Vec::new();
        let mut current = Vec::new();
        bron_kerbosch(&nbr_bits, &mut current, all, Bits::zeros(words), &mut out);
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }

    /// Core number of every vertex (Batagelj-Zaversnik bucket peeling).
    pub fn core_numbers(&self) -> Vec<usize> {
        let n = self.d;
        let mut deg: Vec<usize> = self.adj.iter().map(Vec::len).collect();
        let max_deg = deg.iter().copied().max().unwrap_or(0);
        let mut bin = vec![0usize; max_deg + 1];
        for &k in &deg {
            bin[k] += 1;
        }
        let mut start = 0;
        for b in bin.iter_mut() {
            let count = *b;
            *b = start;
            start += count;
        }
        let mut pos = vec![0usize; n];
        let mut vert = vec![0usize; n];
        for v in 0..n {
            pos[v] = bin[deg[v]];
            vert[pos[v]] = v;
            bin[deg[v]] += 1;
        }
        for k in (1..=max_deg).rev() {
            bin[k] = bin[k - 1];
        }
        bin[0] = 0;
        for i in 0..n {
            let v = vert[i];
            for &u in &self.adj[v] {
                if deg[u] > deg[v] {
                    let du = deg[u];
                    let pu = pos[u];
                    let pw = bin[du];
                    let w = vert[pw];
                    if u != w {
                        pos[u] = pw;
                        vert[pu] = w;
                        pos[w] = pu;
                        vert[pw] = u;
                    }
                    bin[du] += 1;
                    deg[u] -= 1;
                }
            }
        }
        deg
    }

    pub fn max_coreness(&self) -> usize {
        self.core_numbers().into_iter().max().unwrap_or(0)
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut d = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| GgmError::Parse { line: line_no, message };
            let mut tok = line.split_whitespace();
            match d {
                None => {
                    if tok.next() != Some("d") {
                        return Err(err("expected header `d <vertexcount>`".into()));
                    }
                    let count = tok
                        .next()
                        .ok_or_else(|| err("missing vertex count".into()))?
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad vertex count: {e}")))?;
                    if count == 0 {
                        return Err(err("vertex count must be positive".into()));
                    }
                    d = Some(count);
                }
                Some(count) => {
                    let mut label = || -> Result<usize> {
                        let t = tok.next().ok_or_else(|| err("expected two vertex labels".into()))?;
                        let v = t.parse::<usize>().map_err(|e| err(format!("bad label `{t}`: {e}")))?;
                        if v == 0 || v > count {
                            return Err(err(format!("label {v} outside 1..={count}")));
                        }
                        Ok(v - 1)
                    };
                    let u = label()?;
                    let v = label()?;
                    if tok.next().is_some() {
                        return Err(err("trailing tokens".into()));
                    }
                    if u == v {
                        return Err(err(format!("self-loop at {}", u + 1)));
                    }
                    edges.push((u, v));
                }
            }
        }
        let d = d.ok_or(GgmError::Parse { line: 0, message: "missing header `d <vertexcount>`".into() })?;
        Graph::new(d, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("d {}\n", self.d);
        for &(u, v) in &self.edges {
            let _ = writeln!(s, "{} {}", u + 1, v + 1);
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Graph::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(words: usize) -> Self {
        Bits(vec![0; words])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn and_not(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }
    fn or(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }
    fn count_and(&self, other: &Bits) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

fn bron_kerbosch(nbrs: &[Bits], r: &mut Vec<usize>, mut p: Bits, mut x: Bits, out: &mut Vec<Vec<usize>>) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let pivot = p
        .or(&x)
        .iter()
        .max_by_key(|&u| p.count_and(&nbrs[u]))
        .expect("P is nonempty");
    let candidates: Vec<usize> = p.and_not(&nbrs[pivot]).iter().collect();
    for v in candidates {
        r.push(v);
        bron_kerbosch(nbrs, r, p.and(&nbrs[v]), x.and(&nbrs[v]), out);
        r.pop();
        p.remove(v);
        x.insert(v);
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GgmError::InvalidProbability(p))
    }
}

/// Rectangular lattice; vertex `row * cols + col`.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(GgmError::ZeroDimension);
    }
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = i * cols + j;
            if j + 1 < cols {
                edges.push((v, v + 1));
            }
            if i + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Erdős-Rényi graph: each pair `u < v`, visited in lexicographic order,
/// is kept when a uniform draw from `ChaCha8Rng::seed_from_u64(seed)` falls
/// below `density`.
pub fn gen_random_density(d: usize, density: f64, seed: u64) -> Result<Graph> {
    check_probability(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..d {
        for v in u + 1..d {
            if rng.random::<f64>() < density {
                edges.push((u, v));
            }
        }
    }
    Graph::new(d, edges)
}

/// A uniform random labelled tree (decoded from a random Prüfer sequence)
/// plus every non-tree pair added independently with probability
/// `extra_density`. The Prüfer sequence is drawn first, then the pairs are
/// visited in lexicographic order, all from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn gen_tree_plus(d: usize, extra_density: f64, seed: u64) -> Result<Graph> {
    check_probability(extra_density)?;
    if d == 0 {
        return Err(GgmError::ZeroDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = match d {
        1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let seq: Vec<usize> = (0..d - 2).map(|_| rng.random_range(0..d)).collect();
            prufer_decode(d, &seq)
        }
    };
    let base = Graph::new(d, tree.iter().copied())?;
    let mut edges = tree;
    for u in 0..d {
        for v in u + 1..d {
            if !base.has_edge(u, v) && rng.random::<f64>() < extra_density {
                edges.push((u, v));
            }
        }
    }
    Graph::new(d, edges)
}

fn prufer_decode(d: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; d];
    for &s in seq {
        degree[s] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..d).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(d - 1);
    for &s in seq {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf, s));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(Reverse(s));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a, b));
    edges
}
