//! Sample covariance, the Gaussian log-likelihood and its dual bound.
//!
//! All quantities omit additive constants:
//! `loglik(K) = n/2 * log det K - n/2 * tr(K S)` and
//! `dual_bound(Sigma) = -n/2 * (log det Sigma + d)`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GgmError, Result};
use crate::graph::Graph;
use crate::numkernel::{self, SymMatrix};

/// Empirical covariance together with the sample size that scales the
/// likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    s: SymMatrix,
    n: usize,
    centered: bool,
    /// Square roots of the original variances when `s` has been rescaled to
    /// a correlation matrix.
    scale: Option<Vec<f64>>,
}

impl SampleStats {
    /// Wraps a precomputed covariance matrix. `s` must be positive
    /// semidefinite up to `-1e-10 * max(1, lambda_max)`.
    pub fn from_cov(s: SymMatrix, n: usize, centered: bool) -> Result<Self> {
        if n == 0 {
            return Err(GgmError::InvalidConfig("sample size must be positive".into()));
        }
        if s.matrix().iter().any(|v| !v.is_finite()) {
            return Err(GgmError::NonFiniteResult);
        }
        let ev = numkernel::eigenvalues(&s);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -1e-10 * hi.max(1.0) {
            return Err(GgmError::NegativeEigenvalue(lo));
        }
        Ok(SampleStats { s, n, centered, scale: None })
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.s.order()
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn scaled_to_correlation(&self) -> bool {
        self.scale.is_some()
    }

    /// Upper bound on the rank of `S`: `n - 1` after centering, `n` otherwise.
    pub fn rank_budget(&self) -> usize {
        if self.centered {
            self.n.saturating_sub(1)
        } else {
            self.n
        }
    }

    /// Rescales to a correlation matrix `D^{-1/2} S D^{-1/2}`, `D = diag(S)`.
    /// A second call is a no-op.
    pub fn to_correlation(&self) -> Result<SampleStats> {
        if self.scale.is_some() {
            return Ok(self.clone());
        }
        let mut root = Vec::with_capacity(self.d());
        for (v, &var) in self.s.diagonal().iter().enumerate() {
            if !(var > 0.0) {
                return Err(GgmError::ZeroVariance(v));
            }
            root.push(var.sqrt());
        }
        let inv: Vec<f64> = root.iter().map(|r| 1.0 / r).collect();
        let mut s = self.s.scale_both(&inv);
        for v in 0..s.order() {
            s.set(v, v, 1.0);
        }
        Ok(SampleStats { s, n: self.n, centered: self.centered, scale: Some(root) })
    }

    /// Maps a concentration matrix of the scaled problem back to the
    /// original variables. Identity when no scaling was applied.
    pub fn unscale_concentration(&self, k: &SymMatrix) -> SymMatrix {
        match &self.scale {
            Some(root) => k.scale_both(&root.iter().map(|r| 1.0 / r).collect::<Vec<_>>()),
            None => k.clone(),
        }
    }

    pub fn unscale_covariance(&self, sigma: &SymMatrix) -> SymMatrix {
        match &self.scale {
            Some(root) => sigma.scale_both(root),
            None => sigma.clone(),
        }
    }

    /// Maps a covariance matrix of the original variables into the scaled
    /// problem.
    pub fn scale_covariance(&self, sigma: &SymMatrix) -> SymMatrix {
        match &self.scale {
            Some(root) => sigma.scale_both(&root.iter().map(|r| 1.0 / r).collect::<Vec<_>>()),
            None => sigma.clone(),
        }
    }
}

/// `n x d` matrix of independent standard normal draws.
pub fn simulate_standard_normal(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

/// `S = X^T X / n`, optionally after subtracting column means. The divisor is
/// `n` in both cases.
pub fn empirical_cov(data: &DMatrix<f64>, center: bool) -> Result<SampleStats> {
    let (n, d) = data.shape();
    if n == 0 || d == 0 {
        return Err(GgmError::EmptyData);
    }
    for row in 0..n {
        for col in 0..d {
            if !data[(row, col)].is_finite() {
                return Err(GgmError::NonFiniteData { row, col });
            }
        }
    }
    let mut x = data.clone();
    if center {
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
        }
    }
    let s = SymMatrix::symmetrized(x.transpose() * &x / n as f64);
    Ok(SampleStats { s, n, centered: center, scale: None })
}

/// Parses a delimited numeric table, rows are observations. Fields may be
/// separated by commas, tabs or runs of spaces. A first row containing a
/// non-numeric field is taken as a header and skipped; lines starting with
/// `#` are ignored.
pub fn parse_data_table(text: &str) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    let mut seen_first = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let parsed: Vec<Option<f64>> = fields
            .iter()
            .map(|f| f.trim_matches('"').parse::<f64>().ok())
            .collect();
        if !seen_first {
            seen_first = true;
            if parsed.iter().any(Option::is_none) {
                ncols = Some(fields.len());
                continue;
            }
        }
        let width = *ncols.get_or_insert(fields.len());
        if fields.len() != width {
            return Err(GgmError::Parse {
                line: line_no,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        for (f, p) in fields.iter().zip(&parsed) {
            match p {
                Some(v) if v.is_finite() => values.push(*v),
                _ => {
                    return Err(GgmError::Parse { line: line_no, message: format!("bad value `{f}`") });
                }
            }
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(GgmError::EmptyData);
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

pub fn read_data_table(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_data_table(&std::fs::read_to_string(path)?)
}

/// `tr(A B)` for symmetric `A`, `B` in `O(d^2)`.
pub fn trace_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.matrix().iter().zip(b.matrix().iter()).map(|(x, y)| x * y).sum()
}

fn check_order(m: &SymMatrix, stats: &SampleStats) -> Result<()> {
    if m.order() != stats.d() {
        Err(GgmError::DimensionMismatch { expected: stats.d(), found: m.order() })
    } else {
        Ok(())
    }
}

pub fn loglik(k: &SymMatrix, stats: &SampleStats) -> Result<f64> {
    check_order(k, stats)?;
    let half_n = stats.n as f64 / 2.0;
    Ok(half_n * (numkernel::logdet_pd(k)? - trace_product(k, &stats.s)))
}

/// `max |Sigma_uv - S_uv|` over the diagonal and the edges of `g`.
pub fn grad_norm_primal(sigma: &SymMatrix, stats: &SampleStats, g: &Graph) -> Result<f64> {
    check_order(sigma, stats)?;
    if g.d() != stats.d() {
        return Err(GgmError::DimensionMismatch { expected: stats.d(), found: g.d() });
    }
    let s = &stats.s;
    let diag = (0..g.d()).map(|v| (sigma.get(v, v) - s.get(v, v)).abs());
    let off = g.edges().iter().map(|&(u, v)| (sigma.get(u, v) - s.get(u, v)).abs());
    Ok(diag.chain(off).fold(0.0, f64::max))
}

/// Upper bound on `loglik(K)` for every feasible `K`, valid when `sigma` is
/// dually feasible (`Sigma(G) = S(G)`).
pub fn dual_bound(sigma: &SymMatrix, stats: &SampleStats) -> Result<f64> {
    check_order(sigma, stats)?;
    debug_assert!(
        sigma
            .diagonal()
            .iter()
            .zip(stats.s.diagonal())
            .all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs().max(1.0)),
        "dual bound evaluated at a covariance whose diagonal differs from S"
    );
    let half_n = stats.n as f64 / 2.0;
    Ok(-half_n * (numkernel::logdet_pd(sigma)? + stats.d() as f64))
}

/// `n/2 * (tr(K S) - log det(K Sigma) - d)`, equal to
/// `dual_bound(sigma) - loglik(k)`.
///
/// Evaluated as `n/2 * (tr(K (S - Sigma)) + sum_i (l_i - 1 - ln l_i))` over
/// the eigenvalues `l_i` of `K Sigma`. The first term vanishes when `Sigma`
/// matches `S` wherever `K` is nonzero, and each summand is nonnegative, so
/// a near-zero gap is not lost to cancellation.
pub fn duality_gap(k_check: &SymMatrix, sigma: &SymMatrix, stats: &SampleStats) -> Result<f64> {
    check_order(k_check, stats)?;
    check_order(sigma, stats)?;
    if !numkernel::is_pd(k_check) {
        return Err(GgmError::NotPositiveDefinite);
    }
    let l = nalgebra::Cholesky::new(sigma.matrix().clone()).ok_or(GgmError::NotPositiveDefinite)?.unpack();
    let m = SymMatrix::symmetrized(l.transpose() * k_check.matrix() * &l);
    let mismatch: f64 = k_check
        .matrix()
        .iter()
        .zip(stats.s.matrix().iter().zip(sigma.matrix().iter()))
        .map(|(k, (s, x))| if s == x { 0.0 } else { k * (s - x) })
        .sum();
    let spread: f64 = numkernel::eigenvalues(&m)
        .into_iter()
        .map(|lam| {
            let x = lam - 1.0;
            x - x.ln_1p()
        })
        .sum();
    Ok(stats.n as f64 / 2.0 * (mismatch + spread))
}
