//! Neighbourhood coordinate descent on the dual problem.
//!
//! The dual maximizes `log det Sigma` over covariance matrices that agree
//! with `S` on the diagonal and the edges. Updating vertex `u` with
//! boundary `b` and non-neighbours `r` replaces `Sigma_ru` by
//! `Sigma_rb (Sigma_bb)^{-1} S_bu`, which maximizes the Schur complement of
//! `Sigma_cc` (`c = b ∪ r`) and so never decreases the determinant. Entries
//! at edges and on the diagonal are never written.
//!
//! The fit runs in two phases. The first cycles vertex updates on `Sigma`
//! alone until consecutive cycles differ by less than `eps' = 2 eps / n` in
//! maximum column sum norm. `Sigma` may start singular; a generalized
//! inverse then stands in for `(Sigma_bb)^{-1}` and the rank can grow by one
//! per update. The second phase inverts `Sigma` once and thereafter keeps
//! `K = Sigma^{-1}` current with a rank-one recursion, skipping a vertex when
//! `sum_r |K_ru| < eps''` and stopping when a whole cycle is skipped. The
//! primal estimate is `K` with non-edges zeroed; on the correlation scale
//! the stopping rule makes it positive definite.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{GgmError, Result};
use crate::existence::{check_existence, decomposable_mle};
use crate::graph::Graph;
use crate::likelihood::{dual_bound, duality_gap, loglik, SampleStats};
use crate::numkernel::{
    gather, gen_inverse_raw, is_pd, max_colsum, min_eig, pattern_project, pd_inverse, SymMatrix,
};
use crate::report::{Algorithm, FitReport};

/// Ranks are recorded after every vertex update up to this order, once per
/// cycle above it.
const PER_UPDATE_RANK_LIMIT: usize = 64;

/// A Cholesky factor of `Sigma_bb` is used only if every squared pivot
/// exceeds this fraction of the largest diagonal entry.
const PIVOT_TOL: f64 = 1e-10;

fn accepted_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let max_diag = m.diagonal().max();
    let ch = Cholesky::new(m.clone())?;
    let min_pivot = ch.l_dirty().diagonal().min();
    (min_pivot * min_pivot > PIVOT_TOL * max_diag).then_some(ch)
}

/// Positive definite with a margin, so that roundoff in an exactly
/// singular matrix does not count.
fn clearly_pd(m: &SymMatrix) -> bool {
    m.order() == 0 || accepted_cholesky(m.matrix()).is_some()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartPolicy {
    /// `Sigma_0 = S`.
    #[default]
    FromS,
    /// Inverse of the closed-form estimate for decomposable graphs, falling
    /// back to `S` when the graph is not decomposable or a clique marginal
    /// is singular.
    Chordal,
    /// A covariance on the original scale that must agree with `S` on the
    /// diagonal and the edges.
    UserSupplied(SymMatrix),
}

#[derive(Debug, Clone)]
pub struct NcdConfig {
    pub eps: f64,
    pub max_cycles: usize,
    pub start_policy: StartPolicy,
    /// Permit a singular starting covariance.
    pub allow_psd_start: bool,
    /// Rescale to correlations before fitting. Turning this off also drops
    /// the positive definiteness guarantee for the returned `K`.
    pub auto_scale: bool,
}

impl Default for NcdConfig {
    fn default() -> Self {
        NcdConfig {
            eps: 1e-3,
            max_cycles: 50_000,
            start_policy: StartPolicy::FromS,
            allow_psd_start: true,
            auto_scale: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    SigmaOnly,
    KTracked,
}

#[derive(Debug, Clone)]
pub struct NcdState {
    pub sigma: SymMatrix,
    pub k: Option<SymMatrix>,
    pub phase: Phase,
    pub cycle: usize,
}

/// Result of one vertex update.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexUpdate {
    /// Regression coefficients of `u` on its boundary, in boundary order.
    pub beta: DVector<f64>,
    /// `S_uu - S_ub beta`, the conditional variance of `u` given the rest
    /// after the update.
    pub schur_value: f64,
}

/// One vertex update as seen by an observer of [`ncd_fit_observed`].
/// Matrices are on the fitting scale.
#[derive(Debug)]
pub struct NcdStep<'a> {
    pub phase: Phase,
    pub cycle: usize,
    pub vertex: usize,
    pub sigma: &'a SymMatrix,
    pub k: Option<&'a SymMatrix>,
    pub schur_value: f64,
}

fn regression(sigma_bb: &DMatrix<f64>, s_bu: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = accepted_cholesky(sigma_bb) {
        return Ok(ch.solve(s_bu));
    }
    Ok(gen_inverse_raw(sigma_bb)? * s_bu)
}

/// Replaces `Sigma_ru` by `Sigma_rb beta` with `beta = (Sigma_bb)^{-1} S_bu`.
/// A generalized inverse is used when `Sigma_bb` is numerically singular.
pub fn vertex_update(sigma: &mut SymMatrix, s: &SymMatrix, g: &Graph, u: usize) -> Result<VertexUpdate> {
    let b = g.boundary(u)?;
    let r = g.rest(u)?;
    let s_bu = DVector::from_iterator(b.len(), b.iter().map(|&v| s.get(v, u)));
    let beta = if b.is_empty() {
        DVector::zeros(0)
    } else {
        regression(&gather(sigma.matrix(), b, b), &s_bu)?
    };
    for &x in &r {
        let mut v = 0.0;
        for (j, &y) in b.iter().enumerate() {
            v += sigma.get(x, y) * beta[j];
        }
        if !v.is_finite() {
            return Err(GgmError::NonFiniteResult);
        }
        sigma.set(x, u, v);
    }
    let schur_value = s.get(u, u) - s_bu.dot(&beta);
    Ok(VertexUpdate { beta, schur_value })
}

/// Brings `K = Sigma^{-1}` up to date after [`vertex_update`] on `u`,
/// without inverting anything. `schur_value` must be positive.
pub fn k_track_update(k: &mut SymMatrix, g: &Graph, u: usize, upd: &VertexUpdate) -> Result<()> {
    if !(upd.schur_value > 0.0) {
        return Err(GgmError::NonpositiveSchur { vertex: u, value: upd.schur_value });
    }
    let d = k.order();
    let b = g.boundary(u)?;
    let k_uu = k.get(u, u);
    let col: Vec<f64> = (0..d).map(|i| k.get(i, u)).collect();
    let new_uu = 1.0 / upd.schur_value;
    let data = k.matrix_mut().as_mut_slice();

    // (Sigma_cc)^{-1} = K_cc - K_cu K_uc / K_uu
    for j in 0..d {
        if j == u || col[j] == 0.0 {
            continue;
        }
        let f = col[j] / k_uu;
        for i in 0..=j {
            if i != u {
                data[j * d + i] -= col[i] * f;
            }
        }
    }
    for (p, &x) in b.iter().enumerate() {
        for (q, &y) in b.iter().enumerate().take(p + 1) {
            data[x * d + y] += upd.beta[p] * upd.beta[q] * new_uu;
        }
    }
    for j in 0..d {
        for i in 0..j {
            data[i * d + j] = data[j * d + i];
        }
    }
    let mut new_col = vec![0.0; d];
    for (p, &x) in b.iter().enumerate() {
        new_col[x] = -upd.beta[p] * new_uu;
    }
    new_col[u] = new_uu;
    for (i, v) in new_col.into_iter().enumerate() {
        data[u * d + i] = v;
        data[i * d + u] = v;
    }
    Ok(())
}

/// `K(G)`, checked to be positive definite.
pub fn feasible_k(k: &SymMatrix, g: &Graph) -> Result<SymMatrix> {
    let proj = pattern_project(k, g)?;
    if !is_pd(&proj) {
        return Err(GgmError::CertificateViolated { min_eig: min_eig(&proj) });
    }
    Ok(proj)
}

/// `sum_r |K_ru|` over the non-neighbours `r` of `u`.
pub fn rest_norm(k: &SymMatrix, g: &Graph, u: usize) -> Result<f64> {
    Ok(g.rest(u)?.iter().map(|&r| k.get(r, u).abs()).sum())
}

/// True when the update of `u` can be skipped: `rest_norm < threshold`.
pub fn skip_check(k: &SymMatrix, g: &Graph, u: usize, threshold: f64) -> Result<bool> {
    Ok(rest_norm(k, g, u)? < threshold)
}

fn copy_pattern(dst: &mut SymMatrix, src: &SymMatrix, g: &Graph) {
    for v in 0..src.order() {
        dst.set(v, v, src.get(v, v));
    }
    for &(u, v) in g.edges() {
        dst.set(u, v, src.get(u, v));
    }
}

/// `Sigma = L L^T` with `L` of exactly `rank` columns, kept while `Sigma` is
/// singular. Off-pattern entries are written from the factor, so an update
/// whose Schur value is zero cannot lift the rank through roundoff.
struct LowRankFactor {
    l: DMatrix<f64>,
    rank: usize,
}

impl LowRankFactor {
    fn new(sigma: &SymMatrix) -> Self {
        let d = sigma.order();
        let eig = nalgebra::SymmetricEigen::new(sigma.matrix().clone());
        let cut = crate::numkernel::REL_TOL * eig.eigenvalues.max().max(0.0);
        let mut l = DMatrix::zeros(d, d);
        let mut rank = 0;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > cut {
                l.set_column(rank, &(eig.eigenvectors.column(k) * lam.sqrt()));
                rank += 1;
            }
        }
        LowRankFactor { l, rank }
    }

    /// Splits row `u` into its projection on the span of the boundary rows
    /// and a residual. The squared residual is the Schur value of the
    /// update; when it is positive it moves to a fresh column, raising the
    /// rank by one, and otherwise it is dropped.
    fn update(&mut self, sigma: &mut SymMatrix, g: &Graph, u: usize) -> Result<()> {
        let b = g.boundary(u)?;
        let k = self.rank;
        let row = self.l.row(u).columns(0, k).transpose();
        let mut proj = DVector::zeros(k);
        if !b.is_empty() && k > 0 {
            let lb = DMatrix::from_fn(b.len(), k, |i, j| self.l[(b[i], j)]);
            let svd = nalgebra::SVD::new(lb, false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let cut = crate::numkernel::REL_TOL.sqrt() * svd.singular_values.max();
            for (i, &sv) in svd.singular_values.iter().enumerate() {
                if sv > cut {
                    let v = v_t.row(i).transpose();
                    proj += &v * v.dot(&row);
                }
            }
        }
        let residual = (&row - &proj).norm_squared();
        if !residual.is_finite() {
            return Err(GgmError::NonFiniteResult);
        }
        for j in 0..self.l.ncols() {
            self.l[(u, j)] = if j < k { proj[j] } else { 0.0 };
        }
        if residual > crate::numkernel::REL_TOL * sigma.get(u, u) && k < self.l.ncols() {
            self.l[(u, k)] = residual.sqrt();
            self.rank += 1;
        }
        for x in g.rest(u)? {
            let v = (0..self.rank).map(|j| self.l[(x, j)] * self.l[(u, j)]).sum();
            sigma.set(x, u, v);
        }
        Ok(())
    }
}

fn starting_sigma(work: &SampleStats, g: &Graph, cfg: &NcdConfig) -> Result<SymMatrix> {
    let s = work.s();
    let mut sigma = match &cfg.start_policy {
        StartPolicy::FromS => s.clone(),
        StartPolicy::Chordal => match decomposable_mle(work, g).and_then(|k| pd_inverse(&k)) {
            Ok(sigma) => sigma,
            Err(_) => s.clone(),
        },
        StartPolicy::UserSupplied(user) => {
            if user.order() != s.order() {
                return Err(GgmError::DimensionMismatch { expected: s.order(), found: user.order() });
            }
            let scaled = work.scale_covariance(user);
            let dev = pattern_project(&SymMatrix::symmetrized(scaled.matrix() - s.matrix()), g)?;
            if dev.matrix().amax() > 1e-8 {
                return Err(GgmError::InvalidConfig(
                    "starting covariance differs from S on the diagonal or an edge".into(),
                ));
            }
            scaled
        }
    };
    copy_pattern(&mut sigma, s, g);
    if !cfg.allow_psd_start && !clearly_pd(&sigma) {
        return Err(GgmError::NotPositiveDefinite);
    }
    Ok(sigma)
}

pub fn ncd_fit(stats: &SampleStats, g: &Graph, cfg: &NcdConfig) -> Result<FitReport> {
    ncd_fit_observed(stats, g, cfg, &mut |_| {})
}

/// As [`ncd_fit`], calling `observer` after every vertex update.
pub fn ncd_fit_observed(
    stats: &SampleStats,
    g: &Graph,
    cfg: &NcdConfig,
    observer: &mut dyn FnMut(&NcdStep<'_>),
) -> Result<FitReport> {
    let d = stats.d();
    if g.d() != d {
        return Err(GgmError::DimensionMismatch { expected: d, found: g.d() });
    }
    if !(cfg.eps > 0.0) || cfg.max_cycles == 0 {
        return Err(GgmError::InvalidConfig("eps must be positive and max_cycles at least 1".into()));
    }
    let setup_start = Instant::now();
    let n = stats.n();
    let eps_prime = 2.0 * cfg.eps / n as f64;
    let eps_dprime = eps_prime.min(1.0 / d as f64);
    let work = if cfg.auto_scale { stats.to_correlation()? } else { stats.clone() };
    let s = work.s().clone();
    let mut state = NcdState { sigma: starting_sigma(&work, g, cfg)?, k: None, phase: Phase::SigmaOnly, cycle: 0 };
    let setup_time = setup_start.elapsed().as_secs_f64();

    let loop_start = Instant::now();
    let per_update_rank = d <= PER_UPDATE_RANK_LIMIT;
    let mut factor = if clearly_pd(&state.sigma) { None } else { Some(LowRankFactor::new(&state.sigma)) };
    let mut rank_trace = Vec::new();
    if let Some(f) = &factor {
        rank_trace.push(f.rank);
    }
    let mut performed = 0usize;
    let mut skipped = 0usize;

    // Phase 1: Sigma only.
    let mut stable = false;
    while state.cycle < cfg.max_cycles {
        state.cycle += 1;
        let prev = state.sigma.clone();
        for u in 0..d {
            if g.degree(u) + 1 == d {
                skipped += 1;
                continue;
            }
            let upd = vertex_update(&mut state.sigma, &s, g, u)?;
            performed += 1;
            if let Some(f) = factor.as_mut() {
                f.update(&mut state.sigma, g, u)?;
                if per_update_rank {
                    rank_trace.push(f.rank);
                }
            }
            observer(&NcdStep {
                phase: Phase::SigmaOnly,
                cycle: state.cycle,
                vertex: u,
                sigma: &state.sigma,
                k: None,
                schur_value: upd.schur_value,
            });
        }
        if let Some(f) = &factor {
            if !per_update_rank {
                rank_trace.push(f.rank);
            }
            if f.rank == d && clearly_pd(&state.sigma) {
                factor = None;
            }
        }
        if max_colsum(&(state.sigma.matrix() - prev.matrix())) < eps_prime {
            stable = true;
            break;
        }
    }
    let phase1_cycles = state.cycle;

    let sigma_min_eig = min_eig(&state.sigma);
    let mut notes = Vec::new();
    let mut converged = false;
    if stable && clearly_pd(&state.sigma) {
        // Phase 2: K tracked alongside Sigma.
        state.phase = Phase::KTracked;
        let mut k = pd_inverse(&state.sigma)?;
        while state.cycle < cfg.max_cycles {
            state.cycle += 1;
            let mut updated = false;
            for u in 0..d {
                if skip_check(&k, g, u, eps_dprime)? {
                    skipped += 1;
                    continue;
                }
                let upd = vertex_update(&mut state.sigma, &s, g, u)?;
                k_track_update(&mut k, g, u, &upd)?;
                performed += 1;
                updated = true;
                observer(&NcdStep {
                    phase: Phase::KTracked,
                    cycle: state.cycle,
                    vertex: u,
                    sigma: &state.sigma,
                    k: Some(&k),
                    schur_value: upd.schur_value,
                });
            }
            #[cfg(debug_assertions)]
            if d <= 200 {
                let err = (k.matrix() * state.sigma.matrix() - DMatrix::identity(d, d)).amax();
                debug_assert!(err <= 1e-6 * d as f64, "K Sigma drifted from I by {err:e}");
            }
            if !updated {
                converged = true;
                break;
            }
        }
        state.k = Some(k);
    } else if stable {
        notes.push(format!(
            "covariance stabilized while singular, smallest eigenvalue {sigma_min_eig:e}"
        ));
    }
    let wall_time = loop_start.elapsed().as_secs_f64();

    let existence = check_existence(g, stats);
    let mut sigma_hat = work.unscale_covariance(&state.sigma);
    copy_pattern(&mut sigma_hat, stats.s(), g);
    let mut report = FitReport {
        algorithm: Algorithm::Ncd,
        update_sets: None,
        converged,
        cycles: state.cycle,
        phase1_cycles: Some(phase1_cycles),
        updates_performed: performed,
        updates_skipped: skipped,
        wall_time,
        setup_time,
        d,
        n,
        num_edges: g.num_edges(),
        loglik: f64::NAN,
        loglik_incremental: None,
        dual_bound: None,
        duality_gap: None,
        grad_norm: f64::NAN,
        eps: cfg.eps,
        eps_prime,
        eps_dprime,
        rank_trace,
        min_eig_sigma: Some(sigma_min_eig),
        certified: None,
        trace: Vec::new(),
        existence,
        notes,
        k_hat: SymMatrix::zeros(d),
        sigma_hat,
    };

    let Some(k) = state.k else {
        if stable {
            return Err(GgmError::StuckSingular(Box::new(report)));
        }
        return Err(GgmError::MaxCyclesExceeded(Box::new(report)));
    };
    report.grad_norm = max_colsum(&(pattern_project(&k, g)?.matrix() - k.matrix()));
    let k_check = feasible_k(&k, g)?;
    let k_hat = work.unscale_concentration(&k_check);
    report.certified = Some(cfg.auto_scale && report.grad_norm <= 1.0 / d as f64);
    report.loglik = loglik(&k_hat, stats)?;
    report.dual_bound = Some(dual_bound(&report.sigma_hat, stats)?);
    report.duality_gap = Some(duality_gap(&k_hat, &report.sigma_hat, stats)?);
    report.k_hat = k_hat;
    if converged {
        Ok(report)
    } else {
        Err(GgmError::MaxCyclesExceeded(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_grid, gen_random_density};
    use crate::likelihood::empirical_cov;
    use crate::numkernel::{logdet_pd, max_abs_dev, rank_tol};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    fn random_stats(d: usize, n: usize, seed: u64) -> SampleStats {
        empirical_cov(&data(n, d, seed), false).unwrap()
    }

    #[test]
    fn isolated_vertex_update() {
        let st = random_stats(4, 20, 1);
        let g = Graph::new(4, [(1, 2), (2, 3)]).unwrap();
        let mut sigma = st.s().clone();
        let upd = vertex_update(&mut sigma, st.s(), &g, 0).unwrap();
        assert_eq!(upd.beta.len(), 0);
        assert_eq!(upd.schur_value, st.s().get(0, 0));
        for r in 1..4 {
            assert_eq!(sigma.get(r, 0), 0.0);
        }
    }

    #[test]
    fn fully_connected_vertex_is_untouched() {
        let st = random_stats(4, 20, 2);
        let g = Graph::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut sigma = st.s().clone();
        vertex_update(&mut sigma, st.s(), &g, 0).unwrap();
        assert_eq!(sigma, *st.s());
    }

    #[test]
    fn four_cycle_update_matches_direct_formula() {
        let st = empirical_cov(&data(4, 4, 3), true).unwrap();
        let g = Graph::cycle(4).unwrap();
        let s = st.s();
        let mut sigma = s.clone();
        vertex_update(&mut sigma, s, &g, 0).unwrap();
        // Sigma_{2,0} = Sigma_{2,{1,3}} (Sigma_{{1,3},{1,3}})^- S_{{1,3},0}
        let b = [1, 3];
        let ginv = gen_inverse_raw(&gather(s.matrix(), &b, &b)).unwrap();
        let want = (gather(s.matrix(), &[2], &b) * ginv * gather(s.matrix(), &b, &[0]))[(0, 0)];
        assert!((sigma.get(2, 0) - want).abs() < 1e-12);
        assert_eq!(rank_tol(&sigma), 4);
    }

    #[test]
    fn update_preserves_pattern_and_raises_determinant() {
        let st = random_stats(8, 30, 4);
        let g = gen_random_density(8, 0.3, 4).unwrap();
        let mut sigma = st.s().clone();
        let mut last = logdet_pd(&sigma).unwrap();
        for _ in 0..3 {
            for u in 0..8 {
                vertex_update(&mut sigma, st.s(), &g, u).unwrap();
                assert_eq!(pattern_project(&sigma, &g).unwrap(), pattern_project(st.s(), &g).unwrap());
                let now = logdet_pd(&sigma).unwrap();
                assert!(now >= last - 1e-12);
                last = now;
            }
        }
    }

    fn track_against_inverse(g: &Graph, st: &SampleStats) {
        let d = g.d();
        let mut sigma = st.s().clone();
        let mut k = pd_inverse(&sigma).unwrap();
        for _ in 0..3 {
            for u in 0..d {
                let upd = vertex_update(&mut sigma, st.s(), g, u).unwrap();
                k_track_update(&mut k, g, u, &upd).unwrap();
                let direct = pd_inverse(&sigma).unwrap();
                assert!(max_abs_dev(&(k.matrix() - direct.matrix())) < 1e-9, "vertex {u}");
                assert!(g.rest(u).unwrap().iter().all(|&r| k.get(r, u) == 0.0));
            }
        }
    }

    #[test]
    fn k_tracking_equals_inversion() {
        let st = random_stats(7, 40, 5);
        track_against_inverse(&gen_random_density(7, 0.4, 5).unwrap(), &st);
        track_against_inverse(&Graph::new(7, [(1, 2), (3, 4), (4, 5)]).unwrap(), &st);
    }

    #[test]
    fn nonpositive_schur_is_rejected() {
        let mut k = SymMatrix::identity(2);
        let upd = VertexUpdate { beta: DVector::zeros(0), schur_value: 0.0 };
        let g = Graph::empty(2).unwrap();
        assert!(matches!(k_track_update(&mut k, &g, 0, &upd), Err(GgmError::NonpositiveSchur { vertex: 0, .. })));
    }

    #[test]
    fn skip_check_examples() {
        let g = Graph::path(3).unwrap();
        let k = SymMatrix::from_row_slice(3, &[2., -1., 0., -1., 2., -1., 0., -1., 2.]).unwrap();
        assert!((0..3).all(|u| skip_check(&k, &g, u, 1e-12).unwrap()));
        let mut k2 = k.clone();
        k2.set(0, 2, 2e-4);
        assert!(!skip_check(&k2, &g, 0, 1e-4).unwrap());
        let by_vertex = (0..3).map(|u| rest_norm(&k2, &g, u).unwrap()).fold(0.0, f64::max);
        let direct = max_colsum(&(pattern_project(&k2, &g).unwrap().matrix() - k2.matrix()));
        assert_eq!(by_vertex, direct);
    }

    #[test]
    fn feasible_k_examples() {
        let g = Graph::path(3).unwrap();
        let k = SymMatrix::from_row_slice(3, &[2., -1., 0., -1., 2., -1., 0., -1., 2.]).unwrap();
        assert_eq!(feasible_k(&k, &g).unwrap(), k);
        let full = pd_inverse(&random_stats(3, 10, 6).s().clone()).unwrap();
        assert_eq!(feasible_k(&full, &Graph::complete(3).unwrap()).unwrap(), full);
        let bad = SymMatrix::from_row_slice(2, &[1., 2., 2., 1.]).unwrap();
        assert!(matches!(feasible_k(&bad, &Graph::complete(2).unwrap()), Err(GgmError::CertificateViolated { .. })));
    }

    #[test]
    fn complete_graph_has_no_gap() {
        let st = random_stats(4, 20, 7);
        let r = ncd_fit(&st, &Graph::complete(4).unwrap(), &NcdConfig::default()).unwrap();
        assert!(max_abs_dev(&(r.sigma_hat.matrix() - st.s().matrix())) < 1e-12);
        assert!(max_abs_dev(&(r.k_hat.matrix() - pd_inverse(st.s()).unwrap().matrix())) < 1e-9);
        assert!(r.duality_gap.unwrap().abs() < 1e-9);
    }

    #[test]
    fn grid_fit_is_certified() {
        let g = gen_grid(4, 5).unwrap();
        let st = random_stats(20, 50, 8);
        let r = ncd_fit(&st, &g, &NcdConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.certified, Some(true));
        assert!(r.grad_norm <= r.eps_dprime);
        assert!(min_eig(&r.k_hat) > 0.0);
        assert!(r.duality_gap.unwrap() >= -1e-10);
        assert_eq!(pattern_project(&r.sigma_hat, &g).unwrap(), pattern_project(st.s(), &g).unwrap());
    }

    #[test]
    fn four_cycle_with_rank_two_gets_stuck() {
        let st = empirical_cov(&data(3, 4, 9), true).unwrap();
        match ncd_fit(&st, &Graph::cycle(4).unwrap(), &NcdConfig::default()) {
            Err(GgmError::StuckSingular(r)) => assert!(r.rank_trace.iter().all(|&k| k <= 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn four_cycle_with_rank_three_recovers() {
        let st = empirical_cov(&data(4, 4, 10), true).unwrap();
        let r = ncd_fit(&st, &Graph::cycle(4).unwrap(), &NcdConfig::default()).unwrap();
        assert_eq!(r.rank_trace[0], 3);
        assert_eq!(r.rank_trace[1], 4);
    }

    #[test]
    fn start_policies_agree() {
        let st = random_stats(6, 30, 11);
        let g = Graph::path(6).unwrap();
        let a = ncd_fit(&st, &g, &NcdConfig::default()).unwrap();
        let chordal = NcdConfig { start_policy: StartPolicy::Chordal, ..NcdConfig::default() };
        let b = ncd_fit(&st, &g, &chordal).unwrap();
        assert!(max_abs_dev(&(a.k_hat.matrix() - b.k_hat.matrix())) < 1e-3);
        let user = NcdConfig { start_policy: StartPolicy::UserSupplied(b.sigma_hat.clone()), ..NcdConfig::default() };
        assert!(ncd_fit(&st, &g, &user).unwrap().converged);
        let wrong = NcdConfig { start_policy: StartPolicy::UserSupplied(SymMatrix::identity(6)), ..NcdConfig::default() };
        assert!(matches!(ncd_fit(&st, &g, &wrong), Err(GgmError::InvalidConfig(_))));
    }

    #[test]
    fn singular_start_can_be_refused() {
        let st = empirical_cov(&data(4, 4, 12), true).unwrap();
        let cfg = NcdConfig { allow_psd_start: false, ..NcdConfig::default() };
        assert!(matches!(ncd_fit(&st, &Graph::cycle(4).unwrap(), &cfg), Err(GgmError::NotPositiveDefinite)));
    }
}
