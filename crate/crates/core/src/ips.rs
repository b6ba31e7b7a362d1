//! Iterative proportional scaling.
//!
//! Each update matches the marginal of `Sigma = K^{-1}` on a complete set
//! `c` to `S_cc` while leaving the conditional distribution of the rest
//! given `c` alone. Only the `c x c` block of `K` changes, so zeros at
//! non-edges are never touched. Two ways of forming the update:
//!
//! * concentration version: `K_cc <- (S_cc)^{-1} + K_ca (K_aa)^{-1} K_ac`,
//!   no covariance is stored;
//! * covariance version: `K_cc <- (S_cc)^{-1} + K_cc - (Sigma_cc)^{-1}` with
//!   `Sigma` carried along by a rank-`|c|` correction, so nothing larger than
//!   `|c| x |c|` is ever inverted.
//!
//! Sets whose marginal already matches within `2 eps / n` are skipped, and
//! the fit stops at the end of the first cycle after which every set would
//! be skipped, which is the same as `||Sigma(G) - S(G)||_inf < 2 eps / n`.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{GgmError, Result};
use crate::existence::check_existence;
use crate::graph::Graph;
use crate::likelihood::{grad_norm_primal, loglik, SampleStats};
use crate::numkernel::{
    gather, logdet_pd_raw, max_abs_dev, pattern_project, pd_inverse, pd_inverse_raw, pd_solve, IndexSet,
    SymMatrix,
};
use crate::report::{Algorithm, CycleTrace, FitReport, UpdateSets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IpsVariant {
    Concentration,
    #[default]
    Covariance,
}

#[derive(Debug, Clone)]
pub struct IpsConfig {
    pub variant: IpsVariant,
    pub update_sets: UpdateSets,
    pub eps: f64,
    pub max_cycles: usize,
    pub track_loglik: bool,
    /// Record loglik and the global gradient norm after every cycle.
    pub trace: bool,
    /// Starting concentration matrix; identity when absent.
    pub start: Option<SymMatrix>,
}

impl Default for IpsConfig {
    fn default() -> Self {
        IpsConfig {
            variant: IpsVariant::Covariance,
            update_sets: UpdateSets::Edges,
            eps: 1e-3,
            max_cycles: 50_000,
            track_loglik: true,
            trace: false,
            start: None,
        }
    }
}

impl IpsConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self.variant {
            IpsVariant::Concentration => Algorithm::IpsCon,
            IpsVariant::Covariance => Algorithm::IpsCov,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpsState {
    pub k: SymMatrix,
    /// Kept equal to `K^{-1}` by the covariance version only.
    pub sigma: Option<SymMatrix>,
    pub loglik: f64,
    pub cycle: usize,
    pub updates_performed: usize,
    pub updates_skipped: usize,
}

impl IpsState {
    pub fn identity(d: usize, variant: IpsVariant) -> Self {
        IpsState {
            k: SymMatrix::identity(d),
            sigma: (variant == IpsVariant::Covariance).then(|| SymMatrix::identity(d)),
            loglik: f64::NAN,
            cycle: 0,
            updates_performed: 0,
            updates_skipped: 0,
        }
    }
}

/// One update as seen by an observer of [`ips_fit_observed`].
#[derive(Debug)]
pub struct IpsStep<'a> {
    pub cycle: usize,
    pub set: &'a [usize],
    pub k: &'a SymMatrix,
    pub sigma: Option<&'a SymMatrix>,
    /// Running log-likelihood after this update, when tracked.
    pub loglik: Option<f64>,
    pub loglik_delta: Option<f64>,
}

/// A complete set with its cached sample marginal.
#[derive(Debug, Clone)]
pub struct UpdateSet {
    pub c: IndexSet,
    pub s_cc: DMatrix<f64>,
    pub s_cc_inv: DMatrix<f64>,
}

/// Edges (plus singletons for isolated vertices) or maximal cliques, sorted
/// lexicographically.
pub fn update_system(g: &Graph, kind: UpdateSets) -> Vec<IndexSet> {
    let mut sets: Vec<Vec<usize>> = match kind {
        UpdateSets::Cliques => g.cliques(),
        UpdateSets::Edges => g
            .edges()
            .iter()
            .map(|&(u, v)| vec![u, v])
            .chain((0..g.d()).filter(|&v| g.degree(v) == 0).map(|v| vec![v]))
            .collect(),
    };
    sets.sort();
    sets.into_iter().map(|s| IndexSet::new(s).expect("sets are sorted")).collect()
}

/// Caches `S_cc` and its inverse for every set.
pub fn prepare_sets(stats: &SampleStats, sets: Vec<IndexSet>) -> Result<Vec<UpdateSet>> {
    sets.into_iter()
        .map(|c| {
            let s_cc = gather(stats.s().matrix(), &c, &c);
            let s_cc_inv = pd_inverse_raw(&s_cc).map_err(|_| GgmError::LocalMarginalSingular(c.to_vec()))?;
            Ok(UpdateSet { c, s_cc, s_cc_inv })
        })
        .collect()
}

/// `L = K_ca (K_aa)^{-1} K_ac` with `a` the complement of `c`.
pub fn concentration_adjustment(k: &SymMatrix, c: &IndexSet) -> Result<DMatrix<f64>> {
    let a = c.complement(k.order());
    if a.is_empty() {
        return Ok(DMatrix::zeros(c.len(), c.len()));
    }
    let k_ac = gather(k.matrix(), &a, c);
    let x = pd_solve(&gather(k.matrix(), &a, &a), &k_ac)?;
    Ok(k_ac.transpose() * x)
}

fn write_block(k: &mut SymMatrix, c: &[usize], block: &DMatrix<f64>) {
    for (i, &u) in c.iter().enumerate() {
        for (j, &v) in c.iter().enumerate().skip(i) {
            k.set(u, v, 0.5 * (block[(i, j)] + block[(j, i)]));
        }
    }
}

/// Concentration-version update of the `c x c` block of `K`.
pub fn ips_update_con(k: &mut SymMatrix, c: &IndexSet, s_cc_inv: &DMatrix<f64>) -> Result<()> {
    let l = concentration_adjustment(k, c)?;
    write_block(k, c, &(s_cc_inv + l));
    Ok(())
}

/// Covariance-version update of `K` and `Sigma` on the set `c`.
pub fn ips_update_cov(
    k: &mut SymMatrix,
    sigma: &mut SymMatrix,
    c: &IndexSet,
    s_cc: &DMatrix<f64>,
    s_cc_inv: &DMatrix<f64>,
) -> Result<()> {
    let sigma_cc = gather(sigma.matrix(), c, c);
    let sigma_cc_inv = pd_inverse_raw(&sigma_cc)?;
    let k_cc = gather(k.matrix(), c, c);
    write_block(k, c, &(k_cc + s_cc_inv - &sigma_cc_inv));

    // Sigma <- Sigma - Sigma_{.c} H Sigma_{c.}, H = P^{-1} - P^{-1} S_cc P^{-1}, P = Sigma_cc.
    // This reproduces every block of the closed-form update, with
    // Sigma_cc landing exactly on S_cc.
    let d = sigma.order();
    let h = &sigma_cc_inv - &sigma_cc_inv * s_cc * &sigma_cc_inv;
    let w = DMatrix::from_fn(d, c.len(), |i, j| sigma.get(i, c[j]));
    let m = &w * h;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GgmError::NonFiniteResult);
    }
    let data = sigma.matrix_mut().as_mut_slice();
    for j in 0..d {
        let col = &mut data[j * d..j * d + j + 1];
        for t in 0..c.len() {
            let coef = w[(j, t)];
            for (x, &mi) in col.iter_mut().zip(&m.column(t).as_slice()[..=j]) {
                *x -= coef * mi;
            }
        }
    }
    for j in 0..d {
        for i in 0..j {
            data[i * d + j] = data[j * d + i];
        }
    }
    for (a, &u) in c.iter().enumerate() {
        for (b, &v) in c.iter().enumerate() {
            data[v * d + u] = s_cc[(a, b)];
        }
    }
    Ok(())
}

/// Log-likelihood increase from matching `Sigma_cc` to `S_cc`:
/// `n/2 * (tr A - log det A - |c|)` with `A = (Sigma_cc)^{-1} S_cc`.
pub fn loglik_delta(sigma_cc: &DMatrix<f64>, s_cc: &DMatrix<f64>, n: usize) -> Result<f64> {
    let a = pd_solve(sigma_cc, s_cc)?;
    let logdet_a = logdet_pd_raw(s_cc)? - logdet_pd_raw(sigma_cc)?;
    Ok(n as f64 / 2.0 * (a.trace() - logdet_a - sigma_cc.nrows() as f64))
}

pub fn ips_fit(stats: &SampleStats, g: &Graph, cfg: &IpsConfig) -> Result<FitReport> {
    ips_fit_observed(stats, g, cfg, &mut |_| {})
}

/// As [`ips_fit`], calling `observer` after every performed update.
pub fn ips_fit_observed(
    stats: &SampleStats,
    g: &Graph,
    cfg: &IpsConfig,
    observer: &mut dyn FnMut(&IpsStep<'_>),
) -> Result<FitReport> {
    let d = stats.d();
    if g.d() != d {
        return Err(GgmError::DimensionMismatch { expected: d, found: g.d() });
    }
    if !(cfg.eps > 0.0) || cfg.max_cycles == 0 {
        return Err(GgmError::InvalidConfig("eps must be positive and max_cycles at least 1".into()));
    }
    let n = stats.n();
    let eps_prime = 2.0 * cfg.eps / n as f64;
    let eps_dprime = eps_prime.min(1.0 / d as f64);
    let setup_start = Instant::now();
    let sets = prepare_sets(stats, update_system(g, cfg.update_sets))?;

    let mut state = IpsState::identity(d, cfg.variant);
    if let Some(start) = &cfg.start {
        if start.order() != d {
            return Err(GgmError::DimensionMismatch { expected: d, found: start.order() });
        }
        if pattern_project(start, g)? != *start {
            return Err(GgmError::InvalidConfig("start has nonzero entries at non-edges".into()));
        }
        let sigma = pd_inverse(start)?;
        state.k = start.clone();
        state.sigma = (cfg.variant == IpsVariant::Covariance).then_some(sigma);
    }
    if cfg.track_loglik {
        state.loglik = loglik(&state.k, stats)?;
    }
    let setup_time = setup_start.elapsed().as_secs_f64();

    let loop_start = Instant::now();
    let mut trace = Vec::new();
    let mut k_size = Vec::new();
    let mut converged = false;
    let mut final_sigma = None;
    while state.cycle < cfg.max_cycles {
        state.cycle += 1;
        for set in &sets {
            let c = &set.c;
            let (sigma_cc, adjustment) = match cfg.variant {
                IpsVariant::Covariance => {
                    let sigma = state.sigma.as_ref().expect("covariance version keeps Sigma");
                    (gather(sigma.matrix(), c, c), None)
                }
                IpsVariant::Concentration => {
                    let l = concentration_adjustment(&state.k, c)?;
                    let sigma_cc = pd_inverse_raw(&(gather(state.k.matrix(), c, c) - &l))?;
                    (sigma_cc, Some(l))
                }
            };
            if max_abs_dev(&(&sigma_cc - &set.s_cc)) < eps_prime {
                state.updates_skipped += 1;
                continue;
            }
            let delta = if cfg.track_loglik { Some(loglik_delta(&sigma_cc, &set.s_cc, n)?) } else { None };
            match adjustment {
                Some(l) => write_block(&mut state.k, c, &(&set.s_cc_inv + l)),
                None => {
                    let sigma = state.sigma.as_mut().expect("covariance version keeps Sigma");
                    ips_update_cov(&mut state.k, sigma, c, &set.s_cc, &set.s_cc_inv)?;
                }
            }
            if let Some(delta) = delta {
                state.loglik += delta;
            }
            state.updates_performed += 1;
            observer(&IpsStep {
                cycle: state.cycle,
                set: c,
                k: &state.k,
                sigma: state.sigma.as_ref(),
                loglik: delta.map(|_| state.loglik),
                loglik_delta: delta,
            });
        }

        let sigma = match (&state.sigma, cfg.variant) {
            (Some(s), IpsVariant::Covariance) => {
                #[cfg(debug_assertions)]
                if d <= 200 {
                    let err = max_abs_dev(&(state.k.matrix() * s.matrix() - DMatrix::identity(d, d)));
                    debug_assert!(err <= 1e-6 * d as f64, "K Sigma drifted from I by {err:e}");
                }
                s.clone()
            }
            _ => pd_inverse(&state.k)?,
        };
        let mut grad = grad_norm_primal(&sigma, stats, g)?;
        if grad < eps_prime {
            // Confirm against a fresh inverse so that the report never
            // claims more than K itself delivers.
            let fresh = pd_inverse(&state.k)?;
            grad = grad_norm_primal(&fresh, stats, g)?;
            if grad < eps_prime {
                converged = true;
                final_sigma = Some(fresh);
            } else if let Some(s) = state.sigma.as_mut() {
                *s = fresh;
            }
        }
        if cfg.trace {
            trace.push(CycleTrace { cycle: state.cycle, loglik: loglik(&state.k, stats)?, grad_norm: grad });
        }
        k_size.push(max_abs_dev(state.k.matrix()));
        if converged {
            break;
        }
    }
    let wall_time = loop_start.elapsed().as_secs_f64();

    let sigma_hat = match final_sigma {
        Some(s) => s,
        None => pd_inverse(&state.k)?,
    };
    let mut notes = Vec::new();
    if !converged && k_size.len() >= 10 && k_size[k_size.len() - 10..].windows(2).all(|w| w[1] > w[0]) {
        notes.push(
            "largest concentration entry grew in each of the last 10 cycles; \
             the maximum likelihood estimate may not exist"
                .to_string(),
        );
    }
    let report = FitReport {
        algorithm: cfg.algorithm(),
        update_sets: Some(cfg.update_sets),
        converged,
        cycles: state.cycle,
        phase1_cycles: None,
        updates_performed: state.updates_performed,
        updates_skipped: state.updates_skipped,
        wall_time,
        setup_time,
        d,
        n,
        num_edges: g.num_edges(),
        loglik: loglik(&state.k, stats)?,
        loglik_incremental: cfg.track_loglik.then_some(state.loglik),
        dual_bound: None,
        duality_gap: None,
        grad_norm: grad_norm_primal(&sigma_hat, stats, g)?,
        eps: cfg.eps,
        eps_prime,
        eps_dprime,
        rank_trace: Vec::new(),
        min_eig_sigma: None,
        certified: None,
        trace,
        existence: check_existence(g, stats),
        notes,
        k_hat: state.k,
        sigma_hat,
    };
    if converged {
        Ok(report)
    } else {
        Err(GgmError::MaxCyclesExceeded(Box::new(report)))
    }
}
