//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::cell::RefCell;
use std::time::Instant;

use ggmfit::ips::IpsStep;
use ggmfit::likelihood::loglik;
use ggmfit::ncd::{NcdStep, Phase};
use ggmfit::numkernel::pattern_project;
use ggmfit::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- oracles

/// Gauss-Jordan inverse with partial pivoting.
fn gj_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::identity(d, d);
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
        a.swap_rows(col, piv);
        inv.swap_rows(col, piv);
        let p = a[(col, col)];
        for j in 0..d {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..d {
            if i != col {
                let f = a[(i, col)];
                if f != 0.0 {
                    for j in 0..d {
                        a[(i, j)] -= f * a[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    inv
}

fn eigen_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn eigen_rank(m: &DMatrix<f64>) -> usize {
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let top = ev.max();
    ev.iter().filter(|&&l| l > 1e-10 * top).count()
}

/// log det by Gaussian elimination; `None` if a pivot is not positive.
fn ge_logdet(m: &DMatrix<f64>) -> Option<f64> {
    let mut a = m.clone();
    let d = a.nrows();
    let mut acc = 0.0;
    for k in 0..d {
        let p = a[(k, k)];
        if !(p > 0.0) {
            return None;
        }
        acc += p.ln();
        for i in k + 1..d {
            let f = a[(i, k)] / p;
            for j in k..d {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    Some(acc)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn colsum_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest deviation from `S` over the diagonal and the edges.
fn edge_mismatch(sigma: &DMatrix<f64>, s: &DMatrix<f64>, g: &Graph) -> f64 {
    let mut worst = 0.0f64;
    for v in 0..g.d() {
        worst = worst.max((sigma[(v, v)] - s[(v, v)]).abs());
    }
    for &(u, v) in g.edges() {
        worst = worst.max((sigma[(u, v)] - s[(u, v)]).abs());
    }
    worst
}

/// Repeatedly strip a vertex of minimum degree.
fn peeling_coreness(g: &Graph) -> usize {
    let mut alive = vec![true; g.d()];
    let mut best = 0;
    for _ in 0..g.d() {
        let deg = |v: usize, alive: &[bool]| g.boundary(v).unwrap().iter().filter(|&&w| alive[w]).count();
        let v = (0..g.d()).filter(|&v| alive[v]).min_by_key(|&v| deg(v, &alive)).unwrap();
        best = best.max(deg(v, &alive));
        alive[v] = false;
    }
    best
}

/// Random graph made chordal by eliminating vertices in a random order.
fn random_chordal(d: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut adj = vec![vec![false; d]; d];
    for u in 0..d {
        for v in u + 1..d {
            if rng.random::<f64>() < p {
                adj[u][v] = true;
                adj[v][u] = true;
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut gone = vec![false; d];
    for &v in &order {
        let nb: Vec<usize> = (0..d).filter(|&w| !gone[w] && w != v && adj[v][w]).collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a][b] = true;
                }
            }
        }
        gone[v] = true;
    }
    let edges = (0..d).flat_map(|u| (u + 1..d).map(move |v| (u, v))).filter(|&(u, v)| adj[u][v]);
    Graph::new(d, edges.collect::<Vec<_>>()).unwrap()
}

fn stats_for(n: usize, d: usize, seed: u64) -> SampleStats {
    empirical_cov(&simulate_standard_normal(n, d, seed), true).unwrap()
}

// ---------------------------------------------------- monotonicity ledger

#[derive(Default)]
struct Ledger {
    ips_updates: usize,
    ips_violations: Vec<String>,
    ncd_updates: usize,
    ncd_violations: Vec<String>,
    ktrack_steps: usize,
    ktrack_worst: f64,
}

thread_local! {
    static LEDGER: RefCell<Ledger> = RefCell::new(Ledger::default());
}

fn ips_checked(stats: &SampleStats, g: &Graph, cfg: &IpsConfig) -> Result<FitReport> {
    let mut last = loglik(&SymMatrix::identity(g.d()), stats).unwrap();
    ips_fit_observed(stats, g, cfg, &mut |step: &IpsStep<'_>| {
        LEDGER.with(|l| {
            let mut l = l.borrow_mut();
            l.ips_updates += 1;
            if let Some(delta) = step.loglik_delta {
                if delta < -1e-12 {
                    l.ips_violations.push(format!("update delta {delta:e}"));
                }
            }
            let now = loglik(step.k, stats).unwrap();
            if now - last < -1e-12 * last.abs().max(1.0) {
                l.ips_violations.push(format!("loglik fell by {:e}", last - now));
            }
            last = now;
        })
    })
}

fn ncd_checked(stats: &SampleStats, g: &Graph, cfg: &NcdConfig) -> Result<FitReport> {
    let mut last: Option<f64> = None;
    let d = g.d();
    ncd_fit_observed(stats, g, cfg, &mut |step: &NcdStep<'_>| {
        LEDGER.with(|l| {
            let mut l = l.borrow_mut();
            l.ncd_updates += 1;
            if let Some(now) = ge_logdet(step.sigma.matrix()) {
                if let Some(prev) = last {
                    if now - prev < -1e-10 {
                        l.ncd_violations.push(format!("log det fell by {:e}", prev - now));
                    }
                }
                last = Some(now);
            }
            if step.phase == Phase::KTracked && d <= 30 {
                let direct = gj_inverse(step.sigma.matrix());
                let err = max_abs(&(step.k.unwrap().matrix() - &direct));
                l.ktrack_steps += 1;
                l.ktrack_worst = l.ktrack_worst.max(err / d as f64);
            }
        })
    })
}

// ------------------------------------------------------------ criteria

fn closed_forms() -> Outcome {
    let start = Instant::now();
    let tight_ips = IpsConfig { eps: 1e-9, ..IpsConfig::default() };
    let tight_ncd = NcdConfig { eps: 1e-9, ..NcdConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..5u64 {
        let d = 3 + i as usize * 3;
        let st = stats_for(50, d, 500 + i);
        let s = st.s().matrix().clone();
        let empty = Graph::empty(d).unwrap();
        for r in [ips_checked(&st, &empty, &IpsConfig::default()), ncd_checked(&st, &empty, &NcdConfig::default())] {
            let r = r.map_err(|e| e.to_string())?;
            let want = DMatrix::from_fn(d, d, |a, b| if a == b { 1.0 / s[(a, a)] } else { 0.0 });
            ensure!(max_abs(&(r.k_hat.matrix() - want)) < 1e-12, "empty graph, {}: K is not diag(1/S)", r.algorithm);
        }
        let full = Graph::complete(d).unwrap();
        let cliques = IpsConfig { update_sets: UpdateSets::Cliques, ..IpsConfig::default() };
        for r in [ips_checked(&st, &full, &cliques), ncd_checked(&st, &full, &NcdConfig::default())] {
            let r = r.map_err(|e| e.to_string())?;
            ensure!(max_abs(&(r.sigma_hat.matrix() - &s)) < 1e-12, "complete graph, {}: Sigma != S", r.algorithm);
        }
    }
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let d = rng.random_range(4..=15);
        let g = random_chordal(d, 0.15, &mut rng);
        ensure!(ggmfit::existence::is_decomposable(&g), "generator produced a non-chordal graph");
        let st = stats_for(50, d, 900 + i);
        let oracle = decomposable_mle(&st, &g).map_err(|e| e.to_string())?;
        let a = ips_checked(&st, &g, &tight_ips).map_err(|e| e.to_string())?;
        let b = ncd_checked(&st, &g, &tight_ncd).map_err(|e| e.to_string())?;
        for r in [&a, &b] {
            let dev = max_abs(&(r.k_hat.matrix() - oracle.matrix()));
            worst = worst.max(dev);
            ensure!(dev < 1e-6, "instance {i}, {}: |K - K_closed| = {dev:e}", r.algorithm);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("20 chordal instances, worst deviation {worst:.1e}, {secs:.2} s"))
}

/// `(graph, stats)` pairs with d <= 30 and n well above the clique sizes.
fn random_instances(count: usize, seed: u64) -> Vec<(Graph, SampleStats)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let d = rng.random_range(5..=30);
            let p = rng.random_range(0.05..0.5);
            let n = d + rng.random_range(5..40);
            (gen_random_density(d, p, seed + i as u64).unwrap(), stats_for(n, d, seed * 1000 + i as u64))
        })
        .collect()
}

fn likelihood_equations() -> Outcome {
    let mut worst_ips = 0.0f64;
    let mut worst_ncd = 0.0f64;
    for (i, (g, st)) in random_instances(50, 7).iter().enumerate() {
        let r = ips_checked(st, g, &IpsConfig::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let sigma = gj_inverse(r.k_hat.matrix());
        let mism = edge_mismatch(&sigma, st.s().matrix(), g);
        ensure!(mism <= r.eps_prime, "instance {i}: ips gradient {mism:e} > {:e}", r.eps_prime);
        worst_ips = worst_ips.max(mism / r.eps_prime);

        let r = ncd_checked(st, g, &NcdConfig::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let d = g.d();
        let eps_dprime = r.eps_prime.min(1.0 / d as f64);
        let sig = r.sigma_hat.matrix();
        let corr = DMatrix::from_fn(d, d, |a, b| sig[(a, b)] / (sig[(a, a)] * sig[(b, b)]).sqrt());
        let k = gj_inverse(&corr);
        let kg = pattern_project(&SymMatrix::symmetrized(k.clone()), g).unwrap();
        let norm = colsum_norm(&(kg.matrix() - &k));
        ensure!(norm <= eps_dprime, "instance {i}: ncd pattern norm {norm:e} > {eps_dprime:e}");
        let lam = eigen_min(r.k_hat.matrix());
        ensure!(lam > 0.0, "instance {i}: min eigenvalue of K = {lam:e}");
        worst_ncd = worst_ncd.max(norm / eps_dprime);
    }
    Ok(format!(
        "50 instances; worst ips gradient {worst_ips:.2} x 2eps/n, worst ncd pattern norm {worst_ncd:.2} x eps''"
    ))
}

fn monotonicity() -> Outcome {
    LEDGER.with(|l| {
        let l = l.borrow();
        ensure!(l.ips_updates > 0 && l.ncd_updates > 0, "no fits were observed");
        ensure!(l.ips_violations.is_empty(), "ips: {} violations, first {}", l.ips_violations.len(), l.ips_violations[0]);
        ensure!(l.ncd_violations.is_empty(), "ncd: {} violations, first {}", l.ncd_violations.len(), l.ncd_violations[0]);
        Ok(format!("{} ips updates and {} ncd updates checked", l.ips_updates, l.ncd_updates))
    })
}

fn bookkeeping() -> Outcome {
    let mut worst = 0.0f64;
    for (i, (g, st)) in random_instances(20, 11).iter().enumerate() {
        for variant in [IpsVariant::Covariance, IpsVariant::Concentration] {
            let cfg = IpsConfig { variant, ..IpsConfig::default() };
            let r = ips_checked(st, g, &cfg).map_err(|e| format!("instance {i}: {e}"))?;
            let start = loglik(&SymMatrix::identity(g.d()), st).unwrap();
            let inc = r.loglik_incremental.unwrap() - start;
            let direct = loglik(&r.k_hat, st).unwrap() - start;
            let err = (inc - direct).abs();
            worst = worst.max(err);
            ensure!(err < 1e-6, "instance {i}: accumulated {inc} vs endpoint {direct}");
        }
        ncd_checked(st, g, &NcdConfig::default()).map_err(|e| format!("instance {i}: {e}"))?;
    }
    // Fits rarely need the K-tracked phase, so drive the update pair directly
    // from S for a few sweeps and compare with inversion after every step.
    for (i, (g, st)) in random_instances(20, 29).iter().enumerate() {
        let d = g.d();
        let s = st.s().matrix();
        let corr = SymMatrix::symmetrized(DMatrix::from_fn(d, d, |a, b| s[(a, b)] / (s[(a, a)] * s[(b, b)]).sqrt()));
        let mut sigma = corr.clone();
        let mut k = SymMatrix::symmetrized(gj_inverse(sigma.matrix()));
        for _ in 0..3 {
            for u in 0..d {
                let upd = ggmfit::ncd::vertex_update(&mut sigma, &corr, g, u).map_err(|e| e.to_string())?;
                ggmfit::ncd::k_track_update(&mut k, g, u, &upd).map_err(|e| format!("instance {i}: {e}"))?;
                let err = max_abs(&(k.matrix() - gj_inverse(sigma.matrix())));
                LEDGER.with(|l| {
                    let mut l = l.borrow_mut();
                    l.ktrack_steps += 1;
                    l.ktrack_worst = l.ktrack_worst.max(err / d as f64);
                });
            }
        }
    }
    LEDGER.with(|l| {
        let l = l.borrow();
        ensure!(l.ktrack_steps > 0, "no K-tracked steps observed");
        ensure!(l.ktrack_worst <= 1e-9, "K tracking off by {:e} * d", l.ktrack_worst);
        Ok(format!(
            "loglik drift {worst:.1e}; {} K-tracked steps, worst {:.1e} * d",
            l.ktrack_steps, l.ktrack_worst
        ))
    })
}

fn four_cycle() -> Outcome {
    let start = Instant::now();
    let g = Graph::cycle(4).unwrap();
    for seed in 0..100u64 {
        let st = stats_for(3, 4, seed);
        let mut max_rank = 0;
        let r = ncd_fit_observed(&st, &g, &NcdConfig::default(), &mut |s| {
            max_rank = max_rank.max(eigen_rank(s.sigma.matrix()));
        });
        ensure!(matches!(r, Err(GgmError::StuckSingular(_))), "n=3 draw {seed}: not StuckSingular");
        ensure!(max_rank <= 2, "n=3 draw {seed}: rank reached {max_rank}");

        let st = stats_for(4, 4, seed);
        let mut ranks = Vec::new();
        let r = ncd_fit_observed(&st, &g, &NcdConfig::default(), &mut |s| ranks.push(eigen_rank(s.sigma.matrix())));
        ensure!(eigen_rank(st.s().matrix()) == 3, "n=4 draw {seed}: S does not have rank 3");
        ensure!(ranks.first() == Some(&4), "n=4 draw {seed}: rank after first update {:?}", ranks.first());
        ensure!(r.is_ok_and(|r| r.converged), "n=4 draw {seed}: did not converge");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("100/100 stuck at rank 2, 100/100 converged from rank 3, {secs:.2} s"))
}

fn duality_bracket() -> Outcome {
    let mut worst_gap_ratio = 0.0f64;
    let mut count = 0;
    for (i, (g, st)) in random_instances(25, 13).iter().enumerate() {
        let r = ncd_checked(st, g, &NcdConfig::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let reference = ips_checked(st, g, &IpsConfig { eps: 1e-9, ..IpsConfig::default() })
            .map_err(|e| format!("instance {i} reference: {e}"))?;
        let l_ncd = loglik(&r.k_hat, st).unwrap();
        let l_ref = loglik(&reference.k_hat, st).unwrap();
        let bound = r.dual_bound.unwrap();
        // roundoff in evaluating log-likelihoods of size |l|
        let slack = 1e-12 * l_ref.abs().max(1.0);
        ensure!(l_ncd <= l_ref + slack, "instance {i}: l(K_ncd) = {l_ncd} > l(K_ref) = {l_ref}");
        ensure!(l_ref <= bound + slack, "instance {i}: l(K_ref) = {l_ref} > B = {bound}");
        let gap = r.duality_gap.unwrap();
        ensure!(gap >= -1e-10, "instance {i}: negative gap {gap:e}");
        ensure!(gap < 1e-2 * st.n() as f64, "instance {i}: gap {gap:e} >= 0.01 n");
        worst_gap_ratio = worst_gap_ratio.max(gap / st.n() as f64);
        count += 1;
    }
    Ok(format!("{count} instances bracketed; largest gap {worst_gap_ratio:.1e} * n"))
}

fn variant_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_step = 0.0f64;
    for i in 0..15u64 {
        let d = rng.random_range(3..=10);
        let g = gen_random_density(d, 0.4, 300 + i).unwrap();
        let st = stats_for(d + 15, d, 1300 + i);
        let trail = |variant| {
            let mut ks = Vec::new();
            let cfg = IpsConfig { variant, ..IpsConfig::default() };
            let r = ips_fit_observed(&st, &g, &cfg, &mut |s| ks.push(s.k.matrix().clone()));
            r.map(|_| ks)
        };
        let con = trail(IpsVariant::Concentration).map_err(|e| e.to_string())?;
        let cov = trail(IpsVariant::Covariance).map_err(|e| e.to_string())?;
        ensure!(con.len() == cov.len(), "instance {i}: {} vs {} updates", con.len(), cov.len());
        for (a, b) in con.iter().zip(&cov) {
            worst_step = worst_step.max(max_abs(&(a - b)));
        }
        ensure!(worst_step < 1e-9, "instance {i}: iterates differ by {worst_step:e}");
    }

    let mut worst_sets = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut graphs: Vec<Graph> = (0..5).map(|_| random_chordal(10, 0.2, &mut rng)).collect();
    graphs.extend((0..5).map(|i| gen_random_density(12, 0.35, 40 + i).unwrap()));
    graphs.push(gen_grid(3, 4).unwrap());
    for (i, g) in graphs.iter().enumerate() {
        let st = stats_for(40, g.d(), 2000 + i as u64);
        let fit = |sets| {
            ips_checked(&st, g, &IpsConfig { update_sets: sets, ..IpsConfig::default() }).map_err(|e| e.to_string())
        };
        let a = fit(UpdateSets::Edges)?;
        let b = fit(UpdateSets::Cliques)?;
        let dev = max_abs(&(a.k_hat.matrix() - b.k_hat.matrix()));
        worst_sets = worst_sets.max(dev / a.eps_prime);
        ensure!(dev <= 10.0 * a.eps_prime, "graph {i}: edgewise and cliquewise differ by {dev:e}");
    }
    Ok(format!("per-update difference {worst_step:.1e}; edge/clique difference {worst_sets:.2} x eps'"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn table1_ordering() -> Outcome {
    let reps = 3u64;
    let mut times = [Vec::new(), Vec::new(), Vec::new()];
    for rep in 0..reps {
        let g = gen_random_density(100, 0.7, 70 + rep).unwrap();
        let st = empirical_cov(&simulate_standard_normal(102, 100, 7000 + rep), false).unwrap();
        let runs = [
            ncd_fit(&st, &g, &NcdConfig::default()),
            ips_fit(&st, &g, &IpsConfig::default()),
            ips_fit(&st, &g, &IpsConfig { variant: IpsVariant::Concentration, ..IpsConfig::default() }),
        ];
        for (slot, r) in times.iter_mut().zip(runs) {
            let r = r.map_err(|e| format!("replicate {rep}: {e}"))?;
            slot.push(r.wall_time);
        }
    }
    let [ncd, cov, con] = times.map(median);
    ensure!(ncd < cov && cov < con, "medians ncd {ncd:.3} s, ips-cov {cov:.3} s, ips-con {con:.3} s");
    ensure!(con >= 5.0 * cov, "ips-con / ips-cov = {:.1}", con / cov);
    Ok(format!("median ncd {ncd:.3} s < ips-cov {cov:.3} s < ips-con {con:.3} s (ratio {:.1})", con / cov))
}

fn grid_20x25() -> Outcome {
    let g = gen_grid(20, 25).unwrap();
    let st = empirical_cov(&simulate_standard_normal(102, 500, 2025), false).unwrap();
    let t = Instant::now();
    let r = ips_fit(&st, &g, &IpsConfig::default()).map_err(|e| format!("ips-cov: {e}"))?;
    let ips = t.elapsed().as_secs_f64();
    ensure!(r.converged && ips < 60.0, "ips-cov took {ips:.1} s");
    let t = Instant::now();
    let r = ncd_fit(&st, &g, &NcdConfig::default()).map_err(|e| format!("ncd: {e}"))?;
    let ncd = t.elapsed().as_secs_f64();
    ensure!(r.converged && ncd < 60.0, "ncd took {ncd:.1} s");
    Ok(format!("ips-cov {ips:.2} s, ncd {ncd:.2} s"))
}

fn existence_gate() -> Outcome {
    let mut checked = 0;
    for (r, c) in [(2, 2), (3, 3), (4, 6), (5, 10), (20, 25)] {
        let g = gen_grid(r, c).unwrap();
        for budget in 3..6 {
            let v = ggmfit::existence::verdict_for(&g, budget);
            ensure!(v.verdict == Verdict::GuaranteedExists, "grid {r}x{c}, budget {budget}: {:?}", v.verdict);
            checked += 1;
        }
    }
    for seed in 0..20 {
        let tree = gen_tree_plus(5 + seed as usize * 2, 0.0, seed).unwrap();
        for budget in 2..4 {
            let v = ggmfit::existence::verdict_for(&tree, budget);
            ensure!(v.verdict == Verdict::GuaranteedExists, "tree seed {seed}, budget {budget}: {:?}", v.verdict);
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut graphs = Vec::new();
    for i in 0..40u64 {
        let d = rng.random_range(1..=50);
        graphs.push(gen_random_density(d, rng.random_range(0.0..0.6), i).unwrap());
    }
    graphs.extend((2..8).map(|k| gen_grid(k, k).unwrap()));
    graphs.extend((0..5).map(|s| gen_tree_plus(40, 0.02, s).unwrap()));
    for (i, g) in graphs.iter().enumerate() {
        let want = peeling_coreness(g);
        ensure!(g.max_coreness() == want, "graph {i}: coreness {} vs peeling {want}", g.max_coreness());
    }
    Ok(format!("{checked} verdicts, {} coreness values match peeling", graphs.len()))
}

fn stopping_hazard() -> Outcome {
    let g = gen_grid(3, 3).unwrap();
    let st = empirical_cov(&(simulate_standard_normal(30, 9, 0) * 1000.0), true).unwrap();
    let cfg = IpsConfig { trace: true, ..IpsConfig::default() };
    let r = ips_checked(&st, &g, &cfg).map_err(|e| e.to_string())?;
    let hazard = r.eps_prime * 100.0;
    let flat = r
        .trace
        .windows(2)
        .find(|w| (w[1].loglik - w[0].loglik).abs() < 1e-6 && w[1].grad_norm > hazard)
        .map(|w| w[1]);
    let Some(at) = flat else {
        return Err("no cycle with a small loglik change and a large gradient".into());
    };
    // The fit ran past that cycle and stopped only once the gradient was small.
    ensure!(r.cycles > at.cycle, "stopped at cycle {} where the change rule would", r.cycles);
    let last = r.trace.last().unwrap();
    ensure!(last.cycle == r.cycles && last.grad_norm < r.eps_prime, "final gradient {:e}", last.grad_norm);
    ensure!(
        r.trace[..r.trace.len() - 1].iter().all(|t| t.grad_norm >= r.eps_prime),
        "gradient fell below 2eps/n before the last cycle"
    );
    Ok(format!(
        "cycle {}: loglik change < 1e-6 with gradient {:.2e} (> {hazard:.1e}); stopped at cycle {}",
        at.cycle, at.grad_norm, r.cycles
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 closed forms", closed_forms),
        ("2 likelihood equations", likelihood_equations),
        ("3 monotonicity", || Ok(String::new())),
        ("4 incremental bookkeeping", bookkeeping),
        ("5 four-cycle rank behaviour", four_cycle),
        ("6 duality-gap bracketing", duality_bracket),
        ("7 variant agreement", variant_agreement),
        ("8 dense random graph ordering", table1_ordering),
        ("9 20x25 grid", grid_20x25),
        ("10 existence gate", existence_gate),
        ("11 stopping on the gradient", stopping_hazard),
    ];
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        results.push((name, outcome));
    }
    // Monotonicity is judged over every fit made by the other criteria.
    results[2].1 = monotonicity();

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
