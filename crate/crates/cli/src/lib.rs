//! Command implementations behind the `ggmfit` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ggmfit::likelihood::read_data_table;
use ggmfit::{
    check_existence, empirical_cov, gen_grid, gen_random_density, gen_tree_plus, ips_fit, ncd_fit,
    simulate_standard_normal, Algorithm, FitReport, GgmError, Graph, IpsConfig, IpsVariant, NcdConfig, SampleStats,
    SymMatrix, UpdateSets,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ggmfit", version, about = "Maximum likelihood fitting of Gaussian graphical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print a JSON report.
    Fit(FitArgs),
    /// Write a benchmark graph or a simulated data table.
    Generate {
        #[command(subcommand)]
        what: GenerateCommand,
        /// Output file; standard output when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Time solvers over replicated random instances.
    Bench(BenchArgs),
    /// Print the existence verdict for a graph and sample size.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Edge list: header `d N`, then one `u v` pair per line (1-based).
    #[arg(long)]
    pub graph: PathBuf,
    /// Covariance matrix in the matrix text format; needs `--n`.
    #[arg(long, conflicts_with = "data")]
    pub cov: Option<PathBuf>,
    /// Data table with one observation per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sample size. Required with `--cov`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Do not subtract column means from `--data`; for a covariance this
    /// declares that no means were estimated.
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgArg {
    IpsCon,
    IpsCov,
    Ncd,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::IpsCon => Algorithm::IpsCon,
            AlgArg::IpsCov => Algorithm::IpsCov,
            AlgArg::Ncd => Algorithm::Ncd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetsArg {
    Edges,
    Cliques,
}

impl From<SetsArg> for UpdateSets {
    fn from(s: SetsArg) -> Self {
        match s {
            SetsArg::Edges => UpdateSets::Edges,
            SetsArg::Cliques => UpdateSets::Cliques,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "ips-cov")]
    pub alg: AlgArg,
    #[arg(long, value_enum, default_value = "edges")]
    pub sets: SetsArg,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_cycles: usize,
    /// Skip correlation scaling before NCD (drops the definiteness guarantee).
    #[arg(long)]
    pub no_scale: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Recorded in the report; fits themselves are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the fitted concentration and covariance matrices, next to
    /// `--out` as `<out>.khat.mat` and `<out>.sigmahat.mat`, or as
    /// `khat.mat` and `sigmahat.mat` in the working directory.
    #[arg(long)]
    pub emit_matrices: bool,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Rows x cols lattice.
    Grid { rows: usize, cols: usize },
    /// Each pair joined independently with probability `density`.
    Random {
        d: usize,
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Uniform random tree plus independent extra edges.
    Treeplus {
        d: usize,
        extra_density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// `n x d` table of standard normal draws.
    Data {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Random,
    Grid,
    Treeplus,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Number of vertices (random, treeplus).
    #[arg(long)]
    pub d: Option<usize>,
    /// Edge densities (random) or extra-edge densities (treeplus),
    /// comma separated.
    #[arg(long, value_delimiter = ',')]
    pub density: Vec<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ips-con,ips-cov,ncd")]
    pub alg: Vec<AlgArg>,
    #[arg(long, value_enum, default_value = "edges")]
    pub sets: SetsArg,
    /// Observations simulated per replicate.
    #[arg(long, default_value_t = 102)]
    pub n: usize,
    /// Use the first d columns of this table instead of simulated data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_cycles: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, conflicts_with = "n")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Sample from a known zero mean: the rank budget is n, not n - 1.
    #[arg(long)]
    pub no_center: bool,
}

/// Runs a parsed command, writing results to `out`. Returns the exit code.
pub fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args, out),
        Command::Generate { what, out: path } => {
            let text = cmd_generate(&what)?;
            emit(&text, path.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Bench(args) => {
            let table = cmd_bench(&args)?;
            let text = if args.json { serde_json::to_string_pretty(&table)? + "\n" } else { table.render() };
            out.write_all(text.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Check(args) => {
            let verdict = cmd_check(&args)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&verdict)?)?;
            Ok(EXIT_OK)
        }
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

pub fn load_stats(input: &InputArgs) -> anyhow::Result<(Graph, SampleStats)> {
    let g = Graph::read(&input.graph).with_context(|| format!("reading graph {}", input.graph.display()))?;
    let stats = match (&input.cov, &input.data) {
        (Some(path), None) => {
            let Some(n) = input.n else { bail!("--cov needs --n") };
            let s = SymMatrix::read(path).with_context(|| format!("reading covariance {}", path.display()))?;
            SampleStats::from_cov(s, n, !input.no_center)?
        }
        (None, Some(path)) => {
            let x = read_data_table(path).with_context(|| format!("reading data {}", path.display()))?;
            if let Some(n) = input.n {
                if n != x.nrows() {
                    bail!("--n {n} disagrees with the {} rows of {}", x.nrows(), path.display());
                }
            }
            empirical_cov(&x, !input.no_center)?
        }
        _ => bail!("give exactly one of --cov or --data"),
    };
    if stats.d() != g.d() {
        bail!("graph has {} vertices but the covariance has order {}", g.d(), stats.d());
    }
    Ok((g, stats))
}

pub fn run_solver(stats: &SampleStats, g: &Graph, solver: &SolverArgs) -> ggmfit::Result<FitReport> {
    match solver.alg {
        AlgArg::Ncd => {
            let cfg = NcdConfig {
                eps: solver.eps,
                max_cycles: solver.max_cycles,
                auto_scale: !solver.no_scale,
                ..NcdConfig::default()
            };
            ncd_fit(stats, g, &cfg)
        }
        alg => {
            let cfg = IpsConfig {
                variant: if alg == AlgArg::IpsCon { IpsVariant::Concentration } else { IpsVariant::Covariance },
                update_sets: solver.sets.into(),
                eps: solver.eps,
                max_cycles: solver.max_cycles,
                ..IpsConfig::default()
            };
            ips_fit(stats, g, &cfg)
        }
    }
}

fn status_of(err: &GgmError) -> &'static str {
    match err {
        GgmError::MaxCyclesExceeded(_) => "max_cycles_exceeded",
        GgmError::StuckSingular(_) => "stuck_singular",
        _ => "error",
    }
}

/// JSON object for a report with a `status` field in front.
pub fn report_json(report: &FitReport, status: &str, error: Option<String>, seed: Option<u64>) -> anyhow::Result<Value> {
    let mut obj = serde_json::Map::new();
    obj.insert("status".into(), Value::from(status));
    if let Some(e) = error {
        obj.insert("error".into(), Value::from(e));
    }
    if let Some(s) = seed {
        obj.insert("seed".into(), Value::from(s));
    }
    let Value::Object(fields) = serde_json::to_value(report)? else { unreachable!("reports serialize to objects") };
    obj.extend(fields);
    Ok(Value::Object(obj))
}

fn matrix_paths(out: Option<&Path>) -> (PathBuf, PathBuf) {
    match out {
        Some(p) => {
            let with = |suffix: &str| {
                let mut s = p.as_os_str().to_owned();
                s.push(suffix);
                PathBuf::from(s)
            };
            (with(".khat.mat"), with(".sigmahat.mat"))
        }
        None => (PathBuf::from("khat.mat"), PathBuf::from("sigmahat.mat")),
    }
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let (g, stats) = load_stats(&args.input)?;
    let (report, status, error, code) = match run_solver(&stats, &g, &args.solver) {
        Ok(r) => (r, "converged", None, EXIT_OK),
        Err(e) => {
            let status = status_of(&e);
            let msg = e.to_string();
            match e {
                GgmError::MaxCyclesExceeded(r) | GgmError::StuckSingular(r) => (*r, status, Some(msg), EXIT_NOT_CONVERGED),
                other => return Err(other.into()),
            }
        }
    };
    let json = report_json(&report, status, error.clone(), args.seed)?;
    emit(&(serde_json::to_string_pretty(&json)? + "\n"), args.out.as_deref(), out)?;
    if args.emit_matrices {
        let (k_path, s_path) = matrix_paths(args.out.as_deref());
        report.k_hat.write(&k_path).with_context(|| format!("writing {}", k_path.display()))?;
        report.sigma_hat.write(&s_path).with_context(|| format!("writing {}", s_path.display()))?;
    }
    if let Some(e) = error {
        eprintln!("ggmfit: {e}");
    }
    Ok(code)
}

pub fn cmd_generate(what: &GenerateCommand) -> anyhow::Result<String> {
    Ok(match *what {
        GenerateCommand::Grid { rows, cols } => gen_grid(rows, cols)?.to_edge_list(),
        GenerateCommand::Random { d, density, seed } => gen_random_density(d, density, seed)?.to_edge_list(),
        GenerateCommand::Treeplus { d, extra_density, seed } => gen_tree_plus(d, extra_density, seed)?.to_edge_list(),
        GenerateCommand::Data { n, d, seed } => {
            if n == 0 || d == 0 {
                bail!("data needs n >= 1 and d >= 1");
            }
            let x = simulate_standard_normal(n, d, seed);
            let mut text = String::new();
            for row in x.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
    })
}

pub fn cmd_check(args: &CheckArgs) -> anyhow::Result<ggmfit::ExistenceVerdict> {
    let g = Graph::read(&args.graph).with_context(|| format!("reading graph {}", args.graph.display()))?;
    let stats = match (&args.data, args.n) {
        (Some(path), _) => {
            let x = read_data_table(path).with_context(|| format!("reading data {}", path.display()))?;
            if x.ncols() != g.d() {
                bail!("graph has {} vertices but the data has {} columns", g.d(), x.ncols());
            }
            empirical_cov(&x, !args.no_center)?
        }
        (None, Some(n)) => SampleStats::from_cov(SymMatrix::identity(g.d()), n, !args.no_center)?,
        (None, None) => bail!("give --data or --n"),
    };
    Ok(check_existence(&g, &stats))
}

/// One fit in a benchmark sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub param: String,
    pub rep: usize,
    pub algorithm: Algorithm,
    pub ok: bool,
    pub converged: bool,
    pub cycles: usize,
    pub wall_time: f64,
    pub setup_time: f64,
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub param: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    /// Medians over converged runs; absent when none converged.
    pub median_wall_time: Option<f64>,
    pub median_cycles: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub family: Family,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    pub threads: usize,
    pub summary: Vec<BenchSummary>,
    pub cells: Vec<BenchCell>,
}

impl BenchTable {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<14} {:<8} {:>5} {:>9} {:>12} {:>10}\n",
            "param", "alg", "runs", "converged", "median_time", "med_cycles"
        );
        for row in &self.summary {
            let time = row.median_wall_time.map_or("-".into(), |t| format!("{t:.4}"));
            let cyc = row.median_cycles.map_or("-".into(), |c| format!("{c}"));
            s.push_str(&format!(
                "{:<14} {:<8} {:>5} {:>9} {:>12} {:>10}\n",
                row.param,
                row.algorithm.as_str(),
                row.runs,
                row.converged,
                time,
                cyc
            ));
        }
        s
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

/// Thread count from `GGMFIT_THREADS`, or every available core.
pub fn bench_threads() -> anyhow::Result<usize> {
    match std::env::var("GGMFIT_THREADS") {
        Ok(v) => {
            let t: usize = v.trim().parse().with_context(|| format!("GGMFIT_THREADS={v} is not a count"))?;
            if t == 0 {
                bail!("GGMFIT_THREADS must be at least 1");
            }
            Ok(t)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Replicate `rep` uses graph seed `seed + rep` and data seed
/// `seed + 1_000_000 + rep`.
pub fn cmd_bench(args: &BenchArgs) -> anyhow::Result<BenchTable> {
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    if args.alg.is_empty() {
        bail!("--alg needs at least one algorithm");
    }
    let params: Vec<(String, Box<dyn Fn(u64) -> ggmfit::Result<Graph> + Sync>)> = match args.family {
        Family::Grid => {
            let (Some(r), Some(c)) = (args.rows, args.cols) else { bail!("grid needs --rows and --cols") };
            vec![(format!("{r}x{c}"), Box::new(move |_| gen_grid(r, c)))]
        }
        Family::Random | Family::Treeplus => {
            let Some(d) = args.d else { bail!("{:?} needs --d", args.family) };
            if args.density.is_empty() {
                bail!("give at least one --density");
            }
            let random = args.family == Family::Random;
            args.density
                .iter()
                .map(|&p| {
                    let f: Box<dyn Fn(u64) -> ggmfit::Result<Graph> + Sync> = if random {
                        Box::new(move |s| gen_random_density(d, p, s))
                    } else {
                        Box::new(move |s| gen_tree_plus(d, p, s))
                    };
                    (format!("d={d},p={p}"), f)
                })
                .collect()
        }
    };
    let table_data = match &args.data {
        Some(p) => Some(read_data_table(p).with_context(|| format!("reading data {}", p.display()))?),
        None => None,
    };

    let mut jobs = Vec::new();
    for (pi, _) in params.iter().enumerate() {
        for rep in 0..args.reps {
            for &alg in &args.alg {
                jobs.push((pi, rep, alg));
            }
        }
    }
    let threads = bench_threads()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let cells: Vec<BenchCell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(pi, rep, alg)| {
                let (label, make) = &params[pi];
                let seed = args.seed + rep as u64;
                let outcome = (|| -> anyhow::Result<FitReport> {
                    let g = make(seed)?;
                    let stats = match &table_data {
                        Some(x) => {
                            if x.ncols() < g.d() {
                                bail!("data table has {} columns, need {}", x.ncols(), g.d());
                            }
                            empirical_cov(&x.columns(0, g.d()).into_owned(), true)?
                        }
                        None => empirical_cov(&simulate_standard_normal(args.n, g.d(), args.seed + 1_000_000 + rep as u64), true)?,
                    };
                    let solver = SolverArgs {
                        alg,
                        sets: args.sets,
                        eps: args.eps,
                        max_cycles: args.max_cycles,
                        no_scale: false,
                    };
                    match run_solver(&stats, &g, &solver) {
                        Ok(r) => Ok(r),
                        Err(GgmError::MaxCyclesExceeded(r)) | Err(GgmError::StuckSingular(r)) => Ok(*r),
                        Err(e) => Err(e.into()),
                    }
                })();
                match outcome {
                    Ok(r) => BenchCell {
                        param: label.clone(),
                        rep,
                        algorithm: alg.into(),
                        ok: true,
                        converged: r.converged,
                        cycles: r.cycles,
                        wall_time: r.wall_time,
                        setup_time: r.setup_time,
                        grad_norm: r.grad_norm,
                        duality_gap: r.duality_gap,
                        error: None,
                    },
                    Err(e) => BenchCell {
                        param: label.clone(),
                        rep,
                        algorithm: alg.into(),
                        ok: false,
                        converged: false,
                        cycles: 0,
                        wall_time: f64::NAN,
                        setup_time: f64::NAN,
                        grad_norm: f64::NAN,
                        duality_gap: None,
                        error: Some(format!("{e:#}")),
                    },
                }
            })
            .collect()
    });

    let mut summary = Vec::new();
    for (label, _) in &params {
        for &alg in &args.alg {
            let alg: Algorithm = alg.into();
            let group: Vec<&BenchCell> = cells.iter().filter(|c| &c.param == label && c.algorithm == alg).collect();
            let done: Vec<&&BenchCell> = group.iter().filter(|c| c.converged).collect();
            summary.push(BenchSummary {
                param: label.clone(),
                algorithm: alg,
                runs: group.len(),
                converged: done.len(),
                failed: group.iter().filter(|c| !c.ok).count(),
                median_wall_time: median(&mut done.iter().map(|c| c.wall_time).collect::<Vec<_>>()),
                median_cycles: median(&mut done.iter().map(|c| c.cycles as f64).collect::<Vec<_>>()),
            });
        }
    }
    Ok(BenchTable { family: args.family, n: args.n, eps: args.eps, seed: args.seed, threads, summary, cells })
}
