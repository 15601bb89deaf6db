//! `bench`: experiment harness and single-matrix CUR runner.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curlra::bounds::{self, PerturbationInputs};
use curlra::cur::{evaluate, CurSummary, ErrorMetrics, LowRank};
use curlra::experiment::{self, CsvRow, ExperimentSpec, TestId, TrialStats, MAX_FAILURE_RATE};
use curlra::linalg::{self, DenseMatrix};
use curlra::preprocess::{PreprocKind, DEFAULT_DEPTH};
use curlra::selection::SubAlgorithm;
use curlra::{AlgoConfig, CurError, Driver, Family, MatrixSpec, OracleMatrix};
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_FAILURE_RATE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "bench", version, about = "Sublinear CUR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seeded trials of one test preset; writes one CSV row (two for `dmm`).
    Run(RunArgs),
    /// One driver on a matrix read from the text format; prints a JSON report.
    Cur(CurArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TestArg {
    T1,
    T2,
    T3,
    T4,
    /// C-A with leverage selection paired with standalone leverage CUR.
    Dmm,
}

/// Overrides applied on top of a preset.
#[derive(Args, Debug, Default)]
struct Shape {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Horizontal strip height (C-A) or window rows (Cynical).
    #[arg(long)]
    p: Option<usize>,
    /// Vertical strip width (C-A) or window columns (Cynical).
    #[arg(long)]
    q: Option<usize>,
    /// C-A loops.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(SubAlgorithm))]
    sub: Option<SubAlgorithm>,
}

impl Shape {
    fn apply(&self, mut cfg: AlgoConfig) -> AlgoConfig {
        let or = |v: Option<usize>, d: usize| v.unwrap_or(d);
        cfg.k = or(self.k, cfg.k);
        cfg.l = or(self.l, cfg.l);
        // Strips never narrower than the generator they must contain.
        cfg.p = or(self.p, cfg.p.max(cfg.k));
        cfg.q = or(self.q, cfg.q.max(cfg.l));
        cfg.ca_iters = or(self.iters, cfg.ca_iters);
        if let Some(s) = self.sub {
            cfg.sub_algorithm = s;
        }
        cfg
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    test: TestArg,
    /// class1 | class2:<kind> | class3 | delta | gaussian
    #[arg(long, value_parser = clap::value_parser!(Family))]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Row count; defaults to `n`.
    #[arg(long)]
    m: Option<usize>,
    /// Target rank `r`.
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    shape: Shape,
    #[arg(long, default_value_t = experiment::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = clap::value_parser!(PreprocKind), default_value = "none")]
    preproc: PreprocKind,
    /// Sparsity depth of the abridged transforms.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: u32,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DriverArg {
    Primitive,
    Cynical,
    Ca,
    Leverage,
}

impl From<DriverArg> for Driver {
    fn from(d: DriverArg) -> Self {
        match d {
            DriverArg::Primitive => Driver::Primitive,
            DriverArg::Cynical => Driver::Cynical,
            DriverArg::Ca => Driver::CrossApproximation,
            DriverArg::Leverage => Driver::LeverageStandalone,
        }
    }
}

#[derive(Args, Debug)]
struct CurArgs {
    /// Matrix file: header `rows cols`, then whitespace-separated rows.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "ca")]
    driver: DriverArg,
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    shape: Shape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the dense factors `C`, `U`, `R` in the report.
    #[arg(long)]
    dump_factors: bool,
}

#[derive(Serialize)]
struct Factors {
    c: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CurReport {
    m: usize,
    n: usize,
    driver: Driver,
    config: AlgoConfig,
    summary: CurSummary,
    error: ErrorMetrics,
    access_fraction: f64,
    /// `sigma_{rho+1}` of the input, used as the noise level of the bounds.
    epsilon: f64,
    bounds: Option<bounds::ErrorBoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factors: Option<Factors>,
}

/// Bad flags, unreadable input and library errors all exit with the usage code;
/// only an excessive trial failure rate has its own.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Rate(f64),
}

impl From<CurError> for Failure {
    fn from(e: CurError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Cur(a) => cmd_cur(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Rate(r)) => {
            eprintln!("error: failure rate {:.1}% exceeds {:.0}%", 100.0 * r, 100.0 * MAX_FAILURE_RATE);
            ExitCode::from(EXIT_FAILURE_RATE)
        }
    }
}

fn experiment_spec(a: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let id = match a.test {
        TestArg::T1 => TestId::T1,
        TestArg::T2 => TestId::T2,
        TestArg::T3 => TestId::T3,
        TestArg::T4 => TestId::T4,
        TestArg::Dmm => TestId::DmmCa,
    };
    let matrix = MatrixSpec {
        family: a.family.clone(),
        m: a.m.unwrap_or(a.n),
        n: a.n,
        rho_expected: a.rank,
        seed: a.seed,
    };
    let mut spec = ExperimentSpec::new(id, matrix, a.trials, a.seed).with_preproc(a.preproc, a.depth);
    spec.cfg = a.shape.apply(spec.cfg).with_seed(a.seed);
    spec.validate()?;
    Ok(spec)
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let spec = experiment_spec(a)?;
    let (rows, stats): (Vec<CsvRow>, Vec<TrialStats>) = if a.test == TestArg::Dmm {
        experiment::run_dmm_comparison(&spec)?
            .into_iter()
            .map(|(s, row, _)| (row, s))
            .unzip()
    } else {
        let (s, row) = experiment::run(&spec)?;
        (vec![row], vec![s])
    };
    match &a.out {
        Some(p) => experiment::write_csv(&rows, File::create(p)?)?,
        None => experiment::write_csv(&rows, io::stdout().lock())?,
    }
    check_failure_rate(&stats)
}

fn check_failure_rate(stats: &[TrialStats]) -> Result<(), Failure> {
    let worst = stats.iter().map(TrialStats::failure_rate).fold(0.0, f64::max);
    if worst > MAX_FAILURE_RATE {
        return Err(Failure::Rate(worst));
    }
    Ok(())
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn cmd_cur(a: &CurArgs) -> Result<(), Failure> {
    let dense = linalg::read_matrix_text(BufReader::new(File::open(&a.input)?))?;
    let (m, n) = dense.shape();
    let cfg = a.shape.apply(AlgoConfig::new(a.rank, a.rank, a.rank)).with_seed(a.seed);
    cfg.validate(m, n)?;
    let driver = Driver::from(a.driver);
    let oracle = OracleMatrix::from_dense(dense.clone())?;
    let f = driver.run(&oracle, &cfg)?;
    let access = experiment::access_fraction(&oracle);

    let sv = linalg::singular_values(&dense)?;
    let epsilon = sv.get(f.rho).copied().unwrap_or(0.0);
    let inputs = PerturbationInputs {
        eps: epsilon,
        norm_c: linalg::spectral_norm(f.left())?,
        norm_r: linalg::spectral_norm(f.right())?,
        norm_u: f.nucleus_norm(),
        rho: f.rho.max(1),
        k: f.k(),
        l: f.l(),
    };
    let report = CurReport {
        m,
        n,
        driver,
        config: cfg,
        summary: f.summary(),
        error: evaluate(&f, &dense)?,
        access_fraction: access,
        epsilon,
        bounds: bounds::report(&inputs, None, None, None).ok(),
        factors: a.dump_factors.then(|| Factors { c: rows_of(&f.c), u: rows_of(&f.u), r: rows_of(&f.r) }),
    };
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}
