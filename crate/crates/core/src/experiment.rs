//! Seeded multi-trial experiment runner with CSV output.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, Driver};
use crate::cur::{evaluate, LowRank};
use crate::error::{CurError, Result};
use crate::linalg::DenseMatrix;
use crate::oracle::{MatrixOracle, OracleMatrix};
use crate::preprocess::{build_side, preprocess_then_lra, PreprocKind};
use crate::testmatrices::{derive_seed, gen_delta_family, MatrixSpec};

pub const CSV_HEADER: &str = "test_id,family,m,n,r,k,l,mean,std,min,max,access_fraction,failures";

/// Default trial count.
pub const DEFAULT_TRIALS: usize = 100;

/// Failure rate above which a run counts as failed.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    T1,
    T2,
    T3,
    T4,
    DmmCa,
    DmmStandalone,
}

impl TestId {
    pub fn label(&self) -> &'static str {
        match self {
            Self::T1 => "t1",
            Self::T2 => "t2",
            Self::T3 => "t3",
            Self::T4 => "t4",
            Self::DmmCa => "dmm_ca",
            Self::DmmStandalone => "dmm_standalone",
        }
    }

    pub fn driver(&self) -> Driver {
        match self {
            Self::T1 => Driver::Primitive,
            Self::T2 | Self::T4 | Self::DmmCa => Driver::CrossApproximation,
            Self::T3 => Driver::Cynical,
            Self::DmmStandalone => Driver::LeverageStandalone,
        }
    }

    /// Preset configuration for rank `r`; the comparison rows use `k = l = 4r`
    /// and eight loops unless overridden.
    pub fn preset(&self, r: usize) -> AlgoConfig {
        match self {
            Self::T1 => AlgoConfig::tests1(r),
            Self::T2 => AlgoConfig::tests2(r),
            Self::T3 => AlgoConfig::tests3(r),
            Self::T4 => AlgoConfig::tests4(r),
            Self::DmmCa | Self::DmmStandalone => AlgoConfig::leverage_ca(r, 4 * r, 8),
        }
    }
}

impl FromStr for TestId {
    type Err = CurError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "t1" => Self::T1,
            "t2" => Self::T2,
            "t3" => Self::T3,
            "t4" => Self::T4,
            "dmm_ca" => Self::DmmCa,
            "dmm_standalone" => Self::DmmStandalone,
            _ => return Err(CurError::Parse(format!("unknown test {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocSpec {
    pub kind: PreprocKind,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub test_id: TestId,
    pub matrix: MatrixSpec,
    pub trials: usize,
    pub cfg: AlgoConfig,
    pub preproc: Option<PreprocSpec>,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn new(test_id: TestId, matrix: MatrixSpec, trials: usize, master_seed: u64) -> Self {
        let cfg = test_id.preset(matrix.rho_expected);
        Self { test_id, matrix, trials, cfg, preproc: None, master_seed }
    }

    pub fn with_preproc(mut self, kind: PreprocKind, depth: u32) -> Self {
        self.preproc = (kind != PreprocKind::None).then_some(PreprocSpec { kind, depth });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CurError::InvalidArgument("trials must be at least 1".into()));
        }
        self.cfg.validate(self.matrix.m, self.matrix.n)
    }
}

/// Seed of trial `t`: a counter-based split of the master seed, so trials can
/// run in any order.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, t as u64 ^ 0x7121_A150_0000_0000)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub error: f64,
    pub access_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub mean_access_fraction: f64,
    pub failures: usize,
}

impl TrialStats {
    /// Aggregates in trial order, so equal inputs give bit-identical output.
    pub fn from_outcomes(outcomes: &[Option<TrialOutcome>]) -> Self {
        let ok: Vec<TrialOutcome> = outcomes.iter().flatten().copied().collect();
        let failures = outcomes.len() - ok.len();
        let cnt = ok.len() as f64;
        if ok.is_empty() {
            return Self {
                trials: outcomes.len(),
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                mean_access_fraction: f64::NAN,
                failures,
            };
        }
        let mean = ok.iter().map(|o| o.error).sum::<f64>() / cnt;
        let var = ok.iter().map(|o| (o.error - mean).powi(2)).sum::<f64>() / cnt;
        Self {
            trials: outcomes.len(),
            mean,
            std: var.sqrt(),
            min: ok.iter().map(|o| o.error).fold(f64::INFINITY, f64::min),
            max: ok.iter().map(|o| o.error).fold(f64::NEG_INFINITY, f64::max),
            mean_access_fraction: ok.iter().map(|o| o.access_fraction).sum::<f64>() / cnt,
            failures,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials.max(1) as f64
    }

    pub fn median_of(errors: &[f64]) -> f64 {
        let mut v: Vec<f64> = errors.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let h = v.len() / 2;
        if v.len() % 2 == 1 {
            v[h]
        } else {
            0.5 * (v[h - 1] + v[h])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub test_id: String,
    pub family: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub l: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub access_fraction: f64,
    pub failures: usize,
}

impl CsvRow {
    pub fn new(spec: &ExperimentSpec, stats: &TrialStats) -> Self {
        let mut test_id = spec.test_id.label().to_string();
        if let Some(p) = &spec.preproc {
            test_id = format!("{test_id}+{}", p.kind.label());
        }
        Self {
            test_id,
            family: spec.matrix.family.to_string(),
            m: spec.matrix.m,
            n: spec.matrix.n,
            r: spec.matrix.rho_expected,
            k: spec.cfg.k,
            l: spec.cfg.l,
            mean: stats.mean,
            std: stats.std,
            min: stats.min,
            max: stats.max,
            access_fraction: stats.mean_access_fraction,
            failures: stats.failures,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[CsvRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER.split(','))
        .map_err(|e| CurError::Io(e.to_string()))?;
    for r in rows {
        wr.serialize(r).map_err(|e| CurError::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Worker count: `BENCH_THREADS` if set to a positive integer, else all cores.
pub fn worker_count() -> usize {
    std::env::var("BENCH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| CurError::InvalidArgument(format!("thread pool: {e}")))
}

/// Matrix and its dense reference; rebuilt per trial only for random families.
struct Instance {
    oracle: OracleMatrix,
    dense: DenseMatrix,
}

impl Instance {
    fn build(spec: &MatrixSpec) -> Result<Self> {
        let oracle = spec.build()?;
        let dense = oracle.to_dense();
        Ok(Self { oracle, dense })
    }
}

fn one_trial(spec: &ExperimentSpec, shared: Option<&Instance>, t: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(spec.master_seed, t);
    let owned;
    let inst = match shared {
        Some(i) => i,
        None => {
            let ms = MatrixSpec { seed: derive_seed(seed, 1), ..spec.matrix.clone() };
            owned = Instance::build(&ms)?;
            &owned
        }
    };
    let oracle = inst.oracle.fresh();
    let cfg = spec.cfg.with_seed(derive_seed(seed, 2));
    let driver = spec.test_id.driver();
    let error = match &spec.preproc {
        None => evaluate(&driver.run(&oracle, &cfg)?, &inst.dense)?.spectral_rel,
        Some(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
            let x = build_side(p.kind, oracle.rows(), p.depth, &mut rng)?;
            let yt = build_side(p.kind, oracle.cols(), p.depth, &mut rng)?;
            let approx = preprocess_then_lra(&oracle, &x, &yt, driver, &cfg)?;
            evaluate(&approx, &inst.dense)?.spectral_rel
        }
    };
    if !error.is_finite() {
        return Err(CurError::InvalidInput("non-finite error".into()));
    }
    let total = (oracle.rows() * oracle.cols()) as f64;
    Ok(TrialOutcome { error, access_fraction: oracle.access_count() as f64 / total })
}

/// Per-trial outcomes in trial order; errors and panics become `None`.
pub fn run_trials(spec: &ExperimentSpec) -> Result<Vec<Option<TrialOutcome>>> {
    spec.validate()?;
    let shared = if spec.matrix.is_random() { None } else { Some(Instance::build(&spec.matrix)?) };
    let outcomes = pool()?.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                catch_unwind(AssertUnwindSafe(|| one_trial(spec, shared.as_ref(), t)))
                    .ok()
                    .and_then(|r| r.ok())
            })
            .collect()
    });
    Ok(outcomes)
}

pub fn run(spec: &ExperimentSpec) -> Result<(TrialStats, CsvRow)> {
    let stats = TrialStats::from_outcomes(&run_trials(spec)?);
    let row = CsvRow::new(spec, &stats);
    Ok((stats, row))
}

/// Stats, CSV row and per-trial outcomes of one side of a paired run.
pub type PairedRun = (TrialStats, CsvRow, Vec<Option<TrialOutcome>>);

/// Paired run: C-A with leverage selection against the standalone leverage
/// CUR, both under the same per-trial seeds.
pub fn run_dmm_comparison(spec: &ExperimentSpec) -> Result<[PairedRun; 2]> {
    let mut out = Vec::with_capacity(2);
    for id in [TestId::DmmCa, TestId::DmmStandalone] {
        let s = ExperimentSpec { test_id: id, ..spec.clone() };
        let outcomes = run_trials(&s)?;
        let stats = TrialStats::from_outcomes(&outcomes);
        out.push((stats, CsvRow::new(&s, &stats), outcomes));
    }
    Ok(out.try_into().expect("two rows"))
}

/// Runs the driver of `spec` on every member of the `m x n` delta family and
/// returns the per-member errors, zero matrix last.
pub fn delta_sweep(m: usize, n: usize, test_id: TestId, cfg: &AlgoConfig) -> Result<Vec<f64>> {
    cfg.validate(m, n)?;
    let members: Vec<_> = gen_delta_family(m, n).collect();
    pool()?.install(|| {
        members
            .par_iter()
            .map(|(_, o)| {
                let f = test_id.driver().run(o, cfg)?;
                Ok(evaluate(&f, &o.to_dense())?.spectral_rel)
            })
            .collect()
    })
}

/// Mean access fraction of `driver` on one oracle, for reports.
pub fn access_fraction(o: &dyn MatrixOracle) -> f64 {
    o.access_count() as f64 / (o.rows() * o.cols()) as f64
}

/// Convenience: approximation error of `f` on a dense reference.
pub fn spectral_error<F: LowRank + ?Sized>(f: &F, dense: &DenseMatrix) -> Result<f64> {
    Ok(evaluate(f, dense)?.spectral_rel)
}
