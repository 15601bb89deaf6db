//! Sublinear CUR drivers: Primitive, Cynical, Hierarchical and Cross-Approximation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cur::{self, CurFactors, DEGRADE_RATIO};
use crate::error::{CurError, Result};
use crate::linalg::{self, DenseMatrix, IndexSet};
use crate::oracle::MatrixOracle;
use crate::selection::{self, SelectionParams, SubAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub rho: usize,
    /// Generator rows.
    pub k: usize,
    /// Generator columns.
    pub l: usize,
    /// Window rows (Cynical) or horizontal strip height (C-A).
    pub p: usize,
    /// Window columns (Cynical) or vertical strip width (C-A).
    pub q: usize,
    pub ca_iters: usize,
    /// Stop C-A once a loop fails to raise the best `sigma_rho` of the window by more
    /// than `CA_STABLE` (relative); the best window seen is kept.
    pub early_stop: bool,
    pub sub_algorithm: SubAlgorithm,
    pub selection: SelectionParams,
    pub seed: u64,
}

/// Relative gain in `sigma_rho` below which C-A counts as converged.
pub const CA_STABLE: f64 = 1e-3;

impl AlgoConfig {
    pub fn new(rho: usize, k: usize, l: usize) -> Self {
        Self {
            rho,
            k,
            l,
            p: k,
            q: l,
            ca_iters: 1,
            early_stop: true,
            sub_algorithm: SubAlgorithm::Rrqr,
            selection: SelectionParams::default(),
            seed: 0,
        }
    }

    /// Primitive with `k = l = r`.
    pub fn tests1(r: usize) -> Self {
        Self::new(r, r, r)
    }

    /// C-A with `p = q = k = l = r`, five loops.
    pub fn tests2(r: usize) -> Self {
        Self {
            ca_iters: 5,
            ..Self::new(r, r, r)
        }
    }

    /// Cynical with a `4r x 4r` window and `k = l = r`.
    pub fn tests3(r: usize) -> Self {
        Self {
            p: 4 * r,
            q: 4 * r,
            ..Self::new(r, r, r)
        }
    }

    /// One C-A loop over `4r`-wide strips, then the `r x r` generator is picked
    /// inside the resulting `4r x 4r` window.
    pub fn tests4(r: usize) -> Self {
        Self {
            ca_iters: 1,
            early_stop: false,
            ..Self::tests3(r)
        }
    }

    /// C-A with leverage-score selection in every strip, `k = l = size`.
    pub fn leverage_ca(rho: usize, size: usize, loops: usize) -> Self {
        Self {
            ca_iters: loops,
            sub_algorithm: SubAlgorithm::Leverage,
            ..Self::new(rho, size, size)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        self.selection.validate()?;
        let ok = 0 < self.rho
            && self.rho <= self.k
            && self.k <= self.p
            && self.p <= m
            && self.rho <= self.l
            && self.l <= self.q
            && self.q <= n
            && self.ca_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(CurError::InvalidArgument(format!(
                "need 0 < rho <= k <= p <= m, rho <= l <= q <= n, ca_iters >= 1; got rho={}, k={}, l={}, p={}, q={}, m={m}, n={n}, ca_iters={}",
                self.rho, self.k, self.l, self.p, self.q, self.ca_iters
            )))
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn random_set<R: Rng + ?Sized>(rng: &mut R, bound: usize, size: usize) -> IndexSet {
    IndexSet::from_unsorted(sample(rng, bound, size).into_vec(), bound).expect("sample is in range")
}

/// Random `k` rows and `l` columns, then canonical CUR.
pub fn primitive(m: &dyn MatrixOracle, cfg: &AlgoConfig) -> Result<CurFactors> {
    cfg.validate(m.rows(), m.cols())?;
    let mut rng = cfg.rng();
    let rows = random_set(&mut rng, m.rows(), cfg.k);
    let cols = random_set(&mut rng, m.cols(), cfg.l);
    cur::canonical_cur(m, &rows, &cols, cfg.rho)
}

/// Picks `k x l` generator indices inside a dense window, returned as
/// positions local to the window.
fn select_in_window<R: Rng + ?Sized>(
    w: &DenseMatrix,
    k: usize,
    l: usize,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<(IndexSet, IndexSet)> {
    let rows = selection::select_rows_by_subspace(w, k, cfg.rho, cfg.sub_algorithm, &cfg.selection, rng)?;
    let cols = selection::select_cols_by_subspace(w, l, cfg.rho, cfg.sub_algorithm, &cfg.selection, rng)?;
    Ok((rows, cols))
}

/// Random `p x q` window; the generator is selected inside it.
pub fn cynical(m: &dyn MatrixOracle, cfg: &AlgoConfig) -> Result<CurFactors> {
    cfg.validate(m.rows(), m.cols())?;
    let mut rng = cfg.rng();
    let wr = random_set(&mut rng, m.rows(), cfg.p);
    let wc = random_set(&mut rng, m.cols(), cfg.q);
    cynical_on_window(m, &wr, &wc, cfg, &mut rng)
}

/// Cynical step on a given window (global index sets).
pub fn cynical_on_window<R: Rng + ?Sized>(
    m: &dyn MatrixOracle,
    wr: &IndexSet,
    wc: &IndexSet,
    cfg: &AlgoConfig,
    rng: &mut R,
) -> Result<CurFactors> {
    let w = m.block(wr.indices(), wc.indices());
    let (lr, lc) = select_in_window(&w, cfg.k, cfg.l, cfg, rng)?;
    cur::canonical_cur(m, &wr.compose(&lr)?, &wc.compose(&lc)?, cfg.rho)
}

#[derive(Debug, Clone)]
pub struct CaOutcome {
    pub factors: CurFactors,
    pub loops: usize,
    pub converged: bool,
    /// `sigma_rho` of the `p x q` window after each loop.
    pub sigma_history: Vec<f64>,
    pub resampled: bool,
}

/// Cross-Approximation with the built-in stopping rule.
pub fn cross_approximation(m: &dyn MatrixOracle, cfg: &AlgoConfig) -> Result<CaOutcome> {
    cross_approximation_with_stop(m, cfg, None)
}

/// Early-exit predicate `stop(loop, window)`.
pub type StopRule = dyn Fn(usize, &DenseMatrix) -> bool;

/// Cross-Approximation; `stop(loop, window)` can end the iteration early,
/// e.g. once an a posteriori bound computed from the window is small enough.
pub fn cross_approximation_with_stop(
    m: &dyn MatrixOracle,
    cfg: &AlgoConfig,
    stop: Option<&StopRule>,
) -> Result<CaOutcome> {
    cfg.validate(m.rows(), m.cols())?;
    let (mm, nn) = (m.rows(), m.cols());
    let mut rng = cfg.rng();
    let mut cols = random_set(&mut rng, nn, cfg.q);
    let mut rows = IndexSet::full(0);
    let mut window = DenseMatrix::zeros(0, 0);
    let mut history: Vec<f64> = Vec::new();
    let mut resampled = false;
    let mut converged = false;
    let mut loops = 0;
    let mut best: Option<(f64, IndexSet, IndexSet, DenseMatrix)> = None;

    for it in 0..cfg.ca_iters {
        loops = it + 1;
        let mut v = m.columns(cols.indices());
        if !resampled && !has_rank(&v, cfg.rho)? {
            resampled = true;
            cols = random_set(&mut rng, nn, cfg.q);
            v = m.columns(cols.indices());
        }
        rows = selection::select_rows_by_subspace(&v, cfg.p, cfg.rho, cfg.sub_algorithm, &cfg.selection, &mut rng)?;
        let mut h = m.rows_of(rows.indices());
        if !resampled && !has_rank(&h, cfg.rho)? {
            resampled = true;
            rows = random_set(&mut rng, mm, cfg.p);
            h = m.rows_of(rows.indices());
        }
        cols = selection::select_cols_by_subspace(&h, cfg.q, cfg.rho, cfg.sub_algorithm, &cfg.selection, &mut rng)?;
        window = linalg::select_cols(&h, cols.indices());

        let sv = linalg::singular_values(&window)?;
        let s_rho = sv.get(cfg.rho - 1).copied().unwrap_or(0.0);
        history.push(s_rho);
        let prev_best = best.as_ref().map(|b| b.0);
        if prev_best.is_none_or(|b| s_rho > b) {
            best = Some((s_rho, rows.clone(), cols.clone(), window.clone()));
        }
        if cfg.early_stop && prev_best.is_some_and(|b| s_rho - b <= CA_STABLE * s_rho.max(b)) {
            converged = true;
            break;
        }
        if let Some(f) = stop {
            if f(it, &window) {
                converged = true;
                break;
            }
        }
    }
    if let Some((_, r, c, w)) = best {
        (rows, cols, window) = (r, c, w);
    }

    let (gr, gc) = if cfg.p == cfg.k && cfg.q == cfg.l {
        (rows.clone(), cols.clone())
    } else {
        let (lr, lc) = select_in_window(&window, cfg.k, cfg.l, cfg, &mut rng)?;
        (rows.compose(&lr)?, cols.compose(&lc)?)
    };
    let factors = cur::canonical_cur(m, &gr, &gc, cfg.rho)?;
    Ok(CaOutcome {
        factors,
        loops,
        converged,
        sigma_history: history,
        resampled,
    })
}

fn has_rank(a: &DenseMatrix, rho: usize) -> Result<bool> {
    let s = linalg::singular_values(a)?;
    let s1 = s.first().copied().unwrap_or(0.0);
    Ok(s1 > 0.0 && s.get(rho - 1).is_some_and(|&x| x >= DEGRADE_RATIO * s1))
}

/// Superlinear reference: leverage-score CUR of the whole matrix, using the
/// `rho`-top SVD of a dense materialization.
pub fn leverage_cur_standalone(m: &dyn MatrixOracle, cfg: &AlgoConfig) -> Result<CurFactors> {
    cfg.validate(m.rows(), m.cols())?;
    let mut rng = cfg.rng();
    let all_r: Vec<usize> = (0..m.rows()).collect();
    let all_c: Vec<usize> = (0..m.cols()).collect();
    let dense = m.block(&all_r, &all_c);
    let rows = selection::select_rows_by_subspace(&dense, cfg.k, cfg.rho, SubAlgorithm::Leverage, &cfg.selection, &mut rng)?;
    let cols = selection::select_cols_by_subspace(&dense, cfg.l, cfg.rho, SubAlgorithm::Leverage, &cfg.selection, &mut rng)?;
    cur::canonical_cur(m, &rows, &cols, cfg.rho)
}

/// Rectangular region given by global row and column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub rows: IndexSet,
    pub cols: IndexSet,
}

impl Window {
    pub fn new(rows: IndexSet, cols: IndexSet) -> Self {
        Self { rows, cols }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn is_proper_subwindow_of(&self, outer: &Window) -> bool {
        self.rows.is_subset_of(&outer.rows)
            && self.cols.is_subset_of(&outer.cols)
            && (self.rows.len() < outer.rows.len() || self.cols.len() < outer.cols.len())
    }
}

/// Refinement hook: given a window and a tentative generator inside it,
/// propose a better generator (global indices).
pub type Refine<'a> = dyn Fn(&dyn MatrixOracle, &Window, &Window, &AlgoConfig) -> Result<Window> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierParams {
    /// Random entries of the current window used to judge closeness.
    pub probes: usize,
    /// Accept when the probed relative residual is at most this.
    pub tol: f64,
    /// Refinement is attempted when the residual is within `refine_factor * tol`.
    pub refine_factor: f64,
    /// Cap on stage-1 executions; ascending and descending can otherwise cycle.
    pub max_steps: usize,
}

impl Default for HierParams {
    fn default() -> Self {
        Self {
            probes: 32,
            tol: 1e-4,
            refine_factor: 100.0,
            max_steps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelFailure {
    RankDeficient { sigma_ratio: f64 },
    NotClose { residual: f64 },
    StepCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostic {
    pub level: usize,
    pub reason: LevelFailure,
}

#[derive(Debug, Clone)]
pub enum HierOutcome {
    Success {
        factors: CurFactors,
        steps: usize,
        diagnostics: Vec<LevelDiagnostic>,
    },
    Failure(Vec<LevelDiagnostic>),
}

impl HierOutcome {
    pub fn factors(&self) -> Option<&CurFactors> {
        match self {
            Self::Success { factors, .. } => Some(factors),
            Self::Failure(_) => None,
        }
    }
}

/// One C-A loop restricted to `w`, started from the columns of `g`.
pub fn ca_refine(m: &dyn MatrixOracle, w: &Window, g: &Window, cfg: &AlgoConfig) -> Result<Window> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7e11);
    let v = m.block(w.rows.indices(), g.cols.indices());
    let lr = selection::select_rows_by_subspace(&v, cfg.k, cfg.rho, cfg.sub_algorithm, &cfg.selection, &mut rng)?;
    let rows = w.rows.compose(&lr)?;
    let h = m.block(rows.indices(), w.cols.indices());
    let lc = selection::select_cols_by_subspace(&h, cfg.l, cfg.rho, cfg.sub_algorithm, &cfg.selection, &mut rng)?;
    Ok(Window::new(rows, w.cols.compose(&lc)?))
}

/// Hierarchical CUR over a chain of nested sub-windows `chain[0] ⊃ chain[1] ⊃ ...`
/// of `M` (the full matrix is the implicit level 0).
///
/// Level `i` builds a CUR of its window on the current tentative generator and
/// judges it by sampled residuals. Success ascends one level, failure descends
/// one level; failure at the innermost level or exhausting `max_steps` ends
/// with `Failure`.
pub fn hierarchical(
    m: &dyn MatrixOracle,
    chain: &[Window],
    cfg: &AlgoConfig,
    params: &HierParams,
    refine: Option<&Refine<'_>>,
) -> Result<HierOutcome> {
    let full = Window::new(IndexSet::full(m.rows()), IndexSet::full(m.cols()));
    if chain.is_empty() {
        return Err(CurError::InvalidArgument("chain needs at least one sub-window".into()));
    }
    let mut levels = vec![full];
    levels.extend(chain.iter().cloned());
    for i in 1..levels.len() {
        if !levels[i].is_proper_subwindow_of(&levels[i - 1]) {
            return Err(CurError::InvalidArgument(format!(
                "chain window {i} is not a proper sub-window of its predecessor"
            )));
        }
    }
    let (iw, jw) = levels.last().expect("non-empty").shape();
    if cfg.rho == 0 || cfg.k > iw || cfg.l > jw || cfg.rho > cfg.k.min(cfg.l) {
        return Err(CurError::InvalidArgument(format!(
            "need 0 < rho <= min(k, l) and k x l inside the innermost {iw}x{jw} window"
        )));
    }
    cfg.selection.validate()?;

    let depth = levels.len() - 1;
    let mut rng = cfg.rng();
    let mut tentative = levels[depth].clone();
    let mut i = 0usize;
    let mut diags = Vec::new();

    for step in 1..=params.max_steps {
        let w = &levels[i];
        match stage_one(m, w, &tentative, cfg, params, refine, &mut rng)? {
            Ok(g) => {
                if i == 0 {
                    let factors = cur::canonical_cur(m, &g.rows, &g.cols, cfg.rho)?;
                    return Ok(HierOutcome::Success {
                        factors,
                        steps: step,
                        diagnostics: diags,
                    });
                }
                tentative = g;
                i -= 1;
            }
            Err(reason) => {
                diags.push(LevelDiagnostic { level: i, reason });
                if i == depth {
                    return Ok(HierOutcome::Failure(diags));
                }
                i += 1;
            }
        }
    }
    diags.push(LevelDiagnostic {
        level: i,
        reason: LevelFailure::StepCap,
    });
    Ok(HierOutcome::Failure(diags))
}

/// Builds a CUR of window `w` on a generator chosen inside `tentative`.
fn stage_one<R: Rng + ?Sized>(
    m: &dyn MatrixOracle,
    w: &Window,
    tentative: &Window,
    cfg: &AlgoConfig,
    params: &HierParams,
    refine: Option<&Refine<'_>>,
    rng: &mut R,
) -> Result<std::result::Result<Window, LevelFailure>> {
    let mut g = if tentative.shape() == (cfg.k, cfg.l) {
        tentative.clone()
    } else {
        let block = m.block(tentative.rows.indices(), tentative.cols.indices());
        let (lr, lc) = select_in_window(&block, cfg.k, cfg.l, cfg, rng)?;
        Window::new(tentative.rows.compose(&lr)?, tentative.cols.compose(&lc)?)
    };
    let mut verdict = judge(m, w, &g, cfg, params, rng)?;
    if let (Err(LevelFailure::NotClose { residual }), Some(f)) = (&verdict, refine) {
        if *residual <= params.refine_factor * params.tol {
            let refined = f(m, w, &g, cfg)?;
            let second = judge(m, w, &refined, cfg, params, rng)?;
            if second.is_ok() {
                g = refined;
            }
            verdict = second;
        }
    }
    Ok(verdict.map(|_| g))
}

/// Probes `params.probes` random entries of `w` against the CUR built on `g`.
fn judge<R: Rng + ?Sized>(
    m: &dyn MatrixOracle,
    w: &Window,
    g: &Window,
    cfg: &AlgoConfig,
    params: &HierParams,
    rng: &mut R,
) -> Result<std::result::Result<(), LevelFailure>> {
    let gen = m.block(g.rows.indices(), g.cols.indices());
    let sv = linalg::singular_values(&gen)?;
    let s1 = sv.first().copied().unwrap_or(0.0);
    let ratio = if s1 > 0.0 { sv[cfg.rho - 1] / s1 } else { 0.0 };
    if ratio < DEGRADE_RATIO {
        return Ok(Err(LevelFailure::RankDeficient { sigma_ratio: ratio }));
    }
    let u = linalg::pinv_truncated(&gen, cfg.rho)?;
    let (wr, wc) = (w.rows.indices(), w.cols.indices());
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..params.probes {
        let a = wr[rng.random_range(0..wr.len())];
        let b = wc[rng.random_range(0..wc.len())];
        let c_row = m.block(&[a], g.cols.indices());
        let r_col = m.block(g.rows.indices(), &[b]);
        let approx = (c_row * &u * r_col)[(0, 0)];
        let exact = m.entry(a, b);
        num += (exact - approx).powi(2);
        den += exact * exact;
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(if residual <= params.tol {
        Ok(())
    } else {
        Err(LevelFailure::NotClose { residual })
    })
}

/// Driver selection for the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Primitive,
    Cynical,
    CrossApproximation,
    LeverageStandalone,
}

impl Driver {
    pub fn run(&self, m: &dyn MatrixOracle, cfg: &AlgoConfig) -> Result<CurFactors> {
        match self {
            Self::Primitive => primitive(m, cfg),
            Self::Cynical => cynical(m, cfg),
            Self::CrossApproximation => cross_approximation(m, cfg).map(|o| o.factors),
            Self::LeverageStandalone => leverage_cur_standalone(m, cfg),
        }
    }

    pub fn is_sublinear(&self) -> bool {
        !matches!(self, Self::LeverageStandalone)
    }
}
