//! Canonical CUR construction, evaluation, SVD-to-CUR conversion and the
//! brute-force exhaustive search used as a testing oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CurError, Result};
use crate::linalg::{self, DenseMatrix, IndexSet, SvdFactors};
use crate::oracle::MatrixOracle;
use crate::selection::{self, SelectionParams};

/// Below this `sigma_rho / sigma_1` the target rank is lowered to the generator's
/// numerical rank instead of failing.
pub const DEGRADE_RATIO: f64 = 1e-12;

/// Default cap on `C(p, rho) * C(q, rho)` for [`exhaustive_cur`].
pub const EXHAUSTIVE_BUDGET: u128 = 1_000_000;

/// Anything of the form `left * middle * right`.
pub trait LowRank {
    fn left(&self) -> &DenseMatrix;
    fn middle(&self) -> &DenseMatrix;
    fn right(&self) -> &DenseMatrix;

    /// Dense `left * middle * right`; test-scale only.
    fn reconstruct(&self) -> DenseMatrix {
        self.left() * (self.middle() * self.right())
    }
}

#[derive(Debug, Clone)]
pub struct CurFactors {
    pub row_set: IndexSet,
    pub col_set: IndexSet,
    /// `M[:, J]`, `m x l`.
    pub c: DenseMatrix,
    /// Nucleus, `l x k`.
    pub u: DenseMatrix,
    /// `M[I, :]`, `k x n`.
    pub r: DenseMatrix,
    /// Rank actually used for the nucleus.
    pub rho: usize,
    pub rho_requested: usize,
    /// Set when the generator was too ill-conditioned for `rho_requested`.
    pub degraded: bool,
}

impl LowRank for CurFactors {
    fn left(&self) -> &DenseMatrix {
        &self.c
    }
    fn middle(&self) -> &DenseMatrix {
        &self.u
    }
    fn right(&self) -> &DenseMatrix {
        &self.r
    }
}

/// Serializable digest without the dense factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurSummary {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub rho: usize,
    pub degraded: bool,
    pub nucleus_norm: f64,
}

impl CurFactors {
    pub fn k(&self) -> usize {
        self.row_set.len()
    }

    pub fn l(&self) -> usize {
        self.col_set.len()
    }

    /// `M[I, J]` recovered from `C` without new reads.
    pub fn generator(&self) -> DenseMatrix {
        linalg::select_rows(&self.c, self.row_set.indices())
    }

    pub fn nucleus_norm(&self) -> f64 {
        linalg::spectral_norm(&self.u).unwrap_or(f64::NAN)
    }

    pub fn summary(&self) -> CurSummary {
        CurSummary {
            rows: self.row_set.indices().to_vec(),
            cols: self.col_set.indices().to_vec(),
            rho: self.rho,
            degraded: self.degraded,
            nucleus_norm: self.nucleus_norm(),
        }
    }
}

fn check_sets(m: usize, n: usize, rows: &IndexSet, cols: &IndexSet, rho: usize) -> Result<()> {
    if rows.bound() != m || cols.bound() != n {
        return Err(CurError::InvalidArgument(format!(
            "index sets bound {}x{} but matrix is {m}x{n}",
            rows.bound(),
            cols.bound()
        )));
    }
    if rho == 0 || rho > rows.len() || rho > cols.len() {
        return Err(CurError::InvalidArgument(format!(
            "need 1 <= rho <= min(k, l); got rho = {rho}, k = {}, l = {}",
            rows.len(),
            cols.len()
        )));
    }
    Ok(())
}

/// Nucleus `(G_rho)^+`, lowering `rho` to the numerical rank of `G` when
/// `sigma_rho / sigma_1 < DEGRADE_RATIO`. Returns `(U, rho_used)`.
pub fn nucleus(g: &DenseMatrix, rho: usize) -> Result<(DenseMatrix, usize)> {
    let s = linalg::svd(g)?;
    let s1 = s.sigma.get(0).copied().unwrap_or(0.0);
    let usable = s.sigma.iter().filter(|&&x| x >= DEGRADE_RATIO * s1).count();
    let r = rho.min(usable);
    if r == 0 {
        return Ok((DenseMatrix::zeros(g.ncols(), g.nrows()), 0));
    }
    Ok((linalg::pinv_from_svd(&linalg::truncate(&s, r)?), r))
}

/// Canonical CUR: `C = M[:, J]`, `R = M[I, :]`, `U = (M[I, J]_rho)^+`.
///
/// Reads exactly the entries of `C` and `R`. An ill-conditioned generator lowers
/// the rank and sets `degraded`; an all-zero generator yields `U = 0`.
pub fn canonical_cur(
    m: &dyn MatrixOracle,
    rows: &IndexSet,
    cols: &IndexSet,
    rho: usize,
) -> Result<CurFactors> {
    check_sets(m.rows(), m.cols(), rows, cols, rho)?;
    let c = m.columns(cols.indices());
    let r = m.rows_of(rows.indices());
    linalg::check_finite(&c)?;
    linalg::check_finite(&r)?;
    let g = linalg::select_rows(&c, rows.indices());
    let (u, used) = nucleus(&g, rho)?;
    Ok(CurFactors {
        row_set: rows.clone(),
        col_set: cols.clone(),
        c,
        u,
        r,
        rho: used,
        rho_requested: rho,
        degraded: used < rho,
    })
}

/// Like [`canonical_cur`] but fails with `RankDeficientGenerator` when the
/// generator has fewer than `rho` nonzero singular values.
pub fn canonical_cur_strict(
    m: &dyn MatrixOracle,
    rows: &IndexSet,
    cols: &IndexSet,
    rho: usize,
) -> Result<CurFactors> {
    check_sets(m.rows(), m.cols(), rows, cols, rho)?;
    let c = m.columns(cols.indices());
    let r = m.rows_of(rows.indices());
    let g = linalg::select_rows(&c, rows.indices());
    let u = linalg::pinv_truncated(&g, rho)?;
    Ok(CurFactors {
        row_set: rows.clone(),
        col_set: cols.clone(),
        c,
        u,
        r,
        rho,
        rho_requested: rho,
        degraded: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub spectral_rel: f64,
    pub frob_rel: f64,
}

/// `|M - LMR| / |M|` in the spectral and Frobenius norms (absolute when `M = 0`).
pub fn evaluate<F: LowRank + ?Sized>(f: &F, m: &DenseMatrix) -> Result<ErrorMetrics> {
    let resid = m - f.reconstruct();
    let nm = linalg::norms(m)?;
    let nr = linalg::norms(&resid)?;
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    Ok(ErrorMetrics {
        spectral_rel: rel(nr.spectral, nm.spectral),
        frob_rel: rel(nr.frobenius, nm.frobenius),
    })
}

/// Converts a `rho`-top SVD into CUR form with well-conditioned index choices.
///
/// `rho` rows of `U` and columns of `V` come from strong RRQR; further rows or
/// columns (when `k, l > rho`) are the highest-leverage ones. With
/// `M = U S V^T`, `C = M[:, J]`, `R = M[I, :]` and the nucleus is
/// `pinv(V[J, :]^T) S^{-1} pinv(U[I, :])`, so `C N R = M`.
pub fn svd_to_cur(s: &SvdFactors, k: usize, l: usize, params: &SelectionParams) -> Result<CurFactors> {
    let rho = s.rank();
    let (m, n) = (s.u.nrows(), s.v.nrows());
    if rho == 0 {
        return Err(CurError::InvalidArgument("svd_to_cur needs rho >= 1".into()));
    }
    if k < rho || l < rho || k > m || l > n {
        return Err(CurError::InvalidArgument(format!(
            "need rho <= k <= m and rho <= l <= n; got rho = {rho}, k = {k}, l = {l}, {m}x{n}"
        )));
    }
    let core = |basis: &DenseMatrix| -> Result<Vec<usize>> {
        Ok(selection::rrqr_select_rows(basis, rho, params)?.indices().to_vec())
    };
    let rows = selection::extend_by_leverage(&s.u, core(&s.u)?, k)?;
    let cols = selection::extend_by_leverage(&s.v, core(&s.v)?, l)?;

    let u_i = linalg::select_rows(&s.u, rows.indices());
    let v_j = linalg::select_rows(&s.v, cols.indices());
    let mut us = s.u.clone();
    let mut vs = s.v.clone();
    for (j, sig) in s.sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*sig);
        vs.column_mut(j).scale_mut(*sig);
    }
    let c = us * v_j.transpose();
    let r = u_i.clone() * vs.transpose();

    let pinv_full = |a: &DenseMatrix| -> Result<DenseMatrix> {
        let rank = a.nrows().min(a.ncols());
        linalg::pinv_truncated(a, rank)
    };
    let mut sinv = pinv_full(&v_j.transpose())?;
    for (j, sig) in s.sigma.iter().enumerate() {
        sinv.column_mut(j).scale_mut(1.0 / sig);
    }
    let nuc = sinv * pinv_full(&u_i)?;
    Ok(CurFactors {
        row_set: rows,
        col_set: cols,
        c,
        u: nuc,
        r,
        rho,
        rho_requested: rho,
        degraded: false,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[pos] += 1;
        for i in pos + 1..k {
            cur[i] = cur[i - 1] + 1;
        }
    }
}

/// Best `rho x rho` generator by Frobenius error over all candidates.
pub fn exhaustive_cur(m: &DenseMatrix, rho: usize, budget: u128) -> Result<CurFactors> {
    let (p, q) = m.shape();
    if rho == 0 || rho > p.min(q) {
        return Err(CurError::InvalidArgument(format!(
            "rho = {rho} must lie in 1..={}",
            p.min(q)
        )));
    }
    let required = binomial(p, rho).saturating_mul(binomial(q, rho));
    if required > budget {
        return Err(CurError::BudgetExceeded { required, budget });
    }
    linalg::check_finite(m)?;
    let row_sets = combinations(p, rho);
    let col_sets = combinations(q, rho);
    let frob_err = |ri: &[usize], ci: &[usize]| -> f64 {
        let c = linalg::select_cols(m, ci);
        let r = linalg::select_rows(m, ri);
        let g = linalg::submatrix(m, ri, ci);
        match nucleus(&g, rho) {
            Ok((u, _)) => (m - &c * (u * &r)).norm(),
            Err(_) => f64::INFINITY,
        }
    };
    // (error, row index, col index); ties go to the lexicographically first candidate.
    let best = row_sets
        .par_iter()
        .enumerate()
        .map(|(a, ri)| {
            col_sets
                .iter()
                .enumerate()
                .map(|(b, ci)| (frob_err(ri, ci), a, b))
                .fold((f64::INFINITY, usize::MAX, usize::MAX), pick_min)
        })
        .reduce(|| (f64::INFINITY, usize::MAX, usize::MAX), pick_min);
    let (_, a, b) = best;
    let oracle = crate::oracle::OracleMatrix::from_dense(m.clone())?;
    canonical_cur(
        &oracle,
        &IndexSet::new(row_sets[a].clone(), p)?,
        &IndexSet::new(col_sets[b].clone(), q)?,
        rho,
    )
}

fn pick_min(x: (f64, usize, usize), y: (f64, usize, usize)) -> (f64, usize, usize) {
    match x.0.total_cmp(&y.0) {
        std::cmp::Ordering::Less => x,
        std::cmp::Ordering::Greater => y,
        std::cmp::Ordering::Equal => {
            if (x.1, x.2) <= (y.1, y.2) {
                x
            } else {
                y
            }
        }
    }
}

/// `C^+ M R^+`, the Frobenius-optimal nucleus for given `C`, `R`. Needs all of `M`,
/// so it is a reference for tests, not part of any sublinear path.
pub fn optimal_nucleus(c: &DenseMatrix, m: &DenseMatrix, r: &DenseMatrix) -> Result<DenseMatrix> {
    let pinv = |a: &DenseMatrix| -> Result<DenseMatrix> {
        let s = linalg::svd(a)?;
        Ok(if s.rank() == 0 {
            DenseMatrix::zeros(a.ncols(), a.nrows())
        } else {
            linalg::pinv_from_svd(&s)
        })
    };
    Ok(pinv(c)? * m * pinv(r)?)
}
