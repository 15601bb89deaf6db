//! Row and column subset selection: strong rank-revealing QR, maxvol and
//! leverage-score sampling.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CurError, Result};
use crate::linalg::{self, DenseMatrix, IndexSet, SvdFactors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Swap threshold; every accepted swap grows the selected volume by more than `h`.
    pub h: f64,
    pub max_sweeps: usize,
    pub rng_seed: u64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            h: 1.1,
            max_sweeps: 50,
            rng_seed: 0,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 1.0) {
            return Err(CurError::InvalidArgument(format!("h = {} must exceed 1", self.h)));
        }
        if self.max_sweeps == 0 {
            return Err(CurError::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// How indices are picked inside a strip or window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SubAlgorithm {
    #[default]
    Rrqr,
    Maxvol,
    Leverage,
}

impl std::str::FromStr for SubAlgorithm {
    type Err = CurError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rrqr" => Ok(Self::Rrqr),
            "maxvol" => Ok(Self::Maxvol),
            "leverage" => Ok(Self::Leverage),
            _ => Err(CurError::Parse(format!("unknown sub-algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Rows,
    Cols,
}

/// Interpolation-quality factor `sqrt((q - s) s h^2 + 1)`.
pub fn t_factor(q: usize, s: usize, h: f64) -> f64 {
    let gap = q.saturating_sub(s) as f64;
    (gap * s as f64 * h * h + 1.0).sqrt()
}

/// Greedy pivoted Gram-Schmidt: extends `chosen` to `k` columns of `a`,
/// each time taking the column with the largest residual norm (lowest index on ties).
fn greedy_extend(a: &DenseMatrix, mut chosen: Vec<usize>, k: usize) -> Vec<usize> {
    let q = a.ncols();
    let mut resid = a.clone();
    let mut taken = vec![false; q];
    let project_out = |resid: &mut DenseMatrix, j: usize| {
        let nrm = resid.column(j).norm();
        if nrm > 0.0 {
            let v: DVector<f64> = resid.column(j) / nrm;
            let coeffs = resid.transpose() * &v;
            resid.ger(-1.0, &v, &coeffs, 1.0);
        }
    };
    for &j in &chosen {
        taken[j] = true;
        project_out(&mut resid, j);
    }
    while chosen.len() < k.min(q) {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..q).filter(|&j| !taken[j]) {
            let n2 = resid.column(j).norm_squared();
            if best.is_none_or(|(_, b)| n2 > b) {
                best = Some((j, n2));
            }
        }
        let (j, _) = best.expect("fewer candidates than requested");
        taken[j] = true;
        chosen.push(j);
        project_out(&mut resid, j);
    }
    chosen
}

/// Strong RRQR column selection.
///
/// Greedy pivoted QR picks `k` columns, then single swaps are applied while some
/// `sqrt(W_ij^2 + (gamma_j * |row i of R11^{-1}|)^2)` exceeds `h`, where
/// `W = R11^{-1} R12` and `gamma_j` are the residual column norms. For a `k x q`
/// matrix with orthonormal rows this gives `|B^{-1}| <= t_factor(q, k, h)`.
pub fn rrqr_select_columns(a: &DenseMatrix, k: usize, params: &SelectionParams) -> Result<IndexSet> {
    params.validate()?;
    let q = a.ncols();
    if k > q {
        return Err(CurError::InvalidArgument(format!("k = {k} exceeds {q} columns")));
    }
    linalg::check_finite(a)?;
    let mut sel = greedy_extend(a, Vec::new(), k);
    if k > 0 && k < q && a.nrows() >= k {
        strong_swaps(a, &mut sel, params);
    }
    IndexSet::from_unsorted(sel, q)
}

/// Row selection is column selection on the transpose.
pub fn rrqr_select_rows(a: &DenseMatrix, k: usize, params: &SelectionParams) -> Result<IndexSet> {
    rrqr_select_columns(&a.transpose(), k, params)
}

fn strong_swaps(a: &DenseMatrix, sel: &mut [usize], params: &SelectionParams) {
    let q = a.ncols();
    let k = sel.len();
    let max_swaps = params.max_sweeps * (k + 1) * 4;
    for _ in 0..max_swaps {
        let a_s = linalg::select_cols(a, sel);
        let qr = a_s.qr();
        let (qf, r11) = (qr.q(), qr.r());
        let dmax = (0..k).map(|i| r11[(i, i)].abs()).fold(0.0, f64::max);
        if dmax == 0.0 || (0..k).any(|i| r11[(i, i)].abs() <= 1e-13 * dmax) {
            return;
        }
        let Some(r11_inv) = r11.clone().solve_upper_triangular(&DenseMatrix::identity(k, k)) else {
            return;
        };
        let rest: Vec<usize> = (0..q).filter(|j| !sel.contains(j)).collect();
        let a_r = linalg::select_cols(a, &rest);
        let r12 = qf.transpose() * &a_r;
        let resid = &a_r - &qf * &r12;
        let gamma: Vec<f64> = (0..rest.len()).map(|j| resid.column(j).norm()).collect();
        let omega: Vec<f64> = (0..k).map(|i| r11_inv.row(i).norm()).collect();
        let w = &r11_inv * &r12;

        let mut best = (0usize, 0usize, 0.0f64);
        for i in 0..k {
            for j in 0..rest.len() {
                let g = gamma[j] * omega[i];
                let s = (w[(i, j)] * w[(i, j)] + g * g).sqrt();
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }
        if best.2 <= params.h {
            return;
        }
        sel[best.0] = rest[best.1];
    }
}

/// Row/column sets of a `rho x rho` submatrix that is locally volume-maximal:
/// no single row or column swap grows `|det|` by more than `h`.
pub fn maxvol_submatrix(
    a: &DenseMatrix,
    rho: usize,
    params: &SelectionParams,
) -> Result<(IndexSet, IndexSet)> {
    params.validate()?;
    linalg::check_finite(a)?;
    let (m, n) = a.shape();
    if rho == 0 || rho > m.min(n) {
        return Err(CurError::InvalidArgument(format!(
            "rho = {rho} must lie in 1..={}",
            m.min(n)
        )));
    }
    const RESTARTS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    for attempt in 0..=RESTARTS {
        let start = if attempt == 0 {
            complete_pivot_start(a, rho)
        } else {
            Some(random_start(m, n, rho, &mut rng))
        };
        let Some((mut rows, mut cols)) = start else { continue };
        if maxvol_iterate(a, &mut rows, &mut cols, params) {
            return Ok((
                IndexSet::from_unsorted(rows, m)?,
                IndexSet::from_unsorted(cols, n)?,
            ));
        }
    }
    Err(CurError::SingularCandidate { restarts: RESTARTS })
}

/// Gaussian elimination with complete pivoting; `None` if the residual vanishes early.
fn complete_pivot_start(a: &DenseMatrix, rho: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut r = a.clone();
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for _ in 0..rho {
        let mut best = (0, 0, 0.0f64);
        for j in 0..r.ncols() {
            for i in 0..r.nrows() {
                let v = r[(i, j)].abs();
                // row-major lowest index on ties
                if v > best.2 || (v == best.2 && v > 0.0 && (i, j) < (best.0, best.1)) {
                    best = (i, j, v);
                }
            }
        }
        if best.2 == 0.0 {
            return None;
        }
        let (pi, pj) = (best.0, best.1);
        let piv = r[(pi, pj)];
        let col = r.column(pj).into_owned();
        let row = r.row(pi).into_owned();
        r -= col * row / piv;
        rows.push(pi);
        cols.push(pj);
    }
    Some((rows, cols))
}

fn random_start(m: usize, n: usize, rho: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut r: Vec<usize> = (0..m).collect();
    let mut c: Vec<usize> = (0..n).collect();
    r.shuffle(rng);
    c.shuffle(rng);
    r.truncate(rho);
    c.truncate(rho);
    (r, c)
}

/// Alternating row/column swap sweeps. Returns false on a singular generator.
fn maxvol_iterate(
    a: &DenseMatrix,
    rows: &mut [usize],
    cols: &mut [usize],
    params: &SelectionParams,
) -> bool {
    let rho = rows.len();
    let cap = 4 * rho + 16;
    for _ in 0..params.max_sweeps {
        let mut swapped = false;
        // column phase: B = G^{-1} A[I, :]
        for _ in 0..cap {
            let g = linalg::submatrix(a, rows, cols);
            let Some(lu) = invertible_lu(&g) else { return false };
            let b = lu.solve(&linalg::select_rows(a, rows)).expect("checked invertible");
            let (i, j, v) = argmax_abs(&b);
            if v <= params.h {
                break;
            }
            cols[i] = j;
            swapped = true;
        }
        // row phase: B = A[:, J] G^{-1}
        for _ in 0..cap {
            let g = linalg::submatrix(a, rows, cols);
            let Some(lu) = invertible_lu(&g.transpose()) else { return false };
            let b = lu
                .solve(&linalg::select_cols(a, cols).transpose())
                .expect("checked invertible")
                .transpose();
            let (i, j, v) = argmax_abs(&b);
            if v <= params.h {
                break;
            }
            rows[j] = i;
            swapped = true;
        }
        if !swapped {
            break;
        }
    }
    true
}

fn invertible_lu(g: &DenseMatrix) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let scale = g.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let lu = g.clone().lu();
    let u = lu.u();
    let tiny = scale * g.nrows() as f64 * f64::EPSILON;
    if scale == 0.0 || (0..u.nrows()).any(|i| u[(i, i)].abs() <= tiny) {
        None
    } else {
        Some(lu)
    }
}

fn argmax_abs(b: &DenseMatrix) -> (usize, usize, f64) {
    let mut best = (0, 0, -1.0f64);
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let v = b[(i, j)].abs();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    best
}

/// Squared row norms of the singular basis on `side`, divided by the rank.
pub fn leverage_scores(s: &SvdFactors, side: Side) -> Vec<f64> {
    let basis = match side {
        Side::Rows => &s.u,
        Side::Cols => &s.v,
    };
    let r = basis.ncols().max(1) as f64;
    (0..basis.nrows())
        .map(|i| basis.row(i).norm_squared() / r)
        .collect()
}

/// `count` draws with replacement proportional to `scores`, deduplicated.
pub fn sample_indices<R: Rng + ?Sized>(scores: &[f64], count: usize, rng: &mut R) -> Result<IndexSet> {
    if count == 0 {
        return Err(CurError::InvalidArgument("sample count must be >= 1".into()));
    }
    let dist = WeightedIndex::new(scores)
        .map_err(|e| CurError::InvalidArgument(format!("bad sampling weights: {e}")))?;
    let picks: Vec<usize> = (0..count).map(|_| dist.sample(rng)).collect();
    IndexSet::from_unsorted(picks, scores.len())
}

/// Selects `k` rows of `a` guided by its `rho`-top left singular subspace.
///
/// The first `min(rho, rank)` rows come from `sub` applied to that basis; the
/// rest are the highest-leverage remaining rows. Both steps depend only on the
/// subspace, so repeated strips spanning the same space give the same rows.
pub fn select_rows_by_subspace<R: Rng + ?Sized>(
    a: &DenseMatrix,
    k: usize,
    rho: usize,
    sub: SubAlgorithm,
    params: &SelectionParams,
    rng: &mut R,
) -> Result<IndexSet> {
    let p = a.nrows();
    if k > p {
        return Err(CurError::InvalidArgument(format!("k = {k} exceeds {p} rows")));
    }
    let s = linalg::svd(a)?;
    let r = rho.min(s.rank()).min(k);
    if r == 0 {
        return IndexSet::new((0..k).collect(), p);
    }
    let top = linalg::truncate(&s, r)?;
    let core: Vec<usize> = match sub {
        SubAlgorithm::Rrqr => rrqr_select_rows(&top.u, r, params)?.indices().to_vec(),
        SubAlgorithm::Maxvol => maxvol_rows(&top.u, params)?,
        SubAlgorithm::Leverage => {
            let scores = leverage_scores(&top, Side::Rows);
            leverage_draw(&scores, k, rng)?
        }
    };
    extend_by_leverage(&top.u, core, k)
}

/// Adds the highest-leverage rows of `basis` not yet in `core` (lowest index on
/// ties) until `want` rows are held.
pub fn extend_by_leverage(basis: &DenseMatrix, core: Vec<usize>, want: usize) -> Result<IndexSet> {
    let mut taken = vec![false; basis.nrows()];
    for &i in &core {
        taken[i] = true;
    }
    let mut rest: Vec<(usize, f64)> = (0..basis.nrows())
        .filter(|&i| !taken[i])
        .map(|i| (i, basis.row(i).norm_squared()))
        .collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen = core;
    let need = want.saturating_sub(chosen.len());
    chosen.extend(rest.into_iter().take(need).map(|(i, _)| i));
    IndexSet::from_unsorted(chosen, basis.nrows())
}

pub fn select_cols_by_subspace<R: Rng + ?Sized>(
    a: &DenseMatrix,
    l: usize,
    rho: usize,
    sub: SubAlgorithm,
    params: &SelectionParams,
    rng: &mut R,
) -> Result<IndexSet> {
    select_rows_by_subspace(&a.transpose(), l, rho, sub, params, rng)
}

/// Draws with replacement until `want` distinct indices are held (or the
/// draw budget runs out, in which case fewer are returned).
fn leverage_draw<R: Rng + ?Sized>(scores: &[f64], want: usize, rng: &mut R) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(scores)
        .map_err(|e| CurError::InvalidArgument(format!("bad sampling weights: {e}")))?;
    let support = scores.iter().filter(|&&s| s > 0.0).count();
    let want = want.min(support);
    let mut seen = vec![false; scores.len()];
    let mut out = Vec::with_capacity(want);
    for _ in 0..(50 * want.max(1)) {
        if out.len() == want {
            break;
        }
        let i = dist.sample(rng);
        if !seen[i] {
            seen[i] = true;
            out.push(i);
        }
    }
    Ok(out)
}

/// Rows of a tall `p x r` basis forming a locally volume-maximal `r x r` block.
fn maxvol_rows(u: &DenseMatrix, params: &SelectionParams) -> Result<Vec<usize>> {
    let r = u.ncols();
    let mut rows = rrqr_select_rows(u, r, params)?.indices().to_vec();
    let cap = params.max_sweeps * (r + 1) * 4;
    for _ in 0..cap {
        let g = linalg::select_rows(u, &rows);
        let Some(lu) = invertible_lu(&g.transpose()) else { break };
        let b = lu.solve(&u.transpose()).expect("checked invertible").transpose();
        let (i, j, v) = argmax_abs(&b);
        if v <= params.h {
            break;
        }
        rows[j] = i;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    fn orthonormal_cols(m: usize, n: usize, seed: u64) -> DenseMatrix {
        linalg::orthonormalize(&gaussian(m, n, seed))
    }

    fn inv_norm(b: &DenseMatrix) -> f64 {
        1.0 / *linalg::singular_values(b).unwrap().last().unwrap()
    }

    fn det(g: &DenseMatrix) -> f64 {
        g.clone().lu().determinant()
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = combinations(n - 1, k);
        for mut c in combinations(n - 1, k - 1) {
            c.push(n - 1);
            out.push(c);
        }
        out
    }

    fn brute_max_det(a: &DenseMatrix, rho: usize) -> f64 {
        let mut best = 0.0f64;
        for r in combinations(a.nrows(), rho) {
            for c in combinations(a.ncols(), rho) {
                best = best.max(det(&linalg::submatrix(a, &r, &c)).abs());
            }
        }
        best
    }

    #[test]
    fn t_factor_examples() {
        assert!((t_factor(6, 3, 1.1) - (9.0f64 * 1.21 + 1.0).sqrt()).abs() < 1e-15);
        assert!((t_factor(6, 3, 1.1) - 3.448).abs() < 1e-3);
        assert_eq!(t_factor(5, 5, 1.1), 1.0);
        assert_eq!(t_factor(5, 0, 1.1), 1.0);
    }

    #[test]
    fn rrqr_identity_block_is_perfectly_conditioned() {
        let p = SelectionParams::default();
        let sel = rrqr_select_columns(&DenseMatrix::identity(4, 4), 2, &p).unwrap();
        assert_eq!(sel.len(), 2);
        let b = linalg::submatrix(&DenseMatrix::identity(4, 4), sel.indices(), sel.indices());
        assert!((inv_norm(&b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rrqr_tall_orthonormal_rows_bound() {
        let p = SelectionParams::default();
        let a = orthonormal_cols(6, 3, 11);
        let sel = rrqr_select_rows(&a, 3, &p).unwrap();
        let b = linalg::select_rows(&a, sel.indices());
        assert!(inv_norm(&b) <= t_factor(6, 3, 1.1));
    }

    #[test]
    fn rrqr_picks_dominant_column() {
        let mut a = DenseMatrix::from_fn(5, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        a.column_mut(2).scale_mut(100.0);
        let sel = rrqr_select_columns(&a, 1, &SelectionParams::default()).unwrap();
        assert_eq!(sel.indices(), &[2]);
    }

    #[test]
    fn rrqr_rejects_oversized_k() {
        let a = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            rrqr_select_columns(&a, 3, &SelectionParams::default()),
            Err(CurError::InvalidArgument(_))
        ));
    }

    #[test]
    fn rrqr_on_rank_deficient_input_still_returns_k() {
        let a = gaussian(3, 1, 1) * gaussian(1, 6, 2);
        let sel = rrqr_select_columns(&a, 3, &SelectionParams::default()).unwrap();
        assert_eq!(sel.len(), 3);
    }

    #[test]
    fn maxvol_dominant_diagonal() {
        let a = DenseMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 1.0]));
        let (r, c) = maxvol_submatrix(&a, 2, &SelectionParams::default()).unwrap();
        assert_eq!(r.indices(), &[0, 1]);
        assert_eq!(c.indices(), &[0, 1]);
    }

    #[test]
    fn maxvol_rank_one_hits_largest_entry() {
        let u = DVector::from_vec(vec![0.3, -2.0, 1.1, 0.5]);
        let v = DVector::from_vec(vec![1.0, 0.2, -3.0]);
        let a = &u * v.transpose();
        let (r, c) = maxvol_submatrix(&a, 1, &SelectionParams::default()).unwrap();
        // brute force
        let (bi, bj, _) = argmax_abs(&a);
        assert_eq!((r.indices()[0], c.indices()[0]), (bi, bj));
    }

    #[test]
    fn maxvol_near_rank_two_within_h_squared() {
        let p = SelectionParams::default();
        let a = gaussian(5, 2, 21) * gaussian(2, 5, 22) + gaussian(5, 5, 23) * 1e-6;
        let (r, c) = maxvol_submatrix(&a, 2, &p).unwrap();
        let got = det(&linalg::submatrix(&a, r.indices(), c.indices())).abs();
        assert!(got >= brute_max_det(&a, 2) / (p.h * p.h));
    }

    #[test]
    fn maxvol_singular_input_errors_after_restarts() {
        let a = gaussian(4, 1, 3) * gaussian(1, 4, 4);
        assert_eq!(
            maxvol_submatrix(&a, 2, &SelectionParams::default()),
            Err(CurError::SingularCandidate { restarts: 3 })
        );
    }

    #[test]
    fn leverage_examples() {
        let mut u = DenseMatrix::zeros(5, 2);
        u[(0, 0)] = 1.0;
        u[(1, 1)] = 1.0;
        let s = SvdFactors {
            u,
            sigma: DVector::from_vec(vec![1.0, 1.0]),
            v: DenseMatrix::identity(2, 2),
        };
        assert_eq!(leverage_scores(&s, Side::Rows), vec![0.5, 0.5, 0.0, 0.0, 0.0]);

        let s = SvdFactors {
            u: DenseMatrix::from_column_slice(2, 1, &[0.6, 0.8]),
            sigma: DVector::from_vec(vec![1.0]),
            v: DenseMatrix::identity(1, 1),
        };
        let sc = leverage_scores(&s, Side::Rows);
        assert!((sc[0] - 0.36).abs() < 1e-15 && (sc[1] - 0.64).abs() < 1e-15);

        let s = linalg::svd(&orthonormal_cols(8, 2, 5)).unwrap();
        let total: f64 = leverage_scores(&s, Side::Rows).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_indices(&[1.0, 0.0, 0.0], 3, &mut rng).unwrap().indices(), &[0]);
        let a = sample_indices(&[0.25; 4], 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_indices(&[0.25; 4], 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(sample_indices(&[0.0, 0.0], 1, &mut rng).is_err());
    }

    #[test]
    fn sampling_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..10_000)
            .filter(|_| sample_indices(&[0.9, 0.1], 1, &mut rng).unwrap().indices() == [0])
            .count();
        assert!((hits as f64 / 10_000.0 - 0.9).abs() <= 0.02);
    }

    #[test]
    fn subspace_row_selection_sizes() {
        let a = gaussian(30, 3, 7) * gaussian(3, 10, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for sub in [SubAlgorithm::Rrqr, SubAlgorithm::Maxvol, SubAlgorithm::Leverage] {
            let sel = select_rows_by_subspace(&a, 6, 3, sub, &SelectionParams::default(), &mut rng).unwrap();
            assert_eq!(sel.len(), 6);
            let g = linalg::select_rows(&a, sel.indices());
            let s = linalg::singular_values(&g).unwrap();
            assert!(s[2] > 1e-8 * s[0], "{sub:?} lost rank");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn rrqr_inverse_bound(q in 2usize..=32, s_raw in 1usize..=8, seed in any::<u64>()) {
                let s = s_raw.min(q);
                let p = SelectionParams::default();
                // k x q with orthonormal rows
                let a = orthonormal_cols(q, s, seed).transpose();
                let sel = rrqr_select_columns(&a, s, &p).unwrap();
                let b = linalg::select_cols(&a, sel.indices());
                prop_assert!(inv_norm(&b) <= t_factor(q, s, p.h) * (1.0 + 1e-10));
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn maxvol_local_optimality(m in 3usize..=7, n in 3usize..=7, rho in 1usize..=3, seed in any::<u64>()) {
                let p = SelectionParams::default();
                let a = gaussian(m, n, seed);
                let (r, c) = maxvol_submatrix(&a, rho, &p).unwrap();
                let got = det(&linalg::submatrix(&a, r.indices(), c.indices())).abs();
                prop_assert!(got >= brute_max_det(&a, rho) / p.h.powi(2 * rho as i32));
            }

            #[test]
            fn leverage_rotation_invariant(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
                let u = orthonormal_cols(8, 2, seed);
                let rot = DenseMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
                let mk = |u: DenseMatrix| SvdFactors { u, sigma: DVector::from_vec(vec![2.0, 1.0]), v: DenseMatrix::identity(2, 2) };
                let a = leverage_scores(&mk(u.clone()), Side::Rows);
                let b = leverage_scores(&mk(&u * rot), Side::Rows);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
