//! Dense matrix helpers, SVD, truncation, pseudo-inverses and norms.
//!
//! Everything here operates on small working matrices (generators, strips,
//! windows); the large input is only ever seen through [`crate::oracle`].

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurError, Result};

/// Real dense matrix, column-major storage provided by nalgebra.
pub type DenseMatrix = DMatrix<f64>;

/// Relative threshold for "numerical rank": count `sigma_j > NRANK_TOL * sigma_1`.
pub const NRANK_TOL: f64 = 1e-6;

/// Above this size `spectral_norm` switches from a full SVD to subspace iteration.
const EXACT_NORM_LIMIT: usize = 200;

pub fn check_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CurError::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Strictly increasing 0-based positions into a dimension of size `bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, bound: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CurError::InvalidArgument(
                "index set must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(CurError::InvalidArgument(format!(
                    "index {last} out of bound {bound}"
                )));
            }
        }
        Ok(Self { indices, bound })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, bound)
    }

    pub fn full(bound: usize) -> Self {
        Self {
            indices: (0..bound).collect(),
            bound,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Maps positions local to `self` (e.g. rows of a window) to global indices.
    pub fn compose(&self, local: &IndexSet) -> Result<IndexSet> {
        if local.bound != self.len() {
            return Err(CurError::InvalidArgument(format!(
                "local index set bound {} does not match outer length {}",
                local.bound,
                self.len()
            )));
        }
        IndexSet::new(
            local.indices.iter().map(|&i| self.indices[i]).collect(),
            self.bound,
        )
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.bound == other.bound && self.indices.iter().all(|&i| other.contains(i))
    }
}

/// Thin SVD `U diag(sigma) V^T` with positive, non-increasing `sigma`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

// nalgebra 0.35 returns wrong factors for some small wide rank-deficient
// inputs, so every SVD goes through faer.
fn to_faer(m: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// All `min(m, n)` singular values, sorted non-increasing (zeros kept).
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = to_faer(m)
        .singular_values()
        .map_err(|_| CurError::SvdNoConvergence)?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Thin SVD with numerically zero singular values dropped
/// (`sigma_j <= max(m, n) * eps * sigma_1`).
pub fn svd(m: &DenseMatrix) -> Result<SvdFactors> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    if m.is_empty() {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let dec = to_faer(m).thin_svd().map_err(|_| CurError::SvdNoConvergence)?;
    let u_full = from_faer(dec.U());
    let v_full = from_faer(dec.V());
    let sv: Vec<f64> = dec.S().column_vector().iter().copied().collect();

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let sigma1 = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * sigma1;
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| sv[i] > cutoff && sv[i] > 0.0)
        .collect();

    let r = keep.len();
    let mut u = DenseMatrix::zeros(rows, r);
    let mut v = DenseMatrix::zeros(cols, r);
    let mut sigma = DVector::zeros(r);
    for (dst, &src) in keep.iter().enumerate() {
        u.set_column(dst, &u_full.column(src));
        v.set_column(dst, &v_full.column(src));
        sigma[dst] = sv[src];
    }
    Ok(SvdFactors { u, sigma, v })
}

/// Top-`rho` singular triple; `rho` larger than the rank is clamped.
pub fn truncate(s: &SvdFactors, rho: usize) -> Result<SvdFactors> {
    if rho == 0 {
        return Err(CurError::InvalidArgument("truncation rank must be >= 1".into()));
    }
    let r = rho.min(s.rank());
    Ok(SvdFactors {
        u: s.u.columns(0, r).into_owned(),
        sigma: s.sigma.rows(0, r).into_owned(),
        v: s.v.columns(0, r).into_owned(),
    })
}

/// Moore-Penrose pseudo-inverse of the rho-truncation `(G_rho)^+`, shape `l x k`.
///
/// Fails with [`CurError::RankDeficientGenerator`] when `sigma_rho(G) = 0`.
pub fn pinv_truncated(g: &DenseMatrix, rho: usize) -> Result<DenseMatrix> {
    let (k, l) = g.shape();
    if rho == 0 || rho > k.min(l) {
        return Err(CurError::InvalidArgument(format!(
            "rho = {rho} must lie in 1..={}",
            k.min(l)
        )));
    }
    let s = svd(g)?;
    if s.rank() < rho {
        return Err(CurError::RankDeficientGenerator { rho, sigma: 0.0 });
    }
    Ok(pinv_from_svd(&truncate(&s, rho)?))
}

/// `V diag(1/sigma) U^T` for an already truncated SVD.
pub fn pinv_from_svd(s: &SvdFactors) -> DenseMatrix {
    let mut v = s.v.clone();
    for (j, sig) in s.sigma.iter().enumerate() {
        v.column_mut(j).scale_mut(1.0 / sig);
    }
    v * s.u.transpose()
}

/// Count of `sigma_j > rel_tol * sigma_1` in a non-increasing sequence.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().filter(|&&s| s > rel_tol * s1).count(),
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub spectral: f64,
    pub frobenius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    /// `sigma_{rho+1}`, the spectral error of the best rank-rho approximation.
    pub sigma_next: f64,
    /// `sqrt(sum_{j > rho} sigma_j^2)`, the Frobenius error of the best rank-rho approximation.
    pub frob_tail: f64,
}

pub fn norms(m: &DenseMatrix) -> Result<Norms> {
    check_finite(m)?;
    Ok(Norms {
        spectral: spectral_norm(m)?,
        frobenius: m.norm(),
    })
}

pub fn tail(m: &DenseMatrix, rho: usize) -> Result<Tail> {
    let s = singular_values(m)?;
    Ok(tail_from_singular_values(&s, rho))
}

pub fn tail_from_singular_values(s: &[f64], rho: usize) -> Tail {
    let rest = s.get(rho..).unwrap_or(&[]);
    Tail {
        sigma_next: rest.first().copied().unwrap_or(0.0),
        frob_tail: rest.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Spectral norm: exact for small matrices, block subspace iteration otherwise.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    check_finite(m)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    if m.nrows().min(m.ncols()) <= EXACT_NORM_LIMIT {
        return Ok(singular_values(m)?.first().copied().unwrap_or(0.0));
    }
    Ok(spectral_norm_subspace(m, 8, 60, 1e-12))
}

/// Randomized block power iteration on `M^T M` with Rayleigh-Ritz extraction.
pub fn spectral_norm_subspace(m: &DenseMatrix, block: usize, max_iter: usize, tol: f64) -> f64 {
    let n = m.ncols();
    let b = block.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_5bec);
    let mut q = DenseMatrix::from_fn(n, b, |_, _| StandardNormal.sample(&mut rng));
    let mut prev = 0.0_f64;
    let mut est = 0.0_f64;
    for _ in 0..max_iter {
        q = orthonormalize(&q);
        let y = m * &q;
        est = singular_values(&y)
            .ok()
            .and_then(|s| s.first().copied())
            .unwrap_or(0.0);
        if est == 0.0 || ((est - prev).abs() <= tol * est) {
            break;
        }
        prev = est;
        q = m.transpose() * y;
    }
    est
}

/// Orthonormal basis of the column span via thin QR (columns kept in order).
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    a.clone().qr().q()
}

/// `M[rows, cols]`.
pub fn submatrix(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub fn select_rows(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), m.ncols(), |a, b| m[(rows[a], b)])
}

pub fn select_cols(m: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), cols.len(), |a, b| m[(a, cols[b])])
}

/// Reads the text format: a header line `rows cols`, then `rows` lines of
/// whitespace-separated decimals.
pub fn read_matrix_text<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut tokens = Vec::new();
    let mut header: Option<(usize, usize)> = None;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header.is_none() {
            let dims: Vec<&str> = trimmed.split_whitespace().collect();
            if dims.len() != 2 {
                return Err(CurError::Parse(format!("bad header line: {trimmed:?}")));
            }
            let r = dims[0]
                .parse()
                .map_err(|_| CurError::Parse(format!("bad row count {:?}", dims[0])))?;
            let c = dims[1]
                .parse()
                .map_err(|_| CurError::Parse(format!("bad column count {:?}", dims[1])))?;
            header = Some((r, c));
            continue;
        }
        for tok in trimmed.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| CurError::Parse(format!("bad number {tok:?}")))?;
            tokens.push(x);
        }
    }
    let (r, c) = header.ok_or_else(|| CurError::Parse("empty matrix file".into()))?;
    if tokens.len() != r * c {
        return Err(CurError::Parse(format!(
            "expected {} entries for a {r}x{c} matrix, found {}",
            r * c,
            tokens.len()
        )));
    }
    let m = DenseMatrix::from_row_slice(r, c, &tokens);
    check_finite(&m)?;
    Ok(m)
}

pub fn write_matrix_text<W: Write>(m: &DenseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
