//! Multiplicative pre-processing: sparse multipliers, sketched operands that are
//! never materialized, and the back-mapping to an approximation of the input.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, Driver};
use crate::cur::{self, LowRank};
use crate::error::{CurError, Result};
use crate::linalg::{DenseMatrix, IndexSet};
use crate::oracle::MatrixOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    Gaussian,
    Subpermutation,
    QuasiRademacher,
    Arht,
    Arft,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardScaling {
    Rademacher,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierScaling {
    UnitaryDiag,
    None,
}

/// Row-sparse real `rows x cols` matrix. Fourier multipliers additionally keep
/// their complex rows; the real rows are then `[Re; Im]` stacked.
#[derive(Debug, Clone)]
pub struct SparseMultiplier {
    pub kind: MultiplierKind,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
    complex: Option<Vec<Vec<(usize, Complex64)>>>,
}

impl SparseMultiplier {
    fn from_rows(kind: MultiplierKind, cols: usize, entries: Vec<Vec<(usize, f64)>>) -> Self {
        let entries = entries
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, v)| v != 0.0).collect())
            .collect::<Vec<Vec<_>>>();
        Self {
            kind,
            rows: entries.len(),
            cols,
            entries,
            complex: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[i]
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn nnz_per_row(&self) -> usize {
        self.entries.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_complex(&self) -> bool {
        self.complex.is_some()
    }

    /// Union of the column supports of the given rows, sorted.
    pub fn support(&self, rows: &[usize]) -> Vec<usize> {
        let mut s: Vec<usize> = rows.iter().flat_map(|&i| self.entries[i].iter().map(|e| e.0)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, v) in row {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Complex rows of a Fourier multiplier as a dense matrix.
    pub fn to_dense_complex(&self) -> Option<nalgebra::DMatrix<Complex64>> {
        let rows = self.complex.as_ref()?;
        let mut d = nalgebra::DMatrix::zeros(rows.len(), self.cols);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                d[(i, j)] += v;
            }
        }
        Some(d)
    }

    /// `X A` using only the stored nonzeros.
    pub fn apply(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        if a.nrows() != self.cols {
            return Err(CurError::InvalidArgument(format!(
                "cannot apply {}x{} multiplier to {} rows",
                self.rows,
                self.cols,
                a.nrows()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, a.ncols());
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, v) in row {
                let src = a.row(j);
                let mut dst = out.row_mut(i);
                dst += src * v;
            }
        }
        Ok(out)
    }

    /// Complex product `X x` for Fourier multipliers.
    pub fn apply_complex(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let rows = self
            .complex
            .as_ref()
            .ok_or_else(|| CurError::InvalidArgument("multiplier is real".into()))?;
        if x.len() != self.cols {
            return Err(CurError::InvalidArgument("vector length mismatch".into()));
        }
        Ok(rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect())
    }

    /// Keeps the first `m` columns.
    pub fn restrict_cols(mut self, m: usize) -> Result<Self> {
        if m > self.cols {
            return Err(CurError::InvalidArgument(format!(
                "cannot restrict {} columns to {m}",
                self.cols
            )));
        }
        for r in &mut self.entries {
            r.retain(|&(j, _)| j < m);
        }
        if let Some(c) = &mut self.complex {
            for r in c {
                r.retain(|&(j, _)| j < m);
            }
        }
        self.cols = m;
        Ok(self)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(
            MultiplierKind::Subpermutation,
            n,
            (0..n).map(|i| vec![(i, 1.0)]).collect(),
        )
    }
}

/// Nonzero value of the `d`-abridged Hadamard matrix of order `2^t` at `(a, b)`.
pub fn hadamard_entry(t: u32, d: u32, a: usize, b: usize) -> f64 {
    let s = 1usize << (t - d);
    if a % s != b % s {
        return 0.0;
    }
    if ((a / s) & (b / s)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Value of the `d`-abridged Fourier matrix of order `2^t` at `(a, b)`.
pub fn fourier_entry(t: u32, d: u32, a: usize, b: usize) -> Complex64 {
    let s = 1usize << (t - d);
    if a % s != b % s {
        return Complex64::new(0.0, 0.0);
    }
    let n = 1usize << d;
    let e = ((a / s) * (b / s)) % n;
    // exact values on quarter turns
    if (4 * e).is_multiple_of(n) {
        return [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ][4 * e / n];
    }
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)
}

fn check_depth(t: u32, d: u32) -> Result<()> {
    if d > t {
        return Err(CurError::InvalidArgument(format!("depth d = {d} exceeds t = {t}")));
    }
    if t > 30 {
        return Err(CurError::InvalidArgument(format!("t = {t} too large")));
    }
    Ok(())
}

fn sample_rows<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(CurError::InvalidArgument(format!("row sample {k} exceeds {n}")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    rows.truncate(k);
    Ok(rows)
}

/// Column support of row `a` of the `d`-abridged transform of order `2^t`.
fn abridged_support(t: u32, d: u32, a: usize) -> impl Iterator<Item = usize> {
    let s = 1usize << (t - d);
    (0..1usize << d).map(move |blk| blk * s + a % s)
}

/// `k` randomly chosen (and randomly ordered) rows of `H_d D`, with `D` a
/// random `±1` diagonal when `scaling` is Rademacher.
pub fn build_arht<R: Rng + ?Sized>(
    t: u32,
    d: u32,
    scaling: HadamardScaling,
    k: usize,
    rng: &mut R,
) -> Result<SparseMultiplier> {
    check_depth(t, d)?;
    let n = 1usize << t;
    let rows = sample_rows(n, k, rng)?;
    let signs: Vec<f64> = match scaling {
        HadamardScaling::Rademacher => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        HadamardScaling::None => vec![1.0; n],
    };
    let entries = rows
        .iter()
        .map(|&a| {
            abridged_support(t, d, a)
                .map(|b| (b, hadamard_entry(t, d, a, b) * signs[b]))
                .collect()
        })
        .collect();
    Ok(SparseMultiplier::from_rows(MultiplierKind::Arht, n, entries))
}

/// `k` randomly chosen rows of `F_d D` with `D` a diagonal of random unit
/// phases; the real rows are the stacked real and imaginary parts (`2k` rows).
pub fn build_arft<R: Rng + ?Sized>(
    t: u32,
    d: u32,
    scaling: FourierScaling,
    k: usize,
    rng: &mut R,
) -> Result<SparseMultiplier> {
    check_depth(t, d)?;
    let n = 1usize << t;
    let rows = sample_rows(n, k, rng)?;
    let phases: Vec<Complex64> = match scaling {
        FourierScaling::UnitaryDiag => (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
            .collect(),
        FourierScaling::None => vec![Complex64::new(1.0, 0.0); n],
    };
    let complex: Vec<Vec<(usize, Complex64)>> = rows
        .iter()
        .map(|&a| {
            abridged_support(t, d, a)
                .map(|b| (b, fourier_entry(t, d, a, b) * phases[b]))
                .collect()
        })
        .collect();
    let mut real: Vec<Vec<(usize, f64)>> = complex
        .iter()
        .map(|r| r.iter().map(|&(j, v)| (j, v.re)).collect())
        .collect();
    real.extend(complex.iter().map(|r| r.iter().map(|&(j, v)| (j, v.im)).collect::<Vec<_>>()));
    let mut m = SparseMultiplier::from_rows(MultiplierKind::Arft, n, real);
    m.complex = Some(complex);
    Ok(m)
}

/// Square matrix with a random `±1` diagonal and `steps` further `±1` entries
/// filled along the cyclic off-diagonals `(i, i+1), (i, i+2), ...` in order.
pub fn build_quasi_rademacher<R: Rng + ?Sized>(n: usize, steps: usize, rng: &mut R) -> Result<SparseMultiplier> {
    let max = n * n.saturating_sub(1);
    if steps > max {
        return Err(CurError::InvalidArgument(format!("steps {steps} exceed n^2 - n = {max}")));
    }
    let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, sign())]).collect();
    let mut left = steps;
    'fill: for off in 1..n {
        for (i, row) in rows.iter_mut().enumerate() {
            if left == 0 {
                break 'fill;
            }
            row.push(((i + off) % n, sign()));
            left -= 1;
        }
    }
    for r in &mut rows {
        r.sort_by_key(|e| e.0);
    }
    Ok(SparseMultiplier::from_rows(MultiplierKind::QuasiRademacher, n, rows))
}

/// `k` distinct rows of a random `m x m` permutation matrix.
pub fn build_subpermutation<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<SparseMultiplier> {
    let rows = sample_rows(m, k, rng)?;
    Ok(SparseMultiplier::from_rows(
        MultiplierKind::Subpermutation,
        m,
        rows.into_iter().map(|j| vec![(j, 1.0)]).collect(),
    ))
}

/// Dense Gaussian `k x m`. Applying it reads whole rows or columns of the
/// operand, so it only serves as a baseline.
pub fn build_gaussian<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<SparseMultiplier> {
    let rows = (0..k)
        .map(|_| (0..m).map(|j| (j, StandardNormal.sample(rng))).collect())
        .collect();
    Ok(SparseMultiplier::from_rows(MultiplierKind::Gaussian, m, rows))
}

/// `sum_i coeffs[i] * multipliers[i]`, optionally with orthonormalized rows.
pub fn combine(multipliers: &[SparseMultiplier], coeffs: &[f64], orthogonalize: bool) -> Result<SparseMultiplier> {
    let first = multipliers
        .first()
        .ok_or_else(|| CurError::InvalidArgument("nothing to combine".into()))?;
    if multipliers.len() != coeffs.len() {
        return Err(CurError::InvalidArgument("one coefficient per multiplier".into()));
    }
    let (k, m) = (first.rows, first.cols);
    if multipliers.iter().any(|x| x.rows != k || x.cols != m) {
        return Err(CurError::InvalidArgument("multipliers have different shapes".into()));
    }
    let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    for (x, &c) in multipliers.iter().zip(coeffs) {
        for (i, row) in x.entries.iter().enumerate() {
            for &(j, v) in row {
                *acc[i].entry(j).or_insert(0.0) += c * v;
            }
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = acc.into_iter().map(|r| r.into_iter().collect()).collect();
    let combined = SparseMultiplier::from_rows(MultiplierKind::Combined, m, rows);
    if !orthogonalize {
        return Ok(combined);
    }
    if k > m {
        return Err(CurError::RankCollapse { rank: m, expected: k });
    }
    // rows of X = columns of X^T; thin QR of X^T
    let xt = combined.to_dense().transpose();
    let qr = xt.qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..k).filter(|&i| r[(i, i)].abs() > 1e-12 * scale).count();
    if rank < k {
        return Err(CurError::RankCollapse { rank, expected: k });
    }
    let q = qr.q().transpose();
    let rows = (0..k)
        .map(|i| (0..m).filter_map(|j| {
            let v = q[(i, j)];
            (v.abs() > 0.0).then_some((j, v))
        }).collect())
        .collect();
    Ok(SparseMultiplier::from_rows(MultiplierKind::Combined, m, rows))
}

/// `X M Y^T` as an entry oracle over `M`; nothing is materialized and every read
/// is charged to `M`'s counter. `yt` holds the columns of the right multiplier as rows.
pub struct PreprocessedOracle<'a> {
    m: &'a dyn MatrixOracle,
    x: &'a SparseMultiplier,
    yt: &'a SparseMultiplier,
}

impl<'a> PreprocessedOracle<'a> {
    pub fn new(m: &'a dyn MatrixOracle, x: &'a SparseMultiplier, yt: &'a SparseMultiplier) -> Result<Self> {
        if x.cols != m.rows() || yt.cols != m.cols() {
            return Err(CurError::InvalidArgument(format!(
                "multipliers {}x{} and {}x{} do not fit a {}x{} matrix",
                x.rows,
                x.cols,
                yt.rows,
                yt.cols,
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self { m, x, yt })
    }
}

/// Rows `rows` of `s` restricted (and re-indexed) to `support`.
fn local_rows(s: &SparseMultiplier, rows: &[usize], support: &[usize]) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(rows.len(), support.len());
    for (a, &i) in rows.iter().enumerate() {
        for &(j, v) in &s.entries[i] {
            let pos = support.binary_search(&j).expect("support covers row");
            d[(a, pos)] += v;
        }
    }
    d
}

impl MatrixOracle for PreprocessedOracle<'_> {
    fn rows(&self) -> usize {
        self.x.rows
    }

    fn cols(&self) -> usize {
        self.yt.rows
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.block(&[i], &[j])[(0, 0)]
    }

    fn access_count(&self) -> u64 {
        self.m.access_count()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        let sr = self.x.support(rows);
        let sc = self.yt.support(cols);
        let mb = self.m.block(&sr, &sc);
        local_rows(self.x, rows, &sr) * mb * local_rows(self.yt, cols, &sc).transpose()
    }

    fn to_dense(&self) -> DenseMatrix {
        let md = self.m.to_dense();
        let xm = self.x.apply(&md).expect("shape checked");
        self.yt.apply(&xm.transpose()).expect("shape checked").transpose()
    }
}

/// Approximation `(M Y_J) N (X_I M)` of `M` obtained from a sketch.
#[derive(Debug, Clone)]
pub struct SketchApprox {
    /// Sketch rows and columns used.
    pub row_set: IndexSet,
    pub col_set: IndexSet,
    pub left: DenseMatrix,
    pub nucleus: DenseMatrix,
    pub right: DenseMatrix,
    pub rho: usize,
    pub degraded: bool,
}

impl LowRank for SketchApprox {
    fn left(&self) -> &DenseMatrix {
        &self.left
    }
    fn middle(&self) -> &DenseMatrix {
        &self.nucleus
    }
    fn right(&self) -> &DenseMatrix {
        &self.right
    }
}

/// `M Y^T[.., rows]^T`: the sketch columns mapped back onto `M`'s rows, `m x |rows|`.
fn m_times_yt_rows(m: &dyn MatrixOracle, yt: &SparseMultiplier, rows: &[usize]) -> DenseMatrix {
    let sc = yt.support(rows);
    m.columns(&sc) * local_rows(yt, rows, &sc).transpose()
}

fn x_rows_times_m(m: &dyn MatrixOracle, x: &SparseMultiplier, rows: &[usize]) -> DenseMatrix {
    let sr = x.support(rows);
    local_rows(x, rows, &sr) * m.rows_of(&sr)
}

/// Runs `inner` on `X M Y^T` and maps the result back to an approximation of `M`.
///
/// For `X`, `Y` with orthogonal columns up to scaling, `X^+ C U R Y^+` equals
/// `(M Y_J) U (X_I M)`, which is what is returned.
pub fn preprocess_then_lra(
    m: &dyn MatrixOracle,
    x: &SparseMultiplier,
    yt: &SparseMultiplier,
    inner: Driver,
    cfg: &AlgoConfig,
) -> Result<SketchApprox> {
    let p = PreprocessedOracle::new(m, x, yt)?;
    let f = inner.run(&p, cfg)?;
    Ok(SketchApprox {
        left: m_times_yt_rows(m, yt, f.col_set.indices()),
        right: x_rows_times_m(m, x, f.row_set.indices()),
        nucleus: f.u,
        row_set: f.row_set,
        col_set: f.col_set,
        rho: f.rho,
        degraded: f.degraded,
    })
}

/// `(M Y) N (X M)` with `N = ((X M Y)_rho)^+` for a `k x m` left and an `n x l`
/// right multiplier (given as its `l x n` transpose).
pub fn subspace_sampling_primitive(
    m: &dyn MatrixOracle,
    x: &SparseMultiplier,
    yt: &SparseMultiplier,
    rho: usize,
) -> Result<SketchApprox> {
    let p = PreprocessedOracle::new(m, x, yt)?;
    let (k, l) = (x.rows, yt.rows);
    if rho == 0 || rho > k.min(l) {
        return Err(CurError::InvalidArgument(format!("rho = {rho} must lie in 1..={}", k.min(l))));
    }
    let all_r: Vec<usize> = (0..k).collect();
    let all_c: Vec<usize> = (0..l).collect();
    let sketch = p.block(&all_r, &all_c);
    let (nucleus, used) = cur::nucleus(&sketch, rho)?;
    Ok(SketchApprox {
        row_set: IndexSet::full(k),
        col_set: IndexSet::full(l),
        left: m_times_yt_rows(m, yt, &all_c),
        nucleus,
        right: x_rows_times_m(m, x, &all_r),
        rho: used,
        degraded: used < rho,
    })
}

/// Recursion depth of the abridged transforms when none is given.
pub const DEFAULT_DEPTH: u32 = 3;

/// Which multiplier family the harness uses on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocKind {
    None,
    Arht,
    Arft,
    Qrad,
    Subperm,
    Gaussian,
}

impl std::str::FromStr for PreprocKind {
    type Err = CurError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Self::None,
            "arht" => Self::Arht,
            "arft" => Self::Arft,
            "qrad" => Self::Qrad,
            "subperm" => Self::Subperm,
            "gaussian" => Self::Gaussian,
            _ => return Err(CurError::Parse(format!("unknown pre-processing {s:?}"))),
        })
    }
}

impl PreprocKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Arht => "arht",
            Self::Arft => "arft",
            Self::Qrad => "qrad",
            Self::Subperm => "subperm",
            Self::Gaussian => "gaussian",
        }
    }
}

/// Square-in-spirit multiplier with orthogonal columns (up to scaling) acting on
/// a dimension of size `n`: for the abridged transforms all `2^t >= n` rows are
/// kept in random order and the columns restricted to the first `n`.
pub fn build_side<R: Rng + ?Sized>(kind: PreprocKind, n: usize, depth: u32, rng: &mut R) -> Result<SparseMultiplier> {
    let t = usize::BITS - n.saturating_sub(1).leading_zeros();
    let full = 1usize << t;
    let d = depth.min(t);
    match kind {
        PreprocKind::None => Ok(SparseMultiplier::identity(n)),
        PreprocKind::Arht => build_arht(t, d, HadamardScaling::Rademacher, full, rng)?.restrict_cols(n),
        PreprocKind::Arft => build_arft(t, d, FourierScaling::UnitaryDiag, full, rng)?.restrict_cols(n),
        PreprocKind::Qrad => build_quasi_rademacher(n, n.saturating_sub(1), rng),
        PreprocKind::Subperm => build_subpermutation(n, n, rng),
        PreprocKind::Gaussian => build_gaussian(n, n, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::cur::evaluate;
    use crate::oracle::OracleMatrix;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type CMat = DMatrix<Complex64>;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut r = rng(seed);
        DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut r))
    }

    fn max_abs(m: &DenseMatrix) -> f64 {
        m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Block recursion for the abridged Hadamard matrix, independent of the closed form.
    fn hadamard_recursive(t: u32, d: u32) -> DenseMatrix {
        let mut h = DenseMatrix::identity(1 << (t - d), 1 << (t - d));
        for _ in 0..d {
            let n = h.nrows();
            let mut next = DenseMatrix::zeros(2 * n, 2 * n);
            next.view_mut((0, 0), (n, n)).copy_from(&h);
            next.view_mut((0, n), (n, n)).copy_from(&h);
            next.view_mut((n, 0), (n, n)).copy_from(&h);
            next.view_mut((n, n), (n, n)).copy_from(&(-&h));
            h = next;
        }
        h
    }

    /// Fourier recursion with even/odd row permutation and twiddle columns.
    fn fourier_recursive(t: u32, d: u32) -> CMat {
        let s = 1usize << (t - d);
        let mut f = CMat::identity(s, s);
        for i in 0..d {
            let n = f.nrows(); // 2^i * s
            let blocks = 1usize << i;
            let w = Complex64::from_polar(1.0, 2.0 * PI / (2 * blocks) as f64);
            let mut fd = f.clone();
            for c in 0..n {
                let tw = w.powu((c / s) as u32);
                fd.column_mut(c).iter_mut().for_each(|z| *z *= tw);
            }
            let mut stacked = CMat::zeros(2 * n, 2 * n);
            stacked.view_mut((0, 0), (n, n)).copy_from(&f);
            stacked.view_mut((0, n), (n, n)).copy_from(&f);
            stacked.view_mut((n, 0), (n, n)).copy_from(&fd);
            stacked.view_mut((n, n), (n, n)).copy_from(&(-&fd));
            // block row v_j = u_{2j}, v_{j + 2^i} = u_{2j+1} applied as the inverse shuffle
            let mut out = CMat::zeros(2 * n, 2 * n);
            for j in 0..blocks {
                for r in 0..s {
                    out.row_mut((2 * j) * s + r).copy_from(&stacked.row(j * s + r));
                    out.row_mut((2 * j + 1) * s + r).copy_from(&stacked.row((j + blocks) * s + r));
                }
            }
            f = out;
        }
        f
    }

    fn closed_hadamard(t: u32, d: u32) -> DenseMatrix {
        let n = 1 << t;
        DenseMatrix::from_fn(n, n, |a, b| hadamard_entry(t, d, a, b))
    }

    fn closed_fourier(t: u32, d: u32) -> CMat {
        let n = 1 << t;
        CMat::from_fn(n, n, |a, b| fourier_entry(t, d, a, b))
    }

    #[test]
    fn hadamard_h2_matches_printed_pattern() {
        let printed = [[1., 1., 1., 1.], [1., -1., 1., -1.], [1., 1., -1., -1.], [1., -1., -1., 1.]];
        let h = build_arht(2, 2, HadamardScaling::None, 4, &mut rng(0)).unwrap();
        let dense = h.to_dense();
        // rows come out permuted; each printed row must appear exactly once
        for row in printed {
            let hits = (0..4)
                .filter(|&i| (0..4).all(|j| dense[(i, j)] == row[j]))
                .count();
            assert_eq!(hits, 1);
        }
        assert_eq!(closed_hadamard(2, 2), DenseMatrix::from_fn(4, 4, |i, j| printed[i][j]));
    }

    #[test]
    fn hadamard_h3_block_pattern() {
        // block signs of the printed 8x8 display, s = 4
        let printed: [[i8; 8]; 8] = [
            [1, 1, 1, 1, 1, 1, 1, 1],
            [1, -1, 1, -1, 1, -1, 1, -1],
            [1, 1, -1, -1, 1, 1, -1, -1],
            [1, -1, -1, 1, 1, -1, -1, 1],
            [1, 1, 1, 1, -1, -1, -1, -1],
            [1, -1, 1, -1, -1, 1, -1, 1],
            [1, 1, -1, -1, -1, -1, 1, 1],
            [1, -1, -1, 1, -1, 1, 1, -1],
        ];
        let h = closed_hadamard(5, 3);
        for a in 0..32 {
            for b in 0..32 {
                let expect = if a % 4 == b % 4 { printed[a / 4][b / 4] as f64 } else { 0.0 };
                assert_eq!(h[(a, b)], expect);
            }
        }
        assert_eq!(h, hadamard_recursive(5, 3));
    }

    #[test]
    fn depth_zero_is_signed_identity() {
        let h = build_arht(3, 0, HadamardScaling::Rademacher, 8, &mut rng(1)).unwrap();
        assert_eq!(h.nnz_per_row(), 1);
        let d = h.to_dense();
        assert_eq!(d.transpose() * &d, DenseMatrix::identity(8, 8));
        assert!(build_arht(2, 3, HadamardScaling::None, 4, &mut rng(1)).is_err());
    }

    #[test]
    fn fourier_small_depths_match_printed() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let f1 = closed_fourier(1, 1);
        assert_eq!(f1, CMat::from_row_slice(2, 2, &[one, one, one, -one]));
        let printed = [
            [one, one, one, one],
            [one, i, -one, -i],
            [one, -one, one, -one],
            [one, -i, -one, i],
        ];
        let f2 = closed_fourier(3, 2); // s = 2
        for a in 0..8 {
            for b in 0..8 {
                let expect = if a % 2 == b % 2 { printed[a / 2][b / 2] } else { Complex64::new(0.0, 0.0) };
                assert!((f2[(a, b)] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn fourier_closed_form_matches_recursion() {
        for t in 0..=5 {
            for d in 0..=t {
                let diff = closed_fourier(t, d) - fourier_recursive(t, d);
                assert!(diff.iter().all(|z| z.norm() < 1e-12), "t={t} d={d}");
            }
        }
    }

    #[test]
    fn fourier_full_depth_is_dft() {
        let mut r = rng(5);
        for t in 1..=5u32 {
            let n = 1usize << t;
            let f = build_arft(t, t, FourierScaling::None, n, &mut r).unwrap();
            let rows: Vec<usize> = {
                // recover which DFT row each multiplier row is from its second column
                let dc = f.to_dense_complex().unwrap();
                (0..n)
                    .map(|a| (0..n).find(|&e| (dc[(a, 1)] - Complex64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)).norm() < 1e-12).unwrap())
                    .collect()
            };
            for _ in 0..10 {
                let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(r.random(), r.random())).collect();
                let got = f.apply_complex(&x).unwrap();
                for (a, &e) in rows.iter().enumerate() {
                    // direct O(n^2) sum
                    let direct: Complex64 = (0..n)
                        .map(|b| Complex64::from_polar(1.0, 2.0 * PI * ((e * b) % n) as f64 / n as f64) * x[b])
                        .sum();
                    assert!((got[a] - direct).norm() <= 1e-12 * direct.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn structure_invariants_all_depths() {
        let mut r = rng(7);
        for t in 0..=8u32 {
            let n = 1usize << t;
            for d in 0..=t {
                let h = build_arht(t, d, HadamardScaling::Rademacher, n, &mut r).unwrap();
                let hd = h.to_dense();
                let scale = (1u64 << d) as f64;
                assert!(h.entries.iter().all(|row| row.len() == 1 << d));
                assert!((0..n).all(|c| hd.column(c).iter().filter(|v| **v != 0.0).count() == 1 << d));
                assert!(max_abs(&(&hd * hd.transpose() - DenseMatrix::identity(n, n) * scale)) <= 1e-12);

                let f = build_arft(t, d, FourierScaling::UnitaryDiag, n, &mut r).unwrap();
                let fc = f.to_dense_complex().unwrap();
                let g = &fc * fc.adjoint();
                assert!(g.iter().enumerate().all(|(idx, z)| {
                    let (i, j) = (idx % n, idx / n);
                    let want = if i == j { scale } else { 0.0 };
                    (z - Complex64::new(want, 0.0)).norm() <= 1e-12 * scale
                }));
                // stacked real form keeps orthogonal columns
                let fr = f.to_dense();
                assert!(max_abs(&(fr.transpose() * &fr - DenseMatrix::identity(n, n) * scale)) <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn quasi_rademacher_examples() {
        let q = build_quasi_rademacher(6, 0, &mut rng(2)).unwrap();
        let d = q.to_dense();
        assert_eq!(d.transpose() * &d, DenseMatrix::identity(6, 6));

        let q = build_quasi_rademacher(5, 20, &mut rng(2)).unwrap();
        assert!(q.to_dense().iter().all(|v| v.abs() == 1.0));

        let q = build_quasi_rademacher(16, 16, &mut rng(3)).unwrap();
        assert_eq!(q.nnz(), 32);
        assert!(q.nnz_per_row() <= 2);
        assert!(build_quasi_rademacher(3, 7, &mut rng(3)).is_err());
    }

    #[test]
    fn subpermutation_round_trip() {
        let p = build_subpermutation(7, 7, &mut rng(4)).unwrap();
        let d = p.to_dense();
        let x = gaussian(7, 3, 1);
        let y = p.apply(&x).unwrap();
        assert_eq!(d.transpose() * y, x);
    }

    #[test]
    fn gaussian_sketch_of_low_rank_is_low_rank() {
        let m = gaussian(40, 3, 10) * gaussian(3, 30, 11);
        let g = build_gaussian(8, 40, &mut rng(12)).unwrap();
        let gm = g.apply(&m).unwrap();
        assert_eq!(linalg::numerical_rank(&linalg::singular_values(&gm).unwrap(), 1e-10), 3);
    }

    #[test]
    fn combine_examples() {
        let p = build_subpermutation(4, 9, &mut rng(5)).unwrap();
        let same = combine(std::slice::from_ref(&p), &[1.0], false).unwrap();
        assert_eq!(same.to_dense(), p.to_dense());

        let q = build_subpermutation(4, 9, &mut rng(6)).unwrap();
        let sum = combine(&[p.clone(), q], &[1.0, 1.0], false).unwrap();
        assert!(sum.nnz_per_row() <= 2);

        let h = build_arht(4, 2, HadamardScaling::Rademacher, 5, &mut rng(7)).unwrap();
        let s = build_subpermutation(5, 16, &mut rng(8)).unwrap();
        let c = combine(&[h, s], &[1.0, 0.5], true).unwrap();
        let d = c.to_dense();
        assert!(max_abs(&(&d * d.transpose() - DenseMatrix::identity(5, 5))) <= 1e-12);

        let z = combine(&[p.clone(), p], &[1.0, -1.0], true);
        assert!(matches!(z, Err(CurError::RankCollapse { .. })));
    }

    #[test]
    fn preprocessed_oracle_matches_dense_product() {
        let md = gaussian(12, 10, 13);
        let o = OracleMatrix::from_dense(md.clone()).unwrap();
        let x = build_side(PreprocKind::Arht, 12, 2, &mut rng(14)).unwrap();
        let yt = build_side(PreprocKind::Arht, 10, 2, &mut rng(15)).unwrap();
        let p = PreprocessedOracle::new(&o, &x, &yt).unwrap();
        let dense = x.to_dense() * &md * yt.to_dense().transpose();
        assert!(max_abs(&(p.to_dense() - &dense)) < 1e-12);
        let b = p.block(&[0, 5], &[3]);
        assert!((b[(1, 0)] - dense[(5, 3)]).abs() < 1e-12);
        // one sketch entry reads at most 2^d x 2^d entries of M
        assert!(o.access_count() <= 2 * 4 * 4);
    }

    #[test]
    fn identity_preprocessing_equals_inner_driver() {
        let md = gaussian(30, 3, 16) * gaussian(3, 25, 17);
        let o = OracleMatrix::from_dense(md.clone()).unwrap();
        let cfg = AlgoConfig::tests2(3).with_seed(3);
        let (x, yt) = (SparseMultiplier::identity(30), SparseMultiplier::identity(25));
        let s = preprocess_then_lra(&o, &x, &yt, Driver::CrossApproximation, &cfg).unwrap();
        let f = Driver::CrossApproximation.run(&o.fresh(), &cfg).unwrap();
        assert_eq!((&s.row_set, &s.col_set), (&f.row_set, &f.col_set));
        assert!((s.reconstruct() - f.reconstruct()).norm() < 1e-10 * md.norm());
    }

    #[test]
    fn subpermutation_sampling_is_primitive() {
        let md = gaussian(20, 2, 18) * gaussian(2, 15, 19);
        let o = OracleMatrix::from_dense(md.clone()).unwrap();
        let x = build_subpermutation(4, 20, &mut rng(20)).unwrap();
        let yt = build_subpermutation(3, 15, &mut rng(21)).unwrap();
        let s = subspace_sampling_primitive(&o, &x, &yt, 2).unwrap();
        let rows = IndexSet::from_unsorted(x.support(&[0, 1, 2, 3]), 20).unwrap();
        let cols = IndexSet::from_unsorted(yt.support(&[0, 1, 2]), 15).unwrap();
        let f = cur::canonical_cur(&o, &rows, &cols, 2).unwrap();
        assert!((s.reconstruct() - f.reconstruct()).norm() < 1e-10 * md.norm());
    }

    #[test]
    fn gaussian_sampling_exact_on_low_rank() {
        for seed in 0..100u64 {
            let md = gaussian(30, 3, 100 + seed) * gaussian(3, 25, 300 + seed);
            let o = OracleMatrix::from_dense(md.clone()).unwrap();
            let x = build_gaussian(3, 30, &mut rng(500 + seed)).unwrap();
            let yt = build_gaussian(3, 25, &mut rng(700 + seed)).unwrap();
            let s = subspace_sampling_primitive(&o, &x, &yt, 3).unwrap();
            assert!(evaluate(&s, &md).unwrap().spectral_rel <= 1e-8, "seed {seed}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            // any LRA of the sketch maps back with the same relative error
            #[test]
            fn orthogonal_preprocessing_preserves_error(m in 4usize..=64, n in 4usize..=64, d in 0u32..=3, seed in any::<u64>()) {
                let md = gaussian(m, n, seed);
                let o = OracleMatrix::from_dense(md.clone()).unwrap();
                let x = build_side(PreprocKind::Arht, m, d, &mut rng(seed ^ 1)).unwrap();
                let yt = build_side(PreprocKind::Arht, n, d, &mut rng(seed ^ 2)).unwrap();
                let cfg = AlgoConfig::tests1(2).with_seed(seed);
                let s = preprocess_then_lra(&o, &x, &yt, Driver::Primitive, &cfg).unwrap();
                let p = PreprocessedOracle::new(&o, &x, &yt).unwrap();
                let f = Driver::Primitive.run(&p, &cfg).unwrap();
                let sketch_err = evaluate(&f, &p.to_dense()).unwrap();
                let back_err = evaluate(&s, &md).unwrap();
                prop_assert!((sketch_err.frob_rel - back_err.frob_rel).abs() <= 1e-12 * sketch_err.frob_rel.max(1.0));
                prop_assert!((sketch_err.spectral_rel - back_err.spectral_rel).abs() <= 1e-9 * sketch_err.spectral_rel.max(1.0));
            }
        }
    }
}
