//! Input generators: perturbed factor-Gaussian products, discretized first-kind
//! integral equations, a boundary-integral Laplacian, factor-Gaussian variants
//! and the delta family. Every generator is an entry oracle, deterministic in
//! its seed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurError, Result};
use crate::linalg::DenseMatrix;
use crate::oracle::OracleMatrix;

/// Perturbation size in the synthetic class.
pub const CLASS1_NOISE: f64 = 1e-10;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal sample addressed by `(seed, i, j)`; lets a huge Gaussian
/// matrix be read entry by entry without storing it.
pub fn hashed_normal(seed: u64, i: usize, j: usize) -> f64 {
    let a = splitmix(seed ^ splitmix((i as u64) << 32 ^ j as u64 ^ splitmix(i as u64)));
    let b = splitmix(a);
    // uniforms in (0, 1]
    let u1 = ((a >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (b >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Derives an independent seed for a sub-stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix(seed ^ splitmix(stream.wrapping_add(0x5EED)))
}

fn gaussian_dense(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
}

/// `M = G1 G2 + 1e-10 G3` with `G1` `n x r`, `G2` `r x n`. Only the thin
/// factors are stored.
pub fn gen_class1(n: usize, r: usize, seed: u64) -> Result<OracleMatrix> {
    gen_class1_rect(n, n, r, seed)
}

pub fn gen_class1_rect(m: usize, n: usize, r: usize, seed: u64) -> Result<OracleMatrix> {
    if r == 0 || r > m.min(n) {
        return Err(CurError::InvalidArgument(format!("rank {r} outside 1..={}", m.min(n))));
    }
    let left = gaussian_dense(m, r, derive_seed(seed, 1));
    // store the right factor column-major by output column
    let right = gaussian_dense(r, n, derive_seed(seed, 2));
    let noise_seed = derive_seed(seed, 3);
    Ok(OracleMatrix::new(m, n, move |i, j| {
        left.row(i).transpose().dot(&right.column(j)) + CLASS1_NOISE * hashed_normal(noise_seed, i, j)
    }))
}

/// Dense-formula discretizations of first-kind Fredholm equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class2Kind {
    Baart,
    Shaw,
    Gravity,
    Wing,
    Foxgood,
    InverseLaplace,
}

impl Class2Kind {
    pub const ALL: [Class2Kind; 6] = [
        Self::Baart,
        Self::Shaw,
        Self::Gravity,
        Self::Wing,
        Self::Foxgood,
        Self::InverseLaplace,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Baart => "baart",
            Self::Shaw => "shaw",
            Self::Gravity => "gravity",
            Self::Wing => "wing",
            Self::Foxgood => "foxgood",
            Self::InverseLaplace => "inverse_laplace",
        }
    }
}

impl FromStr for Class2Kind {
    type Err = CurError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s || (s == "i_laplace" && *k == Self::InverseLaplace))
            .ok_or_else(|| CurError::Parse(format!("unknown class2 kind {s:?}")))
    }
}

/// `(exp(b c) - exp(a c)) / c`, i.e. the integral of `exp(s c)` over `[a, b]`.
fn exp_integral(a: f64, b: f64, c: f64) -> f64 {
    if c.abs() < 1e-300 {
        return b - a;
    }
    (a * c).exp() * ((b - a) * c).exp_m1() / c
}

pub fn gen_class2(kind: Class2Kind, n: usize) -> Result<OracleMatrix> {
    if n == 0 {
        return Err(CurError::InvalidArgument("n must be positive".into()));
    }
    let nf = n as f64;
    let mid = move |i: usize| (i as f64 + 0.5) / nf;
    Ok(match kind {
        Class2Kind::Baart => {
            // kernel exp(s cos t) on [0, pi/2] x [0, pi]: exact in s, Simpson in t,
            // normalized for orthonormal box functions
            let hs = PI / (2.0 * nf);
            let ht = PI / nf;
            let c = 1.0 / (3.0 * 2f64.sqrt());
            OracleMatrix::new(n, n, move |i, j| {
                let (a, b) = (i as f64 * hs, (i + 1) as f64 * hs);
                let g = |t: f64| exp_integral(a, b, t.cos());
                let jf = j as f64;
                c * (g(jf * ht) + 4.0 * g((jf + 0.5) * ht) + g((jf + 1.0) * ht))
            })
        }
        Class2Kind::Shaw => {
            if !n.is_multiple_of(2) {
                return Err(CurError::InvalidArgument(format!("shaw needs even n, got {n}")));
            }
            let h = PI / nf;
            let theta = move |i: usize| -PI / 2.0 + (i as f64 + 0.5) * h;
            OracleMatrix::new(n, n, move |i, j| {
                let (si, sj) = (theta(i), theta(j));
                let c = si.cos() + sj.cos();
                let u = PI * (si.sin() + sj.sin());
                let sinc = if u.abs() < 1e-14 { 1.0 } else { u.sin() / u };
                h * (c * sinc).powi(2)
            })
        }
        Class2Kind::Gravity => {
            let d = 0.25;
            OracleMatrix::new(n, n, move |i, j| {
                let x = mid(i) - mid(j);
                d / (nf * (d * d + x * x).powf(1.5))
            })
        }
        Class2Kind::Wing => OracleMatrix::new(n, n, move |i, j| {
            let (s, t) = (mid(i), mid(j));
            t * (-s * t * t).exp() / nf
        }),
        Class2Kind::Foxgood => OracleMatrix::new(n, n, move |i, j| mid(i).hypot(mid(j)) / nf),
        Class2Kind::InverseLaplace => {
            let (nodes, log_w) = gauss_laguerre(n);
            let (nodes, log_w) = (Arc::new(nodes), Arc::new(log_w));
            // weights below the smallest subnormal vanish, zeroing their columns
            let floor = (f64::MIN_POSITIVE * f64::EPSILON).ln();
            OracleMatrix::new(n, n, move |i, j| {
                if log_w[j] < floor {
                    return 0.0;
                }
                let s = 10.0 * (i + 1) as f64 / nf;
                (log_w[j] + (1.0 - s) * nodes[j]).exp()
            })
        }
    })
}

/// Gauss-Laguerre nodes and log-weights for `n` points.
fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // eigenvalues of the Jacobi matrix (diag 2k+1, off-diagonal k+1) by bisection
    let count_below = |x: f64| {
        let mut q = 1.0f64;
        let mut c = 0usize;
        for k in 0..n {
            let b2 = if k == 0 { 0.0 } else { (k * k) as f64 };
            q = (2 * k + 1) as f64 - x - if k == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let upper = 4.0 * n as f64 + 2.0;
    let nodes: Vec<f64> = (0..n)
        .map(|idx| {
            let (mut lo, mut hi) = (0.0, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    let log_w = nodes
        .iter()
        .map(|&t| {
            let log_l = log_abs_laguerre(n + 1, t);
            t.ln() - 2.0 * ((n + 1) as f64).ln() - 2.0 * log_l
        })
        .collect();
    (nodes, log_w)
}

/// `ln |L_n(t)|` by the three-term recurrence with rescaling.
fn log_abs_laguerre(n: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0f64, 1.0 - t);
    if n == 0 {
        return 0.0;
    }
    let mut log_scale = 0.0;
    for k in 1..n {
        let next = ((2 * k + 1) as f64 - t) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev /= 1e150;
            cur /= 1e150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    cur.abs().ln() + log_scale
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(npts: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; npts];
    let mut w = vec![0.0; npts];
    for i in 0..npts.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (npts as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=npts {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if npts == 0 { 1.0 } else if npts == 1 { z } else { p1 };
            let pn1 = if npts == 1 { 1.0 } else { p0 };
            dp = npts as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[npts - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[npts - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Gauss-Legendre quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (x, w) = gauss_legendre(10);
    let rule = |a: f64, b: f64| {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * x.iter().zip(&w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>()
    };
    fn go<R: Fn(f64, f64) -> f64>(rule: &R, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (rule(a, m), rule(m, b));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        go(rule, a, m, l, tol / 2.0, depth - 1) + go(rule, m, b, r, tol / 2.0, depth - 1)
    }
    go(&rule, a, b, rule(a, b), tol, 40)
}

/// Single-layer Laplace potential from the unit circle to the circle of radius
/// 2, discretized on `n` equal arcs and scaled to unit spectral norm.
/// The matrix is circulant; only its first column is stored.
pub fn gen_class3_laplacian(n: usize) -> Result<OracleMatrix> {
    if n == 0 {
        return Err(CurError::InvalidArgument("n must be positive".into()));
    }
    let h = 2.0 * PI / n as f64;
    // log|2 e^{ia} - e^{ib}| = ln(5 - 4 cos(a - b)) / 2, never singular
    let raw: Vec<f64> = (0..n)
        .map(|d| {
            let shift = d as f64 * h;
            integrate(&|psi: f64| 0.5 * (5.0 - 4.0 * (shift - psi).cos()).ln(), 0.0, h, 1e-13)
        })
        .collect();
    let norm = circulant_spectral_norm(&raw);
    let col: Arc<Vec<f64>> = Arc::new(raw.iter().map(|v| v / norm).collect());
    Ok(OracleMatrix::new(n, n, move |i, j| col[(i + n - j) % n]))
}

/// Largest eigenvalue modulus of the circulant with first column `c`, which is
/// also its spectral norm.
pub fn circulant_spectral_norm(c: &[f64]) -> f64 {
    circulant_eigenvalue_moduli(c).into_iter().fold(0.0, f64::max)
}

pub fn circulant_eigenvalue_moduli(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (d, v) in c.iter().enumerate() {
                let ang = 2.0 * PI * ((k * d) % n) as f64 / n as f64;
                re += v * ang.cos();
                im -= v * ang.sin();
            }
            re.hypot(im)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSide {
    Left,
    Right,
    TwoSided,
}

/// Rank-`rho` product with Gaussian factor(s) and the singular value profile
/// `sigma` (length `rho`). A one-sided variant uses an orthonormal
/// non-Gaussian factor on the other side.
pub fn gen_factor_gaussian(
    m: usize,
    n: usize,
    rho: usize,
    side: FactorSide,
    sigma: &[f64],
    seed: u64,
) -> Result<OracleMatrix> {
    if rho == 0 || rho > m.min(n) || sigma.len() != rho {
        return Err(CurError::InvalidArgument(format!(
            "need 1 <= rho <= min(m, n) and {rho} singular values, got {}",
            sigma.len()
        )));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(CurError::InvalidArgument("sigma must be positive and finite".into()));
    }
    let g_left = gaussian_dense(m, rho, derive_seed(seed, 11));
    let g_right = gaussian_dense(rho, n, derive_seed(seed, 12));
    let orth = |rows: usize, s: u64| crate::linalg::orthonormalize(&gaussian_dense(rows, rho, s));
    let (left, mut right) = match side {
        FactorSide::TwoSided => (g_left, g_right),
        FactorSide::Left => (g_left, orth(n, derive_seed(seed, 13)).transpose()),
        FactorSide::Right => (orth(m, derive_seed(seed, 14)), g_right),
    };
    for (t, s) in sigma.iter().enumerate() {
        right.row_mut(t).scale_mut(*s);
    }
    Ok(OracleMatrix::new(m, n, move |i, j| left.row(i).transpose().dot(&right.column(j))))
}

/// Plain Gaussian matrix read entry by entry.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> OracleMatrix {
    let s = derive_seed(seed, 21);
    OracleMatrix::new(m, n, move |i, j| hashed_normal(s, i, j))
}

/// `e_i e_j^T`, or the zero matrix for `None`.
pub fn gen_delta(m: usize, n: usize, at: Option<(usize, usize)>) -> Result<OracleMatrix> {
    if let Some((i, j)) = at {
        if i >= m || j >= n {
            return Err(CurError::InvalidArgument(format!("({i}, {j}) outside {m}x{n}")));
        }
    }
    Ok(OracleMatrix::new(m, n, move |a, b| if Some((a, b)) == at { 1.0 } else { 0.0 }))
}

/// All `m n` delta matrices in row-major order, then the zero matrix.
pub fn gen_delta_family(m: usize, n: usize) -> impl Iterator<Item = (Option<(usize, usize)>, OracleMatrix)> {
    (0..m * n)
        .map(move |p| Some((p / n, p % n)))
        .chain(std::iter::once(None))
        .map(move |at| (at, gen_delta(m, n, at).expect("in range")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Class1,
    Class2(Class2Kind),
    Class3,
    FactorGaussian { side: FactorSide, sigma: Vec<f64> },
    Delta(Option<(usize, usize)>),
    Gaussian,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Class1 => write!(f, "class1"),
            Family::Class2(k) => write!(f, "class2:{}", k.label()),
            Family::Class3 => write!(f, "class3"),
            Family::FactorGaussian { .. } => write!(f, "factor_gaussian"),
            Family::Delta(_) => write!(f, "delta"),
            Family::Gaussian => write!(f, "gaussian"),
        }
    }
}

impl FromStr for Family {
    type Err = CurError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "class1" => Family::Class1,
            "class3" | "laplacian" => Family::Class3,
            "delta" => Family::Delta(None),
            "gaussian" => Family::Gaussian,
            _ => match s.strip_prefix("class2:") {
                Some(kind) => Family::Class2(kind.parse()?),
                None => return Err(CurError::Parse(format!("unknown family {s:?}"))),
            },
        })
    }
}

/// A reproducible description of one input matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub rho_expected: usize,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn square(family: Family, n: usize, rho: usize, seed: u64) -> Self {
        Self { family, m: n, n, rho_expected: rho, seed }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.family, Family::Class1 | Family::FactorGaussian { .. } | Family::Gaussian)
    }

    pub fn build(&self) -> Result<OracleMatrix> {
        let square = |what: &str| {
            if self.m == self.n {
                Ok(())
            } else {
                Err(CurError::InvalidArgument(format!("{what} inputs are square, got {}x{}", self.m, self.n)))
            }
        };
        match &self.family {
            Family::Class1 => gen_class1_rect(self.m, self.n, self.rho_expected, self.seed),
            Family::Class2(kind) => {
                square("class2")?;
                gen_class2(*kind, self.n)
            }
            Family::Class3 => {
                square("class3")?;
                gen_class3_laplacian(self.n)
            }
            Family::FactorGaussian { side, sigma } => {
                gen_factor_gaussian(self.m, self.n, self.rho_expected, *side, sigma, self.seed)
            }
            Family::Delta(at) => gen_delta(self.m, self.n, *at),
            Family::Gaussian => Ok(gen_gaussian(self.m, self.n, self.seed)),
        }
    }
}
