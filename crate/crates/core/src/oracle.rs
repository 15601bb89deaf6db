//! Entry-oracle view of a matrix with distinct-access accounting.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{CurError, Result};
use crate::linalg::{check_finite, DenseMatrix};

pub type EntryFn = dyn Fn(usize, usize) -> f64 + Send + Sync;

/// Read access to an `m x n` matrix one entry (or one block) at a time.
pub trait MatrixOracle: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// Reads `M[i, j]`, charging the access counter on the first touch.
    fn entry(&self, i: usize, j: usize) -> f64;

    /// Distinct entries read so far.
    fn access_count(&self) -> u64;

    /// `M[rows, cols]` read through the counter.
    fn block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }

    fn columns(&self, cols: &[usize]) -> DenseMatrix {
        let all: Vec<usize> = (0..self.rows()).collect();
        self.block(&all, cols)
    }

    fn rows_of(&self, rows: &[usize]) -> DenseMatrix {
        let all: Vec<usize> = (0..self.cols()).collect();
        self.block(rows, &all)
    }

    /// Full materialization for evaluation. Does not touch the counter.
    fn to_dense(&self) -> DenseMatrix;

    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }
}

/// Set of touched `(i, j)` positions.
enum AccessLog {
    Bits(Vec<AtomicU64>),
    Sparse(Mutex<HashSet<u64>>),
}

/// Above this many entries the bitset would be too large; fall back to a hash set.
const BITSET_LIMIT: u128 = 1 << 30;

struct Accounting {
    log: AccessLog,
    distinct: AtomicU64,
    cols: usize,
}

impl Accounting {
    fn new(rows: usize, cols: usize) -> Self {
        let total = rows as u128 * cols as u128;
        let log = if total <= BITSET_LIMIT {
            let words = (total as usize).div_ceil(64);
            AccessLog::Bits((0..words).map(|_| AtomicU64::new(0)).collect())
        } else {
            AccessLog::Sparse(Mutex::new(HashSet::new()))
        };
        Self {
            log,
            distinct: AtomicU64::new(0),
            cols,
        }
    }

    fn touch(&self, i: usize, j: usize) {
        let key = i as u64 * self.cols as u64 + j as u64;
        let fresh = match &self.log {
            AccessLog::Bits(words) => {
                let bit = 1u64 << (key % 64);
                words[(key / 64) as usize].fetch_or(bit, Ordering::Relaxed) & bit == 0
            }
            AccessLog::Sparse(set) => set.lock().expect("access log poisoned").insert(key),
        };
        if fresh {
            self.distinct.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn count(&self) -> u64 {
        self.distinct.load(Ordering::Relaxed)
    }
}

/// Matrix defined by a pure entry function.
///
/// The counter records distinct positions. Values are recomputed on re-reads
/// rather than cached since the entry function is pure.
#[derive(Clone)]
pub struct OracleMatrix {
    rows: usize,
    cols: usize,
    entry_fn: Arc<EntryFn>,
    acct: Arc<Accounting>,
}

impl std::fmt::Debug for OracleMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("access_count", &self.access_count())
            .finish()
    }
}

impl OracleMatrix {
    pub fn new<F>(rows: usize, cols: usize, entry_fn: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            rows,
            cols,
            entry_fn: Arc::new(entry_fn),
            acct: Arc::new(Accounting::new(rows, cols)),
        }
    }

    pub fn from_dense(m: DenseMatrix) -> Result<Self> {
        check_finite(&m)?;
        let (r, c) = m.shape();
        Ok(Self::new(r, c, move |i, j| m[(i, j)]))
    }

    /// Same entries, fresh counter.
    pub fn fresh(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entry_fn: Arc::clone(&self.entry_fn),
            acct: Arc::new(Accounting::new(self.rows, self.cols)),
        }
    }

    /// Evaluates the entry function without charging the counter.
    pub fn peek(&self, i: usize, j: usize) -> f64 {
        (self.entry_fn)(i, j)
    }

    pub fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(CurError::InvalidArgument(format!(
                "index ({i}, {j}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

impl MatrixOracle for OracleMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.acct.touch(i, j);
        (self.entry_fn)(i, j)
    }

    fn access_count(&self) -> u64 {
        self.acct.count()
    }

    fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| (self.entry_fn)(i, j))
    }
}
