pub mod error;
pub mod linalg;
pub mod oracle;
pub mod selection;
pub mod cur;
pub mod algorithms;
pub mod preprocess;
pub mod bounds;
pub mod testmatrices;
pub mod experiment;

pub use error::{CurError, Result};
pub use linalg::{DenseMatrix, IndexSet, SvdFactors};
pub use oracle::{MatrixOracle, OracleMatrix};
pub use cur::{CurFactors, LowRank};
pub use algorithms::{AlgoConfig, Driver};
pub use preprocess::{PreprocKind, SparseMultiplier};
pub use testmatrices::{Class2Kind, Family, MatrixSpec};
pub use experiment::{ExperimentSpec, TestId, TrialStats};
