//! Input-adaptive sparse matrix-vector multiplication.
//!
//! Given a matrix in CSR form, the toolkit picks one of four storage formats
//! (CSR, COO, DIA, ELL) and its kernel at runtime. The choice comes from an
//! ordered ruleset over structural features of the matrix, with an
//! execute-and-measure fallback when no rule is confident enough. The
//! offline side labels a corpus by measured best format, induces a decision
//! tree and turns it into that ruleset.
//!
//! ```
//! use spmv_tune::formats::CsrMatrix;
//! use spmv_tune::autotuner::{tune, TuneConfig};
//! use spmv_tune::mining::RuleSet;
//!
//! let a = CsrMatrix::<f64>::identity(64);
//! let rules = RuleSet::observation_rules();
//! let tuned = tune(&a, &rules, &TuneConfig::default()).unwrap();
//! let y = tuned.spmv(&vec![1.0; 64]).unwrap();
//! assert_eq!(y, vec![1.0; 64]);
//! ```

pub mod autotuner;
pub mod features;
pub mod formats;
pub mod io;
pub mod kernels;
pub mod mining;
pub mod scalar;
pub mod timing;

pub use formats::{CooMatrix, CsrMatrix, DiaMatrix, EllMatrix, Format, FormatError, SparseMatrix};
pub use scalar::{Precision, Scalar};
