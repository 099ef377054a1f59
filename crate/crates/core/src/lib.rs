//! Feature selection by revisiting alpha-investing: a thresholded,
//! multi-pass approximation to forward stepwise regression whose tests are
//! paid for from an alpha-wealth ledger, with dynamic interaction search and
//! exact subset-selection oracles for checking its guarantees.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod sim;
pub mod term;
pub mod wealth;

pub use engine::{run_rai, run_rai_with, RaiConfig, RaiOutcome, SelectionTrace, Termination};
pub use error::{RaiError, Result};
pub use kernel::{standardize, Dataset, ModelState, Standardized};
pub use term::FeatureTerm;
pub use wealth::{pass_parameters, MfdrCounts, WealthLedger};
