//! Experiment drivers behind the command-line tool.

pub mod beta;
pub mod config;
pub mod gllvm;
pub mod verify;

pub use beta::{beta_cell, beta_log_truth, beta_product_experiment, write_beta_csv, BetaRow};
pub use config::{BetaConfig, GllvmConfig, Settings};
pub use gllvm::{gllvm_experiment, write_diagnostics_csv, write_gllvm_csv, GllvmStudy};
pub use verify::{conjugate_checks, verify, verify_with, Suite, VerifyReport};

/// Value or `NA`.
pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}
