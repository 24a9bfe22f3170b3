//! Joint and marginal Monte Carlo estimators of product-form expectations.
//!
//! The crate covers the estimators themselves ([`product`]), their exact
//! variance theory, the total covariation of a sample ([`covariation`]),
//! nested estimators under conditional independence ([`conditional`]), and a
//! Bayesian marginal likelihood study on a binary latent trait model
//! ([`latent`], [`bml`]) driven by the experiment harness ([`harness`]).

pub mod error;
pub mod exec;
pub mod logspace;
pub mod stats;
pub mod product;
pub mod covariation;
pub mod quadrature;
pub mod conditional;
pub mod latent;
pub mod bml;
pub mod harness;

pub use error::{Error, Result};
pub use exec::Execution;
pub use stats::{Approach, EstimateReport, Method, MomentSummary, SampleBlock};
