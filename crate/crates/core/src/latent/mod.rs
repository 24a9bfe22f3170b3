//! Binary logistic latent trait model.

pub mod importance;
pub mod model;
pub mod sampler;

pub use importance::{fit_importance, GaussianImportance};
pub use model::{Dataset, ItemParams, ModelConfig};
pub use sampler::{mwg_sample, MwgSettings, PosteriorDraws};
