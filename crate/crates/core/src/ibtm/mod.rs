//! Inter-battery topic model: two views (location words and diagnostic
//! labels) share topic proportions `θ`, while each view also has private
//! topics (`κ` for locations, `ν` for labels) that absorb view-specific
//! structure. Per document, `ρ ~ Beta(ι₁)` and `μ ~ Beta(ι₂)` set the chance
//! that a token comes from the shared space.
//!
//! Inference is batch mean-field variational Bayes with Dirichlet factors on
//! all topic rows. With `T = S = 0` the model is multimodal LDA; with the
//! label view also empty it is plain LDA.

mod config;
mod elbo;
mod globals;
mod model_file;
mod posterior;
mod sampler;
pub mod synth;
mod train;

pub use config::{HyperParams, ModelConfig};
pub use elbo::{document_elbo, elbo, global_elbo};
pub use globals::{init_model, GlobalTopics, TopicMatrix};
pub use model_file::{TrainedModel, MODEL_MAGIC};
pub use posterior::{e_step_document, e_step_document_from, DocPosterior, DocTokens, INNER_MAX_ITER, INNER_TOL};
pub use sampler::{sample_document, SampledDocument, TopicDistributions};
pub use train::{m_step, train, train_from, train_with, TrainOutput};
