//! Topic features: LDA trained by collapsed Gibbs sampling, topic-count
//! selection by UMass coherence, and question/answer divergences.

mod coherence;
mod divergence;
mod lda;
mod persist;

pub use coherence::{select_k, umass_coherence, CoherenceRow, Coherence, KSelection};
pub use divergence::{cosine, extract_textual, jsd, kl, r2, TextualFeatures, R2_FLOOR};
pub use lda::{infer, train_lda, LdaConfig, LdaSampler, TopicCorpus, TopicDistribution, TopicModel};
pub use persist::{read_model, write_model};
