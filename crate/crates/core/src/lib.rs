//! Two-stage domain corpus curation.
//!
//! Documents stream through an embedding-similarity gate (stage 1) that keeps
//! text whose averaged word vector points toward a domain direction, and then
//! through an educational-value gate (stage 2) backed by a pluggable 0-5
//! scorer. Around the two gates sit residual-error analysis for the domain
//! vector, threshold sweeps, retention accounting and a time/cost model.

pub mod analytics;
pub mod cli;
pub mod corpus_io;
pub mod domain_vector;
pub mod embedding_store;
pub mod error;
pub mod parallel;
pub mod stage1_filter;
pub mod stage2_quality;
pub mod synth;

pub use corpus_io::{read_corpus, tokenize, write_corpus, CorpusFormat, CorpusStats, Document};
pub use domain_vector::{aggregate_domain_vector, DomainLexicon, DomainVector};
pub use embedding_store::{load_embeddings, EmbeddingTable};
pub use error::{Error, Result};
pub use stage1_filter::{filter_corpus, FilterDecision, Stage1Config, Stage1Filter, Strategy};
pub use stage2_quality::{QualityScore, Scorer, Stage2Config};
