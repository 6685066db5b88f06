//! Stage 1: embedding-similarity filtering.
//!
//! A document vector `B` is the mean of the unit embeddings of the document's
//! in-vocabulary tokens (out-of-vocabulary tokens are skipped). A document is
//! retained iff `cos(A, B) > tau`, strictly. Documents with no usable tokens,
//! or whose `B` cancels to zero, get similarity 0 and are dropped.
//!
//! Per-document cost is `O(s * d)` for `s` tokens: one hash lookup and one
//! `d`-wide accumulate per token, then a single `O(d)` dot product against the
//! pre-normalised domain vector.

use serde::{Deserialize, Serialize};

use crate::corpus_io::{CorpusStats, Document};
use crate::domain_vector::{l2_norm, DomainLexicon, DomainVector};
use crate::embedding_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::parallel::{map_ordered, next_chunk, thread_pool, DEFAULT_CHUNK};

pub const DEFAULT_TAU: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Embedding,
    Keyword,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    pub tau: f64,
    pub min_tokens_in_vocab: usize,
    pub strategy: Strategy,
    /// Lexicon hits required by the keyword strategy.
    pub min_hits: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            tau: DEFAULT_TAU,
            min_tokens_in_vocab: 1,
            strategy: Strategy::Embedding,
            min_hits: 1,
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} is outside [-1, 1]", self.tau)));
        }
        if self.strategy == Strategy::Keyword && self.min_hits == 0 {
            return Err(Error::Config("min-hits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub doc_id: String,
    pub similarity: f64,
    pub retained: bool,
    pub in_vocab_tokens: usize,
}

/// Mean of the in-vocabulary token embeddings, with the in-vocabulary count.
/// The vector is `None` when fewer than `min_tokens_in_vocab` (and at least
/// one) tokens are found.
pub fn document_vector<I, S>(
    table: &EmbeddingTable,
    tokens: I,
    min_tokens_in_vocab: usize,
) -> (Option<Vec<f64>>, usize)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut sum = vec![0.0f64; table.dimension()];
    let mut count = 0usize;
    for token in tokens {
        if let Some(v) = table.lookup(token.as_ref()) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            count += 1;
        }
    }
    if count == 0 || count < min_tokens_in_vocab {
        return (None, count);
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    (Some(sum), count)
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn filter_document(
    domain: &DomainVector,
    table: &EmbeddingTable,
    doc: &Document,
    cfg: &Stage1Config,
) -> FilterDecision {
    let (vector, in_vocab) = document_vector(table, doc.tokens(), cfg.min_tokens_in_vocab);
    let similarity = vector
        .and_then(|b| cosine_similarity(&domain.vector, &b).ok())
        .unwrap_or(0.0);
    FilterDecision {
        doc_id: doc.id.clone(),
        similarity,
        retained: similarity > cfg.tau,
        in_vocab_tokens: in_vocab,
    }
}

/// Keyword baseline: retained iff at least `min_hits` tokens are lexicon
/// terms. `similarity` carries the hit fraction.
pub fn keyword_filter(lexicon: &DomainLexicon, doc: &Document, min_hits: usize) -> FilterDecision {
    let (hits, total) = lexicon_hits(lexicon, doc);
    FilterDecision {
        doc_id: doc.id.clone(),
        similarity: if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        },
        retained: hits >= min_hits.max(1),
        in_vocab_tokens: hits,
    }
}

/// `(lexicon term occurrences, all tokens)` for a document.
pub fn lexicon_hits(lexicon: &DomainLexicon, doc: &Document) -> (usize, usize) {
    lexicon.count_hits(doc.tokens())
}

/// A configured stage-1 decision function over shared read-only state.
#[derive(Debug, Clone, Copy)]
pub enum Stage1Filter<'a> {
    Embedding {
        table: &'a EmbeddingTable,
        domain: &'a DomainVector,
        cfg: Stage1Config,
    },
    Keyword {
        lexicon: &'a DomainLexicon,
        min_hits: usize,
    },
    PassThrough,
}

impl<'a> Stage1Filter<'a> {
    pub fn new(
        cfg: Stage1Config,
        table: Option<&'a EmbeddingTable>,
        domain: Option<&'a DomainVector>,
        lexicon: Option<&'a DomainLexicon>,
    ) -> Result<Self> {
        cfg.validate()?;
        match cfg.strategy {
            Strategy::Embedding => {
                let (table, domain) = table.zip(domain).ok_or_else(|| {
                    Error::Config("embedding strategy needs embeddings and a domain vector".into())
                })?;
                if table.dimension() != domain.dimension {
                    return Err(Error::DimensionMismatch {
                        expected: table.dimension(),
                        actual: domain.dimension,
                    });
                }
                Ok(Stage1Filter::Embedding { table, domain, cfg })
            }
            Strategy::Keyword => Ok(Stage1Filter::Keyword {
                lexicon: lexicon
                    .ok_or_else(|| Error::Config("keyword strategy needs a lexicon".into()))?,
                min_hits: cfg.min_hits,
            }),
            Strategy::None => Ok(Stage1Filter::PassThrough),
        }
    }

    pub fn embedding(table: &'a EmbeddingTable, domain: &'a DomainVector, tau: f64) -> Self {
        Stage1Filter::Embedding {
            table,
            domain,
            cfg: Stage1Config {
                tau,
                ..Stage1Config::default()
            },
        }
    }

    pub fn decide(&self, doc: &Document) -> FilterDecision {
        match self {
            Stage1Filter::Embedding { table, domain, cfg } => {
                filter_document(domain, table, doc, cfg)
            }
            Stage1Filter::Keyword { lexicon, min_hits } => keyword_filter(lexicon, doc, *min_hits),
            Stage1Filter::PassThrough => FilterDecision {
                doc_id: doc.id.clone(),
                similarity: 0.0,
                retained: true,
                in_vocab_tokens: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub before: CorpusStats,
    pub after: CorpusStats,
}

/// Runs stage 1 over a document stream on `workers` threads.
///
/// `emit` receives every document with its decision, in input order,
/// regardless of `workers`. Retained documents are those with
/// `decision.retained`.
pub fn filter_corpus<I, F>(
    filter: &Stage1Filter<'_>,
    docs: I,
    workers: usize,
    mut emit: F,
) -> Result<FilterSummary>
where
    I: IntoIterator<Item = Result<Document>>,
    F: FnMut(Document, FilterDecision) -> Result<()>,
{
    let pool = thread_pool(workers)?;
    let mut docs = docs.into_iter();
    let mut summary = FilterSummary::default();
    loop {
        let chunk = next_chunk(&mut docs, DEFAULT_CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let decisions = map_ordered(&pool, &chunk, |doc| filter.decide(doc));
        for (doc, decision) in chunk.into_iter().zip(decisions) {
            summary.before.record(&doc);
            if decision.retained {
                summary.after.record(&doc);
            }
            emit(doc, decision)?;
        }
    }
    Ok(summary)
}
