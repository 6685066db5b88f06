//! Seeded synthetic fixtures: embedding tables with a known domain direction
//! and planted corpora whose domain-dense documents are known in advance.
//! Used by the test suites and handy for benchmarking without real data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus_io::Document;
use crate::domain_vector::DomainLexicon;
use crate::embedding_store::EmbeddingTable;

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// A table of `terms` vectors `a + sigma * N(0, I)` around a random unit
/// direction `a`, with a lexicon naming all of them.
pub fn residual_table(seed: u64, dimension: usize, terms: usize, sigma: f64) -> (EmbeddingTable, DomainLexicon) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = unit(gaussian(&mut rng, dimension));
    let names: Vec<String> = (0..terms).map(|i| format!("t{i:05}")).collect();
    let entries = names.iter().map(|name| {
        let v: Vec<f64> = a
            .iter()
            .zip(gaussian(&mut rng, dimension))
            .map(|(ai, g)| ai + sigma * g)
            .collect();
        (name.clone(), to_f32(&v))
    });
    let table = EmbeddingTable::from_entries(dimension, entries.collect::<Vec<_>>())
        .expect("synthetic vectors have the right dimension");
    let lexicon = DomainLexicon::new("synthetic", &names).expect("non-empty lexicon");
    (table, lexicon)
}

/// Embeddings for every term of `lexicon` (shared direction plus noise) and
/// `filler` unrelated random words.
pub fn lexicon_table(lexicon: &DomainLexicon, dimension: usize, filler: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = unit(gaussian(&mut rng, dimension));
    let mut entries = Vec::with_capacity(lexicon.len() + filler);
    for term in lexicon.terms() {
        let g = gaussian(&mut rng, dimension);
        let v: Vec<f64> = shared.iter().zip(g).map(|(s, g)| s + 0.25 * g).collect();
        entries.push((term.clone(), to_f32(&v)));
    }
    for i in 0..filler {
        entries.push((format!("filler{i:06}"), to_f32(&gaussian(&mut rng, dimension))));
    }
    EmbeddingTable::from_entries(dimension, entries).expect("consistent dimension")
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedConfig {
    pub seed: u64,
    pub documents: usize,
    /// Number of domain-dense documents, spread evenly through the corpus.
    pub dense: usize,
    pub dimension: usize,
    /// Mean tokens per document; lengths are uniform in `[len/2, 3len/2]`.
    pub doc_len: usize,
    pub domain_terms: usize,
    pub noise_terms: usize,
    /// Per-component noise of domain-term vectors around the domain direction.
    pub term_noise: f64,
    /// Probability that a token of a background document is a domain term.
    pub stray_rate: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            seed: 7,
            documents: 50_000,
            dense: 500,
            dimension: 50,
            doc_len: 60,
            domain_terms: 100,
            noise_terms: 2_000,
            term_noise: 0.15,
            stray_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub table: EmbeddingTable,
    pub lexicon: DomainLexicon,
    pub docs: Vec<Document>,
    /// `dense[i]` is true for planted domain-dense documents.
    pub dense: Vec<bool>,
}

/// Builds a planted corpus. Background words are orthogonal to the domain
/// direction; domain words cluster around it. Background documents carry a
/// few stray domain words, so their similarities spread around typical
/// thresholds instead of sitting at zero.
pub fn planted_corpus(cfg: PlantedConfig) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dimension;
    let u = unit(gaussian(&mut rng, d));

    let domain_words: Vec<String> = (0..cfg.domain_terms).map(|i| format!("dom{i:04}")).collect();
    let noise_words: Vec<String> = (0..cfg.noise_terms).map(|i| format!("w{i:05}")).collect();
    let mut entries = Vec::with_capacity(domain_words.len() + noise_words.len());
    for w in &domain_words {
        let v: Vec<f64> = u
            .iter()
            .zip(gaussian(&mut rng, d))
            .map(|(ui, g)| ui + cfg.term_noise * g)
            .collect();
        entries.push((w.clone(), to_f32(&v)));
    }
    for w in &noise_words {
        let g = gaussian(&mut rng, d);
        let along: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        let v: Vec<f64> = g.iter().zip(&u).map(|(gi, ui)| gi - along * ui).collect();
        entries.push((w.clone(), to_f32(&v)));
    }
    let table = EmbeddingTable::from_entries(d, entries).expect("consistent dimension");
    let lexicon = DomainLexicon::new("planted", &domain_words).expect("non-empty lexicon");

    let stride = cfg
        .documents
        .checked_div(cfg.dense)
        .map_or(usize::MAX, |s| s.max(1));
    let mut docs = Vec::with_capacity(cfg.documents);
    let mut dense = Vec::with_capacity(cfg.documents);
    let lo = (cfg.doc_len / 2).max(1);
    let hi = (cfg.doc_len * 3 / 2).max(lo);
    let mut text = String::new();
    let mut planted = 0;
    for i in 0..cfg.documents {
        let is_dense = i % stride == stride / 2 && planted < cfg.dense;
        planted += usize::from(is_dense);
        let len = rng.random_range(lo..=hi);
        text.clear();
        if i % 997 == 13 && !is_dense {
            // all out-of-vocabulary
            for k in 0..len {
                text.push_str(if k % 2 == 0 { "Lorem " } else { "ipsum, " });
            }
        } else {
            for k in 0..len {
                let r: f64 = rng.random();
                let word = if is_dense {
                    if r < 0.6 {
                        domain_words[rng.random_range(0..domain_words.len())].as_str()
                    } else if r < 0.95 {
                        noise_words[rng.random_range(0..noise_words.len())].as_str()
                    } else {
                        "xyzzy"
                    }
                } else if r < cfg.stray_rate {
                    domain_words[rng.random_range(0..domain_words.len())].as_str()
                } else if r < cfg.stray_rate + 0.05 {
                    "xyzzy"
                } else {
                    noise_words[rng.random_range(0..noise_words.len())].as_str()
                };
                if k == 0 {
                    let mut chars = word.chars();
                    let first = chars.next().unwrap();
                    text.extend(first.to_uppercase());
                    text.push_str(chars.as_str());
                } else {
                    text.push_str(word);
                }
                text.push_str(match k % 11 {
                    10 => ". ",
                    5 => ", ",
                    _ => " ",
                });
            }
        }
        let text = text.trim_end().to_string();
        docs.push(Document::new(format!("doc{i:06}"), text));
        dense.push(is_dense);
    }
    PlantedCorpus {
        table,
        lexicon,
        docs,
        dense,
    }
}
