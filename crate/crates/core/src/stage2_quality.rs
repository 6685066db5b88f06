//! Stage 2: educational-value gating.
//!
//! Scores live on a 0-5 scale and come from a [`Scorer`]. Two are provided:
//! [`MockScorer`], a pure lexicon-density proxy used for tests and dry runs,
//! and [`RemoteScorer`], a client for an HTTP batch-scoring service.
//!
//! Remote wire protocol: `POST {endpoint}/score` with body
//! `{"texts": [..]}`; a 200 response carries `{"scores": [..]}` with one
//! entry per text, in order. 429 and 5xx responses (and transport failures)
//! are retried with bounded exponential backoff. A `null` entry marks a
//! per-document failure.
//!
//! Documents are kept iff `score >= eta`. Failed scores never pass.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Duration;

use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{CorpusStats, Document};
use crate::domain_vector::DomainLexicon;
use crate::error::{Error, Result};
use crate::parallel::map_ordered;
use crate::stage1_filter::lexicon_hits;

pub const DEFAULT_ETA: f64 = 3.0;
pub const MAX_SCORE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub doc_id: String,
    pub score: f64,
    pub scorer_id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub error: bool,
}

impl QualityScore {
    pub fn passes(&self, eta: f64) -> bool {
        !self.error && self.score >= eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    pub eta: f64,
    pub batch_size: usize,
    pub scorer: ScorerKind,
    pub endpoint: Option<String>,
    /// Batches in flight at once.
    pub concurrency: usize,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            eta: DEFAULT_ETA,
            batch_size: 32,
            scorer: ScorerKind::Mock,
            endpoint: None,
            concurrency: 4,
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch-size must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        if self.scorer == ScorerKind::Remote && self.endpoint.is_none() {
            return Err(Error::Config("the remote scorer needs --endpoint".into()));
        }
        Ok(())
    }
}

pub trait Scorer: Send + Sync {
    fn id(&self) -> &str;

    /// One entry per input document, in order. `None` marks a per-document
    /// failure; `Err` means the whole batch could not be scored.
    fn score_batch(&self, docs: &[Document]) -> Result<Vec<Option<f64>>>;
}

/// `5 * min(1, 10 * f)` where `f` is the fraction of the document's tokens
/// that are lexicon terms, rounded to two decimals.
pub fn mock_score(doc: &Document, lexicon: &DomainLexicon) -> f64 {
    let (hits, total) = lexicon_hits(lexicon, doc);
    if total == 0 {
        return 0.0;
    }
    let fraction = hits as f64 / total as f64;
    let score = MAX_SCORE * (10.0 * fraction).min(1.0);
    (score * 100.0).round() / 100.0
}

#[derive(Debug, Clone)]
pub struct MockScorer {
    lexicon: DomainLexicon,
}

impl MockScorer {
    pub fn new(lexicon: DomainLexicon) -> Self {
        MockScorer { lexicon }
    }
}

impl Scorer for MockScorer {
    fn id(&self) -> &str {
        "mock"
    }

    fn score_batch(&self, docs: &[Document]) -> Result<Vec<Option<f64>>> {
        Ok(docs
            .iter()
            .map(|d| Some(mock_score(d, &self.lexicon)))
            .collect())
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<Option<f64>>,
}

pub struct RemoteScorer {
    id: String,
    url: String,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    base_backoff: Duration,
    max_backoff: Duration,
    requests: AtomicU64,
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Result<Self> {
        let endpoint = endpoint.trim_end_matches('/');
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(RemoteScorer {
            id: format!("remote:{endpoint}"),
            url: format!("{endpoint}/score"),
            client,
            max_attempts: 3,
            base_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(4),
            requests: AtomicU64::new(0),
        })
    }

    pub fn with_backoff(mut self, base: Duration, max: Duration) -> Self {
        self.base_backoff = base;
        self.max_backoff = max;
        self
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &ScoreRequest<'_>, expected: usize) -> std::result::Result<Vec<Option<f64>>, Attempt> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let response = self
            .client
            .post(&self.url)
            .json(body)
            .send()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(Error::Protocol(format!(
                "{} answered HTTP {status}",
                self.url
            ))));
        }
        let parsed: ScoreResponse = response
            .json()
            .map_err(|e| Attempt::Fatal(Error::Protocol(format!("bad response body: {e}"))))?;
        if parsed.scores.len() != expected {
            return Err(Attempt::Fatal(Error::Protocol(format!(
                "sent {expected} texts, received {} scores",
                parsed.scores.len()
            ))));
        }
        Ok(parsed.scores)
    }
}

impl Scorer for RemoteScorer {
    fn id(&self) -> &str {
        &self.id
    }

    fn score_batch(&self, docs: &[Document]) -> Result<Vec<Option<f64>>> {
        let body = ScoreRequest {
            texts: docs.iter().map(|d| d.text.as_str()).collect(),
        };
        let mut backoff = self.base_backoff;
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match self.attempt(&body, docs.len()) {
                Ok(scores) => return Ok(scores),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    log::warn!(
                        "scorer attempt {attempt}/{} failed: {reason}",
                        self.max_attempts
                    );
                    last = reason;
                    if attempt < self.max_attempts {
                        std::thread::sleep(backoff);
                        backoff = (backoff * 2).min(self.max_backoff);
                    }
                }
            }
        }
        Err(Error::RemoteUnavailable {
            attempts: self.max_attempts,
            unsent: docs.len(),
            reason: last,
        })
    }
}

pub fn build_scorer(cfg: &Stage2Config, lexicon: Option<&DomainLexicon>) -> Result<Box<dyn Scorer>> {
    cfg.validate()?;
    match cfg.scorer {
        ScorerKind::Mock => {
            let lexicon = lexicon
                .ok_or_else(|| Error::Config("the mock scorer needs a lexicon".into()))?;
            Ok(Box::new(MockScorer::new(lexicon.clone())))
        }
        ScorerKind::Remote => Ok(Box::new(RemoteScorer::new(
            cfg.endpoint.as_deref().unwrap_or_default(),
        )?)),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringSummary {
    pub scored: u64,
    /// Per-document failures.
    pub failed: u64,
    /// Out-of-range or non-finite scores clamped into [0, 5].
    pub clamped: u64,
}

impl std::ops::AddAssign for ScoringSummary {
    fn add_assign(&mut self, rhs: Self) {
        self.scored += rhs.scored;
        self.failed += rhs.failed;
        self.clamped += rhs.clamped;
    }
}

/// Scores `docs` in batches of `batch_size`, up to the pool's width in
/// flight, and reassembles results in input order.
pub fn score_documents(
    docs: &[Document],
    scorer: &dyn Scorer,
    batch_size: usize,
    pool: &ThreadPool,
) -> Result<(Vec<QualityScore>, ScoringSummary)> {
    let batch_size = batch_size.max(1);
    let batches: Vec<&[Document]> = docs.chunks(batch_size).collect();
    // Once the scorer is declared unavailable, batches not yet started are
    // not attempted.
    let gave_up = AtomicBool::new(false);
    let results = map_ordered(pool, &batches, |batch| {
        if gave_up.load(Ordering::Relaxed) {
            return Err(Error::RemoteUnavailable {
                attempts: 0,
                unsent: batch.len(),
                reason: "scorer already unavailable".into(),
            });
        }
        let result = scorer.score_batch(batch);
        if matches!(result, Err(Error::RemoteUnavailable { .. })) {
            gave_up.store(true, Ordering::Relaxed);
        }
        result
    });

    let unsent: usize = batches
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.is_err())
        .map(|(b, _)| b.len())
        .sum();
    let mut scores = Vec::with_capacity(docs.len());
    let mut summary = ScoringSummary::default();
    if unsent > 0 {
        let first = results.iter().find_map(|r| match r {
            Err(Error::RemoteUnavailable {
                attempts, reason, ..
            }) if *attempts > 0 => Some((*attempts, reason.clone())),
            _ => None,
        });
        if let Some((attempts, reason)) = first {
            return Err(Error::RemoteUnavailable {
                attempts,
                unsent,
                reason,
            });
        }
    }
    for (batch, result) in batches.iter().zip(results) {
        let raw = result?;
        if raw.len() != batch.len() {
            return Err(Error::Protocol(format!(
                "scorer returned {} scores for {} documents",
                raw.len(),
                batch.len()
            )));
        }
        for (doc, value) in batch.iter().zip(raw) {
            summary.scored += 1;
            let (score, error) = match value {
                None => {
                    summary.failed += 1;
                    (0.0, true)
                }
                Some(x) if !x.is_finite() => {
                    summary.clamped += 1;
                    summary.failed += 1;
                    (0.0, true)
                }
                Some(x) if !(0.0..=MAX_SCORE).contains(&x) => {
                    summary.clamped += 1;
                    (x.clamp(0.0, MAX_SCORE), false)
                }
                Some(x) => (x, false),
            };
            scores.push(QualityScore {
                doc_id: doc.id.clone(),
                score,
                scorer_id: scorer.id().to_string(),
                error,
            });
        }
    }
    if summary.clamped > 0 {
        log::warn!("{} scores were outside [0, 5] and were clamped", summary.clamped);
    }
    Ok((scores, summary))
}

#[derive(Debug, Clone, Default)]
pub struct ThresholdOutcome {
    pub retained: Vec<(Document, QualityScore)>,
    /// Documents that had no score; they are dropped.
    pub missing_scores: Vec<String>,
    pub before: CorpusStats,
    pub after: CorpusStats,
}

/// Keeps documents whose score is at least `eta`, pairing scores to
/// documents by id.
pub fn apply_quality_threshold<S, D>(scores: S, docs: D, eta: f64) -> ThresholdOutcome
where
    S: IntoIterator<Item = QualityScore>,
    D: IntoIterator<Item = Document>,
{
    let mut by_id: std::collections::HashMap<String, QualityScore> =
        scores.into_iter().map(|s| (s.doc_id.clone(), s)).collect();
    let mut outcome = ThresholdOutcome::default();
    for doc in docs {
        outcome.before.record(&doc);
        match by_id.remove(&doc.id) {
            None => {
                log::warn!("no score for document {:?}; dropping it", doc.id);
                outcome.missing_scores.push(doc.id);
            }
            Some(score) => {
                if score.passes(eta) {
                    outcome.after.record(&doc);
                    outcome.retained.push((doc, score));
                }
            }
        }
    }
    outcome
}

const LABEL_PROMPT: &str = r#"Please evaluate the educational value of the following astronomy-related text from a web document. Use this 6-point scoring system:

0 points: No astronomy content at all.
1 point: Minimal astronomy information, or astronomy mixed with non-astronomical content.
2 points: Covers basic astronomical concepts but lacks depth or comprehensive explanation.
3 points: Clear explanation of concepts with relevant examples, educational for a general audience.
4 points: In-depth knowledge, covers advanced concepts or recent discoveries, well-structured and engaging.
5 points: Exceptionally high educational value, expert-level insights, connects multiple concepts, addresses misconceptions, inspires further learning.

Provide a brief justification (up to 100 words) and conclude with the score in the format "Score: X".

Here's the text to evaluate:

"#;

/// The 0-5 labelling prompt with `domain_name` in place of "astronomy" and
/// the document text appended.
pub fn render_label_prompt(doc: &Document, domain_name: &str) -> String {
    let head = if domain_name == "astronomy" {
        LABEL_PROMPT.to_string()
    } else {
        LABEL_PROMPT.replace("astronomy", domain_name)
    };
    head + &doc.text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn astro() -> DomainLexicon {
        DomainLexicon::new("astronomy", ["galaxy", "nebula", "comet"]).unwrap()
    }

    fn words(n: usize, lexicon_hits: usize) -> String {
        let mut w: Vec<&str> = vec!["word"; n - lexicon_hits];
        w.extend(std::iter::repeat_n("galaxy", lexicon_hits));
        w.join(" ")
    }

    #[test]
    fn mock_score_formula() {
        let lex = astro();
        assert_eq!(mock_score(&Document::new("a", "plain words only"), &lex), 0.0);
        assert_eq!(mock_score(&Document::new("b", words(10, 1)), &lex), 5.0);
        assert_eq!(mock_score(&Document::new("c", words(50, 2)), &lex), 2.0);
        assert_eq!(mock_score(&Document::new("d", ""), &lex), 0.0);
        // 1 of 3 tokens -> 5 * min(1, 3.33) = 5
        assert_eq!(mock_score(&Document::new("e", "a galaxy b"), &lex), 5.0);
        // 1 of 70 -> 5 * 10/70 = 0.714.. -> 0.71
        assert_eq!(mock_score(&Document::new("f", words(70, 1)), &lex), 0.71);
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = |x: f64| QualityScore {
            doc_id: "d".into(),
            score: x,
            scorer_id: "t".into(),
            error: false,
        };
        assert!(s(3.0).passes(3.0));
        assert!(!s(2.99).passes(3.0));
        let mut failed = s(5.0);
        failed.error = true;
        assert!(!failed.passes(0.0));
    }

    #[test]
    fn apply_threshold_aligns_by_id_and_counts_missing() {
        let docs = vec![
            Document::new("a", "x"),
            Document::new("b", "y y"),
            Document::new("c", "z"),
        ];
        let score = |id: &str, x: f64| QualityScore {
            doc_id: id.into(),
            score: x,
            scorer_id: "t".into(),
            error: false,
        };
        let out = apply_quality_threshold(vec![score("b", 3.0), score("a", 2.99)], docs, 3.0);
        assert_eq!(out.retained.len(), 1);
        assert_eq!(out.retained[0].0.id, "b");
        assert_eq!(out.missing_scores, vec!["c".to_string()]);
        assert_eq!(out.before.document_count, 3);
        assert_eq!(out.after.token_count, 2);
    }

    struct Recording {
        sizes: std::sync::Mutex<Vec<usize>>,
    }

    impl Scorer for Recording {
        fn id(&self) -> &str {
            "rec"
        }
        fn score_batch(&self, docs: &[Document]) -> Result<Vec<Option<f64>>> {
            self.sizes.lock().unwrap().push(docs.len());
            Ok(docs
                .iter()
                .map(|d| match d.id.as_str() {
                    "bad" => None,
                    "big" => Some(9.0),
                    _ => Some(d.token_count as f64),
                })
                .collect())
        }
    }

    #[test]
    fn batches_reassemble_in_order() {
        let docs: Vec<Document> = (0..7)
            .map(|i| Document::new(format!("d{i}"), words(i + 1, 0)))
            .collect();
        let scorer = Recording {
            sizes: Default::default(),
        };
        let pool = crate::parallel::thread_pool(3).unwrap();
        let (scores, summary) = score_documents(&docs, &scorer, 3, &pool).unwrap();
        let mut sizes = scorer.sizes.lock().unwrap().clone();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 3, 3]);
        let got: Vec<f64> = scores.iter().map(|s| s.score).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0]);
        assert_eq!(summary.clamped, 2);
        assert!(scores.iter().zip(&docs).all(|(s, d)| s.doc_id == d.id));
    }

    #[test]
    fn failures_and_clamping() {
        let docs = vec![Document::new("bad", "x"), Document::new("big", "x")];
        let scorer = Recording {
            sizes: Default::default(),
        };
        let pool = crate::parallel::thread_pool(1).unwrap();
        let (scores, summary) = score_documents(&docs, &scorer, 8, &pool).unwrap();
        assert!(scores[0].error && !scores[0].passes(0.0));
        assert_eq!(scores[1].score, 5.0);
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.clamped, 1);
    }

    #[test]
    fn config_validation() {
        let remote = Stage2Config {
            scorer: ScorerKind::Remote,
            ..Default::default()
        };
        assert!(remote.validate().is_err());
        assert!(build_scorer(&Stage2Config::default(), None).is_err());
        assert_eq!(Stage2Config::default().eta, 3.0);
    }

    #[test]
    fn prompt_rendering() {
        let doc = Document::new("p", "Jupiter has many moons.");
        let prompt = render_label_prompt(&doc, "astronomy");
        assert!(prompt.starts_with("Please evaluate the educational value of the following astronomy-related text"));
        assert!(prompt.contains("6-point scoring system"));
        assert!(prompt.ends_with("Here's the text to evaluate:\n\nJupiter has many moons."));
        assert_eq!(prompt, render_label_prompt(&doc, "astronomy"));

        let law = render_label_prompt(&doc, "law");
        assert!(law.contains("following law-related text"));
        assert!(law.contains("0 points: No law content at all."));
        assert!(!law.contains("astronomy"));

        let empty = render_label_prompt(&Document::new("e", ""), "astronomy");
        assert!(empty.ends_with("Here's the text to evaluate:\n\n"));
    }
}
