//! Retention accounting, threshold sweeps, score histograms and the two-stage
//! time/cost model.

use std::path::Path;

use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{CorpusStats, Document};
use crate::domain_vector::{mean_and_stddev, DomainLexicon, DomainVector};
use crate::embedding_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::parallel::map_ordered;
use crate::stage1_filter::{filter_document, lexicon_hits, Stage1Config};
use crate::stage2_quality::{score_documents, QualityScore, Scorer, MAX_SCORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub stage: Stage,
    pub docs_in: u64,
    pub docs_out: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub retention_docs: f64,
    pub retention_tokens: f64,
}

fn ratio(out: u64, inp: u64) -> f64 {
    if inp == 0 {
        1.0
    } else {
        out as f64 / inp as f64
    }
}

pub fn retention_report(before: CorpusStats, after: CorpusStats, stage: Stage) -> Result<RetentionReport> {
    if after.document_count > before.document_count || after.token_count > before.token_count {
        return Err(Error::Inconsistent(format!(
            "{stage:?} output ({} docs, {} tokens) exceeds its input ({} docs, {} tokens)",
            after.document_count, after.token_count, before.document_count, before.token_count
        )));
    }
    Ok(RetentionReport {
        stage,
        docs_in: before.document_count,
        docs_out: after.document_count,
        tokens_in: before.token_count,
        tokens_out: after.token_count,
        retention_docs: ratio(after.document_count, before.document_count),
        retention_tokens: ratio(after.token_count, before.token_count),
    })
}

/// Hourly rates and full-corpus processing times for the two stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub stage1_rate_per_hour: f64,
    pub stage2_rate_per_hour: f64,
    pub stage1_hours_full_corpus: f64,
    pub stage2_hours_full_corpus: f64,
    /// Fraction of the corpus that survives stage 1.
    pub stage1_retention: f64,
}

/// Reference measurements: a 16-core CPU pass over the full corpus for stage
/// 1, a single A100 for stage 2, and 1% stage-1 retention.
pub const REFERENCE_STAGE1_HOURS: f64 = 177.0;
pub const REFERENCE_STAGE1_COST: f64 = 44.0;
pub const REFERENCE_STAGE2_HOURS: f64 = 12_000.0;
pub const REFERENCE_STAGE2_COST: f64 = 16_200.0;
pub const REFERENCE_RETENTION: f64 = 0.01;

impl Default for CostModel {
    fn default() -> Self {
        CostModel::from_totals(
            REFERENCE_STAGE1_HOURS,
            REFERENCE_STAGE1_COST,
            REFERENCE_STAGE2_HOURS,
            REFERENCE_STAGE2_COST,
            REFERENCE_RETENTION,
        )
    }
}

impl CostModel {
    /// Derives hourly rates from total hours and total cost per stage.
    pub fn from_totals(
        stage1_hours: f64,
        stage1_cost: f64,
        stage2_hours: f64,
        stage2_cost: f64,
        stage1_retention: f64,
    ) -> Self {
        CostModel {
            stage1_rate_per_hour: stage1_cost / stage1_hours,
            stage2_rate_per_hour: stage2_cost / stage2_hours,
            stage1_hours_full_corpus: stage1_hours,
            stage2_hours_full_corpus: stage2_hours,
            stage1_retention,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stage1 rate", self.stage1_rate_per_hour),
            ("stage2 rate", self.stage2_rate_per_hour),
            ("stage1 hours", self.stage1_hours_full_corpus),
            ("stage2 hours", self.stage2_hours_full_corpus),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.stage1_retention > 0.0 && self.stage1_retention <= 1.0) {
            return Err(Error::Config(format!(
                "retention must be in (0, 1], got {}",
                self.stage1_retention
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Stage1Only,
    Stage2Only,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub scenario: Scenario,
    pub hours: f64,
    /// Rounded to the cent.
    pub cost: f64,
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Hours are rounded to 1e-9 so that representation noise in the rates does
/// not leak into reports.
fn tidy_hours(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn estimate_cost(model: &CostModel, scenario: Scenario) -> CostEstimate {
    let h1 = model.stage1_hours_full_corpus;
    let h2 = model.stage2_hours_full_corpus;
    let c1 = h1 * model.stage1_rate_per_hour;
    let c2 = h2 * model.stage2_rate_per_hour;
    let rho = model.stage1_retention;
    let (hours, cost) = match scenario {
        Scenario::Stage1Only => (h1, c1),
        Scenario::Stage2Only => (h2, c2),
        Scenario::Combined => (h1 + h2 * rho, c1 + c2 * rho),
    };
    CostEstimate {
        scenario,
        hours: tidy_hours(hours),
        cost: cents(cost),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub model: CostModel,
    pub estimates: Vec<CostEstimate>,
}

pub fn cost_report(model: &CostModel) -> Result<CostReport> {
    model.validate()?;
    Ok(CostReport {
        model: *model,
        estimates: [Scenario::Stage1Only, Scenario::Stage2Only, Scenario::Combined]
            .into_iter()
            .map(|s| estimate_cost(model, s))
            .collect(),
    })
}

/// One way of ranking documents for a sweep.
#[derive(Debug, Clone, Copy)]
pub enum SweepStrategy<'a> {
    /// Parameters are similarity thresholds; kept iff `similarity > tau`.
    Embedding {
        label: &'a str,
        table: &'a EmbeddingTable,
        domain: &'a DomainVector,
    },
    /// Parameters are minimum lexicon hit counts; kept iff `hits >= min_hits`.
    Keyword { lexicon: &'a DomainLexicon },
    /// Everything is kept.
    NoFilter,
}

impl SweepStrategy<'_> {
    pub fn name(&self) -> String {
        match self {
            SweepStrategy::Embedding { label, .. } => format!("embedding:{label}"),
            SweepStrategy::Keyword { .. } => "keyword".into(),
            SweepStrategy::NoFilter => "none".into(),
        }
    }

    /// The per-document quantity the strategy thresholds on.
    pub fn metric(&self, doc: &Document) -> f64 {
        match self {
            SweepStrategy::Embedding { table, domain, .. } => {
                filter_document(domain, table, doc, &Stage1Config::default()).similarity
            }
            SweepStrategy::Keyword { lexicon } => lexicon_hits(lexicon, doc).0 as f64,
            SweepStrategy::NoFilter => 0.0,
        }
    }

    pub fn keeps(&self, metric: f64, parameter: f64) -> bool {
        match self {
            SweepStrategy::Embedding { .. } => metric > parameter,
            SweepStrategy::Keyword { .. } => metric >= parameter,
            SweepStrategy::NoFilter => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub strategy: String,
    pub parameter: f64,
    pub percent_kept: f64,
    /// Absent when nothing was kept.
    pub mean_quality: Option<f64>,
    pub sem_quality: Option<f64>,
}

/// Sweeps each strategy over its parameter list. Quality scores are supplied
/// once, aligned with `docs`, and reused for every parameter.
pub fn sweep_with_scores(
    docs: &[Document],
    scores: &[QualityScore],
    plan: &[(SweepStrategy<'_>, Vec<f64>)],
    pool: &ThreadPool,
) -> Result<Vec<SweepResult>> {
    if docs.len() != scores.len() {
        return Err(Error::Inconsistent(format!(
            "{} documents but {} scores",
            docs.len(),
            scores.len()
        )));
    }
    let mut results = Vec::new();
    for (strategy, parameters) in plan {
        if parameters.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(format!(
                "{} parameters must be sorted ascending",
                strategy.name()
            )));
        }
        let metrics = map_ordered(pool, docs, |d| strategy.metric(d));
        for &parameter in parameters {
            let kept: Vec<f64> = metrics
                .iter()
                .zip(scores)
                .filter(|(&m, s)| strategy.keeps(m, parameter) && !s.error)
                .map(|(_, s)| s.score)
                .collect();
            let kept_docs = metrics
                .iter()
                .filter(|&&m| strategy.keeps(m, parameter))
                .count();
            let percent_kept = if docs.is_empty() {
                0.0
            } else {
                100.0 * kept_docs as f64 / docs.len() as f64
            };
            let (mean_quality, sem_quality) = if kept.is_empty() {
                (None, None)
            } else {
                let (mean, sd) = mean_and_stddev(&kept);
                (Some(mean), Some(sd / (kept.len() as f64).sqrt()))
            };
            results.push(SweepResult {
                strategy: strategy.name(),
                parameter,
                percent_kept,
                mean_quality,
                sem_quality,
            });
        }
    }
    Ok(results)
}

/// Scores every document once with `scorer`, then sweeps.
pub fn threshold_sweep(
    docs: &[Document],
    scorer: &dyn Scorer,
    batch_size: usize,
    plan: &[(SweepStrategy<'_>, Vec<f64>)],
    pool: &ThreadPool,
) -> Result<Vec<SweepResult>> {
    let (scores, _) = score_documents(docs, scorer, batch_size, pool)?;
    sweep_with_scores(docs, &scores, plan, pool)
}

pub fn write_sweep_csv(path: impl AsRef<Path>, results: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    /// Empty histogram of `[k*w, (k+1)*w)` bins over `[0, 5]`. The top bin is
    /// closed so that 5.0 lands in it.
    pub fn new(bin_width: f64) -> Result<Self> {
        let n = MAX_SCORE / bin_width;
        let bins = n.round();
        if bin_width.is_nan() || bin_width <= 0.0 || bins < 1.0 || (n - bins).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "bin width {bin_width} must be positive and divide 5 evenly"
            )));
        }
        Ok(Histogram {
            bin_width,
            bins: (0..bins as usize)
                .map(|i| HistogramBin {
                    bin_low: i as f64 * bin_width,
                    bin_high: (i + 1) as f64 * bin_width,
                    count: 0,
                })
                .collect(),
        })
    }

    pub fn add(&mut self, score: f64) {
        let last = self.bins.len() - 1;
        let i = ((score / self.bin_width).floor().max(0.0) as usize).min(last);
        self.bins[i].count += 1;
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        for b in &self.bins {
            w.serialize(b)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

pub fn score_distribution<'a, I>(scores: I, bin_width: f64) -> Result<Histogram>
where
    I: IntoIterator<Item = &'a QualityScore>,
{
    let mut histogram = Histogram::new(bin_width)?;
    for s in scores {
        histogram.add(s.score);
    }
    Ok(histogram)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(docs: u64, tokens: u64) -> CorpusStats {
        CorpusStats {
            document_count: docs,
            token_count: tokens,
            skipped: 0,
        }
    }

    #[test]
    fn retention_ratios() {
        let r = retention_report(stats(1000, 50_000), stats(10, 700), Stage::Stage1).unwrap();
        assert_eq!(r.retention_docs, 0.01);
        assert_eq!(r.retention_tokens, 0.014);
        let same = retention_report(stats(5, 9), stats(5, 9), Stage::Combined).unwrap();
        assert_eq!((same.retention_docs, same.retention_tokens), (1.0, 1.0));
        assert!(retention_report(stats(5, 9), stats(6, 9), Stage::Stage2).is_err());
        assert!(retention_report(stats(5, 9), stats(5, 10), Stage::Stage2).is_err());
    }

    #[test]
    fn reference_cost_rows() {
        let m = CostModel::default();
        let s1 = estimate_cost(&m, Scenario::Stage1Only);
        let s2 = estimate_cost(&m, Scenario::Stage2Only);
        let both = estimate_cost(&m, Scenario::Combined);
        assert_eq!((s1.hours, s1.cost), (177.0, 44.0));
        assert_eq!((s2.hours, s2.cost), (12_000.0, 16_200.0));
        assert_eq!((both.hours, both.cost), (297.0, 206.0));
    }

    #[test]
    fn full_retention_sums_stages() {
        let m = CostModel {
            stage1_retention: 1.0,
            ..CostModel::default()
        };
        let both = estimate_cost(&m, Scenario::Combined);
        assert_eq!((both.hours, both.cost), (12_177.0, 16_244.0));
    }

    #[test]
    fn cost_validation() {
        let bad = CostModel {
            stage1_retention: 0.0,
            ..CostModel::default()
        };
        assert!(cost_report(&bad).is_err());
        let bad = CostModel {
            stage2_rate_per_hour: -1.0,
            ..CostModel::default()
        };
        assert!(cost_report(&bad).is_err());
    }

    fn q(x: f64) -> QualityScore {
        QualityScore {
            doc_id: String::new(),
            score: x,
            scorer_id: "t".into(),
            error: false,
        }
    }

    #[test]
    fn histogram_edges() {
        let top = score_distribution(&[q(5.0), q(5.0)], 1.0).unwrap();
        let counts: Vec<u64> = top.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![0, 0, 0, 0, 2]);
        let empty = score_distribution(&[], 0.5).unwrap();
        assert_eq!(empty.bins.len(), 10);
        assert_eq!(empty.total(), 0);
        assert!(score_distribution(&[], 0.3).is_err());
        assert!(score_distribution(&[], 0.0).is_err());
        assert!(score_distribution(&[], -1.0).is_err());
    }

    #[test]
    fn sweep_none_keeps_everything() {
        let docs = vec![Document::new("a", "x"), Document::new("b", "y")];
        let scores = vec![q(1.0), q(3.0)];
        let pool = crate::parallel::thread_pool(2).unwrap();
        let r = sweep_with_scores(&docs, &scores, &[(SweepStrategy::NoFilter, vec![0.0])], &pool)
            .unwrap();
        assert_eq!(r[0].percent_kept, 100.0);
        assert_eq!(r[0].mean_quality, Some(2.0));
        // sample sd = sqrt(2), sem = sqrt(2)/sqrt(2)
        assert!((r[0].sem_quality.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_reports_absent_mean_when_empty() {
        let lex = DomainLexicon::new("t", ["galaxy"]).unwrap();
        let docs = vec![Document::new("a", "galaxy"), Document::new("b", "y")];
        let scores = vec![q(4.0), q(1.0)];
        let pool = crate::parallel::thread_pool(1).unwrap();
        let r = sweep_with_scores(
            &docs,
            &scores,
            &[(SweepStrategy::Keyword { lexicon: &lex }, vec![1.0, 2.0])],
            &pool,
        )
        .unwrap();
        assert_eq!(r[0].percent_kept, 50.0);
        assert_eq!(r[0].mean_quality, Some(4.0));
        assert_eq!(r[0].sem_quality, Some(0.0));
        assert_eq!(r[1].percent_kept, 0.0);
        assert_eq!(r[1].mean_quality, None);
        assert!(sweep_with_scores(
            &docs,
            &scores,
            &[(SweepStrategy::Keyword { lexicon: &lex }, vec![2.0, 1.0])],
            &pool
        )
        .is_err());
    }
}
