//! Domain lexicons, the aggregated domain vector, and its error analysis.
//!
//! Each term embedding is modelled as a shared domain component plus a
//! zero-mean residual, `e_i = a + r_i`. Averaging `m` terms gives
//! `A = a + mean(r_i)`, so the error `E = A - a` shrinks like `1/sqrt(m)`.
//! [`run_residual_experiment`] measures that decay by subsampling a lexicon,
//! and [`verify_mean_minimizer`] checks numerically that the mean is the
//! least-squares centre of the term embeddings.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::tokenize;
use crate::embedding_store::EmbeddingTable;
use crate::error::{Error, Result};

const ASTRONOMY: &str = include_str!("../lexicons/astronomy.txt");
const MEDICINE: &str = include_str!("../lexicons/medicine.txt");
const LAW: &str = include_str!("../lexicons/law.txt");

pub const BUILTIN_DOMAINS: [&str; 3] = ["astronomy", "medicine", "law"];

/// A deduplicated list of lowercase single-word domain terms.
///
/// Terms such as "x-ray" that the tokenizer splits into several tokens are
/// matched in text as consecutive token runs.
#[derive(Debug, Clone)]
pub struct DomainLexicon {
    domain_name: String,
    terms: Vec<String>,
    members: HashSet<String>,
    /// Token runs of multi-token terms, longest first.
    phrases: Vec<Vec<String>>,
}

impl DomainLexicon {
    pub fn new<I, S>(domain_name: impl Into<String>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lexicon = DomainLexicon {
            domain_name: domain_name.into(),
            terms: Vec::new(),
            members: HashSet::new(),
            phrases: Vec::new(),
        };
        for term in terms {
            let term = term.as_ref().trim();
            if term.is_empty() {
                continue;
            }
            if term.chars().any(char::is_whitespace) {
                return Err(Error::Lexicon(format!("{term:?} is not a single word")));
            }
            let term = term.to_lowercase();
            let tokens = tokenize(&term);
            if tokens.is_empty() {
                return Err(Error::Lexicon(format!("{term:?} has no letters or digits")));
            }
            if lexicon.members.insert(term.clone()) {
                if tokens.len() > 1 {
                    lexicon.phrases.push(tokens);
                }
                lexicon.terms.push(term);
            }
        }
        lexicon.phrases.sort_by_key(|p| std::cmp::Reverse(p.len()));
        if lexicon.terms.is_empty() {
            return Err(Error::Lexicon(format!(
                "lexicon {:?} has no terms",
                lexicon.domain_name
            )));
        }
        Ok(lexicon)
    }

    /// One term per line; `#` starts a comment.
    pub fn parse(domain_name: impl Into<String>, body: &str) -> Result<Self> {
        let terms = body
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|t| !t.is_empty());
        DomainLexicon::new(domain_name, terms)
    }

    /// Loads a lexicon file; the domain name is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "domain".into());
        DomainLexicon::parse(name, &body)
    }

    pub fn builtin(domain: &str) -> Option<Self> {
        let body = match domain {
            "astronomy" => ASTRONOMY,
            "medicine" => MEDICINE,
            "law" => LAW,
            _ => return None,
        };
        Some(DomainLexicon::parse(domain, body).expect("bundled lexicon is valid"))
    }

    /// Either a path or `builtin:<domain>`.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec.strip_prefix("builtin:") {
            Some(name) => DomainLexicon::builtin(name).ok_or_else(|| {
                Error::Lexicon(format!(
                    "unknown bundled lexicon {name:?}; choose one of {BUILTIN_DOMAINS:?}"
                ))
            }),
            None => DomainLexicon::load(spec),
        }
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.members.contains(token)
    }

    /// `(term occurrences, tokens)` in a token stream. Multi-token terms
    /// count once per run; matches do not overlap.
    pub fn count_hits<I, S>(&self, tokens: I) -> (usize, usize)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if self.phrases.is_empty() {
            let mut hits = 0;
            let mut total = 0;
            for t in tokens {
                total += 1;
                hits += usize::from(self.members.contains(t.as_ref()));
            }
            return (hits, total);
        }
        let tokens: Vec<S> = tokens.into_iter().collect();
        let mut hits = 0;
        let mut i = 0;
        while i < tokens.len() {
            let rest = &tokens[i..];
            let run = self.phrases.iter().find(|p| {
                p.len() <= rest.len() && p.iter().zip(rest).all(|(a, b)| a == b.as_ref())
            });
            if let Some(p) = run {
                hits += 1;
                i += p.len();
                continue;
            }
            hits += usize::from(self.members.contains(tokens[i].as_ref()));
            i += 1;
        }
        (hits, tokens.len())
    }
}

/// Unit-length aggregate of a lexicon's term embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainVector {
    pub source_domain: String,
    pub dimension: usize,
    pub terms_found: usize,
    pub terms_missing: Vec<String>,
    pub vector: Vec<f64>,
}

impl DomainVector {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dv: DomainVector = serde_json::from_str(&body)?;
        if dv.vector.len() != dv.dimension {
            return Err(Error::DimensionMismatch {
                expected: dv.dimension,
                actual: dv.vector.len(),
            });
        }
        let norm = l2_norm(&dv.vector);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("domain vector norm is {norm}, expected 1"),
            });
        }
        Ok(dv)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lexicon embeddings that resolved against the table, in lexicon order.
struct Resolved<'t> {
    rows: Vec<&'t [f32]>,
    missing: Vec<String>,
}

fn resolve_terms<'t>(table: &'t EmbeddingTable, lexicon: &DomainLexicon) -> Result<Resolved<'t>> {
    let mut rows = Vec::with_capacity(lexicon.len());
    let mut missing = Vec::new();
    for term in lexicon.terms() {
        match table.lookup(term) {
            Some(v) => rows.push(v),
            None => missing.push(term.clone()),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDomainVector {
            lexicon_size: lexicon.len(),
        });
    }
    if !missing.is_empty() {
        log::warn!(
            "{}: {} of {} terms missing from the embedding vocabulary: {}",
            lexicon.domain_name(),
            missing.len(),
            lexicon.len(),
            missing.join(", ")
        );
    }
    Ok(Resolved { rows, missing })
}

fn mean_of(rows: &[&[f32]], dimension: usize) -> Vec<f64> {
    let mut sum = vec![0.0f64; dimension];
    for row in rows {
        for (s, &x) in sum.iter_mut().zip(row.iter()) {
            *s += f64::from(x);
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}

/// Mean of the found terms' unit vectors, before re-normalisation.
pub fn lexicon_mean(table: &EmbeddingTable, lexicon: &DomainLexicon) -> Result<Vec<f64>> {
    let resolved = resolve_terms(table, lexicon)?;
    Ok(mean_of(&resolved.rows, table.dimension()))
}

pub fn aggregate_domain_vector(
    table: &EmbeddingTable,
    lexicon: &DomainLexicon,
) -> Result<DomainVector> {
    let resolved = resolve_terms(table, lexicon)?;
    let mut vector = mean_of(&resolved.rows, table.dimension());
    let norm = l2_norm(&vector);
    if norm < 1e-12 {
        return Err(Error::DegenerateDirection);
    }
    vector.iter_mut().for_each(|x| *x /= norm);
    log::info!(
        "{}: domain vector from {} of {} terms (d={})",
        lexicon.domain_name(),
        resolved.rows.len(),
        lexicon.len(),
        table.dimension()
    );
    Ok(DomainVector {
        source_domain: lexicon.domain_name().to_string(),
        dimension: table.dimension(),
        terms_found: resolved.rows.len(),
        terms_missing: resolved.missing,
        vector,
    })
}

/// `E = A - a`, componentwise.
pub fn residual_error(sample: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if sample.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            actual: sample.len(),
        });
    }
    Ok(sample.iter().zip(reference).map(|(a, b)| a - b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub domain: String,
    pub terms_found: usize,
    pub m_values: Vec<usize>,
    /// Mean of `||E||` over trials, one entry per `m`.
    pub mean_error_norms: Vec<f64>,
    /// Sample standard deviation of `||E||` over trials, one entry per `m`.
    pub error_norm_stddevs: Vec<f64>,
    /// The `m` whose sampled residuals `r_i = e_i - a` are pooled below.
    pub component_m: usize,
    pub component_mean: f64,
    pub component_stddev: f64,
    pub component_count: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub components: Vec<f64>,
}

/// One histogram bin of pooled residual components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: u64,
}

impl ResidualReport {
    /// Equal-width histogram spanning the observed component range.
    pub fn component_histogram(&self, bins: usize) -> Vec<ComponentBin> {
        let bins = bins.max(1);
        if self.components.is_empty() {
            return Vec::new();
        }
        let lo = self.components.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .components
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0u64; bins];
        for &x in &self.components {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| ComponentBin {
                bin_low: lo + i as f64 * width,
                bin_high: lo + (i + 1) as f64 * width,
                count,
            })
            .collect()
    }

    pub fn write_component_csv(&self, path: impl AsRef<Path>, bins: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        for bin in self.component_histogram(bins) {
            w.serialize(bin)?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one `(m, trial)` cell.
fn trial_rng(seed: u64, m: usize, trial: usize) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ m as u64) ^ trial as u64);
    ChaCha8Rng::seed_from_u64(key)
}

struct Trial {
    error_norm: f64,
    residuals: Vec<f64>,
}

pub fn run_residual_experiment(
    table: &EmbeddingTable,
    lexicon: &DomainLexicon,
    m_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ResidualReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if m_values.is_empty() {
        return Err(Error::Config("at least one m value is required".into()));
    }
    let resolved = resolve_terms(table, lexicon)?;
    let rows = &resolved.rows;
    let d = table.dimension();
    if let Some(&m) = m_values.iter().find(|&&m| m == 0 || m > rows.len()) {
        if m == 0 {
            return Err(Error::Config("m values must be positive".into()));
        }
        return Err(Error::SampleTooLarge {
            requested: m,
            available: rows.len(),
        });
    }
    let reference = mean_of(rows, d);
    let component_m = *m_values.iter().max().unwrap();

    let mut mean_error_norms = Vec::with_capacity(m_values.len());
    let mut error_norm_stddevs = Vec::with_capacity(m_values.len());
    let mut components = Vec::new();
    for &m in m_values {
        let pool = m == component_m && components.is_empty();
        let results: Vec<Trial> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, m, t);
                let picked = index::sample(&mut rng, rows.len(), m);
                let sample: Vec<&[f32]> = picked.iter().map(|i| rows[i]).collect();
                let a_sample = mean_of(&sample, d);
                let error = residual_error(&a_sample, &reference).expect("same dimension");
                let residuals = if pool {
                    sample
                        .iter()
                        .flat_map(|row| {
                            row.iter()
                                .zip(&reference)
                                .map(|(&x, &a)| f64::from(x) - a)
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                Trial {
                    error_norm: l2_norm(&error),
                    residuals,
                }
            })
            .collect();
        let norms: Vec<f64> = results.iter().map(|t| t.error_norm).collect();
        let (mean, sd) = mean_and_stddev(&norms);
        mean_error_norms.push(mean);
        error_norm_stddevs.push(sd);
        if pool {
            for t in results {
                components.extend(t.residuals);
            }
        }
    }
    let (component_mean, component_stddev) = mean_and_stddev(&components);
    Ok(ResidualReport {
        domain: lexicon.domain_name().to_string(),
        terms_found: rows.len(),
        m_values: m_values.to_vec(),
        mean_error_norms,
        error_norm_stddevs,
        component_m,
        component_mean,
        component_stddev,
        component_count: components.len(),
        trials,
        seed,
        components,
    })
}

/// Mean and sample standard deviation, summed in input order.
pub(crate) fn mean_and_stddev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerReport {
    pub passed: bool,
    pub terms_found: usize,
    pub objective_at_mean: f64,
    pub gradient_norm: f64,
    pub probes: usize,
    /// Probes with `f(mean + delta) < f(mean)` beyond rounding tolerance.
    pub violations: usize,
    /// Smallest observed `f(mean + delta) - f(mean)`.
    pub min_increase: f64,
    pub seed: u64,
}

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const OBJECTIVE_RELATIVE_TOLERANCE: f64 = 1e-12;
const PROBE_RADII: [f64; 2] = [1e-3, 1e-1];

fn sum_sq_distance(rows: &[&[f32]], x: &[f64]) -> f64 {
    rows.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .map(|(&e, &xi)| (f64::from(e) - xi).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Checks that the raw lexicon mean minimises `sum ||e_i - x||^2`: the
/// gradient `2 sum (x - e_i)` must vanish there and no seeded probe
/// `mean + delta` with `||delta||` in {1e-3, 1e-1} may do better.
pub fn verify_mean_minimizer(
    table: &EmbeddingTable,
    lexicon: &DomainLexicon,
    probes: usize,
    seed: u64,
) -> Result<MinimizerReport> {
    let resolved = resolve_terms(table, lexicon)?;
    let rows = &resolved.rows;
    let d = table.dimension();
    let mean = mean_of(rows, d);

    let mut gradient = vec![0.0f64; d];
    for row in rows {
        for ((g, &e), &mu) in gradient.iter_mut().zip(row.iter()).zip(&mean) {
            *g += 2.0 * (mu - f64::from(e));
        }
    }
    let gradient_norm = l2_norm(&gradient);

    let at_mean = sum_sq_distance(rows, &mean);
    let slack = OBJECTIVE_RELATIVE_TOLERANCE * at_mean.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_increase = f64::INFINITY;
    for p in 0..probes {
        let mut delta: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = l2_norm(&delta);
        let radius = PROBE_RADII[p % PROBE_RADII.len()];
        delta.iter_mut().for_each(|x| *x *= radius / norm);
        let probe: Vec<f64> = mean.iter().zip(&delta).map(|(m, dx)| m + dx).collect();
        let increase = sum_sq_distance(rows, &probe) - at_mean;
        min_increase = min_increase.min(increase);
        if increase < -slack {
            violations += 1;
        }
    }
    Ok(MinimizerReport {
        passed: violations == 0 && gradient_norm < GRADIENT_TOLERANCE,
        terms_found: rows.len(),
        objective_at_mean: at_mean,
        gradient_norm,
        probes,
        violations,
        min_increase,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_table() -> EmbeddingTable {
        EmbeddingTable::from_entries(2, vec![("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])])
            .unwrap()
    }

    #[test]
    fn lexicon_normalises_terms() {
        let lex = DomainLexicon::new("x", ["Galaxy", "galaxy", " Nebula ", ""]).unwrap();
        assert_eq!(lex.terms(), ["galaxy", "nebula"]);
        assert!(DomainLexicon::new("x", ["two words"]).is_err());
        assert!(DomainLexicon::new("x", Vec::<String>::new()).is_err());
        let parsed = DomainLexicon::parse("y", "# header\nalpha\n\nbeta # trailing\n").unwrap();
        assert_eq!(parsed.terms(), ["alpha", "beta"]);
    }

    #[test]
    fn hyphenated_terms_match_token_runs() {
        let lex = DomainLexicon::new("x", ["x-ray", "ray", "light-year"]).unwrap();
        let tokens = tokenize("An X-ray; a ray, a light year, light-years and x rays");
        // x-ray, ray, light year; "years" and "rays" do not match
        assert_eq!(lex.count_hits(&tokens), (3, tokens.len()));
        assert!(DomainLexicon::new("x", ["--"]).is_err());
    }

    #[test]
    fn bundled_lexicons_load() {
        let astro = DomainLexicon::builtin("astronomy").unwrap();
        assert_eq!(astro.len(), 106);
        assert!(astro.contains("redshift") && astro.contains("jwst") && astro.contains("light-year"));
        let med = DomainLexicon::builtin("medicine").unwrap();
        assert!(med.contains("metastasis") && med.contains("clinicaltrial"));
        let law = DomainLexicon::builtin("law").unwrap();
        for seed in ["litigation", "precedent", "contract"] {
            assert!(law.contains(seed));
        }
        assert!(DomainLexicon::resolve("builtin:unknown").is_err());
    }

    #[test]
    fn single_term_vector_is_identity() {
        let lex = DomainLexicon::new("t", ["a"]).unwrap();
        let dv = aggregate_domain_vector(&ab_table(), &lex).unwrap();
        assert_eq!(dv.vector, vec![1.0, 0.0]);
        assert_eq!(dv.terms_found, 1);
    }

    #[test]
    fn two_term_vector_is_renormalised_mean() {
        let lex = DomainLexicon::new("t", ["a", "b", "absent"]).unwrap();
        let dv = aggregate_domain_vector(&ab_table(), &lex).unwrap();
        let h = 0.5f64 / (0.5f64 * 0.5 * 2.0).sqrt();
        assert!((dv.vector[0] - h).abs() < 1e-12 && (dv.vector[1] - h).abs() < 1e-12);
        assert!((dv.vector[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(dv.terms_missing, vec!["absent".to_string()]);
    }

    #[test]
    fn aggregation_errors() {
        let lex = DomainLexicon::new("t", ["nothere"]).unwrap();
        assert!(matches!(
            aggregate_domain_vector(&ab_table(), &lex),
            Err(Error::EmptyDomainVector { .. })
        ));
        let t = EmbeddingTable::from_entries(2, vec![("p", vec![1.0, 0.0]), ("n", vec![-1.0, 0.0])])
            .unwrap();
        let lex = DomainLexicon::new("t", ["p", "n"]).unwrap();
        assert!(matches!(
            aggregate_domain_vector(&t, &lex),
            Err(Error::DegenerateDirection)
        ));
    }

    #[test]
    fn residual_error_arithmetic() {
        assert_eq!(residual_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(residual_error(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), vec![0.0, 0.0]);
        assert!(residual_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn full_sample_has_zero_error() {
        let lex = DomainLexicon::new("t", ["a", "b"]).unwrap();
        let r = run_residual_experiment(&ab_table(), &lex, &[2], 1, 3).unwrap();
        assert_eq!(r.mean_error_norms, vec![0.0]);
        assert!(matches!(
            run_residual_experiment(&ab_table(), &lex, &[3], 1, 3),
            Err(Error::SampleTooLarge { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn two_point_minimizer() {
        let lex = DomainLexicon::new("t", ["a", "b"]).unwrap();
        let report = verify_mean_minimizer(&ab_table(), &lex, 16, 1).unwrap();
        assert!(report.passed);
        assert!((report.objective_at_mean - 1.0).abs() < 1e-15);
        assert!(report.gradient_norm < 1e-15);
        // f((0.6, 0.5)) = 0.4^2 + 0.5^2 + 0.6^2 + 0.5^2
        let rows: Vec<&[f32]> = vec![&[1.0, 0.0], &[0.0, 1.0]];
        assert!((sum_sq_distance(&rows, &[0.6, 0.5]) - 1.02).abs() < 1e-12);
    }

    #[test]
    fn single_term_minimizer() {
        let lex = DomainLexicon::new("t", ["a"]).unwrap();
        let report = verify_mean_minimizer(&ab_table(), &lex, 8, 5).unwrap();
        assert!(report.passed);
        assert_eq!(report.objective_at_mean, 0.0);
        assert!(report.min_increase > 0.0);
    }

    #[test]
    fn vector_file_round_trip() {
        let lex = DomainLexicon::new("t", ["a", "b"]).unwrap();
        let dv = aggregate_domain_vector(&ab_table(), &lex).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        dv.save(&path).unwrap();
        assert_eq!(DomainVector::load(&path).unwrap(), dv);
    }
}
