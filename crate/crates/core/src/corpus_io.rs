//! Corpus ingest and emission.
//!
//! The canonical on-disk format is JSON Lines: one object per line with a
//! required `"text"` field, an optional `"id"` and an optional flat `"meta"`
//! object. Any other top-level key is carried through in `meta`. A text
//! directory mode treats every `*.txt` file as one document.
//!
//! Readers yield documents in a stable order (file order, then line order).
//! Malformed records never abort a run: they are skipped and recorded as
//! [`SkipRecord`]s. Writers stage output in a temporary file next to the
//! destination and rename it into place only once every record is written, so
//! an interrupted write never leaves a plausible-looking partial corpus.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub type Meta = BTreeMap<String, String>;

/// Extra per-document fields emitted next to `id`/`text`/`meta`, such as
/// `"similarity"` or `"edu_score"`.
pub type Annotations = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub token_count: u64,
    #[serde(default)]
    pub meta: Meta,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::with_meta(id, text, Meta::new())
    }

    pub fn with_meta(id: impl Into<String>, text: impl Into<String>, meta: Meta) -> Self {
        let text = text.into();
        let token_count = count_tokens(&text);
        Document {
            id: id.into(),
            text,
            token_count,
            meta,
        }
    }

    pub fn tokens(&self) -> Tokens<'_> {
        Tokens::new(&self.text)
    }
}

/// Document and token counters. `skipped` counts malformed input records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub document_count: u64,
    pub token_count: u64,
    #[serde(default)]
    pub skipped: u64,
}

impl CorpusStats {
    pub fn record(&mut self, doc: &Document) {
        self.document_count += 1;
        self.token_count += doc.token_count;
    }

    pub fn of<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut stats = CorpusStats::default();
        for doc in docs {
            stats.record(doc);
        }
        stats
    }
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, rhs: CorpusStats) -> CorpusStats {
        CorpusStats {
            document_count: self.document_count + rhs.document_count,
            token_count: self.token_count + rhs.token_count,
            skipped: self.skipped + rhs.skipped,
        }
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, rhs: CorpusStats) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for CorpusStats {
    fn sum<I: Iterator<Item = CorpusStats>>(iter: I) -> Self {
        iter.fold(CorpusStats::default(), Add::add)
    }
}

/// Lowercased maximal runs of Unicode alphanumeric characters.
///
/// Runs that are already lowercase ASCII are borrowed from the input.
#[derive(Debug, Clone)]
pub struct Tokens<'a> {
    rest: &'a str,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        Tokens { rest: text }
    }
}

impl<'a> Iterator for Tokens<'a> {
    type Item = Cow<'a, str>;

    fn next(&mut self) -> Option<Cow<'a, str>> {
        let start = match self.rest.char_indices().find(|(_, c)| c.is_alphanumeric()) {
            Some((i, _)) => i,
            None => {
                self.rest = "";
                return None;
            }
        };
        let run = &self.rest[start..];
        let end = run
            .char_indices()
            .find(|(_, c)| !c.is_alphanumeric())
            .map_or(run.len(), |(i, _)| i);
        let token = &run[..end];
        self.rest = &run[end..];

        if token.is_ascii() {
            if token.bytes().any(|b| b.is_ascii_uppercase()) {
                Some(Cow::Owned(token.to_ascii_lowercase()))
            } else {
                Some(Cow::Borrowed(token))
            }
        } else {
            Some(Cow::Owned(token.to_lowercase()))
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    Tokens::new(text).map(Cow::into_owned).collect()
}

pub fn count_tokens(text: &str) -> u64 {
    Tokens::new(text).count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    TextDir,
}

/// A malformed input record that was skipped. `line` is 1-based; 0 means the
/// whole file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub path: PathBuf,
    pub line: usize,
    pub reason: String,
}

enum Source {
    Jsonl {
        files: std::vec::IntoIter<PathBuf>,
        current: Option<(PathBuf, String, Lines<BufReader<File>>, usize)>,
    },
    TextDir {
        root: PathBuf,
        files: std::vec::IntoIter<PathBuf>,
    },
}

/// Streaming corpus reader. Yields `Err` only for fatal I/O errors; malformed
/// records end up in [`CorpusReader::skipped`].
pub struct CorpusReader {
    source: Source,
    seen_ids: HashSet<String>,
    skipped: Vec<SkipRecord>,
    stats: CorpusStats,
    failed: bool,
}

pub fn read_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<CorpusReader> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let source = match format {
        CorpusFormat::Jsonl => {
            let files = if meta.is_dir() {
                sorted_files(path, "jsonl")?
            } else {
                vec![path.to_path_buf()]
            };
            Source::Jsonl {
                files: files.into_iter(),
                current: None,
            }
        }
        CorpusFormat::TextDir => {
            if !meta.is_dir() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::InvalidInput, "not a directory"),
                ));
            }
            Source::TextDir {
                root: path.to_path_buf(),
                files: sorted_files(path, "txt")?.into_iter(),
            }
        }
    };
    Ok(CorpusReader {
        source,
        seen_ids: HashSet::new(),
        skipped: Vec::new(),
        stats: CorpusStats::default(),
        failed: false,
    })
}

fn sorted_files(root: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file()
            && entry.path().extension().and_then(|e| e.to_str()) == Some(extension)
        {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

impl CorpusReader {
    pub fn skipped(&self) -> &[SkipRecord] {
        &self.skipped
    }

    /// Counts over everything yielded so far, including skips.
    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    fn skip(&mut self, path: &Path, line: usize, reason: impl Into<String>) {
        let reason = reason.into();
        log::warn!("skipping {}:{}: {}", path.display(), line, reason);
        self.skipped.push(SkipRecord {
            path: path.to_path_buf(),
            line,
            reason,
        });
        self.stats.skipped += 1;
    }

    fn accept(&mut self, doc: Document, path: &Path, line: usize) -> Option<Document> {
        if !self.seen_ids.insert(doc.id.clone()) {
            self.skip(path, line, format!("duplicate id {:?}", doc.id));
            return None;
        }
        self.stats.record(&doc);
        Some(doc)
    }

    fn next_jsonl(&mut self) -> Option<Result<Document>> {
        loop {
            let Source::Jsonl { files, current } = &mut self.source else {
                unreachable!()
            };
            if current.is_none() {
                let path = files.next()?;
                let file = match File::open(&path) {
                    Ok(f) => f,
                    Err(e) => return Some(Err(Error::io(path, e))),
                };
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                *current = Some((path, name, BufReader::new(file).lines(), 0));
            }
            let (path, name, lines, lineno) = current.as_mut().unwrap();
            let line = match lines.next() {
                None => {
                    *current = None;
                    continue;
                }
                Some(Err(e)) if e.kind() == std::io::ErrorKind::InvalidData => {
                    *lineno += 1;
                    let (path, line) = (path.clone(), *lineno);
                    self.skip(&path, line, "invalid UTF-8");
                    continue;
                }
                Some(Err(e)) => return Some(Err(Error::io(path.clone(), e))),
                Some(Ok(line)) => line,
            };
            *lineno += 1;
            if line.trim().is_empty() {
                continue;
            }
            let (path, line_no) = (path.clone(), *lineno);
            let fallback_id = format!("{name}:{line_no}");
            match parse_record(&line, fallback_id) {
                Ok(doc) => {
                    if let Some(doc) = self.accept(doc, &path, line_no) {
                        return Some(Ok(doc));
                    }
                }
                Err(reason) => self.skip(&path, line_no, reason),
            }
        }
    }

    fn next_text(&mut self) -> Option<Result<Document>> {
        loop {
            let Source::TextDir { root, files } = &mut self.source else {
                unreachable!()
            };
            let path = files.next()?;
            let id = path
                .strip_prefix(&*root)
                .unwrap_or(&path)
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => return Some(Err(Error::io(path, e))),
            };
            match String::from_utf8(bytes) {
                Ok(text) => {
                    if let Some(doc) = self.accept(Document::new(id, text), &path, 0) {
                        return Some(Ok(doc));
                    }
                }
                Err(_) => self.skip(&path, 0, "invalid UTF-8"),
            }
        }
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Result<Document>> {
        if self.failed {
            return None;
        }
        let item = match self.source {
            Source::Jsonl { .. } => self.next_jsonl(),
            Source::TextDir { .. } => self.next_text(),
        };
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

fn value_to_string(value: Value) -> String {
    match value {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn parse_record(line: &str, fallback_id: String) -> std::result::Result<Document, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let Value::Object(mut obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let text = match obj.remove("text") {
        Some(Value::String(s)) => s,
        Some(_) => return Err("\"text\" is not a string".into()),
        None => return Err("missing \"text\" field".into()),
    };
    let id = match obj.remove("id") {
        None | Some(Value::Null) => fallback_id,
        Some(Value::String(s)) if s.is_empty() => fallback_id,
        Some(v @ (Value::String(_) | Value::Number(_))) => value_to_string(v),
        Some(_) => return Err("\"id\" is neither a string nor a number".into()),
    };
    let nested = match obj.remove("meta") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m,
        Some(_) => return Err("\"meta\" is not an object".into()),
    };
    let mut meta = Meta::new();
    for (k, v) in obj.into_iter().chain(nested) {
        meta.insert(k, value_to_string(v));
    }
    Ok(Document::with_meta(id, text, meta))
}

/// Line-oriented JSON writer that only materialises its destination on
/// [`JsonlWriter::finish`]. Dropping an unfinished writer deletes the staged
/// file.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<NamedTempFile>,
    lines: u64,
}

impl JsonlWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = NamedTempFile::new_in(&dir).map_err(|e| Error::io(&path, e))?;
        Ok(JsonlWriter {
            path,
            out: BufWriter::new(tmp),
            lines: 0,
        })
    }

    pub fn write<T: Serialize + ?Sized>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out
            .write_all(b"\n")
            .map_err(|e| Error::io(&self.path, e))?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn finish(self) -> Result<u64> {
        let JsonlWriter { path, out, lines } = self;
        let tmp = out
            .into_inner()
            .map_err(|e| Error::io(&path, e.into_error()))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(lines)
    }
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a Meta,
    #[serde(flatten)]
    annotations: &'a Annotations,
}

pub struct CorpusWriter {
    inner: JsonlWriter,
    stats: CorpusStats,
}

impl CorpusWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(CorpusWriter {
            inner: JsonlWriter::create(path)?,
            stats: CorpusStats::default(),
        })
    }

    pub fn write(&mut self, doc: &Document, annotations: Option<&Annotations>) -> Result<()> {
        static EMPTY: std::sync::OnceLock<Annotations> = std::sync::OnceLock::new();
        let annotations = annotations.unwrap_or_else(|| EMPTY.get_or_init(Annotations::new));
        self.inner.write(&OutRecord {
            id: &doc.id,
            text: &doc.text,
            meta: &doc.meta,
            annotations,
        })?;
        self.stats.record(doc);
        Ok(())
    }

    pub fn finish(self) -> Result<CorpusStats> {
        self.inner.finish()?;
        Ok(self.stats)
    }
}

pub fn write_corpus<I>(docs: I, path: impl AsRef<Path>) -> Result<CorpusStats>
where
    I: IntoIterator<Item = (Document, Option<Annotations>)>,
{
    let mut writer = CorpusWriter::create(path)?;
    for (doc, annotations) in docs {
        writer.write(&doc, annotations.as_ref())?;
    }
    writer.finish()
}
