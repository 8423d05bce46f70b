//! UniMorph-style inflection data: triplets, feature bundles, inflection
//! tables and the TSV reader/writer.
//!
//! A UniMorph record is one line `lemma<TAB>form<TAB>TAG;TAG;...`. Parsing is
//! order-preserving; every string is NFC-normalized unless the caller opts
//! out through [`ParseOptions`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Family name used for languages without an assigned family, and for
/// families too small to be reported on their own.
pub const MISC_FAMILY: &str = "misc";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("feature bundle is empty")]
    Empty,
    #[error("feature bundle contains an empty tag")]
    EmptyTag,
    #[error("feature bundle repeats tag {0:?}")]
    DuplicateTag(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    Decode { offset: usize },
    #[error("line {line}: expected 3 tab-separated fields, found {fields}")]
    Format { line: usize, fields: usize },
    #[error("line {line}: empty {field}")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: feature bundle repeats tag {tag:?}")]
    DuplicateTag { line: usize, tag: String },
}

/// A set of morphosyntactic tags such as `N;NOM;PL`.
///
/// Equality, hashing and ordering ignore tag order (`NOM;PL` == `PL;NOM`),
/// while [`Display`](fmt::Display) reproduces the original order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureBundle {
    tags: Arc<[String]>,
    sorted: Arc<[String]>,
}

impl FeatureBundle {
    pub fn new<I, S>(tags: I) -> Result<Self, BundleError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        if tags.is_empty() {
            return Err(BundleError::Empty);
        }
        let mut seen = HashSet::with_capacity(tags.len());
        for tag in &tags {
            if tag.trim().is_empty() {
                return Err(BundleError::EmptyTag);
            }
            if !seen.insert(tag.as_str()) {
                return Err(BundleError::DuplicateTag(tag.clone()));
            }
        }
        let mut sorted = tags.clone();
        sorted.sort();
        Ok(FeatureBundle {
            tags: tags.into(),
            sorted: sorted.into(),
        })
    }

    /// Parses a `;`-joined bundle.
    pub fn parse(text: &str) -> Result<Self, BundleError> {
        if text.trim().is_empty() {
            return Err(BundleError::Empty);
        }
        Self::new(text.split(';'))
    }

    /// Tags in their original order.
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Order-insensitive lookup key: the tags sorted and joined by `;`.
    pub fn key(&self) -> String {
        self.sorted.join(";")
    }
}

impl PartialEq for FeatureBundle {
    fn eq(&self, other: &Self) -> bool {
        self.sorted == other.sorted
    }
}

impl Eq for FeatureBundle {}

impl Hash for FeatureBundle {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.sorted.hash(state);
    }
}

impl PartialOrd for FeatureBundle {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureBundle {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sorted.cmp(&other.sorted)
    }
}

impl fmt::Display for FeatureBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tags.join(";"))
    }
}

impl TryFrom<String> for FeatureBundle {
    type Error = BundleError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        FeatureBundle::parse(&value)
    }
}

impl From<FeatureBundle> for String {
    fn from(bundle: FeatureBundle) -> String {
        bundle.to_string()
    }
}

/// One `(lemma, features, form)` record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    lemma: String,
    form: String,
    features: FeatureBundle,
}

impl Triplet {
    /// Builds a triplet, rejecting blank lemmas or forms. Strings are stored
    /// as given; use [`Triplet::nfc`] to normalize.
    pub fn new(
        lemma: impl Into<String>,
        form: impl Into<String>,
        features: FeatureBundle,
    ) -> Result<Self, &'static str> {
        let lemma = lemma.into();
        let form = form.into();
        if lemma.trim().is_empty() {
            return Err("lemma");
        }
        if form.trim().is_empty() {
            return Err("form");
        }
        Ok(Triplet {
            lemma,
            form,
            features,
        })
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn form(&self) -> &str {
        &self.form
    }

    pub fn features(&self) -> &FeatureBundle {
        &self.features
    }

    pub fn nfc(self) -> Self {
        let features = FeatureBundle::new(self.features.tags.iter().map(|t| nfc(t)))
            .expect("NFC preserves non-empty, distinct tags");
        Triplet {
            lemma: nfc(&self.lemma),
            form: nfc(&self.form),
            features,
        }
    }

    /// The record as one TSV line, without terminator.
    pub fn to_tsv_line(&self) -> String {
        format!("{}\t{}\t{}", self.lemma, self.form, self.features)
    }
}

pub(crate) fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// All slots sharing one lemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InflectionTable {
    pub lemma: String,
    pub slots: Vec<(FeatureBundle, String)>,
}

impl InflectionTable {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        self.slots.iter().map(move |(features, form)| Triplet {
            lemma: self.lemma.clone(),
            form: form.clone(),
            features: features.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageDataset {
    pub language: String,
    pub family: String,
    pub triplets: Vec<Triplet>,
}

impl LanguageDataset {
    pub fn new(
        language: impl Into<String>,
        family: impl Into<String>,
        triplets: Vec<Triplet>,
    ) -> Self {
        LanguageDataset {
            language: language.into(),
            family: family.into(),
            triplets,
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// NFC-normalize lemma, form and tags.
    pub normalize: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { normalize: true }
    }
}

/// Identical triplets found on several input lines. They are kept in the
/// dataset; this only reports them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateTriplet {
    pub triplet: Triplet,
    /// 1-based line numbers, in input order.
    pub lines: Vec<usize>,
}

/// Parses UniMorph TSV, logging a warning for every duplicated triplet.
pub fn parse_unimorph(
    input: &[u8],
    language: &str,
    family: &str,
    options: ParseOptions,
) -> Result<LanguageDataset, CorpusError> {
    let (dataset, duplicates) = parse_unimorph_with_duplicates(input, language, family, options)?;
    for dup in &duplicates {
        log::warn!(
            "{}: duplicate triplet {:?} on lines {:?}",
            language,
            dup.triplet.to_tsv_line(),
            dup.lines
        );
    }
    Ok(dataset)
}

/// Like [`parse_unimorph`], but returns the duplicate report instead of
/// logging it.
pub fn parse_unimorph_with_duplicates(
    input: &[u8],
    language: &str,
    family: &str,
    options: ParseOptions,
) -> Result<(LanguageDataset, Vec<DuplicateTriplet>), CorpusError> {
    let text = std::str::from_utf8(input).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;

    let mut triplets = Vec::new();
    let mut lines_of: HashMap<Triplet, Vec<usize>> = HashMap::new();
    let mut dup_order = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let triplet = parse_line(line, line_no, options)?;
        let seen = lines_of.entry(triplet.clone()).or_default();
        if seen.len() == 1 {
            dup_order.push(triplet.clone());
        }
        seen.push(line_no);
        triplets.push(triplet);
    }

    let duplicates = dup_order
        .into_iter()
        .map(|triplet| {
            let lines = lines_of.remove(&triplet).unwrap_or_default();
            DuplicateTriplet { triplet, lines }
        })
        .collect();

    Ok((LanguageDataset::new(language, family, triplets), duplicates))
}

fn parse_line(line: &str, line_no: usize, options: ParseOptions) -> Result<Triplet, CorpusError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(CorpusError::Format {
            line: line_no,
            fields: fields.len(),
        });
    }
    let norm = |s: &str| {
        if options.normalize {
            nfc(s)
        } else {
            s.to_owned()
        }
    };

    let features = FeatureBundle::parse(&norm(fields[2])).map_err(|e| match e {
        BundleError::Empty | BundleError::EmptyTag => CorpusError::EmptyField {
            line: line_no,
            field: "features",
        },
        BundleError::DuplicateTag(tag) => CorpusError::DuplicateTag { line: line_no, tag },
    })?;
    Triplet::new(norm(fields[0]), norm(fields[1]), features).map_err(|field| {
        CorpusError::EmptyField {
            line: line_no,
            field,
        }
    })
}

/// Writes the dataset as UniMorph TSV, one LF-terminated line per triplet.
pub fn serialize(dataset: &LanguageDataset) -> String {
    serialize_triplets(&dataset.triplets)
}

pub fn serialize_triplets(triplets: &[Triplet]) -> String {
    let mut out = String::new();
    for t in triplets {
        out.push_str(&t.to_tsv_line());
        out.push('\n');
    }
    out
}

/// Groups triplets into inflection tables, one per distinct lemma, in order
/// of each lemma's first occurrence. Slots keep input order.
pub fn group_by_lemma(dataset: &LanguageDataset) -> Vec<InflectionTable> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut tables: Vec<InflectionTable> = Vec::new();
    for t in &dataset.triplets {
        let i = *index.entry(t.lemma()).or_insert_with(|| {
            tables.push(InflectionTable {
                lemma: t.lemma.clone(),
                slots: Vec::new(),
            });
            tables.len() - 1
        });
        tables[i].slots.push((t.features.clone(), t.form.clone()));
    }
    tables
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub language: String,
    pub family: String,
    pub triplets: usize,
    pub tables: usize,
    pub min_table_size: usize,
    pub mean_table_size: f64,
    pub max_table_size: usize,
    pub distinct_bundles: usize,
}

/// Size statistics. An empty dataset yields zeros throughout.
pub fn dataset_stats(dataset: &LanguageDataset) -> StatsRecord {
    let tables = group_by_lemma(dataset);
    let sizes: Vec<usize> = tables.iter().map(InflectionTable::len).collect();
    let bundles: HashSet<&FeatureBundle> = dataset.triplets.iter().map(Triplet::features).collect();
    let mean = if sizes.is_empty() {
        0.0
    } else {
        dataset.triplets.len() as f64 / sizes.len() as f64
    };
    StatsRecord {
        language: dataset.language.clone(),
        family: dataset.family.clone(),
        triplets: dataset.triplets.len(),
        tables: tables.len(),
        min_table_size: sizes.iter().copied().min().unwrap_or(0),
        mean_table_size: mean,
        max_table_size: sizes.iter().copied().max().unwrap_or(0),
        distinct_bundles: bundles.len(),
    }
}
