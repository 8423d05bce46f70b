//! Exact-match accuracy and edit distance of predicted forms against gold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{nfc, CorpusError, FeatureBundle, LanguageDataset};
use crate::splitter::SplitMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("gold has {gold} items but there are {predictions} predictions")]
    LengthMismatch { gold: usize, predictions: usize },
    #[error("prediction line {line}: expected {expected:?}, found {found:?}")]
    Misaligned {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("prediction file: {0}")]
    Parse(#[from] CorpusError),
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    if short.is_empty() {
        return long.len();
    }

    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0usize; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(lc != sc);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// NFC-normalize predictions before comparing. Off means byte-exact.
    pub normalize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub lemma: String,
    pub features: FeatureBundle,
    pub gold_form: String,
    pub predicted_form: String,
}

impl PredictionRecord {
    pub fn is_correct(&self) -> bool {
        self.predicted_form == self.gold_form
    }

    pub fn edit_distance(&self) -> usize {
        levenshtein(&self.predicted_form, &self.gold_form)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub language: String,
    pub system: String,
    pub split_mode: SplitMode,
    pub accuracy: f64,
    pub mean_edit_distance: f64,
    pub n: usize,
}

/// Pairs gold triplets with predictions by position.
pub fn pair_records(
    gold: &LanguageDataset,
    predictions: &[String],
    options: EvalOptions,
) -> Result<Vec<PredictionRecord>, MetricsError> {
    if gold.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            predictions: predictions.len(),
        });
    }
    Ok(gold
        .triplets
        .iter()
        .zip(predictions)
        .map(|(t, p)| PredictionRecord {
            lemma: t.lemma().to_owned(),
            features: t.features().clone(),
            gold_form: t.form().to_owned(),
            predicted_form: if options.normalize { nfc(p) } else { p.clone() },
        })
        .collect())
}

/// Accuracy and mean edit distance over all records; both are 0 when there
/// are no records.
pub fn score_records(
    records: &[PredictionRecord],
    language: &str,
    system: &str,
    split_mode: SplitMode,
) -> EvalResult {
    let n = records.len();
    let correct = records.iter().filter(|r| r.is_correct()).count();
    let distance: usize = records.iter().map(PredictionRecord::edit_distance).sum();
    let (accuracy, mean_edit_distance) = if n == 0 {
        (0.0, 0.0)
    } else {
        (correct as f64 / n as f64, distance as f64 / n as f64)
    };
    EvalResult {
        language: language.to_owned(),
        system: system.to_owned(),
        split_mode,
        accuracy,
        mean_edit_distance,
        n,
    }
}

pub fn evaluate(
    gold: &LanguageDataset,
    predictions: &[String],
    system: &str,
    split_mode: SplitMode,
    options: EvalOptions,
) -> Result<EvalResult, MetricsError> {
    let records = pair_records(gold, predictions, options)?;
    Ok(score_records(&records, &gold.language, system, split_mode))
}

/// One line of a prediction file. Three-column lines carry the lemma and
/// bundle they claim to answer; one-column lines are bare forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionLine {
    pub line: usize,
    pub key: Option<(String, FeatureBundle)>,
    pub form: String,
}

/// Reads a prediction file: either UniMorph-style `lemma<TAB>pred<TAB>tags`
/// or one bare form per line. Blank lines are skipped.
pub fn parse_predictions(
    input: &[u8],
    options: EvalOptions,
) -> Result<Vec<PredictionLine>, MetricsError> {
    let text = std::str::from_utf8(input).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;
    let norm = |s: &str| {
        if options.normalize {
            nfc(s)
        } else {
            s.to_owned()
        }
    };
    let mut out = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        match fields.as_slice() {
            [form] => out.push(PredictionLine {
                line,
                key: None,
                form: norm(form),
            }),
            [lemma, form, tags] => {
                let features =
                    FeatureBundle::parse(&norm(tags)).map_err(|_| CorpusError::EmptyField {
                        line,
                        field: "features",
                    })?;
                out.push(PredictionLine {
                    line,
                    key: Some((norm(lemma), features)),
                    form: norm(form),
                });
            }
            _ => {
                return Err(CorpusError::Format {
                    line,
                    fields: fields.len(),
                }
                .into())
            }
        }
    }
    Ok(out)
}

/// Checks that keyed prediction lines name the same lemma and bundle as the
/// gold line at the same position, then returns the bare forms.
pub fn align_predictions(
    gold: &LanguageDataset,
    lines: &[PredictionLine],
) -> Result<Vec<String>, MetricsError> {
    if gold.len() != lines.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            predictions: lines.len(),
        });
    }
    for (t, p) in gold.triplets.iter().zip(lines) {
        if let Some((lemma, features)) = &p.key {
            if lemma != t.lemma() || features != t.features() {
                return Err(MetricsError::Misaligned {
                    line: p.line,
                    expected: format!("{}\t{}", t.lemma(), t.features()),
                    found: format!("{lemma}\t{features}"),
                });
            }
        }
    }
    Ok(lines.iter().map(|p| p.form.clone()).collect())
}
