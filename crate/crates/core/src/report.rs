//! Aggregation of evaluation results: per-family summaries and per-language
//! form-to-lemma drops against training-set size.
//!
//! All averages are macro averages. A family summary first averages each
//! system over the family's languages, then averages those system means.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MISC_FAMILY;
use crate::metrics::EvalResult;
use crate::splitter::SplitMode;

pub const DEFAULT_MIN_LANGUAGES: usize = 3;

pub const DROP_CSV_HEADER: [&str; 7] = [
    "language",
    "family",
    "system",
    "train_examples",
    "form_acc",
    "lemma_acc",
    "drop",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no family assigned to language {0:?}")]
    MissingFamily(String),
    #[error("no train size for language {0:?}")]
    MissingTrainSize(String),
    #[error("duplicate result for language {language:?}, system {system:?}, mode {mode}")]
    DuplicateResult {
        language: String,
        system: String,
        mode: SplitMode,
    },
    #[error("form and lemma results cover different pairs (only form: {only_form:?}; only lemma: {only_lemma:?})")]
    PairMismatch {
        only_form: Vec<(String, String)>,
        only_lemma: Vec<(String, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAggregate {
    pub family: String,
    pub mode: SplitMode,
    pub mean_accuracy_across_systems: f64,
    pub best_system: String,
    pub best_accuracy: f64,
    pub n_languages: usize,
}

/// Maps every language to its family, or to `misc` when its family has
/// fewer than `min_languages` of the given languages.
pub fn collapse_small_families<'a, I>(
    languages: I,
    families: &HashMap<String, String>,
    min_languages: usize,
) -> Result<HashMap<String, String>, ReportError>
where
    I: IntoIterator<Item = &'a str>,
{
    let languages: BTreeSet<&str> = languages.into_iter().collect();
    let mut members: HashMap<&str, usize> = HashMap::new();
    for lang in &languages {
        let family = families
            .get(*lang)
            .ok_or_else(|| ReportError::MissingFamily((*lang).to_owned()))?;
        *members.entry(family.as_str()).or_default() += 1;
    }
    Ok(languages
        .into_iter()
        .map(|lang| {
            let family = families[lang].as_str();
            let family = if members[family] < min_languages {
                MISC_FAMILY
            } else {
                family
            };
            (lang.to_owned(), family.to_owned())
        })
        .collect())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sort key placing `misc` after every named family.
fn family_order(family: &str) -> (bool, &str) {
    (family == MISC_FAMILY, family)
}

pub fn aggregate_by_family(
    results: &[EvalResult],
    families: &HashMap<String, String>,
    min_languages: usize,
) -> Result<Vec<FamilyAggregate>, ReportError> {
    let assigned = collapse_small_families(
        results.iter().map(|r| r.language.as_str()),
        families,
        min_languages,
    )?;

    // system -> language -> accuracy, per (family, mode)
    type BySystem<'a> = BTreeMap<&'a str, BTreeMap<&'a str, f64>>;
    let mut groups: BTreeMap<(String, SplitMode), BySystem> = BTreeMap::new();
    for r in results {
        let family = assigned[&r.language].clone();
        let per_lang = groups
            .entry((family, r.split_mode))
            .or_default()
            .entry(r.system.as_str())
            .or_default();
        if per_lang.insert(r.language.as_str(), r.accuracy).is_some() {
            return Err(ReportError::DuplicateResult {
                language: r.language.clone(),
                system: r.system.clone(),
                mode: r.split_mode,
            });
        }
    }

    let mut out: Vec<FamilyAggregate> = groups
        .into_iter()
        .map(|((family, mode), systems)| {
            let languages: BTreeSet<&str> =
                systems.values().flat_map(|l| l.keys().copied()).collect();
            let system_means: Vec<(&str, f64)> = systems
                .iter()
                .map(|(system, langs)| {
                    (*system, mean(&langs.values().copied().collect::<Vec<_>>()))
                })
                .collect();
            // systems iterate in name order, so keeping the first maximum
            // breaks ties lexicographically
            let (best_system, best_accuracy) = system_means
                .iter()
                .fold(None, |best: Option<(&str, f64)>, &(s, m)| match best {
                    Some((_, b)) if b >= m => best,
                    _ => Some((s, m)),
                })
                .expect("every group has a system");
            FamilyAggregate {
                family,
                mode,
                mean_accuracy_across_systems: mean(
                    &system_means.iter().map(|(_, m)| *m).collect::<Vec<_>>(),
                ),
                best_system: best_system.to_owned(),
                best_accuracy,
                n_languages: languages.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        family_order(&a.family)
            .cmp(&family_order(&b.family))
            .then(a.mode.cmp(&b.mode))
    });
    Ok(out)
}

/// Renders aggregates as a tab-separated table with one row per family and
/// a `mean (best)_system` cell per split mode, e.g. `0.51 (0.80)_d`.
/// Systems are shown through `abbreviations` when listed there.
pub fn render_family_table(
    aggregates: &[FamilyAggregate],
    abbreviations: &HashMap<String, String>,
) -> String {
    let mut rows: Vec<(&str, [Option<&FamilyAggregate>; 2])> = Vec::new();
    for agg in aggregates {
        let idx = match rows.iter().position(|(f, _)| *f == agg.family) {
            Some(i) => i,
            None => {
                rows.push((&agg.family, [None, None]));
                rows.len() - 1
            }
        };
        let col = match agg.mode {
            SplitMode::Form => 0,
            SplitMode::Lemma => 1,
        };
        rows[idx].1[col] = Some(agg);
    }
    let cell = |agg: Option<&FamilyAggregate>| match agg {
        Some(a) => {
            let system = abbreviations.get(&a.best_system).unwrap_or(&a.best_system);
            format!(
                "{:.2} ({:.2})_{}",
                a.mean_accuracy_across_systems, a.best_accuracy, system
            )
        }
        None => "-".to_owned(),
    };
    let mut out = String::from("family\tform\tlemma\n");
    for (family, [form, lemma]) in rows {
        out.push_str(&format!("{family}\t{}\t{}\n", cell(form), cell(lemma)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub language: String,
    pub family: String,
    pub system: String,
    /// Training examples in the form split.
    pub train_examples: usize,
    pub form_accuracy: f64,
    pub lemma_accuracy: f64,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropSummary {
    pub records: Vec<DropRecord>,
    /// Mean drop per system over its languages.
    pub per_system: BTreeMap<String, f64>,
    /// Mean drop per family over its (language, system) pairs.
    pub per_family: BTreeMap<String, f64>,
    /// Mean drop over all pairs.
    pub overall: f64,
}

fn index_by_pair(
    results: &[EvalResult],
) -> Result<BTreeMap<(String, String), &EvalResult>, ReportError> {
    let mut map = BTreeMap::new();
    for r in results {
        if map
            .insert((r.language.clone(), r.system.clone()), r)
            .is_some()
        {
            return Err(ReportError::DuplicateResult {
                language: r.language.clone(),
                system: r.system.clone(),
                mode: r.split_mode,
            });
        }
    }
    Ok(map)
}

/// Pairs form-split and lemma-split results by `(language, system)`.
/// Languages absent from `families` are reported under `misc`.
pub fn drop_records(
    form: &[EvalResult],
    lemma: &[EvalResult],
    train_sizes: &HashMap<String, usize>,
    families: &HashMap<String, String>,
) -> Result<DropSummary, ReportError> {
    let form = index_by_pair(form)?;
    let lemma = index_by_pair(lemma)?;
    let only_form: Vec<_> = form
        .keys()
        .filter(|k| !lemma.contains_key(*k))
        .cloned()
        .collect();
    let only_lemma: Vec<_> = lemma
        .keys()
        .filter(|k| !form.contains_key(*k))
        .cloned()
        .collect();
    if !only_form.is_empty() || !only_lemma.is_empty() {
        return Err(ReportError::PairMismatch {
            only_form,
            only_lemma,
        });
    }

    let mut records = Vec::with_capacity(form.len());
    for ((language, system), f) in &form {
        let l = lemma[&(language.clone(), system.clone())];
        let train_examples = *train_sizes
            .get(language)
            .ok_or_else(|| ReportError::MissingTrainSize(language.clone()))?;
        records.push(DropRecord {
            language: language.clone(),
            family: families
                .get(language)
                .cloned()
                .unwrap_or_else(|| MISC_FAMILY.to_owned()),
            system: system.clone(),
            train_examples,
            form_accuracy: f.accuracy,
            lemma_accuracy: l.accuracy,
            drop: f.accuracy - l.accuracy,
        });
    }

    let group_means = |key: fn(&DropRecord) -> &str| {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &records {
            groups.entry(key(r).to_owned()).or_default().push(r.drop);
        }
        groups
            .into_iter()
            .map(|(k, v)| (k, mean(&v)))
            .collect::<BTreeMap<_, _>>()
    };
    let per_system = group_means(|r| &r.system);
    let per_family = group_means(|r| &r.family);
    let overall = mean(&records.iter().map(|r| r.drop).collect::<Vec<_>>());

    Ok(DropSummary {
        records,
        per_system,
        per_family,
        overall,
    })
}

/// CSV with header `language,family,system,train_examples,form_acc,lemma_acc,drop`.
pub fn drop_records_csv(records: &[DropRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(DROP_CSV_HEADER)
        .expect("in-memory write");
    for r in records {
        writer
            .write_record([
                r.language.clone(),
                r.family.clone(),
                r.system.clone(),
                r.train_examples.to_string(),
                r.form_accuracy.to_string(),
                r.lemma_accuracy.to_string(),
                r.drop.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv of UTF-8 fields")
}
