//! Lemma-disjoint re-splitting and evaluation of morphological inflection
//! data.
//!
//! Inflection data comes as `(lemma, features, form)` triplets. The usual
//! random split distributes the cells of one inflection table over train
//! and test, so a model can answer a test item by recalling the lemma's
//! other forms. This crate re-splits by whole tables, checks splits for
//! leakage, scores predictions, and aggregates the results:
//!
//! - [`corpus`]: UniMorph TSV parsing, inflection tables, statistics
//! - [`splitter`]: seeded form and lemma splits, verification, size deltas
//! - [`metrics`]: exact-match accuracy and Levenshtein distance
//! - [`baseline`]: a prefix/suffix rule inflector with optional memorization
//! - [`report`]: per-family aggregates and form-to-lemma drop records
//! - [`cli`]: the `lemmasplit` command line

pub mod baseline;
pub mod cli;
pub mod corpus;
pub mod files;
pub mod metrics;
pub mod report;
pub mod splitter;

pub use baseline::{extract_rule, train, BaselineError, RuleModel, TransductionRule};
pub use corpus::{
    dataset_stats, group_by_lemma, parse_unimorph, serialize, CorpusError, FeatureBundle,
    InflectionTable, LanguageDataset, ParseOptions, StatsRecord, Triplet,
};
pub use metrics::{evaluate, levenshtein, EvalOptions, EvalResult, MetricsError};
pub use report::{
    aggregate_by_family, drop_records, DropRecord, DropSummary, FamilyAggregate, ReportError,
};
pub use splitter::{
    compare_split_sizes, split, verify_split, Part, Proportions, SizeDelta, SplitError, SplitMode,
    SplitResult, SplitSpec, VerificationReport,
};
