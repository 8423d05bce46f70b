//! Python bindings: `import lemmasplit_py`.
//!
//! Records that are plain data on the Rust side (statistics, evaluation
//! results, reports) cross the boundary as dicts and lists.

use std::collections::HashMap;
use std::path::PathBuf;

use lemmasplit::corpus::{self, FeatureBundle, LanguageDataset, ParseOptions, Triplet};
use lemmasplit::splitter::{self, Part, Proportions, SplitMode, SplitSpec};
use lemmasplit::{baseline, files, metrics, report};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(value_error)
}

fn parse_mode(mode: &str) -> PyResult<SplitMode> {
    mode.parse().map_err(PyValueError::new_err)
}

fn parse_bundle(features: &str) -> PyResult<FeatureBundle> {
    FeatureBundle::parse(features).map_err(value_error)
}

/// The triplets of one language.
#[pyclass(name = "Dataset", module = "lemmasplit_py", frozen)]
struct PyDataset {
    inner: LanguageDataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from `(lemma, form, features)` tuples.
    #[new]
    #[pyo3(signature = (language, triplets, family = "misc", normalize = true))]
    fn new(
        language: &str,
        triplets: Vec<(String, String, String)>,
        family: &str,
        normalize: bool,
    ) -> PyResult<Self> {
        let triplets = triplets
            .into_iter()
            .map(|(lemma, form, features)| {
                let t = Triplet::new(lemma, form, parse_bundle(&features)?)
                    .map_err(PyValueError::new_err)?;
                Ok(if normalize { t.nfc() } else { t })
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyDataset {
            inner: LanguageDataset::new(language, family, triplets),
        })
    }

    /// Parses UniMorph TSV text.
    #[staticmethod]
    #[pyo3(signature = (text, language, family = "misc", normalize = true))]
    fn parse(text: &str, language: &str, family: &str, normalize: bool) -> PyResult<Self> {
        let inner = corpus::parse_unimorph(
            text.as_bytes(),
            language,
            family,
            ParseOptions { normalize },
        )
        .map_err(value_error)?;
        Ok(PyDataset { inner })
    }

    /// Reads a UniMorph TSV file; the language defaults to the file stem.
    #[staticmethod]
    #[pyo3(signature = (path, language = None, family = "misc", normalize = true))]
    fn read(
        path: PathBuf,
        language: Option<String>,
        family: &str,
        normalize: bool,
    ) -> PyResult<Self> {
        let language = language.unwrap_or_else(|| files::language_from_path(&path));
        let inner = files::read_dataset(&path, &language, family, ParseOptions { normalize })
            .map_err(value_error)?;
        Ok(PyDataset { inner })
    }

    #[getter]
    fn language(&self) -> &str {
        &self.inner.language
    }

    #[getter]
    fn family(&self) -> &str {
        &self.inner.family
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(language={:?}, family={:?}, triplets={})",
            self.inner.language,
            self.inner.family,
            self.inner.len()
        )
    }

    /// `(lemma, form, features)` tuples in file order.
    fn triplets(&self) -> Vec<(String, String, String)> {
        self.inner
            .triplets
            .iter()
            .map(|t| {
                (
                    t.lemma().to_owned(),
                    t.form().to_owned(),
                    t.features().to_string(),
                )
            })
            .collect()
    }

    fn to_tsv(&self) -> String {
        corpus::serialize(&self.inner)
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &corpus::dataset_stats(&self.inner))
    }
}

/// A train/dev/test partition with its provenance.
#[pyclass(name = "SplitResult", module = "lemmasplit_py", frozen)]
struct PySplitResult {
    inner: splitter::SplitResult,
}

#[pymethods]
impl PySplitResult {
    #[getter]
    fn train(&self) -> PyDataset {
        self.part(Part::Train)
    }

    #[getter]
    fn dev(&self) -> PyDataset {
        self.part(Part::Dev)
    }

    #[getter]
    fn test(&self) -> PyDataset {
        self.part(Part::Test)
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.spec.mode.to_string()
    }

    /// Tables (lemma mode) or distinct triplets (form mode) per part.
    #[getter]
    fn unit_counts(&self) -> (usize, usize, usize) {
        let c = self.inner.unit_counts;
        (c.train, c.dev, c.test)
    }

    #[getter]
    fn checksum(&self) -> &str {
        &self.inner.provenance.input_checksum
    }

    /// The provenance record written as `<lang>.split.json`.
    fn sidecar<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.sidecar())
    }

    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &splitter::verify_split(&self.inner))
    }

    fn __repr__(&self) -> String {
        let c = self.inner.unit_counts;
        format!(
            "SplitResult(language={:?}, mode={}, units={}/{}/{})",
            self.inner.provenance.language, self.inner.spec.mode, c.train, c.dev, c.test
        )
    }
}

impl PySplitResult {
    fn part(&self, part: Part) -> PyDataset {
        PyDataset {
            inner: self.inner.part(part).clone(),
        }
    }
}

/// Splits a dataset by `"form"` or `"lemma"`.
#[pyfunction]
#[pyo3(signature = (dataset, mode, seed, proportions = "0.7,0.1,0.2"))]
fn split(dataset: &PyDataset, mode: &str, seed: u64, proportions: &str) -> PyResult<PySplitResult> {
    let spec = SplitSpec {
        mode: parse_mode(mode)?,
        proportions: Proportions::parse(proportions).map_err(value_error)?,
        seed,
    };
    let inner = splitter::split(&dataset.inner, &spec).map_err(value_error)?;
    Ok(PySplitResult { inner })
}

/// Checks three parts for leakage, and for completeness when the input
/// checksum is given.
#[pyfunction]
#[pyo3(signature = (mode, train, dev, test, checksum = None))]
fn verify_parts<'py>(
    py: Python<'py>,
    mode: &str,
    train: &PyDataset,
    dev: &PyDataset,
    test: &PyDataset,
    checksum: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = splitter::verify_parts(
        parse_mode(mode)?,
        [&train.inner, &dev.inner, &test.inner],
        checksum,
    );
    to_py(py, &report)
}

#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    metrics::levenshtein(a, b)
}

/// Scores predictions (one per gold triplet, in order).
#[pyfunction]
#[pyo3(signature = (gold, predictions, system, mode = "form", normalize = true))]
fn evaluate<'py>(
    py: Python<'py>,
    gold: &PyDataset,
    predictions: Vec<String>,
    system: &str,
    mode: &str,
    normalize: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let result = metrics::evaluate(
        &gold.inner,
        &predictions,
        system,
        parse_mode(mode)?,
        metrics::EvalOptions { normalize },
    )
    .map_err(value_error)?;
    to_py(py, &result)
}

/// The edit-rule baseline.
#[pyclass(name = "RuleModel", module = "lemmasplit_py", frozen)]
struct PyRuleModel {
    inner: baseline::RuleModel,
}

#[pymethods]
impl PyRuleModel {
    #[staticmethod]
    #[pyo3(signature = (dataset, memorize = false))]
    fn train(dataset: &PyDataset, memorize: bool) -> PyResult<Self> {
        let inner = baseline::train(&dataset.inner, memorize).map_err(value_error)?;
        Ok(PyRuleModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = baseline::RuleModel::from_json(text).map_err(value_error)?;
        Ok(PyRuleModel { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn memorizing(&self) -> bool {
        self.inner.is_memorizing()
    }

    fn predict(&self, lemma: &str, features: &str) -> PyResult<String> {
        Ok(self.inner.predict(lemma, &parse_bundle(features)?))
    }

    /// One prediction per triplet of `dataset`; its forms are ignored.
    fn predict_dataset(&self, dataset: &PyDataset) -> Vec<String> {
        self.inner.predict_dataset(&dataset.inner)
    }
}

/// Pairs form-split and lemma-split results (lists of result dicts as
/// returned by `evaluate`) into drop records and macro-averaged drops.
#[pyfunction]
#[pyo3(signature = (form, lemma, train_sizes, families = None))]
fn drop_records<'py>(
    form: &Bound<'py, PyAny>,
    lemma: &Bound<'py, PyAny>,
    train_sizes: HashMap<String, usize>,
    families: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let py = form.py();
    let form: Vec<metrics::EvalResult> = from_py(form)?;
    let lemma: Vec<metrics::EvalResult> = from_py(lemma)?;
    let summary = report::drop_records(&form, &lemma, &train_sizes, &families.unwrap_or_default())
        .map_err(value_error)?;
    to_py(py, &summary)
}

#[pyfunction]
#[pyo3(signature = (results, families, min_languages = report::DEFAULT_MIN_LANGUAGES))]
fn aggregate_by_family<'py>(
    results: &Bound<'py, PyAny>,
    families: HashMap<String, String>,
    min_languages: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let py = results.py();
    let results: Vec<metrics::EvalResult> = from_py(results)?;
    let aggregates =
        report::aggregate_by_family(&results, &families, min_languages).map_err(value_error)?;
    to_py(py, &aggregates)
}

/// Renders aggregates as the `family<TAB>form<TAB>lemma` table.
#[pyfunction]
#[pyo3(signature = (aggregates, abbreviations = None))]
fn render_family_table(
    aggregates: &Bound<'_, PyAny>,
    abbreviations: Option<HashMap<String, String>>,
) -> PyResult<String> {
    let aggregates: Vec<report::FamilyAggregate> = from_py(aggregates)?;
    Ok(report::render_family_table(
        &aggregates,
        &abbreviations.unwrap_or_default(),
    ))
}

#[pymodule]
fn lemmasplit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("RNG_ALGORITHM", splitter::RNG_ALGORITHM)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySplitResult>()?;
    m.add_class::<PyRuleModel>()?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(verify_parts, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(drop_records, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_by_family, m)?)?;
    m.add_function(wrap_pyfunction!(render_family_table, m)?)?;
    Ok(())
}
