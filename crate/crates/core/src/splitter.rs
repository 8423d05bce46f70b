//! Form-split and lemma-split partitioning.
//!
//! A split shuffles units (whole inflection tables in [`SplitMode::Lemma`],
//! distinct triplets in [`SplitMode::Form`]) with a generator derived only
//! from `(seed, language)`, then hands out the first `n_train` units to
//! train, the next `n_dev` to dev and the rest to test. Part sizes come from
//! largest-remainder apportionment over exact rationals.
//!
//! The random stream is fully pinned:
//!
//! 1. `key = SHA-256(seed as 8 little-endian bytes || language as UTF-8)`
//! 2. `rng = ChaCha20` seeded with `key`
//! 3. Fisher-Yates from the last index down to 1, drawing `j` uniformly from
//!    `0..=i` by rejection sampling on `next_u64`.
//!
//! [`RNG_ALGORITHM`] names this scheme in every provenance record.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use num_rational::Ratio;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{LanguageDataset, Triplet};

pub const RNG_ALGORITHM: &str = "sha256(seed_le64||language)/chacha20/fisher-yates-desc";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exact non-negative fraction.
pub type Fraction = Ratio<u128>;

const MAX_DECIMAL_DIGITS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Form,
    Lemma,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Form => "form",
            SplitMode::Lemma => "lemma",
        })
    }
}

impl FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "form" => Ok(SplitMode::Form),
            "lemma" => Ok(SplitMode::Lemma),
            other => Err(format!(
                "unknown split mode {other:?} (expected form or lemma)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Dev,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Dev, Part::Test];

    /// SIGMORPHON file extension.
    pub fn extension(self) -> &'static str {
        match self {
            Part::Train => "trn",
            Part::Dev => "dev",
            Part::Test => "tst",
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Dev => "dev",
            Part::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("invalid proportions: {0}")]
    InvalidProportions(String),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error(
        "cannot split {units} {unit_name} with proportions {proportions}: train would be empty"
    )]
    Infeasible {
        units: usize,
        unit_name: &'static str,
        proportions: String,
    },
    #[error("split results come from different inputs (checksums {a} and {b})")]
    MismatchedInput { a: String, b: String },
}

/// Train/dev/test fractions, validated to sum to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[String; 3]", into = "[String; 3]")]
pub struct Proportions {
    parts: [Fraction; 3],
}

impl Proportions {
    pub fn new(train: Fraction, dev: Fraction, test: Fraction) -> Result<Self, SplitError> {
        if train == Fraction::from_integer(0) {
            return Err(SplitError::InvalidProportions(
                "train proportion must be positive".into(),
            ));
        }
        let sum = train + dev + test;
        if sum != Fraction::from_integer(1) {
            return Err(SplitError::InvalidProportions(format!(
                "proportions sum to {sum}, not 1"
            )));
        }
        Ok(Proportions {
            parts: [train, dev, test],
        })
    }

    /// The 70/10/20 split used by the SIGMORPHON shared tasks.
    pub fn standard() -> Self {
        Proportions::new(Ratio::new(7, 10), Ratio::new(1, 10), Ratio::new(2, 10))
            .expect("70/10/20 sums to one")
    }

    /// Parses three comma-separated decimals (or `p/q` fractions), e.g.
    /// `0.7,0.1,0.2`. The sum is checked exactly.
    pub fn parse(text: &str) -> Result<Self, SplitError> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(SplitError::InvalidProportions(format!(
                "expected three comma-separated values, got {}",
                fields.len()
            )));
        }
        let mut parts = [Fraction::from_integer(0); 3];
        for (slot, field) in parts.iter_mut().zip(&fields) {
            *slot = parse_fraction(field)?;
        }
        Proportions::new(parts[0], parts[1], parts[2])
    }

    pub fn get(&self, part: Part) -> Fraction {
        self.parts[part as usize]
    }

    pub fn as_array(&self) -> [Fraction; 3] {
        self.parts
    }
}

impl Default for Proportions {
    fn default() -> Self {
        Proportions::standard()
    }
}

impl fmt::Display for Proportions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.parts;
        write!(f, "{a},{b},{c}")
    }
}

impl TryFrom<[String; 3]> for Proportions {
    type Error = SplitError;

    fn try_from(value: [String; 3]) -> Result<Self, Self::Error> {
        Proportions::parse(&value.join(","))
    }
}

impl From<Proportions> for [String; 3] {
    fn from(p: Proportions) -> Self {
        p.parts.map(|r| r.to_string())
    }
}

fn parse_fraction(field: &str) -> Result<Fraction, SplitError> {
    let bad = || SplitError::InvalidProportions(format!("{field:?} is not a non-negative decimal"));
    if let Some((num, den)) = field.split_once('/') {
        let num: u128 = num.trim().parse().map_err(|_| bad())?;
        let den: u128 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    let (int, frac) = field.split_once('.').unwrap_or((field, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    if frac.len() > MAX_DECIMAL_DIGITS || int.len() > MAX_DECIMAL_DIGITS {
        return Err(SplitError::InvalidProportions(format!(
            "{field:?} has more than {MAX_DECIMAL_DIGITS} digits"
        )));
    }
    let den = 10u128.pow(frac.len() as u32);
    let int: u128 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac: u128 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    Ok(Ratio::new(int * den + frac, den))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub proportions: Proportions,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub language: String,
    /// [`multiset_checksum`] of the input triplets.
    pub input_checksum: String,
    pub toolkit_version: String,
    pub rng: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl PartCounts {
    pub fn get(&self, part: Part) -> usize {
        match part {
            Part::Train => self.train,
            Part::Dev => self.dev,
            Part::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

impl From<[usize; 3]> for PartCounts {
    fn from([train, dev, test]: [usize; 3]) -> Self {
        PartCounts { train, dev, test }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub spec: SplitSpec,
    pub train: LanguageDataset,
    pub dev: LanguageDataset,
    pub test: LanguageDataset,
    pub provenance: Provenance,
    /// Units (tables or distinct triplets) per part.
    pub unit_counts: PartCounts,
}

impl SplitResult {
    pub fn part(&self, part: Part) -> &LanguageDataset {
        match part {
            Part::Train => &self.train,
            Part::Dev => &self.dev,
            Part::Test => &self.test,
        }
    }

    /// Triplets per part.
    pub fn example_counts(&self) -> PartCounts {
        PartCounts {
            train: self.train.len(),
            dev: self.dev.len(),
            test: self.test.len(),
        }
    }

    /// The sidecar record written next to the part files.
    pub fn sidecar(&self) -> SplitSidecar {
        SplitSidecar {
            language: self.provenance.language.clone(),
            family: self.train.family.clone(),
            mode: self.spec.mode,
            proportions: self.spec.proportions,
            seed: self.spec.seed,
            checksum: self.provenance.input_checksum.clone(),
            counts: self.example_counts(),
            unit_counts: self.unit_counts,
            toolkit_version: self.provenance.toolkit_version.clone(),
            rng: self.provenance.rng.clone(),
        }
    }
}

/// JSON provenance file accompanying `<lang>.trn/.dev/.tst`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSidecar {
    pub language: String,
    pub family: String,
    pub mode: SplitMode,
    pub proportions: Proportions,
    pub seed: u64,
    pub checksum: String,
    pub counts: PartCounts,
    pub unit_counts: PartCounts,
    pub toolkit_version: String,
    pub rng: String,
}

/// Largest-remainder apportionment of `total` units. Each part first gets
/// `floor(p * total)`; leftover units go to the largest fractional
/// remainders, ties broken train, then dev, then test.
pub fn apportion(total: usize, proportions: &Proportions) -> [usize; 3] {
    let n = Fraction::from_integer(total as u128);
    let quotas = proportions.parts.map(|p| p * n);
    let mut counts = quotas.map(|q| q.floor().to_integer() as usize);
    let leftover = total - counts.iter().sum::<usize>();

    let mut order = [0usize, 1, 2];
    // stable sort keeps train < dev < test among equal remainders
    order.sort_by(|&a, &b| quotas[b].fract().cmp(&quotas[a].fract()));
    for &i in order.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// SHA-256 over the sorted TSV lines of `triplets`: identifies a multiset of
/// records independently of order.
pub fn multiset_checksum<'a, I>(triplets: I) -> String
where
    I: IntoIterator<Item = &'a Triplet>,
{
    let mut lines: Vec<String> = triplets.into_iter().map(Triplet::to_tsv_line).collect();
    lines.sort_unstable();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The split generator for one `(seed, language)` pair.
pub fn split_rng(seed: u64, language: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(language.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    // reject the low 2^64 mod bound values so every residue is equally likely
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return x % bound;
        }
    }
}

/// Fisher-Yates shuffle driven by [`split_rng`].
pub fn deterministic_shuffle<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = uniform_below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Assigns each input triplet to a unit; returns per-triplet unit ids and
/// the number of units.
fn units_of(dataset: &LanguageDataset, mode: SplitMode) -> (Vec<usize>, usize) {
    match mode {
        SplitMode::Lemma => {
            let mut ids: HashMap<&str, usize> = HashMap::new();
            let assignment = dataset
                .triplets
                .iter()
                .map(|t| {
                    let next = ids.len();
                    *ids.entry(t.lemma()).or_insert(next)
                })
                .collect();
            (assignment, ids.len())
        }
        SplitMode::Form => {
            // identical triplets form one unit so they never straddle parts
            let mut ids: HashMap<&Triplet, usize> = HashMap::new();
            let assignment = dataset
                .triplets
                .iter()
                .map(|t| {
                    let next = ids.len();
                    *ids.entry(t).or_insert(next)
                })
                .collect();
            (assignment, ids.len())
        }
    }
}

/// Partitions `dataset` according to `spec`. Identical inputs always give an
/// identical result. Each part lists its triplets in input order.
pub fn split(dataset: &LanguageDataset, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    if dataset.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    let (unit_of, n_units) = units_of(dataset, spec.mode);
    let counts = apportion(n_units, &spec.proportions);
    if counts[0] == 0 {
        return Err(SplitError::Infeasible {
            units: n_units,
            unit_name: match spec.mode {
                SplitMode::Lemma => "tables",
                SplitMode::Form => "triplets",
            },
            proportions: spec.proportions.to_string(),
        });
    }

    let mut order: Vec<usize> = (0..n_units).collect();
    let mut rng = split_rng(spec.seed, &dataset.language);
    deterministic_shuffle(&mut order, &mut rng);

    let mut part_of_unit = vec![Part::Train; n_units];
    for (pos, &unit) in order.iter().enumerate() {
        part_of_unit[unit] = if pos < counts[0] {
            Part::Train
        } else if pos < counts[0] + counts[1] {
            Part::Dev
        } else {
            Part::Test
        };
    }

    let mut parts: [Vec<Triplet>; 3] = Default::default();
    for (t, &unit) in dataset.triplets.iter().zip(&unit_of) {
        parts[part_of_unit[unit] as usize].push(t.clone());
    }
    let [train, dev, test] = parts.map(|triplets| {
        LanguageDataset::new(dataset.language.clone(), dataset.family.clone(), triplets)
    });

    Ok(SplitResult {
        spec: *spec,
        train,
        dev,
        test,
        provenance: Provenance {
            language: dataset.language.clone(),
            input_checksum: multiset_checksum(&dataset.triplets),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            rng: RNG_ALGORITHM.to_string(),
        },
        unit_counts: counts.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A lemma with forms in more than one part.
    LemmaOverlap { lemma: String, parts: Vec<Part> },
    /// An identical record in more than one part.
    TripletOverlap { triplet: String, parts: Vec<Part> },
    /// The parts do not add up to the recorded input.
    Incomplete {
        expected_checksum: String,
        actual_checksum: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |parts: &[Part]| {
            parts
                .iter()
                .map(Part::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Violation::LemmaOverlap { lemma, parts } => {
                write!(f, "lemma {lemma:?} appears in {}", join(parts))
            }
            Violation::TripletOverlap { triplet, parts } => {
                write!(f, "triplet {triplet:?} appears in {}", join(parts))
            }
            Violation::Incomplete {
                expected_checksum,
                actual_checksum,
            } => write!(
                f,
                "parts do not reproduce the input (checksum {actual_checksum}, expected {expected_checksum})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: SplitMode,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

pub fn verify_split(result: &SplitResult) -> VerificationReport {
    verify_parts(
        result.spec.mode,
        [&result.train, &result.dev, &result.test],
        Some(&result.provenance.input_checksum),
    )
}

/// Checks disjointness of three parts, and completeness against
/// `expected_checksum` when one is known.
pub fn verify_parts(
    mode: SplitMode,
    parts: [&LanguageDataset; 3],
    expected_checksum: Option<&str>,
) -> VerificationReport {
    let mut violations = match mode {
        SplitMode::Lemma => overlaps(parts, Triplet::lemma)
            .into_iter()
            .map(|(lemma, parts)| Violation::LemmaOverlap {
                lemma: lemma.to_owned(),
                parts,
            })
            .collect::<Vec<_>>(),
        SplitMode::Form => overlaps(parts, |t| t)
            .into_iter()
            .map(|(triplet, parts)| Violation::TripletOverlap {
                triplet: triplet.to_tsv_line(),
                parts,
            })
            .collect(),
    };
    if let Some(expected) = expected_checksum {
        let actual = multiset_checksum(parts.iter().flat_map(|p| p.triplets.iter()));
        if actual != expected {
            violations.push(Violation::Incomplete {
                expected_checksum: expected.to_owned(),
                actual_checksum: actual,
            });
        }
    }
    VerificationReport {
        mode,
        passed: violations.is_empty(),
        violations,
    }
}

/// Keys occurring in more than one part, in order of first occurrence.
fn overlaps<'a, K, F>(parts: [&'a LanguageDataset; 3], key: F) -> Vec<(K, Vec<Part>)>
where
    K: Hash + Eq + Copy,
    F: Fn(&'a Triplet) -> K,
{
    let mut first_seen: Vec<K> = Vec::new();
    let mut seen_in: HashMap<K, Vec<Part>> = HashMap::new();
    for (part, dataset) in Part::ALL.into_iter().zip(parts) {
        for t in &dataset.triplets {
            let k = key(t);
            let entry = seen_in.entry(k).or_insert_with(|| {
                first_seen.push(k);
                Vec::new()
            });
            if entry.last() != Some(&part) {
                entry.push(part);
            }
        }
    }
    first_seen
        .into_iter()
        .filter_map(|k| {
            let parts = seen_in.remove(&k)?;
            (parts.len() > 1).then_some((k, parts))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartDelta {
    pub part: Part,
    pub a: usize,
    pub b: usize,
    /// `(b - a) / a * 100`; `None` when `a` is zero.
    pub delta_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDelta {
    pub language: String,
    pub parts: Vec<PartDelta>,
}

impl SizeDelta {
    pub fn get(&self, part: Part) -> &PartDelta {
        &self.parts[part as usize]
    }
}

/// Relative change in example counts per part, `b` against `a`.
pub fn compare_split_sizes(a: &SplitResult, b: &SplitResult) -> Result<SizeDelta, SplitError> {
    if a.provenance.input_checksum != b.provenance.input_checksum {
        return Err(SplitError::MismatchedInput {
            a: a.provenance.input_checksum.clone(),
            b: b.provenance.input_checksum.clone(),
        });
    }
    Ok(size_delta(
        &a.provenance.language,
        a.example_counts(),
        b.example_counts(),
    ))
}

pub fn size_delta(language: &str, a: PartCounts, b: PartCounts) -> SizeDelta {
    let parts = Part::ALL
        .into_iter()
        .map(|part| {
            let (ca, cb) = (a.get(part), b.get(part));
            let delta_percent = (ca > 0).then(|| (cb as f64 - ca as f64) / ca as f64 * 100.0);
            PartDelta {
                part,
                a: ca,
                b: cb,
                delta_percent,
            }
        })
        .collect();
    SizeDelta {
        language: language.to_owned(),
        parts,
    }
}

/// Unweighted mean of the per-language deltas for `part`, skipping
/// languages where the delta is undefined.
pub fn mean_delta(deltas: &[SizeDelta], part: Part) -> Option<f64> {
    let values: Vec<f64> = deltas
        .iter()
        .filter_map(|d| d.get(part).delta_percent)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
