//! A non-neural prefix/suffix rewriting inflector.
//!
//! Every training pair `(lemma, form)` is aligned on its longest common
//! substring; what precedes the shared stem becomes a prefix rewrite and
//! what follows it a suffix rewrite, e.g. `lachen -> gelacht` gives
//! `"" -> "ge"` and `"en" -> "t"` around the stem `lach`. Rules are stored
//! per feature bundle and tried most specific first.
//!
//! With memorization enabled the model also keeps every training form
//! keyed by `(lemma, bundle)`, plus form-to-form rules learned between the
//! cells of each training table. A query for a lemma that was seen in
//! training is then answered from that lemma's own stored forms, which is
//! exactly the shortcut a form split leaves open and a lemma split closes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FeatureBundle, LanguageDataset};

/// Source cells per table used to learn form-to-form rules. Keeps training
/// linear in table size for languages with very large paradigms.
pub const TRANSFER_SOURCE_LIMIT: usize = 16;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("invalid model file: {0}")]
    Model(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransductionRule {
    /// Order-insensitive bundle key, see [`FeatureBundle::key`].
    pub bundle: String,
    pub lemma_prefix: String,
    pub form_prefix: String,
    pub lemma_suffix: String,
    pub form_suffix: String,
    pub support: usize,
}

impl TransductionRule {
    pub fn matches(&self, lemma: &str) -> bool {
        lemma.len() >= self.lemma_prefix.len() + self.lemma_suffix.len()
            && lemma.starts_with(&self.lemma_prefix)
            && lemma.ends_with(&self.lemma_suffix)
    }

    /// Replaces the prefix and suffix, keeping the middle.
    pub fn apply(&self, lemma: &str) -> Option<String> {
        if !self.matches(lemma) {
            return None;
        }
        let middle = &lemma[self.lemma_prefix.len()..lemma.len() - self.lemma_suffix.len()];
        Some(format!(
            "{}{}{}",
            self.form_prefix, middle, self.form_suffix
        ))
    }

    fn edit(&self) -> (&str, &str, &str, &str) {
        (
            &self.lemma_prefix,
            &self.form_prefix,
            &self.lemma_suffix,
            &self.form_suffix,
        )
    }

    /// Rule-list order: longest lemma suffix, then highest support, then
    /// lexicographic.
    fn priority(&self, other: &Self) -> Ordering {
        other
            .lemma_suffix
            .chars()
            .count()
            .cmp(&self.lemma_suffix.chars().count())
            .then(other.support.cmp(&self.support))
            .then_with(|| self.edit().cmp(&other.edit()))
    }
}

/// Longest common substring of `a` and `b`, as `(start_in_a, start_in_b,
/// len)` in chars. Ties go to the leftmost start in `a`, then in `b`.
pub fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            curr[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                0
            };
            // scanning i, j upwards meets the leftmost match of each length first
            if curr[j] > best.2 {
                best = (i - curr[j], j - curr[j], curr[j]);
            }
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    best
}

pub fn extract_rule(lemma: &str, form: &str, bundle: &FeatureBundle) -> TransductionRule {
    extract_keyed(lemma, form, bundle.key())
}

fn extract_keyed(lemma: &str, form: &str, bundle: String) -> TransductionRule {
    let l: Vec<char> = lemma.chars().collect();
    let f: Vec<char> = form.chars().collect();
    let (ls, fs, len) = longest_common_substring(&l, &f);
    let s = |chars: &[char]| chars.iter().collect::<String>();
    if len == 0 {
        return TransductionRule {
            bundle,
            lemma_prefix: String::new(),
            form_prefix: String::new(),
            lemma_suffix: lemma.to_owned(),
            form_suffix: form.to_owned(),
            support: 1,
        };
    }
    TransductionRule {
        bundle,
        lemma_prefix: s(&l[..ls]),
        form_prefix: s(&f[..fs]),
        lemma_suffix: s(&l[ls + len..]),
        form_suffix: s(&f[fs + len..]),
        support: 1,
    }
}

/// Merges identical rules, summing support, and sorts into lookup order.
fn merge_rules<I>(rules: I) -> Vec<TransductionRule>
where
    I: IntoIterator<Item = TransductionRule>,
{
    let mut merged: HashMap<TransductionRule, usize> = HashMap::new();
    for mut rule in rules {
        let support = std::mem::replace(&mut rule.support, 0);
        *merged.entry(rule).or_default() += support;
    }
    let mut list: Vec<TransductionRule> = merged
        .into_iter()
        .map(|(mut rule, support)| {
            rule.support = support;
            rule
        })
        .collect();
    list.sort_by(TransductionRule::priority);
    list
}

/// Exact training forms plus the form-to-form rules between cells.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memo {
    /// lemma -> bundle key -> form
    pub forms: BTreeMap<String, BTreeMap<String, String>>,
    /// source bundle key -> target bundle key -> rules rewriting the source
    /// form into the target form
    pub transfer: BTreeMap<String, BTreeMap<String, Vec<TransductionRule>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleModel {
    pub rules: BTreeMap<String, Vec<TransductionRule>>,
    pub memo: Option<Memo>,
}

/// Two different forms seen for one `(lemma, bundle)`; `kept` wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoConflict {
    pub lemma: String,
    pub bundle: String,
    pub replaced: String,
    pub kept: String,
}

pub fn train(dataset: &LanguageDataset, memorize: bool) -> Result<RuleModel, BaselineError> {
    let (model, conflicts) = train_with_conflicts(dataset, memorize)?;
    for c in &conflicts {
        log::warn!(
            "{}: {:?} {} has forms {:?} and {:?}; keeping {:?}",
            dataset.language,
            c.lemma,
            c.bundle,
            c.replaced,
            c.kept,
            c.kept
        );
    }
    Ok(model)
}

pub fn train_with_conflicts(
    dataset: &LanguageDataset,
    memorize: bool,
) -> Result<(RuleModel, Vec<MemoConflict>), BaselineError> {
    if dataset.is_empty() {
        return Err(BaselineError::EmptyDataset);
    }

    let mut by_bundle: BTreeMap<String, Vec<TransductionRule>> = BTreeMap::new();
    for t in &dataset.triplets {
        let rule = extract_rule(t.lemma(), t.form(), t.features());
        by_bundle.entry(rule.bundle.clone()).or_default().push(rule);
    }
    let rules = by_bundle
        .into_iter()
        .map(|(key, list)| (key, merge_rules(list)))
        .collect();

    let mut conflicts = Vec::new();
    let memo = memorize.then(|| {
        let mut forms: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for t in &dataset.triplets {
            let key = t.features().key();
            let cells = forms.entry(t.lemma().to_owned()).or_default();
            if let Some(old) = cells.insert(key.clone(), t.form().to_owned()) {
                if old != t.form() {
                    conflicts.push(MemoConflict {
                        lemma: t.lemma().to_owned(),
                        bundle: key,
                        replaced: old,
                        kept: t.form().to_owned(),
                    });
                }
            }
        }
        let transfer = learn_transfer(&forms);
        Memo { forms, transfer }
    });

    Ok((RuleModel { rules, memo }, conflicts))
}

fn learn_transfer(
    forms: &BTreeMap<String, BTreeMap<String, String>>,
) -> BTreeMap<String, BTreeMap<String, Vec<TransductionRule>>> {
    let mut raw: BTreeMap<String, BTreeMap<String, Vec<TransductionRule>>> = BTreeMap::new();
    for cells in forms.values() {
        for (src_key, src_form) in cells.iter().take(TRANSFER_SOURCE_LIMIT) {
            for (tgt_key, tgt_form) in cells {
                if tgt_key == src_key {
                    continue;
                }
                let rule = extract_keyed(src_form, tgt_form, tgt_key.clone());
                raw.entry(src_key.clone())
                    .or_default()
                    .entry(tgt_key.clone())
                    .or_default()
                    .push(rule);
            }
        }
    }
    raw.into_iter()
        .map(|(src, targets)| {
            let targets = targets
                .into_iter()
                .map(|(tgt, list)| (tgt, merge_rules(list)))
                .collect();
            (src, targets)
        })
        .collect()
}

fn first_match(rules: &[TransductionRule], input: &str) -> Option<(String, usize)> {
    rules
        .iter()
        .find_map(|r| r.apply(input).map(|out| (out, r.support)))
}

impl RuleModel {
    pub fn is_memorizing(&self) -> bool {
        self.memo.is_some()
    }

    /// Predicts the form of `lemma` for `bundle`:
    ///
    /// 1. the memorized form, if this exact cell was seen;
    /// 2. otherwise, with memorization, rewrite the lemma's other memorized
    ///    forms with form-to-form rules, voting by rule support;
    /// 3. otherwise the first matching lemma-to-form rule for the bundle;
    /// 4. otherwise the lemma itself.
    pub fn predict(&self, lemma: &str, bundle: &FeatureBundle) -> String {
        let key = bundle.key();
        if let Some(memo) = &self.memo {
            if let Some(cells) = memo.forms.get(lemma) {
                if let Some(form) = cells.get(&key) {
                    return form.clone();
                }
                if let Some(form) = Self::from_siblings(memo, cells, &key) {
                    return form;
                }
            }
        }
        self.rules
            .get(&key)
            .and_then(|rules| first_match(rules, lemma))
            .map(|(form, _)| form)
            .unwrap_or_else(|| lemma.to_owned())
    }

    fn from_siblings(
        memo: &Memo,
        cells: &BTreeMap<String, String>,
        target: &str,
    ) -> Option<String> {
        let mut votes: BTreeMap<String, usize> = BTreeMap::new();
        for (src_key, src_form) in cells {
            let rules = memo.transfer.get(src_key).and_then(|t| t.get(target));
            if let Some((form, support)) = rules.and_then(|r| first_match(r, src_form)) {
                *votes.entry(form).or_default() += support;
            }
        }
        // BTreeMap iteration makes the lexicographically smallest form win ties
        votes
            .into_iter()
            .fold(
                None,
                |best: Option<(String, usize)>, (form, score)| match best {
                    Some((_, s)) if s >= score => best,
                    _ => Some((form, score)),
                },
            )
            .map(|(form, _)| form)
    }

    pub fn predict_dataset(&self, dataset: &LanguageDataset) -> Vec<String> {
        dataset
            .triplets
            .iter()
            .map(|t| self.predict(t.lemma(), t.features()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Loads a model, restoring rule-list order.
    pub fn from_json(text: &str) -> Result<Self, BaselineError> {
        let mut model: RuleModel = serde_json::from_str(text)?;
        for list in model.rules.values_mut() {
            list.sort_by(TransductionRule::priority);
        }
        if let Some(memo) = &mut model.memo {
            for list in memo.transfer.values_mut().flat_map(|t| t.values_mut()) {
                list.sort_by(TransductionRule::priority);
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Triplet;

    fn b(s: &str) -> FeatureBundle {
        FeatureBundle::parse(s).unwrap()
    }

    fn ds(rows: &[(&str, &str, &str)]) -> LanguageDataset {
        let triplets = rows
            .iter()
            .map(|(l, f, t)| Triplet::new(*l, *f, b(t)).unwrap())
            .collect();
        LanguageDataset::new("deu", "Germanic", triplets)
    }

    /// Brute force over all substring pairs with the same tie-breaking.
    fn lcs_oracle(a: &str, b: &str) -> (usize, usize, usize) {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut best = (0, 0, 0);
        for len in (1..=a.len().min(b.len())).rev() {
            for i in 0..=a.len() - len {
                for j in 0..=b.len() - len {
                    if a[i..i + len] == b[j..j + len] {
                        return (i, j, len);
                    }
                }
            }
        }
        best.2 = 0;
        best
    }

    fn rule_parts(r: &TransductionRule) -> (&str, &str, &str, &str) {
        r.edit()
    }

    #[test]
    fn lcs_matches_brute_force() {
        let pairs = [
            ("lachen", "gelacht"),
            ("abab", "baba"),
            ("go", "went"),
            ("aaa", "aa"),
            ("", "x"),
            ("Mädchen", "Mädchens"),
            ("xyzabc", "abcxyz"),
        ];
        for (a, bb) in pairs {
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = bb.chars().collect();
            assert_eq!(
                longest_common_substring(&ac, &bc),
                lcs_oracle(a, bb),
                "{a} {bb}"
            );
        }
    }

    #[test]
    fn extract_examples() {
        let r = extract_rule("Kind", "Kinder", &b("N;NOM;PL"));
        assert_eq!(rule_parts(&r), ("", "", "", "er"));
        assert_eq!(r.support, 1);

        let r = extract_rule("lachen", "gelacht", &b("V.PTCP;PST"));
        assert_eq!(rule_parts(&r), ("", "ge", "en", "t"));

        let r = extract_rule("go", "went", &b("V;PST"));
        assert_eq!(rule_parts(&r), ("", "", "go", "went"));
        assert_eq!(r.apply("go").as_deref(), Some("went"));
        assert_eq!(r.apply("undergo").as_deref(), Some("underwent"));
        assert_eq!(r.apply("gone"), None);
    }

    #[test]
    fn extract_leftmost_in_lemma_on_ties() {
        // "ab" and "ba" are both length-2 substrings shared by the pair
        let r = extract_rule("abxba", "ba_ab", &b("X"));
        assert_eq!(rule_parts(&r), ("", "ba_", "xba", ""));
    }

    #[test]
    fn train_merges_and_memorizes() {
        let model = train(&ds(&[("Kind", "Kinder", "N;NOM;PL")]), false).unwrap();
        let rules = &model.rules["N;NOM;PL"];
        assert_eq!(rules.len(), 1);
        assert_eq!(
            (rule_parts(&rules[0]), rules[0].support),
            (("", "", "", "er"), 1)
        );
        assert!(model.memo.is_none());

        let model = train(
            &ds(&[
                ("Kind", "Kinder", "N;NOM;PL"),
                ("Kind", "Kinder", "N;NOM;PL"),
            ]),
            false,
        )
        .unwrap();
        assert_eq!(model.rules["N;NOM;PL"][0].support, 2);

        let model = train(&ds(&[("Kind", "Kinder", "N;NOM;PL")]), true).unwrap();
        let memo = model.memo.as_ref().unwrap();
        assert_eq!(memo.forms["Kind"]["N;NOM;PL"], "Kinder");
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            train(&ds(&[]), true),
            Err(BaselineError::EmptyDataset)
        ));
    }

    #[test]
    fn memo_conflicts_last_wins() {
        let data = ds(&[
            ("x", "y1", "N;PL"),
            ("x", "y2", "N;PL"),
            ("x", "y2", "N;PL"),
        ]);
        let (model, conflicts) = train_with_conflicts(&data, true).unwrap();
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kept, "y2");
        assert_eq!(model.predict("x", &b("N;PL")), "y2");
    }

    #[test]
    fn predict_examples() {
        let data = ds(&[("Kind", "Kinder", "N;NOM;PL")]);
        let memo = train(&data, true).unwrap();
        assert_eq!(memo.predict("Kind", &b("N;NOM;PL")), "Kinder");
        assert_eq!(memo.predict("Kind", &b("PL;N;NOM")), "Kinder");

        let rules = train(&data, false).unwrap();
        assert_eq!(rules.predict("Hund", &b("N;NOM;PL")), "Hunder");
        assert_eq!(rules.predict("Kind", &b("N;GEN;SG")), "Kind");
    }

    #[test]
    fn rule_order_prefers_longer_suffix_then_support() {
        let data = ds(&[
            ("Hund", "Hunde", "N;PL"),
            ("Tag", "Tage", "N;PL"),
            ("Frau", "Frauen", "N;PL"),
            ("Blume", "Blumen", "N;PL"),
            ("Katze", "Katzen", "N;PL"),
            ("Lampe", "Lampen", "N;PL"),
            ("Ei", "Eier", "N;PL"),
            ("Museum", "Museen", "N;PL"),
        ]);
        let model = train(&data, false).unwrap();
        let suffixes: Vec<(&str, &str, usize)> = model.rules["N;PL"]
            .iter()
            .map(|r| (r.lemma_suffix.as_str(), r.form_suffix.as_str(), r.support))
            .collect();
        assert_eq!(
            suffixes,
            vec![
                ("um", "en", 1),
                ("", "n", 3),
                ("", "e", 2),
                ("", "en", 1),
                ("", "er", 1)
            ]
        );
        assert_eq!(model.predict("Rose", &b("N;PL")), "Rosen");
        assert_eq!(model.predict("Album", &b("N;PL")), "Alben");
    }

    #[test]
    fn siblings_reveal_allomorph() {
        let data = ds(&[
            ("Kind", "Kinder", "N;NOM;PL"),
            ("Kind", "Kindern", "N;DAT;PL"),
            ("Frau", "Frauen", "N;NOM;PL"),
            ("Frau", "Frauenn", "N;DAT;PL"),
            ("Auto", "Autos", "N;NOM;PL"),
            ("Auto", "Autosn", "N;DAT;PL"),
            ("Bild", "Bilder", "N;NOM;PL"),
        ]);
        let memo = train(&data, true).unwrap();
        assert_eq!(memo.predict("Bild", &b("N;DAT;PL")), "Bildern");
        let rules = train(&data, false).unwrap();
        // rule-only model cannot tell which plural Bild takes
        assert_ne!(rules.predict("Bild", &b("N;DAT;PL")), "Bildern");
    }

    #[test]
    fn json_round_trip() {
        let data = ds(&[
            ("Kind", "Kinder", "N;NOM;PL"),
            ("Kind", "Kindern", "N;DAT;PL"),
            ("lachen", "gelacht", "V.PTCP;PST"),
        ]);
        let model = train(&data, true).unwrap();
        let back = RuleModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(RuleModel::from_json("{").is_err());
    }
}
