//! Generators and reference implementations shared by the integration
//! suites. Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use lemmasplit::{FeatureBundle, LanguageDataset, Triplet};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const CASES: [&str; 4] = ["NOM", "ACC", "GEN", "DAT"];

pub fn bundle(s: &str) -> FeatureBundle {
    FeatureBundle::parse(s).unwrap()
}

pub fn triplet(lemma: &str, form: &str, tags: &str) -> Triplet {
    Triplet::new(lemma, form, bundle(tags)).unwrap()
}

/// A dataset of `lemmas` tables with between 1 and `max_slots` distinct
/// cells each. No two triplets are identical.
pub fn synthetic_dataset(
    rng: &mut StdRng,
    language: &str,
    lemmas: usize,
    max_slots: usize,
) -> LanguageDataset {
    let mut triplets = Vec::new();
    for l in 0..lemmas {
        let lemma = format!("{}{}", random_word(rng, 2), l);
        let slots = rng.random_range(1..=max_slots);
        for s in 0..slots {
            let form = format!("{lemma}{}", random_word(rng, 1));
            triplets.push(triplet(&lemma, &form, &format!("N;C{s}")));
        }
    }
    // interleave tables so first-occurrence order is not the table order
    for i in (1..triplets.len()).rev() {
        let j = rng.random_range(0..=i);
        triplets.swap(i, j);
    }
    LanguageDataset::new(language, "misc", triplets)
}

pub fn random_word(rng: &mut StdRng, syllables: usize) -> String {
    const C: &[char] = &['b', 'd', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
    const V: &[char] = &['a', 'e', 'i', 'o', 'u', 'ä', 'ö'];
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(C[rng.random_range(0..C.len())]);
        w.push(V[rng.random_range(0..V.len())]);
    }
    w
}

/// Characters from several scripts, including combining marks, so that
/// multi-byte scalars and repeated characters both occur often.
pub fn random_unicode(rng: &mut StdRng, max_len: usize) -> String {
    const POOL: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'ä', 'ß', '\u{301}', '\u{308}', 'ж', 'я', 'ש', 'א', '中', '文',
        '😀', '🇩', ' ',
    ];
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                // any scalar value outside the surrogate range
                loop {
                    if let Some(c) = char::from_u32(rng.random_range(0..0x11_0000)) {
                        break c;
                    }
                }
            } else {
                POOL[rng.random_range(0..POOL.len())]
            }
        })
        .collect()
}

/// Levenshtein distance straight from its recursive definition, memoized.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    fn go(
        a: &[char],
        b: &[char],
        i: usize,
        j: usize,
        memo: &mut Vec<Option<usize>>,
        width: usize,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(v) = memo[i * width + j] {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo, width)
        } else {
            1 + go(a, b, i + 1, j, memo, width)
                .min(go(a, b, i, j + 1, memo, width))
                .min(go(a, b, i + 1, j + 1, memo, width))
        };
        memo[i * width + j] = Some(v);
        v
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let width = b.len() + 1;
    let mut memo = vec![None; (a.len() + 1) * width];
    go(&a, &b, 0, 0, &mut memo, width)
}

/// Largest-remainder apportionment of `total` units over integer percent
/// shares, by exhaustive search: among allocations giving every part its
/// floor or floor + 1, pick the one whose bumped parts have the largest
/// remainder sum, preferring train, then dev, on ties.
pub fn apportion_oracle(total: usize, percents: [usize; 3]) -> [usize; 3] {
    assert_eq!(percents.iter().sum::<usize>(), 100);
    let floors = percents.map(|p| p * total / 100);
    let rems = percents.map(|p| p * total % 100);
    // (allocation, (remainder sum, bumped parts))
    type Candidate = ([usize; 3], (usize, [bool; 3]));
    let mut best: Option<Candidate> = None;
    for mask in 0u8..8 {
        let bumped = [mask & 4 != 0, mask & 2 != 0, mask & 1 != 0];
        let alloc: [usize; 3] = std::array::from_fn(|i| floors[i] + usize::from(bumped[i]));
        if alloc.iter().sum::<usize>() != total {
            continue;
        }
        let score: usize = (0..3).filter(|&i| bumped[i]).map(|i| rems[i]).sum();
        let key = (score, bumped);
        if best.as_ref().is_none_or(|(_, k)| key > *k) {
            best = Some((alloc, key));
        }
    }
    best.expect("some allocation sums to total").0
}

/// The allomorphy corpus: every lemma takes one of three plural suffixes
/// (`er`, `en`, `s`) chosen independently of its spelling, and has four
/// plural case cells derived from the plural stem; the dative adds `n`.
pub fn allomorphy_corpus(lemmas: usize, seed: u64) -> LanguageDataset {
    const SUFFIXES: [&str; 3] = ["er", "en", "s"];
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut triplets = Vec::new();
    while seen.len() < lemmas {
        let lemma = {
            let w = random_word(&mut rng, 2);
            let coda = ['d', 'k', 't', 'l', 'm'][rng.random_range(0..5)];
            format!("{w}{coda}")
        };
        if !seen.insert(lemma.clone()) {
            continue;
        }
        let stem = format!("{lemma}{}", SUFFIXES[rng.random_range(0..3)]);
        for case in CASES {
            let form = if case == "DAT" {
                format!("{stem}n")
            } else {
                stem.clone()
            };
            triplets.push(triplet(&lemma, &form, &format!("N;{case};PL")));
        }
    }
    LanguageDataset::new("syn", "misc", triplets)
}

/// All triplets of `parts`, sorted, as a multiset for comparison.
pub fn sorted_triplets<'a>(parts: &[&'a LanguageDataset]) -> Vec<&'a Triplet> {
    let mut v: Vec<&Triplet> = parts.iter().flat_map(|p| p.triplets.iter()).collect();
    v.sort_unstable();
    v
}
