//! Word-set matching between the words a prompt asks for and the words found
//! in an image.
//!
//! Both sets are padded to a common size with padding tokens, then paired by a
//! minimum-cost assignment whose word-to-word cost is the Levenshtein distance.
//! A detected word paired with padding is surplus, a prompt word paired with
//! padding is missing, and a word pair with non-zero distance is a typo.

mod assignment;
mod levenshtein;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use levenshtein::levenshtein;

pub const DEFAULT_PAD_COST: u32 = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordSetError {
    #[error("empty word at position {0}")]
    Empty(usize),
    #[error("word {0:?} contains a space")]
    ContainsSpace(String),
}

/// Ordered list of space-free, non-empty words. Duplicates are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct WordSet(Vec<String>);

impl WordSet {
    pub fn new<I, S>(words: I) -> Result<Self, WordSetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() {
                return Err(WordSetError::Empty(i));
            }
            if w.contains(' ') {
                return Err(WordSetError::ContainsSpace(w.clone()));
            }
        }
        Ok(Self(words))
    }

    /// Split free text on spaces, dropping empty tokens.
    pub fn split(text: &str) -> Self {
        Self(
            text.split(' ')
                .filter(|t| !t.is_empty())
                .map(str::to_owned)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.0.get(i).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

impl TryFrom<Vec<String>> for WordSet {
    type Error = WordSetError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        WordSet::new(v)
    }
}

impl From<WordSet> for Vec<String> {
    fn from(w: WordSet) -> Self {
        w.0
    }
}

/// A word set padded up to the size of the larger set of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedWordSet {
    pub words: WordSet,
    pub pad_count: usize,
}

impl PaddedWordSet {
    pub fn len(&self) -> usize {
        self.words.len() + self.pad_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot(&self, i: usize) -> Slot {
        if i < self.words.len() {
            Slot::Word(i)
        } else {
            Slot::Pad
        }
    }
}

/// Pad both sets to `max(N, N̂)`.
pub fn equalize(prompt: &WordSet, detected: &WordSet) -> (PaddedWordSet, PaddedWordSet) {
    let size = prompt.len().max(detected.len());
    (
        PaddedWordSet {
            words: prompt.clone(),
            pad_count: size - prompt.len(),
        },
        PaddedWordSet {
            words: detected.clone(),
            pad_count: size - detected.len(),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Word(usize),
    Pad,
}

impl Slot {
    pub fn index(self) -> Option<usize> {
        match self {
            Slot::Word(i) => Some(i),
            Slot::Pad => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Typo,
    Surplus,
    Missing,
    PadPad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub prompt_side: Slot,
    pub detected_side: Slot,
    pub cost: u32,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// One pair per padded prompt slot, in prompt-slot order.
    pub pairs: Vec<MatchPair>,
    pub total_cost: u64,
}

/// Matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Matcher {
    pub pad_cost: u32,
    pub case_insensitive: bool,
}

impl Default for Matcher {
    fn default() -> Self {
        Self {
            pad_cost: DEFAULT_PAD_COST,
            case_insensitive: false,
        }
    }
}

impl Matcher {
    pub fn new(pad_cost: u32, case_insensitive: bool) -> Self {
        assert!(pad_cost >= 1, "pad cost must be at least 1");
        Self {
            pad_cost,
            case_insensitive,
        }
    }

    pub fn distance(&self, a: &str, b: &str) -> usize {
        if self.case_insensitive {
            levenshtein(&a.to_lowercase(), &b.to_lowercase())
        } else {
            levenshtein(a, b)
        }
    }

    pub fn same_word(&self, a: &str, b: &str) -> bool {
        if self.case_insensitive {
            a.to_lowercase() == b.to_lowercase()
        } else {
            a == b
        }
    }

    /// Minimum-cost perfect matching on the padded sets. Among optimal
    /// matchings, the one with the lexicographically smallest
    /// (prompt slot -> detected slot) vector is returned.
    pub fn match_sets(&self, prompt: &WordSet, detected: &WordSet) -> MatchResult {
        let (padded_prompt, padded_detected) = equalize(prompt, detected);
        let size = padded_prompt.len();
        let pad = self.pad_cost as u64;

        let costs: Vec<Vec<u64>> = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| match (padded_prompt.slot(i), padded_detected.slot(j)) {
                        (Slot::Word(a), Slot::Word(b)) => {
                            self.distance(&prompt.words()[a], &detected.words()[b]) as u64
                        }
                        (Slot::Pad, Slot::Pad) => 0,
                        _ => pad,
                    })
                    .collect()
            })
            .collect();

        let (assignment, total_cost) = assignment::solve_lexicographic(&costs);
        let pairs = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let prompt_side = padded_prompt.slot(i);
                let detected_side = padded_detected.slot(j);
                let cost = costs[i][j] as u32;
                let kind = match (prompt_side, detected_side) {
                    (Slot::Word(_), Slot::Word(_)) if cost == 0 => MatchKind::Exact,
                    (Slot::Word(_), Slot::Word(_)) => MatchKind::Typo,
                    (Slot::Pad, Slot::Word(_)) => MatchKind::Surplus,
                    (Slot::Word(_), Slot::Pad) => MatchKind::Missing,
                    (Slot::Pad, Slot::Pad) => MatchKind::PadPad,
                };
                MatchPair {
                    prompt_side,
                    detected_side,
                    cost,
                    kind,
                }
            })
            .collect();
        MatchResult { pairs, total_cost }
    }
}

impl Matcher {
    /// Number of exact pairs in the minimum-cost matching that has the most
    /// exact pairs. Unlike counting pairs of [`Matcher::match_sets`], the
    /// result does not depend on word order when several matchings tie.
    pub fn exact_count(&self, prompt: &WordSet, detected: &WordSet) -> usize {
        let (padded_prompt, padded_detected) = equalize(prompt, detected);
        let size = padded_prompt.len();
        if size == 0 {
            return 0;
        }
        // Secondary objective: one unit per non-exact pair, scaled below the
        // smallest primary cost step.
        let scale = size as u64 + 1;
        let costs: Vec<Vec<u64>> = (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| match (padded_prompt.slot(i), padded_detected.slot(j)) {
                        (Slot::Word(a), Slot::Word(b)) => {
                            let d = self.distance(&prompt.words()[a], &detected.words()[b]) as u64;
                            d * scale + u64::from(d > 0)
                        }
                        (Slot::Pad, Slot::Pad) => 1,
                        _ => self.pad_cost as u64 * scale + 1,
                    })
                    .collect()
            })
            .collect();
        let (_, total) = assignment::solve(&costs);
        size - (total % scale) as usize
    }
}

/// Case-sensitive matching with the given padding cost.
pub fn match_words(prompt: &WordSet, detected: &WordSet, pad_cost: u32) -> MatchResult {
    Matcher::new(pad_cost, false).match_sets(prompt, detected)
}

/// Detected words sorted into the error taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Detected indices with no prompt counterpart; these get erased.
    pub surplus: Vec<usize>,
    /// Prompt words absent from the image, in prompt order.
    pub missing: Vec<String>,
    /// (detected index, prompt word it should read as).
    pub typos: Vec<(usize, String)>,
    /// (detected index, prompt word it already reads as).
    pub exact: Vec<(usize, String)>,
}

impl ErrorReport {
    pub fn is_clean(&self) -> bool {
        self.surplus.is_empty() && self.missing.is_empty() && self.typos.is_empty()
    }
}

pub fn classify(result: &MatchResult, prompt: &WordSet, detected: &WordSet) -> ErrorReport {
    let mut report = ErrorReport::default();
    let mut missing = Vec::new();
    for pair in &result.pairs {
        match (pair.prompt_side, pair.detected_side) {
            (Slot::Word(p), Slot::Word(d)) => {
                let word = prompt.words()[p].clone();
                if pair.kind == MatchKind::Exact {
                    report.exact.push((d, word));
                } else {
                    report.typos.push((d, word));
                }
            }
            (Slot::Pad, Slot::Word(d)) => report.surplus.push(d),
            (Slot::Word(p), Slot::Pad) => missing.push(p),
            (Slot::Pad, Slot::Pad) => {}
        }
    }
    debug_assert!(report
        .surplus
        .iter()
        .chain(report.typos.iter().map(|(d, _)| d))
        .chain(report.exact.iter().map(|(d, _)| d))
        .all(|&d| d < detected.len()));
    report.surplus.sort_unstable();
    report.typos.sort();
    report.exact.sort();
    missing.sort_unstable();
    report.missing = missing
        .into_iter()
        .map(|p| prompt.words()[p].clone())
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ws(words: &[&str]) -> WordSet {
        WordSet::new(words.iter().copied()).unwrap()
    }

    #[test]
    fn equalize_pads_the_short_side() {
        let pads = |n: usize, m: usize| {
            let a = WordSet::new((0..n).map(|i| format!("a{i}"))).unwrap();
            let b = WordSet::new((0..m).map(|i| format!("b{i}"))).unwrap();
            let (pa, pb) = equalize(&a, &b);
            assert_eq!(pa.len(), pb.len());
            (pa.pad_count, pb.pad_count)
        };
        assert_eq!(pads(2, 2), (0, 0));
        assert_eq!(pads(3, 1), (0, 2));
        assert_eq!(pads(0, 4), (4, 0));
    }

    #[test]
    fn identical_single_word_is_exact() {
        let r = match_words(&ws(&["HELLO"]), &ws(&["HELLO"]), 10);
        assert_eq!(r.total_cost, 0);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].kind, MatchKind::Exact);
    }

    #[test]
    fn typo_and_missing() {
        let prompt = ws(&["SALE", "NOW"]);
        let detected = ws(&["SALF"]);
        let r = match_words(&prompt, &detected, 10);
        assert_eq!(r.total_cost, 11);
        let report = classify(&r, &prompt, &detected);
        assert_eq!(report.typos, vec![(0, "SALE".to_owned())]);
        assert_eq!(report.missing, vec!["NOW".to_owned()]);
        assert!(report.surplus.is_empty() && report.exact.is_empty());
    }

    #[test]
    fn exact_and_surplus() {
        let prompt = ws(&["A"]);
        let detected = ws(&["A", "XYZ"]);
        let r = match_words(&prompt, &detected, 10);
        assert_eq!(r.total_cost, 10);
        let report = classify(&r, &prompt, &detected);
        assert_eq!(report.exact, vec![(0, "A".to_owned())]);
        assert_eq!(report.surplus, vec![1]);
    }

    #[test]
    fn classify_clean_and_empty_prompt() {
        let w = ws(&["BIG", "SALE"]);
        let report = classify(&match_words(&w, &w, 10), &w, &w);
        assert!(report.is_clean());
        assert_eq!(report.exact.len(), 2);

        let detected = ws(&["X", "Y"]);
        let empty = WordSet::default();
        let report = classify(&match_words(&empty, &detected, 10), &empty, &detected);
        assert_eq!(report.surplus, vec![0, 1]);
        assert!(report.missing.is_empty() && report.typos.is_empty() && report.exact.is_empty());
    }

    #[test]
    fn case_policy() {
        let prompt = ws(&["Hello"]);
        let detected = ws(&["HELLO"]);
        let strict = Matcher::new(10, false).match_sets(&prompt, &detected);
        assert_eq!(strict.pairs[0].kind, MatchKind::Typo);
        let loose = Matcher::new(10, true).match_sets(&prompt, &detected);
        assert_eq!(loose.pairs[0].kind, MatchKind::Exact);
    }

    #[test]
    fn duplicate_words_get_distinct_slots() {
        let prompt = ws(&["GO", "GO"]);
        let detected = ws(&["GO"]);
        let report = classify(&match_words(&prompt, &detected, 10), &prompt, &detected);
        assert_eq!(report.exact, vec![(0, "GO".to_owned())]);
        assert_eq!(report.missing, vec!["GO".to_owned()]);
    }

    #[test]
    fn word_set_validation() {
        assert_eq!(WordSet::new(["a b"]), Err(WordSetError::ContainsSpace("a b".into())));
        assert_eq!(WordSet::new(["ok", ""]), Err(WordSetError::Empty(1)));
        assert_eq!(WordSet::split("  BIG   SALE ").words(), ["BIG", "SALE"]);
    }

    fn brute_min(prompt: &WordSet, detected: &WordSet, pad: u64) -> u64 {
        let (pp, pd) = equalize(prompt, detected);
        let n = pp.len();
        let cost = |i: usize, j: usize| match (pp.slot(i), pd.slot(j)) {
            (Slot::Word(a), Slot::Word(b)) => levenshtein(&prompt.words()[a], &detected.words()[b]) as u64,
            (Slot::Pad, Slot::Pad) => 0,
            _ => pad,
        };
        fn go(i: usize, used: &mut Vec<bool>, cost: &dyn Fn(usize, usize) -> u64) -> u64 {
            if i == used.len() {
                return 0;
            }
            let mut best = u64::MAX;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost(i, j) + go(i + 1, used, cost));
                    used[j] = false;
                }
            }
            best
        }
        go(0, &mut vec![false; n], &cost)
    }

    fn word_sets() -> impl Strategy<Value = (WordSet, WordSet)> {
        let words = || prop::collection::vec("[abcd]{1,6}", 0..=5);
        (words(), words()).prop_map(|(a, b)| (WordSet::new(a).unwrap(), WordSet::new(b).unwrap()))
    }

    proptest! {
        #[test]
        fn optimal_and_consistent((prompt, detected) in word_sets(), pad in 1u32..12) {
            let r = match_words(&prompt, &detected, pad);
            prop_assert_eq!(r.total_cost, brute_min(&prompt, &detected, pad as u64));
            prop_assert_eq!(r.total_cost, r.pairs.iter().map(|p| p.cost as u64).sum::<u64>());
            prop_assert_eq!(&r, &match_words(&prompt, &detected, pad));

            let report = classify(&r, &prompt, &detected);
            let mut seen: Vec<usize> = report.surplus.clone();
            seen.extend(report.typos.iter().map(|(d, _)| *d));
            seen.extend(report.exact.iter().map(|(d, _)| *d));
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..detected.len()).collect::<Vec<_>>());
        }

        #[test]
        fn large_pad_cost_fixes_cardinalities((prompt, detected) in word_sets()) {
            let r = match_words(&prompt, &detected, 7);
            let report = classify(&r, &prompt, &detected);
            prop_assert_eq!(report.surplus.len(), detected.len().saturating_sub(prompt.len()));
            prop_assert_eq!(report.missing.len(), prompt.len().saturating_sub(detected.len()));
        }

        #[test]
        fn exact_count_is_multiset_overlap((prompt, detected) in word_sets(), pad in 1u32..12) {
            let mut pool: Vec<&str> = detected.iter().collect();
            let overlap = prompt.iter().filter(|w| match pool.iter().position(|d| d == w) {
                Some(i) => { pool.swap_remove(i); true }
                None => false,
            }).count();
            prop_assert_eq!(Matcher::new(pad, false).exact_count(&prompt, &detected), overlap);
        }
    }
}
