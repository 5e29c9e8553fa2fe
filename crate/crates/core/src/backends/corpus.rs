//! Seeded generator for synthetic test corpora with known error counts.
//!
//! Each scene renders a prompt's target words with a controlled mix of
//! injected errors: one target left out (missing), one target with a single
//! substituted character (typo), and one extra 7-digit number (surplus).
//! Target words come from a vocabulary whose words are pairwise at least
//! three edits apart, so every injected error has exactly one optimal
//! classification.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::SUBSTITUTION_ALPHABET;
use super::mix_seed;
use super::scene::{Placement, SyntheticScene};
use crate::imaging::Rgb;

pub const VOCABULARY: &[&str] = &[
    "SALE", "OPEN", "COFFEE", "BAKERY", "MUSIC", "FRESH", "WINTER", "GARDEN", "PIZZA", "HOTEL",
    "BOOKS", "JAZZ", "CINEMA", "MARKET", "TRAVEL", "PARTY", "FLOWER", "DANCE", "NIGHT", "YOGA",
];

const BACKGROUNDS: &[Rgb] = &[
    [250, 248, 240],
    [235, 242, 250],
    [252, 236, 228],
    [238, 250, 236],
    [255, 255, 255],
];
const INKS: &[Rgb] = &[[20, 20, 20], [40, 30, 110], [120, 20, 30], [10, 70, 40]];

const SIZE: u32 = 256;
const WORD_SCALE: u32 = 2;
const FIRST_ROW: u32 = 96;
const ROW_PITCH: u32 = 30;
const MARGIN: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub count: usize,
    pub seed: u64,
    pub surplus_rate: f64,
    pub missing_rate: f64,
    pub typo_rate: f64,
    /// Probability of an extra word too small to survive height filtering.
    #[serde(default)]
    pub tiny_rate: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            count: 50,
            seed: 7,
            surplus_rate: 0.5,
            missing_rate: 0.3,
            typo_rate: 0.5,
            tiny_rate: 0.0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [
            ("surplus_rate", self.surplus_rate),
            ("missing_rate", self.missing_rate),
            ("typo_rate", self.typo_rate),
            ("tiny_rate", self.tiny_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }
}

/// Counts a pipeline run on the scene should report, given a perfect editor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub detected_words: usize,
    pub surplus_words: usize,
    pub lack_words: usize,
    pub typo_words: usize,
    pub typo_corrected_words: usize,
    pub filtered_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub prompt: String,
    pub targets: Vec<String>,
    /// Injected errors, before classification.
    pub omitted: Option<String>,
    pub misspelled: Option<(String, String)>,
    pub extra: Option<String>,
    pub tiny: Option<String>,
    pub expected: ExpectedCounts,
    pub scene: SyntheticScene,
}

fn substitute_one(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let pos = rng.gen_range(0..chars.len());
    let choices: Vec<char> = SUBSTITUTION_ALPHABET
        .chars()
        .filter(|&c| c != chars[pos])
        .collect();
    chars[pos] = *choices.choose(rng).expect("alphabet has more than one char");
    chars.into_iter().collect()
}

fn digits(n: usize, rng: &mut ChaCha8Rng) -> String {
    (0..n)
        .map(|_| char::from(b'0' + rng.gen_range(0..10u8)))
        .collect()
}

pub fn generate_scene(config: &CorpusConfig, index: usize) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64));
    let id = format!("scene_{index:03}");

    let n = rng.gen_range(2..=4);
    let targets: Vec<String> = VOCABULARY
        .choose_multiple(&mut rng, n)
        .map(|w| w.to_string())
        .collect();

    let missing_idx = rng.gen_bool(config.missing_rate).then(|| rng.gen_range(0..n));
    let typo_idx = if rng.gen_bool(config.typo_rate) {
        let candidates: Vec<usize> = (0..n).filter(|&i| Some(i) != missing_idx).collect();
        Some(*candidates.choose(&mut rng).expect("n >= 2"))
    } else {
        None
    };
    let extra = rng.gen_bool(config.surplus_rate).then(|| digits(7, &mut rng));
    let tiny = rng.gen_bool(config.tiny_rate).then(|| digits(3, &mut rng));

    let mut rendered: Vec<String> = Vec::new();
    let mut misspelled = None;
    for (i, t) in targets.iter().enumerate() {
        if Some(i) == missing_idx {
            continue;
        }
        if Some(i) == typo_idx {
            let wrong = substitute_one(t, &mut rng);
            misspelled = Some((t.clone(), wrong.clone()));
            rendered.push(wrong);
        } else {
            rendered.push(t.clone());
        }
    }
    rendered.extend(extra.iter().cloned());
    rendered.shuffle(&mut rng);

    let background = *BACKGROUNDS.choose(&mut rng).unwrap();
    let ink = *INKS.choose(&mut rng).unwrap();
    let mut scene = SyntheticScene::new(SIZE, SIZE, background, ink);
    scene.seed = mix_seed(config.seed, index as u64);
    for (row, word) in rendered.iter().enumerate() {
        let width = Placement::at(word.as_str(), 0, 0, WORD_SCALE).bbox.width;
        let left = rng.gen_range(MARGIN..=SIZE - MARGIN - width);
        scene
            .placements
            .push(Placement::at(word.as_str(), left, FIRST_ROW + ROW_PITCH * row as u32, WORD_SCALE));
    }
    if let Some(word) = &tiny {
        let top = FIRST_ROW + ROW_PITCH * rendered.len() as u32;
        scene.placements.push(Placement::at(word.as_str(), MARGIN, top, 1));
    }

    // A surplus word next to a missing one is cheaper to read as a typo of
    // the missing word than as one erase plus one insertion.
    let paired = extra.is_some() && missing_idx.is_some();
    let typo_words = usize::from(typo_idx.is_some()) + usize::from(paired);
    let lack_words = usize::from(missing_idx.is_some() && !paired);
    let expected = ExpectedCounts {
        detected_words: rendered.len(),
        surplus_words: usize::from(extra.is_some() && !paired),
        lack_words,
        typo_words,
        typo_corrected_words: typo_words + lack_words,
        filtered_words: usize::from(tiny.is_some()),
    };

    GroundTruth {
        prompt: format!("a poster with the text \"{}\"", targets.join(" ")),
        omitted: missing_idx.map(|i| targets[i].clone()),
        misspelled,
        extra,
        tiny,
        expected,
        scene,
        targets,
        id,
    }
}

pub fn generate(config: &CorpusConfig) -> Vec<GroundTruth> {
    (0..config.count).map(|i| generate_scene(config, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::scene::render_scene;
    use crate::wordmatch::levenshtein;

    #[test]
    fn vocabulary_is_well_separated() {
        for (i, a) in VOCABULARY.iter().enumerate() {
            for b in &VOCABULARY[i + 1..] {
                assert!(levenshtein(a, b) >= 3, "{a} vs {b}");
            }
            assert!(a.len() <= 6);
        }
    }

    #[test]
    fn scenes_render_and_are_deterministic() {
        let config = CorpusConfig {
            tiny_rate: 0.5,
            ..CorpusConfig::default()
        };
        let a = generate(&config);
        let b = generate(&config);
        assert_eq!(a, b);
        for truth in &a {
            render_scene(&truth.scene).unwrap();
            assert_eq!(
                truth.scene.placements.len(),
                truth.expected.detected_words + truth.expected.filtered_words
            );
        }
    }

    #[test]
    fn full_typo_rate_always_has_a_typo() {
        let config = CorpusConfig {
            typo_rate: 1.0,
            ..CorpusConfig::default()
        };
        for truth in generate(&config) {
            assert!(truth.expected.typo_words >= 1);
            let (right, wrong) = truth.misspelled.unwrap();
            assert_eq!(levenshtein(&right, &wrong), 1);
        }
    }

    #[test]
    fn zero_rates_give_clean_scenes() {
        let config = CorpusConfig {
            surplus_rate: 0.0,
            missing_rate: 0.0,
            typo_rate: 0.0,
            ..CorpusConfig::default()
        };
        for truth in generate(&config) {
            let mut words = truth.scene.words();
            words.sort();
            let mut targets: Vec<&str> = truth.targets.iter().map(String::as_str).collect();
            targets.sort();
            assert_eq!(words, targets);
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        let config = CorpusConfig {
            typo_rate: 1.5,
            ..CorpusConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
