//! Target-word extraction from prompts and the template fallback used when
//! prompt augmentation keeps failing validation.
//!
//! Text meant to be rendered is enclosed in single or double quotes. Quote
//! characters are matched independently and without nesting: a `"` opens a
//! span that only the next `"` closes, and a `'` inside it is literal.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::backends::PromptAugmenter;
use crate::wordmatch::WordSet;

/// Instructions for model-backed augmenters.
pub const AUGMENT_SYSTEM_PROMPT: &str = include_str!("../data/prompts/augment_system.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub raw: String,
    pub targets: WordSet,
    /// Character ranges of quoted contents, quotes excluded.
    pub spans: Vec<Range<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn is_quote(c: char) -> bool {
    c == '"' || c == '\''
}

pub fn extract_targets(prompt: &str) -> PromptSpec {
    let chars: Vec<char> = prompt.chars().collect();
    let mut spans = Vec::new();
    let mut warnings = Vec::new();
    let mut open: Option<(char, usize)> = None;

    for (i, &c) in chars.iter().enumerate() {
        match open {
            None if is_quote(c) => open = Some((c, i)),
            Some((q, start)) if c == q => {
                spans.push(start + 1..i);
                open = None;
            }
            _ => {}
        }
    }
    if let Some((q, at)) = open {
        warnings.push(format!("unbalanced {q} quote at character {at} ignored"));
    }

    let words: Vec<String> = spans
        .iter()
        .flat_map(|r| {
            chars[r.clone()]
                .iter()
                .collect::<String>()
                .split_whitespace()
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .collect();

    PromptSpec {
        raw: prompt.to_owned(),
        targets: WordSet::new(words).expect("whitespace split yields space-free words"),
        spans,
        warnings,
    }
}

/// Template prompt with all quotes stripped from the original and the targets
/// re-quoted as one large text.
pub fn fallback_augment(prompt: &str, targets: &WordSet) -> String {
    let stripped: String = prompt.chars().filter(|&c| !is_quote(c)).collect();
    format!(
        "Draw a picture about {} with the large text \"{}\"",
        stripped,
        targets.join(" ")
    )
}

/// True iff every target word (with multiplicity) sits inside a quoted span of
/// `augmented`.
pub fn validate_augmented(augmented: &str, targets: &WordSet) -> bool {
    let mut available: HashMap<&str, usize> = HashMap::new();
    let quoted = extract_targets(augmented).targets;
    for w in quoted.iter() {
        *available.entry(w).or_default() += 1;
    }
    targets.iter().all(|w| match available.get_mut(w) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmented {
    pub prompt: String,
    pub attempts: u32,
    pub fallback: bool,
}

/// Ask `augmenter` up to `retries + 1` times for a richer prompt that still
/// quotes every target word; settle for [`fallback_augment`] otherwise.
pub fn augment_prompt(prompt: &str, augmenter: &dyn PromptAugmenter, retries: u32) -> Augmented {
    let targets = extract_targets(prompt).targets;
    for attempt in 1..=retries + 1 {
        if let Ok(candidate) = augmenter.augment(prompt) {
            if validate_augmented(&candidate, &targets) {
                return Augmented {
                    prompt: candidate,
                    attempts: attempt,
                    fallback: false,
                };
            }
        }
    }
    Augmented {
        prompt: fallback_augment(prompt, &targets),
        attempts: retries + 1,
        fallback: true,
    }
}
