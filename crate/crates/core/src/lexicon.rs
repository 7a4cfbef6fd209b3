//! Common/rare word classification for assignee matching.
//!
//! A token is common when it sits on one of the word lists (hand-curated
//! common words, place names, inventor first/last names) or is within one
//! error of a hand-curated word. The one-error check uses a dictionary of
//! deletions and adjacent swaps of the curated words only.

use std::collections::HashSet;
use std::path::Path;

use crate::textnorm::{fold, parse_word_list, read_word_list, NormalizedName};
use crate::error::Result;

const MANUAL_COMMON: &str = include_str!("../data/manual_common.txt");
const PLACE_NAMES: &str = include_str!("../data/place_names.txt");

/// Tokens this short only count as common by exact list membership.
pub const MIN_FUZZY_LEN: usize = 3;

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    manual_common: HashSet<String>,
    place_names: HashSet<String>,
    person_names: HashSet<String>,
    misspellings: HashSet<String>,
}

fn folded_set(words: Vec<String>) -> HashSet<String> {
    words
        .iter()
        .flat_map(|w| fold(w).split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .collect()
}

impl Lexicon {
    pub fn new(
        manual_common: impl IntoIterator<Item = String>,
        place_names: impl IntoIterator<Item = String>,
        person_names: impl IntoIterator<Item = String>,
    ) -> Self {
        let manual_common: HashSet<String> = manual_common.into_iter().collect();
        let misspellings = build_misspellings(&manual_common);
        Lexicon {
            manual_common,
            place_names: place_names.into_iter().collect(),
            person_names: person_names.into_iter().collect(),
            misspellings,
        }
    }

    /// Bundled word lists, or the given files in their place.
    pub fn from_files(
        manual_common: Option<&Path>,
        place_names: Option<&Path>,
        person_names: HashSet<String>,
    ) -> Result<Self> {
        let manual = match manual_common {
            Some(p) => read_word_list(p)?,
            None => parse_word_list(MANUAL_COMMON),
        };
        let places = match place_names {
            Some(p) => read_word_list(p)?,
            None => parse_word_list(PLACE_NAMES),
        };
        Ok(Lexicon::new(folded_set(manual), folded_set(places), person_names))
    }

    pub fn bundled(person_names: HashSet<String>) -> Self {
        Lexicon::from_files(None, None, person_names).expect("bundled word lists are valid")
    }

    pub fn manual_common(&self) -> &HashSet<String> {
        &self.manual_common
    }

    pub fn misspellings(&self) -> &HashSet<String> {
        &self.misspellings
    }

    fn in_misspelling_closure(&self, token: &str) -> bool {
        self.misspellings.contains(token) || self.manual_common.contains(token)
    }

    pub fn is_common(&self, token: &str) -> bool {
        if self.manual_common.contains(token)
            || self.place_names.contains(token)
            || self.person_names.contains(token)
        {
            return true;
        }
        if token.chars().count() < MIN_FUZZY_LEN {
            return false;
        }
        self.misspellings.contains(token)
            || deletions(token).any(|d| self.in_misspelling_closure(&d))
    }

    pub fn is_rare(&self, token: &str) -> bool {
        !self.is_common(token)
    }
}

fn deletions(word: &str) -> impl Iterator<Item = String> + '_ {
    let chars: Vec<char> = word.chars().collect();
    (0..chars.len()).map(move |i| {
        chars[..i].iter().chain(&chars[i + 1..]).collect()
    })
}

fn transpositions(word: &str) -> impl Iterator<Item = String> {
    let chars: Vec<char> = word.chars().collect();
    (0..chars.len().saturating_sub(1)).map(move |i| {
        let mut swapped = chars.clone();
        swapped.swap(i, i + 1);
        swapped.into_iter().collect()
    })
}

/// Every single-character deletion and every adjacent swap of every word.
/// The words themselves are not included unless a swap reproduces them.
pub fn build_misspellings<'a, I>(manual_common: I) -> HashSet<String>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut out = HashSet::new();
    for word in manual_common {
        out.extend(deletions(word));
        out.extend(transpositions(word));
    }
    out
}

/// First two words of every inventor name (assumed last and first names).
pub fn extract_person_tokens<'a, I>(inventors: I) -> HashSet<String>
where
    I: IntoIterator<Item = &'a NormalizedName>,
{
    inventors
        .into_iter()
        .flat_map(|n| n.words.iter().take(2).cloned())
        .collect()
}
