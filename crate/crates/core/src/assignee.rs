//! Same-location assignee name matching.
//!
//! Two names found at one high-resolution point are tried in three steps:
//! a shared rare word (within one edit), then at least two shared common
//! words, then an acronym of one name spelled by the other's initials.

use std::collections::BTreeSet;

use crate::lexicon::Lexicon;
use crate::textnorm::{edit_distance_le_1, NormalizedName};

/// Edit-distance cap for rare-word agreement.
pub const MAX_EDITS: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchedBy {
    RareWord,
    CommonOverlap,
    Acronym,
    None,
}

impl MatchedBy {
    pub fn is_match(self) -> bool {
        self != MatchedBy::None
    }
}

/// True when some word of `a` (two letters or more), read letter by letter,
/// is spelled by the initials of an order-preserving subset of `b`'s words,
/// or the same holds with the names swapped.
pub fn acronym_of(a: &NormalizedName, b: &NormalizedName) -> bool {
    contains_acronym_of(a, b) || contains_acronym_of(b, a)
}

fn contains_acronym_of(a: &NormalizedName, b: &NormalizedName) -> bool {
    let initials: Vec<char> = b.words.iter().filter_map(|w| w.chars().next()).collect();
    a.words.iter().any(|word| {
        let letters: Vec<char> = word.chars().collect();
        letters.len() >= 2 && letters.len() <= initials.len() && is_subsequence(&letters, &initials)
    })
}

fn is_subsequence(needle: &[char], hay: &[char]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|c| it.any(|h| h == c))
}

fn rare_word_link(a: &NormalizedName, b: &NormalizedName, lex: &Lexicon) -> bool {
    let rare_b: Vec<&String> = b.words.iter().filter(|w| lex.is_rare(w)).collect();
    a.words
        .iter()
        .filter(|u| lex.is_rare(u))
        .any(|u| rare_b.iter().any(|v| edit_distance_le_1(u, v)))
}

fn common_words<'a>(name: &'a NormalizedName, lex: &Lexicon) -> BTreeSet<&'a str> {
    name.words
        .iter()
        .filter(|w| lex.is_common(w))
        .map(String::as_str)
        .collect()
}

fn common_overlap(a: &NormalizedName, b: &NormalizedName, lex: &Lexicon) -> bool {
    let ca = common_words(a, lex);
    let cb = common_words(b, lex);
    let shared = ca.intersection(&cb).count();
    // a one-word name (repeats ignored) whose word is common
    let single_common = |n: &NormalizedName, c: &BTreeSet<&str>| {
        c.len() == 1 && n.words.iter().all(|w| c.contains(w.as_str()))
    };
    let needed = if single_common(a, &ca) || single_common(b, &cb) { 1 } else { 2 };
    shared >= needed
}

/// Verdict for two assignee names at the same high-resolution point.
pub fn assignees_match(a: &NormalizedName, b: &NormalizedName, lex: &Lexicon) -> MatchedBy {
    if a.is_degenerate() || b.is_degenerate() {
        return MatchedBy::None;
    }
    if rare_word_link(a, b, lex) {
        MatchedBy::RareWord
    } else if common_overlap(a, b, lex) {
        MatchedBy::CommonOverlap
    } else if acronym_of(a, b) {
        MatchedBy::Acronym
    } else {
        MatchedBy::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Role;
    use crate::textnorm::Normalizer;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn name(words: &[&str]) -> NormalizedName {
        NormalizedName::from_words(words.iter().copied())
    }

    fn lex() -> Lexicon {
        Lexicon::bundled(HashSet::new())
    }

    fn raw(a: &str) -> NormalizedName {
        Normalizer::default().normalize(a, Role::Assignee)
    }

    #[test]
    fn acronyms() {
        assert!(acronym_of(&name(&["mit"]), &name(&["massachusetts", "institute", "technology"])));
        assert!(acronym_of(&name(&["national", "institutes", "health"]), &name(&["nih"])));
        assert!(!acronym_of(&name(&["abc"]), &name(&["alpha", "beta"])));
        // order matters
        assert!(!acronym_of(&name(&["tim"]), &name(&["massachusetts", "institute", "technology"])));
        // subset, not contiguous
        assert!(acronym_of(&name(&["mt"]), &name(&["massachusetts", "institute", "technology"])));
    }

    #[test]
    fn harvard_matches_by_rare_word() {
        let v = assignees_match(&raw("Harvard University"), &raw("Harvard College"), &lex());
        assert_eq!(v, MatchedBy::RareWord);
    }

    #[test]
    fn general_hospital_matches_by_common_overlap() {
        let v = assignees_match(
            &raw("The General Hospital Corporation"),
            &raw("Massachusetts General Hospital"),
            &lex(),
        );
        assert_eq!(v, MatchedBy::CommonOverlap);
    }

    #[test]
    fn mit_matches_by_acronym() {
        let v = assignees_match(
            &raw("The Massachusetts Institute of Technology"),
            &raw("MIT"),
            &lex(),
        );
        assert_eq!(v, MatchedBy::Acronym);
    }

    #[test]
    fn distinct_pharma_companies_do_not_match() {
        let v = assignees_match(&name(&["zeneca", "pharma"]), &name(&["novartis", "pharma"]), &lex());
        assert_eq!(v, MatchedBy::None);
    }

    #[test]
    fn single_common_word_needs_one_shared_word() {
        let l = lex();
        assert_eq!(assignees_match(&name(&["hospital"]), &name(&["general", "hospital"]), &l), MatchedBy::CommonOverlap);
        assert_eq!(assignees_match(&name(&["hospital"]), &name(&["hospital"]), &l), MatchedBy::CommonOverlap);
        assert_eq!(assignees_match(&name(&["research", "hospital"]), &name(&["general", "hospital"]), &l), MatchedBy::None);
    }

    #[test]
    fn rare_word_takes_precedence() {
        let v = assignees_match(
            &name(&["harvard", "medical", "school"]),
            &name(&["harvard", "medical", "school"]),
            &lex(),
        );
        assert_eq!(v, MatchedBy::RareWord);
    }

    #[test]
    fn rare_typo_still_links() {
        let v = assignees_match(&name(&["zeneca", "pharma"]), &name(&["zenecca"]), &lex());
        assert_eq!(v, MatchedBy::RareWord);
    }

    #[test]
    fn degenerate_never_matches() {
        assert_eq!(assignees_match(&name(&[]), &name(&["harvard"]), &lex()), MatchedBy::None);
    }

    #[test]
    fn nih_variants_chain() {
        let l = lex();
        let dhhs = raw("Department of Health and Human Services");
        let nih = raw("National Institute of Health");
        let gov = raw("The Gov. of USA, as represented by the Secretary, Dept. of Health and Human services, National Institutes of Health");
        assert!(assignees_match(&dhhs, &gov, &l).is_match());
        assert!(assignees_match(&nih, &gov, &l).is_match());
    }

    fn word() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("hospital".to_string()),
            Just("general".to_string()),
            Just("research".to_string()),
            Just("boston".to_string()),
            "[a-d]{2,5}",
        ]
    }

    proptest! {
        #[test]
        fn verdict_is_symmetric(
            a in proptest::collection::vec(word(), 0..4),
            b in proptest::collection::vec(word(), 0..4),
        ) {
            let l = lex();
            let (a, b) = (NormalizedName::from_words(a), NormalizedName::from_words(b));
            prop_assert_eq!(
                assignees_match(&a, &b, &l).is_match(),
                assignees_match(&b, &a, &l).is_match()
            );
        }

        #[test]
        fn nondegenerate_names_match_themselves(a in proptest::collection::vec(word(), 1..4)) {
            let l = lex();
            let a = NormalizedName::from_words(a);
            prop_assert!(assignees_match(&a, &a, &l).is_match());
        }
    }
}
