//! Same-location inventor name matching and the over-linking prune.
//!
//! The first word of a name is taken as the last name and the second as the
//! first name. A link needs the last name somewhere in the other name (one
//! edit allowed above three characters) and then the first name (one edit
//! allowed only when the last name agreed exactly). Both orientations are tried.

use std::collections::HashMap;

use crate::textnorm::{edit_distance_le_1, NormalizedName};

/// Last names longer than this may differ by one edit.
pub const FUZZY_LAST_NAME_MIN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchedPosition {
    FirstWord,
    OtherWord,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinkEvidence {
    pub last_token: String,
    pub matched_position: MatchedPosition,
    pub perfect_last: bool,
}

impl LinkEvidence {
    fn rank(&self) -> (MatchedPosition, bool) {
        (self.matched_position, !self.perfect_last)
    }
}

fn one_way(src: &NormalizedName, tgt: &NormalizedName) -> Option<LinkEvidence> {
    let (last, first) = match src.words.as_slice() {
        [last, first, ..] => (last, first),
        _ => return None,
    };
    let fuzzy_last = last.chars().count() >= FUZZY_LAST_NAME_MIN;
    let mut candidates: Vec<(usize, bool)> = tgt
        .words
        .iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let exact = w == last;
            (exact || (fuzzy_last && edit_distance_le_1(last, w))).then_some((i, exact))
        })
        .collect();
    // exact agreement first, then the target's own last-name slot
    candidates.sort_by_key(|&(i, exact)| (!exact, i != 0, i));

    candidates.into_iter().find_map(|(i, exact)| {
        let found = tgt.words.iter().enumerate().any(|(j, w)| {
            j != i && (w == first || (exact && edit_distance_le_1(first, w)))
        });
        found.then(|| LinkEvidence {
            last_token: last.clone(),
            matched_position: if i == 0 {
                MatchedPosition::FirstWord
            } else {
                MatchedPosition::OtherWord
            },
            perfect_last: exact,
        })
    })
}

/// Link evidence for two inventor names at one high-resolution point, or
/// `None`. Names with fewer than two words never match.
pub fn inventors_match(a: &NormalizedName, b: &NormalizedName) -> Option<LinkEvidence> {
    match (one_way(a, b), one_way(b, a)) {
        (Some(x), Some(y)) => Some(if y.rank() < x.rank() { y } else { x }),
        (x, y) => x.or(y),
    }
}

/// Drops every link whose trigger token matched a non-last-name word more
/// than twice as often as it matched a last name, counted over `links`.
pub fn prune_links<P>(links: Vec<(P, LinkEvidence)>) -> Vec<P> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (_, ev) in &links {
        let entry = counts.entry(ev.last_token.as_str()).or_default();
        match ev.matched_position {
            MatchedPosition::FirstWord => entry.0 += 1,
            MatchedPosition::OtherWord => entry.1 += 1,
        }
    }
    let spurious: Vec<String> = counts
        .into_iter()
        .filter(|&(_, (first, other))| other > 2 * first)
        .map(|(t, _)| t.to_string())
        .collect();
    links
        .into_iter()
        .filter(|(_, ev)| !spurious.contains(&ev.last_token))
        .map(|(pair, _)| pair)
        .collect()
}
