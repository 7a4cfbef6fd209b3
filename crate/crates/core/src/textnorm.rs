//! Name canonicalization applied before any matching.
//!
//! Latin letters are lowercased, accented letters become `x` (dropping an
//! accent costs one edit, changing one costs nothing), every other symbol
//! becomes a space, single-character words vanish and role-specific stopwords
//! are removed. Inventor names are split at a `c/o` or `c/-` marker; the words
//! after it are kept aside and never take part in matching.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use unicode_normalization::char::{decompose_canonical, is_combining_mark};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Role;
use crate::error::{Error, Result};

const ASSIGNEE_STOPLIST: &str = include_str!("../data/assignee_stoplist.txt");
const INVENTOR_STOPLIST: &str = include_str!("../data/inventor_stoplist.txt");

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NormalizedName {
    pub words: Vec<String>,
    pub had_care_of: bool,
    pub care_of_suffix: Vec<String>,
}

impl NormalizedName {
    /// Nothing survived normalization; such mentions become singletons.
    pub fn is_degenerate(&self) -> bool {
        self.words.is_empty()
    }

    /// Space-joined words: the exact-name key.
    pub fn key(&self) -> String {
        self.words.join(" ")
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NormalizedName {
            words: words.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }
}

/// Parses a word-list file: one token per line, `#` starts a comment.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    Ok(parse_word_list(&text))
}

fn fold_list(words: Vec<String>) -> HashSet<String> {
    words
        .iter()
        .flat_map(|w| tokens(&fold(w)))
        .collect()
}

/// Role-specific deletion lists.
#[derive(Clone, Debug)]
pub struct Normalizer {
    assignee_stop: HashSet<String>,
    inventor_stop: HashSet<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::new(
            parse_word_list(ASSIGNEE_STOPLIST),
            parse_word_list(INVENTOR_STOPLIST),
        )
    }
}

impl Normalizer {
    pub fn new(assignee_stop: Vec<String>, inventor_stop: Vec<String>) -> Self {
        Normalizer {
            assignee_stop: fold_list(assignee_stop),
            inventor_stop: fold_list(inventor_stop),
        }
    }

    /// Loads stoplists from files, falling back to the bundled lists for `None`.
    pub fn from_files(assignee: Option<&Path>, inventor: Option<&Path>) -> Result<Self> {
        let assignee = match assignee {
            Some(p) => read_word_list(p)?,
            None => parse_word_list(ASSIGNEE_STOPLIST),
        };
        let inventor = match inventor {
            Some(p) => read_word_list(p)?,
            None => parse_word_list(INVENTOR_STOPLIST),
        };
        Ok(Normalizer::new(assignee, inventor))
    }

    pub fn stoplist(&self, role: Role) -> &HashSet<String> {
        match role {
            Role::Assignee => &self.assignee_stop,
            Role::Inventor => &self.inventor_stop,
        }
    }

    pub fn normalize(&self, raw: &str, role: Role) -> NormalizedName {
        let stop = self.stoplist(role);
        let clean = |text: &str| -> Vec<String> {
            tokens(&fold(text))
                .into_iter()
                .filter(|t| !stop.contains(t))
                .collect()
        };
        match role {
            Role::Inventor => match find_care_of(raw) {
                Some((start, end)) => NormalizedName {
                    words: clean(&raw[..start]),
                    had_care_of: true,
                    care_of_suffix: clean(&raw[end..]),
                },
                None => NormalizedName::from_words(clean(raw)),
            },
            Role::Assignee => NormalizedName::from_words(clean(raw)),
        }
    }
}

/// Byte span of the first `c/o` or `c/-` marker that starts a word.
fn find_care_of(raw: &str) -> Option<(usize, usize)> {
    let bytes = raw.as_bytes();
    (0..bytes.len().saturating_sub(2)).find_map(|i| {
        let head = bytes[i].eq_ignore_ascii_case(&b'c') && bytes[i + 1] == b'/';
        let tail = bytes[i + 2].eq_ignore_ascii_case(&b'o') || bytes[i + 2] == b'-';
        // `c` is ASCII, so `i` is a char boundary once `head` holds
        let boundary = || i == 0 || !raw[..i].chars().next_back().is_some_and(char::is_alphanumeric);
        (head && tail && boundary()).then_some((i, i + 3))
    })
}

fn is_accented_latin(c: char) -> bool {
    let mut parts = 0;
    let mut marked = false;
    decompose_canonical(c, |d| {
        parts += 1;
        marked |= is_combining_mark(d);
    });
    if parts > 1 && marked {
        return true;
    }
    // precomposed Latin letters without a canonical decomposition (ø, ł, ß, ...)
    matches!(c as u32, 0x00C0..=0x024F | 0x1E00..=0x1EFF)
}

/// Character-level folding: lowercase ASCII, accented letters to `x`,
/// symbols to spaces. Non-Latin letters are only lowercased.
pub fn fold(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_was_letter = false;
    for c in raw.nfc() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_was_letter = c.is_ascii_alphabetic();
        } else if is_combining_mark(c) {
            // a mark that did not compose still accents the preceding letter
            if last_was_letter {
                out.pop();
                out.push('x');
            }
        } else if c.is_alphabetic() {
            if is_accented_latin(c) {
                out.push('x');
            } else {
                out.extend(c.to_lowercase());
            }
            last_was_letter = true;
        } else {
            out.push(' ');
            last_was_letter = false;
        }
    }
    out
}

/// Whitespace split with single-character words removed.
fn tokens(folded: &str) -> Vec<String> {
    folded
        .split_whitespace()
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_string)
        .collect()
}

/// Levenshtein distance of at most one, computed without a DP table.
pub fn edit_distance_le_1(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    match long.len() - short.len() {
        0 => short.iter().zip(long.iter()).filter(|(x, y)| x != y).count() <= 1,
        1 => {
            let prefix = short
                .iter()
                .zip(long.iter())
                .take_while(|(x, y)| x == y)
                .count();
            short[prefix..] == long[prefix + 1..]
        }
        _ => false,
    }
}
