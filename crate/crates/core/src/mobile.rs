//! Mobile-inventor merge.
//!
//! After nearby linking, two inventor entities that still share an exact name
//! sit more than the link radius apart. They are merged when their patents
//! corroborate each other: a shared co-inventor, a shared co-assignee, a
//! common family, or a citation in either direction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::cluster::UnionFind;
use crate::corpus::{EntityId, PatentContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Signal {
    SharedCoinventor,
    SharedCoassignee,
    SameTriadicFamily,
    Citation,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::SharedCoinventor => "coinventor",
            Signal::SharedCoassignee => "coassignee",
            Signal::SameTriadicFamily => "family",
            Signal::Citation => "citation",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An inventor entity after nearby linking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalEntity {
    pub id: EntityId,
    pub names: BTreeSet<String>,
    pub patents: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobileCandidate {
    /// Indices into the entity slice, `a < b`.
    pub a: usize,
    pub b: usize,
    pub id_a: EntityId,
    pub id_b: EntityId,
    /// Smallest exact name the two share.
    pub name: String,
    pub signals: BTreeSet<Signal>,
}

impl MobileCandidate {
    pub fn is_supported(&self) -> bool {
        !self.signals.is_empty()
    }
}

/// Per-entity evidence: value -> patents of the entity carrying it.
#[derive(Default)]
struct Evidence<'a> {
    coinventors: HashMap<&'a EntityId, BTreeSet<&'a str>>,
    coassignees: HashMap<&'a EntityId, BTreeSet<&'a str>>,
    families: HashMap<&'a str, BTreeSet<&'a str>>,
    cited: BTreeSet<&'a str>,
}

fn evidence<'a>(entity: &'a LocalEntity, contexts: &'a BTreeMap<String, PatentContext>) -> Evidence<'a> {
    let mut ev = Evidence::default();
    for p in &entity.patents {
        let Some(ctx) = contexts.get(p) else { continue };
        for c in &ctx.coinventor_entity_ids {
            if c != &entity.id {
                ev.coinventors.entry(c).or_default().insert(p);
            }
        }
        for c in &ctx.assignee_entity_ids {
            ev.coassignees.entry(c).or_default().insert(p);
        }
        if let Some(f) = &ctx.family_id {
            ev.families.entry(f).or_default().insert(p);
        }
        ev.cited.extend(ctx.cited_patents.iter().map(String::as_str));
    }
    ev
}

/// True when some value is carried by a patent of each side and the two
/// patents differ.
fn shared_on_distinct_patents<K: Eq + std::hash::Hash>(
    x: &HashMap<K, BTreeSet<&str>>,
    y: &HashMap<K, BTreeSet<&str>>,
    skip: impl Fn(&K) -> bool,
) -> bool {
    x.iter().any(|(k, px)| {
        !skip(k)
            && y.get(k).is_some_and(|py| {
                px.len() > 1 || py.len() > 1 || px.iter().next() != py.iter().next()
            })
    })
}

fn signals(
    a: &LocalEntity,
    b: &LocalEntity,
    ea: &Evidence<'_>,
    eb: &Evidence<'_>,
) -> BTreeSet<Signal> {
    let mut out = BTreeSet::new();
    let neither = |c: &&EntityId| *c == &a.id || *c == &b.id;
    if shared_on_distinct_patents(&ea.coinventors, &eb.coinventors, neither) {
        out.insert(Signal::SharedCoinventor);
    }
    if shared_on_distinct_patents(&ea.coassignees, &eb.coassignees, |_| false) {
        out.insert(Signal::SharedCoassignee);
    }
    if shared_on_distinct_patents(&ea.families, &eb.families, |_| false) {
        out.insert(Signal::SameTriadicFamily);
    }
    let cites = |ev: &Evidence<'_>, other: &LocalEntity| other.patents.iter().any(|p| ev.cited.contains(p.as_str()));
    if cites(ea, b) || cites(eb, a) {
        out.insert(Signal::Citation);
    }
    out
}

/// One candidate per unordered pair of entities sharing an exact name, with
/// signals computed from the patent contexts. Output is ordered by `(a, b)`.
pub fn find_candidates(
    entities: &[LocalEntity],
    contexts: &BTreeMap<String, PatentContext>,
) -> Vec<MobileCandidate> {
    let mut by_name: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in entities.iter().enumerate() {
        for n in &e.names {
            by_name.entry(n).or_default().push(i);
        }
    }
    let mut pairs: BTreeMap<(usize, usize), &str> = BTreeMap::new();
    for (name, ids) in &by_name {
        for (x, &i) in ids.iter().enumerate() {
            for &j in &ids[x + 1..] {
                pairs.entry((i.min(j), i.max(j))).or_insert(name);
            }
        }
    }
    if pairs.is_empty() {
        return Vec::new();
    }

    let mut involved: BTreeSet<usize> = BTreeSet::new();
    for &(a, b) in pairs.keys() {
        involved.insert(a);
        involved.insert(b);
    }
    let ev: HashMap<usize, Evidence<'_>> = involved
        .into_iter()
        .map(|i| (i, evidence(&entities[i], contexts)))
        .collect();

    let pairs: Vec<((usize, usize), &str)> = pairs.into_iter().collect();
    pairs
        .par_iter()
        .map(|&((a, b), name)| MobileCandidate {
            a,
            b,
            id_a: entities[a].id.clone(),
            id_b: entities[b].id.clone(),
            name: name.to_string(),
            signals: signals(&entities[a], &entities[b], &ev[&a], &ev[&b]),
        })
        .collect()
}

/// Unions every candidate with at least one signal. Returns the number of
/// candidates that joined two previously separate groups.
pub fn merge_mobile(candidates: &[MobileCandidate], state: &mut UnionFind) -> usize {
    candidates
        .iter()
        .filter(|c| c.is_supported())
        .filter(|c| state.union(c.a, c.b))
        .count()
}

/// Audit log: `id_a  id_b  signals  merged`.
pub fn render_audit_log(candidates: &[MobileCandidate]) -> String {
    let mut out = String::from("id_a\tid_b\tsignals\tmerged\n");
    for c in candidates {
        let signals: Vec<&str> = c.signals.iter().map(|s| s.as_str()).collect();
        let signals = if signals.is_empty() { "-".to_string() } else { signals.join(",") };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            c.id_a,
            c.id_b,
            signals,
            if c.is_supported() { "yes" } else { "no" }
        ));
    }
    out
}
