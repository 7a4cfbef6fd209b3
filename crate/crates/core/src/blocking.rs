//! Same-point matching: name/location sites grouped by identical
//! high-resolution coordinates, with the role's matcher run over every pair
//! of distinct names inside each group.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::assignee::assignees_match;
use crate::cluster::UnionFind;
use crate::corpus::{CanonicalPoint, GeoPoint, Role};
use crate::inventor::{inventors_match, prune_links, LinkEvidence};
use crate::lexicon::Lexicon;
use crate::textnorm::NormalizedName;

/// Comparison window used once a block exceeds the configured size cap.
pub const NEIGHBORHOOD_WINDOW: usize = 32;

/// One normalized name at one point, shared by every mention that has it
/// there. Mentions with no usable point or no usable name get a site of
/// their own with `point == None`.
#[derive(Clone, Debug)]
pub struct Site {
    pub role: Role,
    pub name: NormalizedName,
    pub key: String,
    pub point: Option<CanonicalPoint>,
    pub quality: u8,
    pub mentions: Vec<usize>,
}

impl Site {
    pub fn is_high_res(&self, threshold: u8) -> bool {
        self.point.is_some() && self.quality >= threshold
    }

    pub fn geo(&self) -> Option<GeoPoint> {
        self.point.map(|p| GeoPoint::new(p.lat(), p.lon(), self.quality))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SiteTable {
    pub sites: Vec<Site>,
    /// Sites of each mention, by mention index.
    pub mention_sites: Vec<Vec<usize>>,
}

impl SiteTable {
    /// `names[i]` and `points[i]` belong to mention `i`; `points` should be
    /// the best-quality points of its geocode.
    pub fn build(roles: &[Role], names: &[NormalizedName], points: &[Vec<GeoPoint>]) -> Self {
        assert_eq!(roles.len(), names.len());
        assert_eq!(roles.len(), points.len());
        type Key = (Role, String, CanonicalPoint);
        let mut located: BTreeMap<Key, (u8, Vec<usize>)> = BTreeMap::new();
        let mut lone: Vec<usize> = Vec::new();
        for (i, ((role, name), pts)) in roles.iter().zip(names).zip(points).enumerate() {
            if name.is_degenerate() || pts.is_empty() {
                lone.push(i);
                continue;
            }
            let key = name.key();
            for p in pts {
                let slot = located
                    .entry((*role, key.clone(), p.canonical()))
                    .or_insert((0, Vec::new()));
                slot.0 = slot.0.max(p.quality);
                if slot.1.last() != Some(&i) {
                    slot.1.push(i);
                }
            }
        }

        let mut table = SiteTable {
            sites: Vec::with_capacity(located.len() + lone.len()),
            mention_sites: vec![Vec::new(); roles.len()],
        };
        for ((role, key, point), (quality, mentions)) in located {
            let idx = table.sites.len();
            for &m in &mentions {
                table.mention_sites[m].push(idx);
            }
            table.sites.push(Site {
                role,
                name: names[mentions[0]].clone(),
                key,
                point: Some(point),
                quality,
                mentions,
            });
        }
        for m in lone {
            table.mention_sites[m].push(table.sites.len());
            table.sites.push(Site {
                role: roles[m],
                name: names[m].clone(),
                key: names[m].key(),
                point: None,
                quality: 0,
                mentions: vec![m],
            });
        }
        table
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub role: Role,
    pub point: CanonicalPoint,
    /// Site indices, one per distinct name at the point.
    pub members: Vec<usize>,
}

/// One block per distinct high-resolution point per role, ordered by
/// `(role, point)`.
pub fn build_blocks(table: &SiteTable, threshold: u8) -> Vec<Block> {
    let mut groups: BTreeMap<(Role, CanonicalPoint), Vec<usize>> = BTreeMap::new();
    for (idx, site) in table.sites.iter().enumerate() {
        if site.is_high_res(threshold) {
            let point = site.point.expect("high-res sites are located");
            groups.entry((site.role, point)).or_default().push(idx);
        }
    }
    groups
        .into_iter()
        .map(|((role, point), members)| Block {
            role,
            point,
            members,
        })
        .collect()
}

/// Name matcher for one role.
#[derive(Clone, Copy)]
pub enum Matcher<'a> {
    Assignee(&'a Lexicon),
    Inventor,
}

impl<'a> Matcher<'a> {
    pub fn for_role(role: Role, lexicon: &'a Lexicon) -> Self {
        match role {
            Role::Assignee => Matcher::Assignee(lexicon),
            Role::Inventor => Matcher::Inventor,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockLinks {
    pub links: Vec<(usize, usize)>,
    pub comparisons: usize,
    pub pruned: usize,
    pub capped: bool,
}

fn candidate_pairs(block: &Block, table: &SiteTable, cap: Option<usize>) -> (Vec<(usize, usize)>, bool) {
    let n = block.members.len();
    match cap {
        Some(cap) if n > cap => {
            log::warn!(
                "block at {} has {n} names, above cap {cap}; using sorted-neighborhood comparison",
                block.point
            );
            let mut sorted = block.members.clone();
            sorted.sort_by(|&a, &b| table.sites[a].key.cmp(&table.sites[b].key));
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in i + 1..n.min(i + 1 + NEIGHBORHOOD_WINDOW) {
                    pairs.push((sorted[i], sorted[j]));
                }
            }
            (pairs, true)
        }
        _ => {
            let m = &block.members;
            let pairs = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (m[i], m[j])))
                .collect();
            (pairs, false)
        }
    }
}

/// Accepted site links for one block. Inventor links are pruned per block.
pub fn block_links(block: &Block, table: &SiteTable, matcher: Matcher<'_>, cap: Option<usize>) -> BlockLinks {
    let (pairs, capped) = candidate_pairs(block, table, cap);
    let comparisons = pairs.len();
    let name = |i: usize| &table.sites[i].name;
    match matcher {
        Matcher::Assignee(lex) => BlockLinks {
            links: pairs
                .into_iter()
                .filter(|&(a, b)| assignees_match(name(a), name(b), lex).is_match())
                .collect(),
            comparisons,
            pruned: 0,
            capped,
        },
        Matcher::Inventor => {
            let evidence: Vec<((usize, usize), LinkEvidence)> = pairs
                .into_iter()
                .filter_map(|(a, b)| inventors_match(name(a), name(b)).map(|e| ((a, b), e)))
                .collect();
            let before = evidence.len();
            let links = prune_links(evidence);
            BlockLinks {
                pruned: before - links.len(),
                links,
                comparisons,
                capped,
            }
        }
    }
}

/// Runs one block and merges its links into `state`.
pub fn cluster_block(
    block: &Block,
    table: &SiteTable,
    matcher: Matcher<'_>,
    cap: Option<usize>,
    state: &mut UnionFind,
) -> BlockLinks {
    let links = block_links(block, table, matcher, cap);
    for &(a, b) in &links.links {
        state.union(a, b);
    }
    links
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SamePointStats {
    pub blocks: usize,
    pub comparisons: usize,
    pub links: usize,
    pub pruned: usize,
    pub capped_blocks: usize,
}

/// All blocks, matched in parallel on the current rayon pool; merges are
/// applied afterwards in block order.
pub fn match_all_blocks(
    blocks: &[Block],
    table: &SiteTable,
    lexicon: &Lexicon,
    cap: Option<usize>,
    state: &mut UnionFind,
) -> SamePointStats {
    let results: Vec<BlockLinks> = blocks
        .par_iter()
        .map(|b| block_links(b, table, Matcher::for_role(b.role, lexicon), cap))
        .collect();
    let mut stats = SamePointStats {
        blocks: blocks.len(),
        ..Default::default()
    };
    for r in results {
        stats.comparisons += r.comparisons;
        stats.links += r.links.len();
        stats.pruned += r.pruned;
        stats.capped_blocks += usize::from(r.capped);
        for (a, b) in r.links {
            state.union(a, b);
        }
    }
    stats
}

/// Debug dump: `cluster_id  name  lat  lon  quality` for located sites.
pub fn render_cluster_dump(table: &SiteTable, state: &mut UnionFind) -> String {
    let labels = state.labels();
    let mut out = String::from("cluster_id\tname\tlat\tlon\tquality\n");
    for (idx, site) in table.sites.iter().enumerate() {
        if let Some(p) = site.point {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                labels[idx], site.key, p, site.quality
            ));
        }
    }
    out
}
