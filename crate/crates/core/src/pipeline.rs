//! End-to-end run: geocode, same-point matching, nearby linking, mobile
//! merge, then the entity map and a per-stage summary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::blocking::{build_blocks, match_all_blocks, render_cluster_dump, SamePointStats, SiteTable};
use crate::cluster::UnionFind;
use crate::corpus::{
    load_contexts, load_mentions, render_entity_map, write_file, EntityId, GeoPoint, Mention,
    MentionId, MentionLoad, PatentContext, Resolution, Role, TableFormat, HIGH_RES_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::geocode::{address_key, best_points, FixtureProvider, GeocodeCache, GeocodeRecord, Geocoder, QualityTiers};
use crate::lexicon::{extract_person_tokens, Lexicon};
use crate::mobile::{find_candidates, merge_mobile, render_audit_log, LocalEntity, MobileCandidate};
use crate::nearby::{haversine_km, link_same_name, NearbyStats, DEFAULT_LINK_RADIUS_KM};
use crate::textnorm::{NormalizedName, Normalizer};

pub const ENTITY_MAP_FILE: &str = "entity_map.tsv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RUN_HASH_FILE: &str = "run.hash";
pub const CLUSTER_DUMP_FILE: &str = "same_point_clusters.tsv";
pub const LOCAL_IDS_FILE: &str = "local_ids.tsv";
pub const MOBILE_AUDIT_FILE: &str = "mobile_audit.tsv";

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub high_res_threshold: u8,
    pub link_radius_km: f64,
    pub jobs: usize,
    pub seed: u64,
    pub assignee_stoplist: Option<PathBuf>,
    pub inventor_stoplist: Option<PathBuf>,
    pub manual_common: Option<PathBuf>,
    pub place_names: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    /// Offline provider answers, `address  lat  lon  code`.
    pub geocode_fixture: Option<PathBuf>,
    pub geocode_in_flight: usize,
    pub block_size_cap: Option<usize>,
    pub max_chain_hops: Option<usize>,
    pub quality_tiers: QualityTiers,
    pub debug: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            high_res_threshold: HIGH_RES_THRESHOLD,
            link_radius_km: DEFAULT_LINK_RADIUS_KM,
            jobs: 1,
            seed: 42,
            assignee_stoplist: None,
            inventor_stoplist: None,
            manual_common: None,
            place_names: None,
            cache_path: None,
            geocode_fixture: None,
            geocode_in_flight: 4,
            block_size_cap: None,
            max_chain_hops: None,
            quality_tiers: QualityTiers::default(),
            debug: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "" | "none" | "0" => Ok(None),
        v => parse_num(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        v => Err(Error::Config(format!("{key}: expected a boolean, found `{v}`"))),
    }
}

impl PipelineConfig {
    /// Applies one `key=value` setting. Paths are taken relative to `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        match key {
            "high_res_threshold" => self.high_res_threshold = parse_num(key, value)?,
            "link_radius_km" => self.link_radius_km = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "assignee_stoplist" => self.assignee_stoplist = path(),
            "inventor_stoplist" => self.inventor_stoplist = path(),
            "manual_common" => self.manual_common = path(),
            "place_names" => self.place_names = path(),
            "cache_path" => self.cache_path = path(),
            "geocode_fixture" => self.geocode_fixture = path(),
            "geocode_in_flight" => self.geocode_in_flight = parse_num(key, value)?,
            "block_size_cap" => self.block_size_cap = parse_optional(key, value)?,
            "max_chain_hops" => self.max_chain_hops = parse_optional(key, value)?,
            "debug" => self.debug = parse_bool(key, value)?,
            k => match k.strip_prefix("quality_tier.") {
                Some(code) if !code.is_empty() => self.quality_tiers.set(code, parse_num(key, value)?),
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            },
        }
        Ok(())
    }

    /// Flat `key=value` text; `#` starts a comment.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", idx + 1)))?;
            config.set(key.trim(), value.trim(), base)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
        PipelineConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.high_res_threshold == 0 || self.high_res_threshold > 100 {
            return Err(Error::Config("high_res_threshold must be in 1..=100".into()));
        }
        if !(self.link_radius_km.is_finite() && self.link_radius_km > 0.0) {
            return Err(Error::Config("link_radius_km must be positive".into()));
        }
        if self.jobs == 0 || self.geocode_in_flight == 0 {
            return Err(Error::Config("jobs and geocode_in_flight must be positive".into()));
        }
        Ok(())
    }

    /// Settings that change the partition, one per line, for hashing.
    fn fingerprint(&self) -> String {
        let mut s = format!(
            "high_res_threshold={}\nlink_radius_km={}\nblock_size_cap={:?}\nmax_chain_hops={:?}\n",
            self.high_res_threshold, self.link_radius_km, self.block_size_cap, self.max_chain_hops
        );
        for (k, v) in self.quality_tiers.iter() {
            let _ = writeln!(s, "quality_tier.{k}={v}");
        }
        for p in [&self.assignee_stoplist, &self.inventor_stoplist, &self.manual_common, &self.place_names] {
            let digest = p.as_ref().and_then(|p| fs::read(p).ok()).map(|b| hex(&Sha256::digest(b)));
            let _ = writeln!(s, "list={digest:?}");
        }
        s
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Counts for one role, stage by stage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoleSummary {
    pub mentions: usize,
    pub geocoded: usize,
    pub high_res_mentions: usize,
    pub name_point_pairs: usize,
    pub blocks: usize,
    pub after_same_point: usize,
    pub after_nearby: usize,
    pub after_mobile: usize,
    pub high_res_ids: usize,
}

type Column = fn(&RoleSummary) -> usize;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub inventor: RoleSummary,
    pub assignee: RoleSummary,
    pub same_point: SamePointStats,
    pub nearby: NearbyStats,
    pub mobile_candidates: usize,
    pub mobile_supported: usize,
    pub mobile_merges: usize,
}

impl RunSummary {
    pub fn role(&self, role: Role) -> &RoleSummary {
        match role {
            Role::Inventor => &self.inventor,
            Role::Assignee => &self.assignee,
        }
    }

    fn role_mut(&mut self, role: Role) -> &mut RoleSummary {
        match role {
            Role::Inventor => &mut self.inventor,
            Role::Assignee => &mut self.assignee,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<34}{:>12}{:>12}", "", "assignee", "inventor");
        let rows: [(&str, Column); 9] = [
            ("mentions", |r| r.mentions),
            ("geocoded mentions", |r| r.geocoded),
            ("high-resolution mentions", |r| r.high_res_mentions),
            ("name/point pairs", |r| r.name_point_pairs),
            ("high-resolution blocks", |r| r.blocks),
            ("IDs after same-point matching", |r| r.after_same_point),
            ("IDs after nearby linking", |r| r.after_nearby),
            ("IDs after mobile merge", |r| r.after_mobile),
            ("high-resolution IDs", |r| r.high_res_ids),
        ];
        for (label, f) in rows {
            let _ = writeln!(s, "{label:<34}{:>12}{:>12}", f(&self.assignee), f(&self.inventor));
        }
        let _ = writeln!(
            s,
            "\nsame-point: {} comparisons, {} links, {} pruned, {} capped blocks",
            self.same_point.comparisons, self.same_point.links, self.same_point.pruned, self.same_point.capped_blocks
        );
        let _ = writeln!(
            s,
            "nearby: {} names, {} multi-point links, {} distance links",
            self.nearby.names, self.nearby.multi_point_links, self.nearby.distance_links
        );
        let _ = writeln!(
            s,
            "mobile: {} candidates, {} with a signal, {} merges",
            self.mobile_candidates, self.mobile_supported, self.mobile_merges
        );
        s
    }
}

/// Everything a run produces before it is written out.
#[derive(Clone, Debug, Default)]
pub struct Disambiguation {
    pub assignments: BTreeMap<MentionId, EntityId>,
    pub summary: RunSummary,
    pub candidates: Vec<MobileCandidate>,
    pub cluster_dump: Option<String>,
    pub local_ids: Option<String>,
}

/// Best-quality points per mention, from records keyed by address key.
pub fn mention_points(mentions: &[Mention], geocodes: &BTreeMap<String, GeocodeRecord>) -> Vec<Vec<GeoPoint>> {
    mentions
        .iter()
        .map(|m| {
            geocodes
                .get(&address_key(&m.raw_address))
                .map(best_points)
                .unwrap_or_default()
        })
        .collect()
}

fn role_components(comps: &[Vec<usize>], table: &SiteTable) -> Result<BTreeMap<Role, usize>> {
    let mut out: BTreeMap<Role, usize> = BTreeMap::new();
    for comp in comps {
        let role = table.sites[comp[0]].role;
        if comp.iter().any(|&s| table.sites[s].role != role) {
            return Err(Error::Invariant("a cluster mixes inventors and assignees".into()));
        }
        *out.entry(role).or_default() += 1;
    }
    Ok(out)
}

fn component_mentions(comp: &[usize], table: &SiteTable, mentions: &[Mention]) -> Vec<usize> {
    let mut ms: Vec<usize> = comp.iter().flat_map(|&s| table.sites[s].mentions.iter().copied()).collect();
    ms.sort_unstable_by(|&a, &b| mentions[a].id.cmp(&mentions[b].id));
    ms.dedup();
    ms
}

fn resolution(high: bool) -> Resolution {
    if high {
        Resolution::HighRes
    } else {
        Resolution::LowRes
    }
}

/// The four stages over loaded inputs. Runs parallel work on the current
/// rayon pool; the result does not depend on the pool size.
pub fn disambiguate(
    mentions: &[Mention],
    geocodes: &BTreeMap<String, GeocodeRecord>,
    contexts: &BTreeMap<String, PatentContext>,
    config: &PipelineConfig,
) -> Result<Disambiguation> {
    let normalizer = Normalizer::from_files(config.assignee_stoplist.as_deref(), config.inventor_stoplist.as_deref())?;
    let names: Vec<NormalizedName> = mentions
        .iter()
        .map(|m| normalizer.normalize(&m.raw_name, m.role()))
        .collect();
    let persons = extract_person_tokens(
        mentions
            .iter()
            .zip(&names)
            .filter(|(m, _)| m.role() == Role::Inventor)
            .map(|(_, n)| n),
    );
    let lexicon = Lexicon::from_files(config.manual_common.as_deref(), config.place_names.as_deref(), persons)?;
    let roles: Vec<Role> = mentions.iter().map(Mention::role).collect();
    let points = mention_points(mentions, geocodes);
    let threshold = config.high_res_threshold;

    let mut summary = RunSummary::default();
    for (m, pts) in mentions.iter().zip(&points) {
        let r = summary.role_mut(m.role());
        r.mentions += 1;
        r.geocoded += usize::from(!pts.is_empty());
        r.high_res_mentions += usize::from(pts.iter().any(|p| p.is_high_res(threshold)));
    }

    // same-point matching
    let table = SiteTable::build(&roles, &names, &points);
    for site in table.sites.iter().filter(|s| s.point.is_some()) {
        summary.role_mut(site.role).name_point_pairs += 1;
    }
    let blocks = build_blocks(&table, threshold);
    for b in &blocks {
        summary.role_mut(b.role).blocks += 1;
    }
    let mut uf = UnionFind::new(table.len());
    summary.same_point = match_all_blocks(&blocks, &table, &lexicon, config.block_size_cap, &mut uf);
    let cluster_dump = config.debug.then(|| render_cluster_dump(&table, &mut uf.clone()));
    for (role, n) in role_components(&uf.components(), &table)? {
        summary.role_mut(role).after_same_point = n;
    }

    // nearby linking
    summary.nearby = link_same_name(&table, config.link_radius_km, config.max_chain_hops, &mut uf);
    let comps = uf.components();
    for (role, n) in role_components(&comps, &table)? {
        summary.role_mut(role).after_nearby = n;
    }
    for role in Role::ALL {
        let r = summary.role(role);
        let sites = table.sites.iter().filter(|s| s.role == role).count();
        if r.after_nearby > r.after_same_point || r.after_same_point > sites {
            return Err(Error::Invariant(format!("{role} ID counts grew between stages")));
        }
    }

    let mut assignments: BTreeMap<MentionId, EntityId> = BTreeMap::new();
    let mut local: Vec<LocalEntity> = Vec::new();
    let mut local_members: Vec<Vec<usize>> = Vec::new();
    let mut local_high: Vec<bool> = Vec::new();
    let mut local_dump = String::from("entity_id\tname\tresolution\n");
    for comp in &comps {
        let role = table.sites[comp[0]].role;
        let high = comp.iter().any(|&s| table.sites[s].is_high_res(threshold));
        let ms = component_mentions(comp, &table, mentions);
        let id = EntityId::from_members(role, ms.iter().map(|&m| &mentions[m].id), resolution(high));
        if config.debug {
            let name = comp.iter().map(|&s| table.sites[s].key.as_str()).min().unwrap_or("");
            let _ = writeln!(local_dump, "{id}\t{name}\t{}", id.resolution.as_str());
        }
        match role {
            Role::Assignee => {
                for &m in &ms {
                    assignments.insert(mentions[m].id.clone(), id.clone());
                }
            }
            Role::Inventor => {
                let located = comp.iter().any(|&s| table.sites[s].point.is_some());
                let names = if located {
                    comp.iter()
                        .map(|&s| table.sites[s].key.clone())
                        .filter(|k| !k.is_empty())
                        .collect()
                } else {
                    BTreeSet::new()
                };
                local.push(LocalEntity {
                    id,
                    names,
                    patents: ms.iter().map(|&m| mentions[m].patent_id().to_string()).collect(),
                });
                local_members.push(ms);
                local_high.push(high);
            }
        }
    }

    // mobile merge
    let mut ctx = contexts.clone();
    for m in mentions {
        ctx.entry(m.patent_id().to_string())
            .or_insert_with(|| PatentContext::new(m.patent_id()));
    }
    for (mid, id) in &assignments {
        if let Some(c) = ctx.get_mut(&mid.patent_id) {
            c.assignee_entity_ids.insert(id.clone());
        }
    }
    for e in &local {
        for p in &e.patents {
            if let Some(c) = ctx.get_mut(p) {
                c.coinventor_entity_ids.insert(e.id.clone());
            }
        }
    }
    let candidates = find_candidates(&local, &ctx);
    if config.debug && config.max_chain_hops.is_none() {
        check_candidates_distant(&candidates, &local, &table, &uf_sites_by_local(&comps, &table), config.link_radius_km)?;
    }
    let mut mobile_uf = UnionFind::new(local.len());
    summary.mobile_candidates = candidates.len();
    summary.mobile_supported = candidates.iter().filter(|c| c.is_supported()).count();
    summary.mobile_merges = merge_mobile(&candidates, &mut mobile_uf);

    for group in mobile_uf.components() {
        let high = group.iter().any(|&g| local_high[g]);
        let mut ms: Vec<&MentionId> = group
            .iter()
            .flat_map(|&g| local_members[g].iter().map(|&m| &mentions[m].id))
            .collect();
        ms.sort_unstable();
        let id = EntityId::from_members(Role::Inventor, ms.iter().copied(), resolution(high));
        for m in ms {
            assignments.insert(m.clone(), id.clone());
        }
    }

    summary.assignee.after_mobile = summary.assignee.after_nearby;
    summary.inventor.after_mobile = mobile_uf.count();
    if summary.inventor.after_mobile > summary.inventor.after_nearby {
        return Err(Error::Invariant("mobile merge increased the inventor ID count".into()));
    }
    if assignments.len() != mentions.len() {
        return Err(Error::Invariant(format!(
            "{} mentions but {} assignments",
            mentions.len(),
            assignments.len()
        )));
    }
    let mut high_ids: BTreeSet<&EntityId> = BTreeSet::new();
    for id in assignments.values().filter(|id| id.resolution == Resolution::HighRes) {
        high_ids.insert(id);
    }
    for id in high_ids {
        if id.value.starts_with('A') {
            summary.assignee.high_res_ids += 1;
        } else {
            summary.inventor.high_res_ids += 1;
        }
    }

    Ok(Disambiguation {
        assignments,
        summary,
        candidates,
        cluster_dump,
        local_ids: config.debug.then_some(local_dump),
    })
}

/// Located sites of each inventor component, in the order `local` was built.
fn uf_sites_by_local(comps: &[Vec<usize>], table: &SiteTable) -> Vec<Vec<usize>> {
    comps
        .iter()
        .filter(|c| table.sites[c[0]].role == Role::Inventor)
        .map(|c| c.iter().copied().filter(|&s| table.sites[s].point.is_some()).collect())
        .collect()
}

/// Every mobile candidate should be farther apart than the link radius under
/// its shared name; anything closer means nearby linking missed a pair.
fn check_candidates_distant(
    candidates: &[MobileCandidate],
    local: &[LocalEntity],
    table: &SiteTable,
    sites: &[Vec<usize>],
    radius_km: f64,
) -> Result<()> {
    debug_assert_eq!(local.len(), sites.len());
    for c in candidates {
        let geo = |i: usize| -> Vec<GeoPoint> {
            sites[i]
                .iter()
                .filter(|&&s| table.sites[s].key == c.name)
                .filter_map(|&s| table.sites[s].geo())
                .collect()
        };
        let (ga, gb) = (geo(c.a), geo(c.b));
        for p in &ga {
            for q in &gb {
                if haversine_km(p, q) < radius_km {
                    return Err(Error::Invariant(format!(
                        "mobile candidates {} and {} are within {radius_km} km",
                        c.id_a, c.id_b
                    )));
                }
            }
        }
    }
    Ok(())
}

/// One ID per distinct `(role, raw name)`: the no-disambiguation reference.
pub fn baseline_assignments(mentions: &[Mention]) -> BTreeMap<MentionId, EntityId> {
    let mut groups: BTreeMap<(Role, &str), Vec<&MentionId>> = BTreeMap::new();
    for m in mentions {
        groups.entry((m.role(), m.raw_name.trim())).or_default().push(&m.id);
    }
    let mut out = BTreeMap::new();
    for ((role, _), ids) in groups {
        let id = EntityId::from_members(role, ids.iter().copied(), Resolution::LowRes);
        for m in ids {
            out.insert(m.clone(), id.clone());
        }
    }
    out
}

fn provider(config: &PipelineConfig) -> Result<Option<FixtureProvider>> {
    config.geocode_fixture.as_deref().map(FixtureProvider::load).transpose()
}

fn open_cache(config: &PipelineConfig) -> Result<GeocodeCache> {
    match &config.cache_path {
        Some(p) => GeocodeCache::open(p),
        None => Ok(GeocodeCache::in_memory()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GeocodeSummary {
    pub addresses: usize,
    pub located: usize,
    pub not_found: usize,
    pub failed: usize,
    pub uncached: usize,
}

/// Geocode records for every mention address: cached answers first, then the
/// configured provider. Without a provider, misses stay unresolved.
pub fn geocode_mentions(
    mentions: &[Mention],
    config: &PipelineConfig,
) -> Result<(BTreeMap<String, GeocodeRecord>, GeocodeSummary)> {
    let mut cache = open_cache(config)?;
    let addresses = mentions.iter().map(|m| m.raw_address.as_str());
    let records = match provider(config)? {
        Some(p) => Geocoder::new(&p, config.quality_tiers.clone())
            .with_in_flight(config.geocode_in_flight)
            .geocode_all(addresses, &mut cache)?,
        None => {
            let mut out = BTreeMap::new();
            for a in addresses {
                let key = address_key(a);
                if let Some(r) = cache.get(&key) {
                    out.insert(key, r.clone());
                } else if key.is_empty() {
                    out.insert(key.clone(), GeocodeRecord::empty(key));
                }
            }
            out
        }
    };
    cache.flush()?;
    let keys: BTreeSet<String> = mentions.iter().map(|m| address_key(&m.raw_address)).collect();
    let mut s = GeocodeSummary {
        addresses: keys.len(),
        ..Default::default()
    };
    for k in &keys {
        match records.get(k) {
            None => s.uncached += 1,
            Some(r) if r.is_retryable() => s.failed += 1,
            Some(r) if r.points.is_empty() => s.not_found += 1,
            Some(_) => s.located += 1,
        }
    }
    if s.uncached > 0 {
        log::warn!("{} addresses have no cached geocode and no provider is configured", s.uncached);
    }
    Ok((records, s))
}

fn snapshot(records: &BTreeMap<String, GeocodeRecord>) -> String {
    let mut s = String::new();
    for (k, r) in records {
        let _ = write!(s, "{k}|");
        for p in &r.points {
            let _ = write!(s, "{}:{}:{};", p.lat, p.lon, p.quality);
        }
        s.push('\n');
    }
    s
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::read(path, e))
}

/// Output files of one run, staged as temporaries and renamed on success.
struct Outputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    fn stage(&mut self, name: &str, content: &str) -> Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        self.staged.push((tmp.clone(), self.dir.join(name)));
        write_file(&tmp, content.as_bytes())
    }

    fn commit(mut self) -> Result<()> {
        let staged = std::mem::take(&mut self.staged);
        let mut done: Vec<&PathBuf> = Vec::new();
        for (tmp, dst) in &staged {
            if let Err(e) = fs::rename(tmp, dst) {
                for d in done {
                    let _ = fs::remove_file(d);
                }
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(Error::write(dst, e));
            }
            done.push(dst);
        }
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub load: MentionLoad,
    pub geocode: GeocodeSummary,
    pub summary: Option<RunSummary>,
    pub resumed: bool,
    pub out_dir: PathBuf,
}

/// Mentions, optional contexts, geocoding, the four stages, and the output
/// files. A run whose inputs, settings and geocodes hash to the stored
/// `run.hash` is skipped.
pub fn run(
    config: &PipelineConfig,
    mentions_path: &Path,
    contexts_path: Option<&Path>,
    out_dir: &Path,
    baseline: bool,
) -> Result<RunReport> {
    config.validate()?;
    let load = load_mentions(mentions_path, TableFormat::for_path(mentions_path))?;
    for e in &load.errors {
        log::warn!("{}:{}: {}", mentions_path.display(), e.line, e.message);
    }
    let contexts = match contexts_path {
        Some(p) => load_contexts(p, TableFormat::for_path(p))?.contexts,
        None => BTreeMap::new(),
    };
    let (records, geocode) = if baseline {
        (BTreeMap::new(), GeocodeSummary::default())
    } else {
        geocode_mentions(&load.mentions, config)?
    };

    let mut hasher = Sha256::new();
    hasher.update(if baseline { "baseline\n" } else { "pipeline\n" });
    hasher.update(config.fingerprint());
    hasher.update(read_bytes(mentions_path)?);
    hasher.update(b"\0");
    if let Some(p) = contexts_path {
        hasher.update(read_bytes(p)?);
    }
    hasher.update(b"\0");
    hasher.update(snapshot(&records));
    hasher.update(format!("debug={}", config.debug));
    let run_hash = hex(&hasher.finalize());

    let hash_path = out_dir.join(RUN_HASH_FILE);
    let unchanged = fs::read_to_string(&hash_path).is_ok_and(|h| h.trim() == run_hash);
    if unchanged && out_dir.join(ENTITY_MAP_FILE).exists() {
        log::info!("inputs unchanged since the last run, outputs kept");
        return Ok(RunReport {
            load,
            geocode,
            summary: None,
            resumed: true,
            out_dir: out_dir.to_path_buf(),
        });
    }

    let result = if baseline {
        Disambiguation {
            assignments: baseline_assignments(&load.mentions),
            ..Default::default()
        }
    } else {
        config
            .thread_pool()?
            .install(|| disambiguate(&load.mentions, &records, &contexts, config))?
    };

    let mut out = Outputs::new(out_dir)?;
    out.stage(ENTITY_MAP_FILE, &render_entity_map(&result.assignments))?;
    if !baseline {
        out.stage(SUMMARY_FILE, &result.summary.render())?;
    }
    if config.debug && !baseline {
        if let Some(d) = &result.cluster_dump {
            out.stage(CLUSTER_DUMP_FILE, d)?;
        }
        if let Some(d) = &result.local_ids {
            out.stage(LOCAL_IDS_FILE, d)?;
        }
        out.stage(MOBILE_AUDIT_FILE, &render_audit_log(&result.candidates))?;
    }
    out.stage(RUN_HASH_FILE, &format!("{run_hash}\n"))?;
    out.commit()?;

    Ok(RunReport {
        load,
        geocode,
        summary: (!baseline).then_some(result.summary),
        resumed: false,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Joins an entity map with the mentions it was built from.
pub fn trial_mentions(
    mentions: &[Mention],
    rows: &[crate::corpus::EntityMapRow],
) -> Result<Vec<crate::evaluation::TrialMention>> {
    let by_id: HashMap<&MentionId, &Mention> = mentions.iter().map(|m| (&m.id, m)).collect();
    rows.iter()
        .map(|r| {
            let m = by_id.get(&r.mention).ok_or_else(|| {
                Error::Alignment(format!("entity map row {} has no matching mention", r.mention))
            })?;
            Ok(crate::evaluation::TrialMention {
                patent_id: r.mention.patent_id.clone(),
                role: r.mention.role,
                raw_name: m.raw_name.clone(),
                entity_id: r.entity.value.clone(),
                high_res: r.entity.resolution == Resolution::HighRes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Office;

    fn mention(p: &str, role: Role, pos: u32, name: &str, addr: &str) -> Mention {
        Mention::new(MentionId::new(p, role, pos), Office::Epo, name, addr)
    }

    fn record(addr: &str, pts: &[(f64, f64, u8)]) -> (String, GeocodeRecord) {
        let key = address_key(addr);
        (
            key.clone(),
            GeocodeRecord {
                address_key: key,
                points: pts.iter().map(|&(a, b, q)| GeoPoint::new(a, b, q)).collect(),
                provider: "test".into(),
                fetched_at: 0,
                error: None,
            },
        )
    }

    #[test]
    fn config_parsing() {
        let c = PipelineConfig::parse(
            "# settings\nhigh_res_threshold = 80\nlink_radius_km=15.5\njobs=3\nmax_chain_hops=2\nquality_tier.street=75\ncache_path=geo.cache\n",
            Path::new("/tmp/x"),
        )
        .unwrap();
        assert_eq!(c.high_res_threshold, 80);
        assert_eq!(c.link_radius_km, 15.5);
        assert_eq!(c.jobs, 3);
        assert_eq!(c.max_chain_hops, Some(2));
        assert_eq!(c.quality_tiers.quality("street"), Some(75));
        assert_eq!(c.cache_path, Some(PathBuf::from("/tmp/x/geo.cache")));
        assert!(PipelineConfig::parse("bogus=1", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("link_radius_km=-1", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("high_res_threshold=0", Path::new(".")).is_err());
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.high_res_threshold, 70);
        assert_eq!(c.link_radius_km, 20.0);
    }

    #[test]
    fn empty_corpus() {
        let d = disambiguate(&[], &BTreeMap::new(), &BTreeMap::new(), &PipelineConfig::default()).unwrap();
        assert!(d.assignments.is_empty());
        assert_eq!(d.summary, RunSummary::default());
    }

    #[test]
    fn nih_mini_corpus_is_one_entity() {
        let rock = "6011 Executive Blvd, Rockville, MD";
        let beth = "Bethesda, MD";
        let spellings = [
            "National Institutes of Health",
            "The Government of the United States of America, as represented by the Secretary, Department of Health and Human Services",
            "Department of Health and Human Services",
            "National Institute of Health",
            "NIH",
            "The United States of America, as represented by the Secretary, Department of Health and Human Services, National Institutes of Health",
            "Dept. of Health and Human Services",
            "The Gov. of USA, as represented by the Secretary, Dept. of Health and Human services, National Institutes of Health",
            "National Institutes of Health (NIH)",
            "US Department of Health and Human Services",
        ];
        let mut mentions: Vec<Mention> = spellings
            .iter()
            .enumerate()
            .map(|(i, n)| mention(&format!("EP{i}"), Role::Assignee, 0, n, rock))
            .collect();
        mentions.push(mention("EP99", Role::Assignee, 0, "National Institutes of Health", beth));
        let geo: BTreeMap<String, GeocodeRecord> = [
            record(rock, &[(39.048843, -77.120419, 87)]),
            record(beth, &[(38.984652, -77.094709, 40)]),
        ]
        .into_iter()
        .collect();
        let d = disambiguate(&mentions, &geo, &BTreeMap::new(), &PipelineConfig::default()).unwrap();
        let ids: BTreeSet<&EntityId> = d.assignments.values().collect();
        assert_eq!(ids.len(), 1, "{:?}", d.summary);
        assert_eq!(ids.iter().next().unwrap().resolution, Resolution::HighRes);
    }

    #[test]
    fn pfizer_variants_at_city_level_stay_apart() {
        let ny = "New York, NY";
        let mentions = vec![
            mention("P1", Role::Assignee, 0, "Pfizer Incorporated", ny),
            mention("P2", Role::Assignee, 0, "P Pfizer Inc", ny),
        ];
        let geo = [record(ny, &[(40.7128, -74.006, 40)])].into_iter().collect();
        let d = disambiguate(&mentions, &geo, &BTreeMap::new(), &PipelineConfig::default()).unwrap();
        let ids: BTreeSet<&EntityId> = d.assignments.values().collect();
        assert_eq!(ids.len(), 2);
        assert!(ids.iter().all(|i| i.resolution == Resolution::LowRes));
    }

    #[test]
    fn ungeocoded_mentions_are_singletons() {
        let mentions = vec![
            mention("P1", Role::Inventor, 0, "Smith, John", ""),
            mention("P2", Role::Inventor, 0, "Smith, John", ""),
        ];
        let d = disambiguate(&mentions, &BTreeMap::new(), &BTreeMap::new(), &PipelineConfig::default()).unwrap();
        let ids: BTreeSet<&EntityId> = d.assignments.values().collect();
        assert_eq!(ids.len(), 2);
    }

    #[test]
    fn mobile_inventor_merges_on_shared_assignee() {
        let bos = "Boston, MA 02115 street";
        let sea = "Seattle, WA 98101 street";
        let mentions = vec![
            mention("P1", Role::Inventor, 0, "Doe, Jane", bos),
            mention("P1", Role::Assignee, 0, "Zyxorp Labs", bos),
            mention("P2", Role::Inventor, 0, "Doe, Jane", sea),
            mention("P2", Role::Assignee, 0, "Zyxorp Labs", bos),
        ];
        let geo = [
            record(bos, &[(42.3601, -71.0589, 72)]),
            record(sea, &[(47.6062, -122.3321, 72)]),
        ]
        .into_iter()
        .collect();
        let d = disambiguate(&mentions, &geo, &BTreeMap::new(), &PipelineConfig::default()).unwrap();
        let inv = |p: &str| &d.assignments[&MentionId::new(p, Role::Inventor, 0)];
        assert_eq!(inv("P1"), inv("P2"));
        assert_eq!(d.summary.mobile_merges, 1);
        assert_eq!(d.summary.inventor.after_nearby, 2);
        assert_eq!(d.summary.inventor.after_mobile, 1);
    }

    #[test]
    fn baseline_groups_identical_raw_names() {
        let mentions = vec![
            mention("P1", Role::Inventor, 0, "Smith, John", ""),
            mention("P2", Role::Inventor, 0, "Smith, John", ""),
            mention("P3", Role::Inventor, 0, "SMITH, John", ""),
        ];
        let b = baseline_assignments(&mentions);
        let ids: BTreeSet<&EntityId> = b.values().collect();
        assert_eq!(ids.len(), 2);
    }
}
