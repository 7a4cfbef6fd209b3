//! Benchmark comparison: pairwise precision/recall over patent pairs and
//! per-inventor splitting/lumping.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{Role, TableFormat};
use crate::error::{Error, Result};
use crate::textnorm::Normalizer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Benchmark,
    Trial,
}

/// Entity IDs listed on each patent for one role. Repeats count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisambiguationMap {
    pub role: Role,
    pub source: Source,
    pub patents: BTreeMap<String, Vec<String>>,
}

impl DisambiguationMap {
    pub fn new(role: Role, source: Source) -> Self {
        DisambiguationMap {
            role,
            source,
            patents: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, patent: impl Into<String>, id: impl Into<String>) {
        self.patents.entry(patent.into()).or_default().push(id.into());
    }

    /// Entity -> set of patents it appears on.
    pub fn entities(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (p, ids) in &self.patents {
            for id in ids {
                out.entry(id.as_str()).or_default().insert(p.as_str());
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairwiseCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PairwiseCounts {
    /// Adds one patent pair with benchmark and trial intersection sizes.
    pub fn add_pair(&mut self, i_b: u64, i_t: u64) {
        self.tp += i_b.min(i_t);
        self.fn_ += i_b.saturating_sub(i_t);
        self.fp += i_t.saturating_sub(i_b);
    }
}

/// A ratio with its 0/0 case made explicit. An undefined ratio reads 1.0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64, empty: f64) -> Self {
        if den == 0 {
            Ratio {
                value: empty,
                undefined: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseResult {
    pub precision: Ratio,
    pub recall: Ratio,
    pub counts: PairwiseCounts,
}

/// Size of the multiset intersection of two ID lists.
pub fn multiset_intersection(a: &[String], b: &[String]) -> u64 {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for x in a {
        *counts.entry(x).or_default() += 1;
    }
    let mut n = 0;
    for y in b {
        if let Some(c) = counts.get_mut(y.as_str()) {
            if *c > 0 {
                *c -= 1;
                n += 1;
            }
        }
    }
    n
}

/// Per unordered patent pair, the summed multiset intersection, built from an
/// ID -> (patent, count) index so only pairs sharing an ID are visited.
fn pair_intersections(patents: &BTreeMap<String, Vec<String>>, index: &HashMap<&str, usize>) -> HashMap<(usize, usize), u64> {
    let mut postings: BTreeMap<&str, BTreeMap<usize, u64>> = BTreeMap::new();
    for (p, ids) in patents {
        let pi = index[p.as_str()];
        for id in ids {
            *postings.entry(id).or_default().entry(pi).or_default() += 1;
        }
    }
    let mut out: HashMap<(usize, usize), u64> = HashMap::new();
    for list in postings.values() {
        let list: Vec<(usize, u64)> = list.iter().map(|(&p, &c)| (p, c)).collect();
        for (x, &(p1, c1)) in list.iter().enumerate() {
            for &(p2, c2) in &list[x + 1..] {
                *out.entry((p1, p2)).or_default() += c1.min(c2);
            }
        }
    }
    out
}

/// Pairwise precision and recall. Both maps must list the same patents.
pub fn pairwise_pr(bench: &DisambiguationMap, trial: &DisambiguationMap) -> Result<PairwiseResult> {
    if let Some(p) = bench.patents.keys().find(|p| !trial.patents.contains_key(*p)) {
        return Err(Error::Alignment(format!("patent {p} is in the benchmark but not the trial")));
    }
    if let Some(p) = trial.patents.keys().find(|p| !bench.patents.contains_key(*p)) {
        return Err(Error::Alignment(format!("patent {p} is in the trial but not the benchmark")));
    }
    let index: HashMap<&str, usize> = bench
        .patents
        .keys()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let ib = pair_intersections(&bench.patents, &index);
    let it = pair_intersections(&trial.patents, &index);
    let mut counts = PairwiseCounts::default();
    for (pair, &b) in &ib {
        counts.add_pair(b, it.get(pair).copied().unwrap_or(0));
    }
    for (pair, &t) in &it {
        if !ib.contains_key(pair) {
            counts.add_pair(0, t);
        }
    }
    Ok(PairwiseResult {
        precision: Ratio::of(counts.tp, counts.tp + counts.fp, 1.0),
        recall: Ratio::of(counts.tp, counts.tp + counts.fn_, 1.0),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitLumpDetail {
    pub bench_id: String,
    pub best_match: Option<String>,
    pub patents: usize,
    pub split: usize,
    pub lumped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitLumpResult {
    pub splitting: Ratio,
    pub lumping: Ratio,
    pub details: Vec<SplitLumpDetail>,
}

/// Splitting and lumping from entity -> patent sets. The best trial match for
/// each benchmark entity shares the most patents, then has the fewest extra
/// patents, then the smallest ID. An entity with no overlapping trial ID has
/// all its patents split.
pub fn split_lump_sets(
    bench: &BTreeMap<&str, BTreeSet<&str>>,
    trial: &BTreeMap<&str, BTreeSet<&str>>,
) -> SplitLumpResult {
    let mut by_patent: HashMap<&str, Vec<&str>> = HashMap::new();
    for (id, ps) in trial {
        for p in ps {
            by_patent.entry(p).or_default().push(id);
        }
    }
    let mut details = Vec::with_capacity(bench.len());
    let (mut total, mut split, mut lumped) = (0u64, 0u64, 0u64);
    for (bid, pb) in bench {
        if pb.is_empty() {
            log::warn!("benchmark entity {bid} has no patents, excluded");
            continue;
        }
        let mut overlap: BTreeMap<&str, usize> = BTreeMap::new();
        for p in pb {
            for id in by_patent.get(p).into_iter().flatten() {
                *overlap.entry(id).or_default() += 1;
            }
        }
        let best = overlap
            .iter()
            .map(|(&id, &common)| (id, common, trial[id].len() - common))
            .min_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)).then(x.0.cmp(y.0)));
        let (best_match, s, l) = match best {
            Some((id, common, extra)) => (Some(id.to_string()), pb.len() - common, extra),
            None => (None, pb.len(), 0),
        };
        total += pb.len() as u64;
        split += s as u64;
        lumped += l as u64;
        details.push(SplitLumpDetail {
            bench_id: bid.to_string(),
            best_match,
            patents: pb.len(),
            split: s,
            lumped: l,
        });
    }
    SplitLumpResult {
        splitting: Ratio::of(split, total, 0.0),
        lumping: Ratio::of(lumped, total, 0.0),
        details,
    }
}

pub fn split_lump(bench: &DisambiguationMap, trial: &DisambiguationMap) -> SplitLumpResult {
    split_lump_sets(&bench.entities(), &trial.entities())
}

/// One benchmark row: `patent_id  role  name  benchmark_entity_id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchmarkRow {
    pub patent_id: String,
    pub role: Role,
    pub name: String,
    pub entity_id: String,
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let mut reader = TableFormat::for_path(path).reader(path)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if idx == 0 && record.get(0).is_some_and(|f| f.trim() == "patent_id") {
            continue;
        }
        if record.len() < 4 {
            return Err(parse_err(format!("expected 4 columns, found {}", record.len())));
        }
        rows.push(BenchmarkRow {
            patent_id: record[0].trim().to_string(),
            role: record[1].parse().map_err(parse_err)?,
            name: record[2].trim().to_string(),
            entity_id: record[3].trim().to_string(),
        });
    }
    Ok(rows)
}

/// A trial mention as seen by the evaluator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialMention {
    pub patent_id: String,
    pub role: Role,
    pub raw_name: String,
    pub entity_id: String,
    pub high_res: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlignStats {
    pub bench_patents: usize,
    pub kept: usize,
    pub missing_from_trial: usize,
    pub name_mismatch: usize,
    pub low_res: usize,
    pub collaborators_dropped: usize,
}

#[derive(Clone, Debug)]
pub struct Aligned {
    pub bench: DisambiguationMap,
    pub trial: DisambiguationMap,
    pub stats: AlignStats,
}

/// Restricts both sides to benchmarked patents of `role` whose names line up.
///
/// Trial mentions whose normalized name is not a benchmark name on that patent
/// are dropped as collaborators. A patent where some benchmark name has no
/// trial counterpart is excluded. With `high_res_only`, patents with a
/// low-resolution matched trial entity are excluded too.
pub fn align_benchmark(
    trial: &[TrialMention],
    bench: &[BenchmarkRow],
    role: Role,
    normalizer: &Normalizer,
    high_res_only: bool,
) -> Aligned {
    let key = |raw: &str| normalizer.normalize(raw, role).key();
    let mut bench_by_patent: BTreeMap<&str, Vec<(String, &str)>> = BTreeMap::new();
    for row in bench.iter().filter(|r| r.role == role) {
        bench_by_patent
            .entry(&row.patent_id)
            .or_default()
            .push((key(&row.name), &row.entity_id));
    }
    let mut trial_by_patent: HashMap<&str, Vec<(String, &TrialMention)>> = HashMap::new();
    for m in trial.iter().filter(|m| m.role == role) {
        trial_by_patent
            .entry(&m.patent_id)
            .or_default()
            .push((key(&m.raw_name), m));
    }

    let mut out = Aligned {
        bench: DisambiguationMap::new(role, Source::Benchmark),
        trial: DisambiguationMap::new(role, Source::Trial),
        stats: AlignStats {
            bench_patents: bench_by_patent.len(),
            ..Default::default()
        },
    };
    for (patent, brows) in bench_by_patent {
        let Some(tms) = trial_by_patent.get(patent) else {
            out.stats.missing_from_trial += 1;
            continue;
        };
        let bench_names: BTreeSet<&str> = brows.iter().map(|(n, _)| n.as_str()).collect();
        let trial_names: BTreeSet<&str> = tms.iter().map(|(n, _)| n.as_str()).collect();
        if !bench_names.is_subset(&trial_names) {
            out.stats.name_mismatch += 1;
            continue;
        }
        let kept: Vec<&TrialMention> = tms
            .iter()
            .filter(|(n, _)| bench_names.contains(n.as_str()))
            .map(|(_, m)| *m)
            .collect();
        if high_res_only && kept.iter().any(|m| !m.high_res) {
            out.stats.low_res += 1;
            continue;
        }
        out.stats.collaborators_dropped += tms.len() - kept.len();
        out.stats.kept += 1;
        for (_, id) in &brows {
            out.bench.push(patent, *id);
        }
        for m in kept {
            out.trial.push(patent, &m.entity_id);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub role: Role,
    pub high_res_only: bool,
    pub align: AlignStats,
    pub pairwise: PairwiseResult,
    pub split_lump: SplitLumpResult,
}

/// Aligns, then computes every metric. Fails when no patent survives.
pub fn evaluate(
    trial: &[TrialMention],
    bench: &[BenchmarkRow],
    role: Role,
    normalizer: &Normalizer,
    high_res_only: bool,
) -> Result<EvalReport> {
    let aligned = align_benchmark(trial, bench, role, normalizer, high_res_only);
    if aligned.stats.kept == 0 {
        return Err(Error::Alignment(format!(
            "no {role} patents overlap between trial and benchmark ({} benchmarked, {} missing, {} name mismatches, {} low-res)",
            aligned.stats.bench_patents,
            aligned.stats.missing_from_trial,
            aligned.stats.name_mismatch,
            aligned.stats.low_res
        )));
    }
    Ok(EvalReport {
        role,
        high_res_only,
        align: aligned.stats,
        pairwise: pairwise_pr(&aligned.bench, &aligned.trial)?,
        split_lump: split_lump(&aligned.bench, &aligned.trial),
    })
}

fn fmt_ratio(r: Ratio) -> String {
    if r.undefined {
        format!("{:.4} (undefined)", r.value)
    } else {
        format!("{:.4}", r.value)
    }
}

impl EvalReport {
    /// Human-readable table followed by a `key=value` block.
    pub fn render(&self) -> String {
        let a = &self.align;
        let c = &self.pairwise.counts;
        let mut s = String::new();
        let _ = writeln!(s, "{} evaluation{}", self.role, if self.high_res_only { " (high-resolution only)" } else { "" });
        let _ = writeln!(
            s,
            "patents: {} of {} benchmarked ({} missing, {} name mismatch, {} low-res)",
            a.kept, a.bench_patents, a.missing_from_trial, a.name_mismatch, a.low_res
        );
        let _ = writeln!(s, "pairs: TP {} FP {} FN {}", c.tp, c.fp, c.fn_);
        let _ = writeln!(s, "{:<10} {}", "precision", fmt_ratio(self.pairwise.precision));
        let _ = writeln!(s, "{:<10} {}", "recall", fmt_ratio(self.pairwise.recall));
        let _ = writeln!(s, "{:<10} {}", "splitting", fmt_ratio(self.split_lump.splitting));
        let _ = writeln!(s, "{:<10} {}", "lumping", fmt_ratio(self.split_lump.lumping));
        s.push('\n');
        for (k, v) in self.key_values() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let a = &self.align;
        let c = &self.pairwise.counts;
        let p = &self.pairwise;
        let sl = &self.split_lump;
        let r = self.role.as_str();
        vec![
            (format!("{r}.patents"), a.kept.to_string()),
            (format!("{r}.patents_excluded"), (a.bench_patents - a.kept).to_string()),
            (format!("{r}.tp"), c.tp.to_string()),
            (format!("{r}.fp"), c.fp.to_string()),
            (format!("{r}.fn"), c.fn_.to_string()),
            (format!("{r}.precision"), format!("{:.6}", p.precision.value)),
            (format!("{r}.precision_undefined"), p.precision.undefined.to_string()),
            (format!("{r}.recall"), format!("{:.6}", p.recall.value)),
            (format!("{r}.recall_undefined"), p.recall.undefined.to_string()),
            (format!("{r}.splitting"), format!("{:.6}", sl.splitting.value)),
            (format!("{r}.lumping"), format!("{:.6}", sl.lumping.value)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(source: Source, rows: &[&[&str]]) -> DisambiguationMap {
        let mut m = DisambiguationMap::new(Role::Inventor, source);
        for (i, ids) in rows.iter().enumerate() {
            let p = format!("p{i}");
            m.patents.insert(p, ids.iter().map(|s| s.to_string()).collect());
        }
        m
    }

    #[test]
    fn identical_maps_are_perfect() {
        let b = map(Source::Benchmark, &[&["A", "B"], &["A"], &["B"]]);
        let mut t = b.clone();
        t.source = Source::Trial;
        let r = pairwise_pr(&b, &t).unwrap();
        assert_eq!(r.precision.value, 1.0);
        assert_eq!(r.recall.value, 1.0);
        let sl = split_lump(&b, &t);
        assert_eq!(sl.splitting.value, 0.0);
        assert_eq!(sl.lumping.value, 0.0);
    }

    #[test]
    fn singleton_trial() {
        let b = map(Source::Benchmark, &[&["A"], &["A"], &["B"]]);
        let t = map(Source::Trial, &[&["x"], &["y"], &["z"]]);
        let r = pairwise_pr(&b, &t).unwrap();
        assert_eq!(r.counts, PairwiseCounts { tp: 0, fp: 0, fn_: 1 });
        assert_eq!(r.precision.value, 1.0);
        assert!(r.precision.undefined);
        assert_eq!(r.recall.value, 0.0);
    }

    #[test]
    fn one_split_patent() {
        let b = map(Source::Benchmark, &[&["A"], &["A"], &["A"]]);
        let t = map(Source::Trial, &[&["x"], &["x"], &["y"]]);
        let r = pairwise_pr(&b, &t).unwrap();
        assert_eq!(r.precision.value, 1.0);
        assert!(!r.precision.undefined);
        assert_eq!(r.recall.value, 1.0 / 3.0);
    }

    #[test]
    fn mismatched_patent_sets_fail() {
        let b = map(Source::Benchmark, &[&["A"], &["A"]]);
        let t = map(Source::Trial, &[&["x"]]);
        assert!(matches!(pairwise_pr(&b, &t), Err(Error::Alignment(_))));
    }

    #[test]
    fn multiset_semantics() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(multiset_intersection(&v(&["a", "a", "b"]), &v(&["a", "a", "a"])), 2);
        assert_eq!(multiset_intersection(&v(&[]), &v(&["a"])), 0);
    }

    fn sets<'a>(rows: &[(&'a str, &[&'a str])]) -> BTreeMap<&'a str, BTreeSet<&'a str>> {
        rows.iter().map(|(id, ps)| (*id, ps.iter().copied().collect())).collect()
    }

    #[test]
    fn worked_split_lump() {
        let b = sets(&[("i", &["p1", "p2", "p3", "p4", "p5"])]);
        let t = sets(&[("t", &["p1", "p2", "p3", "p4", "q1", "q2"]), ("u", &["p5"])]);
        let r = split_lump_sets(&b, &t);
        assert_eq!(r.details[0].split, 1);
        assert_eq!(r.details[0].lumped, 2);
        assert_eq!(r.splitting.value, 0.2);
        assert_eq!(r.lumping.value, 0.4);
    }

    #[test]
    fn ties_prefer_fewer_extras_then_smaller_id() {
        let b = sets(&[("i", &["p1", "p2", "p3", "p4"])]);
        let t = sets(&[("a", &["p1", "p2", "p3", "x1", "x2"]), ("b", &["p4"]), ("z", &["p1", "p2", "p3"])]);
        assert_eq!(split_lump_sets(&b, &t).details[0].best_match.as_deref(), Some("z"));
        let b2 = sets(&[("i", &["p1", "p2"])]);
        let t3 = sets(&[("m", &["p1"]), ("k", &["p2"])]);
        assert_eq!(split_lump_sets(&b2, &t3).details[0].best_match.as_deref(), Some("k"));
    }

    #[test]
    fn unmatched_benchmark_entity_is_fully_split() {
        let b = sets(&[("i", &["p1", "p2"])]);
        let t = sets(&[("t", &["q1"])]);
        let r = split_lump_sets(&b, &t);
        assert_eq!(r.details[0].best_match, None);
        assert_eq!(r.splitting.value, 1.0);
        assert_eq!(r.lumping.value, 0.0);
    }

    fn tm(p: &str, name: &str, id: &str, high: bool) -> TrialMention {
        TrialMention {
            patent_id: p.into(),
            role: Role::Inventor,
            raw_name: name.into(),
            entity_id: id.into(),
            high_res: high,
        }
    }

    fn br(p: &str, name: &str, id: &str) -> BenchmarkRow {
        BenchmarkRow {
            patent_id: p.into(),
            role: Role::Inventor,
            name: name.into(),
            entity_id: id.into(),
        }
    }

    #[test]
    fn alignment_filters() {
        let norm = Normalizer::default();
        let trial = vec![
            tm("P1", "King Liu, Tsu Jae", "t1", true),
            tm("P2", "Smith, John", "t2", true),
            tm("P2", "Collaborator, Carl", "t3", true),
            tm("P3", "Smith, John", "t2", false),
        ];
        let bench = vec![
            br("P1", "King, Tsu Jae", "b1"),
            br("P2", "Smith, John", "b2"),
            br("P3", "smith john", "b2"),
            br("P4", "Smith, John", "b2"),
        ];
        let a = align_benchmark(&trial, &bench, Role::Inventor, &norm, false);
        assert_eq!(a.stats.name_mismatch, 1);
        assert_eq!(a.stats.missing_from_trial, 1);
        assert_eq!(a.stats.collaborators_dropped, 1);
        assert_eq!(a.trial.patents["P2"], vec!["t2".to_string()]);
        assert_eq!(a.stats.kept, 2);
        let h = align_benchmark(&trial, &bench, Role::Inventor, &norm, true);
        assert_eq!(h.stats.kept, 1);
        assert_eq!(h.stats.low_res, 1);
    }

    #[test]
    fn evaluate_requires_overlap() {
        let norm = Normalizer::default();
        let err = evaluate(&[], &[br("P1", "A B", "b")], Role::Inventor, &norm, false).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn report_has_key_values() {
        let norm = Normalizer::default();
        let trial = vec![tm("P1", "Smith, John", "t", true), tm("P2", "Smith, John", "t", true)];
        let bench = vec![br("P1", "Smith, John", "b"), br("P2", "Smith, John", "b")];
        let r = evaluate(&trial, &bench, Role::Inventor, &norm, false).unwrap();
        let text = r.render();
        assert!(text.contains("inventor.precision=1.000000"));
        assert!(text.contains("inventor.recall=1.000000"));
    }
}
