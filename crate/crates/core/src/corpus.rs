//! Domain model for patent name mentions, plus flat-file ingestion and the
//! final entity-map writer.
//!
//! Mentions are keyed by `(patent_id, role, position)` so the same input always
//! yields the same keys. Entity IDs are content-addressed over their sorted
//! member keys, which keeps outputs stable and diff-able across reruns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Quality at or above which a geocoded point counts as high resolution.
pub const HIGH_RES_THRESHOLD: u8 = 70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Office {
    Epo,
    Pct,
    Uspto,
    Other,
}

impl Office {
    pub const ALL: [Office; 4] = [Office::Epo, Office::Pct, Office::Uspto, Office::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Office::Epo => "EPO",
            Office::Pct => "PCT",
            Office::Uspto => "USPTO",
            Office::Other => "OTHER",
        }
    }
}

impl FromStr for Office {
    type Err = std::convert::Infallible;

    /// Unknown office codes map to `Other`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "EPO" | "EP" => Office::Epo,
            "PCT" | "WO" => Office::Pct,
            "USPTO" | "US" => Office::Uspto,
            _ => Office::Other,
        })
    }
}

impl fmt::Display for Office {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Inventor,
    Assignee,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Inventor, Role::Assignee];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Inventor => "inventor",
            Role::Assignee => "assignee",
        }
    }

    fn tag(self) -> char {
        match self {
            Role::Inventor => 'I',
            Role::Assignee => 'A',
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inventor" | "inv" | "i" => Ok(Role::Inventor),
            "assignee" | "asg" | "applicant" | "a" => Ok(Role::Assignee),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(patent_id, role, position)`; ordering is the output row order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MentionId {
    pub patent_id: String,
    pub role: Role,
    pub position: u32,
}

impl MentionId {
    pub fn new(patent_id: impl Into<String>, role: Role, position: u32) -> Self {
        MentionId {
            patent_id: patent_id.into(),
            role,
            position,
        }
    }
}

impl fmt::Display for MentionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}{}", self.patent_id, self.role.tag(), self.position)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mention {
    pub id: MentionId,
    pub office: Office,
    pub raw_name: String,
    pub raw_address: String,
}

impl Mention {
    pub fn new(
        id: MentionId,
        office: Office,
        raw_name: impl Into<String>,
        raw_address: impl Into<String>,
    ) -> Self {
        Mention {
            id,
            office,
            raw_name: raw_name.into(),
            raw_address: raw_address.into(),
        }
    }

    pub fn patent_id(&self) -> &str {
        &self.id.patent_id
    }

    pub fn role(&self) -> Role {
        self.id.role
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub quality: u8,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, quality: u8) -> Self {
        GeoPoint { lat, lon, quality }
    }

    /// Range-checked constructor used by parsers.
    pub fn checked(lat: f64, lon: f64, quality: u8) -> Option<Self> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon)
            && quality <= 100;
        ok.then_some(GeoPoint { lat, lon, quality })
    }

    pub fn is_high_res(&self, threshold: u8) -> bool {
        self.quality >= threshold
    }

    pub fn canonical(&self) -> CanonicalPoint {
        CanonicalPoint::from_degrees(self.lat, self.lon)
    }
}

/// Coordinates rounded to 6 decimal places, stored as integer micro-degrees so
/// that equality and hashing are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalPoint {
    pub lat_e6: i64,
    pub lon_e6: i64,
}

impl CanonicalPoint {
    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        CanonicalPoint {
            lat_e6: (lat * 1e6).round() as i64,
            lon_e6: (lon * 1e6).round() as i64,
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat_e6 as f64 / 1e6
    }

    pub fn lon(&self) -> f64 {
        self.lon_e6 as f64 / 1e6
    }
}

impl fmt::Display for CanonicalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}\t{:.6}", self.lat(), self.lon())
    }
}

/// Side information about one patent used by the mobile-inventor merge.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatentContext {
    pub patent_id: String,
    pub family_id: Option<String>,
    pub cited_patents: BTreeSet<String>,
    pub assignee_entity_ids: BTreeSet<EntityId>,
    pub coinventor_entity_ids: BTreeSet<EntityId>,
}

impl PatentContext {
    pub fn new(patent_id: impl Into<String>) -> Self {
        PatentContext {
            patent_id: patent_id.into(),
            ..Default::default()
        }
    }

    pub fn cites(&self, other: &str) -> bool {
        self.cited_patents.contains(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resolution {
    HighRes,
    LowRes,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::HighRes => "high",
            Resolution::LowRes => "low",
        }
    }
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "high" | "HighRes" => Ok(Resolution::HighRes),
            "low" | "LowRes" => Ok(Resolution::LowRes),
            other => Err(format!("unknown resolution `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    pub value: String,
    pub resolution: Resolution,
}

impl EntityId {
    /// Content-addressed ID: a digest of the sorted member keys, prefixed by role.
    pub fn from_members<'a, I>(role: Role, members: I, resolution: Resolution) -> Self
    where
        I: IntoIterator<Item = &'a MentionId>,
    {
        let mut keys: Vec<String> = members.into_iter().map(|m| m.to_string()).collect();
        keys.sort_unstable();
        let mut hasher = Sha256::new();
        for key in &keys {
            hasher.update(key.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut value = String::with_capacity(18);
        value.push(role.tag());
        value.push('-');
        for byte in &digest[..8] {
            value.push_str(&format!("{byte:02x}"));
        }
        EntityId { value, resolution }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.value)
    }
}

/// Input table dialect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Tsv,
    Csv,
}

impl TableFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TableFormat::Csv,
            _ => TableFormat::Tsv,
        }
    }

    pub(crate) fn reader(self, path: &Path) -> Result<csv::Reader<File>> {
        let file = File::open(path).map_err(|e| Error::read(path, e))?;
        let mut builder = csv::ReaderBuilder::new();
        builder.has_headers(false).flexible(true).comment(Some(b'#'));
        match self {
            TableFormat::Tsv => builder.delimiter(b'\t').quoting(false),
            TableFormat::Csv => builder.delimiter(b','),
        };
        Ok(builder.from_reader(file))
    }
}

/// A rejected input row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct MentionLoad {
    pub mentions: Vec<Mention>,
    pub rows: usize,
    pub skipped_empty_name: usize,
    pub errors: Vec<RowError>,
}

impl MentionLoad {
    pub fn skipped(&self) -> usize {
        self.skipped_empty_name + self.errors.len()
    }
}

fn is_header(record: &csv::StringRecord, first: &str) -> bool {
    record
        .get(0)
        .is_some_and(|f| f.trim().eq_ignore_ascii_case(first))
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

/// Reads a mentions table (`patent_id office role position name address`).
///
/// A leading header row is recognised by its first column `patent_id`.
/// Malformed rows are reported and skipped; only I/O failures are fatal.
pub fn load_mentions(path: &Path, format: TableFormat) -> Result<MentionLoad> {
    let mut reader = format.reader(path)?;
    let mut out = MentionLoad::default();
    let mut seen: HashSet<MentionId> = HashSet::new();

    for (idx, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if e.is_io_error() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        message: e.to_string(),
                    });
                }
                out.rows += 1;
                let line = e.position().map_or(idx + 1, |p| p.line() as usize);
                out.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if idx == 0 && is_header(&record, "patent_id") {
            continue;
        }
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.rows += 1;
        let line = line_of(&record);
        match parse_mention(&record) {
            Ok(Some(mention)) => {
                if !seen.insert(mention.id.clone()) {
                    out.errors.push(RowError {
                        line,
                        message: format!("duplicate mention {}", mention.id),
                    });
                    continue;
                }
                out.mentions.push(mention);
            }
            Ok(None) => {
                log::warn!("{}:{line}: empty name, row skipped", path.display());
                out.skipped_empty_name += 1;
            }
            Err(message) => {
                log::warn!("{}:{line}: {message}", path.display());
                out.errors.push(RowError { line, message });
            }
        }
    }
    Ok(out)
}

fn parse_mention(record: &csv::StringRecord) -> Result<Option<Mention>, String> {
    if record.len() < 5 {
        return Err(format!("expected at least 5 columns, found {}", record.len()));
    }
    let patent_id = record[0].trim();
    if patent_id.is_empty() {
        return Err("empty patent_id".into());
    }
    let office: Office = record[1].parse().unwrap_or(Office::Other);
    let role: Role = record[2].parse()?;
    let position: u32 = record[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad position `{}`", &record[3]))?;
    let name = record[4].trim();
    if name.is_empty() {
        return Ok(None);
    }
    let address = record.get(5).unwrap_or("").trim();
    Ok(Some(Mention::new(
        MentionId::new(patent_id, role, position),
        office,
        name,
        address,
    )))
}

#[derive(Clone, Debug, Default)]
pub struct ContextLoad {
    pub contexts: BTreeMap<String, PatentContext>,
    pub warnings: Vec<String>,
}

/// Reads `patent_id  family_id  cited_patent_ids` rows. Citations are
/// `;`-separated; self-citations are dropped. Repeated patents keep the last row.
pub fn load_contexts(path: &Path, format: TableFormat) -> Result<ContextLoad> {
    let mut reader = format.reader(path)?;
    let mut out = ContextLoad::default();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if idx == 0 && is_header(&record, "patent_id") {
            continue;
        }
        let patent_id = record.get(0).unwrap_or("").trim();
        if patent_id.is_empty() {
            continue;
        }
        let mut ctx = PatentContext::new(patent_id);
        ctx.family_id = record
            .get(1)
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(str::to_string);
        ctx.cited_patents = record
            .get(2)
            .unwrap_or("")
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty() && *c != patent_id)
            .map(str::to_string)
            .collect();
        if out.contexts.insert(patent_id.to_string(), ctx).is_some() {
            let msg = format!(
                "{}:{}: duplicate context for {patent_id}, keeping the later row",
                path.display(),
                line_of(&record)
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
    }
    Ok(out)
}

pub const ENTITY_MAP_HEADER: &str = "patent_id\trole\tposition\tmention_id\tentity_id\tresolution";

/// Renders the entity map; rows follow `MentionId` order.
pub fn render_entity_map(assignments: &BTreeMap<MentionId, EntityId>) -> String {
    let mut out = String::with_capacity(assignments.len() * 64 + 64);
    out.push_str(ENTITY_MAP_HEADER);
    out.push('\n');
    for (mention, entity) in assignments {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            mention.patent_id,
            mention.role,
            mention.position,
            mention,
            entity.value,
            entity.resolution.as_str()
        ));
    }
    out
}

pub fn write_entity_map(assignments: &BTreeMap<MentionId, EntityId>, path: &Path) -> Result<()> {
    write_file(path, render_entity_map(assignments).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::write(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::write(path, e))
}

/// One row of a previously written entity map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityMapRow {
    pub mention: MentionId,
    pub entity: EntityId,
}

pub fn load_entity_map(path: &Path) -> Result<Vec<EntityMapRow>> {
    let mut reader = TableFormat::Tsv.reader(path)?;
    let mut rows = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if idx == 0 && is_header(&record, "patent_id") {
            continue;
        }
        let line = line_of(&record);
        if record.len() < 6 {
            return Err(parse_err(line, "expected 6 columns".into()));
        }
        let role: Role = record[1].parse().map_err(|e| parse_err(line, e))?;
        let position: u32 = record[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad position `{}`", &record[2])))?;
        let resolution: Resolution = record[5].parse().map_err(|e| parse_err(line, e))?;
        rows.push(EntityMapRow {
            mention: MentionId::new(record[0].trim(), role, position),
            entity: EntityId {
                value: record[4].trim().to_string(),
                resolution,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;


    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_rows_in_order() {
        let f = write_tmp(
            "P1\tEPO\tinventor\t0\tSmith, John\t1 Main St\n\
             P1\tEPO\tinventor\t1\tDoe, Jane\t2 Main St\n\
             P2\tUSPTO\tassignee\t0\tAcme Inc\t\n",
        );
        let load = load_mentions(f.path(), TableFormat::Tsv).unwrap();
        assert_eq!(load.mentions.len(), 3);
        assert_eq!(load.mentions[0].raw_name, "Smith, John");
        assert_eq!(load.mentions[1].id.position, 1);
        assert_eq!(load.mentions[2].role(), Role::Assignee);
        assert_eq!(load.mentions[2].office, Office::Uspto);
        assert_eq!(load.mentions[2].raw_address, "");
        assert_eq!(load.skipped(), 0);
    }

    #[test]
    fn empty_name_is_counted_and_skipped() {
        let f = write_tmp(
            "patent_id\toffice\trole\tposition\tname\taddress\n\
             P1\tEPO\tinventor\t0\t\tsomewhere\n\
             P1\tEPO\tinventor\t1\tDoe, Jane\t2 Main St\n",
        );
        let load = load_mentions(f.path(), TableFormat::Tsv).unwrap();
        assert_eq!(load.mentions.len(), 1);
        assert_eq!(load.skipped_empty_name, 1);
        assert_eq!(load.rows, load.mentions.len() + load.skipped());
    }

    #[test]
    fn nih_assignee_rows() {
        let f = write_tmp(
            "EP1807440\tEPO\tassignee\t0\tDepartment of Health and Human Services\t6011 Excecutive Boulevard, Rockville MD 20852\n\
             EP2019710\tEPO\tassignee\t0\tNational Institute of Health\tOffice of Technology Transfer 6011 Executive Boulevard, Suite 325, Rockville MD 20852-3804\n\
             EP1361886\tEPO\tassignee\t0\tThe Gov. of USA, as represented by the Secretary, Dept. of Health and Human services, National Institutes of Health\tOffice of Technology Transfer, 6011 Executive Boulevard, Suite 325, Rockville, MD 20852\n",
        );
        let load = load_mentions(f.path(), TableFormat::Tsv).unwrap();
        assert_eq!(load.mentions.len(), 3);
        assert!(load.mentions.iter().all(|m| m.role() == Role::Assignee));
        let ids: Vec<_> = load.mentions.iter().map(|m| m.patent_id()).collect();
        assert_eq!(ids, ["EP1807440", "EP2019710", "EP1361886"]);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let f = write_tmp(
            "P1\tEPO\tinventor\t0\tSmith, John\tx\n\
             P2\tEPO\tnobody\t0\tFoo\tx\n\
             P3\tEPO\tinventor\tzero\tFoo\tx\n\
             P4\tEPO\n\
             P1\tEPO\tinventor\t0\tSmith, John\tx\n",
        );
        let load = load_mentions(f.path(), TableFormat::Tsv).unwrap();
        assert_eq!(load.mentions.len(), 1);
        let lines: Vec<usize> = load.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [2, 3, 4, 5]);
        assert_eq!(load.rows, load.mentions.len() + load.skipped());
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = load_mentions(Path::new("/nonexistent/mentions.tsv"), TableFormat::Tsv);
        assert!(matches!(err, Err(Error::Read { .. })));
    }

    #[test]
    fn csv_dialect_handles_quoted_commas() {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(b"P1,EPO,inventor,0,\"Smith, John\",\"1 Main St, Boston\"\n")
            .unwrap();
        let load = load_mentions(f.path(), TableFormat::for_path(f.path())).unwrap();
        assert_eq!(load.mentions[0].raw_name, "Smith, John");
        assert_eq!(load.mentions[0].raw_address, "1 Main St, Boston");
    }

    #[test]
    fn contexts_map_fields_and_keep_last_duplicate() {
        let empty = write_tmp("");
        assert!(load_contexts(empty.path(), TableFormat::Tsv)
            .unwrap()
            .contexts
            .is_empty());

        let f = write_tmp("P1\tF1\tP2\nP3\t\tP3;P1\n");
        let load = load_contexts(f.path(), TableFormat::Tsv).unwrap();
        let p1 = &load.contexts["P1"];
        assert_eq!(p1.family_id.as_deref(), Some("F1"));
        assert_eq!(p1.cited_patents, BTreeSet::from(["P2".to_string()]));
        // self-citation dropped
        assert_eq!(
            load.contexts["P3"].cited_patents,
            BTreeSet::from(["P1".to_string()])
        );
        assert_eq!(load.contexts["P3"].family_id, None);

        let dup = write_tmp("P1\tF1\tP2\nP1\tF9\t\n");
        let load = load_contexts(dup.path(), TableFormat::Tsv).unwrap();
        assert_eq!(load.warnings.len(), 1);
        assert_eq!(load.contexts["P1"].family_id.as_deref(), Some("F9"));
        assert!(load.contexts["P1"].cited_patents.is_empty());
    }

    #[test]
    fn entity_ids_are_content_addressed() {
        let a = MentionId::new("P1", Role::Inventor, 0);
        let b = MentionId::new("P2", Role::Inventor, 1);
        let x = EntityId::from_members(Role::Inventor, [&a, &b], Resolution::LowRes);
        let y = EntityId::from_members(Role::Inventor, [&b, &a], Resolution::LowRes);
        assert_eq!(x, y);
        assert!(x.value.starts_with("I-"));
        assert_eq!(x.value.len(), 18);
        let z = EntityId::from_members(Role::Inventor, [&a], Resolution::LowRes);
        assert_ne!(x.value, z.value);
    }

    #[test]
    fn entity_map_is_sorted_and_round_trips() {
        let m0 = MentionId::new("P2", Role::Inventor, 0);
        let m1 = MentionId::new("P1", Role::Assignee, 0);
        let m2 = MentionId::new("P1", Role::Inventor, 1);
        let id = EntityId::from_members(Role::Inventor, [&m0, &m2], Resolution::HighRes);
        let asg = EntityId::from_members(Role::Assignee, [&m1], Resolution::LowRes);
        let mut map = BTreeMap::new();
        map.insert(m0.clone(), id.clone());
        map.insert(m1.clone(), asg.clone());
        map.insert(m2.clone(), id.clone());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.tsv");
        write_entity_map(&map, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_entity_map(&map, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());

        let text = String::from_utf8(first).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert!(rows[0].starts_with("P1\tinventor\t1"));
        assert!(rows[1].starts_with("P1\tassignee\t0"));
        assert!(rows[2].starts_with("P2\tinventor\t0"));
        assert!(rows[0].ends_with("\thigh"));

        let back = load_entity_map(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].mention, m2);
        assert_eq!(back[0].entity, id);
    }

    #[test]
    fn canonical_rounding_is_six_decimals() {
        let a = GeoPoint::new(39.0488431, -77.1204189, 87).canonical();
        let b = GeoPoint::new(39.048843, -77.120419, 87).canonical();
        assert_eq!(a, b);
        let c = GeoPoint::new(39.048849, -77.120419, 87).canonical();
        assert_ne!(a, c);
        assert!(GeoPoint::checked(91.0, 0.0, 50).is_none());
        assert!(GeoPoint::checked(0.0, 0.0, 101).is_none());
    }
}
