//! Synthetic patent corpora with known entity labels.
//!
//! Assignees are companies with one street address; inventors work for one
//! assignee and file from a home address in its city (or from the company
//! address). Each mention receives at most one noise operation drawn from the
//! error families seen in real records: typos, token reordering, abbreviation,
//! acronyms, dropped accents and city-level addresses. Mobile inventors also
//! file from a second city, on patents of the same assignee.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_file, Mention, MentionId, Office, PatentContext, Role};
use crate::error::Result;
use crate::evaluation::BenchmarkRow;
use crate::geocode::{FixtureProvider, GeocodeCache, GeocodeRecord, Geocoder, QualityTiers};
use crate::lexicon::Lexicon;
use crate::textnorm::edit_distance_le_1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub typo: f64,
    pub reorder: f64,
    pub abbreviation: f64,
    pub acronym: f64,
    /// Chance that a mention of an accented name is written without accents.
    pub accent_strip: f64,
    /// Chance that a mention carries only a city-level address.
    pub degrade: f64,
    /// Share of inventors with a second home city.
    pub mobile: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            typo: 0.10,
            reorder: 0.05,
            abbreviation: 0.10,
            acronym: 0.03,
            accent_strip: 0.5,
            degrade: 0.15,
            mobile: 0.05,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            typo: 0.0,
            reorder: 0.0,
            abbreviation: 0.0,
            acronym: 0.0,
            accent_strip: 0.0,
            degrade: 0.0,
            mobile: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub n_entities: usize,
    pub noise: NoiseParams,
    /// Mean number of patents led by each inventor.
    pub patents_per_inventor: f64,
    /// Share of inventors listed at the assignee's address.
    pub business_address: f64,
    /// Share of inventors with one accented letter in their name.
    pub accented: f64,
}

impl SynthParams {
    pub fn new(seed: u64, n_entities: usize) -> Self {
        SynthParams {
            seed,
            n_entities,
            noise: NoiseParams::default(),
            patents_per_inventor: 3.0,
            business_address: 0.3,
            accented: 0.3,
        }
    }
}

const CITIES: [(&str, &str, f64, f64); 14] = [
    ("Boston", "MA, USA", 42.3601, -71.0589),
    ("Seattle", "WA, USA", 47.6062, -122.3321),
    ("San Diego", "CA, USA", 32.7157, -117.1611),
    ("Houston", "TX, USA", 29.7604, -95.3698),
    ("Toronto", "Canada", 43.6532, -79.3832),
    ("Paris", "France", 48.8566, 2.3522),
    ("Munich", "Germany", 48.1351, 11.5820),
    ("Basel", "Switzerland", 47.5596, 7.5886),
    ("Cambridge", "UK", 52.2053, 0.1218),
    ("Stockholm", "Sweden", 59.3293, 18.0686),
    ("Milan", "Italy", 45.4642, 9.1900),
    ("Tokyo", "Japan", 35.6762, 139.6503),
    ("Osaka", "Japan", 34.6937, 135.5023),
    ("Seoul", "Korea", 37.5665, 126.9780),
];

const STREETS: [&str; 12] = [
    "Oak", "Maple", "Cedar", "Elm", "Pine", "Birch", "Willow", "Aspen", "Spruce", "Linden", "Hazel", "Alder",
];

const PERSON_SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ra", "ne", "to", "su", "vi", "ba", "ri", "mo", "ta", "li", "sa", "no", "ve", "ga", "ru", "pe", "ho",
];

const COMPANY_SYLLABLES: [&str; 14] = [
    "zor", "quex", "vly", "thrax", "plim", "grov", "jund", "wex", "brak", "skel", "dromp", "fyz", "kwill", "zint",
];

/// Common trailing words and their abbreviations.
const SUFFIXES: [(&str, &str); 7] = [
    ("Laboratories", "Labs"),
    ("Technologies", "Tech"),
    ("Pharmaceuticals", "Pharma"),
    ("International", "Intl"),
    ("Corporation", "Corp."),
    ("Incorporated", "Inc."),
    ("Systems", "Sys."),
];

const ACCENTS: [(char, char); 5] = [('a', 'á'), ('e', 'é'), ('i', 'í'), ('o', 'ö'), ('u', 'ü')];

#[derive(Clone, Debug)]
struct Place {
    address: String,
    lat: f64,
    lon: f64,
    city: usize,
}

#[derive(Clone, Debug)]
struct Company {
    words: Vec<String>,
    suffix: Option<usize>,
    place: Place,
}

#[derive(Clone, Debug)]
struct Person {
    last: String,
    first: String,
    middle: Option<String>,
    /// `(word index 0/1, char position, accented char)`.
    accent: Option<(usize, usize, char)>,
    employer: usize,
    home: Place,
    second_home: Option<Place>,
}

/// A generated corpus with its fixture geocodes and ground truth.
#[derive(Clone, Debug, Default)]
pub struct SyntheticCorpus {
    pub mentions: Vec<Mention>,
    /// `(address, lat, lon, precision code)`.
    pub geocodes: Vec<(String, f64, f64, String)>,
    pub contexts: Vec<PatentContext>,
    pub benchmark: Vec<BenchmarkRow>,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn word(rng: &mut ChaCha8Rng, syllables: &[&str], n: usize) -> String {
    (0..n).map(|_| *syllables.choose(rng).expect("syllables")).collect()
}

/// A word more than one edit away from all of `taken`. Words grow by a
/// syllable whenever the shorter ones run out.
fn distinct_word(rng: &mut ChaCha8Rng, syllables: &[&str], n: usize, taken: &mut Vec<String>, lex: &Lexicon) -> String {
    let mut len = n;
    let mut misses = 0;
    loop {
        let w = word(rng, syllables, len);
        if lex.is_rare(&w) && !taken.iter().any(|t| edit_distance_le_1(t, &w)) {
            taken.push(w.clone());
            return w;
        }
        misses += 1;
        if misses % 64 == 0 {
            len += 1;
        }
    }
}

fn typo(rng: &mut ChaCha8Rng, w: &str) -> String {
    let mut chars: Vec<char> = w.chars().collect();
    let i = rng.gen_range(0..chars.len());
    let letter = (b'a' + rng.gen_range(0..26u8)) as char;
    match rng.gen_range(0..3) {
        0 if chars.len() > 4 => {
            chars.remove(i);
        }
        1 => chars.insert(i, letter),
        _ => {
            let mut l = letter;
            while l == chars[i] {
                l = (b'a' + rng.gen_range(0..26u8)) as char;
            }
            chars[i] = l;
        }
    }
    chars.into_iter().collect()
}

fn near(rng: &mut ChaCha8Rng, city: usize, counter: &mut usize) -> Place {
    let (name, region, lat, lon) = CITIES[city];
    *counter += 1;
    let street = STREETS[*counter % STREETS.len()];
    Place {
        address: format!("{} {street} Street, {name}, {region}", *counter),
        lat: lat + rng.gen_range(-0.06..0.06),
        lon: lon + rng.gen_range(-0.06..0.06),
        city,
    }
}

fn city_address(city: usize) -> String {
    let (name, region, _, _) = CITIES[city];
    format!("{name}, {region}")
}

impl Person {
    fn word_with_accent(&self, idx: usize, accented: bool) -> String {
        let base = if idx == 0 { &self.last } else { &self.first };
        match self.accent {
            Some((i, pos, c)) if i == idx && accented => base
                .chars()
                .enumerate()
                .map(|(k, ch)| if k == pos { c } else { ch })
                .collect(),
            _ => base.clone(),
        }
    }
}

/// Draws one corpus. The same parameters always give the same corpus.
pub fn generate_synthetic(params: &SynthParams) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let lex = Lexicon::bundled(Default::default());
    let noise = params.noise;
    let n = params.n_entities;
    if n == 0 {
        return SyntheticCorpus::default();
    }
    let n_companies = (n / 5).max(1);
    let n_people = n - n_companies;
    let mut counter = 0usize;

    let mut taken_company: Vec<String> = Vec::new();
    let companies: Vec<Company> = (0..n_companies)
        .map(|i| {
            let words = (0..rng.gen_range(1..=2))
                .map(|_| distinct_word(&mut rng, &COMPANY_SYLLABLES, 2, &mut taken_company, &lex))
                .collect();
            let suffix = rng.gen_bool(0.7).then(|| rng.gen_range(0..SUFFIXES.len()));
            let city = i % CITIES.len();
            let place = near(&mut rng, city, &mut counter);
            Company { words, suffix, place }
        })
        .collect();

    let mut taken_last: Vec<String> = Vec::new();
    let people: Vec<Person> = (0..n_people)
        .map(|i| {
            let last = distinct_word(&mut rng, &PERSON_SYLLABLES, 3, &mut taken_last, &Lexicon::default());
            let first = word(&mut rng, &PERSON_SYLLABLES, 2);
            let middle = rng.gen_bool(0.4).then(|| word(&mut rng, &PERSON_SYLLABLES, 2));
            let accent = rng.gen_bool(params.accented).then(|| {
                let idx = rng.gen_range(0..2);
                let w: Vec<char> = if idx == 0 { last.chars().collect() } else { first.chars().collect() };
                let vowels: Vec<(usize, char)> = w
                    .iter()
                    .enumerate()
                    .filter_map(|(k, ch)| ACCENTS.iter().find(|(v, _)| v == ch).map(|(_, a)| (k, *a)))
                    .collect();
                vowels.choose(&mut rng).map(|&(pos, c)| (idx, pos, c))
            }).flatten();
            let employer = if i < n_companies { i } else { rng.gen_range(0..n_companies) };
            let city = companies[employer].place.city;
            let home = if rng.gen_bool(params.business_address) {
                companies[employer].place.clone()
            } else {
                near(&mut rng, city, &mut counter)
            };
            let second_home = rng.gen_bool(noise.mobile).then(|| {
                let other = (city + rng.gen_range(1..CITIES.len())) % CITIES.len();
                near(&mut rng, other, &mut counter)
            });
            Person {
                last,
                first,
                middle,
                accent,
                employer,
                home,
                second_home,
            }
        })
        .collect();

    let mut staff: Vec<Vec<usize>> = vec![Vec::new(); n_companies];
    for (i, p) in people.iter().enumerate() {
        staff[p.employer].push(i);
    }

    let mut out = SyntheticCorpus::default();
    let mut geocodes: BTreeMap<String, (f64, f64, &str)> = BTreeMap::new();
    for c in &companies {
        geocodes.insert(c.place.address.clone(), (c.place.lat, c.place.lon, "street"));
    }
    for p in &people {
        for place in std::iter::once(&p.home).chain(&p.second_home) {
            geocodes.insert(place.address.clone(), (place.lat, place.lon, "street"));
        }
    }
    for (city, (_, _, lat, lon)) in CITIES.iter().enumerate() {
        geocodes.insert(city_address(city), (*lat, *lon, "city"));
    }

    let max_led = (2.0 * params.patents_per_inventor - 1.0).max(1.0) as usize;
    let mut patent_no = 0usize;
    let mut by_company: Vec<Vec<String>> = vec![Vec::new(); n_companies];
    let mut family_of: BTreeMap<String, String> = BTreeMap::new();
    for (lead, person) in people.iter().enumerate() {
        for _ in 0..rng.gen_range(1..=max_led) {
            patent_no += 1;
            let pid = format!("EP{patent_no:07}");
            let office = *[Office::Epo, Office::Pct, Office::Uspto].choose(&mut rng).expect("offices");
            let employer = person.employer;
            let mut team = vec![lead];
            let colleagues: Vec<usize> = staff[employer].iter().copied().filter(|&c| c != lead).collect();
            let extra = rng.gen_range(0..=2.min(colleagues.len()));
            team.extend(colleagues.choose_multiple(&mut rng, extra));

            let company = &companies[employer];
            let (aname, aaddr) = company_mention(&mut rng, company, &noise);
            push(&mut out, &pid, office, Role::Assignee, 0, aname, aaddr, format!("A{employer:05}"));
            for (pos, &who) in team.iter().enumerate() {
                let p = &people[who];
                let place = match &p.second_home {
                    Some(second) if rng.gen_bool(0.3) => second,
                    _ => &p.home,
                };
                let (name, addr) = person_mention(&mut rng, p, place, &noise);
                push(&mut out, &pid, office, Role::Inventor, pos as u32, name, addr, format!("I{who:05}"));
            }

            let mut ctx = PatentContext::new(&pid);
            let earlier = &by_company[employer];
            if let Some(prev) = earlier.choose(&mut rng) {
                if rng.gen_bool(0.3) {
                    ctx.cited_patents.insert(prev.clone());
                }
                if rng.gen_bool(0.1) {
                    let fam = family_of.get(prev).cloned().unwrap_or_else(|| format!("F{prev}"));
                    family_of.insert(prev.clone(), fam.clone());
                    ctx.family_id = Some(fam);
                }
            }
            if let Some(f) = &ctx.family_id {
                family_of.insert(pid.clone(), f.clone());
            }
            by_company[employer].push(pid.clone());
            out.contexts.push(ctx);
        }
    }
    for ctx in &mut out.contexts {
        if ctx.family_id.is_none() {
            ctx.family_id = family_of.get(&ctx.patent_id).cloned();
        }
    }
    out.geocodes = geocodes
        .into_iter()
        .map(|(a, (lat, lon, code))| (a, lat, lon, code.to_string()))
        .collect();
    out
}

#[allow(clippy::too_many_arguments)]
fn push(
    out: &mut SyntheticCorpus,
    pid: &str,
    office: Office,
    role: Role,
    pos: u32,
    name: String,
    address: String,
    label: String,
) {
    out.benchmark.push(BenchmarkRow {
        patent_id: pid.to_string(),
        role,
        name: name.clone(),
        entity_id: label,
    });
    out.mentions
        .push(Mention::new(MentionId::new(pid, role, pos), office, name, address));
}

fn company_mention(rng: &mut ChaCha8Rng, c: &Company, noise: &NoiseParams) -> (String, String) {
    let mut words: Vec<String> = c.words.iter().map(|w| capitalize(w)).collect();
    let suffix = c.suffix.map(|s| SUFFIXES[s].0.to_string());
    let mut address = c.place.address.clone();
    let u: f64 = rng.gen();
    let mut cut = 0.0;
    let mut next = |p: f64| {
        cut += p;
        u < cut
    };
    let name = if next(noise.typo) {
        let i = rng.gen_range(0..words.len());
        words[i] = capitalize(&typo(rng, &words[i].to_lowercase()));
        words.into_iter().chain(suffix).collect::<Vec<_>>().join(" ")
    } else if next(noise.reorder) {
        let mut all: Vec<String> = words.into_iter().chain(suffix).collect();
        all.reverse();
        all.join(" ")
    } else if next(noise.abbreviation) {
        let short = c.suffix.map(|s| SUFFIXES[s].1.to_string());
        words.into_iter().chain(short).collect::<Vec<_>>().join(" ")
    } else if next(noise.acronym) {
        let all: Vec<String> = words.into_iter().chain(suffix).collect();
        if all.len() >= 2 {
            all.iter().filter_map(|w| w.chars().next()).collect::<String>().to_uppercase()
        } else {
            all.join(" ")
        }
    } else {
        if next(noise.degrade) {
            address = city_address(c.place.city);
        }
        let all: Vec<String> = words.into_iter().chain(suffix).collect();
        let joined = all.join(" ");
        if rng.gen_bool(0.2) {
            joined.to_uppercase()
        } else {
            joined
        }
    };
    (name, address)
}

fn person_mention(rng: &mut ChaCha8Rng, p: &Person, place: &Place, noise: &NoiseParams) -> (String, String) {
    let mut address = place.address.clone();
    let mut last = capitalize(&p.word_with_accent(0, true));
    let mut first = capitalize(&p.word_with_accent(1, true));
    let mut middle = p.middle.as_deref().map(capitalize);
    let u: f64 = rng.gen();
    let mut cut = 0.0;
    let mut next = |q: f64| {
        cut += q;
        u < cut
    };
    let mut reordered = false;
    if next(noise.typo) {
        if rng.gen_bool(0.5) {
            last = capitalize(&typo(rng, &p.word_with_accent(0, true)));
        } else {
            first = capitalize(&typo(rng, &p.word_with_accent(1, true)));
        }
    } else if next(noise.reorder) {
        reordered = middle.is_some();
    } else if next(noise.abbreviation) {
        middle = middle.map(|m| format!("{}.", &m[..1]));
    } else if p.accent.is_some() && next(noise.accent_strip) {
        last = capitalize(&p.word_with_accent(0, false));
        first = capitalize(&p.word_with_accent(1, false));
    } else if next(noise.degrade) {
        address = city_address(place.city);
    }
    if rng.gen_bool(0.2) {
        last = last.to_uppercase();
    }
    let name = match (middle, reordered) {
        (Some(m), true) => format!("{last}, {m}, {first}"),
        (Some(m), false) => format!("{last}, {first} {m}"),
        (None, _) => format!("{last}, {first}"),
    };
    (name, address)
}

impl SyntheticCorpus {
    pub fn fixture(&self) -> FixtureProvider {
        let mut f = FixtureProvider::new();
        for (a, lat, lon, code) in &self.geocodes {
            f.insert(a, *lat, *lon, code.as_str());
        }
        f
    }

    /// Geocodes every mention address through the fixture, in memory.
    pub fn geocode_records(&self, tiers: &QualityTiers) -> Result<BTreeMap<String, GeocodeRecord>> {
        let fixture = self.fixture();
        let mut cache = GeocodeCache::in_memory();
        Geocoder::new(&fixture, tiers.clone())
            .geocode_all(self.mentions.iter().map(|m| m.raw_address.as_str()), &mut cache)
    }

    pub fn contexts_map(&self) -> BTreeMap<String, PatentContext> {
        self.contexts.iter().map(|c| (c.patent_id.clone(), c.clone())).collect()
    }

    pub fn entity_labels(&self) -> BTreeSet<&str> {
        self.benchmark.iter().map(|r| r.entity_id.as_str()).collect()
    }

    pub fn render_mentions(&self) -> String {
        let mut s = String::from("patent_id\toffice\trole\tposition\tname\taddress\n");
        for m in &self.mentions {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                m.id.patent_id, m.office, m.id.role, m.id.position, m.raw_name, m.raw_address
            );
        }
        s
    }

    pub fn render_geocodes(&self) -> String {
        let mut s = String::new();
        for (a, lat, lon, code) in &self.geocodes {
            let _ = writeln!(s, "{a}\t{lat:.6}\t{lon:.6}\t{code}");
        }
        s
    }

    pub fn render_contexts(&self) -> String {
        let mut s = String::from("patent_id\tfamily_id\tcited_patent_ids\n");
        for c in &self.contexts {
            let cited: Vec<&str> = c.cited_patents.iter().map(String::as_str).collect();
            let _ = writeln!(
                s,
                "{}\t{}\t{}",
                c.patent_id,
                c.family_id.as_deref().unwrap_or(""),
                cited.join(";")
            );
        }
        s
    }

    pub fn render_benchmark(&self) -> String {
        let mut s = String::from("patent_id\trole\tname\tbenchmark_entity_id\n");
        for r in &self.benchmark {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.patent_id, r.role, r.name, r.entity_id);
        }
        s
    }

    /// Writes `mentions.tsv`, `geocodes.tsv`, `contexts.tsv` and
    /// `benchmark.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<SynthPaths> {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::write(dir, e))?;
        let paths = SynthPaths {
            mentions: dir.join("mentions.tsv"),
            geocodes: dir.join("geocodes.tsv"),
            contexts: dir.join("contexts.tsv"),
            benchmark: dir.join("benchmark.tsv"),
        };
        write_file(&paths.mentions, self.render_mentions().as_bytes())?;
        write_file(&paths.geocodes, self.render_geocodes().as_bytes())?;
        write_file(&paths.contexts, self.render_contexts().as_bytes())?;
        write_file(&paths.benchmark, self.render_benchmark().as_bytes())?;
        Ok(paths)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthPaths {
    pub mentions: PathBuf,
    pub geocodes: PathBuf,
    pub contexts: PathBuf,
    pub benchmark: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic(&SynthParams::new(7, 50));
        let b = generate_synthetic(&SynthParams::new(7, 50));
        assert_eq!(a.render_mentions(), b.render_mentions());
        assert_eq!(a.render_geocodes(), b.render_geocodes());
        assert_eq!(a.render_contexts(), b.render_contexts());
        let c = generate_synthetic(&SynthParams::new(8, 50));
        assert_ne!(a.render_mentions(), c.render_mentions());
    }

    #[test]
    fn every_entity_is_labelled() {
        let c = generate_synthetic(&SynthParams::new(42, 200));
        assert_eq!(c.entity_labels().len(), 200);
        assert_eq!(c.benchmark.len(), c.mentions.len());
    }

    #[test]
    fn every_address_has_a_fixture() {
        let c = generate_synthetic(&SynthParams::new(3, 60));
        let f: BTreeSet<&str> = c.geocodes.iter().map(|g| g.0.as_str()).collect();
        assert!(c.mentions.iter().all(|m| f.contains(m.raw_address.as_str())));
    }

    #[test]
    fn typo_is_one_edit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let t = typo(&mut rng, "kalomi");
            assert!(t != "kalomi" && edit_distance_le_1("kalomi", &t), "{t}");
        }
    }

    #[test]
    fn empty_request() {
        assert!(generate_synthetic(&SynthParams::new(1, 0)).mentions.is_empty());
    }
}
