//! Address geocoding behind a provider trait, with an append-only cache.
//!
//! Provider answers carry provider-specific precision codes; these are mapped
//! onto a 0-100 quality scale where 70 and above is street level or better.
//! Cache lines are `address_key|provider|quality|lat|lon|fetched_at`, one per
//! point, with empty quality/lat/lon marking an address that resolved to
//! nothing. Later records for a key override earlier ones.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::corpus::GeoPoint;
use crate::error::{Error, Result};

/// Cache key: trimmed, whitespace-collapsed, lowercased address.
pub fn address_key(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Provider precision code -> quality on the 0-100 scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QualityTiers {
    tiers: BTreeMap<String, u8>,
}

impl Default for QualityTiers {
    fn default() -> Self {
        let tiers = [
            ("point", 87),
            ("rooftop", 87),
            ("street", 72),
            ("line", 72),
            ("zip", 60),
            ("postcode", 60),
            ("city", 40),
            ("state", 30),
            ("country", 10),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        QualityTiers { tiers }
    }
}

impl QualityTiers {
    pub fn set(&mut self, code: &str, quality: u8) {
        self.tiers.insert(code.to_ascii_lowercase(), quality.min(100));
    }

    /// Numeric codes pass through unchanged; named codes are looked up.
    pub fn quality(&self, code: &str) -> Option<u8> {
        let code = code.trim();
        if let Ok(q) = code.parse::<u8>() {
            return (q <= 100).then_some(q);
        }
        self.tiers.get(&code.to_ascii_lowercase()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.tiers.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProviderHit {
    pub lat: f64,
    pub lon: f64,
    pub code: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProviderError {
    Timeout,
    Http(u16),
    QuotaExceeded,
    Other(String),
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderError::Timeout => f.write_str("timeout"),
            ProviderError::Http(code) => write!(f, "http {code}"),
            ProviderError::QuotaExceeded => f.write_str("quota exceeded"),
            ProviderError::Other(msg) => f.write_str(msg),
        }
    }
}

pub trait GeocodeProvider: Send + Sync {
    fn name(&self) -> &str;
    fn lookup(&self, address: &str) -> Result<Vec<ProviderHit>, ProviderError>;
}

/// Canned responses read from `address  lat  lon  code` rows. Addresses are
/// matched by [`address_key`]; several rows for one address yield several hits.
#[derive(Clone, Debug, Default)]
pub struct FixtureProvider {
    responses: HashMap<String, Vec<ProviderHit>>,
}

impl FixtureProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: &str, lat: f64, lon: f64, code: impl Into<String>) {
        self.responses
            .entry(address_key(address))
            .or_default()
            .push(ProviderHit {
                lat,
                lon,
                code: code.into(),
            });
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::read(path, e))?;
        let mut fixture = FixtureProvider::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::read(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 4 {
                return Err(parse_err("expected `address  lat  lon  code`"));
            }
            let lat: f64 = cols[1].trim().parse().map_err(|_| parse_err("bad latitude"))?;
            let lon: f64 = cols[2].trim().parse().map_err(|_| parse_err("bad longitude"))?;
            fixture.insert(cols[0], lat, lon, cols[3].trim());
        }
        Ok(fixture)
    }
}

impl GeocodeProvider for FixtureProvider {
    fn name(&self) -> &str {
        "fixture"
    }

    fn lookup(&self, address: &str) -> Result<Vec<ProviderHit>, ProviderError> {
        Ok(self
            .responses
            .get(&address_key(address))
            .cloned()
            .unwrap_or_default())
    }
}

/// Why a record carries no usable points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeocodeError {
    /// The provider answered but found nothing. Cached.
    NotFound,
    /// Transport or quota failure. Never cached, retried on the next run.
    Failed(ProviderError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeocodeRecord {
    pub address_key: String,
    pub points: Vec<GeoPoint>,
    pub provider: String,
    pub fetched_at: u64,
    pub error: Option<GeocodeError>,
}

impl GeocodeRecord {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self.error, Some(GeocodeError::Failed(_)))
    }

    /// Record for an address with nothing to look up.
    pub fn empty(address_key: String) -> Self {
        GeocodeRecord {
            address_key,
            points: Vec::new(),
            provider: String::new(),
            fetched_at: 0,
            error: Some(GeocodeError::NotFound),
        }
    }
}

/// Points sharing the record's maximum quality.
pub fn best_points(record: &GeocodeRecord) -> Vec<GeoPoint> {
    let Some(max) = record.points.iter().map(|p| p.quality).max() else {
        return Vec::new();
    };
    record
        .points
        .iter()
        .filter(|p| p.quality == max)
        .copied()
        .collect()
}

/// Append-only persistent cache; purely in memory when opened without a path.
#[derive(Debug, Default)]
pub struct GeocodeCache {
    records: HashMap<String, GeocodeRecord>,
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
    pub skipped_lines: usize,
}

impl GeocodeCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = GeocodeCache::default();
        cache.path = Some(path.to_path_buf());
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::read(path, e))?;
            let mut pending: Option<GeocodeRecord> = None;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::read(path, e))?;
                if line.is_empty() {
                    continue;
                }
                let Some((key, provider, point, fetched_at)) = parse_cache_line(&line) else {
                    log::warn!("{}: skipping malformed cache line", path.display());
                    cache.skipped_lines += 1;
                    continue;
                };
                match pending.as_mut() {
                    Some(rec)
                        if rec.address_key == key
                            && rec.provider == provider
                            && rec.fetched_at == fetched_at =>
                    {
                        rec.points.extend(point);
                    }
                    _ => {
                        if let Some(done) = pending.take() {
                            cache.finish(done);
                        }
                        pending = Some(GeocodeRecord {
                            address_key: key,
                            points: point.into_iter().collect(),
                            provider,
                            fetched_at,
                            error: None,
                        });
                    }
                }
            }
            if let Some(done) = pending {
                cache.finish(done);
            }
        }
        Ok(cache)
    }

    fn finish(&mut self, mut record: GeocodeRecord) {
        if record.points.is_empty() {
            record.error = Some(GeocodeError::NotFound);
        }
        self.records.insert(record.address_key.clone(), record);
    }

    pub fn get(&self, key: &str) -> Option<&GeocodeRecord> {
        self.records.get(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stores a record; retryable failures are kept out of the cache.
    pub fn insert(&mut self, record: GeocodeRecord) -> Result<()> {
        if record.is_retryable() {
            return Ok(());
        }
        if let Some(path) = &self.path {
            if self.writer.is_none() {
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::write(path, e))?;
                self.writer = Some(BufWriter::new(file));
            }
            let writer = self.writer.as_mut().expect("writer opened above");
            writer
                .write_all(render_cache_lines(&record).as_bytes())
                .map_err(|e| Error::write(path, e))?;
        }
        self.records.insert(record.address_key.clone(), record);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let (Some(w), Some(path)) = (self.writer.as_mut(), self.path.as_ref()) {
            w.flush().map_err(|e| Error::write(path, e))?;
        }
        Ok(())
    }
}

impl Drop for GeocodeCache {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

fn render_cache_lines(record: &GeocodeRecord) -> String {
    let mut out = String::new();
    if record.points.is_empty() {
        out.push_str(&format!(
            "{}|{}||||{}\n",
            record.address_key, record.provider, record.fetched_at
        ));
    }
    for p in &record.points {
        out.push_str(&format!(
            "{}|{}|{}|{}|{}|{}\n",
            record.address_key, record.provider, p.quality, p.lat, p.lon, record.fetched_at
        ));
    }
    out
}

type CacheLine = (String, String, Option<GeoPoint>, u64);

fn parse_cache_line(line: &str) -> Option<CacheLine> {
    // split from the right so `|` inside an address survives
    let mut fields = line.rsplitn(6, '|');
    let fetched_at: u64 = fields.next()?.parse().ok()?;
    let lon = fields.next()?;
    let lat = fields.next()?;
    let quality = fields.next()?;
    let provider = fields.next()?.to_string();
    let key = fields.next()?.to_string();
    let point = if quality.is_empty() && lat.is_empty() && lon.is_empty() {
        None
    } else {
        Some(GeoPoint::checked(lat.parse().ok()?, lon.parse().ok()?, quality.parse().ok()?)?)
    };
    Some((key, provider, point, fetched_at))
}

/// Pause-and-retry policy for quota errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RateLimit {
    pub max_retries: u32,
    pub pause: Duration,
}

impl Default for RateLimit {
    fn default() -> Self {
        RateLimit {
            max_retries: 3,
            pause: Duration::from_secs(60),
        }
    }
}

pub struct Geocoder<'a> {
    provider: &'a dyn GeocodeProvider,
    tiers: QualityTiers,
    rate_limit: RateLimit,
    in_flight: usize,
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl<'a> Geocoder<'a> {
    pub fn new(provider: &'a dyn GeocodeProvider, tiers: QualityTiers) -> Self {
        Geocoder {
            provider,
            tiers,
            rate_limit: RateLimit::default(),
            in_flight: 1,
        }
    }

    pub fn with_rate_limit(mut self, rate_limit: RateLimit) -> Self {
        self.rate_limit = rate_limit;
        self
    }

    pub fn with_in_flight(mut self, in_flight: usize) -> Self {
        self.in_flight = in_flight.max(1);
        self
    }

    fn fetch(&self, key: &str, raw: &str) -> GeocodeRecord {
        let mut attempt = 0;
        let response = loop {
            match self.provider.lookup(raw) {
                Err(ProviderError::QuotaExceeded) if attempt < self.rate_limit.max_retries => {
                    attempt += 1;
                    log::warn!(
                        "{}: quota exceeded, pausing {:?}",
                        self.provider.name(),
                        self.rate_limit.pause
                    );
                    thread::sleep(self.rate_limit.pause);
                }
                other => break other,
            }
        };
        let mut record = GeocodeRecord {
            address_key: key.to_string(),
            points: Vec::new(),
            provider: self.provider.name().to_string(),
            fetched_at: now_secs(),
            error: None,
        };
        match response {
            Ok(hits) => {
                for hit in hits {
                    let point = self
                        .tiers
                        .quality(&hit.code)
                        .and_then(|q| GeoPoint::checked(hit.lat, hit.lon, q));
                    match point {
                        Some(p) => record.points.push(p),
                        None => log::warn!("{key}: dropping unusable hit {hit:?}"),
                    }
                }
                if record.points.is_empty() {
                    record.error = Some(GeocodeError::NotFound);
                }
            }
            Err(e) => {
                log::warn!("{key}: provider error: {e}");
                record.error = Some(GeocodeError::Failed(e));
            }
        }
        record
    }

    /// Cache first; on a miss the provider is asked once and the answer stored.
    pub fn geocode(&self, address: &str, cache: &mut GeocodeCache) -> Result<GeocodeRecord> {
        let key = address_key(address);
        if key.is_empty() {
            return Ok(GeocodeRecord::empty(key));
        }
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
        let record = self.fetch(&key, address);
        cache.insert(record.clone())?;
        Ok(record)
    }

    /// Geocodes many addresses. Misses are fetched concurrently up to the
    /// in-flight limit and appended to the cache in key order.
    pub fn geocode_all<'s, I>(
        &self,
        addresses: I,
        cache: &mut GeocodeCache,
    ) -> Result<BTreeMap<String, GeocodeRecord>>
    where
        I: IntoIterator<Item = &'s str>,
    {
        let mut raw_by_key: BTreeMap<String, &str> = BTreeMap::new();
        for a in addresses {
            raw_by_key.entry(address_key(a)).or_insert(a);
        }
        let mut out = BTreeMap::new();
        let mut misses: BTreeSet<&String> = BTreeSet::new();
        for key in raw_by_key.keys() {
            if key.is_empty() {
                out.insert(key.clone(), GeocodeRecord::empty(key.clone()));
            } else if let Some(hit) = cache.get(key) {
                out.insert(key.clone(), hit.clone());
            } else {
                misses.insert(key);
            }
        }
        if misses.is_empty() {
            return Ok(out);
        }

        let fetched: Mutex<Vec<GeocodeRecord>> = Mutex::new(Vec::with_capacity(misses.len()));
        let work: Vec<(&String, &str)> = misses.iter().map(|k| (*k, raw_by_key[*k])).collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.in_flight)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            work.par_iter().for_each(|(key, raw)| {
                let record = self.fetch(key, raw);
                fetched.lock().expect("poisoned").push(record);
            })
        });
        let mut fetched = fetched.into_inner().expect("poisoned");
        fetched.sort_by(|a, b| a.address_key.cmp(&b.address_key));
        for record in fetched {
            cache.insert(record.clone())?;
            out.insert(record.address_key.clone(), record);
        }
        cache.flush()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<P> {
        inner: P,
        calls: AtomicUsize,
    }

    impl<P: GeocodeProvider> GeocodeProvider for Counting<P> {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn lookup(&self, address: &str) -> Result<Vec<ProviderHit>, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.lookup(address)
        }
    }

    struct Flaky(ProviderError);

    impl GeocodeProvider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn lookup(&self, _: &str) -> Result<Vec<ProviderHit>, ProviderError> {
            Err(self.0.clone())
        }
    }

    fn rockville() -> FixtureProvider {
        let mut f = FixtureProvider::new();
        f.insert(
            "6011 Executive Boulevard, Rockville MD 20852",
            39.048843,
            -77.120419,
            "87",
        );
        f.insert("Bethesda, MD", 38.984652, -77.094709, "city");
        f
    }

    #[test]
    fn fixture_resolves_rockville() {
        let provider = rockville();
        let geocoder = Geocoder::new(&provider, QualityTiers::default());
        let mut cache = GeocodeCache::in_memory();
        let rec = geocoder
            .geocode("6011  Executive Boulevard, ROCKVILLE MD 20852", &mut cache)
            .unwrap();
        assert_eq!(rec.points, vec![GeoPoint::new(39.048843, -77.120419, 87)]);
        assert!(!rec.is_error());
        let city = geocoder.geocode("Bethesda, MD", &mut cache).unwrap();
        assert_eq!(city.points[0].quality, 40);
    }

    #[test]
    fn cache_hit_skips_provider() {
        let provider = Counting {
            inner: rockville(),
            calls: AtomicUsize::new(0),
        };
        let geocoder = Geocoder::new(&provider, QualityTiers::default());
        let mut cache = GeocodeCache::in_memory();
        let first = geocoder.geocode("Bethesda, MD", &mut cache).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
        let second = geocoder.geocode("bethesda,   md", &mut cache).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
        assert_eq!(first, second);
    }

    #[test]
    fn gibberish_is_flagged_and_cached() {
        let provider = rockville();
        let geocoder = Geocoder::new(&provider, QualityTiers::default());
        let mut cache = GeocodeCache::in_memory();
        let rec = geocoder.geocode("qwzx 999 nowhere", &mut cache).unwrap();
        assert!(rec.points.is_empty());
        assert_eq!(rec.error, Some(GeocodeError::NotFound));
        assert!(cache.get("qwzx 999 nowhere").is_some());
    }

    #[test]
    fn provider_failures_are_retryable_and_not_cached() {
        let provider = Flaky(ProviderError::Timeout);
        let geocoder = Geocoder::new(&provider, QualityTiers::default());
        let mut cache = GeocodeCache::in_memory();
        let rec = geocoder.geocode("1 Main St", &mut cache).unwrap();
        assert!(rec.is_retryable());
        assert!(rec.points.is_empty());
        assert!(cache.is_empty());

        let quota = Flaky(ProviderError::QuotaExceeded);
        let geocoder = Geocoder::new(&quota, QualityTiers::default()).with_rate_limit(RateLimit {
            max_retries: 2,
            pause: Duration::from_millis(1),
        });
        let rec = geocoder.geocode("1 Main St", &mut cache).unwrap();
        assert_eq!(rec.error, Some(GeocodeError::Failed(ProviderError::QuotaExceeded)));
    }

    #[test]
    fn best_points_keep_max_quality() {
        let rec = |qs: &[u8]| GeocodeRecord {
            address_key: "a".into(),
            points: qs.iter().map(|&q| GeoPoint::new(1.0, 2.0, q)).collect(),
            provider: "t".into(),
            fetched_at: 0,
            error: None,
        };
        let best = best_points(&rec(&[60, 40]));
        assert_eq!(best.iter().map(|p| p.quality).collect::<Vec<_>>(), [60]);
        assert_eq!(best_points(&rec(&[87, 87])).len(), 2);
        assert!(best_points(&rec(&[])).is_empty());
    }

    #[test]
    fn quality_tiers_map_codes() {
        let tiers = QualityTiers::default();
        assert_eq!(tiers.quality("ROOFTOP"), Some(87));
        assert_eq!(tiers.quality("street"), Some(72));
        assert_eq!(tiers.quality("zip"), Some(60));
        assert_eq!(tiers.quality("city"), Some(40));
        assert_eq!(tiers.quality("state"), Some(30));
        assert_eq!(tiers.quality("country"), Some(10));
        assert_eq!(tiers.quality("55"), Some(55));
        assert_eq!(tiers.quality("140"), None);
        assert_eq!(tiers.quality("galaxy"), None);
    }

    #[test]
    fn cache_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("geo.cache");
        let records = vec![
            GeocodeRecord {
                address_key: "a|b street".into(),
                points: vec![
                    GeoPoint::new(39.048843, -77.120419, 87),
                    GeoPoint::new(0.1 + 0.2, -0.000001, 87),
                ],
                provider: "fixture".into(),
                fetched_at: 1_700_000_000,
                error: None,
            },
            GeocodeRecord {
                address_key: "nowhere".into(),
                points: vec![],
                provider: "fixture".into(),
                fetched_at: 5,
                error: Some(GeocodeError::NotFound),
            },
        ];
        {
            let mut cache = GeocodeCache::open(&path).unwrap();
            for r in &records {
                cache.insert(r.clone()).unwrap();
            }
        }
        let reread = GeocodeCache::open(&path).unwrap();
        assert_eq!(reread.len(), 2);
        for r in &records {
            assert_eq!(reread.get(&r.address_key), Some(r));
        }

        // a torn final line is skipped, later records override earlier ones
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("nowhere|fixture|40|1.5|2.5|9\nbroken|fix");
        std::fs::write(&path, text).unwrap();
        let reread = GeocodeCache::open(&path).unwrap();
        assert_eq!(reread.skipped_lines, 1);
        assert_eq!(reread.get("nowhere").unwrap().points, vec![GeoPoint::new(1.5, 2.5, 40)]);
    }

    #[test]
    fn geocode_all_dedupes_and_orders_appends() {
        let provider = Counting {
            inner: rockville(),
            calls: AtomicUsize::new(0),
        };
        let geocoder = Geocoder::new(&provider, QualityTiers::default()).with_in_flight(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("geo.cache");
        let mut cache = GeocodeCache::open(&path).unwrap();
        let addrs = ["Bethesda, MD", "bethesda, md", "", "6011 Executive Boulevard, Rockville MD 20852", "zzz"];
        let out = geocoder.geocode_all(addrs, &mut cache).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
        assert_eq!(out.len(), 4);
        let text = std::fs::read_to_string(&path).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split('|').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);

        geocoder.geocode_all(addrs, &mut cache).unwrap();
        assert_eq!(provider.calls.load(Ordering::SeqCst), 3);
    }
}
