//! Exact-name linking across nearby points.
//!
//! Every occurrence of one exact name closer than the link radius to another
//! occurrence of that name is joined. Links close transitively, so chains of
//! short hops may span more than the radius unless a hop limit is set.
//! Same-point clusters from the previous stage ride along because both stages
//! share one union-find.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use crate::blocking::SiteTable;
use crate::cluster::UnionFind;
use crate::corpus::{GeoPoint, Role};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_LINK_RADIUS_KM: f64 = 20.0;

/// Great-circle distance on a sphere of radius 6371 km.
pub fn haversine_km(p1: &GeoPoint, p2: &GeoPoint) -> f64 {
    let (phi1, phi2) = (p1.lat.to_radians(), p2.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (p2.lon - p1.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Every located occurrence of one exact name.
#[derive(Clone, Debug)]
pub struct NameSite {
    pub role: Role,
    pub name: String,
    /// `(site index, point)` pairs.
    pub points: Vec<(usize, GeoPoint)>,
}

/// Groups located sites by `(role, exact name)`.
pub fn name_sites(table: &SiteTable) -> Vec<NameSite> {
    let mut groups: BTreeMap<(Role, &str), Vec<(usize, GeoPoint)>> = BTreeMap::new();
    for (idx, site) in table.sites.iter().enumerate() {
        if let Some(geo) = site.geo() {
            groups.entry((site.role, site.key.as_str())).or_default().push((idx, geo));
        }
    }
    groups
        .into_iter()
        .map(|((role, name), points)| NameSite {
            role,
            name: name.to_string(),
            points,
        })
        .collect()
}

/// Pairs of points closer than `radius_km`, as indices into `points`.
/// Points are swept in latitude order; meridian distance bounds the
/// great-circle distance from below, so pairs are cut off once the latitude
/// gap alone exceeds the radius.
pub fn close_pairs(points: &[GeoPoint], radius_km: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].lat.total_cmp(&points[b].lat).then(a.cmp(&b)));
    let lat_gap_km = |a: &GeoPoint, b: &GeoPoint| EARTH_RADIUS_KM * (b.lat - a.lat).to_radians().abs();
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if lat_gap_km(&points[i], &points[j]) > radius_km * (1.0 + 1e-9) {
                break;
            }
            if haversine_km(&points[i], &points[j]) < radius_km {
                out.push((i.min(j), i.max(j)));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Hop-limited grouping: each unassigned point, in index order, seeds a group
/// that grows breadth-first through close pairs for at most `hops` steps.
fn hop_limited_pairs(n: usize, pairs: &[(usize, usize)], hops: usize) -> Vec<(usize, usize)> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for seed in 0..n {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut queue = VecDeque::from([(seed, 0usize)]);
        while let Some((node, depth)) = queue.pop_front() {
            if depth == hops {
                continue;
            }
            for &next in &adj[node] {
                if !assigned[next] {
                    assigned[next] = true;
                    out.push((seed, next));
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NearbyStats {
    pub names: usize,
    pub multi_point_links: usize,
    pub distance_links: usize,
}

/// Site links for one name.
pub fn name_links(site: &NameSite, radius_km: f64, max_chain_hops: Option<usize>) -> Vec<(usize, usize)> {
    let geo: Vec<GeoPoint> = site.points.iter().map(|(_, p)| *p).collect();
    let mut pairs = close_pairs(&geo, radius_km);
    if let Some(hops) = max_chain_hops {
        pairs = hop_limited_pairs(geo.len(), &pairs, hops);
    }
    pairs
        .into_iter()
        .map(|(a, b)| (site.points[a].0, site.points[b].0))
        .collect()
}

/// Joins the several equal-quality points of each mention, then every pair of
/// same-name points closer than `radius_km`. Names are processed in parallel
/// on the current rayon pool and merged in name order.
pub fn link_same_name(
    table: &SiteTable,
    radius_km: f64,
    max_chain_hops: Option<usize>,
    state: &mut UnionFind,
) -> NearbyStats {
    let mut stats = NearbyStats::default();
    for sites in &table.mention_sites {
        for w in sites.windows(2) {
            if state.union(w[0], w[1]) {
                stats.multi_point_links += 1;
            }
        }
    }
    let groups = name_sites(table);
    stats.names = groups.len();
    let links: Vec<Vec<(usize, usize)>> = groups
        .par_iter()
        .map(|g| name_links(g, radius_km, max_chain_hops))
        .collect();
    for (a, b) in links.into_iter().flatten() {
        if state.union(a, b) {
            stats.distance_links += 1;
        }
    }
    stats
}
