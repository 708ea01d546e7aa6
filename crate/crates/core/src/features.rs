//! Pairwise proximity features between two scans.

use serde::{Deserialize, Serialize};

use crate::scanmodel::{ApObservation, Scan};

/// Jaccard similarity, Pearson correlation and Das proximity of a scan pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub jaccard: f64,
    pub pearson: f64,
    pub das: f64,
    pub shared_ap_count: usize,
    pub union_ap_count: usize,
}

/// Merge-join over two BSSID-sorted observation lists, yielding the RSSI pair
/// of every access point both scans saw.
struct SharedAps<'a> {
    a: &'a [ApObservation],
    b: &'a [ApObservation],
}

impl Iterator for SharedAps<'_> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        use std::cmp::Ordering::*;
        while let (Some(x), Some(y)) = (self.a.first(), self.b.first()) {
            match x.bssid.cmp(&y.bssid) {
                Less => self.a = &self.a[1..],
                Greater => self.b = &self.b[1..],
                Equal => {
                    self.a = &self.a[1..];
                    self.b = &self.b[1..];
                    return Some((x.rssi_dbm, y.rssi_dbm));
                }
            }
        }
        None
    }
}

fn shared<'a>(a: &'a Scan, b: &'a Scan) -> SharedAps<'a> {
    SharedAps {
        a: a.observations(),
        b: b.observations(),
    }
}

fn shared_and_union(a: &Scan, b: &Scan) -> (usize, usize) {
    let shared = shared(a, b).count();
    (shared, a.len() + b.len() - shared)
}

/// |A ∩ B| / |A ∪ B| over the BSSID sets; 0 when both scans are empty.
pub fn jaccard(a: &Scan, b: &Scan) -> f64 {
    let (shared, union) = shared_and_union(a, b);
    if union == 0 {
        0.0
    } else {
        shared as f64 / union as f64
    }
}

/// Sample Pearson correlation of the RSSIs of the shared access points.
///
/// Returns 0 with fewer than two shared APs or when either side's RSSIs are
/// all equal.
pub fn pearson(a: &Scan, b: &Scan) -> f64 {
    let pairs: Vec<(f64, f64)> = shared(a, b).collect();
    pearson_of_pairs(&pairs)
}

fn pearson_of_pairs(pairs: &[(f64, f64)]) -> f64 {
    let Some(&(x0, y0)) = pairs.first() else {
        return 0.0;
    };
    if pairs.len() < 2
        || pairs.iter().all(|&(x, _)| x == x0)
        || pairs.iter().all(|&(_, y)| y == y0)
    {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let (sum_x, sum_y) = pairs
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mean_x, mean_y) = (sum_x / n, sum_y / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// RSSI-agreement-weighted overlap: each shared AP contributes
/// `1 / (1 + |Δrssi|)` (Δ in dB), normalized by the union size.
///
/// Bounded above by [`jaccard`], with equality exactly when every shared AP
/// reports the same RSSI in both scans.
pub fn das_proximity(a: &Scan, b: &Scan) -> f64 {
    let (_, union) = shared_and_union(a, b);
    if union == 0 {
        return 0.0;
    }
    let weight_sum: f64 = shared(a, b).map(|(x, y)| 1.0 / (1.0 + (x - y).abs())).sum();
    weight_sum / union as f64
}

pub fn feature_vector(a: &Scan, b: &Scan) -> FeatureVector {
    let (shared_ap_count, union_ap_count) = shared_and_union(a, b);
    FeatureVector {
        jaccard: jaccard(a, b),
        pearson: pearson(a, b),
        das: das_proximity(a, b),
        shared_ap_count,
        union_ap_count,
    }
}
