//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls into the library's feature or classifier code; the
//! oracles work on plain slices and sets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use wifi_colocation::scanmodel::{ApObservation, Bssid, Scan, ScanLog};

/// Proximity prediction for each feature triple as a plain loop over
/// indexed arrays, 0 = Jaccard, 1 = Pearson, 2 = Das.
pub fn reference_classify(scans: &[[f64; 3]], avg_metrics: [f64; 3]) -> Vec<bool> {
    let mut predictions = Vec::with_capacity(scans.len());
    for scan in scans {
        if scan[0] > avg_metrics[0] || scan[1] > avg_metrics[1] || scan[2] > avg_metrics[2] {
            predictions.push(true);
        } else {
            predictions.push(false);
        }
    }
    predictions
}

/// Textbook sample correlation: means first, then covariance and variances.
/// Degenerate inputs map to 0.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx).powi(2);
        vy += (y[i] - my).powi(2);
    }
    cov /= (n - 1) as f64;
    vx /= (n - 1) as f64;
    vy /= (n - 1) as f64;
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

pub fn jaccard_oracle(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Average ranks, ties sharing the mean of their positions.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson_oracle(&ranks(x), &ranks(y))
}

/// Scan over a random subset of a BSSID universe `0..universe`.
pub fn random_scan<R: Rng>(rng: &mut R, device: &str, t: f64, universe: u64, dist: Option<f64>) -> Scan {
    let n = rng.random_range(0..=universe.min(30));
    let ids: BTreeSet<u64> = (0..n).map(|_| rng.random_range(0..universe)).collect();
    let obs = ids
        .into_iter()
        .map(|id| ApObservation::new(Bssid::from_u64(id), rng.random_range(-110..=-20) as f64).unwrap())
        .collect();
    Scan::new(device, t, obs, dist).unwrap()
}

/// Log with arbitrary device ids, fractional timestamps and RSSIs, optional
/// SSIDs (including non-ASCII) and optional distances.
pub fn random_log<R: Rng>(rng: &mut R) -> ScanLog {
    let devices = rng.random_range(0..4);
    let mut scans = Vec::new();
    for d in 0..devices {
        let id = if rng.random_bool(0.2) { format!("dév \"{d}\"") } else { format!("dev-{d}") };
        for _ in 0..rng.random_range(0..6) {
            let n = rng.random_range(0..12);
            let bssids: BTreeSet<u64> = (0..n).map(|_| rng.random::<u64>() & 0xffff_ffff_ffff).collect();
            let obs = bssids
                .into_iter()
                .map(|b| {
                    let o = ApObservation::new(Bssid::from_u64(b), rng.random_range(-120.0..=0.0)).unwrap();
                    match rng.random_range(0..3) {
                        0 => o,
                        1 => o.with_ssid(format!("net {}", rng.random::<u16>())),
                        _ => o.with_ssid("café ☕"),
                    }
                })
                .collect();
            let t = rng.random_range(0.0..1e6);
            let dist = rng.random_bool(0.5).then(|| rng.random_range(0.0..100.0));
            scans.push(Scan::new(id.clone(), t, obs, dist).unwrap());
        }
    }
    ScanLog::new("random", scans)
}
