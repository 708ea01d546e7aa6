//! Synthetic WiFi environments with known ground truth.
//!
//! Received power follows the log-distance path-loss model with log-normal
//! shadowing. When `shadowing_decorrelation_m` is positive the shadowing term
//! of each access point has a static, spatially correlated part (a Gaussian
//! field built from random Fourier features with a squared-exponential
//! kernel) plus a per-scan part drawn from the caller's generator;
//! `temporal_variance_fraction` splits the `noise_sigma_db²` budget between
//! them. With a zero decorrelation length every scan draws fully independent
//! noise.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scanmodel::{ApObservation, Bssid, Scan, ScanLog, RSSI_MAX_DBM, RSSI_MIN_DBM};
use crate::seeding::{derive_seed, keyed_rng, DOMAIN_FIELD, DOMAIN_SHADOWING, DOMAIN_SUBJECTS};

pub const FEET_TO_METERS: f64 = 0.3048;

/// Random Fourier components per shadowing field.
const SHADOW_COMPONENTS: usize = 64;
/// Seconds between consecutive scans of a synthetic subject.
const SCAN_INTERVAL_S: f64 = 60.0;
/// Half-width of the region holding the subjects' home APs, as a fraction of
/// the field extent.
const HOME_REGION_FRACTION: f64 = 0.1;

/// Default share of shadowing variance that changes from scan to scan.
pub const TEMPORAL_VARIANCE_FRACTION: f64 = 0.3;
pub const SCAN_MISS_PROBABILITY: f64 = 0.3;
pub const DEFAULT_FIELD_APS: usize = 300;
pub const DEFAULT_FIELD_SIDE_M: f64 = 150.0;

pub fn feet_to_meters(ft: f64) -> f64 {
    ft * FEET_TO_METERS
}

pub fn meters_to_feet(m: f64) -> f64 {
    m / FEET_TO_METERS
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid path-loss model: {0}")]
    InvalidModel(&'static str),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("scenario has no access points")]
    NoAccessPoints,
    #[error("invalid experiment parameters: {0}")]
    InvalidExperiment(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance_to(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossModel {
    pub rssi0_dbm: f64,
    pub d0_m: f64,
    pub exponent_n: f64,
    pub noise_sigma_db: f64,
    pub sensitivity_dbm: f64,
    /// Length scale of the shadowing field in meters; 0 means independent
    /// per-scan noise.
    pub shadowing_decorrelation_m: f64,
    /// Share of the shadowing variance redrawn on every scan when the field
    /// is correlated.
    pub temporal_variance_fraction: f64,
    /// Chance that a synthetic scan drops an AP that is above the floor.
    pub scan_miss_probability: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            rssi0_dbm: -40.0,
            d0_m: 1.0,
            exponent_n: 2.5,
            noise_sigma_db: 4.0,
            sensitivity_dbm: -90.0,
            shadowing_decorrelation_m: 1.0,
            temporal_variance_fraction: TEMPORAL_VARIANCE_FRACTION,
            scan_miss_probability: SCAN_MISS_PROBABILITY,
        }
    }
}

impl PathLossModel {
    pub fn noiseless() -> Self {
        PathLossModel {
            noise_sigma_db: 0.0,
            scan_miss_probability: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let all_finite = [
            self.rssi0_dbm,
            self.d0_m,
            self.exponent_n,
            self.noise_sigma_db,
            self.sensitivity_dbm,
            self.shadowing_decorrelation_m,
            self.temporal_variance_fraction,
            self.scan_miss_probability,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(SynthError::InvalidModel("parameters must be finite"));
        }
        if self.d0_m <= 0.0 {
            return Err(SynthError::InvalidModel("d0_m must be positive"));
        }
        if self.exponent_n <= 0.0 {
            return Err(SynthError::InvalidModel("exponent_n must be positive"));
        }
        if self.noise_sigma_db < 0.0 {
            return Err(SynthError::InvalidModel("noise_sigma_db must be non-negative"));
        }
        if self.shadowing_decorrelation_m < 0.0 {
            return Err(SynthError::InvalidModel(
                "shadowing_decorrelation_m must be non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.temporal_variance_fraction) {
            return Err(SynthError::InvalidModel(
                "temporal_variance_fraction must lie within [0, 1]",
            ));
        }
        if !(0.0..1.0).contains(&self.scan_miss_probability) {
            return Err(SynthError::InvalidModel("scan_miss_probability must lie within [0, 1)"));
        }
        if self.sensitivity_dbm >= self.rssi0_dbm {
            return Err(SynthError::InvalidModel("sensitivity_dbm must be below rssi0_dbm"));
        }
        if self.rssi0_dbm > RSSI_MAX_DBM || self.sensitivity_dbm < RSSI_MIN_DBM {
            return Err(SynthError::InvalidModel(
                "rssi0_dbm and sensitivity_dbm must lie within [-120, 0]",
            ));
        }
        Ok(())
    }

    /// `rssi0 − 10·n·log10(d/d0) + σ·noise_draw`.
    pub fn rssi_at(&self, distance_m: f64, noise_draw: f64) -> Result<f64, SynthError> {
        if distance_m.is_nan() || distance_m <= 0.0 {
            return Err(SynthError::NonPositiveDistance(distance_m));
        }
        Ok(self.rssi0_dbm - 10.0 * self.exponent_n * (distance_m / self.d0_m).log10()
            + self.noise_sigma_db * noise_draw)
    }

    /// Mean RSSI with distances below `d0` clamped to `d0`.
    pub fn mean_rssi_clamped(&self, distance_m: f64) -> f64 {
        self.rssi_at(distance_m.max(self.d0_m), 0.0)
            .expect("clamped distance is positive")
    }
}

/// A set of access points at fixed positions plus the radio model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub ap_positions: BTreeMap<Bssid, Point>,
    #[serde(default)]
    pub path_loss: PathLossModel,
    pub seed: u64,
}

impl SynthScenario {
    /// `n_aps` access points placed uniformly in a `side_m` square centered
    /// on the origin, with random globally-administered unicast BSSIDs.
    pub fn uniform_field(seed: u64, n_aps: usize, side_m: f64, path_loss: PathLossModel) -> Self {
        let mut rng = keyed_rng(derive_seed(seed, DOMAIN_FIELD), 0);
        let half = side_m / 2.0;
        let mut ap_positions = BTreeMap::new();
        while ap_positions.len() < n_aps {
            let raw: u64 = rng.random();
            let mut octets = Bssid::from_u64(raw).octets();
            octets[0] &= 0xfc;
            let pos = Point::new(
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            );
            ap_positions.entry(Bssid::new(octets)).or_insert(pos);
        }
        SynthScenario {
            ap_positions,
            path_loss,
            seed,
        }
    }

    /// The default experiment field with the default radio model.
    pub fn default_field(seed: u64) -> Self {
        Self::uniform_field(
            seed,
            DEFAULT_FIELD_APS,
            DEFAULT_FIELD_SIDE_M,
            PathLossModel::default(),
        )
    }

    fn center_and_extent(&self) -> (Point, f64) {
        let (mut lo, mut hi) = (
            Point::new(f64::INFINITY, f64::INFINITY),
            Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in self.ap_positions.values() {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let center = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
        (center, (hi.x - lo.x).max(hi.y - lo.y))
    }
}

/// Static shadowing deviate field for one transmitter; marginally ~N(0, 1).
#[derive(Debug, Clone)]
struct ShadowField {
    components: Vec<(f64, f64, f64)>,
}

impl ShadowField {
    fn new(scenario_seed: u64, bssid: Bssid, length_scale_m: f64) -> Self {
        let mut rng = keyed_rng(derive_seed(scenario_seed, DOMAIN_SHADOWING), bssid.to_u64());
        let components = (0..SHADOW_COMPONENTS)
            .map(|_| {
                let wx: f64 = rng.sample(StandardNormal);
                let wy: f64 = rng.sample(StandardNormal);
                let phase = rng.random::<f64>() * TAU;
                (wx / length_scale_m, wy / length_scale_m, phase)
            })
            .collect();
        ShadowField { components }
    }

    fn value(&self, p: Point) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|&(wx, wy, phase)| (wx * p.x + wy * p.y + phase).cos())
            .sum();
        sum * (2.0 / SHADOW_COMPONENTS as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Transmitter {
    bssid: Bssid,
    position: Point,
    shadow: Option<ShadowField>,
}

/// Precomputed transmitters of a scenario, reusable across many scans.
#[derive(Debug, Clone)]
pub struct RadioEnvironment {
    model: PathLossModel,
    transmitters: Vec<Transmitter>,
}

impl RadioEnvironment {
    pub fn new(scenario: &SynthScenario) -> Result<Self, SynthError> {
        scenario.path_loss.validate()?;
        let mut env = RadioEnvironment {
            model: scenario.path_loss,
            transmitters: Vec::with_capacity(scenario.ap_positions.len()),
        };
        for (&bssid, &position) in &scenario.ap_positions {
            env.push(scenario.seed, bssid, position);
        }
        Ok(env)
    }

    fn correlated(&self) -> bool {
        self.model.shadowing_decorrelation_m > 0.0 && self.model.noise_sigma_db > 0.0
    }

    fn push(&mut self, seed: u64, bssid: Bssid, position: Point) {
        let shadow = self
            .correlated()
            .then(|| ShadowField::new(seed, bssid, self.model.shadowing_decorrelation_m));
        let idx = self.transmitters.partition_point(|t| t.bssid < bssid);
        self.transmitters.insert(
            idx,
            Transmitter {
                bssid,
                position,
                shadow,
            },
        );
    }

    /// Scans from `position`: one observation per AP whose RSSI clears the
    /// sensitivity floor and is not randomly missed. Per-scan draws come from
    /// `rng`, a fixed number per AP in BSSID order.
    pub fn scan_at<R: Rng + ?Sized>(
        &self,
        position: Point,
        device_id: &str,
        t: f64,
        ground_truth_distance_ft: Option<f64>,
        rng: &mut R,
    ) -> Scan {
        let model = &self.model;
        let mut observations = Vec::new();
        for tx in &self.transmitters {
            let d = position.distance_to(&tx.position).max(model.d0_m);
            let fresh: f64 = rng.sample(StandardNormal);
            let missed = rng.random::<f64>() < model.scan_miss_probability;
            let draw = match &tx.shadow {
                Some(field) => {
                    let q = model.temporal_variance_fraction;
                    (1.0 - q).sqrt() * field.value(position) + q.sqrt() * fresh
                }
                None => fresh,
            };
            let rssi = model
                .rssi_at(d, draw)
                .expect("clamped distance is positive")
                .clamp(RSSI_MIN_DBM, RSSI_MAX_DBM);
            if rssi >= model.sensitivity_dbm && !missed {
                observations.push(ApObservation::new(tx.bssid, rssi).expect("clamped rssi"));
            }
        }
        Scan::new(device_id, t, observations, ground_truth_distance_ft)
            .expect("synthetic scans are valid")
    }
}

/// Convenience wrapper building a [`RadioEnvironment`] for a single scan.
pub fn scan_at<R: Rng + ?Sized>(
    scenario: &SynthScenario,
    position: Point,
    device_id: &str,
    t: f64,
    rng: &mut R,
) -> Result<Scan, SynthError> {
    Ok(RadioEnvironment::new(scenario)?.scan_at(position, device_id, t, None, rng))
}

/// Replicates the distance-proxy walk: each synthetic subject gets a home AP
/// of its own, takes a reference scan next to it, then walks radially away
/// taking a scan every `step_ft` feet up to `max_distance_ft`.
///
/// Subjects share the scenario's AP field; every subject's generator is
/// derived from the scenario seed and the subject index, so the log does not
/// depend on how subjects are scheduled across threads.
pub fn gen_distance_experiment(
    scenario: &SynthScenario,
    subjects: usize,
    max_distance_ft: u32,
    step_ft: u32,
) -> Result<ScanLog, SynthError> {
    if scenario.ap_positions.is_empty() {
        return Err(SynthError::NoAccessPoints);
    }
    if subjects == 0 {
        return Err(SynthError::InvalidExperiment("subjects must be at least 1"));
    }
    if step_ft == 0 || max_distance_ft < step_ft {
        return Err(SynthError::InvalidExperiment(
            "require max_distance_ft >= step_ft >= 1",
        ));
    }
    if subjects > 1 << 24 {
        return Err(SynthError::InvalidExperiment("at most 2^24 subjects"));
    }
    let field = RadioEnvironment::new(scenario)?;
    let (center, extent) = scenario.center_and_extent();
    let half_region = extent * HOME_REGION_FRACTION;
    let subject_seed = derive_seed(scenario.seed, DOMAIN_SUBJECTS);
    let width = subjects.to_string().len();

    let per_subject: Vec<Vec<Scan>> = (0..subjects)
        .into_par_iter()
        .map(|s| {
            let mut rng: ChaCha8Rng = keyed_rng(subject_seed, s as u64);
            let home = Point::new(
                center.x + rng.random_range(-1.0..=1.0) * half_region,
                center.y + rng.random_range(-1.0..=1.0) * half_region,
            );
            let heading = rng.random::<f64>() * TAU;
            let (ux, uy) = (heading.cos(), heading.sin());
            let id = s as u32;
            let home_bssid = Bssid::new([0x02, 0, 0, (id >> 16) as u8, (id >> 8) as u8, id as u8]);
            let mut env = field.clone();
            env.push(scenario.seed, home_bssid, home);

            let device_id = format!("subject-{:0width$}", s + 1);
            let mut scans = vec![env.scan_at(home, &device_id, 0.0, Some(0.0), &mut rng)];
            for (i, d) in (step_ft..=max_distance_ft).step_by(step_ft as usize).enumerate() {
                let m = feet_to_meters(f64::from(d));
                let pos = Point::new(home.x + ux * m, home.y + uy * m);
                let t = (i + 1) as f64 * SCAN_INTERVAL_S;
                scans.push(env.scan_at(pos, &device_id, t, Some(f64::from(d)), &mut rng));
            }
            scans
        })
        .collect();

    Ok(ScanLog::new(
        format!("synthetic distance experiment (seed {})", scenario.seed),
        per_subject.into_iter().flatten().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rssi_reference_points() {
        let m = PathLossModel {
            exponent_n: 2.0,
            ..PathLossModel::noiseless()
        };
        assert_eq!(m.rssi_at(1.0, 0.0).unwrap(), -40.0);
        assert!((m.rssi_at(10.0, 0.0).unwrap() + 60.0).abs() < 1e-12);
        let m = PathLossModel::noiseless();
        // -40 - 25*log10(3)
        assert!((m.rssi_at(3.0, 0.0).unwrap() - -51.928_031_367_991_56).abs() < 1e-9);
        assert_eq!(m.rssi_at(1.0, 1.5).unwrap(), -40.0);
        let noisy = PathLossModel::default();
        assert_eq!(noisy.rssi_at(1.0, -0.5).unwrap(), -42.0);
    }

    #[test]
    fn rssi_rejects_non_positive_distance() {
        let m = PathLossModel::default();
        assert!(m.rssi_at(0.0, 0.0).is_err());
        assert!(m.rssi_at(-1.0, 0.0).is_err());
        assert!(m.rssi_at(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(PathLossModel::default().validate().is_ok());
        for bad in [
            PathLossModel { d0_m: 0.0, ..Default::default() },
            PathLossModel { exponent_n: 0.0, ..Default::default() },
            PathLossModel { noise_sigma_db: -1.0, ..Default::default() },
            PathLossModel { sensitivity_dbm: -30.0, ..Default::default() },
            PathLossModel { sensitivity_dbm: -130.0, ..Default::default() },
            PathLossModel { rssi0_dbm: f64::NAN, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    fn two_ap_scenario(path_loss: PathLossModel) -> SynthScenario {
        let mut ap_positions = BTreeMap::new();
        ap_positions.insert(Bssid::new([0, 0, 0, 0, 0, 1]), Point::new(0.0, 0.0));
        ap_positions.insert(Bssid::new([0, 0, 0, 0, 0, 2]), Point::new(1000.0, 0.0));
        SynthScenario { ap_positions, path_loss, seed: 7 }
    }

    #[test]
    fn scan_at_ap_sees_only_that_ap() {
        let sc = two_ap_scenario(PathLossModel::noiseless());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = scan_at(&sc, Point::new(0.0, 0.0), "d", 0.0, &mut rng).unwrap();
        assert_eq!(scan.len(), 1);
        assert_eq!(scan.observations()[0].rssi_dbm, -40.0);
    }

    #[test]
    fn scan_far_away_is_empty() {
        let sc = two_ap_scenario(PathLossModel::noiseless());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = scan_at(&sc, Point::new(500.0, 5000.0), "d", 0.0, &mut rng).unwrap();
        assert!(scan.is_empty());
    }

    #[test]
    fn scan_is_deterministic_for_seeded_rng() {
        for decorrelation in [0.0, 1.0] {
            let sc = two_ap_scenario(PathLossModel {
                shadowing_decorrelation_m: decorrelation,
                ..Default::default()
            });
            let a = scan_at(&sc, Point::new(3.0, 4.0), "d", 0.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            let b = scan_at(&sc, Point::new(3.0, 4.0), "d", 0.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn correlated_shadowing_is_static_in_time() {
        let sc = two_ap_scenario(PathLossModel {
            temporal_variance_fraction: 0.0,
            scan_miss_probability: 0.0,
            ..Default::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = scan_at(&sc, Point::new(3.0, 4.0), "d", 0.0, &mut rng).unwrap();
        let b = scan_at(&sc, Point::new(3.0, 4.0), "d", 10.0, &mut rng).unwrap();
        assert_eq!(a.observations(), b.observations());
    }

    #[test]
    fn shadow_field_is_roughly_standard_normal() {
        let field = ShadowField::new(3, Bssid::new([1, 2, 3, 4, 5, 6]), 1.0);
        let vals: Vec<f64> = (0..4000)
            .map(|i| field.value(Point::new((i % 63) as f64 * 7.3, (i / 63) as f64 * 7.3)))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.1, "{mean}");
        assert!((var - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn experiment_shape() {
        let sc = SynthScenario::default_field(1);
        let log = gen_distance_experiment(&sc, 6, 25, 1).unwrap();
        assert_eq!(log.len(), 6 + 6 * 25);
        let refs = log
            .scans()
            .iter()
            .filter(|s| s.ground_truth_distance_ft() == Some(0.0))
            .count();
        assert_eq!(refs, 6);

        let log = gen_distance_experiment(&sc, 1, 1, 1).unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn experiment_rejects_bad_input() {
        let mut sc = SynthScenario::default_field(1);
        assert!(gen_distance_experiment(&sc, 0, 25, 1).is_err());
        assert!(gen_distance_experiment(&sc, 1, 2, 3).is_err());
        assert!(gen_distance_experiment(&sc, 1, 2, 0).is_err());
        sc.ap_positions.clear();
        assert_eq!(
            gen_distance_experiment(&sc, 1, 2, 1).unwrap_err(),
            SynthError::NoAccessPoints
        );
    }

    #[test]
    fn feet_conversion() {
        assert_eq!(feet_to_meters(1.0), 0.3048);
        assert_eq!(feet_to_meters(25.0), 7.62);
        for ft in [0.0, 1.0, 3.5, 25.0, 1e4] {
            assert!((meters_to_feet(feet_to_meters(ft)) - ft).abs() <= 1e-12 * ft.max(1.0));
        }
    }

    #[test]
    fn scenario_json_round_trip() {
        let sc = SynthScenario::uniform_field(4, 5, 30.0, PathLossModel::default());
        let json = serde_json::to_string(&sc).unwrap();
        let back: SynthScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sc);
    }
}
