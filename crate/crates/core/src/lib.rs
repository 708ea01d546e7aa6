//! WiFi colocation proximity inference.
//!
//! Two devices that see similar access points at similar signal strengths are
//! probably close to each other. This crate turns pairs of WiFi scans into a
//! (Jaccard, Pearson, Das proximity) feature triple, calibrates per-distance
//! decision boundaries from a walk-away experiment, classifies proximity with
//! an OR of threshold tests and evaluates the result. It also simulates the
//! hotspot duty cycle used when no access points are around, generates
//! synthetic scan data with known ground truth, and estimates how much
//! entropy a MAC-address colocation record really carries.
//!
//! | module | contents |
//! |---|---|
//! | [`scanmodel`] | scans, BSSIDs, the JSONL scan-log format |
//! | [`features`] | pairwise scan features |
//! | [`classifier`] | calibration curves, threshold profiles, evaluation sweeps |
//! | [`dutycycle`] | hotspot/scanner rotation simulator |
//! | [`synth`] | log-distance path-loss scenarios and the distance experiment |
//! | [`privacy`] | entropy and brute-force cost |
//! | [`cli`] | the `wifi-coloc` command line |

pub mod classifier;
pub mod cli;
pub mod dutycycle;
pub mod features;
pub mod privacy;
pub mod scanmodel;
mod seeding;
pub mod synth;

pub use classifier::{
    calibrate, classify, evaluate, sweep_thresholds, threshold_profile, CalibrationCurve,
    EvalReport, ThresholdProfile,
};
pub use features::{das_proximity, feature_vector, jaccard, pearson, FeatureVector};
pub use scanmodel::{parse_scan_log, write_scan_log, ApObservation, Bssid, Scan, ScanLog};
