//! Threshold calibration, the OR-of-thresholds proximity classifier, and its
//! evaluation.
//!
//! A calibration log contains, for every subject (`device_id`), one reference
//! scan taken at distance 0 and any number of scans at known distances. Every
//! distance scan is paired with its subject's reference scan; the resulting
//! feature vectors are averaged per distance into a [`CalibrationCurve`]. The
//! curve value at a distance threshold `k` is the decision boundary used by
//! [`classify`].

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{feature_vector, FeatureVector};
use crate::scanmodel::{Scan, ScanLog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("scan log contains no scans")]
    EmptyLog,
    #[error("device {device:?} has no reference scan at distance 0")]
    MissingReference { device: String },
    #[error("device {device:?} has {count} reference scans at distance 0, expected exactly one")]
    MultipleReferences { device: String, count: usize },
    #[error("device {device:?} has no scans at a positive distance")]
    NoDistanceScans { device: String },
    #[error("scan of device {device:?} at t={timestamp_s} lacks ground_truth_distance_ft")]
    MissingDistance { device: String, timestamp_s: f64 },
    #[error("calibration curve is empty")]
    EmptyCurve,
    #[error("threshold {k_ft} ft is invalid: must be finite and at least the smallest curve distance {min_ft} ft")]
    ThresholdOutOfRange { k_ft: f64, min_ft: f64 },
    #[error("no thresholds given")]
    NoThresholds,
}

/// Mean feature values over all scans taken at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub distance_ft: f64,
    pub jaccard: f64,
    pub pearson: f64,
    pub das: f64,
    /// Number of scans averaged; 0 when the curve was loaded from CSV.
    #[serde(skip)]
    pub scans: usize,
}

/// Per-distance mean feature vectors, ascending by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub points: Vec<CurvePoint>,
    pub subject_count: usize,
}

impl CalibrationCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_at(&self, distance_ft: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.distance_ft == distance_ft)
    }

    pub fn scans_per_distance(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.points.iter().map(|p| (p.distance_ft, p.scans))
    }
}

/// The per-feature decision boundaries at distance threshold `k_ft`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub k_ft: f64,
    pub avg_jaccard: f64,
    pub avg_pearson: f64,
    pub avg_das: f64,
}

/// Confusion counts and derived metrics at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_ft: f64,
    #[serde(rename = "tp")]
    pub true_pos: usize,
    #[serde(rename = "fp")]
    pub false_pos: usize,
    #[serde(rename = "tn")]
    pub true_neg: usize,
    #[serde(rename = "fn")]
    pub false_neg: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl EvalReport {
    pub fn from_counts(k_ft: f64, tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            k_ft,
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
            precision,
            recall,
            f_score,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// A distance scan paired with its subject's reference scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub device_id: String,
    pub distance_ft: f64,
    pub features: FeatureVector,
}

/// Pairs every positive-distance scan with its subject's reference scan, in
/// log order. The reference scan itself is not paired.
pub fn labeled_pairs(log: &ScanLog) -> Result<Vec<LabeledPair>, ClassifierError> {
    if log.is_empty() {
        return Err(ClassifierError::EmptyLog);
    }
    let mut pairs = Vec::new();
    for group in log.scans().chunk_by(|a, b| a.device_id() == b.device_id()) {
        let device = group[0].device_id();
        let mut distances = Vec::with_capacity(group.len());
        for scan in group {
            let d = scan
                .ground_truth_distance_ft()
                .ok_or_else(|| ClassifierError::MissingDistance {
                    device: device.to_string(),
                    timestamp_s: scan.timestamp_s(),
                })?;
            distances.push((scan, d));
        }
        let refs: Vec<&Scan> = distances
            .iter()
            .filter(|(_, d)| *d == 0.0)
            .map(|(s, _)| *s)
            .collect();
        let reference = match refs.as_slice() {
            [] => {
                return Err(ClassifierError::MissingReference {
                    device: device.to_string(),
                })
            }
            [r] => *r,
            _ => {
                return Err(ClassifierError::MultipleReferences {
                    device: device.to_string(),
                    count: refs.len(),
                })
            }
        };
        let before = pairs.len();
        pairs.extend(distances.iter().filter(|(_, d)| *d > 0.0).map(|(scan, d)| LabeledPair {
            device_id: device.to_string(),
            distance_ft: *d,
            features: feature_vector(reference, scan),
        }));
        if pairs.len() == before {
            return Err(ClassifierError::NoDistanceScans {
                device: device.to_string(),
            });
        }
    }
    Ok(pairs)
}

pub fn calibrate(log: &ScanLog) -> Result<CalibrationCurve, ClassifierError> {
    let pairs = labeled_pairs(log)?;
    let subject_count = pairs.chunk_by(|a, b| a.device_id == b.device_id).count();
    Ok(curve_from_pairs(&pairs, subject_count))
}

fn curve_from_pairs(pairs: &[LabeledPair], subject_count: usize) -> CalibrationCurve {
    let mut order: Vec<&LabeledPair> = pairs.iter().collect();
    order.sort_by(|a, b| a.distance_ft.total_cmp(&b.distance_ft));
    let points = order
        .chunk_by(|a, b| a.distance_ft == b.distance_ft)
        .map(|group| {
            let n = group.len() as f64;
            let (j, p, d) = group.iter().fold((0.0, 0.0, 0.0), |(j, p, d), pair| {
                (
                    j + pair.features.jaccard,
                    p + pair.features.pearson,
                    d + pair.features.das,
                )
            });
            CurvePoint {
                distance_ft: group[0].distance_ft,
                jaccard: j / n,
                pearson: p / n,
                das: d / n,
                scans: group.len(),
            }
        })
        .collect();
    CalibrationCurve {
        points,
        subject_count,
    }
}

/// Curve value at `k_ft`: exact point, linear interpolation between the
/// bracketing distances, or the last point when `k_ft` lies beyond the curve.
pub fn threshold_profile(
    curve: &CalibrationCurve,
    k_ft: f64,
) -> Result<ThresholdProfile, ClassifierError> {
    let (first, last) = match (curve.points.first(), curve.points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(ClassifierError::EmptyCurve),
    };
    if !k_ft.is_finite() || k_ft < 0.0 || k_ft < first.distance_ft {
        return Err(ClassifierError::ThresholdOutOfRange {
            k_ft,
            min_ft: first.distance_ft,
        });
    }
    let profile = |j, p, d| ThresholdProfile {
        k_ft,
        avg_jaccard: j,
        avg_pearson: p,
        avg_das: d,
    };
    if k_ft >= last.distance_ft {
        return Ok(profile(last.jaccard, last.pearson, last.das));
    }
    let hi = curve.points.partition_point(|p| p.distance_ft < k_ft);
    let upper = &curve.points[hi];
    if upper.distance_ft == k_ft {
        return Ok(profile(upper.jaccard, upper.pearson, upper.das));
    }
    let lower = &curve.points[hi - 1];
    let w = (k_ft - lower.distance_ft) / (upper.distance_ft - lower.distance_ft);
    let lerp = |a: f64, b: f64| a + w * (b - a);
    Ok(profile(
        lerp(lower.jaccard, upper.jaccard),
        lerp(lower.pearson, upper.pearson),
        lerp(lower.das, upper.das),
    ))
}

/// Predicts proximity when any feature strictly exceeds its boundary.
pub fn classify(fv: &FeatureVector, profile: &ThresholdProfile) -> bool {
    fv.jaccard > profile.avg_jaccard || fv.pearson > profile.avg_pearson || fv.das > profile.avg_das
}

/// Scores pre-computed pairs; ground truth is positive iff `distance_ft <= k_ft`.
pub fn evaluate_pairs(pairs: &[LabeledPair], profile: &ThresholdProfile) -> EvalReport {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for pair in pairs {
        let predicted = classify(&pair.features, profile);
        let actual = pair.distance_ft <= profile.k_ft;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    EvalReport::from_counts(profile.k_ft, tp, fp, tn, fn_)
}

pub fn evaluate(log: &ScanLog, profile: &ThresholdProfile) -> Result<EvalReport, ClassifierError> {
    Ok(evaluate_pairs(&labeled_pairs(log)?, profile))
}

/// One report per threshold, in input order. Thresholds are evaluated in
/// parallel; every report depends only on integer counts, so results do not
/// vary with the thread count.
pub fn sweep_thresholds(
    log: &ScanLog,
    curve: &CalibrationCurve,
    ks: &[f64],
) -> Result<Vec<EvalReport>, ClassifierError> {
    if ks.is_empty() {
        return Err(ClassifierError::NoThresholds);
    }
    let pairs = labeled_pairs(log)?;
    let profiles = ks
        .iter()
        .map(|&k| threshold_profile(curve, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(profiles
        .par_iter()
        .map(|profile| evaluate_pairs(&pairs, profile))
        .collect())
}

pub const CURVE_CSV_HEADER: &str = "distance_ft,jaccard,pearson,das";
pub const REPORT_CSV_HEADER: &str = "k_ft,tp,fp,tn,fn,precision,recall,f_score";

pub fn write_curve_csv<W: Write>(curve: &CalibrationCurve, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if curve.points.is_empty() {
        w.write_record(CURVE_CSV_HEADER.split(','))?;
    }
    for p in &curve.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve written by [`write_curve_csv`]. Scan counts are not part of
/// the file and come back as 0.
pub fn read_curve_csv<R: Read>(input: R) -> csv::Result<CalibrationCurve> {
    let mut points = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<csv::Result<Vec<CurvePoint>>>()?;
    points.sort_by(|a, b| a.distance_ft.total_cmp(&b.distance_ft));
    Ok(CalibrationCurve {
        points,
        subject_count: 0,
    })
}

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(REPORT_CSV_HEADER.split(','))?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
