mod common;

use proptest::prelude::*;
use wifi_colocation::classifier::{
    calibrate, classify, evaluate, labeled_pairs, sweep_thresholds, threshold_profile, CalibrationCurve,
    ClassifierError, CurvePoint, ThresholdProfile,
};
use wifi_colocation::features::FeatureVector;
use wifi_colocation::synth::{gen_distance_experiment, PathLossModel, SynthScenario, DEFAULT_FIELD_APS, DEFAULT_FIELD_SIDE_M};

fn fv(v: [f64; 3]) -> FeatureVector {
    FeatureVector { jaccard: v[0], pearson: v[1], das: v[2], shared_ap_count: 0, union_ap_count: 0 }
}

fn profile(v: [f64; 3]) -> ThresholdProfile {
    ThresholdProfile { k_ft: 1.0, avg_jaccard: v[0], avg_pearson: v[1], avg_das: v[2] }
}

fn triple() -> impl Strategy<Value = [f64; 3]> {
    // A coarse grid mixed with arbitrary values, so equality with the
    // boundary is exercised.
    let component = prop_oneof![(0i32..=4).prop_map(|i| f64::from(i) / 4.0), -1.0f64..=1.0];
    [component.clone(), component.clone(), component]
}

fn noiseless_log(subjects: usize, seed: u64) -> wifi_colocation::ScanLog {
    let scenario = SynthScenario::uniform_field(seed, DEFAULT_FIELD_APS, DEFAULT_FIELD_SIDE_M, PathLossModel::noiseless());
    gen_distance_experiment(&scenario, subjects, 25, 1).unwrap()
}

proptest! {
    #[test]
    fn agrees_with_reference_loop(t in triple(), b in triple()) {
        prop_assert_eq!(classify(&fv(t), &profile(b)), common::reference_classify(&[t], b)[0]);
    }

    #[test]
    fn raising_a_feature_never_retracts(t in triple(), b in triple(), i in 0usize..3, up in 0.0f64..1.0) {
        let mut raised = t;
        raised[i] += up;
        if classify(&fv(t), &profile(b)) {
            prop_assert!(classify(&fv(raised), &profile(b)));
        }
    }

    #[test]
    fn lowering_a_boundary_never_retracts(t in triple(), b in triple(), i in 0usize..3, down in 0.0f64..1.0) {
        let mut lowered = b;
        lowered[i] -= down;
        if classify(&fv(t), &profile(b)) {
            prop_assert!(classify(&fv(t), &profile(lowered)));
        }
    }

    #[test]
    fn interpolated_profile_lies_between_neighbours(
        a in triple(), b in triple(), lo in 0u32..20, gap in 1u32..5, w in 0.0f64..=1.0
    ) {
        let point = |d: u32, v: [f64; 3]| CurvePoint { distance_ft: f64::from(d), jaccard: v[0], pearson: v[1], das: v[2], scans: 1 };
        let curve = CalibrationCurve { points: vec![point(lo, a), point(lo + gap, b)], subject_count: 1 };
        let k = f64::from(lo) + w * f64::from(gap);
        let p = threshold_profile(&curve, k).unwrap();
        for (v, (x, y)) in [p.avg_jaccard, p.avg_pearson, p.avg_das].into_iter().zip(a.into_iter().zip(b)) {
            prop_assert!(v >= x.min(y) - 1e-12 && v <= x.max(y) + 1e-12);
        }
    }
}

#[test]
fn noiseless_curves_do_not_increase() {
    let curve = calibrate(&noiseless_log(20, 3)).unwrap();
    for w in curve.points.windows(2) {
        assert!(w[1].jaccard <= w[0].jaccard, "{w:?}");
        assert!(w[1].pearson <= w[0].pearson, "{w:?}");
        assert!(w[1].das <= w[0].das, "{w:?}");
    }
}

#[test]
fn noiseless_subject_features_do_not_increase() {
    let pairs = labeled_pairs(&noiseless_log(20, 4)).unwrap();
    for subject in pairs.chunk_by(|a, b| a.device_id == b.device_id) {
        for w in subject.windows(2) {
            assert!(w[1].features.jaccard <= w[0].features.jaccard, "{w:?}");
            assert!(w[1].features.das <= w[0].features.das, "{w:?}");
        }
    }
}

/// With one noiseless subject every feature falls strictly with distance, so
/// at threshold k the scans closer than k are caught, the scan at exactly k
/// is missed and nothing farther fires: F = 2(k-1)/(2k-1).
#[test]
fn single_noiseless_subject_sweep_rises_with_k() {
    let log = noiseless_log(1, 5);
    let curve = calibrate(&log).unwrap();
    let ks: Vec<f64> = (1..=25).map(f64::from).collect();
    let reports = sweep_thresholds(&log, &curve, &ks).unwrap();
    for r in &reports {
        let k = r.k_ft;
        assert!((r.f_score - 2.0 * (k - 1.0) / (2.0 * k - 1.0)).abs() < 1e-12, "{r:?}");
    }
    assert!(reports.windows(2).all(|w| w[1].f_score >= w[0].f_score));
}

#[test]
fn sweep_entry_equals_direct_evaluation() {
    let log = noiseless_log(4, 6);
    let curve = calibrate(&log).unwrap();
    let swept = sweep_thresholds(&log, &curve, &[10.0]).unwrap();
    let direct = evaluate(&log, &threshold_profile(&curve, 10.0).unwrap()).unwrap();
    assert_eq!(swept, vec![direct]);
    assert_eq!(direct.total(), 4 * 25);
}

#[test]
fn empty_log_is_rejected() {
    let empty = wifi_colocation::ScanLog::new("e", vec![]);
    assert_eq!(calibrate(&empty).unwrap_err(), ClassifierError::EmptyLog);
    let curve = CalibrationCurve { points: vec![], subject_count: 0 };
    assert!(sweep_thresholds(&empty, &curve, &[1.0]).is_err());
}
