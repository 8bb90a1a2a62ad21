//! End-to-end runs on small ensembles: generate, persist, calibrate, sweep,
//! compare and report.

use shortcut_core::bench::{
    bundled, compare, sweep_delta, CompareOptions, CostAssumptions, Report, ReportFormat, ShortcutPoint,
};
use shortcut_core::engine::{known_norm_run, EtaRule};
use shortcut_core::instance::io::{load_ensemble, save_ensemble, EnsembleHeader};
use shortcut_core::instance::{EnsembleSpec, InstanceKind};
use shortcut_core::norm_search::{CalibrationMode, CalibrationReport, Calibrator};
use shortcut_core::Instance;

fn small(kind: InstanceKind, kappa: f64) -> (EnsembleSpec, Vec<Instance>) {
    let spec = EnsembleSpec::dense(kind, 12, kappa, 8, 99);
    let inst = spec.generate().unwrap();
    (spec, inst)
}

#[test]
fn persisted_ensemble_calibrates_identically() {
    let (spec, inst) = small(InstanceKind::NonHermitian, 40.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.json");
    save_ensemble(&path, &EnsembleHeader::for_spec(&spec), &inst).unwrap();
    let loaded = load_ensemble::<f64>(&path).unwrap();

    let a = Calibrator::new(&inst, CalibrationMode::KnownNorm).unwrap().calibrate(0.01).unwrap();
    let b = Calibrator::new(&loaded.instances, CalibrationMode::KnownNorm)
        .unwrap()
        .calibrate(0.01)
        .unwrap();
    assert_eq!(a.eta, b.eta);
    assert_eq!(a.mean_cost, b.mean_cost);
    assert!(a.in_band && a.mean_error <= 0.01 && a.mean_error >= 0.009);
}

#[test]
fn worst_case_eta_meets_target_on_every_instance() {
    let (_, inst) = small(InstanceKind::PositiveDefinite, 80.0);
    for i in &inst {
        let out = known_norm_run(i, 0.01, EtaRule::WorstCase).unwrap();
        assert!(out.error_l2 <= 0.01, "{}: {}", i.id, out.error_l2);
    }
}

#[test]
fn calibration_report_round_trips_through_csv() {
    let (_, inst) = small(InstanceKind::NonHermitian, 20.0);
    let mode = CalibrationMode::UnknownNorm { nodes: 16 };
    let r = Calibrator::new(&inst, mode).unwrap().calibrate(0.2).unwrap();
    let report = Report::from_calibration(&CalibrationReport::new(&inst, mode, 0.2, &r));
    let csv = report.render(ReportFormat::Csv).unwrap();
    assert_eq!(Report::from_csv(&csv).unwrap(), report);
    assert_eq!(report.rows.iter().filter(|r| r.id.is_some()).count(), 2 * inst.len());
    let eta = report.aggregate("eta").unwrap();
    assert!((eta - r.eta).abs() <= 1e-5 * r.eta);
}

#[test]
fn sweep_then_compare_against_bundled_walk() {
    let spec = EnsembleSpec::dense(InstanceKind::NonHermitian, 16, 20.0, 6, 5);
    let inst: Vec<Instance> = spec.generate().unwrap();
    let sweep = sweep_delta(
        &inst,
        &[0.4, 0.3, 0.2],
        &[0.05],
        CalibrationMode::UnknownNorm { nodes: 16 },
        CostAssumptions {
            early_halving: true,
            doubled_stage1: false,
        },
    )
    .unwrap();
    assert!(!sweep.is_partial());
    let rec = sweep.curve(0.05).unwrap().recommendation.unwrap();
    assert!(rec.total > 0.0);

    // Compare at the nominal κ; the walk table lists κ = 20.
    let points: Vec<ShortcutPoint> = sweep
        .stage1_points()
        .into_iter()
        .map(|p| ShortcutPoint { kappa: 20.0, ..p })
        .collect();
    let qw = bundled::qw(InstanceKind::NonHermitian, 32).unwrap();
    let c = compare(&points, &qw, &CompareOptions::default()).unwrap();
    assert_eq!(c.rows.len(), 3);
    let merged = Report::merge([
        Report::from_sweep(&sweep),
        Report::from_comparison(&c, InstanceKind::NonHermitian, 16),
    ]);
    let json = merged.render(ReportFormat::Json).unwrap();
    assert_eq!(Report::from_json(&json).unwrap(), merged);
}

#[test]
fn single_precision_pipeline_tracks_double() {
    let spec = EnsembleSpec::dense(InstanceKind::NonHermitian, 8, 10.0, 4, 3);
    let d: Vec<Instance> = spec.generate().unwrap();
    let s = spec.generate::<f32>().unwrap();
    for (a, b) in d.iter().zip(&s) {
        let x = known_norm_run(a, 0.05, EtaRule::WorstCase).unwrap();
        let y = known_norm_run(b, 0.05, EtaRule::WorstCase).unwrap();
        assert_eq!(x.ua_calls, y.ua_calls);
        assert!((x.p_succ - y.p_succ as f64).abs() < 1e-3);
    }
}
