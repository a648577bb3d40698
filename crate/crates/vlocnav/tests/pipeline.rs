use vlocnav::formats::{decode_gallery, encode_gallery, read_log, read_world, write_log, write_world};
use vlocnav::report::{failure_table, recall_failure_scatter, summarize, summary_csv, write_report};
use vlocnav::sweep::BASELINE_METHOD;
use vlocnav::{run_sweep, Axis, FormatError, ReportError, SweepOptions, SweepResult};
use vlocnav_core::bench::{failure_rate, RecallThresholds, ScenarioConfig};
use vlocnav_core::vloc::{build_gallery, GalleryMap, GalleryParams};
use vlocnav_core::world::{generate_world, RouteShape, WorldMap, WorldSpec};

fn small() -> (WorldMap, GalleryMap) {
    let spec = WorldSpec { route: RouteShape::Town10, seed: 5, ..Default::default() };
    let world = generate_world(&spec).unwrap();
    let gallery = build_gallery(&world, &GalleryParams::default()).unwrap();
    (world, gallery)
}

fn template() -> ScenarioConfig {
    ScenarioConfig { episodes: 2, seed: 4, ..Default::default() }
}

#[test]
fn world_and_gallery_files_round_trip() {
    let (world, gallery) = small();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("world.json");
    write_world(&path, &world).unwrap();
    assert_eq!(read_world(&path).unwrap(), world);

    let bytes = encode_gallery(&gallery).unwrap();
    assert_eq!(decode_gallery(&bytes).unwrap(), gallery);

    let mut flipped = bytes.clone();
    let last = flipped.len() - 10;
    flipped[last] ^= 0x20;
    assert!(matches!(decode_gallery(&flipped), Err(FormatError::ChecksumMismatch)));
    assert!(matches!(decode_gallery(&bytes[..bytes.len() - 1]), Err(FormatError::Truncated)));
    assert!(matches!(decode_gallery(b"not a gallery at all, definitely not one!!!!!!!!!!!!!"), Err(FormatError::WrongFormat(_))));
    let mut newer = bytes;
    newer[8] = 9;
    assert!(matches!(decode_gallery(&newer), Err(FormatError::UnsupportedVersion(9))));
}

#[test]
fn sweep_is_schedule_independent_and_reports() {
    let (world, gallery) = small();
    let axis = Axis::Illumination(vec![0, 10]);
    let serial = run_sweep(&world, &gallery, &template(), &axis, &SweepOptions { jobs: 1, ..Default::default() });
    let parallel = run_sweep(&world, &gallery, &template(), &axis, &SweepOptions { jobs: 3, ..Default::default() });
    assert_eq!(serial, parallel);
    assert_eq!(serial.points.len(), 2);
    assert!(serial.points.iter().all(|p| p.episodes.len() == 2 && !p.reference.is_empty() && p.error.is_none()));
    assert_eq!(serial.baseline.as_ref().unwrap().episodes.len(), 2);

    let thresholds = RecallThresholds::default();
    let rows = summarize(&serial, &thresholds).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].method, BASELINE_METHOD);
    assert_eq!(rows[2].recall_t1, None);
    // Cells are the metric applied to the matching episode subsets.
    for (row, point) in rows.iter().zip(serial.points.iter().chain(serial.baseline.iter())) {
        assert_eq!(row.failure_rate, failure_rate(&point.episodes, serial.route_length_km));
    }
    assert_eq!(rows[0].failure_rate, 0.0);
    assert_eq!(rows[0].recall_t1, Some(1.0));
    // Total darkness: no estimates at all, so the run is pure odometry.
    assert_eq!(rows[1].recall_t3, Some(0.0));
    assert_eq!(rows[1].failure_rate, rows[2].failure_rate);
    assert_eq!(recall_failure_scatter(&rows).len(), 2);

    let csv = summary_csv(&rows).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "axis_value,method,failure_rate,recall_T1,recall_T2,recall_T3,success_rate,episodes");
    let table = failure_table(&rows).unwrap();
    assert_eq!(table.lines().count(), 3);

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("episodes.jsonl");
    write_log(&log, &serial.to_log()).unwrap();
    let back = SweepResult::from_log(read_log(&log).unwrap()).unwrap();
    assert_eq!(back, serial);
    let files = write_report(dir.path(), &back, &thresholds).unwrap();
    assert_eq!(files.len(), 10);
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(), csv);
}

#[test]
fn report_needs_the_baseline() {
    let (world, gallery) = small();
    let opts = SweepOptions { with_baseline: false, with_reference: false, jobs: 1 };
    let cfg = ScenarioConfig { episodes: 1, ..template() };
    let r = run_sweep(&world, &gallery, &cfg, &Axis::Base, &opts);
    assert!(matches!(summarize(&r, &RecallThresholds::default()), Err(ReportError::MissingBaseline)));
}

#[test]
fn failing_point_does_not_abort_the_sweep() {
    let (world, gallery) = small();
    let other = generate_world(&WorldSpec { route: RouteShape::Town10, seed: 6, ..Default::default() }).unwrap();
    let foreign = build_gallery(&other, &GalleryParams::default()).unwrap();
    let cfg = ScenarioConfig { episodes: 1, ..template() };
    let opts = SweepOptions { jobs: 1, ..Default::default() };
    // A gallery from another world is rejected for the localization units
    // while the odometry-only baseline still runs.
    let r = run_sweep(&world, &foreign, &cfg, &Axis::Illumination(vec![0, 1]), &opts);
    assert!(r.points.iter().all(|p| p.error.is_some()));
    assert!(r.baseline.as_ref().unwrap().error.is_none());
    assert!(matches!(summarize(&r, &RecallThresholds::default()), Err(ReportError::NoPoints)));
    let _ = gallery;
}
