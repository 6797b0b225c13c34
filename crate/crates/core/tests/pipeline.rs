//! Fixture-driven runs through ingestion, simulation and reporting.

use std::fs;
use std::path::{Path, PathBuf};

use quaysim::config::{load_config, ScenarioConfig, ServiceMode};
use quaysim::logsheet::parse_log_sheet;
use quaysim::model::{PoolKind, VesselCall, VesselId};
use quaysim::report::{build_report, KpiReport};
use quaysim::sim::simulate;
use quaysim::time::int;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn week(config: &ScenarioConfig) -> Vec<VesselCall> {
    let text = fs::read_to_string(fixture("week_2014_03_actual.csv")).unwrap();
    parse_log_sheet(text.as_bytes(), &config.epoch).unwrap()
}

fn terminal(mode: ServiceMode) -> ScenarioConfig {
    ScenarioConfig {
        mode,
        ..load_config(&fixture("terminal.toml"), true).unwrap()
    }
}

#[test]
fn fixture_config_matches_defaults() {
    let loaded = load_config(&fixture("terminal.toml"), true).unwrap();
    assert_eq!(
        loaded,
        ScenarioConfig {
            seed: 7,
            ..ScenarioConfig::default()
        }
    );
}

#[test]
fn trace_lines_are_tab_separated_and_time_ordered() {
    let config = terminal(ServiceMode::Aggregate);
    let out = simulate(&config, &week(&config)).unwrap();
    let tsv = out.trace.to_tsv();
    let first = tsv.lines().next().unwrap();
    assert_eq!(first, "1365\tVesselArrival\tv1");
    let mut last = None;
    for line in tsv.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        let t: f64 = fields[0].parse().unwrap();
        assert!(last.is_none_or(|l| l <= t));
        last = Some(t);
    }
    assert!(tsv.trim_end().ends_with("SimEnd\t-"));
}

#[test]
fn kpi_csv_round_trips_and_rows_add_up() {
    for mode in [
        ServiceMode::Aggregate,
        ServiceMode::Detailed,
        ServiceMode::Recorded,
    ] {
        let config = terminal(mode);
        let vessels = week(&config);
        let out = simulate(&config, &vessels).unwrap();
        let report = build_report(&out, &vessels, &config).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert_eq!(report.total_moves(), 5383);
        assert_eq!(
            report.total_service_min(),
            report.rows.iter().map(|r| r.service_min).sum::<i64>()
        );
        for r in &report.rows {
            assert_eq!(r.turnaround_min, r.wait_min + r.service_min);
        }
        for u in report.utilization.values() {
            assert!(u >= &int(0) && u <= &int(1));
        }
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let back = KpiReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.service_by_vessel(), report.service_by_vessel());
        assert_eq!(back.total_wait_min(), report.total_wait_min());
    }
}

#[test]
fn aggregate_and_detailed_agree_roughly() {
    let agg_cfg = terminal(ServiceMode::Aggregate);
    let det_cfg = terminal(ServiceMode::Detailed);
    let vessels = week(&agg_cfg);
    let agg = build_report(&simulate(&agg_cfg, &vessels).unwrap(), &vessels, &agg_cfg).unwrap();
    let det = build_report(&simulate(&det_cfg, &vessels).unwrap(), &vessels, &det_cfg).unwrap();
    for (a, d) in agg.rows.iter().zip(&det.rows) {
        assert!(d.service_min >= a.service_min, "vessel {}", a.vessel_id);
        assert!(
            d.service_min <= a.service_min + 30,
            "vessel {}",
            a.vessel_id
        );
    }
    assert!(det.utilization[&PoolKind::InternalTruck] > int(0));
    assert_eq!(agg.utilization[&PoolKind::InternalTruck], int(0));
}

#[test]
fn per_move_resplit_still_completes() {
    let config = ScenarioConfig {
        resplit_per_move: true,
        ..terminal(ServiceMode::Detailed)
    };
    let vessels = week(&config);
    let out = simulate(&config, &vessels).unwrap();
    assert!(out.is_complete());
    assert_eq!(out.vessels.len(), 8);
}

#[test]
fn short_quay_forces_waiting() {
    let config = ScenarioConfig {
        quay_length_m: 300,
        ..terminal(ServiceMode::Recorded)
    };
    let vessels = week(&config);
    let out = simulate(&config, &vessels).unwrap();
    assert!(out.is_complete());
    let report = build_report(&out, &vessels, &config).unwrap();
    assert!(report.total_wait_min() > 0);
    // ship 2 arrives while ship 1 (287 m) holds the quay
    assert!(report.row(VesselId(2)).unwrap().wait_min > 0);
}

#[test]
fn horizon_cut_reports_incomplete() {
    let config = ScenarioConfig {
        horizon_min: Some(2000),
        ..terminal(ServiceMode::Aggregate)
    };
    let vessels = week(&config);
    let out = simulate(&config, &vessels).unwrap();
    assert!(!out.is_complete());
    assert!(build_report(&out, &vessels, &config).is_err());
}
