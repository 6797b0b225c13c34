//! Per-vessel KPIs, the KPI CSV format and baseline/candidate comparison.
//!
//! Minute KPIs are integers (each span rounded half-up once) and totals are
//! plain integer sums, so fixture totals come out exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_traits::Zero;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::model::{teu, total_moves, PoolKind, VesselCall, VesselId};
use crate::sim::SimOutcome;
use crate::time::{format_decimal, int, round_half_up, Rational, SimTime};

pub const KPI_HEADER: [&str; 7] = [
    "vessel_id",
    "teu",
    "moves",
    "wait_min",
    "service_min",
    "turnaround_min",
    "cranes_used",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("trace is incomplete: vessels {0:?} never finished service")]
    IncompleteTrace(Vec<VesselId>),
    #[error("vessel sets differ: only in baseline {only_baseline:?}, only in candidate {only_candidate:?}")]
    VesselSetMismatch {
        only_baseline: Vec<VesselId>,
        only_candidate: Vec<VesselId>,
    },
    #[error("KPI file row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("KPI file: missing column `{0}`")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpiRow {
    pub vessel_id: VesselId,
    pub teu: u64,
    pub moves: u64,
    pub berth_time: Option<SimTime>,
    pub service_start: Option<SimTime>,
    pub service_end: Option<SimTime>,
    pub service_min: i64,
    pub wait_min: i64,
    pub turnaround_min: i64,
    pub cranes_used: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KpiReport {
    /// Sorted by vessel id.
    pub rows: Vec<KpiRow>,
    /// Busy time over `capacity * makespan`; empty for reports read from CSV.
    pub utilization: BTreeMap<PoolKind, Rational>,
    pub makespan_min: Option<Rational>,
}

impl KpiReport {
    pub fn total_service_min(&self) -> i64 {
        self.rows.iter().map(|r| r.service_min).sum()
    }

    pub fn total_teu(&self) -> u64 {
        self.rows.iter().map(|r| r.teu).sum()
    }

    pub fn total_moves(&self) -> u64 {
        self.rows.iter().map(|r| r.moves).sum()
    }

    pub fn total_wait_min(&self) -> i64 {
        self.rows.iter().map(|r| r.wait_min).sum()
    }

    pub fn row(&self, vessel: VesselId) -> Option<&KpiRow> {
        self.rows.iter().find(|r| r.vessel_id == vessel)
    }

    pub fn service_by_vessel(&self) -> BTreeMap<VesselId, i64> {
        self.rows
            .iter()
            .map(|r| (r.vessel_id, r.service_min))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(KPI_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.vessel_id.to_string(),
                r.teu.to_string(),
                r.moves.to_string(),
                r.wait_min.to_string(),
                r.service_min.to_string(),
                r.turnaround_min.to_string(),
                r.cranes_used.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<KpiReport, ReportError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ReportError::MissingColumn(name.to_string()))
        };
        let idx: Vec<usize> = KPI_HEADER
            .iter()
            .map(|h| col(h))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let num = |k: usize| -> Result<i64, ReportError> {
                let text = rec.get(idx[k]).unwrap_or_default();
                text.parse().map_err(|_| ReportError::BadRow {
                    row,
                    reason: format!("`{}` is not an integer: {text:?}", KPI_HEADER[k]),
                })
            };
            let nonneg = |k: usize| -> Result<u64, ReportError> {
                u64::try_from(num(k)?).map_err(|_| ReportError::BadRow {
                    row,
                    reason: format!("`{}` must be non-negative", KPI_HEADER[k]),
                })
            };
            rows.push(KpiRow {
                vessel_id: VesselId(nonneg(0)? as u32),
                teu: nonneg(1)?,
                moves: nonneg(2)?,
                wait_min: num(3)?,
                service_min: num(4)?,
                turnaround_min: num(5)?,
                cranes_used: nonneg(6)? as u32,
                berth_time: None,
                service_start: None,
                service_end: None,
            });
        }
        rows.sort_by_key(|r| r.vessel_id);
        Ok(KpiReport {
            rows,
            ..KpiReport::default()
        })
    }

    /// Human-readable summary block.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "vessels: {}\ntotal service: {} min\ntotal wait: {} min\ntotal moves: {}\ntotal TEU: {}\n",
            self.rows.len(),
            self.total_service_min(),
            self.total_wait_min(),
            self.total_moves(),
            self.total_teu()
        );
        if let Some(m) = &self.makespan_min {
            s.push_str(&format!("makespan: {} min\n", format_decimal(m)));
        }
        for (kind, u) in &self.utilization {
            s.push_str(&format!(
                "utilization {}: {}%\n",
                kind.label(),
                format_decimal(&(u * int(100)))
            ));
        }
        s
    }
}

/// Builds the KPI report for a finished run.
pub fn build_report(
    outcome: &SimOutcome,
    vessels: &[VesselCall],
    _config: &ScenarioConfig,
) -> Result<KpiReport, ReportError> {
    let unfinished: Vec<VesselId> = vessels
        .iter()
        .filter(|v| {
            outcome
                .vessels
                .get(&v.id)
                .is_none_or(|r| r.service_end.is_none() || r.berth_time.is_none())
        })
        .map(|v| v.id)
        .collect();
    if !unfinished.is_empty() {
        return Err(ReportError::IncompleteTrace(unfinished));
    }

    let mut rows: Vec<KpiRow> = vessels
        .iter()
        .map(|v| {
            let rec = &outcome.vessels[&v.id];
            let berth = rec.berth_time.clone().expect("checked above");
            let end = rec.service_end.clone().expect("checked above");
            let service_min = round_half_up(&end.since(&berth));
            let wait_min = round_half_up(&berth.since(&v.arrival));
            KpiRow {
                vessel_id: v.id,
                teu: teu(v),
                moves: total_moves(v),
                service_start: Some(berth.clone()),
                berth_time: Some(berth),
                service_end: Some(end),
                service_min,
                wait_min,
                turnaround_min: wait_min + service_min,
                cranes_used: rec.cranes_used,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.vessel_id);

    let first_arrival = vessels.iter().map(|v| &v.arrival).min();
    let last_end = rows.iter().filter_map(|r| r.service_end.as_ref()).max();
    let makespan = match (first_arrival, last_end) {
        (Some(a), Some(e)) => e.since(a),
        _ => Rational::zero(),
    };
    let mut utilization = BTreeMap::new();
    for pool in &outcome.pools {
        let denom = &makespan * int(i64::from(pool.capacity));
        let u = if denom.is_zero() {
            Rational::zero()
        } else {
            &pool.busy_area / denom
        };
        utilization.insert(pool.kind, u);
    }
    Ok(KpiReport {
        rows,
        utilization,
        makespan_min: Some(makespan),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VesselDelta {
    pub vessel_id: VesselId,
    pub baseline_min: i64,
    pub candidate_min: i64,
    /// `candidate - baseline`; negative means the candidate is faster.
    pub delta_min: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonResult {
    pub baseline_total_min: i64,
    pub candidate_total_min: i64,
    /// `1 - candidate / baseline`; zero when the baseline total is zero.
    pub reduction_fraction: Rational,
    pub deltas: Vec<VesselDelta>,
}

impl ComparisonResult {
    /// Reduction as a percentage rounded half-up to one decimal, e.g. `51.2%`.
    pub fn percent_text(&self) -> String {
        let tenths = round_half_up(&(&self.reduction_fraction * int(1000)));
        let sign = if tenths < 0 { "-" } else { "" };
        let abs = tenths.unsigned_abs();
        format!("{sign}{}.{}%", abs / 10, abs % 10)
    }

    pub fn render(&self) -> String {
        format!("reduction: {}", self.percent_text())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vessel_id", "baseline_min", "candidate_min", "delta_min"])?;
        for d in &self.deltas {
            w.write_record([
                d.vessel_id.to_string(),
                d.baseline_min.to_string(),
                d.candidate_min.to_string(),
                d.delta_min.to_string(),
            ])?;
        }
        w.write_record([
            "total".to_string(),
            self.baseline_total_min.to_string(),
            self.candidate_total_min.to_string(),
            (self.candidate_total_min - self.baseline_total_min).to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn check_same_vessels(
    baseline: &KpiReport,
    candidate: &KpiReport,
) -> Result<(), ReportError> {
    let b: Vec<VesselId> = baseline.rows.iter().map(|r| r.vessel_id).collect();
    let c: Vec<VesselId> = candidate.rows.iter().map(|r| r.vessel_id).collect();
    let only_baseline: Vec<VesselId> = b.iter().filter(|v| !c.contains(v)).copied().collect();
    let only_candidate: Vec<VesselId> = c.iter().filter(|v| !b.contains(v)).copied().collect();
    if only_baseline.is_empty() && only_candidate.is_empty() {
        Ok(())
    } else {
        Err(ReportError::VesselSetMismatch {
            only_baseline,
            only_candidate,
        })
    }
}

pub fn compare(
    baseline: &KpiReport,
    candidate: &KpiReport,
) -> Result<ComparisonResult, ReportError> {
    check_same_vessels(baseline, candidate)?;
    let cand = candidate.service_by_vessel();
    let deltas = baseline
        .rows
        .iter()
        .map(|r| {
            let c = cand[&r.vessel_id];
            VesselDelta {
                vessel_id: r.vessel_id,
                baseline_min: r.service_min,
                candidate_min: c,
                delta_min: c - r.service_min,
            }
        })
        .collect();
    let baseline_total_min = baseline.total_service_min();
    let candidate_total_min = candidate.total_service_min();
    let reduction_fraction = if baseline_total_min == 0 {
        Rational::zero()
    } else {
        int(1) - int(candidate_total_min) / int(baseline_total_min)
    };
    Ok(ComparisonResult {
        baseline_total_min,
        candidate_total_min,
        reduction_fraction,
        deltas,
    })
}
