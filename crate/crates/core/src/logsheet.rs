//! Planning log sheets: one CSV row per ship call.
//!
//! ```text
//! ship_no,ship_name,agent,length_m,arrival,op_start,op_end,imp_20,imp_40,exp_20,exp_40,service_min,berth_pos_m
//! ```
//!
//! Timestamps are day-first `D/M/YY H:MM AM|PM` or ISO `YYYY-MM-DD HH:MM`.
//! An empty `arrival` falls back to `op_start`.

use std::collections::HashSet;
use std::io::Read;

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::model::{ContainerGroup, ContainerSize, Flow, ModelError, VesselCall, VesselId};
use crate::time::SimTime;

pub const HEADER: [&str; 13] = [
    "ship_no",
    "ship_name",
    "agent",
    "length_m",
    "arrival",
    "op_start",
    "op_end",
    "imp_20",
    "imp_40",
    "exp_20",
    "exp_40",
    "service_min",
    "berth_pos_m",
];

const REQUIRED: [&str; 8] = [
    "ship_no", "length_m", "op_start", "op_end", "imp_20", "imp_40", "exp_20", "exp_40",
];

const ISO_FORMAT: &str = "%Y-%m-%d %H:%M";
const SHEET_FORMAT: &str = "%d/%m/%y %I:%M %p";

#[derive(Debug, Error)]
pub enum LogSheetError {
    #[error("row {row}: malformed timestamp {text:?} in `{column}`")]
    MalformedTimestamp {
        row: usize,
        column: String,
        text: String,
    },
    #[error("timestamp {text:?} lies before the epoch")]
    BeforeEpoch { text: String },
    #[error("row {row}: negative container count in `{column}`")]
    NegativeCount { row: usize, column: String },
    #[error("row {row}: op_end is not after op_start")]
    EndBeforeStart { row: usize },
    #[error("row {row}: ship_no {ship_no} already used")]
    DuplicateShipNo { row: usize, ship_no: u32 },
    #[error("row {row}: invalid `{column}`: {reason}")]
    InvalidField {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("row {row}: {source}")]
    Inconsistent { row: usize, source: ModelError },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses a log-sheet timestamp without an epoch.
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    NaiveDateTime::parse_from_str(text, ISO_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(&text.to_ascii_uppercase(), SHEET_FORMAT))
        .ok()
}

/// Whole minutes from `epoch` to `text`.
pub fn to_sim_time(text: &str, epoch: &NaiveDateTime) -> Result<SimTime, LogSheetError> {
    let at = parse_timestamp(text).ok_or_else(|| LogSheetError::MalformedTimestamp {
        row: 0,
        column: String::new(),
        text: text.to_string(),
    })?;
    let minutes = (at - *epoch).num_minutes();
    if minutes < 0 {
        return Err(LogSheetError::BeforeEpoch {
            text: text.to_string(),
        });
    }
    Ok(SimTime::from_minutes(minutes))
}

/// Inverse of [`to_sim_time`] for whole-minute instants, ISO formatted.
pub fn format_sim_time(at: &SimTime, epoch: &NaiveDateTime) -> String {
    let minutes = at
        .whole_minutes()
        .expect("log-sheet timestamps are whole minutes");
    (*epoch + chrono::Duration::minutes(minutes))
        .format(ISO_FORMAT)
        .to_string()
}

struct Row<'a> {
    line: usize,
    record: &'a csv::StringRecord,
    columns: &'a [Option<usize>; 13],
}

impl Row<'_> {
    fn field(&self, name: &str) -> Option<&str> {
        let idx = HEADER.iter().position(|h| *h == name)?;
        self.columns[idx]
            .and_then(|c| self.record.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }

    fn invalid(&self, column: &str, reason: impl Into<String>) -> LogSheetError {
        LogSheetError::InvalidField {
            row: self.line,
            column: column.to_string(),
            reason: reason.into(),
        }
    }

    fn integer(&self, name: &str) -> Result<Option<i64>, LogSheetError> {
        self.field(name)
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|_| self.invalid(name, format!("{s:?} is not an integer")))
            })
            .transpose()
    }

    fn required_integer(&self, name: &str) -> Result<i64, LogSheetError> {
        self.integer(name)?
            .ok_or_else(|| self.invalid(name, "value is required"))
    }

    fn count(&self, name: &str) -> Result<u32, LogSheetError> {
        let n = self.integer(name)?.unwrap_or(0);
        if n < 0 {
            return Err(LogSheetError::NegativeCount {
                row: self.line,
                column: name.to_string(),
            });
        }
        u32::try_from(n).map_err(|_| self.invalid(name, "count too large"))
    }

    fn time(&self, name: &str, epoch: &NaiveDateTime) -> Result<Option<SimTime>, LogSheetError> {
        let Some(text) = self.field(name) else {
            return Ok(None);
        };
        to_sim_time(text, epoch).map(Some).map_err(|e| match e {
            LogSheetError::MalformedTimestamp { text, .. } => LogSheetError::MalformedTimestamp {
                row: self.line,
                column: name.to_string(),
                text,
            },
            LogSheetError::BeforeEpoch { .. } => {
                self.invalid(name, format!("{text:?} lies before the epoch"))
            }
            other => other,
        })
    }
}

/// Parses a log sheet. Rows are numbered from 1 after the header; any bad row
/// aborts ingestion with an error naming it.
pub fn parse_log_sheet<R: Read>(
    input: R,
    epoch: &NaiveDateTime,
) -> Result<Vec<VesselCall>, LogSheetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let mut columns = [None; 13];
    for (slot, name) in columns.iter_mut().zip(HEADER) {
        *slot = headers.iter().position(|h| h == name);
    }
    for name in REQUIRED {
        let idx = HEADER
            .iter()
            .position(|h| *h == name)
            .expect("required column is in header");
        if columns[idx].is_none() {
            return Err(LogSheetError::MissingColumn(name.to_string()));
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = Row {
            line: i + 1,
            record: &record,
            columns: &columns,
        };
        out.push(parse_row(&row, epoch, &mut seen)?);
    }
    Ok(out)
}

fn parse_row(
    row: &Row<'_>,
    epoch: &NaiveDateTime,
    seen: &mut HashSet<u32>,
) -> Result<VesselCall, LogSheetError> {
    let ship_no = u32::try_from(row.required_integer("ship_no")?)
        .map_err(|_| row.invalid("ship_no", "must be a non-negative integer"))?;
    if !seen.insert(ship_no) {
        return Err(LogSheetError::DuplicateShipNo {
            row: row.line,
            ship_no,
        });
    }
    let length_m = row.required_integer("length_m")?;
    let length_m = u32::try_from(length_m)
        .ok()
        .filter(|&l| l > 0)
        .ok_or_else(|| row.invalid("length_m", "must be a positive integer"))?;
    let op_start = row
        .time("op_start", epoch)?
        .ok_or_else(|| row.invalid("op_start", "value is required"))?;
    let op_end = row
        .time("op_end", epoch)?
        .ok_or_else(|| row.invalid("op_end", "value is required"))?;
    if op_end <= op_start {
        return Err(LogSheetError::EndBeforeStart { row: row.line });
    }
    let arrival = row
        .time("arrival", epoch)?
        .unwrap_or_else(|| op_start.clone());

    let mut groups = Vec::new();
    for (column, flow, size) in [
        ("imp_20", Flow::Import, ContainerSize::Twenty),
        ("imp_40", Flow::Import, ContainerSize::Forty),
        ("exp_20", Flow::Export, ContainerSize::Twenty),
        ("exp_40", Flow::Export, ContainerSize::Forty),
    ] {
        groups.push(ContainerGroup::new(flow, size, row.count(column)?));
    }

    let berth_pos_m = row
        .integer("berth_pos_m")?
        .map(|p| u32::try_from(p).map_err(|_| row.invalid("berth_pos_m", "must be non-negative")))
        .transpose()?;

    let vessel = VesselCall {
        id: VesselId(ship_no),
        name: row.field("ship_name").unwrap_or_default().to_string(),
        agent: row.field("agent").unwrap_or_default().to_string(),
        length_m,
        arrival,
        groups,
        recorded_op_start: Some(op_start),
        recorded_op_end: Some(op_end),
        recorded_service_min: row.integer("service_min")?,
        recorded_berth_pos_m: berth_pos_m,
    };
    vessel
        .validate()
        .map_err(|source| LogSheetError::Inconsistent {
            row: row.line,
            source,
        })?;
    Ok(vessel)
}

/// Writes vessels back out as a log sheet with ISO timestamps.
pub fn write_log_sheet<W: std::io::Write>(
    vessels: &[VesselCall],
    epoch: &NaiveDateTime,
    out: W,
) -> Result<(), LogSheetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let opt_time = |t: &Option<SimTime>| {
        t.as_ref()
            .map(|t| format_sim_time(t, epoch))
            .unwrap_or_default()
    };
    for v in vessels {
        w.write_record([
            v.id.to_string(),
            v.name.clone(),
            v.agent.clone(),
            v.length_m.to_string(),
            format_sim_time(&v.arrival, epoch),
            opt_time(&v.recorded_op_start),
            opt_time(&v.recorded_op_end),
            v.count(Flow::Import, ContainerSize::Twenty).to_string(),
            v.count(Flow::Import, ContainerSize::Forty).to_string(),
            v.count(Flow::Export, ContainerSize::Twenty).to_string(),
            v.count(Flow::Export, ContainerSize::Forty).to_string(),
            v.recorded_service_min
                .map(|s| s.to_string())
                .unwrap_or_default(),
            v.recorded_berth_pos_m
                .map(|p| p.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn epoch() -> NaiveDateTime {
        ScenarioConfig::default().epoch
    }

    const HEAD: &str = "ship_no,ship_name,agent,length_m,arrival,op_start,op_end,imp_20,imp_40,exp_20,exp_40,service_min,berth_pos_m\n";

    #[test]
    fn sheet_timestamps_are_day_first() {
        let e = epoch();
        assert_eq!(
            to_sim_time("3/3/14 10:45 PM", &e).unwrap(),
            SimTime::from_minutes(1365)
        );
        assert_eq!(
            to_sim_time("5/3/14 2:00 PM", &e).unwrap(),
            SimTime::from_minutes(3720)
        );
        assert_eq!(to_sim_time("3/3/14 12:00 AM", &e).unwrap(), SimTime::zero());
        assert_eq!(
            to_sim_time("2014-03-03 00:00", &e).unwrap(),
            SimTime::zero()
        );
        assert_eq!(
            to_sim_time("10/3/14 9:00 am", &e).unwrap(),
            SimTime::from_minutes(10620)
        );
    }

    #[test]
    fn timestamp_errors() {
        let e = epoch();
        assert!(matches!(
            to_sim_time("32/3/14 1:00 PM", &e),
            Err(LogSheetError::MalformedTimestamp { .. })
        ));
        assert!(matches!(
            to_sim_time("2/3/14 1:00 PM", &e),
            Err(LogSheetError::BeforeEpoch { .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_log_sheet(HEAD.as_bytes(), &epoch())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn row_errors_name_the_row() {
        let text = format!(
            "{HEAD}1,,,287,,3/3/14 10:45 PM,5/3/14 2:00 PM,1,1,1,1,2355,\n2,,,100,,5/3/14 2:00 PM,4/3/14 2:00 PM,0,0,0,0,,\n"
        );
        let err = parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err();
        assert!(matches!(err, LogSheetError::EndBeforeStart { row: 2 }));

        let text = format!("{HEAD}1,,,287,,3/3/14 10:45 PM,5/3/14 2:00 PM,-1,0,0,0,,\n");
        assert!(matches!(
            parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err(),
            LogSheetError::NegativeCount { row: 1, .. }
        ));

        let text = format!(
            "{HEAD}4,,,287,,3/3/14 10:45 PM,5/3/14 2:00 PM,0,0,0,0,,\n4,,,287,,3/3/14 10:45 PM,5/3/14 2:00 PM,0,0,0,0,,\n"
        );
        assert!(matches!(
            parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err(),
            LogSheetError::DuplicateShipNo { row: 2, ship_no: 4 }
        ));

        let text = format!("{HEAD}1,,,287,,3/3/14 25:45 PM,5/3/14 2:00 PM,0,0,0,0,,\n");
        assert!(matches!(
            parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err(),
            LogSheetError::MalformedTimestamp { row: 1, .. }
        ));

        let text = format!("{HEAD}1,,,287,,3/3/14 10:45 PM,5/3/14 2:00 PM,0,0,0,0,2000,\n");
        assert!(matches!(
            parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err(),
            LogSheetError::Inconsistent { row: 1, .. }
        ));
    }

    #[test]
    fn arrival_column_overrides_op_start() {
        let text = format!(
            "{HEAD}7,Nile Star,Agent X,157,9/3/14 2:00 AM,9/3/14 4:00 AM,9/3/14 9:30 PM,22,88,219,231,1050,400\n"
        );
        let v = &parse_log_sheet(text.as_bytes(), &epoch()).unwrap()[0];
        assert_eq!(v.arrival, SimTime::from_minutes(8760));
        assert_eq!(v.recorded_op_start, Some(SimTime::from_minutes(8880)));
        assert_eq!(v.name, "Nile Star");
        assert_eq!(v.recorded_berth_pos_m, Some(400));
    }

    #[test]
    fn missing_required_column() {
        let text = "ship_no,length_m,op_start\n";
        assert!(matches!(
            parse_log_sheet(text.as_bytes(), &epoch()).unwrap_err(),
            LogSheetError::MissingColumn(c) if c == "op_end"
        ));
    }
}
