//! Grouped-bar chart of baseline vs candidate service time per vessel, with a
//! sidecar CSV holding the plotted numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::report::{check_same_vessels, KpiReport, ReportError};

pub const PLOT_CSV_HEADER: &str = "vessel_id,teu,baseline_min,candidate_min";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotRow {
    pub vessel_id: u32,
    pub teu: u64,
    pub baseline_min: i64,
    pub candidate_min: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotArtifact {
    pub svg_path: PathBuf,
    pub csv_path: PathBuf,
    pub rows: Vec<PlotRow>,
    pub bars: usize,
}

/// Sidecar path: `chart.svg` -> `chart.csv`.
pub fn sidecar_path(svg: &Path) -> PathBuf {
    svg.with_extension("csv")
}

pub fn plot_rows(baseline: &KpiReport, candidate: &KpiReport) -> Result<Vec<PlotRow>, ReportError> {
    check_same_vessels(baseline, candidate)?;
    let cand = candidate.service_by_vessel();
    let mut rows: Vec<PlotRow> = baseline
        .rows
        .iter()
        .map(|r| PlotRow {
            vessel_id: r.vessel_id.0,
            teu: r.teu,
            baseline_min: r.service_min,
            candidate_min: cand[&r.vessel_id],
        })
        .collect();
    rows.sort_by_key(|r| r.vessel_id);
    Ok(rows)
}

pub fn plot_csv(rows: &[PlotRow]) -> String {
    let mut s = format!("{PLOT_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.vessel_id, r.teu, r.baseline_min, r.candidate_min
        );
    }
    s
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 90.0;
const BASELINE_FILL: &str = "#4e79a7";
const CANDIDATE_FILL: &str = "#f28e2b";

/// Rounds the axis maximum up to a 1-2-5 step multiple.
fn nice_ceiling(max: f64) -> (f64, f64) {
    if max <= 0.0 {
        return (1.0, 1.0);
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((max / step).ceil() * step, step)
}

pub fn render_svg(rows: &[PlotRow]) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let max = rows
        .iter()
        .map(|r| r.baseline_min.max(r.candidate_min))
        .max()
        .unwrap_or(0)
        .max(0) as f64;
    let (y_max, y_step) = nice_ceiling(max);
    let y = |v: f64| TOP + plot_h - v / y_max * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">Service time per vessel: baseline vs candidate</text>"#,
        WIDTH / 2.0
    );

    let mut tick = 0.0;
    while tick <= y_max + 1e-9 {
        let ty = y(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            ty + 4.0,
            tick as i64
        );
        tick += y_step;
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(20 {:.1}) rotate(-90)" text-anchor="middle">service time (minutes)</text>"#,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">vessel (TEU)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0
    );

    if !rows.is_empty() {
        let group_w = plot_w / rows.len() as f64;
        let bar_w = (group_w * 0.35).min(40.0);
        for (i, r) in rows.iter().enumerate() {
            let cx = LEFT + group_w * (i as f64 + 0.5);
            for (k, (value, fill, label)) in [
                (r.baseline_min, BASELINE_FILL, "baseline"),
                (r.candidate_min, CANDIDATE_FILL, "candidate"),
            ]
            .into_iter()
            .enumerate()
            {
                let x = cx - bar_w + k as f64 * bar_w;
                let top = y(value.max(0) as f64);
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{x:.1}" y="{top:.1}" width="{bar_w:.1}" height="{:.1}" fill="{fill}"><title>vessel {} {label}: {value} min</title></rect>"#,
                    TOP + plot_h - top,
                    r.vessel_id
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                TOP + plot_h + 16.0,
                r.vessel_id
            );
            let _ = writeln!(
                s,
                r##"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" fill="#555555">{} TEU</text>"##,
                TOP + plot_h + 31.0,
                r.teu
            );
        }
    }

    let lx = LEFT + plot_w - 170.0;
    for (k, (fill, label)) in [(BASELINE_FILL, "baseline"), (CANDIDATE_FILL, "candidate")]
        .into_iter()
        .enumerate()
    {
        let ly = TOP + 4.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{ly:.1}" width="12" height="12" fill="{fill}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 18.0,
            ly + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the chart to `out` and the plotted numbers next to it.
pub fn emit_plot(
    baseline: &KpiReport,
    candidate: &KpiReport,
    out: &Path,
) -> Result<PlotArtifact, ReportError> {
    let rows = plot_rows(baseline, candidate)?;
    let csv_path = sidecar_path(out);
    fs::write(out, render_svg(&rows))?;
    fs::write(&csv_path, plot_csv(&rows))?;
    Ok(PlotArtifact {
        svg_path: out.to_path_buf(),
        csv_path,
        bars: rows.len() * 2,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VesselId;
    use crate::report::KpiRow;

    fn report(rows: &[(u32, u64, i64)]) -> KpiReport {
        KpiReport {
            rows: rows
                .iter()
                .map(|&(id, teu, s)| KpiRow {
                    vessel_id: VesselId(id),
                    teu,
                    moves: 0,
                    berth_time: None,
                    service_start: None,
                    service_end: None,
                    service_min: s,
                    wait_min: 0,
                    turnaround_min: s,
                    cranes_used: 0,
                })
                .collect(),
            ..KpiReport::default()
        }
    }

    #[test]
    fn single_vessel_gives_one_row_two_bars() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fig.svg");
        let art = emit_plot(&report(&[(3, 248, 360)]), &report(&[(3, 248, 235)]), &out).unwrap();
        assert_eq!(art.rows.len(), 1);
        assert_eq!(art.bars, 2);
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
        assert!(svg.contains("service time (minutes)"));
        assert!(svg.contains("vessel (TEU)"));
        let csv = fs::read_to_string(dir.path().join("fig.csv")).unwrap();
        assert_eq!(
            csv,
            "vessel_id,teu,baseline_min,candidate_min\n3,248,360,235\n"
        );
    }

    #[test]
    fn empty_reports_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("empty.svg");
        let art = emit_plot(&KpiReport::default(), &KpiReport::default(), &out).unwrap();
        assert!(art.rows.is_empty());
        assert_eq!(
            fs::read_to_string(art.csv_path).unwrap(),
            format!("{PLOT_CSV_HEADER}\n")
        );
        let svg = fs::read_to_string(out).unwrap();
        assert_eq!(svg.matches(r#"class="bar""#).count(), 0);
    }

    #[test]
    fn rows_sorted_by_vessel() {
        let rows = plot_rows(
            &report(&[(2, 1, 10), (1, 1, 20)]),
            &report(&[(1, 1, 5), (2, 1, 6)]),
        )
        .unwrap();
        assert_eq!(
            rows.iter().map(|r| r.vessel_id).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(rows[0].candidate_min, 5);
    }

    #[test]
    fn axis_ceiling() {
        assert_eq!(nice_ceiling(2805.0), (3000.0, 1000.0));
        assert_eq!(nice_ceiling(0.0), (1.0, 1.0));
        assert_eq!(nice_ceiling(360.0), (400.0, 100.0));
    }
}
