//! Exhaustive grid search over [`ServiceParams`] against per-vessel target
//! service times.
//!
//! Every grid point is simulated independently (in parallel); the winner is
//! the point with the smallest loss, ties going to the lexicographically
//! smallest parameter tuple, so the result does not depend on evaluation
//! order.

use std::collections::BTreeMap;
use std::io::Read;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::config::{LossKind, Scalar, ScenarioConfig};
use crate::cranes::ServiceParams;
use crate::model::{VesselCall, VesselId};
use crate::report::{build_report, ReportError};
use crate::sim::{simulate, SimError};
use crate::time::{format_decimal, int, Rational};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("grid: {0}")]
    Grid(String),
    #[error("no target for vessel {0}")]
    MissingTarget(VesselId),
    #[error("target for vessel {0} must be positive")]
    NonPositiveTarget(VesselId),
    #[error("targets file: {0}")]
    Targets(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Candidate values per parameter. Each axis is sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGrid {
    pub crane_rate_moves_per_min: Vec<Rational>,
    pub interference_alpha: Vec<Rational>,
    pub max_cranes_per_vessel: Vec<u32>,
    pub moves_per_crane_threshold: Vec<u32>,
    pub truck_cycle_min: Vec<Rational>,
    pub yard_crane_service_min: Vec<Rational>,
}

fn normalize<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

/// Values `from, from + step, ...` up to and including `to`.
pub fn rational_range(from: &Rational, to: &Rational, step: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    if !step.is_positive() {
        return out;
    }
    let mut x = from.clone();
    while &x <= to {
        out.push(x.clone());
        x += step;
    }
    out
}

impl ParamGrid {
    /// A one-point grid at `base`.
    pub fn single(base: &ServiceParams) -> Self {
        ParamGrid {
            crane_rate_moves_per_min: vec![base.crane_rate_moves_per_min.clone()],
            interference_alpha: vec![base.interference_alpha.clone()],
            max_cranes_per_vessel: vec![base.max_cranes_per_vessel],
            moves_per_crane_threshold: vec![base.moves_per_crane_threshold],
            truck_cycle_min: vec![base.truck_cycle_min.clone()],
            yard_crane_service_min: vec![base.yard_crane_service_min.clone()],
        }
    }

    /// Rate 0.3 to 1.0 step 0.05, alpha 0.8 to 1.0 step 0.05, 2 to 6 cranes
    /// per vessel; the other parameters stay at `base`.
    pub fn default_sweep(base: &ServiceParams) -> Self {
        let r = |n, d| crate::time::ratio(n, d);
        ParamGrid {
            crane_rate_moves_per_min: rational_range(&r(3, 10), &int(1), &r(1, 20)),
            interference_alpha: rational_range(&r(4, 5), &int(1), &r(1, 20)),
            max_cranes_per_vessel: (2..=6).collect(),
            ..ParamGrid::single(base)
        }
    }

    pub fn len(&self) -> usize {
        self.crane_rate_moves_per_min.len()
            * self.interference_alpha.len()
            * self.max_cranes_per_vessel.len()
            * self.moves_per_crane_threshold.len()
            * self.truck_cycle_min.len()
            * self.yard_crane_service_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in lexicographic parameter order.
    pub fn points(&self) -> Vec<ServiceParams> {
        let mut out = Vec::with_capacity(self.len());
        for rate in &self.crane_rate_moves_per_min {
            for alpha in &self.interference_alpha {
                for &max in &self.max_cranes_per_vessel {
                    for &threshold in &self.moves_per_crane_threshold {
                        for truck in &self.truck_cycle_min {
                            for yard in &self.yard_crane_service_min {
                                out.push(ServiceParams {
                                    crane_rate_moves_per_min: rate.clone(),
                                    interference_alpha: alpha.clone(),
                                    max_cranes_per_vessel: max,
                                    moves_per_crane_threshold: threshold,
                                    truck_cycle_min: truck.clone(),
                                    yard_crane_service_min: yard.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Axis {
    Range {
        from: Scalar,
        to: Scalar,
        step: Scalar,
    },
    List(Vec<Scalar>),
    One(Scalar),
}

fn rational_axis(key: &str, axis: &Axis) -> Result<Vec<Rational>, CalibrationError> {
    let conv = |s: &Scalar| {
        s.as_rational(key)
            .map_err(|e| CalibrationError::Grid(e.to_string()))
    };
    Ok(normalize(match axis {
        Axis::Range { from, to, step } => rational_range(&conv(from)?, &conv(to)?, &conv(step)?),
        Axis::List(items) => items.iter().map(conv).collect::<Result<_, _>>()?,
        Axis::One(s) => vec![conv(s)?],
    }))
}

fn integer_axis(key: &str, axis: &Axis) -> Result<Vec<u32>, CalibrationError> {
    let conv = |s: &Scalar| {
        s.as_u32(key)
            .map_err(|e| CalibrationError::Grid(e.to_string()))
    };
    Ok(normalize(match axis {
        Axis::Range { from, to, step } => {
            let (from, to, step) = (conv(from)?, conv(to)?, conv(step)?);
            if step == 0 {
                Vec::new()
            } else {
                (from..=to).step_by(step as usize).collect()
            }
        }
        Axis::List(items) => items.iter().map(conv).collect::<Result<_, _>>()?,
        Axis::One(s) => vec![conv(s)?],
    }))
}

/// Parses a grid document (TOML). Each parameter is a `{ from, to, step }`
/// table, a list of values, or a single value; absent parameters are held at
/// `base`.
///
/// ```toml
/// crane_rate_moves_per_min = { from = 0.3, to = 1.0, step = 0.05 }
/// interference_alpha = { from = 0.8, to = 1.0, step = 0.05 }
/// max_cranes_per_vessel = [2, 3, 4, 5, 6]
/// ```
pub fn parse_grid(text: &str, base: &ServiceParams) -> Result<ParamGrid, CalibrationError> {
    let doc: BTreeMap<String, Axis> =
        toml::from_str(text).map_err(|e| CalibrationError::Grid(e.to_string()))?;
    let mut grid = ParamGrid::single(base);
    for (key, axis) in &doc {
        match key.as_str() {
            "crane_rate_moves_per_min" => grid.crane_rate_moves_per_min = rational_axis(key, axis)?,
            "interference_alpha" => grid.interference_alpha = rational_axis(key, axis)?,
            "max_cranes_per_vessel" => grid.max_cranes_per_vessel = integer_axis(key, axis)?,
            "moves_per_crane_threshold" => {
                grid.moves_per_crane_threshold = integer_axis(key, axis)?
            }
            "truck_cycle_min" => grid.truck_cycle_min = rational_axis(key, axis)?,
            "yard_crane_service_min" => grid.yard_crane_service_min = rational_axis(key, axis)?,
            other => {
                return Err(CalibrationError::Grid(format!(
                    "unknown parameter `{other}`"
                )))
            }
        }
    }
    Ok(grid)
}

/// Reads per-vessel targets from a CSV with a `vessel_id` (or `ship_no`)
/// column and a `service_min` (or `target_min`) column. KPI files and log
/// sheets both qualify.
pub fn read_targets<R: Read>(input: R) -> Result<BTreeMap<VesselId, i64>, CalibrationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CalibrationError::Targets(e.to_string()))?
        .clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let id_col = find(&["vessel_id", "ship_no"])
        .ok_or_else(|| CalibrationError::Targets("missing vessel_id/ship_no column".into()))?;
    let min_col = find(&["target_min", "service_min"])
        .ok_or_else(|| CalibrationError::Targets("missing service_min/target_min column".into()))?;
    let mut out = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CalibrationError::Targets(e.to_string()))?;
        let bad = |what: &str| CalibrationError::Targets(format!("row {}: bad {what}", i + 1));
        let id: u32 = rec
            .get(id_col)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad("vessel id"))?;
        let minutes: i64 = rec
            .get(min_col)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad("minutes"))?;
        out.insert(VesselId(id), minutes);
    }
    Ok(out)
}

/// Loss of simulated against target minutes.
pub fn loss(
    kind: LossKind,
    simulated: &BTreeMap<VesselId, i64>,
    targets: &BTreeMap<VesselId, i64>,
) -> Rational {
    let mut total = Rational::zero();
    for (id, target) in targets {
        let sim = simulated.get(id).copied().unwrap_or(0);
        let err = int((sim - target).abs());
        total += match kind {
            LossKind::Mape => err / int(*target),
            LossKind::TotalAbsoluteError => err,
        };
    }
    match kind {
        LossKind::Mape if !targets.is_empty() => total / int(targets.len() as i64),
        _ => total,
    }
}

fn check_targets(
    vessels: &[VesselCall],
    targets: &BTreeMap<VesselId, i64>,
) -> Result<BTreeMap<VesselId, i64>, CalibrationError> {
    let mut used = BTreeMap::new();
    for v in vessels {
        let t = *targets
            .get(&v.id)
            .ok_or(CalibrationError::MissingTarget(v.id))?;
        if t <= 0 {
            return Err(CalibrationError::NonPositiveTarget(v.id));
        }
        used.insert(v.id, t);
    }
    Ok(used)
}

/// Simulates one parameter point and scores it. `None` when the run leaves
/// work unfinished.
pub fn evaluate(
    base: &ScenarioConfig,
    params: &ServiceParams,
    vessels: &[VesselCall],
    targets: &BTreeMap<VesselId, i64>,
) -> Result<Option<Rational>, CalibrationError> {
    let targets = check_targets(vessels, targets)?;
    evaluate_checked(base, params, vessels, &targets)
}

fn evaluate_checked(
    base: &ScenarioConfig,
    params: &ServiceParams,
    vessels: &[VesselCall],
    targets: &BTreeMap<VesselId, i64>,
) -> Result<Option<Rational>, CalibrationError> {
    let config = ScenarioConfig {
        params: params.clone(),
        ..base.clone()
    };
    let outcome = simulate(&config, vessels)?;
    if !outcome.is_complete() {
        return Ok(None);
    }
    let report = build_report(&outcome, vessels, &config)?;
    Ok(Some(loss(
        config.loss,
        &report.service_by_vessel(),
        targets,
    )))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationResult {
    pub best: ServiceParams,
    pub loss: Rational,
    pub loss_kind: LossKind,
    pub evaluated: usize,
    /// Points whose run did not finish and were skipped.
    pub incomplete: usize,
}

impl CalibrationResult {
    pub fn loss_text(&self) -> String {
        match self.loss_kind {
            LossKind::Mape => format!("MAPE {}%", format_decimal(&(&self.loss * int(100)))),
            LossKind::TotalAbsoluteError => {
                format!("total absolute error {} min", format_decimal(&self.loss))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        let p = &self.best;
        format!(
            "crane_rate_moves_per_min = \"{}\"\ninterference_alpha = \"{}\"\nmax_cranes_per_vessel = {}\nmoves_per_crane_threshold = {}\ntruck_cycle_min = \"{}\"\nyard_crane_service_min = \"{}\"\n# {} over {} grid points\nloss = \"{}\"\nloss_value = \"{}\"\n",
            format_decimal(&p.crane_rate_moves_per_min),
            format_decimal(&p.interference_alpha),
            p.max_cranes_per_vessel,
            p.moves_per_crane_threshold,
            format_decimal(&p.truck_cycle_min),
            format_decimal(&p.yard_crane_service_min),
            self.loss_text(),
            self.evaluated,
            match self.loss_kind {
                LossKind::Mape => "mape",
                LossKind::TotalAbsoluteError => "total_abs",
            },
            self.loss,
        )
    }
}

pub fn calibrate(
    base: &ScenarioConfig,
    vessels: &[VesselCall],
    targets: &BTreeMap<VesselId, i64>,
    grid: &ParamGrid,
) -> Result<CalibrationResult, CalibrationError> {
    if grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    let targets = check_targets(vessels, targets)?;
    let points = grid.points();
    let scores: Vec<Option<Rational>> = points
        .par_iter()
        .map(|p| evaluate_checked(base, p, vessels, &targets))
        .collect::<Result<_, _>>()?;

    let incomplete = scores.iter().filter(|s| s.is_none()).count();
    let (best_idx, best_loss) = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|l| (i, l)))
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .ok_or(CalibrationError::EmptyGrid)?;
    Ok(CalibrationResult {
        best: points[best_idx].clone(),
        loss: best_loss.clone(),
        loss_kind: base.loss,
        evaluated: points.len(),
        incomplete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::ratio;

    #[test]
    fn ranges_are_inclusive_and_exact() {
        let r = rational_range(&ratio(3, 10), &int(1), &ratio(1, 20));
        assert_eq!(r.len(), 15);
        assert_eq!(r.last(), Some(&int(1)));
        assert!(rational_range(&int(2), &int(1), &int(1)).is_empty());
        assert!(rational_range(&int(0), &int(1), &int(0)).is_empty());
    }

    #[test]
    fn default_sweep_size() {
        let g = ParamGrid::default_sweep(&ServiceParams::default());
        assert_eq!(g.len(), 15 * 5 * 5);
    }

    #[test]
    fn grid_document() {
        let text = r#"
crane_rate_moves_per_min = { from = 0.3, to = 1.0, step = 0.05 }
interference_alpha = [1.0, 0.9, 0.9]
max_cranes_per_vessel = { from = 2, to = 6, step = 2 }
truck_cycle_min = 4
"#;
        let g = parse_grid(text, &ServiceParams::default()).unwrap();
        assert_eq!(g.crane_rate_moves_per_min.len(), 15);
        assert_eq!(g.interference_alpha, vec![ratio(9, 10), int(1)]);
        assert_eq!(g.max_cranes_per_vessel, vec![2, 4, 6]);
        assert_eq!(g.truck_cycle_min, vec![int(4)]);
        assert_eq!(g.moves_per_crane_threshold, vec![500]);
        assert!(matches!(
            parse_grid("berths = [1]", &ServiceParams::default()),
            Err(CalibrationError::Grid(_))
        ));
        let empty = parse_grid("interference_alpha = []", &ServiceParams::default()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn points_are_lexicographic() {
        let mut g = ParamGrid::single(&ServiceParams::default());
        g.crane_rate_moves_per_min = vec![ratio(1, 2), int(1)];
        g.max_cranes_per_vessel = vec![2, 3];
        let pts = g.points();
        let keys: Vec<_> = pts
            .iter()
            .map(|p| (p.crane_rate_moves_per_min.clone(), p.max_cranes_per_vessel))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn mape_and_total_error() {
        let t: BTreeMap<_, _> = [(VesselId(1), 100), (VesselId(2), 200)].into();
        let s: BTreeMap<_, _> = [(VesselId(1), 110), (VesselId(2), 150)].into();
        assert_eq!(loss(LossKind::Mape, &s, &t), ratio(7, 40));
        assert_eq!(loss(LossKind::TotalAbsoluteError, &s, &t), int(60));
        assert!(loss(LossKind::Mape, &t, &t).is_zero());
    }

    #[test]
    fn targets_from_csv() {
        let t = read_targets("vessel_id,service_min\n1,100\n2,50\n".as_bytes()).unwrap();
        assert_eq!(t[&VesselId(2)], 50);
        let t = read_targets("ship_no,length_m,service_min\n3,137,235\n".as_bytes()).unwrap();
        assert_eq!(t[&VesselId(3)], 235);
        assert!(read_targets("a,b\n1,2\n".as_bytes()).is_err());
    }
}
