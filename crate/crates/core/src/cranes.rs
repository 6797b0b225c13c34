//! Quay crane deployment along a shared rail.
//!
//! Cranes are indexed along the quay and cannot pass each other, so a valid
//! deployment hands out index blocks in the same order as berth positions.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::berth::BerthPlan;
use crate::model::VesselId;
use crate::time::{int, pow, ratio, Rational, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CraneError {
    #[error("no quay cranes available")]
    NoCranesAvailable,
    #[error("vessel {0} is not berthed at the checked instant")]
    UnknownVessel(VesselId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid service parameter {field}: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: &'static str,
}

/// Productivity knobs of the service models. These are the free parameters
/// that calibration fits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ServiceParams {
    pub crane_rate_moves_per_min: Rational,
    pub interference_alpha: Rational,
    pub max_cranes_per_vessel: u32,
    pub moves_per_crane_threshold: u32,
    pub truck_cycle_min: Rational,
    pub yard_crane_service_min: Rational,
}

impl Default for ServiceParams {
    fn default() -> Self {
        ServiceParams {
            crane_rate_moves_per_min: ratio(1, 2),
            interference_alpha: ratio(9, 10),
            max_cranes_per_vessel: 4,
            moves_per_crane_threshold: 500,
            truck_cycle_min: int(5),
            yard_crane_service_min: int(2),
        }
    }
}

impl ServiceParams {
    pub const FIELDS: [&'static str; 6] = [
        "crane_rate_moves_per_min",
        "interference_alpha",
        "max_cranes_per_vessel",
        "moves_per_crane_threshold",
        "truck_cycle_min",
        "yard_crane_service_min",
    ];

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |field, v: &Rational| {
            if v > &Rational::zero() {
                Ok(())
            } else {
                Err(ParamError {
                    field,
                    reason: "must be positive",
                })
            }
        };
        positive("crane_rate_moves_per_min", &self.crane_rate_moves_per_min)?;
        positive("interference_alpha", &self.interference_alpha)?;
        if self.interference_alpha > Rational::one() {
            return Err(ParamError {
                field: "interference_alpha",
                reason: "must not exceed 1",
            });
        }
        if self.max_cranes_per_vessel == 0 {
            return Err(ParamError {
                field: "max_cranes_per_vessel",
                reason: "must be positive",
            });
        }
        if self.moves_per_crane_threshold == 0 {
            return Err(ParamError {
                field: "moves_per_crane_threshold",
                reason: "must be positive",
            });
        }
        positive("truck_cycle_min", &self.truck_cycle_min)?;
        positive("yard_crane_service_min", &self.yard_crane_service_min)
    }

    /// Moves per minute achieved by each of `n_cranes` cranes working the
    /// same vessel: `rate * alpha^(n-1)`.
    pub fn per_crane_rate(&self, n_cranes: u32) -> Rational {
        &self.crane_rate_moves_per_min * pow(&self.interference_alpha, n_cranes.saturating_sub(1))
    }

    /// Combined moves per minute of `n_cranes` cranes on one vessel.
    pub fn vessel_rate(&self, n_cranes: u32) -> Rational {
        self.per_crane_rate(n_cranes) * int(i64::from(n_cranes))
    }

    /// Cranes a vessel asks for given its outstanding work.
    pub fn crane_demand(&self, remaining_moves: u64) -> u32 {
        let wanted = remaining_moves.div_ceil(u64::from(self.moves_per_crane_threshold));
        wanted.clamp(1, u64::from(self.max_cranes_per_vessel)) as u32
    }
}

/// Closed-form service time `moves / (n * rate * alpha^(n-1))`.
pub fn service_duration_aggregate(moves: u64, n_cranes: u32, params: &ServiceParams) -> Rational {
    assert!(n_cranes >= 1, "at least one crane is required");
    if moves == 0 {
        return Rational::zero();
    }
    Rational::from_integer(moves.into()) / params.vessel_rate(n_cranes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CraneAssignment {
    pub crane_index: u32,
    pub vessel_id: VesselId,
    pub from: SimTime,
    /// Exclusive end; `None` while the binding is still in force.
    pub to: Option<SimTime>,
}

impl CraneAssignment {
    pub fn active_at(&self, at: &SimTime) -> bool {
        &self.from <= at && self.to.as_ref().is_none_or(|to| at < to)
    }
}

/// A berthed vessel competing for cranes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BerthedWork {
    pub vessel_id: VesselId,
    pub position_m: u32,
    pub remaining_moves: u64,
}

/// Splits the crane pool over the berthed vessels.
///
/// Each vessel asks for `clamp(ceil(remaining / threshold), 1, max)` cranes.
/// When the asks exceed the pool they are scaled down proportionally with
/// largest-remainder rounding, after which any vessel left with none takes one
/// from the largest holder. Index blocks are then dealt contiguously in
/// position order. Vessels with no remaining work receive nothing.
pub fn plan_crane_split(
    berthed: &[BerthedWork],
    capacity: u32,
    params: &ServiceParams,
    from: &SimTime,
) -> Result<Vec<CraneAssignment>, CraneError> {
    deal_cranes(berthed, capacity, from, |w| {
        params.crane_demand(w.remaining_moves)
    })
}

/// Deals contiguous crane blocks in position order for an arbitrary per-vessel
/// demand, scaling down as [`plan_crane_split`] does.
pub fn deal_cranes(
    berthed: &[BerthedWork],
    capacity: u32,
    from: &SimTime,
    demand: impl Fn(&BerthedWork) -> u32,
) -> Result<Vec<CraneAssignment>, CraneError> {
    if capacity == 0 {
        return Err(CraneError::NoCranesAvailable);
    }
    let mut work: Vec<&BerthedWork> = berthed.iter().filter(|w| w.remaining_moves > 0).collect();
    work.sort_by_key(|w| (w.position_m, w.vessel_id));
    let asks: Vec<u32> = work.iter().map(|w| demand(w).max(1)).collect();
    let alloc = share_out(&asks, capacity);

    let mut out = Vec::new();
    let mut next = 0u32;
    for (w, n) in work.iter().zip(alloc) {
        for crane_index in next..next + n {
            out.push(CraneAssignment {
                crane_index,
                vessel_id: w.vessel_id,
                from: from.clone(),
                to: None,
            });
        }
        next += n;
    }
    Ok(out)
}

fn share_out(demand: &[u32], capacity: u32) -> Vec<u32> {
    let total: u64 = demand.iter().map(|&d| u64::from(d)).sum();
    if total <= u64::from(capacity) {
        return demand.to_vec();
    }
    let cap = u64::from(capacity);
    let mut alloc: Vec<u32> = Vec::with_capacity(demand.len());
    let mut fractions: Vec<(u64, usize)> = Vec::with_capacity(demand.len());
    for (i, &d) in demand.iter().enumerate() {
        let share = u64::from(d) * cap;
        let (q, r) = (share / total, share % total);
        alloc.push(q as u32);
        fractions.push((r, i));
    }
    let handed: u64 = alloc.iter().map(|&a| u64::from(a)).sum();
    // Largest remainder first, earlier position on ties.
    fractions.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in fractions.iter().take((cap - handed) as usize) {
        alloc[i] += 1;
    }
    while let Some(starved) = alloc.iter().position(|&a| a == 0) {
        let donor = (0..alloc.len())
            .rev()
            .max_by_key(|&i| alloc[i])
            .expect("allocation is non-empty");
        if alloc[donor] <= 1 {
            break;
        }
        alloc[donor] -= 1;
        alloc[starved] += 1;
    }
    alloc
}

/// Checks that crane index order agrees with berth position order for every
/// pair of bindings active at `at`.
pub fn check_non_crossing(
    assignments: &[CraneAssignment],
    plan: &BerthPlan,
    at: &SimTime,
) -> Result<bool, CraneError> {
    let mut active = Vec::new();
    for a in assignments.iter().filter(|a| a.active_at(at)) {
        let berth = plan
            .get(a.vessel_id)
            .filter(|b| b.active_at(at))
            .ok_or(CraneError::UnknownVessel(a.vessel_id))?;
        active.push((a.crane_index, berth.position_m));
    }
    active.sort_unstable();
    Ok(active.windows(2).all(|w| w[0].1 <= w[1].1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::berth::BerthAssignment;

    fn work(id: u32, pos: u32, moves: u64) -> BerthedWork {
        BerthedWork {
            vessel_id: VesselId(id),
            position_m: pos,
            remaining_moves: moves,
        }
    }

    fn per_vessel(assignments: &[CraneAssignment]) -> Vec<(u32, Vec<u32>)> {
        let mut out: Vec<(u32, Vec<u32>)> = Vec::new();
        for a in assignments {
            match out.iter_mut().find(|(v, _)| *v == a.vessel_id.0) {
                Some((_, c)) => c.push(a.crane_index),
                None => out.push((a.vessel_id.0, vec![a.crane_index])),
            }
        }
        out
    }

    #[test]
    fn demand_follows_threshold() {
        let p = ServiceParams::default();
        let t0 = SimTime::zero();
        let one = plan_crane_split(&[work(6, 0, 84)], 8, &p, &t0).unwrap();
        assert_eq!(one.len(), 1);
        let four = plan_crane_split(&[work(1, 0, 1610)], 8, &p, &t0).unwrap();
        assert_eq!(four.len(), 4);
    }

    #[test]
    fn blocks_follow_position_order() {
        let p = ServiceParams::default();
        let split = plan_crane_split(
            &[work(2, 400, 800), work(1, 0, 800)],
            8,
            &p,
            &SimTime::zero(),
        )
        .unwrap();
        assert_eq!(per_vessel(&split), vec![(1, vec![0, 1]), (2, vec![2, 3])]);
    }

    #[test]
    fn oversubscription_scales_by_largest_remainder() {
        assert_eq!(share_out(&[4, 4, 1], 8), vec![4, 3, 1]);
        assert_eq!(share_out(&[4, 4], 8), vec![4, 4]);
        assert_eq!(share_out(&[4, 4, 4], 8), vec![3, 3, 2]);
        assert_eq!(
            share_out(&[4, 1, 1, 1, 1, 1, 1, 1, 1], 8),
            vec![1, 1, 1, 1, 1, 1, 1, 1, 0]
        );
        assert_eq!(share_out(&[1, 1, 1], 2), vec![1, 1, 0]);
    }

    #[test]
    fn zero_capacity_is_an_error() {
        assert_eq!(
            plan_crane_split(
                &[work(1, 0, 5)],
                0,
                &ServiceParams::default(),
                &SimTime::zero()
            ),
            Err(CraneError::NoCranesAvailable)
        );
    }

    fn layout() -> BerthPlan {
        BerthPlan {
            assignments: vec![
                BerthAssignment {
                    vessel_id: VesselId(1),
                    position_m: 0,
                    length_m: 150,
                    berth_time: SimTime::zero(),
                    depart_time: None,
                },
                BerthAssignment {
                    vessel_id: VesselId(2),
                    position_m: 200,
                    length_m: 150,
                    berth_time: SimTime::zero(),
                    depart_time: None,
                },
            ],
        }
    }

    fn bind(crane: u32, vessel: u32) -> CraneAssignment {
        CraneAssignment {
            crane_index: crane,
            vessel_id: VesselId(vessel),
            from: SimTime::zero(),
            to: None,
        }
    }

    #[test]
    fn non_crossing_detects_inverted_order() {
        let plan = layout();
        let at = SimTime::from_minutes(1);
        assert!(check_non_crossing(&[bind(0, 1)], &plan, &at).unwrap());
        assert!(!check_non_crossing(&[bind(3, 2), bind(5, 1)], &plan, &at).unwrap());
        assert!(check_non_crossing(&[bind(2, 1), bind(6, 2)], &plan, &at).unwrap());
        assert_eq!(
            check_non_crossing(&[bind(0, 9)], &plan, &at),
            Err(CraneError::UnknownVessel(VesselId(9)))
        );
    }

    #[test]
    fn aggregate_duration_examples() {
        let p = ServiceParams::default();
        assert_eq!(service_duration_aggregate(120, 1, &p), int(240));
        assert_eq!(service_duration_aggregate(0, 3, &p), int(0));
        // 1610 / (4 * 1/2 * 729/1000) = 1610000 / 1458
        assert_eq!(
            service_duration_aggregate(1610, 4, &p),
            ratio(1_610_000, 1458)
        );
    }

    #[test]
    fn params_validation() {
        let mut p = ServiceParams::default();
        assert!(p.validate().is_ok());
        p.interference_alpha = ratio(11, 10);
        assert_eq!(p.validate().unwrap_err().field, "interference_alpha");
        let p = ServiceParams {
            truck_cycle_min: int(0),
            ..ServiceParams::default()
        };
        assert_eq!(p.validate().unwrap_err().field, "truck_cycle_min");
        let p = ServiceParams {
            max_cranes_per_vessel: 0,
            ..ServiceParams::default()
        };
        assert!(p.validate().is_err());
    }
}
