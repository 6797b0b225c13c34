//! First-come-first-serve berthing on a continuous quay and validation of
//! space-time berth plans.
//!
//! Every assignment occupies the half-open rectangle
//! `[position, position + length) x [berth_time, depart_time)`. An assignment
//! that has not departed yet extends indefinitely.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::model::{QuayLayout, VesselCall, VesselId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BerthError {
    #[error("vessel {vessel} ({length_m} m) is longer than the {quay_m} m quay")]
    VesselLongerThanQuay {
        vessel: VesselId,
        length_m: u32,
        quay_m: u32,
    },
    #[error("vessel {0} is not berthed")]
    NotBerthed(VesselId),
    #[error("vessel {0} has not arrived yet")]
    NotArrived(VesselId),
    #[error("vessel {0} is already queued or berthed")]
    AlreadyKnown(VesselId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BerthAssignment {
    pub vessel_id: VesselId,
    pub position_m: u32,
    pub length_m: u32,
    pub berth_time: SimTime,
    pub depart_time: Option<SimTime>,
}

impl BerthAssignment {
    pub fn end_m(&self) -> u32 {
        self.position_m + self.length_m
    }

    pub fn is_open(&self) -> bool {
        self.depart_time.is_none()
    }

    /// True when the vessel occupies the quay at `at`.
    pub fn active_at(&self, at: &SimTime) -> bool {
        &self.berth_time <= at && self.depart_time.as_ref().is_none_or(|d| at < d)
    }

    fn space_overlaps(&self, other: &BerthAssignment) -> bool {
        self.position_m < other.end_m() && other.position_m < self.end_m()
    }

    /// Intersection of the two time intervals, `None` for an open end.
    fn time_overlap(&self, other: &BerthAssignment) -> Option<(SimTime, Option<SimTime>)> {
        let start = (&self.berth_time).max(&other.berth_time).clone();
        let end = match (&self.depart_time, &other.depart_time) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        match &end {
            Some(e) if e <= &start => None,
            _ => Some((start, end)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BerthPlan {
    pub assignments: Vec<BerthAssignment>,
}

impl BerthPlan {
    pub fn get(&self, vessel: VesselId) -> Option<&BerthAssignment> {
        self.assignments.iter().find(|a| a.vessel_id == vessel)
    }

    pub fn active_at<'a>(&'a self, at: &'a SimTime) -> impl Iterator<Item = &'a BerthAssignment> {
        self.assignments.iter().filter(move |a| a.active_at(at))
    }

    /// Order in which vessels were berthed (by berth time, then plan order).
    pub fn berthing_order(&self) -> Vec<VesselId> {
        let mut ordered: Vec<(usize, &BerthAssignment)> =
            self.assignments.iter().enumerate().collect();
        ordered.sort_by(|(i, a), (j, b)| a.berth_time.cmp(&b.berth_time).then(i.cmp(j)));
        ordered.into_iter().map(|(_, a)| a.vessel_id).collect()
    }

    /// Largest total berthed length over all instants.
    pub fn peak_occupancy_m(&self) -> u32 {
        self.assignments
            .iter()
            .map(|probe| {
                self.active_at(&probe.berth_time)
                    .map(|a| a.length_m)
                    .sum::<u32>()
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    OutOfBounds {
        vessel: VesselId,
        position_m: u32,
        end_m: u32,
    },
    Overlap {
        vessel_a: VesselId,
        vessel_b: VesselId,
        start: SimTime,
        end: Option<SimTime>,
    },
}

impl Violation {
    /// `vessel_a,vessel_b,overlap_start_min,overlap_end_min`; boundary
    /// violations use `quay` as the second party.
    pub fn csv_row(&self) -> String {
        match self {
            Violation::OutOfBounds {
                vessel,
                position_m,
                end_m,
            } => format!("{vessel},quay,{position_m},{end_m}"),
            Violation::Overlap {
                vessel_a,
                vessel_b,
                start,
                end,
            } => format!(
                "{vessel_a},{vessel_b},{start},{}",
                end.as_ref().map(|e| e.to_string()).unwrap_or_default()
            ),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_row())
    }
}

pub const VIOLATION_CSV_HEADER: &str = "vessel_a,vessel_b,overlap_start_min,overlap_end_min";

pub fn validate_plan(plan: &BerthPlan, quay: &QuayLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    for a in &plan.assignments {
        if a.end_m() > quay.length_m {
            out.push(Violation::OutOfBounds {
                vessel: a.vessel_id,
                position_m: a.position_m,
                end_m: a.end_m(),
            });
        }
    }
    for (i, a) in plan.assignments.iter().enumerate() {
        for b in &plan.assignments[i + 1..] {
            if !a.space_overlaps(b) {
                continue;
            }
            if let Some((start, end)) = a.time_overlap(b) {
                out.push(Violation::Overlap {
                    vessel_a: a.vessel_id.min(b.vessel_id),
                    vessel_b: a.vessel_id.max(b.vessel_id),
                    start,
                    end,
                });
            }
        }
    }
    out
}

/// Lowest position where `length_m` fits between the occupied intervals.
fn first_fit(occupied: &mut [(u32, u32)], length_m: u32, quay_m: u32) -> Option<u32> {
    occupied.sort_unstable();
    let mut cursor = 0u32;
    for &(start, end) in occupied.iter() {
        if start >= cursor && start - cursor >= length_m {
            return Some(cursor);
        }
        cursor = cursor.max(end);
    }
    (quay_m >= cursor && quay_m - cursor >= length_m).then_some(cursor)
}

#[derive(Debug, Clone)]
struct Waiting {
    vessel: VesselId,
    arrival: SimTime,
    length_m: u32,
}

/// FCFS queue plus the evolving berth plan for one simulation run.
#[derive(Debug, Clone)]
pub struct BerthAllocator {
    quay: QuayLayout,
    allow_overtake: bool,
    queue: VecDeque<Waiting>,
    plan: BerthPlan,
}

impl BerthAllocator {
    pub fn new(quay: QuayLayout, allow_overtake: bool) -> Self {
        BerthAllocator {
            quay,
            allow_overtake,
            queue: VecDeque::new(),
            plan: BerthPlan::default(),
        }
    }

    pub fn quay(&self) -> &QuayLayout {
        &self.quay
    }

    pub fn plan(&self) -> &BerthPlan {
        &self.plan
    }

    pub fn into_plan(self) -> BerthPlan {
        self.plan
    }

    pub fn waiting(&self) -> impl Iterator<Item = VesselId> + '_ {
        self.queue.iter().map(|w| w.vessel)
    }

    /// Adds an arrived vessel to the queue, keeping it ordered by
    /// `(arrival, id)`.
    pub fn enqueue(&mut self, vessel: &VesselCall, now: &SimTime) -> Result<(), BerthError> {
        if vessel.length_m > self.quay.length_m {
            return Err(BerthError::VesselLongerThanQuay {
                vessel: vessel.id,
                length_m: vessel.length_m,
                quay_m: self.quay.length_m,
            });
        }
        if &vessel.arrival > now {
            return Err(BerthError::NotArrived(vessel.id));
        }
        if self.queue.iter().any(|w| w.vessel == vessel.id) || self.plan.get(vessel.id).is_some() {
            return Err(BerthError::AlreadyKnown(vessel.id));
        }
        let entry = Waiting {
            vessel: vessel.id,
            arrival: vessel.arrival.clone(),
            length_m: vessel.length_m,
        };
        let idx = self
            .queue
            .iter()
            .position(|w| (&w.arrival, w.vessel) > (&entry.arrival, entry.vessel))
            .unwrap_or(self.queue.len());
        self.queue.insert(idx, entry);
        Ok(())
    }

    fn free_position(&self, length_m: u32, now: &SimTime) -> Option<u32> {
        let mut occupied: Vec<(u32, u32)> = self
            .plan
            .active_at(now)
            .map(|a| (a.position_m, a.end_m()))
            .collect();
        first_fit(&mut occupied, length_m, self.quay.length_m)
    }

    /// Berths `vessel` at `now` if FCFS allows it and quay space exists.
    /// Returns `None` when the vessel has to keep waiting.
    pub fn request_berth(
        &mut self,
        vessel: VesselId,
        now: &SimTime,
    ) -> Result<Option<BerthAssignment>, BerthError> {
        let idx = self
            .queue
            .iter()
            .position(|w| w.vessel == vessel)
            .ok_or(BerthError::NotArrived(vessel))?;
        if idx != 0 && !self.allow_overtake {
            return Ok(None);
        }
        let Some(position_m) = self.free_position(self.queue[idx].length_m, now) else {
            return Ok(None);
        };
        let waiting = self.queue.remove(idx).expect("index is in range");
        let assignment = BerthAssignment {
            vessel_id: waiting.vessel,
            position_m,
            length_m: waiting.length_m,
            berth_time: now.clone(),
            depart_time: None,
        };
        self.plan.assignments.push(assignment.clone());
        Ok(Some(assignment))
    }

    /// Berths every queued vessel that may go now, in queue order. Under strict
    /// FCFS this stops at the first vessel that does not fit.
    pub fn admit_waiting(&mut self, now: &SimTime) -> Vec<BerthAssignment> {
        let mut admitted = Vec::new();
        let mut i = 0;
        while i < self.queue.len() {
            let vessel = self.queue[i].vessel;
            let granted = if self.allow_overtake || i == 0 {
                self.request_berth(vessel, now).expect("vessel is queued")
            } else {
                None
            };
            match granted {
                Some(a) => admitted.push(a),
                None if self.allow_overtake => i += 1,
                None => break,
            }
        }
        admitted
    }

    /// Closes the vessel's assignment at `now`, freeing its quay interval.
    pub fn release_berth(
        &mut self,
        vessel: VesselId,
        now: &SimTime,
    ) -> Result<BerthAssignment, BerthError> {
        let a = self
            .plan
            .assignments
            .iter_mut()
            .find(|a| a.vessel_id == vessel && a.is_open())
            .ok_or(BerthError::NotBerthed(vessel))?;
        a.depart_time = Some(now.clone());
        Ok(a.clone())
    }
}

/// Builds a plan from recorded operation windows. Recorded positions are used
/// as given; missing ones are filled first-fit in start order, falling back to
/// position 0 when nothing fits so the clash shows up in [`validate_plan`].
pub fn plan_from_records(vessels: &[VesselCall], quay: &QuayLayout) -> BerthPlan {
    let mut ordered: Vec<&VesselCall> = vessels
        .iter()
        .filter(|v| v.recorded_op_start.is_some())
        .collect();
    ordered.sort_by(|a, b| {
        (a.recorded_op_start.as_ref(), a.id).cmp(&(b.recorded_op_start.as_ref(), b.id))
    });
    let mut plan = BerthPlan::default();
    for v in ordered {
        let start = v.recorded_op_start.clone().expect("filtered on start");
        let end = v.recorded_op_end.clone();
        let position_m = v.recorded_berth_pos_m.unwrap_or_else(|| {
            let probe = BerthAssignment {
                vessel_id: v.id,
                position_m: 0,
                length_m: v.length_m,
                berth_time: start.clone(),
                depart_time: end.clone(),
            };
            let mut occupied: Vec<(u32, u32)> = plan
                .assignments
                .iter()
                .filter(|a| a.time_overlap(&probe).is_some())
                .map(|a| (a.position_m, a.end_m()))
                .collect();
            first_fit(&mut occupied, v.length_m, quay.length_m).unwrap_or(0)
        });
        plan.assignments.push(BerthAssignment {
            vessel_id: v.id,
            position_m,
            length_m: v.length_m,
            berth_time: start,
            depart_time: end,
        });
    }
    plan
}
