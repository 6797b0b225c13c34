//! Terminal entities: vessel calls, container groups, the quay and the
//! homogeneous equipment pools.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{int, Rational, SimTime};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct VesselId(pub u32);

impl fmt::Display for VesselId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flow {
    Import,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContainerSize {
    Twenty,
    Forty,
}

impl ContainerSize {
    pub fn teu(self) -> u64 {
        match self {
            ContainerSize::Twenty => 1,
            ContainerSize::Forty => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContainerGroup {
    pub flow: Flow,
    pub size: ContainerSize,
    pub count: u32,
}

impl ContainerGroup {
    pub fn new(flow: Flow, size: ContainerSize, count: u32) -> Self {
        ContainerGroup { flow, size, count }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("vessel {0}: length must be positive")]
    NonPositiveLength(VesselId),
    #[error("vessel {0}: more than one container group for {1:?}/{2:?}")]
    DuplicateGroup(VesselId, Flow, ContainerSize),
    #[error("vessel {0}: recorded operation end is not after its start")]
    EndNotAfterStart(VesselId),
    #[error(
        "vessel {vessel}: recorded service {stated} min disagrees with timestamps ({computed} min)"
    )]
    InconsistentRecord {
        vessel: VesselId,
        stated: i64,
        computed: String,
    },
    #[error("quay length must be positive")]
    NonPositiveQuay,
}

/// One ship visit as read from the planning log sheet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VesselCall {
    pub id: VesselId,
    pub name: String,
    pub agent: String,
    pub length_m: u32,
    pub arrival: SimTime,
    pub groups: Vec<ContainerGroup>,
    pub recorded_op_start: Option<SimTime>,
    pub recorded_op_end: Option<SimTime>,
    pub recorded_service_min: Option<i64>,
    pub recorded_berth_pos_m: Option<u32>,
}

impl VesselCall {
    /// A vessel with no recorded actuals.
    pub fn new(id: u32, length_m: u32, arrival: SimTime, groups: Vec<ContainerGroup>) -> Self {
        VesselCall {
            id: VesselId(id),
            name: String::new(),
            agent: String::new(),
            length_m,
            arrival,
            groups,
            recorded_op_start: None,
            recorded_op_end: None,
            recorded_service_min: None,
            recorded_berth_pos_m: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.length_m == 0 {
            return Err(ModelError::NonPositiveLength(self.id));
        }
        for (i, a) in self.groups.iter().enumerate() {
            if self.groups[..i]
                .iter()
                .any(|b| a.flow == b.flow && a.size == b.size)
            {
                return Err(ModelError::DuplicateGroup(self.id, a.flow, a.size));
            }
        }
        if let (Some(s), Some(e)) = (&self.recorded_op_start, &self.recorded_op_end) {
            if e <= s {
                return Err(ModelError::EndNotAfterStart(self.id));
            }
        }
        self.recorded_service().map(|_| ())
    }

    pub fn moves(&self, flow: Flow) -> u64 {
        self.groups
            .iter()
            .filter(|g| g.flow == flow)
            .map(|g| u64::from(g.count))
            .sum()
    }

    pub fn count(&self, flow: Flow, size: ContainerSize) -> u32 {
        self.groups
            .iter()
            .filter(|g| g.flow == flow && g.size == size)
            .map(|g| g.count)
            .sum()
    }

    /// Recorded operation span, checked against the stated minute count.
    pub fn recorded_service(&self) -> Result<Option<Rational>, ModelError> {
        let (Some(start), Some(end)) = (&self.recorded_op_start, &self.recorded_op_end) else {
            return Ok(None);
        };
        let span = end.since(start);
        if let Some(stated) = self.recorded_service_min {
            if span != int(stated) {
                return Err(ModelError::InconsistentRecord {
                    vessel: self.id,
                    stated,
                    computed: crate::time::format_decimal(&span),
                });
            }
        }
        Ok(Some(span))
    }
}

/// Every container of either size is one crane move.
pub fn total_moves(vessel: &VesselCall) -> u64 {
    vessel.groups.iter().map(|g| u64::from(g.count)).sum()
}

pub fn teu(vessel: &VesselCall) -> u64 {
    vessel
        .groups
        .iter()
        .map(|g| u64::from(g.count) * g.size.teu())
        .sum()
}

pub fn recorded_service(vessel: &VesselCall) -> Result<Option<Rational>, ModelError> {
    vessel.recorded_service()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuayLayout {
    pub length_m: u32,
}

impl QuayLayout {
    pub fn new(length_m: u32) -> Result<Self, ModelError> {
        if length_m == 0 {
            return Err(ModelError::NonPositiveQuay);
        }
        Ok(QuayLayout { length_m })
    }
}

impl Default for QuayLayout {
    fn default() -> Self {
        QuayLayout { length_m: 1040 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PoolKind {
    QuayCrane,
    YardCrane,
    InternalTruck,
}

impl PoolKind {
    pub const ALL: [PoolKind; 3] = [
        PoolKind::QuayCrane,
        PoolKind::YardCrane,
        PoolKind::InternalTruck,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PoolKind::QuayCrane => "quay_cranes",
            PoolKind::YardCrane => "yard_cranes",
            PoolKind::InternalTruck => "trucks",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("{0:?} pool exhausted")]
    Exhausted(PoolKind),
    #[error("{0:?} pool released with nothing busy")]
    NothingBusy(PoolKind),
}

/// Counting pool of identical units with a running busy-time integral.
#[derive(Debug, Clone)]
pub struct ResourcePool {
    kind: PoolKind,
    capacity: u32,
    busy: u32,
    peak: u32,
    busy_area: Rational,
    since: SimTime,
}

impl ResourcePool {
    pub fn new(kind: PoolKind, capacity: u32) -> Self {
        ResourcePool {
            kind,
            capacity,
            busy: 0,
            peak: 0,
            busy_area: Rational::zero(),
            since: SimTime::zero(),
        }
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn busy(&self) -> u32 {
        self.busy
    }

    pub fn idle(&self) -> u32 {
        self.capacity - self.busy
    }

    pub fn peak(&self) -> u32 {
        self.peak
    }

    /// Unit-minutes of busy time accumulated up to the last state change.
    pub fn busy_area(&self) -> &Rational {
        &self.busy_area
    }

    fn advance(&mut self, now: &SimTime) {
        if now > &self.since {
            self.busy_area += now.since(&self.since) * int(i64::from(self.busy));
            self.since = now.clone();
        }
    }

    pub fn try_acquire(&mut self, now: &SimTime) -> Result<(), PoolError> {
        if self.busy >= self.capacity {
            return Err(PoolError::Exhausted(self.kind));
        }
        self.advance(now);
        self.busy += 1;
        self.peak = self.peak.max(self.busy);
        Ok(())
    }

    pub fn release(&mut self, now: &SimTime) -> Result<(), PoolError> {
        if self.busy == 0 {
            return Err(PoolError::NothingBusy(self.kind));
        }
        self.advance(now);
        self.busy -= 1;
        Ok(())
    }

    /// Sets the busy count directly; used when units are held for whole spans.
    pub fn set_busy(&mut self, busy: u32, now: &SimTime) -> Result<(), PoolError> {
        if busy > self.capacity {
            return Err(PoolError::Exhausted(self.kind));
        }
        self.advance(now);
        self.busy = busy;
        self.peak = self.peak.max(self.busy);
        Ok(())
    }

    /// Closes the busy integral at `now`.
    pub fn settle(&mut self, now: &SimTime) {
        self.advance(now);
    }
}
