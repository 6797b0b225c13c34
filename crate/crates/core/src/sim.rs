//! Terminal simulation: vessel arrivals, FCFS berthing, crane deployment and
//! one of three service models.
//!
//! - `Recorded` replays each vessel's logged operation span.
//! - `Aggregate` drains each vessel's moves at the closed-form crane rate and
//!   re-plans the crane split whenever a vessel berths or departs.
//! - `Detailed` runs every container through quay crane, truck and yard crane
//!   stages (see [`crate::detailed`]).

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::berth::{BerthAllocator, BerthError, BerthPlan};
use crate::config::{ScenarioConfig, ServiceMode};
use crate::cranes::{
    deal_cranes, plan_crane_split, BerthedWork, CraneAssignment, CraneError, ServiceParams,
};
use crate::detailed::DetailedState;
use crate::kernel::{
    self, Event, EventCalendar, EventHandler, EventKind, EventTrace, KernelError, Payload,
    RunStatus,
};
use crate::model::{
    total_moves, ModelError, PoolError, PoolKind, QuayLayout, ResourcePool, VesselCall, VesselId,
};
use crate::time::{Rational, SimTime};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Berth(#[from] BerthError),
    #[error(transparent)]
    Crane(#[from] CraneError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("vessel {0} has no recorded operation span to replay")]
    MissingRecord(VesselId),
    #[error("duplicate vessel id {0}")]
    DuplicateVessel(VesselId),
    #[error("event {kind} at {at} refers to unknown vessel")]
    UnknownVessel { kind: EventKind, at: SimTime },
}

/// Per-vessel timeline collected during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VesselRecord {
    pub vessel_id: VesselId,
    pub arrival: SimTime,
    pub berth_time: Option<SimTime>,
    pub service_end: Option<SimTime>,
    pub departure: Option<SimTime>,
    pub position_m: Option<u32>,
    /// Most cranes bound to the vessel at any one time.
    pub cranes_used: u32,
}

/// Pool busy counts right after an event was handled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancySample {
    pub time: SimTime,
    pub quay_cranes: u32,
    pub yard_cranes: u32,
    pub trucks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolUsage {
    pub kind: PoolKind,
    pub capacity: u32,
    pub busy_area: Rational,
    pub peak: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimStatus {
    Completed,
    /// Work was left over, either because the horizon cut the run short or
    /// because nothing could make progress (e.g. an empty truck pool).
    PendingWork {
        unfinished: Vec<VesselId>,
        pending_events: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub mode: ServiceMode,
    pub trace: EventTrace,
    pub status: SimStatus,
    pub plan: BerthPlan,
    pub crane_log: Vec<CraneAssignment>,
    pub vessels: BTreeMap<VesselId, VesselRecord>,
    pub pools: Vec<PoolUsage>,
    pub samples: Vec<OccupancySample>,
    pub scheduled: u64,
    pub pending: usize,
}

impl SimOutcome {
    pub fn is_complete(&self) -> bool {
        self.status == SimStatus::Completed
    }

    pub fn pool(&self, kind: PoolKind) -> Option<&PoolUsage> {
        self.pools.iter().find(|p| p.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolCapacities {
    pub quay_cranes: u32,
    pub yard_cranes: u32,
    pub trucks: u32,
}

impl PoolCapacities {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        PoolCapacities {
            quay_cranes: config.quay_cranes,
            yard_cranes: config.yard_cranes,
            trucks: config.trucks,
        }
    }
}

#[derive(Debug, Clone)]
struct AggregateWork {
    remaining: Rational,
    cranes: u32,
    since: SimTime,
    revision: u64,
}

pub(crate) struct Terminal<'a> {
    pub(crate) mode: ServiceMode,
    pub(crate) params: ServiceParams,
    pub(crate) resplit_per_move: bool,
    fixed_cranes: Option<u32>,
    pub(crate) vessels: BTreeMap<VesselId, &'a VesselCall>,
    berth: BerthAllocator,
    pub(crate) records: BTreeMap<VesselId, VesselRecord>,
    pub(crate) qc: ResourcePool,
    pub(crate) yc: ResourcePool,
    pub(crate) trucks: ResourcePool,
    crane_log: Vec<CraneAssignment>,
    aggregate: BTreeMap<VesselId, AggregateWork>,
    pub(crate) detailed: DetailedState,
    pub(crate) rng: Option<ChaCha8Rng>,
    samples: Vec<OccupancySample>,
    departed: usize,
}

impl<'a> Terminal<'a> {
    fn new(
        mode: ServiceMode,
        params: ServiceParams,
        quay: QuayLayout,
        pools: PoolCapacities,
        vessels: &'a [VesselCall],
    ) -> Result<Self, SimError> {
        let mut by_id = BTreeMap::new();
        let mut records = BTreeMap::new();
        for v in vessels {
            if by_id.insert(v.id, v).is_some() {
                return Err(SimError::DuplicateVessel(v.id));
            }
            if mode == ServiceMode::Recorded && v.recorded_service()?.is_none() {
                return Err(SimError::MissingRecord(v.id));
            }
            records.insert(
                v.id,
                VesselRecord {
                    vessel_id: v.id,
                    arrival: v.arrival.clone(),
                    berth_time: None,
                    service_end: None,
                    departure: None,
                    position_m: None,
                    cranes_used: 0,
                },
            );
        }
        Ok(Terminal {
            mode,
            params,
            resplit_per_move: false,
            fixed_cranes: None,
            vessels: by_id,
            berth: BerthAllocator::new(quay, false),
            records,
            qc: ResourcePool::new(PoolKind::QuayCrane, pools.quay_cranes),
            yc: ResourcePool::new(PoolKind::YardCrane, pools.yard_cranes),
            trucks: ResourcePool::new(PoolKind::InternalTruck, pools.trucks),
            crane_log: Vec::new(),
            aggregate: BTreeMap::new(),
            detailed: DetailedState::new(pools.quay_cranes),
            rng: None,
            samples: Vec::new(),
            departed: 0,
        })
    }

    fn vessel(&self, event: &Event) -> Result<&'a VesselCall, SimError> {
        event
            .payload
            .vessel
            .and_then(|id| self.vessels.get(&id).copied())
            .ok_or(SimError::UnknownVessel {
                kind: event.kind,
                at: event.time.clone(),
            })
    }

    fn admit(&mut self, now: &SimTime, cal: &mut EventCalendar) -> Result<(), SimError> {
        for granted in self.berth.admit_waiting(now) {
            let record = self
                .records
                .get_mut(&granted.vessel_id)
                .expect("known vessel");
            record.position_m = Some(granted.position_m);
            cal.schedule(
                now.clone(),
                EventKind::BerthGranted,
                Payload::vessel(granted.vessel_id),
            )?;
        }
        Ok(())
    }

    pub(crate) fn finish_service(
        &mut self,
        vessel: VesselId,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        cal.schedule(
            now.clone(),
            EventKind::VesselServiceComplete,
            Payload::vessel(vessel),
        )?;
        Ok(())
    }

    fn on_berth(
        &mut self,
        vessel: &'a VesselCall,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        self.records
            .get_mut(&vessel.id)
            .expect("known vessel")
            .berth_time = Some(now.clone());
        match self.mode {
            ServiceMode::Recorded => {
                let span = vessel
                    .recorded_service()?
                    .ok_or(SimError::MissingRecord(vessel.id))?;
                cal.schedule(
                    now.plus(&span),
                    EventKind::VesselServiceComplete,
                    Payload::vessel(vessel.id),
                )?;
            }
            ServiceMode::Aggregate => {
                let moves = total_moves(vessel);
                if moves == 0 {
                    self.finish_service(vessel.id, now, cal)?;
                } else {
                    self.aggregate.insert(
                        vessel.id,
                        AggregateWork {
                            remaining: Rational::from_integer(moves.into()),
                            cranes: 0,
                            since: now.clone(),
                            revision: 0,
                        },
                    );
                    self.resplit(now, cal)?;
                }
            }
            ServiceMode::Detailed => {
                self.detailed_start(vessel, now, cal)?;
                self.resplit(now, cal)?;
            }
        }
        Ok(())
    }

    /// Re-plans the crane split over all vessels still needing crane work.
    pub(crate) fn resplit(
        &mut self,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let work: Vec<BerthedWork> = match self.mode {
            ServiceMode::Recorded => return Ok(()),
            ServiceMode::Aggregate => {
                for w in self.aggregate.values_mut() {
                    let done = self.params.vessel_rate(w.cranes) * now.since(&w.since);
                    w.remaining -= done;
                    if w.remaining < Rational::zero() {
                        w.remaining = Rational::zero();
                    }
                    w.since = now.clone();
                }
                self.aggregate
                    .iter()
                    .map(|(id, w)| BerthedWork {
                        vessel_id: *id,
                        position_m: self.records[id].position_m.expect("berthed"),
                        remaining_moves: w
                            .remaining
                            .ceil()
                            .to_integer()
                            .try_into()
                            .unwrap_or(u64::MAX),
                    })
                    .collect()
            }
            ServiceMode::Detailed => self.detailed_work(),
        };
        let split = if work.iter().all(|w| w.remaining_moves == 0) {
            Vec::new()
        } else if let Some(n) = self.fixed_cranes {
            deal_cranes(&work, self.qc.capacity(), now, |_| n)?
        } else {
            plan_crane_split(&work, self.qc.capacity(), &self.params, now)?
        };
        self.rebind(&split, now);

        let mut counts: BTreeMap<VesselId, u32> = BTreeMap::new();
        for a in &split {
            *counts.entry(a.vessel_id).or_default() += 1;
        }
        for (id, n) in &counts {
            let r = self.records.get_mut(id).expect("known vessel");
            r.cranes_used = r.cranes_used.max(*n);
        }

        match self.mode {
            ServiceMode::Aggregate => {
                for (id, w) in self.aggregate.iter_mut() {
                    if w.remaining.is_zero() {
                        // completion already due at `now`; the forecast stays valid
                        w.cranes = 0;
                        continue;
                    }
                    let n = counts.get(id).copied().unwrap_or(0);
                    if n == w.cranes {
                        continue;
                    }
                    w.cranes = n;
                    w.revision += 1;
                    if n > 0 {
                        let finish = now.plus(&(&w.remaining / self.params.vessel_rate(n)));
                        cal.schedule(
                            finish,
                            EventKind::VesselServiceComplete,
                            Payload::vessel(*id).with_revision(w.revision),
                        )?;
                    }
                }
                let busy: u32 = self.aggregate.values().map(|w| w.cranes).sum();
                self.qc.set_busy(busy, now)?;
            }
            ServiceMode::Detailed => self.detailed_rebind(&split, now, cal)?,
            ServiceMode::Recorded => {}
        }
        Ok(())
    }

    fn rebind(&mut self, split: &[CraneAssignment], now: &SimTime) {
        let wanted: Vec<(u32, VesselId)> =
            split.iter().map(|a| (a.crane_index, a.vessel_id)).collect();
        let mut kept = Vec::new();
        let mut i = 0;
        while i < self.crane_log.len() {
            let a = &mut self.crane_log[i];
            if a.to.is_none() {
                if wanted.contains(&(a.crane_index, a.vessel_id)) {
                    kept.push((a.crane_index, a.vessel_id));
                } else if &a.from == now {
                    self.crane_log.remove(i);
                    continue;
                } else {
                    a.to = Some(now.clone());
                }
            }
            i += 1;
        }
        for a in split {
            if !kept.contains(&(a.crane_index, a.vessel_id)) {
                self.crane_log.push(a.clone());
            }
        }
    }

    fn on_service_complete(
        &mut self,
        event: &Event,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let vessel = self.vessel(event)?;
        let now = &event.time;
        if self.mode == ServiceMode::Aggregate {
            match (self.aggregate.get(&vessel.id), event.payload.revision) {
                (Some(w), Some(rev)) if w.revision != rev => return Ok(()),
                (None, Some(_)) => return Ok(()),
                _ => {}
            }
            if let Some(w) = self.aggregate.remove(&vessel.id) {
                let busy = self.qc.busy() - w.cranes;
                self.qc.set_busy(busy, now)?;
            }
        }
        let record = self.records.get_mut(&vessel.id).expect("known vessel");
        record.service_end = Some(now.clone());
        cal.schedule(
            now.clone(),
            EventKind::VesselDeparture,
            Payload::vessel(vessel.id),
        )?;
        Ok(())
    }

    fn on_departure(&mut self, event: &Event, cal: &mut EventCalendar) -> Result<(), SimError> {
        let vessel = self.vessel(event)?;
        let now = &event.time;
        self.berth.release_berth(vessel.id, now)?;
        self.records
            .get_mut(&vessel.id)
            .expect("known vessel")
            .departure = Some(now.clone());
        if self.mode == ServiceMode::Detailed {
            self.detailed.work.remove(&vessel.id);
        }
        self.resplit(now, cal)?;
        self.admit(now, cal)?;
        self.departed += 1;
        if self.departed == self.vessels.len() {
            cal.schedule(now.clone(), EventKind::SimEnd, Payload::default())?;
        }
        Ok(())
    }

    fn sample(&mut self, now: &SimTime) {
        self.samples.push(OccupancySample {
            time: now.clone(),
            quay_cranes: self.qc.busy(),
            yard_cranes: self.yc.busy(),
            trucks: self.trucks.busy(),
        });
    }
}

impl EventHandler for Terminal<'_> {
    type Error = SimError;

    fn handle(&mut self, event: &Event, cal: &mut EventCalendar) -> Result<(), SimError> {
        let now = &event.time;
        match event.kind {
            EventKind::VesselArrival => {
                let vessel = self.vessel(event)?;
                self.berth.enqueue(vessel, now)?;
                self.admit(now, cal)?;
            }
            EventKind::BerthGranted => {
                let vessel = self.vessel(event)?;
                self.on_berth(vessel, now, cal)?;
            }
            EventKind::VesselServiceComplete => self.on_service_complete(event, cal)?,
            EventKind::VesselDeparture => self.on_departure(event, cal)?,
            EventKind::CraneMoveComplete => self.on_crane_move_complete(event, cal)?,
            EventKind::TruckTripComplete => self.on_truck_trip_complete(event, cal)?,
            EventKind::YardServiceComplete => self.on_yard_service_complete(event, cal)?,
            EventKind::SimEnd => {}
        }
        self.sample(now);
        Ok(())
    }
}

fn execute(mut terminal: Terminal<'_>, horizon: &SimTime) -> Result<SimOutcome, SimError> {
    let mut cal = EventCalendar::new();
    let mut arrivals: Vec<&VesselCall> = terminal.vessels.values().copied().collect();
    arrivals.sort_by(|a, b| (&a.arrival, a.id).cmp(&(&b.arrival, b.id)));
    for v in arrivals {
        cal.schedule(
            v.arrival.clone(),
            EventKind::VesselArrival,
            Payload::vessel(v.id),
        )?;
    }
    let outcome = kernel::run(&mut cal, &mut terminal, horizon)?;

    let end = cal.clock().clone();
    for pool in [&mut terminal.qc, &mut terminal.yc, &mut terminal.trucks] {
        pool.settle(&end);
    }
    let unfinished: Vec<VesselId> = terminal
        .records
        .values()
        .filter(|r| r.service_end.is_none())
        .map(|r| r.vessel_id)
        .collect();
    let status = match (&outcome.status, unfinished.is_empty()) {
        (RunStatus::Drained, true) => SimStatus::Completed,
        _ => SimStatus::PendingWork {
            unfinished,
            pending_events: outcome.pending,
        },
    };
    let pools = [&terminal.qc, &terminal.yc, &terminal.trucks]
        .into_iter()
        .map(|p| PoolUsage {
            kind: p.kind(),
            capacity: p.capacity(),
            busy_area: p.busy_area().clone(),
            peak: p.peak(),
        })
        .collect();
    Ok(SimOutcome {
        mode: terminal.mode,
        trace: outcome.trace,
        status,
        plan: terminal.berth.into_plan(),
        crane_log: terminal.crane_log,
        vessels: terminal.records,
        pools,
        samples: terminal.samples,
        scheduled: outcome.scheduled,
        pending: outcome.pending,
    })
}

/// Runs one scenario to completion (or to the configured horizon).
pub fn simulate(config: &ScenarioConfig, vessels: &[VesselCall]) -> Result<SimOutcome, SimError> {
    let mut terminal = Terminal::new(
        config.mode,
        config.params.clone(),
        config.quay(),
        PoolCapacities::from_config(config),
        vessels,
    )?;
    terminal.berth = BerthAllocator::new(config.quay(), config.allow_overtake);
    terminal.resplit_per_move = config.resplit_per_move;
    if config.stochastic {
        terminal.rng = Some(ChaCha8Rng::seed_from_u64(config.seed));
    }
    let horizon = config
        .horizon_min
        .map(SimTime::from_minutes)
        .unwrap_or_else(SimTime::far_future);
    execute(terminal, &horizon)
}

/// Services a single vessel in detailed mode with exactly `n_cranes` cranes
/// (capped by the crane pool), berthing it at its arrival on an empty quay.
pub fn run_detailed_service(
    vessel: &VesselCall,
    n_cranes: u32,
    pools: PoolCapacities,
    params: &ServiceParams,
    horizon: &SimTime,
) -> Result<SimOutcome, SimError> {
    let quay = QuayLayout {
        length_m: vessel.length_m,
    };
    let mut terminal = Terminal::new(
        ServiceMode::Detailed,
        params.clone(),
        quay,
        pools,
        std::slice::from_ref(vessel),
    )?;
    terminal.fixed_cranes = Some(n_cranes);
    execute(terminal, horizon)
}
