//! Per-container service chains.
//!
//! Import: quay crane lift, wait for a truck, truck trip to the yard, wait for
//! a yard crane, yard service, then truck and yard crane are released.
//!
//! Export: wait for a truck, wait for a yard crane, yard service (yard crane
//! released), truck trip to the quay (truck released), wait for one of the
//! vessel's cranes, quay crane lift.
//!
//! A quay crane is held only for its lift. Exports are released to the yard
//! once every import of the vessel has been lifted off. Trucks are always
//! taken before yard cranes, so waiting jobs never deadlock.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{ToPrimitive, Zero};
use rand_distr::{Distribution, Exp};

use crate::cranes::{BerthedWork, CraneAssignment};
use crate::kernel::{Event, EventCalendar, EventKind, Payload};
use crate::model::{Flow, VesselCall, VesselId};
use crate::sim::{SimError, Terminal};
use crate::time::{from_f64_decimal, int, Rational, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Job {
    vessel: VesselId,
    container: u32,
    flow: Flow,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct VesselWork {
    imports: u32,
    next_import: u32,
    imports_lifted: u32,
    exports: u32,
    exports_released: bool,
    exports_lifted: u32,
    /// Exports delivered to the quay and waiting for a crane.
    staged: VecDeque<u32>,
    /// Containers whose whole chain has not finished yet.
    outstanding: u32,
}

impl VesselWork {
    fn unlifted(&self) -> u64 {
        u64::from(self.imports - self.imports_lifted)
            + u64::from(self.exports - self.exports_lifted)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CraneSlot {
    owner: Option<VesselId>,
    lifting: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct DetailedState {
    cranes: Vec<CraneSlot>,
    pub(crate) work: BTreeMap<VesselId, VesselWork>,
    truck_queue: VecDeque<Job>,
    yard_queue: VecDeque<Job>,
}

impl DetailedState {
    pub(crate) fn new(quay_cranes: u32) -> Self {
        DetailedState {
            cranes: vec![CraneSlot::default(); quay_cranes as usize],
            ..DetailedState::default()
        }
    }
}

fn job_of(event: &Event, flow_hint: &BTreeMap<VesselId, VesselWork>) -> Option<Job> {
    let vessel = event.payload.vessel?;
    let container = event.payload.container?;
    let work = flow_hint.get(&vessel)?;
    let flow = if container < work.imports {
        Flow::Import
    } else {
        Flow::Export
    };
    Some(Job {
        vessel,
        container,
        flow,
    })
}

impl Terminal<'_> {
    /// Duration of a stage with the given mean; exponential when a seeded
    /// generator is present, rounded to a thousandth of a minute.
    fn stage_time(&mut self, mean: &Rational) -> Rational {
        match &mut self.rng {
            Some(rng) if !mean.is_zero() => {
                let mean_f = mean.to_f64().expect("finite mean");
                let draw = Exp::new(1.0 / mean_f).expect("positive rate").sample(rng);
                let millis = (draw * 1000.0).round();
                from_f64_decimal(millis).unwrap_or_else(Rational::zero) / int(1000)
            }
            _ => mean.clone(),
        }
    }

    pub(crate) fn detailed_start(
        &mut self,
        vessel: &VesselCall,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let imports = vessel.moves(Flow::Import) as u32;
        let exports = vessel.moves(Flow::Export) as u32;
        let work = VesselWork {
            imports,
            exports,
            outstanding: imports + exports,
            ..VesselWork::default()
        };
        self.detailed.work.insert(vessel.id, work);
        if imports + exports == 0 {
            return self.finish_service(vessel.id, now, cal);
        }
        if imports == 0 {
            self.release_exports(vessel.id, now, cal)?;
        }
        Ok(())
    }

    pub(crate) fn detailed_work(&self) -> Vec<BerthedWork> {
        self.detailed
            .work
            .iter()
            .map(|(id, w)| BerthedWork {
                vessel_id: *id,
                position_m: self.records[id].position_m.expect("berthed"),
                remaining_moves: w.unlifted(),
            })
            .collect()
    }

    pub(crate) fn detailed_rebind(
        &mut self,
        split: &[CraneAssignment],
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        for slot in self.detailed.cranes.iter_mut() {
            slot.owner = None;
        }
        for a in split {
            self.detailed.cranes[a.crane_index as usize].owner = Some(a.vessel_id);
        }
        self.dispatch_cranes(now, cal)
    }

    fn cranes_on(&self, vessel: VesselId) -> u32 {
        self.detailed
            .cranes
            .iter()
            .filter(|c| c.owner == Some(vessel))
            .count() as u32
    }

    /// Starts a lift on every idle crane whose vessel has a container ready.
    fn dispatch_cranes(&mut self, now: &SimTime, cal: &mut EventCalendar) -> Result<(), SimError> {
        for idx in 0..self.detailed.cranes.len() {
            let slot = self.detailed.cranes[idx];
            let Some(vessel) = slot.owner else { continue };
            if slot.lifting {
                continue;
            }
            let Some(work) = self.detailed.work.get_mut(&vessel) else {
                continue;
            };
            let container = if work.next_import < work.imports {
                work.next_import += 1;
                work.next_import - 1
            } else if let Some(c) = work.staged.pop_front() {
                c
            } else {
                continue;
            };
            let mean = Rational::from_integer(1.into())
                / self.params.per_crane_rate(self.cranes_on(vessel));
            let lift = self.stage_time(&mean);
            self.qc.try_acquire(now)?;
            self.detailed.cranes[idx].lifting = true;
            cal.schedule(
                now.plus(&lift),
                EventKind::CraneMoveComplete,
                Payload::vessel(vessel)
                    .with_crane(idx as u32)
                    .with_container(container),
            )?;
        }
        Ok(())
    }

    fn release_exports(
        &mut self,
        vessel: VesselId,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let work = self
            .detailed
            .work
            .get_mut(&vessel)
            .expect("vessel in service");
        work.exports_released = true;
        for container in work.imports..work.imports + work.exports {
            self.detailed.truck_queue.push_back(Job {
                vessel,
                container,
                flow: Flow::Export,
            });
        }
        self.serve_queues(now, cal)
    }

    /// Hands idle trucks, then idle yard cranes, to waiting jobs in FIFO order.
    fn serve_queues(&mut self, now: &SimTime, cal: &mut EventCalendar) -> Result<(), SimError> {
        while self.trucks.idle() > 0 {
            let Some(job) = self.detailed.truck_queue.pop_front() else {
                break;
            };
            self.trucks.try_acquire(now)?;
            match job.flow {
                Flow::Import => {
                    let trip = self.stage_time(&self.params.truck_cycle_min.clone());
                    cal.schedule(
                        now.plus(&trip),
                        EventKind::TruckTripComplete,
                        Payload::vessel(job.vessel).with_container(job.container),
                    )?;
                }
                Flow::Export => self.detailed.yard_queue.push_back(job),
            }
        }
        while self.yc.idle() > 0 {
            let Some(job) = self.detailed.yard_queue.pop_front() else {
                break;
            };
            self.yc.try_acquire(now)?;
            let service = self.stage_time(&self.params.yard_crane_service_min.clone());
            cal.schedule(
                now.plus(&service),
                EventKind::YardServiceComplete,
                Payload::vessel(job.vessel).with_container(job.container),
            )?;
        }
        Ok(())
    }

    fn container_done(
        &mut self,
        vessel: VesselId,
        now: &SimTime,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let work = self
            .detailed
            .work
            .get_mut(&vessel)
            .expect("vessel in service");
        work.outstanding -= 1;
        if work.outstanding == 0 {
            self.finish_service(vessel, now, cal)?;
        }
        Ok(())
    }

    fn job(&self, event: &Event) -> Result<Job, SimError> {
        job_of(event, &self.detailed.work).ok_or(SimError::UnknownVessel {
            kind: event.kind,
            at: event.time.clone(),
        })
    }

    pub(crate) fn on_crane_move_complete(
        &mut self,
        event: &Event,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let now = &event.time;
        let job = self.job(event)?;
        let crane = event.payload.crane.expect("lift events carry a crane") as usize;
        self.qc.release(now)?;
        self.detailed.cranes[crane].lifting = false;
        let work = self
            .detailed
            .work
            .get_mut(&job.vessel)
            .expect("vessel in service");
        match job.flow {
            Flow::Import => {
                work.imports_lifted += 1;
                let all_off = work.imports_lifted == work.imports && !work.exports_released;
                self.detailed.truck_queue.push_back(job);
                if all_off && work.exports > 0 {
                    self.release_exports(job.vessel, now, cal)?;
                }
            }
            Flow::Export => {
                work.exports_lifted += 1;
                self.container_done(job.vessel, now, cal)?;
            }
        }
        if self.resplit_per_move {
            self.resplit(now, cal)?;
        }
        self.serve_queues(now, cal)?;
        self.dispatch_cranes(now, cal)
    }

    pub(crate) fn on_truck_trip_complete(
        &mut self,
        event: &Event,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let now = &event.time;
        let job = self.job(event)?;
        match job.flow {
            // truck stays with the container until the yard crane is done
            Flow::Import => self.detailed.yard_queue.push_back(job),
            Flow::Export => {
                self.trucks.release(now)?;
                let work = self
                    .detailed
                    .work
                    .get_mut(&job.vessel)
                    .expect("vessel in service");
                work.staged.push_back(job.container);
                self.dispatch_cranes(now, cal)?;
            }
        }
        self.serve_queues(now, cal)
    }

    pub(crate) fn on_yard_service_complete(
        &mut self,
        event: &Event,
        cal: &mut EventCalendar,
    ) -> Result<(), SimError> {
        let now = &event.time;
        let job = self.job(event)?;
        self.yc.release(now)?;
        match job.flow {
            Flow::Import => {
                self.trucks.release(now)?;
                self.container_done(job.vessel, now, cal)?;
            }
            Flow::Export => {
                let trip = self.stage_time(&self.params.truck_cycle_min.clone());
                cal.schedule(
                    now.plus(&trip),
                    EventKind::TruckTripComplete,
                    Payload::vessel(job.vessel).with_container(job.container),
                )?;
            }
        }
        self.serve_queues(now, cal)
    }
}
