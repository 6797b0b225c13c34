//! Event calendar and run loop.
//!
//! Events pop in strict lexicographic order on `(time, priority_class, seq)`.
//! The priority class puts resource releases ahead of acquisitions at equal
//! timestamps and `seq` is the insertion counter, so a run is fully determined
//! by its inputs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::model::VesselId;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("event {kind} scheduled at {at} but the clock is already at {clock}")]
    SchedulingInPast {
        kind: EventKind,
        // boxed: big-rational times would otherwise bloat every Result
        at: Box<SimTime>,
        clock: Box<SimTime>,
    },
}

/// Tie-break class for events sharing a timestamp. Lower sorts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PriorityClass {
    Release = 0,
    Completion = 1,
    Berthing = 2,
    Arrival = 3,
    Report = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    VesselArrival,
    BerthGranted,
    CraneMoveComplete,
    TruckTripComplete,
    YardServiceComplete,
    VesselServiceComplete,
    VesselDeparture,
    SimEnd,
}

impl EventKind {
    pub fn priority_class(self) -> PriorityClass {
        match self {
            EventKind::VesselDeparture => PriorityClass::Release,
            EventKind::CraneMoveComplete
            | EventKind::TruckTripComplete
            | EventKind::YardServiceComplete
            | EventKind::VesselServiceComplete => PriorityClass::Completion,
            EventKind::BerthGranted => PriorityClass::Berthing,
            EventKind::VesselArrival => PriorityClass::Arrival,
            EventKind::SimEnd => PriorityClass::Report,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::VesselArrival => "VesselArrival",
            EventKind::BerthGranted => "BerthGranted",
            EventKind::CraneMoveComplete => "CraneMoveComplete",
            EventKind::TruckTripComplete => "TruckTripComplete",
            EventKind::YardServiceComplete => "YardServiceComplete",
            EventKind::VesselServiceComplete => "VesselServiceComplete",
            EventKind::VesselDeparture => "VesselDeparture",
            EventKind::SimEnd => "SimEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entity identifiers carried by an event. Unused slots stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Payload {
    pub vessel: Option<VesselId>,
    pub crane: Option<u32>,
    /// Per-vessel container move number.
    pub container: Option<u32>,
    /// Revision counter used to recognise superseded completion forecasts.
    pub revision: Option<u64>,
}

impl Payload {
    pub fn vessel(vessel: VesselId) -> Self {
        Payload {
            vessel: Some(vessel),
            ..Payload::default()
        }
    }

    pub fn with_crane(mut self, crane: u32) -> Self {
        self.crane = Some(crane);
        self
    }

    pub fn with_container(mut self, container: u32) -> Self {
        self.container = Some(container);
        self
    }

    pub fn with_revision(mut self, revision: u64) -> Self {
        self.revision = Some(revision);
        self
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.vessel {
            parts.push(format!("v{}", v.0));
        }
        if let Some(c) = self.crane {
            parts.push(format!("qc{c}"));
        }
        if let Some(m) = self.container {
            parts.push(format!("m{m}"));
        }
        if let Some(r) = self.revision {
            parts.push(format!("r{r}"));
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub time: SimTime,
    pub priority_class: PriorityClass,
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (&SimTime, PriorityClass, u64) {
        (&self.time, self.priority_class, self.seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event list plus the simulation clock.
#[derive(Debug, Default)]
pub struct EventCalendar {
    pending: BinaryHeap<Reverse<Event>>,
    clock: SimTime,
    next_seq: u64,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> &SimTime {
        &self.clock
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Total number of events ever accepted by [`schedule`](Self::schedule).
    pub fn scheduled_count(&self) -> u64 {
        self.next_seq
    }

    pub fn schedule(
        &mut self,
        time: SimTime,
        kind: EventKind,
        payload: Payload,
    ) -> Result<u64, KernelError> {
        if time < self.clock {
            return Err(KernelError::SchedulingInPast {
                kind,
                at: Box::new(time),
                clock: Box::new(self.clock.clone()),
            });
        }
        self.next_seq += 1;
        let seq = self.next_seq;
        self.pending.push(Reverse(Event {
            time,
            priority_class: kind.priority_class(),
            seq,
            kind,
            payload,
        }));
        Ok(seq)
    }

    pub fn peek(&self) -> Option<&Event> {
        self.pending.peek().map(|Reverse(e)| e)
    }

    /// Removes the minimal event and advances the clock to its time.
    pub fn next_event(&mut self) -> Option<Event> {
        let Reverse(event) = self.pending.pop()?;
        debug_assert!(event.time >= self.clock);
        self.clock = event.time.clone();
        Some(event)
    }
}

/// Dispatch target for [`run`]. One method covers every [`EventKind`];
/// implementations match on the kind exhaustively.
pub trait EventHandler {
    type Error: From<KernelError>;

    fn handle(&mut self, event: &Event, calendar: &mut EventCalendar) -> Result<(), Self::Error>;
}

/// Processed events in the order they were handled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Tab-separated dump: `time_min<TAB>kind<TAB>entity_ids`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{}\t{}\t{}", e.time, e.kind, e.payload)?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace is ASCII")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    /// The calendar drained before the horizon.
    Drained,
    /// Events remained beyond the horizon when the loop stopped.
    HorizonExceededWithPendingWork { pending: usize },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: EventTrace,
    pub status: RunStatus,
    pub scheduled: u64,
    pub pending: usize,
}

/// Processes events in calendar order until the calendar is empty or the next
/// event lies beyond `horizon`.
pub fn run<H: EventHandler>(
    calendar: &mut EventCalendar,
    handler: &mut H,
    horizon: &SimTime,
) -> Result<RunOutcome, H::Error> {
    let mut trace = EventTrace::default();
    loop {
        match calendar.peek() {
            None => break,
            Some(next) if &next.time > horizon => break,
            Some(_) => {}
        }
        let event = calendar.next_event().expect("peeked event exists");
        handler.handle(&event, calendar)?;
        trace.events.push(event);
    }
    let pending = calendar.len();
    let status = if pending == 0 {
        RunStatus::Drained
    } else {
        RunStatus::HorizonExceededWithPendingWork { pending }
    };
    Ok(RunOutcome {
        trace,
        status,
        scheduled: calendar.scheduled_count(),
        pending,
    })
}
