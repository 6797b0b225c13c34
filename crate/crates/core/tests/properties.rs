//! Property-based invariants across module boundaries.

use std::collections::BTreeMap;

use proptest::prelude::*;

use quaysim::berth::{validate_plan, BerthAssignment, BerthPlan};
use quaysim::config::{ScenarioConfig, ServiceMode};
use quaysim::cranes::{
    check_non_crossing, plan_crane_split, service_duration_aggregate, BerthedWork, ServiceParams,
};
use quaysim::kernel::{EventCalendar, EventKind, Payload};
use quaysim::logsheet::{parse_log_sheet, write_log_sheet};
use quaysim::model::{teu, total_moves, ContainerGroup, ContainerSize, Flow, VesselCall, VesselId};
use quaysim::report::{compare, KpiReport, KpiRow};
use quaysim::sim::simulate;
use quaysim::time::{int, ratio, SimTime};

const KINDS: [EventKind; 8] = [
    EventKind::VesselArrival,
    EventKind::BerthGranted,
    EventKind::CraneMoveComplete,
    EventKind::TruckTripComplete,
    EventKind::YardServiceComplete,
    EventKind::VesselServiceComplete,
    EventKind::VesselDeparture,
    EventKind::SimEnd,
];

fn groups(counts: [u32; 4]) -> Vec<ContainerGroup> {
    vec![
        ContainerGroup::new(Flow::Import, ContainerSize::Twenty, counts[0]),
        ContainerGroup::new(Flow::Import, ContainerSize::Forty, counts[1]),
        ContainerGroup::new(Flow::Export, ContainerSize::Twenty, counts[2]),
        ContainerGroup::new(Flow::Export, ContainerSize::Forty, counts[3]),
    ]
}

fn vessel_strategy(max_moves: u32) -> impl Strategy<Value = (u32, i64, [u32; 4])> {
    (
        50u32..400,
        0i64..3000,
        prop::array::uniform4(0u32..max_moves),
    )
}

fn fleet(specs: &[(u32, i64, [u32; 4])]) -> Vec<VesselCall> {
    specs
        .iter()
        .enumerate()
        .map(|(i, &(len, arrival, counts))| {
            VesselCall::new(
                i as u32 + 1,
                len,
                SimTime::from_minutes(arrival),
                groups(counts),
            )
        })
        .collect()
}

fn kpi(rows: &[(u32, i64)]) -> KpiReport {
    KpiReport {
        rows: rows
            .iter()
            .map(|&(id, s)| KpiRow {
                vessel_id: VesselId(id),
                teu: 0,
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn calendar_pops_in_key_order(items in prop::collection::vec((0i64..50, 0usize..8), 0..60)) {
        let mut cal = EventCalendar::new();
        for &(t, k) in &items {
            cal.schedule(SimTime::from_minutes(t), KINDS[k], Payload::default()).unwrap();
        }
        let mut popped = Vec::new();
        while let Some(e) = cal.next_event() {
            popped.push((e.time.clone(), e.priority_class, e.seq));
        }
        prop_assert_eq!(popped.len(), items.len());
        let mut sorted = popped.clone();
        sorted.sort();
        prop_assert_eq!(popped, sorted);
    }

    #[test]
    fn moves_and_teu_are_additive(a in prop::array::uniform4(0u32..2000), b in prop::array::uniform4(0u32..2000)) {
        let va = VesselCall::new(1, 100, SimTime::zero(), groups(a));
        let vb = VesselCall::new(2, 100, SimTime::zero(), groups(b));
        let sum: [u32; 4] = std::array::from_fn(|i| a[i] + b[i]);
        let vs = VesselCall::new(3, 100, SimTime::zero(), groups(sum));
        prop_assert_eq!(total_moves(&vs), total_moves(&va) + total_moves(&vb));
        prop_assert_eq!(teu(&vs), teu(&va) + teu(&vb));
        prop_assert_eq!(total_moves(&va), a.iter().map(|&c| u64::from(c)).sum::<u64>());
        prop_assert_eq!(teu(&va), u64::from(a[0] + a[2]) + 2 * u64::from(a[1] + a[3]));
    }

    #[test]
    fn fcfs_plans_are_feasible_and_ordered(specs in prop::collection::vec(vessel_strategy(120), 1..10)) {
        let vessels = fleet(&specs);
        let config = ScenarioConfig::default();
        let outcome = simulate(&config, &vessels).unwrap();
        prop_assert!(outcome.is_complete());
        prop_assert!(validate_plan(&outcome.plan, &config.quay()).is_empty());

        let mut by_arrival: Vec<&VesselCall> = vessels.iter().collect();
        by_arrival.sort_by(|a, b| (&a.arrival, a.id).cmp(&(&b.arrival, b.id)));
        let expected: Vec<VesselId> = by_arrival.iter().map(|v| v.id).collect();
        prop_assert_eq!(outcome.plan.berthing_order(), expected);
        for v in &vessels {
            let r = &outcome.vessels[&v.id];
            prop_assert!(r.berth_time.as_ref().unwrap() >= &v.arrival);
        }
        for (at, _) in outcome.trace.iter().map(|e| (e.time.clone(), ())).collect::<BTreeMap<_, _>>() {
            prop_assert!(check_non_crossing(&outcome.crane_log, &outcome.plan, &at).unwrap());
        }
    }

    #[test]
    fn crane_split_is_non_crossing(
        works in prop::collection::vec((0u32..1000, 1u64..3000), 1..8),
        capacity in 1u32..12,
    ) {
        let mut seen = std::collections::BTreeSet::new();
        let berthed: Vec<BerthedWork> = works
            .iter()
            .enumerate()
            .filter(|(_, (pos, _))| seen.insert(*pos))
            .map(|(i, &(pos, moves))| BerthedWork {
                vessel_id: VesselId(i as u32),
                position_m: pos,
                remaining_moves: moves,
            })
            .collect();
        let now = SimTime::zero();
        let split = plan_crane_split(&berthed, capacity, &ServiceParams::default(), &now).unwrap();
        prop_assert!(split.len() as u32 <= capacity);
        let mut indices: Vec<u32> = split.iter().map(|a| a.crane_index).collect();
        indices.sort_unstable();
        indices.dedup();
        prop_assert_eq!(indices.len(), split.len());

        let plan = BerthPlan {
            assignments: berthed
                .iter()
                .map(|w| BerthAssignment {
                    vessel_id: w.vessel_id,
                    position_m: w.position_m,
                    length_m: 1,
                    berth_time: now.clone(),
                    depart_time: None,
                })
                .collect(),
        };
        prop_assert!(check_non_crossing(&split, &plan, &now).unwrap());
        if berthed.len() as u32 <= capacity {
            for w in &berthed {
                prop_assert!(split.iter().any(|a| a.vessel_id == w.vessel_id));
            }
        }
    }

    #[test]
    fn aggregate_duration_monotone(moves in 1u64..5000, n in 1u32..8) {
        let p = ServiceParams::default();
        let here = service_duration_aggregate(moves, n, &p);
        prop_assert!(service_duration_aggregate(moves, n + 1, &p) < here);
        prop_assert!(service_duration_aggregate(moves + 1, n, &p) > here);
        let fast = ServiceParams { crane_rate_moves_per_min: &p.crane_rate_moves_per_min * int(2), ..p.clone() };
        prop_assert_eq!(service_duration_aggregate(moves, n, &fast) * int(2), here);
    }

    #[test]
    fn compare_is_antisymmetric(services in prop::collection::vec((1i64..3000, 1i64..3000), 1..10)) {
        let a = kpi(&services.iter().enumerate().map(|(i, s)| (i as u32, s.0)).collect::<Vec<_>>());
        let b = kpi(&services.iter().enumerate().map(|(i, s)| (i as u32, s.1)).collect::<Vec<_>>());
        let ab = compare(&a, &b).unwrap();
        let ba = compare(&b, &a).unwrap();
        let (ta, tb) = (a.total_service_min(), b.total_service_min());
        prop_assert_eq!(ab.reduction_fraction, int(1) - ratio(tb, ta));
        prop_assert_eq!(ba.reduction_fraction, int(1) - ratio(ta, tb));
        prop_assert_eq!(compare(&a, &a).unwrap().reduction_fraction, int(0));
        for (x, y) in ab.deltas.iter().zip(&ba.deltas) {
            prop_assert_eq!(x.delta_min, -y.delta_min);
        }
    }

    #[test]
    fn log_sheet_round_trips(specs in prop::collection::vec((50u32..400, 0i64..20000, 1i64..3000, prop::array::uniform4(0u32..500)), 0..12)) {
        let epoch = ScenarioConfig::default().epoch;
        let vessels: Vec<VesselCall> = specs
            .iter()
            .enumerate()
            .map(|(i, &(len, start, span, counts))| {
                let mut v = VesselCall::new(i as u32 + 1, len, SimTime::from_minutes(start), groups(counts));
                v.recorded_op_start = Some(SimTime::from_minutes(start));
                v.recorded_op_end = Some(SimTime::from_minutes(start + span));
                v.recorded_service_min = Some(span);
                v
            })
            .collect();
        let mut buf = Vec::new();
        write_log_sheet(&vessels, &epoch, &mut buf).unwrap();
        let back = parse_log_sheet(buf.as_slice(), &epoch).unwrap();
        prop_assert_eq!(back, vessels);
    }
}

#[test]
fn detailed_mode_week_subset_is_complete() {
    let vessels = fleet(&[
        (200, 0, [5, 3, 2, 4]),
        (150, 10, [2, 2, 0, 1]),
        (300, 12, [0, 0, 3, 3]),
    ]);
    let config = ScenarioConfig {
        mode: ServiceMode::Detailed,
        ..ScenarioConfig::default()
    };
    let outcome = simulate(&config, &vessels).unwrap();
    assert!(outcome.is_complete());
    assert_eq!(outcome.trace.count(EventKind::CraneMoveComplete), 25);
}
