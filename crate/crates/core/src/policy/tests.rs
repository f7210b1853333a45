use super::*;
use crate::domain::FleetConfiguration;
use crate::gen::{gen_topology, Shape};
use crate::seed::rng_from;
use crate::sim::{Observation, Step};
use proptest::prelude::*;

fn point(port: usize, stock: i64, capacity: i64, empties: i64, free: i64) -> DecisionPoint {
    let feasible = (-(empties.min(capacity - stock)), stock.min(free));
    DecisionPoint {
        seq: 0,
        vessel: 0,
        port,
        day: 0,
        call: 0,
        observation: Observation {
            port_stock: stock,
            port_capacity: capacity,
            vessel_empties: empties,
            vessel_free_space: free,
            recent_demand: 0,
            recent_shortage: 0,
            day: 0,
            horizon: 10,
        },
        feasible,
    }
}

fn three_roles() -> PortRoles {
    roles_from_flows(&[10.0, 0.0, 5.0], &[0.0, 10.0, 5.0], 0.1)
}

#[test]
fn flows_label_exporters_importers_and_balanced() {
    let r = three_roles();
    assert_eq!(r.threshold, 0.1 * 10.0);
    assert_eq!(r.label(0), PortLabel::Exporting);
    assert_eq!(r.label(1), PortLabel::Importing);
    assert_eq!(r.label(2), PortLabel::Balanced);
    assert_eq!(r.roles[0].net_flow, 10.0);
}

#[test]
fn desk_has_both_kinds_of_port() {
    let r = classify_ports(&gen_topology(Shape::Desk, 0), DEFAULT_THRESHOLD_FRACTION).unwrap();
    let labels: Vec<_> = r.roles.iter().map(|x| x.label).collect();
    assert!(labels.contains(&PortLabel::Exporting));
    assert!(labels.contains(&PortLabel::Importing));
}

#[test]
fn classification_ignores_port_order() {
    let t = gen_topology(Shape::Desk, 3);
    let before = classify_ports(&t, 0.1).unwrap();
    let mut rev = t.clone();
    rev.ports.reverse();
    let after = classify_ports(&rev, 0.1).unwrap();
    for (i, p) in t.ports.iter().enumerate() {
        let j = rev.ports.iter().position(|q| q.id == p.id).unwrap();
        assert_eq!(before.label(i), after.label(j), "port {}", p.id);
        assert!((before.roles[i].net_flow - after.roles[j].net_flow).abs() < 1e-9);
    }
}

#[test]
fn heuristic_discharges_at_least_half_at_exporters() {
    let mut rng = rng_from(0);
    for _ in 0..100 {
        let a = heuristic_policy(&point(0, 2, 100, 9, 1), &three_roles(), &mut rng);
        assert!((-9..=-5).contains(&a.delta), "{}", a.delta);
    }
}

#[test]
fn heuristic_loads_at_least_half_at_importers() {
    let mut rng = rng_from(1);
    for _ in 0..100 {
        let a = heuristic_policy(&point(1, 50, 100, 0, 7), &three_roles(), &mut rng);
        assert!((4..=7).contains(&a.delta), "{}", a.delta);
    }
}

#[test]
fn heuristic_idles_at_balanced_ports() {
    let a = heuristic_policy(&point(2, 50, 100, 5, 5), &three_roles(), &mut rng_from(2));
    assert_eq!(a.delta, 0);
}

#[test]
fn noop_moves_nothing() {
    let t = gen_topology(Shape::Desk, 0);
    let m = crate::sim::rollout(
        &t,
        &FleetConfiguration::round_robin(&t),
        &mut NoOpPolicy,
        0,
        1.0,
    )
    .unwrap();
    assert_eq!(m.clamped_actions, 0);
}

#[test]
fn heuristic_never_works_against_port_roles_in_an_episode() {
    let t = gen_topology(Shape::Desk, 1);
    let p = FleetConfiguration::round_robin(&t);
    let mut s = SimState::new(&t, &p, 5).unwrap();
    let mut pol = HeuristicPolicy::new(s.layout(), DEFAULT_THRESHOLD_FRACTION);
    let mut rng = rng_from(5);
    while let Step::Decision(d) = s.next_decision().unwrap() {
        let a = pol.act(&s, &d, &mut rng);
        match pol.roles.label(d.port) {
            PortLabel::Exporting => assert!(a.delta <= 0),
            PortLabel::Importing => assert!(a.delta >= 0),
            PortLabel::Balanced => assert_eq!(a.delta, 0),
        }
        s.apply_action(&d, a).unwrap();
    }
}

fn any_point() -> impl Strategy<Value = DecisionPoint> {
    (0usize..3, 1i64..200, 0i64..200).prop_flat_map(|(port, capacity, cap_v)| {
        (
            Just(port),
            0..=capacity,
            Just(capacity),
            0..=cap_v,
            Just(cap_v),
        )
            .prop_map(|(port, stock, capacity, empties, cap_v)| {
                point(port, stock, capacity, empties, cap_v - empties)
            })
    })
}

proptest! {
    #[test]
    fn policies_stay_feasible(d in any_point(), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let r = random_policy(&d, &mut rng).delta;
        prop_assert!(d.feasible.0 <= r && r <= d.feasible.1);
        let h = heuristic_policy(&d, &three_roles(), &mut rng).delta;
        prop_assert!(d.feasible.0 <= h && h <= d.feasible.1);
        prop_assert!(h <= d.observation.vessel_free_space && -h <= d.observation.vessel_empties);
    }

    #[test]
    fn random_policy_reaches_both_ends(lo in -20i64..=0, hi in 0i64..=20) {
        let mut d = point(0, 0, 0, 0, 0);
        d.feasible = (lo, hi);
        let mut rng = rng_from(7);
        let draws: Vec<i64> = (0..2000).map(|_| random_policy(&d, &mut rng).delta).collect();
        prop_assert_eq!(draws.iter().min(), Some(&lo));
        prop_assert_eq!(draws.iter().max(), Some(&hi));
    }
}
