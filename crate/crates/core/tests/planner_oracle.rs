use ecrfd::domain::{FleetConfiguration, OrderModel, Port, Topology};
use ecrfd::gen::{
    gen_topology, make_deterministic, planted_topology, random_small_instance,
    random_tiny_instance, tiny_grid, Shape,
};
use ecrfd::planner::*;
use ecrfd::seed::{rng_from, stream};
use ecrfd::sim::{rollout_world, SimState, World};
use std::sync::Arc;

fn check_against_brute_force(t: &Topology, p: &FleetConfiguration) -> (i64, i64, i64) {
    let world = World::new(t, p).unwrap();
    let best = brute_force_min_shortage(&SimState::init(Arc::clone(&world), 1)).unwrap();
    let mut pol = or_policy_world(&world, 0.0, &mut rng_from(0)).unwrap();
    let planned = pol.plan.planned_shortage();
    let executed = rollout_world(world, &mut pol, 1, 1.0)
        .unwrap()
        .total_shortage;
    (best, planned, executed)
}

#[test]
fn flow_plan_matches_exhaustive_search_on_tiny_grid() {
    let grid = tiny_grid();
    assert!(grid.len() >= 200);
    for (i, (t, p)) in grid.iter().enumerate() {
        let (best, planned, executed) = check_against_brute_force(t, p);
        assert_eq!(planned, best, "instance {i}");
        assert_eq!(executed, planned, "instance {i}");
    }
}

#[test]
fn flow_plan_matches_exhaustive_search_on_random_tiny_instances() {
    for seed in 0..1000 {
        let (t, p) = random_tiny_instance(seed);
        let (best, planned, executed) = check_against_brute_force(&t, &p);
        assert_eq!(planned, best, "seed {seed}");
        assert_eq!(executed, planned, "seed {seed}");
    }
}

#[test]
fn consistent_plans_execute_exactly() {
    let mut consistent = 0;
    for seed in 0..200 {
        let (t, p) = random_small_instance(seed);
        let world = World::new(&t, &p).unwrap();
        let mut pol = or_policy_world(&world, 0.0, &mut rng_from(0)).unwrap();
        let plan = pol.plan.clone();
        let m = rollout_world(world, &mut pol, 1, 1.0).unwrap();
        // Without noise the episode is the forecast world, so the replayed
        // value is what execution gets.
        assert_eq!(m.fulfilled(), plan.expected_objective, "seed {seed}");
        if plan.consistent {
            consistent += 1;
            assert_eq!(m.total_shortage, plan.planned_shortage(), "seed {seed}");
            assert_eq!(pol.divergences, 0);
        }
    }
    assert!(consistent >= 190, "{consistent} consistent plans");
}

#[test]
fn network_size_follows_the_forecast() {
    let t = gen_topology(Shape::Desk, 2);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let start = PlanningStart::cold(&world);
    let f = make_forecast(&world, &start, 30, 0.2, &mut rng_from(4));
    let served: Vec<i64> = f.demands.iter().map(DemandForecast::rounded).collect();
    let empties: Vec<Vec<i64>> = f.arrivals.iter().map(|a| vec![0; a.len()]).collect();
    let laden = route_laden(&world, &start, &f, &served, &empties);
    let net = build_flow_network(&world, &start, &f, &laden, &vec![0; f.demands.len()]).unwrap();
    // 4 ports, 30 days, 6 pairs ordering every day.
    let calls: usize = f.arrivals.iter().map(Vec::len).sum();
    assert_eq!(f.demands.len(), 6 * 30);
    assert_eq!(net.n_nodes, 5 * 4 * 30 + 4 + calls + 180 + 1);
    assert_eq!(
        net.arcs.len(),
        6 * 4 * 30 + 4 + 4 * calls + 2 * 180 + laden.chunks.len()
    );
    assert_eq!(net.supplies.iter().sum::<i64>(), 0);
}

#[test]
fn lone_port_network_only_carries_stock() {
    let t = Topology {
        name: "lone".into(),
        ports: vec![Port {
            id: "P".into(),
            capacity: 5,
            initial_stock: 3,
            handling_cap: None,
        }],
        routes: vec![],
        vessels: vec![],
        order_model: OrderModel {
            pairs: vec![],
            sail_days: vec![],
        },
        empty_return_delay: 0,
        horizon: 3,
    };
    let world = World::new(&t, &FleetConfiguration::new(vec![])).unwrap();
    let start = PlanningStart::cold(&world);
    let f = make_forecast(&world, &start, 3, 0.0, &mut rng_from(0));
    let laden = route_laden(&world, &start, &f, &[], &[]);
    let net = build_flow_network(&world, &start, &f, &laden, &[]).unwrap();
    assert!(net.arcs.iter().all(|a| matches!(
        a.kind,
        ArcKind::Stock
            | ArcKind::Unused
            | ArcKind::Release
            | ArcKind::PoolCarry
            | ArcKind::Matured
            | ArcKind::Carry
            | ArcKind::End
    )));
    assert_eq!(solve_min_cost_flow(&net).unwrap().objective, 0);
}

#[test]
fn one_order_with_enough_stock_is_served_in_full() {
    let mut t = planted_topology();
    make_deterministic(&mut t);
    t.horizon = 1;
    t.order_model.pairs.truncate(1);
    t.order_model.pairs[0].base_volume = 5.0;
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let start = PlanningStart::cold(&world);
    let f = make_forecast(&world, &start, 1, 0.0, &mut rng_from(0));
    assert_eq!(f.total_demand(), 5);
    let plan = plan_window(&SimState::init(Arc::clone(&world), 0), &f).unwrap();
    assert_eq!(plan.planned_objective, 5);
}

#[test]
fn plan_moves_are_load_minus_discharge() {
    let call = CallArcs {
        vessel: 0,
        ordinal: 0,
        day: 0,
        port: 0,
        load: 0,
        discharge: 1,
        leg: 2,
        spill: 3,
    };
    let net = FlowNetwork {
        calls: vec![call],
        ..FlowNetwork::default()
    };
    let plan = extract_plan(
        &net,
        &McfSolution {
            flows: vec![4, 0, 4, 0],
            objective: 0,
        },
    );
    assert_eq!(plan.delta(0, 0), Some(4));
    let plan = extract_plan(
        &net,
        &McfSolution {
            flows: vec![3, 3, 0, 0],
            objective: 0,
        },
    );
    assert_eq!(plan.delta(0, 0), Some(0));
}

#[test]
fn noiseless_forecast_is_the_mean_and_the_nominal_schedule() {
    let t = gen_topology(Shape::Desk, 1);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let start = PlanningStart::cold(&world);
    let f = make_forecast(&world, &start, t.horizon, 0.0, &mut rng_from(0));
    for d in &f.demands {
        assert_eq!(
            d.quantity,
            world.layout.pairs[d.pair].model.clipped_mean(d.day)
        );
    }
    for (v, calls) in f.arrivals.iter().enumerate() {
        let route = world.vessel_route(v);
        let (mut stop, mut day) = (world.deployment.start[v], 0u32);
        for c in calls {
            assert_eq!((c.port, c.day), (route.stops[stop], day));
            day += route.legs[stop] as u32;
            stop = (stop + 1) % route.stops.len();
        }
        assert!(day >= t.horizon);
    }
}

#[test]
fn noisy_forecast_stays_within_its_level() {
    let t = gen_topology(Shape::Desk, 1);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let start = PlanningStart::cold(&world);
    for seed in 0..20 {
        let f = make_forecast(&world, &start, t.horizon, 0.2, &mut rng_from(seed));
        for d in &f.demands {
            let mean = world.layout.pairs[d.pair].model.clipped_mean(d.day);
            assert!((d.quantity - mean).abs() <= 0.2 * mean + 1e-9);
        }
    }
}

#[test]
fn single_window_replanning_is_the_one_shot_plan() {
    let mut t = gen_topology(Shape::Desk, 0);
    make_deterministic(&mut t);
    let p = FleetConfiguration::round_robin(&t);
    let world = World::new(&t, &p).unwrap();
    let h = t.horizon;
    let mut or = or_policy_world(&world, 0.0, &mut rng_from(0)).unwrap();
    let mut ori = ori_policy(&t, &p, h, h, 0.0, rng_from(0)).unwrap();
    let a = rollout_world(Arc::clone(&world), &mut or, 3, 1.0).unwrap();
    let b = rollout_world(Arc::clone(&world), &mut ori, 3, 1.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(ori.replans, 1);
}

#[test]
fn short_windows_replan_every_block() {
    let t = gen_topology(Shape::Desk, 0);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let mut ori = OriPolicy::new(Arc::clone(&world), 20, 60, 0.2, rng_from(1)).unwrap();
    rollout_world(world, &mut ori, 0, 1.0).unwrap();
    assert_eq!(ori.replans, 3);
    assert_eq!(ori.failures, 0);
    assert!(ori_policy(
        &t,
        &FleetConfiguration::round_robin(&t),
        0,
        60,
        0.2,
        rng_from(1)
    )
    .is_err());
}

#[test]
fn zero_demand_has_zero_objective() {
    let mut t = gen_topology(Shape::Desk, 0);
    for p in &mut t.order_model.pairs {
        p.base_volume = 0.0;
        p.periods.clear();
    }
    let p = FleetConfiguration::round_robin(&t);
    let world = World::new(&t, &p).unwrap();
    let f = make_forecast(
        &world,
        &PlanningStart::cold(&world),
        t.horizon,
        0.0,
        &mut rng_from(0),
    );
    assert_eq!(plan_objective(&t, &p, &f).unwrap(), 0);
}

#[test]
fn idle_demand_route_is_served_from_stock_alone() {
    let t = planted_topology();
    let p = FleetConfiguration::all_on(&t, "B").unwrap();
    let world = World::new(&t, &p).unwrap();
    let f = make_forecast(
        &world,
        &PlanningStart::cold(&world),
        t.horizon,
        0.0,
        &mut rng_from(0),
    );
    // No vessel carries laden on A, so nothing returns and each origin
    // serves at most its initial stock.
    let expected: i64 = t
        .ports
        .iter()
        .enumerate()
        .map(|(h, port)| {
            let demand: i64 = f
                .demands
                .iter()
                .filter(|d| d.origin == h)
                .map(DemandForecast::rounded)
                .sum();
            demand.min(port.initial_stock)
        })
        .sum();
    assert_eq!(plan_objective(&t, &p, &f).unwrap(), expected);
}

#[test]
fn noisy_plans_overpromise_on_average() {
    let t = gen_topology(Shape::Desk, 0);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let (mut planned, mut executed) = (0.0, 0.0);
    for seed in 0..10 {
        let mut pol = or_policy_world(&world, 0.5, &mut stream(seed, 3)).unwrap();
        planned += 1.0 - pol.plan.planned_shortage() as f64 / pol.plan.planned_demand as f64;
        let m = rollout_world(Arc::clone(&world), &mut pol, seed, 1.0).unwrap();
        executed += 1.0 - m.total_shortage as f64 / m.total_demand as f64;
    }
    assert!(executed <= planned, "executed {executed} planned {planned}");
}

#[test]
fn plan_text_round_trips() {
    let t = gen_topology(Shape::Desk, 0);
    let world = World::new(&t, &FleetConfiguration::round_robin(&t)).unwrap();
    let pol = or_policy_world(&world, 0.2, &mut rng_from(5)).unwrap();
    let text = plan_to_text(&pol.plan, &world.layout);
    let back = parse_plan_text(&text, &world.layout).unwrap();
    assert_eq!(back.moves, pol.plan.moves);
    assert_eq!(back.planned_objective, pol.plan.planned_objective);
    assert!(parse_plan_text("vessel,call\n", &world.layout).is_err());
    let bad = text.replacen("V0,", "V9,", 1);
    let err = parse_plan_text(&bad, &world.layout)
        .unwrap_err()
        .to_string();
    assert!(err.contains("unknown vessel \"V9\""), "{err}");
}
