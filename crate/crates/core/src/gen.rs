//! Bundled reference topologies: a desk-scale network, two synthetic
//! stand-ins with the published world-wide network sizes, and a two-route
//! instance whose best deployment is known in advance.

use crate::domain::{
    Assignment, FleetConfiguration, OrderModel, OrderPair, Period, Port, Route, SpeedNoise,
    Topology, VesselSpec,
};
use crate::seed::stream;
use rand::seq::SliceRandom;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Desk,
    Wwt1,
    Wwt2,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Desk, Shape::Wwt1, Shape::Wwt2];

    /// `(ports, routes, vessels, horizon)`.
    pub fn counts(self) -> (usize, usize, usize, u32) {
        match self {
            Shape::Desk => (4, 2, 3, 60),
            Shape::Wwt1 => (22, 13, 46, 400),
            Shape::Wwt2 => (22, 6, 46, 200),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Desk => "desk",
            Shape::Wwt1 => "wwt1",
            Shape::Wwt2 => "wwt2",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Shape::Desk),
            "wwt1" | "wwt1-shaped" => Ok(Shape::Wwt1),
            "wwt2" | "wwt2-shaped" => Ok(Shape::Wwt2),
            _ => Err(format!(
                "unknown topology shape \"{s}\" (expected desk, wwt1 or wwt2)"
            )),
        }
    }
}

pub fn gen_topology(shape: Shape, seed: u64) -> Topology {
    match shape {
        Shape::Desk => desk(seed),
        Shape::Wwt1 | Shape::Wwt2 => world_wide(shape, seed),
    }
}

fn port(id: &str, capacity: i64, initial_stock: i64) -> Port {
    Port {
        id: id.into(),
        capacity,
        initial_stock,
        handling_cap: None,
    }
}

fn route(id: &str, stops: &[&str], legs: &[f64]) -> Route {
    Route {
        id: id.into(),
        stops: stops.iter().map(|s| s.to_string()).collect(),
        leg_distances: legs.to_vec(),
    }
}

fn vessel(id: String, capacity: i64, sigma: f64) -> VesselSpec {
    VesselSpec {
        id,
        capacity,
        speed_noise: SpeedNoise { sigma },
    }
}

fn pair(
    origin: &str,
    destination: &str,
    base_volume: f64,
    periods: Vec<Period>,
    noise_cv: f64,
) -> OrderPair {
    OrderPair {
        origin: origin.into(),
        destination: destination.into(),
        base_volume,
        periods,
        noise_cv,
    }
}

fn waves<R: Rng>(rng: &mut R, n: usize, max_amplitude: f64) -> Vec<Period> {
    (0..n)
        .map(|_| Period {
            amplitude: (rng.random_range(0.3..1.0) * max_amplitude / n as f64 * 1e3).round() / 1e3,
            period_days: f64::from(rng.random_range(7u32..=60)),
            phase: (rng.random_range(0.0..std::f64::consts::TAU) * 1e3).round() / 1e3,
        })
        .collect()
}

/// Four ports on two routes. The trunk `A` links one exporter with two
/// importers; the feeder `B` serves a small side port. Deployment matters:
/// vessels away from the trunk leave the exporter short of empties. Stocks
/// are tight enough that no policy serves everything.
fn desk(seed: u64) -> Topology {
    let mut rng = stream(seed, 0);
    let mut p = |o: &str, d: &str, v: f64| pair(o, d, v, waves(&mut rng, 2, 0.4), 0.2);
    let pairs = vec![
        p("P0", "P1", 6.0),
        p("P0", "P2", 5.0),
        p("P1", "P0", 2.0),
        p("P2", "P0", 2.0),
        p("P2", "P3", 1.0),
        p("P3", "P2", 2.0),
    ];
    Topology {
        name: "desk".into(),
        ports: vec![
            port("P0", 300, 75),
            port("P1", 200, 40),
            port("P2", 200, 40),
            port("P3", 100, 20),
        ],
        routes: vec![
            route("A", &["P0", "P1", "P2"], &[2.0, 2.0, 3.0]),
            route("B", &["P2", "P3"], &[3.0, 3.0]),
        ],
        vessels: (0..3).map(|i| vessel(format!("V{i}"), 60, 0.1)).collect(),
        order_model: OrderModel {
            pairs,
            sail_days: Vec::new(),
        },
        empty_return_delay: 2,
        horizon: 60,
    }
}

/// Random cyclic routes over 22 ports with seeded demand waves. Every port
/// is on at least one route and demand only links ports that share one.
fn world_wide(shape: Shape, seed: u64) -> Topology {
    let (n_ports, n_routes, n_vessels, horizon) = shape.counts();
    let mut rng = stream(seed, u64::from(horizon));
    let ids: Vec<String> = (0..n_ports).map(|i| format!("H{i:02}")).collect();

    let mut uncovered: Vec<usize> = (0..n_ports).collect();
    uncovered.shuffle(&mut rng);
    let mut routes = Vec::with_capacity(n_routes);
    for r in 0..n_routes {
        let len = rng.random_range(3..=6usize);
        let mut stops: Vec<usize> = Vec::with_capacity(len);
        // Spread the uncovered ports over the remaining routes first.
        let quota = uncovered.len().div_ceil(n_routes - r).min(len);
        stops.extend(uncovered.drain(..quota));
        while stops.len() < len {
            let h = rng.random_range(0..n_ports);
            if !stops.contains(&h) {
                stops.push(h);
            }
        }
        stops.shuffle(&mut rng);
        let legs = (0..len)
            .map(|_| f64::from(rng.random_range(2u32..=7)))
            .collect();
        routes.push(Route {
            id: format!("R{r:02}"),
            stops: stops.iter().map(|&h| ids[h].clone()).collect(),
            leg_distances: legs,
        });
    }

    // Half the ports lean towards exporting.
    let bias: Vec<f64> = (0..n_ports).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in &routes {
        for o in &r.stops {
            for d in &r.stops {
                if o == d || !seen.insert((o.clone(), d.clone())) || rng.random_bool(0.4) {
                    continue;
                }
                let oi: usize = o[1..].parse().expect("generated id");
                let volume = (rng.random_range(0.5..2.0) * bias[oi] * 100.0).round() / 100.0;
                let n_waves = rng.random_range(1..=3);
                let periods = waves(&mut rng, n_waves, 0.5);
                pairs.push(pair(o, d, volume, periods, 0.2));
            }
        }
    }

    let ports = ids
        .iter()
        .map(|id| {
            let capacity = rng.random_range(200..=600i64);
            Port {
                id: id.clone(),
                capacity,
                initial_stock: capacity / 2,
                handling_cap: None,
            }
        })
        .collect();
    let vessels = (0..n_vessels)
        .map(|i| vessel(format!("V{i:02}"), rng.random_range(4..=12i64) * 10, 0.1))
        .collect();
    Topology {
        name: shape.name().into(),
        ports,
        routes,
        vessels,
        order_model: OrderModel {
            pairs,
            sail_days: Vec::new(),
        },
        empty_return_delay: 2,
        horizon,
    }
}

/// Route of [`planted_topology`] that carries all the demand.
pub const PLANTED_ROUTE: &str = "A";

/// Two disjoint shuttle routes and four vessels. All demand flows between
/// the ports of route `A`, one-sided enough that vessel space on `A` stays
/// binding up to four vessels, so the best deployment puts every vessel
/// there. Route `B` ports see no orders.
pub fn planted_topology() -> Topology {
    Topology {
        name: "planted".into(),
        ports: vec![
            port("A1", 600, 300),
            port("A2", 600, 100),
            port("B1", 100, 20),
            port("B2", 100, 20),
        ],
        routes: vec![
            route("A", &["A1", "A2"], &[2.0, 2.0]),
            route("B", &["B1", "B2"], &[2.0, 2.0]),
        ],
        vessels: (0..4).map(|i| vessel(format!("V{i}"), 30, 0.0)).collect(),
        order_model: OrderModel {
            pairs: vec![
                pair("A1", "A2", 24.0, Vec::new(), 0.1),
                pair("A2", "A1", 4.0, Vec::new(), 0.1),
            ],
            sail_days: Vec::new(),
        },
        empty_return_delay: 1,
        horizon: 60,
    }
}

/// Remove every source of randomness: order noise and speed noise.
pub fn make_deterministic(t: &mut Topology) {
    for p in &mut t.order_model.pairs {
        p.noise_cv = 0.0;
    }
    for v in &mut t.vessels {
        v.speed_noise.sigma = 0.0;
    }
}

fn one_vessel(start: &str) -> FleetConfiguration {
    FleetConfiguration::new(vec![Assignment {
        vessel: "v".into(),
        route: "r".into(),
        start_port: start.into(),
    }])
}

/// Deterministic two-port shuttles with one vessel, every combination of
/// 4 or 6 days, port capacities up to 3, three stock levels, vessel
/// capacity 1 or 3, two leg patterns, two demand levels, return delay 1 or
/// 2 and both start ports: 576 instances.
pub fn tiny_grid() -> Vec<(Topology, FleetConfiguration)> {
    let mut out = Vec::new();
    for days in [4, 6] {
        for caps in [(1, 3), (3, 2), (3, 3)] {
            for stock in [(0, caps.1), (caps.0, 0), (1, 1)] {
                for vcap in [1, 3] {
                    for legs in [[1.0, 1.0], [2.0, 1.0]] {
                        for vol in [(1.0, 0.0), (2.0, 1.0)] {
                            for delay in [1, 2] {
                                for start in ["A", "B"] {
                                    let t = Topology {
                                        name: "tiny".into(),
                                        ports: vec![
                                            port("A", caps.0, stock.0),
                                            port("B", caps.1, stock.1),
                                        ],
                                        routes: vec![route("r", &["A", "B"], &legs)],
                                        vessels: vec![vessel("v".into(), vcap, 0.0)],
                                        order_model: OrderModel {
                                            pairs: vec![
                                                pair("A", "B", vol.0, Vec::new(), 0.0),
                                                pair("B", "A", vol.1, Vec::new(), 0.0),
                                            ],
                                            sail_days: Vec::new(),
                                        },
                                        empty_return_delay: delay,
                                        horizon: days,
                                    };
                                    out.push((t, one_vessel(start)));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// A random deterministic two-port shuttle with one vessel, at most 6
/// days and capacities at most 3, sometimes with a handling limit and a
/// demand wave.
pub fn random_tiny_instance(seed: u64) -> (Topology, FleetConfiguration) {
    let mut rng = stream(seed, 40);
    let (ca, cb) = (rng.random_range(1..=3), rng.random_range(1..=3));
    let mut a = port("A", ca, rng.random_range(0..=ca));
    if rng.random_bool(0.3) {
        a.handling_cap = Some(1);
    }
    let b = port("B", cb, rng.random_range(0..=cb));
    let legs = [
        rng.random_range(1..=3) as f64,
        rng.random_range(1..=2) as f64,
    ];
    let mut ab = pair("A", "B", rng.random_range(0..=3) as f64, Vec::new(), 0.0);
    if rng.random_bool(0.3) {
        ab.periods.push(Period {
            amplitude: 1.5,
            period_days: 3.0,
            phase: 0.0,
        });
    }
    let ba = pair("B", "A", rng.random_range(0..=2) as f64, Vec::new(), 0.0);
    let t = Topology {
        name: "tiny".into(),
        ports: vec![a, b],
        routes: vec![route("r", &["A", "B"], &legs)],
        vessels: vec![vessel("v".into(), rng.random_range(1..=3), 0.0)],
        order_model: OrderModel {
            pairs: vec![ab, ba],
            sail_days: Vec::new(),
        },
        empty_return_delay: rng.random_range(0..=2),
        horizon: rng.random_range(1..=6),
    };
    let start = if rng.random_bool(0.5) { "A" } else { "B" };
    (t, one_vessel(start))
}

/// A random deterministic network: 3 or 4 ports, a loop through all of
/// them and a shorter reversed loop, 1 to 3 vessels, 10 to 40 days.
pub fn random_small_instance(seed: u64) -> (Topology, FleetConfiguration) {
    let mut rng = stream(seed, 41);
    let np = rng.random_range(3..=4);
    let ids: Vec<String> = (0..np).map(|k| format!("P{k}")).collect();
    let ports = ids
        .iter()
        .map(|id| {
            let c = rng.random_range(5..=20);
            let mut p = port(id, c, rng.random_range(0..=c));
            if rng.random_bool(0.2) {
                p.handling_cap = Some(3);
            }
            p
        })
        .collect();
    let mut routes = Vec::new();
    for r in 0..2 {
        let mut stops = ids.clone();
        if r == 1 {
            stops.reverse();
            stops.truncate(rng.random_range(2..=np));
        }
        let legs = stops
            .iter()
            .map(|_| rng.random_range(1..=4) as f64)
            .collect();
        routes.push(Route {
            id: format!("R{r}"),
            stops,
            leg_distances: legs,
        });
    }
    let vessels: Vec<VesselSpec> = (0..rng.random_range(1..=3))
        .map(|k| vessel(format!("V{k}"), rng.random_range(3..=12), 0.0))
        .collect();
    let mut pairs = Vec::new();
    for o in &ids {
        for d in &ids {
            if o != d && rng.random_bool(0.6) {
                let wave = Period {
                    amplitude: rng.random_range(0.0..2.0),
                    period_days: 7.0,
                    phase: 0.0,
                };
                pairs.push(pair(o, d, rng.random_range(0.0..4.0), vec![wave], 0.0));
            }
        }
    }
    let assignments = vessels
        .iter()
        .map(|v| {
            let r: &Route = &routes[rng.random_range(0..2)];
            Assignment {
                vessel: v.id.clone(),
                route: r.id.clone(),
                start_port: r.stops[rng.random_range(0..r.stops.len())].clone(),
            }
        })
        .collect();
    let t = Topology {
        name: "small".into(),
        ports,
        routes,
        vessels,
        order_model: OrderModel {
            pairs,
            sail_days: Vec::new(),
        },
        empty_return_delay: rng.random_range(0..=3),
        horizon: rng.random_range(10..=40),
    };
    (t, FleetConfiguration::new(assignments))
}
