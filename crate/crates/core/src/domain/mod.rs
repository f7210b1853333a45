//! World description and fleet configuration.
//!
//! A [`Topology`] is the immutable description of ports, cyclic routes,
//! vessels and the order model. A [`FleetConfiguration`] deploys every
//! vessel on one route, starting at one of that route's stops. Nothing in
//! here is validated on construction; [`validate_topology`] and
//! [`validate_configuration`] report every problem at once.

mod io;
mod layout;

pub use io::{read_file, CONFIG_SCHEMA_VERSION, TOPOLOGY_SCHEMA_VERSION};
pub use layout::{Deployment, Layout, PairInfo, PortInfo, RouteInfo, VesselInfo};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: String,
    pub capacity: i64,
    pub initial_stock: i64,
    /// Max containers moved per vessel call; `None` is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handling_cap: Option<i64>,
}

/// A cyclic route. Each stop is listed once; after the last stop the
/// vessel sails back to the first. `leg_distances[i]` is the nominal
/// number of sailing days from `stops[i]` to `stops[(i + 1) % n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub stops: Vec<String>,
    pub leg_distances: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedNoise {
    /// Travel-time multiplier is uniform on `[1 - sigma, 1 + sigma]`.
    pub sigma: f64,
}

impl Default for SpeedNoise {
    fn default() -> Self {
        Self { sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSpec {
    pub id: String,
    pub capacity: i64,
    #[serde(default)]
    pub speed_noise: SpeedNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub amplitude: f64,
    pub period_days: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPair {
    pub origin: String,
    pub destination: String,
    pub base_volume: f64,
    #[serde(default)]
    pub periods: Vec<Period>,
    #[serde(default)]
    pub noise_cv: f64,
}

impl OrderPair {
    /// Mean order volume on `day` before clipping at zero.
    pub fn raw_mean(&self, day: u32) -> f64 {
        let t = f64::from(day);
        let wave: f64 = self
            .periods
            .iter()
            .map(|p| p.amplitude * (std::f64::consts::TAU * t / p.period_days + p.phase).sin())
            .sum();
        self.base_volume * (1.0 + wave)
    }

    pub fn clipped_mean(&self, day: u32) -> f64 {
        self.raw_mean(day).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SailDays {
    pub origin: String,
    pub destination: String,
    pub days: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderModel {
    pub pairs: Vec<OrderPair>,
    #[serde(default)]
    pub sail_days: Vec<SailDays>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    pub ports: Vec<Port>,
    pub routes: Vec<Route>,
    pub vessels: Vec<VesselSpec>,
    pub order_model: OrderModel,
    pub empty_return_delay: u32,
    pub horizon: u32,
}

impl Topology {
    pub fn port(&self, id: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.id == id)
    }

    pub fn route(&self, id: &str) -> Option<&Route> {
        self.routes.iter().find(|r| r.id == id)
    }

    pub fn vessel(&self, id: &str) -> Option<&VesselSpec> {
        self.vessels.iter().find(|v| v.id == id)
    }

    /// Stable 64-bit fingerprint of the serialized topology.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the canonical text form.
        let text = self.to_yaml_string();
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
    }
}

/// One `(vessel, route, start_port)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub vessel: String,
    pub route: String,
    pub start_port: String,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.vessel, self.route, self.start_port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FleetConfiguration {
    pub assignments: Vec<Assignment>,
}

impl FleetConfiguration {
    pub fn new(mut assignments: Vec<Assignment>) -> Self {
        assignments.sort();
        Self { assignments }
    }

    pub fn get(&self, vessel: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.vessel == vessel)
    }

    /// Vessel `i` goes to route `i mod |E|`, starting at its first stop.
    pub fn round_robin(t: &Topology) -> Self {
        let assignments = t
            .vessels
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let r = t.routes.get(i % t.routes.len().max(1))?;
                Some(Assignment {
                    vessel: v.id.clone(),
                    route: r.id.clone(),
                    start_port: r.stops.first()?.clone(),
                })
            })
            .collect();
        Self::new(assignments)
    }

    /// Every vessel on `route`, starting at its first stop.
    pub fn all_on(t: &Topology, route: &str) -> Option<Self> {
        let r = t.route(route)?;
        let first = r.stops.first()?;
        Some(Self::new(
            t.vessels
                .iter()
                .map(|v| Assignment {
                    vessel: v.id.clone(),
                    route: r.id.clone(),
                    start_port: first.clone(),
                })
                .collect(),
        ))
    }

    /// Number of vessels assigned to `route`.
    pub fn count_on(&self, route: &str) -> usize {
        self.assignments.iter().filter(|a| a.route == route).count()
    }
}

impl fmt::Display for FleetConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.assignments.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        Self { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    /// First error message joined with the total count, for diagnostics.
    pub fn summary(&self) -> String {
        let errors: Vec<&str> = self.errors().map(|i| i.message.as_str()).collect();
        match errors.len() {
            0 => "ok".to_string(),
            1 => errors[0].to_string(),
            n => format!("{} (and {} more)", errors[0], n - 1),
        }
    }
}

struct Issues(Vec<Issue>);

impl Issues {
    fn error(&mut self, message: impl Into<String>) {
        self.0.push(Issue {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.0.push(Issue {
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

fn check_unique<'a>(kind: &str, ids: impl Iterator<Item = &'a str>, issues: &mut Issues) {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            issues.error(format!("duplicate {kind} id \"{id}\""));
        }
    }
}

pub fn validate_topology(t: &Topology) -> ValidationReport {
    let mut issues = Issues(Vec::new());
    check_unique("port", t.ports.iter().map(|p| p.id.as_str()), &mut issues);
    check_unique("route", t.routes.iter().map(|r| r.id.as_str()), &mut issues);
    check_unique(
        "vessel",
        t.vessels.iter().map(|v| v.id.as_str()),
        &mut issues,
    );
    if t.horizon < 1 {
        issues.error("horizon must be at least 1 day");
    }

    let ports: HashSet<&str> = t.ports.iter().map(|p| p.id.as_str()).collect();
    for p in &t.ports {
        if p.capacity <= 0 {
            issues.error(format!("port \"{}\": capacity must be positive", p.id));
        }
        if p.initial_stock < 0 || p.initial_stock > p.capacity {
            issues.error(format!(
                "port \"{}\": initial_stock {} outside [0, {}]",
                p.id, p.initial_stock, p.capacity
            ));
        }
        if matches!(p.handling_cap, Some(c) if c <= 0) {
            issues.error(format!("port \"{}\": handling_cap must be positive", p.id));
        }
    }

    for r in &t.routes {
        if r.stops.len() < 2 {
            issues.error(format!("route \"{}\": needs at least 2 stops", r.id));
        }
        if r.leg_distances.len() != r.stops.len() {
            issues.error(format!(
                "route \"{}\": {} leg_distances for {} legs",
                r.id,
                r.leg_distances.len(),
                r.stops.len()
            ));
        }
        if r.leg_distances.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            issues.error(format!(
                "route \"{}\": leg distances must be positive",
                r.id
            ));
        }
        let mut seen = HashSet::new();
        for s in &r.stops {
            if !ports.contains(s.as_str()) {
                issues.error(format!("route \"{}\": unknown port \"{}\"", r.id, s));
            }
            if !seen.insert(s.as_str()) {
                issues.error(format!("route \"{}\": port \"{}\" listed twice", r.id, s));
            }
        }
    }

    for v in &t.vessels {
        if v.capacity < 1 {
            issues.error(format!("vessel \"{}\": capacity must be at least 1", v.id));
        }
        let s = v.speed_noise.sigma;
        if !(s.is_finite() && (0.0..1.0).contains(&s)) {
            issues.error(format!(
                "vessel \"{}\": speed_noise.sigma must lie in [0, 1)",
                v.id
            ));
        }
    }

    for (i, pair) in t.order_model.pairs.iter().enumerate() {
        let tag = format!("orders.pairs[{i}] {}->{}", pair.origin, pair.destination);
        for end in [&pair.origin, &pair.destination] {
            if !ports.contains(end.as_str()) {
                issues.error(format!("{tag}: unknown port \"{end}\""));
            }
        }
        if pair.origin == pair.destination {
            issues.error(format!("{tag}: origin equals destination"));
        }
        if !(pair.base_volume.is_finite() && pair.base_volume >= 0.0) {
            issues.error(format!("{tag}: base_volume must be non-negative"));
        }
        if !(pair.noise_cv.is_finite() && pair.noise_cv >= 0.0) {
            issues.error(format!("{tag}: noise_cv must be non-negative"));
        }
        for p in &pair.periods {
            if !(p.period_days.is_finite() && p.period_days > 0.0) {
                issues.error(format!("{tag}: period_days must be positive"));
            }
            if !(p.amplitude.is_finite() && p.phase.is_finite()) {
                issues.error(format!("{tag}: non-finite period parameters"));
            }
        }
        let total_amp: f64 = pair.periods.iter().map(|p| p.amplitude.abs()).sum();
        if total_amp > 1.0 {
            issues.warn(format!(
                "{tag}: amplitudes sum above 1, mean clipped at zero on some days"
            ));
        }
    }
    for s in &t.order_model.sail_days {
        if !ports.contains(s.origin.as_str()) || !ports.contains(s.destination.as_str()) {
            issues.error(format!(
                "orders.sail_days {}->{}: unknown port",
                s.origin, s.destination
            ));
        }
        if !(s.days.is_finite() && s.days > 0.0) {
            issues.error(format!(
                "orders.sail_days {}->{}: days must be positive",
                s.origin, s.destination
            ));
        }
    }
    if t.vessels.is_empty() {
        issues.warn("topology has no vessels");
    }
    if !t.vessels.is_empty() && t.routes.is_empty() {
        issues.error("vessels present but no routes to deploy them on");
    }

    ValidationReport::from_issues(issues.0)
}

pub fn validate_configuration(t: &Topology, p: &FleetConfiguration) -> ValidationReport {
    let mut issues = Issues(Vec::new());
    let mut count: HashMap<&str, usize> = HashMap::new();
    for a in &p.assignments {
        *count.entry(a.vessel.as_str()).or_default() += 1;
        if t.vessel(&a.vessel).is_none() {
            issues.error(format!("assignment {a}: unknown vessel \"{}\"", a.vessel));
        }
        match t.route(&a.route) {
            None => issues.error(format!("assignment {a}: unknown route \"{}\"", a.route)),
            Some(r) if !r.stops.contains(&a.start_port) => issues.error(format!(
                "assignment {a}: start port \"{}\" is not on route \"{}\"",
                a.start_port, a.route
            )),
            Some(_) => {}
        }
    }
    for v in &t.vessels {
        match count.get(v.id.as_str()) {
            None => issues.error(format!("vessel \"{}\" has no assignment", v.id)),
            Some(&n) if n > 1 => issues.error(format!("vessel \"{}\" assigned {n} times", v.id)),
            Some(_) => {}
        }
    }
    ValidationReport::from_issues(issues.0)
}

/// Every unmasked `(vessel, route, start_port)` triple for the vessels in
/// `unassigned`, in (vessel, route, stop) order.
pub fn feasible_triples(t: &Topology, unassigned: &BTreeSet<String>) -> Vec<Assignment> {
    let mut out = Vec::new();
    for v in t.vessels.iter().filter(|v| unassigned.contains(&v.id)) {
        for r in &t.routes {
            for s in &r.stops {
                out.push(Assignment {
                    vessel: v.id.clone(),
                    route: r.id.clone(),
                    start_port: s.clone(),
                });
            }
        }
    }
    out
}
