use super::{validate_configuration, validate_topology, FleetConfiguration, OrderPair, Topology};
use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct PortInfo {
    pub capacity: i64,
    pub initial_stock: i64,
    pub handling_cap: i64,
}

#[derive(Debug, Clone)]
pub struct RouteInfo {
    pub stops: Vec<usize>,
    pub legs: Vec<f64>,
}

impl RouteInfo {
    pub fn position(&self, port: usize) -> Option<usize> {
        self.stops.iter().position(|&s| s == port)
    }

    pub fn visits(&self, port: usize) -> bool {
        self.stops.contains(&port)
    }
}

#[derive(Debug, Clone)]
pub struct VesselInfo {
    pub capacity: i64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct PairInfo {
    pub origin: usize,
    pub destination: usize,
    pub model: OrderPair,
}

/// Index-based view of a validated [`Topology`]. Ports, routes and vessels
/// keep their declaration order.
#[derive(Debug, Clone)]
pub struct Layout {
    pub ports: Vec<PortInfo>,
    pub routes: Vec<RouteInfo>,
    pub vessels: Vec<VesselInfo>,
    pub pairs: Vec<PairInfo>,
    pub horizon: u32,
    pub return_delay: u32,
    pub port_ids: Vec<String>,
    pub route_ids: Vec<String>,
    pub vessel_ids: Vec<String>,
    port_index: HashMap<String, usize>,
    route_index: HashMap<String, usize>,
    vessel_index: HashMap<String, usize>,
}

impl Layout {
    pub fn new(t: &Topology) -> Result<Self> {
        let report = validate_topology(t);
        if !report.ok {
            return Err(Error::InvalidTopology(report.summary()));
        }
        let port_index: HashMap<String, usize> = t
            .ports
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let route_index = t
            .routes
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        let vessel_index = t
            .vessels
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        Ok(Layout {
            ports: t
                .ports
                .iter()
                .map(|p| PortInfo {
                    capacity: p.capacity,
                    initial_stock: p.initial_stock,
                    handling_cap: p.handling_cap.unwrap_or(i64::MAX),
                })
                .collect(),
            routes: t
                .routes
                .iter()
                .map(|r| RouteInfo {
                    stops: r.stops.iter().map(|s| port_index[s]).collect(),
                    legs: r.leg_distances.clone(),
                })
                .collect(),
            vessels: t
                .vessels
                .iter()
                .map(|v| VesselInfo {
                    capacity: v.capacity,
                    sigma: v.speed_noise.sigma,
                })
                .collect(),
            pairs: t
                .order_model
                .pairs
                .iter()
                .map(|p| PairInfo {
                    origin: port_index[&p.origin],
                    destination: port_index[&p.destination],
                    model: p.clone(),
                })
                .collect(),
            horizon: t.horizon,
            return_delay: t.empty_return_delay,
            port_ids: t.ports.iter().map(|p| p.id.clone()).collect(),
            route_ids: t.routes.iter().map(|r| r.id.clone()).collect(),
            vessel_ids: t.vessels.iter().map(|v| v.id.clone()).collect(),
            port_index,
            route_index,
            vessel_index,
        })
    }

    pub fn port(&self, id: &str) -> Option<usize> {
        self.port_index.get(id).copied()
    }

    pub fn route(&self, id: &str) -> Option<usize> {
        self.route_index.get(id).copied()
    }

    pub fn vessel(&self, id: &str) -> Option<usize> {
        self.vessel_index.get(id).copied()
    }

    /// Days between a laden discharge and the containers joining port stock.
    pub fn maturity_lag(&self) -> u32 {
        self.return_delay.max(1)
    }

    pub fn total_initial_stock(&self) -> i64 {
        self.ports.iter().map(|p| p.initial_stock).sum()
    }

    /// Resolve a configuration against this layout.
    pub fn deploy(&self, t: &Topology, p: &FleetConfiguration) -> Result<Deployment> {
        let report = validate_configuration(t, p);
        if !report.ok {
            return Err(Error::InvalidConfiguration(report.summary()));
        }
        let mut route = vec![0; self.vessels.len()];
        let mut start = vec![0; self.vessels.len()];
        for a in &p.assignments {
            let v = self.vessel_index[&a.vessel];
            let r = self.route_index[&a.route];
            route[v] = r;
            start[v] = self.routes[r]
                .position(self.port_index[&a.start_port])
                .expect("validated start port");
        }
        Ok(Deployment { route, start })
    }

    /// Inverse of [`Layout::deploy`].
    pub fn configuration(&self, d: &Deployment) -> FleetConfiguration {
        FleetConfiguration::new(
            (0..self.vessels.len())
                .map(|v| {
                    let r = d.route[v];
                    super::Assignment {
                        vessel: self.vessel_ids[v].clone(),
                        route: self.route_ids[r].clone(),
                        start_port: self.port_ids[self.routes[r].stops[d.start[v]]].clone(),
                    }
                })
                .collect(),
        )
    }
}

/// Per-vessel route index and starting stop position on that route.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Deployment {
    pub route: Vec<usize>,
    pub start: Vec<usize>,
}
