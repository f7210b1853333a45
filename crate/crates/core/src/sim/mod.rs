//! Discrete-event simulator for empty container repositioning.
//!
//! Days run from `0` to `horizon - 1`. Each day is processed in a fixed
//! order:
//!
//! 1. orders for the day are served from port stock as it stood at the end
//!    of the previous day; unmet demand is recorded as shortage and lost,
//!    served containers become laden waiting at the origin;
//! 2. matured empties in the return pool join port stock, up to capacity
//!    (the remainder stays in the pool and retries the next day);
//! 3. vessel arrivals of the day, ordered by (port index, vessel index).
//!    Laden bound for the port is discharged into the return pool and a
//!    [`DecisionPoint`] is emitted. After the action is applied, waiting
//!    laden whose destination is on the vessel's route boards first-in
//!    first-out into the remaining space and the vessel departs.
//!
//! Discharged laden rejoins port stock [`Layout::maturity_lag`] days later.

mod rollout;
mod sampling;

pub use rollout::{
    fulfillment_pct, policy_rng, rollout, rollout_world, run_episode, EpisodeMetrics,
};
pub use sampling::{sample_orders, sample_pair, sample_travel_time, travel_days};

use crate::domain::{Deployment, FleetConfiguration, Layout, Topology};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, SimRng};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::Arc;

/// Trailing window, in days, of the demand/shortage summary in observations.
pub const OBSERVATION_WINDOW: u32 = 7;

/// A topology resolved together with one fleet configuration.
#[derive(Debug, Clone)]
pub struct World {
    pub layout: Layout,
    pub deployment: Deployment,
}

impl World {
    pub fn new(t: &Topology, p: &FleetConfiguration) -> Result<Arc<Self>> {
        let layout = Layout::new(t)?;
        let deployment = layout.deploy(t, p)?;
        Ok(Arc::new(World { layout, deployment }))
    }

    pub fn from_parts(layout: Layout, deployment: Deployment) -> Arc<Self> {
        Arc::new(World { layout, deployment })
    }

    pub fn vessel_route(&self, v: usize) -> &crate::domain::RouteInfo {
        &self.layout.routes[self.deployment.route[v]]
    }
}

/// What a port agent sees when a vessel calls. Nothing about other ports.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub port_stock: i64,
    pub port_capacity: i64,
    pub vessel_empties: i64,
    pub vessel_free_space: i64,
    pub recent_demand: i64,
    pub recent_shortage: i64,
    pub day: u32,
    pub horizon: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    /// Monotone counter identifying this decision within the episode.
    pub seq: u64,
    pub vessel: usize,
    pub port: usize,
    pub day: u32,
    /// Zero-based ordinal of this arrival among the vessel's calls.
    pub call: u32,
    pub observation: Observation,
    /// Most negative (discharge) and most positive (load) applicable delta.
    pub feasible: (i64, i64),
}

impl DecisionPoint {
    pub fn clamp(&self, delta: i64) -> i64 {
        delta.clamp(self.feasible.0, self.feasible.1)
    }
}

/// Positive loads empties from the port onto the vessel, negative
/// discharges empties from the vessel into the port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RepositionAction {
    pub delta: i64,
}

impl RepositionAction {
    pub fn new(delta: i64) -> Self {
        Self { delta }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Decision(DecisionPoint),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VesselState {
    /// Position on the route of the port the vessel is at or sailing to.
    pub stop: usize,
    pub at_port: bool,
    pub next_arrival: u32,
    pub last_departure: Option<u32>,
    /// Arrivals processed so far.
    pub calls: u32,
    pub empties: i64,
    /// Laden aboard, indexed by destination port.
    pub laden: Vec<i64>,
}

impl VesselState {
    pub fn laden_total(&self) -> i64 {
        self.laden.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Laden {
    pub destination: usize,
    pub quantity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub day: u32,
    pub port: usize,
    pub stock: i64,
    pub demand: i64,
    pub fulfilled: i64,
    pub shortage: i64,
}

pub const TRACE_HEADER: &str = "day,port,stock,demand,fulfilled,shortage";

/// Fixed dynamics replacing the random streams, used to replay plans in a
/// world that behaves exactly like a forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub first_day: u32,
    /// `[day - first_day][pair]` order quantities.
    pub orders: Vec<Vec<i64>>,
    /// Per vessel, the days of its future arrivals in order.
    pub arrivals: Vec<Vec<u32>>,
    /// The replay stops at this day.
    pub end_day: u32,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Dynamics {
    Random {
        orders: SimRng,
        travel: SimRng,
    },
    Scripted {
        script: Arc<Script>,
        next_arrival: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct SimState {
    world: Arc<World>,
    day: u32,
    day_started: bool,
    port_stock: Vec<i64>,
    vessels: Vec<VesselState>,
    waiting: Vec<VecDeque<Laden>>,
    /// (release day, port) -> empties waiting to rejoin stock.
    pool: BTreeMap<(u32, usize), i64>,
    arrivals: BinaryHeap<Reverse<(u32, usize, usize)>>,
    pending: Option<DecisionPoint>,
    next_seq: u64,
    dynamics: Dynamics,
    end_day: u32,
    initial_total: i64,
    demand: Vec<Vec<i64>>,
    /// `[pair][day]` orders served.
    served: Vec<Vec<i64>>,
    shortage: Vec<Vec<i64>>,
    accrued_shortage: i64,
    trace: Option<Vec<TraceRecord>>,
}

impl SimState {
    pub fn new(t: &Topology, p: &FleetConfiguration, seed: u64) -> Result<Self> {
        Ok(Self::init(World::new(t, p)?, seed))
    }

    /// Fresh episode: every vessel at its start port with nothing aboard,
    /// first arrival at day 0.
    pub fn init(world: Arc<World>, seed: u64) -> Self {
        let layout = &world.layout;
        let n_ports = layout.ports.len();
        let horizon = layout.horizon as usize;
        let mut arrivals = BinaryHeap::new();
        let vessels = (0..layout.vessels.len())
            .map(|v| {
                let stop = world.deployment.start[v];
                let port = world.vessel_route(v).stops[stop];
                arrivals.push(Reverse((0, port, v)));
                VesselState {
                    stop,
                    at_port: false,
                    next_arrival: 0,
                    last_departure: None,
                    calls: 0,
                    empties: 0,
                    laden: vec![0; n_ports],
                }
            })
            .collect();
        let port_stock: Vec<i64> = layout.ports.iter().map(|p| p.initial_stock).collect();
        SimState {
            day: 0,
            day_started: false,
            initial_total: port_stock.iter().sum(),
            port_stock,
            vessels,
            waiting: vec![VecDeque::new(); n_ports],
            pool: BTreeMap::new(),
            arrivals,
            pending: None,
            next_seq: 0,
            dynamics: Dynamics::Random {
                orders: rng_from(derive_seed(seed, 0)),
                travel: rng_from(derive_seed(seed, 1)),
            },
            end_day: layout.horizon,
            demand: vec![vec![0; horizon]; n_ports],
            served: vec![vec![0; horizon]; layout.pairs.len()],
            shortage: vec![vec![0; horizon]; n_ports],
            accrued_shortage: 0,
            trace: None,
            world,
        }
    }

    /// A copy of this state whose future follows `script` instead of the
    /// random streams. Vessels at sea are rescheduled to their first
    /// scripted arrival; a vessel at port keeps its current call.
    pub fn with_script(&self, script: Script) -> Self {
        let mut s = self.clone();
        let horizon = s.world.layout.horizon;
        s.end_day = script.end_day.min(horizon);
        s.arrivals.clear();
        let mut next_arrival = vec![0; s.vessels.len()];
        let world = Arc::clone(&s.world);
        for (v, vessel) in s.vessels.iter_mut().enumerate() {
            if vessel.at_port {
                let skip = script.arrivals[v].first() == Some(&s.day);
                next_arrival[v] = usize::from(skip);
                continue;
            }
            match script.arrivals[v].first() {
                Some(&day) => {
                    vessel.next_arrival = day;
                    next_arrival[v] = 1;
                    s.arrivals
                        .push(Reverse((day, world.vessel_route(v).stops[vessel.stop], v)));
                }
                None => vessel.next_arrival = horizon,
            }
        }
        s.dynamics = Dynamics::Scripted {
            script: Arc::new(script),
            next_arrival,
        };
        s
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn layout(&self) -> &Layout {
        &self.world.layout
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    /// Whether orders and maturities of the current day are already done.
    pub fn day_started(&self) -> bool {
        self.day_started
    }

    pub fn finished(&self) -> bool {
        self.day >= self.end_day
    }

    pub fn port_stock(&self) -> &[i64] {
        &self.port_stock
    }

    pub fn vessels(&self) -> &[VesselState] {
        &self.vessels
    }

    pub fn waiting(&self) -> &[VecDeque<Laden>] {
        &self.waiting
    }

    pub fn pool(&self) -> impl Iterator<Item = (u32, usize, i64)> + '_ {
        self.pool.iter().map(|(&(d, p), &q)| (d, p, q))
    }

    pub fn pending(&self) -> Option<&DecisionPoint> {
        self.pending.as_ref()
    }

    /// Vessels whose arrival is scheduled today and not yet processed.
    pub fn arriving_today(&self, v: usize) -> bool {
        let s = &self.vessels[v];
        !s.at_port && s.next_arrival == self.day
    }

    pub fn demand_by_port_day(&self) -> &[Vec<i64>] {
        &self.demand
    }

    pub fn shortage_by_port_day(&self) -> &[Vec<i64>] {
        &self.shortage
    }

    pub fn served_by_pair_day(&self) -> &[Vec<i64>] {
        &self.served
    }

    /// Shortage accrued since the previous call, resetting the counter.
    pub fn take_accrued_shortage(&mut self) -> i64 {
        std::mem::take(&mut self.accrued_shortage)
    }

    pub fn initial_total(&self) -> i64 {
        self.initial_total
    }

    /// Every container in the system, wherever it is.
    pub fn total_containers(&self) -> i64 {
        let stock: i64 = self.port_stock.iter().sum();
        let aboard: i64 = self
            .vessels
            .iter()
            .map(|v| v.empties + v.laden_total())
            .sum();
        let waiting: i64 = self.waiting.iter().flatten().map(|l| l.quantity).sum();
        let pool: i64 = self.pool.values().sum();
        stock + aboard + waiting + pool
    }

    pub fn check_invariants(&self) -> Result<()> {
        let layout = &self.world.layout;
        for (h, (&s, p)) in self.port_stock.iter().zip(&layout.ports).enumerate() {
            if s < 0 || s > p.capacity {
                return Err(Error::CorruptedState(format!(
                    "port {} stock {s} outside [0, {}]",
                    layout.port_ids[h], p.capacity
                )));
            }
        }
        for (v, (s, info)) in self.vessels.iter().zip(&layout.vessels).enumerate() {
            if s.empties < 0
                || s.laden.iter().any(|&l| l < 0)
                || s.empties + s.laden_total() > info.capacity
            {
                return Err(Error::CorruptedState(format!(
                    "vessel {} holds {} empties + {} laden, capacity {}",
                    layout.vessel_ids[v],
                    s.empties,
                    s.laden_total(),
                    info.capacity
                )));
            }
        }
        if self.pool.values().any(|&q| q < 0)
            || self.waiting.iter().flatten().any(|l| l.quantity < 0)
        {
            return Err(Error::CorruptedState("negative container count".into()));
        }
        let total = self.total_containers();
        if total != self.initial_total {
            return Err(Error::CorruptedState(format!(
                "conservation broken: {total} containers, expected {}",
                self.initial_total
            )));
        }
        Ok(())
    }

    /// Compact encoding of the dynamic state, ignoring random streams.
    pub fn state_key(&self) -> Vec<i64> {
        let mut key = vec![i64::from(self.day), i64::from(self.day_started)];
        key.extend(&self.port_stock);
        for v in &self.vessels {
            key.extend([
                v.stop as i64,
                i64::from(v.at_port),
                i64::from(v.next_arrival),
                v.empties,
            ]);
            key.extend(&v.laden);
        }
        for q in &self.waiting {
            key.push(-1);
            for l in q {
                key.extend([l.destination as i64, l.quantity]);
            }
        }
        for (&(d, p), &q) in &self.pool {
            key.extend([i64::from(d), p as i64, q]);
        }
        key
    }

    fn start_day(&mut self) {
        let world = Arc::clone(&self.world);
        let layout = &world.layout;
        let day = self.day;
        let d = day as usize;

        let mut available = self.port_stock.clone();
        for (i, pair) in layout.pairs.iter().enumerate() {
            let q = match &mut self.dynamics {
                Dynamics::Random { orders, .. } => sample_pair(&pair.model, day, orders),
                Dynamics::Scripted { script, .. } => day
                    .checked_sub(script.first_day)
                    .and_then(|k| script.orders.get(k as usize))
                    .map_or(0, |o| o[i]),
            };
            let served = q.min(available[pair.origin]);
            available[pair.origin] -= served;
            self.served[i][d] += served;
            self.demand[pair.origin][d] += q;
            self.shortage[pair.origin][d] += q - served;
            self.accrued_shortage += q - served;
            if served > 0 {
                let queue = &mut self.waiting[pair.origin];
                match queue.back_mut() {
                    Some(last) if last.destination == pair.destination => last.quantity += served,
                    _ => queue.push_back(Laden {
                        destination: pair.destination,
                        quantity: served,
                    }),
                }
            }
        }
        self.port_stock = available;

        let due: Vec<(u32, usize)> = self
            .pool
            .range(..=(day, usize::MAX))
            .map(|(&k, _)| k)
            .collect();
        for key in due {
            let h = key.1;
            let room = layout.ports[h].capacity - self.port_stock[h];
            let qty = self.pool[&key];
            let released = qty.min(room);
            self.port_stock[h] += released;
            if released == qty {
                self.pool.remove(&key);
            } else {
                *self.pool.get_mut(&key).expect("due key") -= released;
            }
        }
        self.day_started = true;
    }

    fn end_day(&mut self) -> Result<()> {
        if let Some(trace) = self.trace.as_mut() {
            let d = self.day as usize;
            for h in 0..self.port_stock.len() {
                let demand = self.demand[h][d];
                let shortage = self.shortage[h][d];
                trace.push(TraceRecord {
                    day: self.day,
                    port: h,
                    stock: self.port_stock[h],
                    demand,
                    fulfilled: demand - shortage,
                    shortage,
                });
            }
        }
        self.check_invariants()?;
        self.day += 1;
        self.day_started = false;
        Ok(())
    }

    /// Advance until the next vessel arrival or the end of the horizon.
    pub fn next_decision(&mut self) -> Result<Step> {
        if self.pending.is_some() {
            return Err(Error::DecisionPending);
        }
        loop {
            if self.day >= self.end_day {
                return Ok(Step::End);
            }
            if !self.day_started {
                self.start_day();
            }
            match self.arrivals.peek() {
                Some(Reverse((d, _, _))) if *d < self.day => {
                    return Err(Error::CorruptedState(format!("arrival at day {d} missed")));
                }
                Some(Reverse((d, _, _))) if *d == self.day => {
                    let Reverse((_, port, vessel)) = self.arrivals.pop().expect("peeked");
                    return Ok(Step::Decision(self.arrive(vessel, port)));
                }
                _ => self.end_day()?,
            }
        }
    }

    fn arrive(&mut self, v: usize, port: usize) -> DecisionPoint {
        let world = Arc::clone(&self.world);
        let layout = &world.layout;
        let lag = layout.maturity_lag();
        let vessel = &mut self.vessels[v];
        debug_assert_eq!(world.vessel_route(v).stops[vessel.stop], port);
        vessel.at_port = true;
        let call = vessel.calls;
        vessel.calls += 1;

        let discharged = std::mem::take(&mut vessel.laden[port]);
        if discharged > 0 {
            *self.pool.entry((self.day + lag, port)).or_default() += discharged;
        }

        let vessel = &self.vessels[v];
        let pinfo = &layout.ports[port];
        let stock = self.port_stock[port];
        let free_space = layout.vessels[v].capacity - vessel.empties - vessel.laden_total();
        let load_max = stock.min(free_space).min(pinfo.handling_cap);
        let discharge_max = vessel
            .empties
            .min(pinfo.capacity - stock)
            .min(pinfo.handling_cap);

        let lo = self.day.saturating_sub(OBSERVATION_WINDOW - 1) as usize;
        let hi = self.day as usize;
        let observation = Observation {
            port_stock: stock,
            port_capacity: pinfo.capacity,
            vessel_empties: vessel.empties,
            vessel_free_space: free_space,
            recent_demand: self.demand[port][lo..=hi].iter().sum(),
            recent_shortage: self.shortage[port][lo..=hi].iter().sum(),
            day: self.day,
            horizon: layout.horizon,
        };
        let d = DecisionPoint {
            seq: self.next_seq,
            vessel: v,
            port,
            day: self.day,
            call,
            observation,
            feasible: (-discharge_max, load_max),
        };
        self.next_seq += 1;
        self.pending = Some(d.clone());
        d
    }

    /// Apply `a` at the pending decision `d`; returns the delta actually
    /// applied after clamping to the feasible interval.
    pub fn apply_action(&mut self, d: &DecisionPoint, a: RepositionAction) -> Result<i64> {
        match &self.pending {
            Some(p) if p.seq == d.seq && p.vessel == d.vessel && p.day == d.day => {}
            Some(p) => {
                return Err(Error::StaleDecision(format!(
                    "pending decision #{} (vessel {}, day {}), got #{}",
                    p.seq, p.vessel, p.day, d.seq
                )))
            }
            None => {
                return Err(Error::StaleDecision(format!(
                    "no pending decision, got #{}",
                    d.seq
                )))
            }
        }
        let pending = self.pending.take().expect("checked");
        let applied = pending.clamp(a.delta);
        let (v, port) = (pending.vessel, pending.port);
        self.port_stock[port] -= applied;
        self.vessels[v].empties += applied;

        self.board_laden(v, port);
        self.depart(v);
        Ok(applied)
    }

    fn board_laden(&mut self, v: usize, port: usize) {
        let world = Arc::clone(&self.world);
        let route = world.vessel_route(v);
        let capacity = world.layout.vessels[v].capacity;
        let vessel = &mut self.vessels[v];
        let mut free = capacity - vessel.empties - vessel.laden_total();
        let queue = &mut self.waiting[port];
        if free <= 0 || queue.is_empty() {
            return;
        }
        let mut kept = VecDeque::with_capacity(queue.len());
        for mut l in queue.drain(..) {
            if free > 0 && route.visits(l.destination) {
                let take = l.quantity.min(free);
                vessel.laden[l.destination] += take;
                free -= take;
                l.quantity -= take;
            }
            if l.quantity > 0 {
                kept.push_back(l);
            }
        }
        *queue = kept;
    }

    fn depart(&mut self, v: usize) {
        let world = Arc::clone(&self.world);
        let route = world.vessel_route(v);
        let sigma = world.layout.vessels[v].sigma;
        let vessel = &mut self.vessels[v];
        let leg = route.legs[vessel.stop];
        let next_arrival = match &mut self.dynamics {
            Dynamics::Random { travel, .. } => self.day + travel_days(sigma, leg, travel),
            Dynamics::Scripted {
                script,
                next_arrival,
            } => {
                let k = next_arrival[v];
                next_arrival[v] += 1;
                script.arrivals[v]
                    .get(k)
                    .copied()
                    .unwrap_or(world.layout.horizon)
            }
        };
        vessel.at_port = false;
        vessel.last_departure = Some(self.day);
        vessel.stop = (vessel.stop + 1) % route.stops.len();
        vessel.next_arrival = next_arrival;
        if vessel.next_arrival < world.layout.horizon {
            self.arrivals
                .push(Reverse((vessel.next_arrival, route.stops[vessel.stop], v)));
        }
    }
}

/// Convenience wrapper matching [`SimState::new`].
pub fn init_episode(t: &Topology, p: &FleetConfiguration, seed: u64) -> Result<SimState> {
    SimState::new(t, p, seed)
}
