//! Time-expanded flow network of empties over a forecast window.
//!
//! Every port-day `(h, d)` has five nodes that follow the simulator's day
//! order: `Xin` (stock left at the end of the previous day), `Xout` (stock
//! after orders), `Q` (empties waiting to mature), `Yin` (stock after
//! maturities, where vessel calls happen) and `Yout` (stock left after the
//! calls). `Xin(h, W)` closes the window. Each forecast vessel call is one
//! node; legs link consecutive calls of a vessel. Demand arcs leave `Xout`
//! and re-enter the network at the `Q` node of the port and day where the
//! laden is forecast to come back.
//!
//! The simulator serves orders greedily, in pair order, from whatever stock
//! is on hand; a flow can instead hold stock back for a later, more useful
//! order. Each forecast order therefore gets its own node, fed by a capped
//! "forced" arc with a bonus that outweighs any later use of the stock, and
//! an uncapped free arc. The caller sets the forced amounts to the greedy
//! allocation of the stock it expects.

use super::forecast::{Forecast, PlanningStart};
use super::laden::LadenPlan;
use crate::error::{Error, Result};
use crate::sim::World;

/// Value of one satisfied container.
pub const REWARD: i64 = 1_000_000;
/// Cost of one container loaded or discharged.
pub const MOVE_COST: i64 = REWARD / 1_000;
/// Cost of dropping an empty that a vessel cannot carry under the forecast.
pub const SPILL_COST: i64 = REWARD * 1_000;
/// Stands in for an unbounded capacity.
pub const UNBOUNDED: i64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// Stock on hand before orders, `Xin -> Xout`.
    Stock,
    /// Stock not used by orders, `Xout -> Yin`.
    Unused,
    /// Matured empties joining stock, `Q -> Yin`.
    Release,
    /// Empties still in the pool the next day.
    PoolCarry,
    /// Stock after maturities, `Yin -> Yout`.
    Matured,
    /// Stock carried to the next day.
    Carry,
    /// End-of-window stock.
    End,
    /// Orders the plan is expected to serve, `Xout -> Order`.
    Forced {
        demand: usize,
    },
    Order {
        demand: usize,
    },
    Load {
        call: usize,
    },
    Discharge {
        call: usize,
    },
    Leg {
        call: usize,
    },
    Spill {
        call: usize,
    },
    Demand {
        chunk: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub cap: i64,
    pub cost: i64,
    pub kind: ArcKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallArcs {
    pub vessel: usize,
    pub ordinal: u32,
    pub day: u32,
    pub port: usize,
    pub load: usize,
    pub discharge: usize,
    pub leg: usize,
    pub spill: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderArcs {
    pub forced: usize,
    pub free: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandArc {
    pub arc: usize,
    /// Index into `Forecast::demands`.
    pub demand: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowNetwork {
    pub n_nodes: usize,
    pub arcs: Vec<FlowArc>,
    /// Positive at sources, negative at the sink; sums to zero.
    pub supplies: Vec<i64>,
    pub sink: usize,
    pub start_day: u32,
    pub window: u32,
    pub n_ports: usize,
    pub calls: Vec<CallArcs>,
    /// `[vessel][k]` index into `calls` of the vessel's `k`-th forecast call.
    pub call_index: Vec<Vec<usize>>,
    pub demand_arcs: Vec<DemandArc>,
    /// Per forecast order.
    pub order_arcs: Vec<OrderArcs>,
    /// `[day][port]` arc holding the stock that orders are served from.
    pub stock_arcs: Vec<Vec<usize>>,
    /// Rounded forecast demand over the window.
    pub total_demand: i64,
}

const XIN: usize = 0;
const XOUT: usize = 1;
const YIN: usize = 2;
const YOUT: usize = 3;
const Q: usize = 4;

impl FlowNetwork {
    fn node(&self, h: usize, d: u32, k: usize) -> usize {
        (d as usize * self.n_ports + h) * 5 + k
    }

    fn end_node(&self, h: usize) -> usize {
        5 * self.n_ports * self.window as usize + h
    }

    fn call_node(&self, c: usize) -> usize {
        5 * self.n_ports * self.window as usize + self.n_ports + c
    }

    fn order_node(&self, i: usize) -> usize {
        5 * self.n_ports * self.window as usize + self.n_ports + self.calls.len() + i
    }

    fn arc(&mut self, from: usize, to: usize, cap: i64, cost: i64, kind: ArcKind) -> usize {
        self.arcs.push(FlowArc {
            from,
            to,
            cap,
            cost,
            kind,
        });
        self.arcs.len() - 1
    }

    /// `5 H W + H + C + D + 1` for `H` ports, window `W`, `C` calls and `D`
    /// forecast orders.
    pub fn expected_nodes(ports: usize, window: u32, calls: usize, orders: usize) -> usize {
        5 * ports * window as usize + ports + calls + orders + 1
    }

    /// `6 H W + H + 4 C + 2 D + K` with `K` demand arcs.
    pub fn expected_arcs(
        ports: usize,
        window: u32,
        calls: usize,
        orders: usize,
        demand_arcs: usize,
    ) -> usize {
        6 * ports * window as usize + ports + 4 * calls + 2 * orders + demand_arcs
    }

    /// Bonus per forced unit: more than the reward any single container
    /// can still earn in the window.
    pub fn force_bonus(&self) -> i64 {
        REWARD * (i64::from(self.window) + 1)
    }
}

/// Build the network for `forecast`, starting from `start`, with laden
/// returns and leg reservations from `laden` and `forced[i]` units of
/// forecast order `i` carrying the greedy-service bonus.
pub fn build_flow_network(
    world: &World,
    start: &PlanningStart,
    forecast: &Forecast,
    laden: &LadenPlan,
    forced: &[i64],
) -> Result<FlowNetwork> {
    let layout = &world.layout;
    let n_ports = layout.ports.len();
    let w = forecast.window;
    let (first, end) = (forecast.start_day, forecast.end_day());
    if first != start.day {
        return Err(Error::InvalidArgument(format!(
            "forecast starts on day {first}, planning starts on day {}",
            start.day
        )));
    }
    for (v, calls) in forecast.arrivals.iter().enumerate() {
        if calls.iter().any(|c| c.day < first || c.day >= end)
            || calls.windows(2).any(|p| p[0].day >= p[1].day)
        {
            return Err(Error::InvalidArgument(format!(
                "arrivals of vessel {} fall outside the window or are not increasing",
                layout.vessel_ids[v]
            )));
        }
    }

    let n_calls: usize = forecast.arrivals.iter().map(Vec::len).sum();
    let mut net = FlowNetwork {
        n_nodes: FlowNetwork::expected_nodes(n_ports, w, n_calls, forecast.demands.len()),
        start_day: first,
        window: w,
        n_ports,
        ..FlowNetwork::default()
    };
    net.sink = net.n_nodes - 1;
    net.supplies = vec![0; net.n_nodes];
    let sink = net.sink;

    net.stock_arcs = vec![vec![0; n_ports]; w as usize];
    for d in 0..w {
        for h in 0..n_ports {
            let cap = layout.ports[h].capacity;
            let next_x = if d + 1 < w {
                net.node(h, d + 1, XIN)
            } else {
                net.end_node(h)
            };
            let next_q = if d + 1 < w {
                net.node(h, d + 1, Q)
            } else {
                sink
            };
            let n = |k| net.node(h, d, k);
            let (xin, xout, yin, yout, q) = (n(XIN), n(XOUT), n(YIN), n(YOUT), n(Q));
            net.stock_arcs[d as usize][h] = net.arc(xin, xout, cap, 0, ArcKind::Stock);
            net.arc(xout, yin, UNBOUNDED, 0, ArcKind::Unused);
            net.arc(q, yin, UNBOUNDED, 0, ArcKind::Release);
            net.arc(q, next_q, UNBOUNDED, 0, ArcKind::PoolCarry);
            net.arc(yin, yout, cap, 0, ArcKind::Matured);
            net.arc(yout, next_x, UNBOUNDED, 0, ArcKind::Carry);
        }
    }
    for h in 0..n_ports {
        let e = net.end_node(h);
        net.arc(e, sink, layout.ports[h].capacity, 0, ArcKind::End);
    }

    net.call_index = forecast.arrivals.iter().map(|a| vec![0; a.len()]).collect();
    let mut c = 0;
    for (v, calls) in forecast.arrivals.iter().enumerate() {
        let vcap = layout.vessels[v].capacity;
        for (k, call) in calls.iter().enumerate() {
            let node = net.call_node(c);
            let d = call.day - first;
            let h = call.port;
            let handling = vcap.min(layout.ports[h].handling_cap);
            let next_x = if d + 1 < w {
                net.node(h, d + 1, XIN)
            } else {
                net.end_node(h)
            };
            let load = net.arc(
                net.node(h, d, YOUT),
                node,
                handling,
                MOVE_COST,
                ArcKind::Load { call: c },
            );
            let discharge = net.arc(
                node,
                next_x,
                handling,
                MOVE_COST,
                ArcKind::Discharge { call: c },
            );
            let next = if k + 1 < calls.len() {
                net.call_node(c + 1)
            } else {
                sink
            };
            let reserved = laden
                .reservation
                .get(v)
                .and_then(|r| r.get(k))
                .copied()
                .unwrap_or(0);
            let leg = net.arc(
                node,
                next,
                (vcap - reserved).max(0),
                0,
                ArcKind::Leg { call: c },
            );
            let spill = net.arc(
                node,
                sink,
                UNBOUNDED,
                SPILL_COST,
                ArcKind::Spill { call: c },
            );
            net.calls.push(CallArcs {
                vessel: v,
                ordinal: call.ordinal,
                day: call.day,
                port: h,
                load,
                discharge,
                leg,
                spill,
            });
            net.call_index[v][k] = c;
            c += 1;
        }
    }

    let force = net.force_bonus();
    for (i, dem) in forecast.demands.iter().enumerate() {
        let from = net.node(dem.origin, dem.day - first, XOUT);
        let to = net.order_node(i);
        let cap = forced.get(i).copied().unwrap_or(0).clamp(0, dem.rounded());
        let forced = net.arc(from, to, cap, -force, ArcKind::Forced { demand: i });
        let free = net.arc(from, to, UNBOUNDED, 0, ArcKind::Order { demand: i });
        net.order_arcs.push(OrderArcs { forced, free });
    }

    for (i, chunk) in laden.chunks.iter().enumerate() {
        let dem = &forecast.demands[chunk.demand];
        let d = dem.day - first;
        let to = match chunk.ret {
            Some((port, day)) if day < end => net.node(port, day - first, Q),
            _ => sink,
        };
        let bonus = i64::from(w - d);
        let from = net.order_node(chunk.demand);
        let arc = net.arc(
            from,
            to,
            chunk.quantity,
            -(REWARD + bonus),
            ArcKind::Demand { chunk: i },
        );
        net.demand_arcs.push(DemandArc {
            arc,
            demand: chunk.demand,
        });
    }
    net.total_demand = forecast.total_demand();

    // Supplies.
    let mut total = 0;
    let mut supply = |net: &mut FlowNetwork, node: usize, q: i64| {
        if q > 0 {
            net.supplies[node] += q;
            total += q;
        }
    };
    if w > 0 {
        for h in 0..n_ports {
            let node = net.node(h, 0, if start.orders_done { YIN } else { XIN });
            supply(&mut net, node, start.port_stock[h]);
        }
        for &(day, h, q) in &start.pool {
            // Matured items still in the pool are retried the next day.
            let day = if start.orders_done {
                day.max(first + 1)
            } else {
                day.max(first)
            };
            if day < end {
                let node = net.node(h, day - first, Q);
                supply(&mut net, node, q);
            }
        }
        for &(h, day, q) in &laden.start_returns {
            if day < end {
                let node = net.node(h, day - first, Q);
                supply(&mut net, node, q);
            }
        }
        for (v, vs) in start.vessels.iter().enumerate() {
            if let Some(&c) = net.call_index[v].first() {
                let node = net.call_node(c);
                supply(&mut net, node, vs.empties);
            }
        }
    }
    net.supplies[sink] = -total;
    Ok(net)
}
