//! Greedy laden routing in the forecast world. Mirrors the simulator's
//! boarding rule (first-in first-out, after the empties action, only onto
//! vessels whose route reaches the destination) to estimate when served
//! demand comes back as empties and how much vessel space laden holds on
//! every leg.

use super::forecast::{Forecast, PlanningStart};
use crate::sim::World;
use std::collections::BTreeMap;

/// A slice of one forecast demand that comes back at the same place and day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    /// Index into `Forecast::demands`.
    pub demand: usize,
    pub quantity: i64,
    /// `(port, release day)`; `None` when the laden is still travelling at
    /// the end of the window.
    pub ret: Option<(usize, u32)>,
    /// Served units the routing assumed, as opposed to an estimate for
    /// demand the plan left unserved.
    pub real: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LadenPlan {
    pub chunks: Vec<Chunk>,
    /// Laden already in the system at the start: `(port, release day, qty)`.
    pub start_returns: Vec<(usize, u32, i64)>,
    /// Laden aboard each forecast call's outgoing leg, `[vessel][call]`.
    pub reservation: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Copy)]
enum Tag {
    Start,
    Demand(usize),
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    tag: Tag,
    destination: usize,
    quantity: i64,
    /// Phantom units stand for demand the plan does not serve. They board
    /// behind everything ahead of them, to estimate when one more served
    /// unit would come back, but real units never wait for them.
    real: bool,
}

/// (demand, phantom, return call as `(vessel, call)`).
type ChunkKey = (usize, bool, Option<(usize, u32)>);

/// `served[i]` is the number of units of demand `i` that leave the origin;
/// the rest of its rounded quantity is phantom. `empties[v][k]` is the
/// number of empties vessel `v` carries away from its `k`-th forecast call.
pub fn route_laden(
    world: &World,
    start: &PlanningStart,
    forecast: &Forecast,
    served: &[i64],
    empties: &[Vec<i64>],
) -> LadenPlan {
    let layout = &world.layout;
    let lag = layout.maturity_lag();
    let end = forecast.end_day();
    let n_vessels = layout.vessels.len();

    let mut waiting: Vec<Vec<Unit>> = start
        .waiting
        .iter()
        .map(|q| {
            q.iter()
                .map(|l| Unit {
                    tag: Tag::Start,
                    destination: l.destination,
                    quantity: l.quantity,
                    real: true,
                })
                .collect()
        })
        .collect();
    let mut aboard: Vec<Vec<Unit>> = start
        .vessels
        .iter()
        .map(|vs| {
            vs.laden
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0)
                .map(|(dest, &q)| Unit {
                    tag: Tag::Start,
                    destination: dest,
                    quantity: q,
                    real: true,
                })
                .collect()
        })
        .collect();

    let mut calls: Vec<(u32, usize, usize, usize)> = Vec::new();
    for (v, arr) in forecast.arrivals.iter().enumerate() {
        for (k, c) in arr.iter().enumerate() {
            calls.push((c.day, c.port, v, k));
        }
    }
    calls.sort_unstable();

    let mut out = LadenPlan {
        reservation: forecast.arrivals.iter().map(|a| vec![0; a.len()]).collect(),
        ..LadenPlan::default()
    };
    let mut chunks: BTreeMap<ChunkKey, i64> = BTreeMap::new();
    let mut settle = |u: Unit, ret: Option<(usize, u32)>, out: &mut LadenPlan| match u.tag {
        Tag::Start => {
            if let Some((port, day)) = ret {
                out.start_returns.push((port, day, u.quantity));
            }
        }
        Tag::Demand(i) => *chunks.entry((i, !u.real, ret)).or_default() += u.quantity,
    };

    let mut next_demand = 0;
    let mut next_call = 0;
    for day in start.day..end {
        while next_demand < forecast.demands.len() && forecast.demands[next_demand].day == day {
            let d = &forecast.demands[next_demand];
            let total = d.rounded();
            let real = served
                .get(next_demand)
                .copied()
                .unwrap_or(total)
                .clamp(0, total);
            let tag = Tag::Demand(next_demand);
            if real > 0 {
                waiting[d.origin].push(Unit {
                    tag,
                    destination: d.destination,
                    quantity: real,
                    real: true,
                });
            }
            if total > real {
                waiting[d.origin].push(Unit {
                    tag,
                    destination: d.destination,
                    quantity: total - real,
                    real: false,
                });
            }
            next_demand += 1;
        }
        while next_call < calls.len() && calls[next_call].0 == day {
            let (_, port, v, k) = calls[next_call];
            next_call += 1;
            let (here, rest): (Vec<Unit>, Vec<Unit>) =
                aboard[v].drain(..).partition(|u| u.destination == port);
            aboard[v] = rest;
            for u in here {
                settle(u, Some((port, day + lag)), &mut out);
            }

            let route = world.vessel_route(v);
            let carried = empties.get(v).and_then(|e| e.get(k)).copied().unwrap_or(0);
            let aboard_real: i64 = aboard[v]
                .iter()
                .filter(|u| u.real)
                .map(|u| u.quantity)
                .sum();
            let aboard_all: i64 = aboard[v].iter().map(|u| u.quantity).sum();
            let capacity = layout.vessels[v].capacity - carried;
            let mut free_real = capacity - aboard_real;
            let mut free_all = capacity - aboard_all;
            let mut kept = Vec::with_capacity(waiting[port].len());
            for mut u in waiting[port].drain(..) {
                if route.visits(u.destination) {
                    let free = if u.real { free_real } else { free_all };
                    let take = u.quantity.min(free.max(0));
                    if take > 0 {
                        aboard[v].push(Unit {
                            quantity: take,
                            ..u
                        });
                        u.quantity -= take;
                        free_all -= take;
                        if u.real {
                            free_real -= take;
                        }
                    }
                }
                if u.quantity > 0 {
                    kept.push(u);
                }
            }
            waiting[port] = kept;
            out.reservation[v][k] = aboard[v]
                .iter()
                .filter(|u| u.real)
                .map(|u| u.quantity)
                .sum();
        }
    }
    for u in aboard
        .into_iter()
        .flatten()
        .chain(waiting.into_iter().flatten())
    {
        settle(u, None, &mut out);
    }
    debug_assert_eq!(n_vessels, out.reservation.len());
    out.chunks = chunks
        .into_iter()
        .filter(|&(_, q)| q > 0)
        .map(|((demand, phantom, ret), quantity)| Chunk {
            demand,
            quantity,
            ret,
            real: !phantom,
        })
        .collect();
    out
}
