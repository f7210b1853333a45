use super::forecast::{Forecast, PlanningStart};
use super::laden::{route_laden, LadenPlan};
use super::mcf::{solve_min_cost_flow, McfSolution};
use super::network::{build_flow_network, FlowNetwork};
use crate::domain::Layout;
use crate::error::{Error, Result};
use crate::sim::{RepositionAction, Script, SimState, Step};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Laden routing depends on the plan (empties take vessel space, unserved
/// demand ships nothing), so planning alternates between solving the flow
/// and re-routing laden under the solution. This bounds the rounds.
pub const MAX_REFINEMENTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedMove {
    pub day: u32,
    pub port: usize,
    /// Positive loads empties onto the vessel, negative discharges.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub start_day: u32,
    pub window: u32,
    /// `(vessel, call ordinal) -> move`.
    pub moves: BTreeMap<(usize, u32), PlannedMove>,
    /// Satisfied forecast demand.
    pub planned_objective: i64,
    /// Rounded forecast demand over the window.
    pub planned_demand: i64,
    pub network_cost: i64,
    /// Empties the plan had to drop because the forecast left no room.
    pub spilled: i64,
    /// Satisfied demand when the plan is replayed in the forecast world.
    pub expected_objective: i64,
    pub refinements: usize,
    /// The laden routing the final network assumed matches the plan.
    pub consistent: bool,
}

impl Plan {
    pub fn delta(&self, vessel: usize, call: u32) -> Option<i64> {
        self.moves.get(&(vessel, call)).map(|m| m.delta)
    }

    pub fn planned_shortage(&self) -> i64 {
        self.planned_demand - self.planned_objective
    }

    pub fn end_day(&self) -> u32 {
        self.start_day + self.window
    }
}

/// `move(v, i) = load flow - discharge flow` at every call node.
pub fn extract_plan(net: &FlowNetwork, sol: &McfSolution) -> Plan {
    let moves = net
        .calls
        .iter()
        .map(|c| {
            let delta = sol.flows[c.load] - sol.flows[c.discharge];
            (
                (c.vessel, c.ordinal),
                PlannedMove {
                    day: c.day,
                    port: c.port,
                    delta,
                },
            )
        })
        .collect();
    Plan {
        start_day: net.start_day,
        window: net.window,
        moves,
        planned_objective: net.demand_arcs.iter().map(|a| sol.flows[a.arc]).sum(),
        planned_demand: net.total_demand,
        network_cost: sol.objective,
        spilled: net.calls.iter().map(|c| sol.flows[c.spill]).sum(),
        expected_objective: 0,
        refinements: 1,
        consistent: false,
    }
}

/// The forecast as fixed simulator dynamics.
pub fn forecast_script(forecast: &Forecast, n_pairs: usize) -> Script {
    let mut orders = vec![vec![0; n_pairs]; forecast.window as usize];
    for d in &forecast.demands {
        orders[(d.day - forecast.start_day) as usize][d.pair] = d.rounded();
    }
    Script {
        first_day: forecast.start_day,
        orders,
        arrivals: forecast
            .arrivals
            .iter()
            .map(|a| a.iter().map(|c| c.day).collect())
            .collect(),
        end_day: forecast.end_day(),
    }
}

/// Outcome of executing a plan in a world that follows the forecast exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// Units served per forecast order.
    pub served: Vec<i64>,
    /// `[vessel][k]` empties aboard when leaving the `k`-th forecast call.
    pub empties: Vec<Vec<i64>>,
    pub fulfilled: i64,
    pub clamps: u64,
}

pub fn replay_plan(state: &SimState, forecast: &Forecast, plan: &Plan) -> Result<Replay> {
    let layout = state.layout();
    let mut s = state.with_script(forecast_script(forecast, layout.pairs.len()));
    let mut call_k: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    for (v, a) in forecast.arrivals.iter().enumerate() {
        for (k, c) in a.iter().enumerate() {
            call_k.insert((v, c.ordinal), k);
        }
    }
    let mut empties: Vec<Vec<i64>> = forecast.arrivals.iter().map(|a| vec![0; a.len()]).collect();
    let mut clamps = 0;
    let mut pending = s.pending().cloned();
    loop {
        let d = match pending.take() {
            Some(d) => d,
            None => match s.next_decision()? {
                Step::Decision(d) => d,
                Step::End => break,
            },
        };
        let want = plan.delta(d.vessel, d.call).unwrap_or(0);
        let applied = s.apply_action(&d, RepositionAction::new(want))?;
        if applied != want {
            clamps += 1;
        }
        if let Some(&k) = call_k.get(&(d.vessel, d.call)) {
            empties[d.vessel][k] = s.vessels()[d.vessel].empties;
        }
    }
    let served: Vec<i64> = forecast
        .demands
        .iter()
        .map(|d| s.served_by_pair_day()[d.pair][d.day as usize])
        .collect();
    Ok(Replay {
        fulfilled: served.iter().sum(),
        served,
        empties,
        clamps,
    })
}

/// The best plan for `forecast` starting from `state`. A fresh episode is
/// `SimState::init`; any seed will do since the future is scripted.
///
/// Each round builds the network from the laden flow and greedy order
/// service of the previous round's plan as replayed in the forecast world,
/// so a plan whose replay matches its own flow is exact.
pub fn plan_window(state: &SimState, forecast: &Forecast) -> Result<Plan> {
    let world = state.world();
    let start = PlanningStart::from_state(state);
    let mut served: Vec<i64> = forecast.demands.iter().map(|d| d.rounded()).collect();
    let mut empties: Vec<Vec<i64>> = forecast.arrivals.iter().map(|a| vec![0; a.len()]).collect();
    let mut forced = vec![0; forecast.demands.len()];
    let mut seen: Vec<(LadenPlan, Vec<i64>)> = Vec::new();
    let mut best: Option<Plan> = None;
    for round in 1..=MAX_REFINEMENTS {
        let laden = route_laden(world, &start, forecast, &served, &empties);
        let key = (laden, forced);
        if seen.contains(&key) {
            break;
        }
        let (laden, used_forced) = key;
        let net = build_flow_network(world, &start, forecast, &laden, &used_forced)?;
        let sol = solve_min_cost_flow(&net)?;
        let mut plan = extract_plan(&net, &sol);
        plan.refinements = round;
        let replay = replay_plan(state, forecast, &plan)?;
        plan.expected_objective = replay.fulfilled;
        plan.consistent = replay.clamps == 0 && replay.fulfilled == plan.planned_objective;
        let better = match &best {
            None => true,
            Some(b) => {
                (plan.consistent, plan.expected_objective) > (b.consistent, b.expected_objective)
            }
        };
        let done = plan.consistent;
        if better {
            best = Some(plan);
        }
        if done {
            break;
        }
        seen.push((laden, used_forced));
        served = replay.served;
        forced = served.clone();
        empties = replay.empties;
    }
    Ok(best.expect("at least one round"))
}

pub const PLAN_MAGIC: &str = "ecrfd-plan";
pub const PLAN_HEADER: &str = "vessel,call,day,port,delta";

/// Plan as text: `#`-prefixed `key value` lines, then a CSV of moves with
/// vessel and port ids.
pub fn plan_to_text(plan: &Plan, layout: &Layout) -> String {
    let mut out = format!(
        "# {PLAN_MAGIC} 1\n# start_day {}\n# window {}\n# planned_objective {}\n# planned_demand {}\n{PLAN_HEADER}\n",
        plan.start_day, plan.window, plan.planned_objective, plan.planned_demand
    );
    for (&(v, call), m) in &plan.moves {
        let _ = writeln!(
            out,
            "{},{call},{},{},{}",
            layout.vessel_ids[v], m.day, layout.port_ids[m.port], m.delta
        );
    }
    out
}

pub fn parse_plan_text(text: &str, layout: &Layout) -> Result<Plan> {
    let bad = |message: String| Error::Format {
        what: "plan",
        message,
    };
    let mut plan = Plan {
        start_day: 0,
        window: layout.horizon,
        moves: BTreeMap::new(),
        planned_objective: 0,
        planned_demand: 0,
        network_cost: 0,
        spilled: 0,
        expected_objective: 0,
        refinements: 0,
        consistent: false,
    };
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut it = meta.split_whitespace();
            let (Some(key), Some(value)) = (it.next(), it.next()) else {
                continue;
            };
            let num = || {
                value
                    .parse::<i64>()
                    .map_err(|_| bad(format!("line {n}: {key} is not an integer")))
            };
            match key {
                PLAN_MAGIC if value != "1" => {
                    return Err(bad(format!("line {n}: unsupported version {value}")))
                }
                "start_day" => plan.start_day = num()? as u32,
                "window" => plan.window = num()? as u32,
                "planned_objective" => plan.planned_objective = num()?,
                "planned_demand" => plan.planned_demand = num()?,
                _ => {}
            }
            continue;
        }
        if !header {
            if line != PLAN_HEADER {
                return Err(bad(format!("line {n}: expected header \"{PLAN_HEADER}\"")));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("line {n}: expected 5 fields, got {}", f.len())));
        }
        let vessel = layout
            .vessel(f[0])
            .ok_or_else(|| bad(format!("line {n}: unknown vessel \"{}\"", f[0])))?;
        let port = layout
            .port(f[3])
            .ok_or_else(|| bad(format!("line {n}: unknown port \"{}\"", f[3])))?;
        let call = f[1]
            .parse()
            .map_err(|_| bad(format!("line {n}: call is not an integer")))?;
        let day = f[2]
            .parse()
            .map_err(|_| bad(format!("line {n}: day is not an integer")))?;
        let delta = f[4]
            .parse()
            .map_err(|_| bad(format!("line {n}: delta is not an integer")))?;
        if plan
            .moves
            .insert((vessel, call), PlannedMove { day, port, delta })
            .is_some()
        {
            return Err(bad(format!(
                "line {n}: duplicate move for vessel {} call {call}",
                f[0]
            )));
        }
    }
    if !header {
        return Err(bad(format!("missing header \"{PLAN_HEADER}\"")));
    }
    Ok(plan)
}
