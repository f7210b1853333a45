use super::{SimState, Step, World};
use crate::domain::{FleetConfiguration, Topology};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::seed::{stream, SimRng};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub total_demand: i64,
    pub total_shortage: i64,
    /// `[port][day]` unmet demand.
    pub shortage_by_port_day: Vec<Vec<i64>>,
    pub fulfillment_pct: f64,
    /// Sum over decision epochs of `gamma^day * reward`, plus the terminal
    /// term at the horizon; rewards are negative shortage increments.
    pub discounted_return: f64,
    pub decisions: u64,
    /// Actions whose requested delta differed from the applied one.
    pub clamped_actions: u64,
}

impl EpisodeMetrics {
    pub fn fulfilled(&self) -> i64 {
        self.total_demand - self.total_shortage
    }
}

pub fn fulfillment_pct(demand: i64, shortage: i64) -> f64 {
    if demand == 0 {
        100.0
    } else {
        100.0 * (1.0 - shortage as f64 / demand as f64)
    }
}

/// Drive `state` to the end of the horizon with `policy`.
pub fn run_episode(
    state: &mut SimState,
    policy: &mut dyn Policy,
    rng: &mut SimRng,
    gamma: f64,
) -> Result<EpisodeMetrics> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount {gamma} outside (0, 1]"
        )));
    }
    let mut ret = 0.0;
    let mut decisions = 0;
    let mut clamped = 0;
    loop {
        match state.next_decision()? {
            Step::Decision(d) => {
                let reward = -(state.take_accrued_shortage() as f64);
                ret += gamma.powi(d.day as i32) * reward;
                let action = policy.act(state, &d, rng);
                let applied = state.apply_action(&d, action)?;
                decisions += 1;
                if applied != action.delta {
                    clamped += 1;
                }
            }
            Step::End => {
                let reward = -(state.take_accrued_shortage() as f64);
                ret += gamma.powi(state.layout().horizon as i32) * reward;
                break;
            }
        }
    }
    let total_demand: i64 = state.demand_by_port_day().iter().flatten().sum();
    let total_shortage: i64 = state.shortage_by_port_day().iter().flatten().sum();
    Ok(EpisodeMetrics {
        total_demand,
        total_shortage,
        shortage_by_port_day: state.shortage_by_port_day().to_vec(),
        fulfillment_pct: fulfillment_pct(total_demand, total_shortage),
        discounted_return: ret,
        decisions,
        clamped_actions: clamped,
    })
}

/// The policy draws from stream 2 of `seed`; the world uses streams 0 and 1.
pub fn policy_rng(seed: u64) -> SimRng {
    stream(seed, 2)
}

pub fn rollout_world(
    world: Arc<World>,
    policy: &mut dyn Policy,
    seed: u64,
    gamma: f64,
) -> Result<EpisodeMetrics> {
    let mut state = SimState::init(world, seed);
    run_episode(&mut state, policy, &mut policy_rng(seed), gamma)
}

pub fn rollout(
    t: &Topology,
    p: &FleetConfiguration,
    policy: &mut dyn Policy,
    seed: u64,
    gamma: f64,
) -> Result<EpisodeMetrics> {
    rollout_world(World::new(t, p)?, policy, seed, gamma)
}
