//! Repositioning policies: the policy interface, the random and heuristic
//! baselines, and the plan executor used by the planning baselines.

use crate::domain::{Layout, Topology};
use crate::error::Result;
use crate::planner::Plan;
use crate::seed::SimRng;
use crate::sim::{DecisionPoint, RepositionAction, SimState};
use rand::Rng;

/// A repositioning policy. `state` is the full simulator state; policies
/// that act on partial observations read only `d.observation` and
/// `d.feasible`.
pub trait Policy {
    fn act(&mut self, state: &SimState, d: &DecisionPoint, rng: &mut SimRng) -> RepositionAction;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&mut self, state: &SimState, d: &DecisionPoint, rng: &mut SimRng) -> RepositionAction {
        (**self).act(state, d, rng)
    }
}

/// Never moves anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoOpPolicy;

impl Policy for NoOpPolicy {
    fn act(&mut self, _: &SimState, _: &DecisionPoint, _: &mut SimRng) -> RepositionAction {
        RepositionAction::default()
    }
}

/// Uniform over the feasible clamped interval.
pub fn random_policy(d: &DecisionPoint, rng: &mut SimRng) -> RepositionAction {
    let (lo, hi) = d.feasible;
    RepositionAction::new(if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&mut self, _: &SimState, d: &DecisionPoint, rng: &mut SimRng) -> RepositionAction {
        random_policy(d, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortLabel {
    Exporting,
    Importing,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortRole {
    pub label: PortLabel,
    /// Mean daily outbound minus inbound demand.
    pub net_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortRoles {
    /// Indexed like the topology's ports.
    pub roles: Vec<PortRole>,
    pub threshold: f64,
}

impl PortRoles {
    pub fn label(&self, port: usize) -> PortLabel {
        self.roles[port].label
    }
}

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.1;

/// Labels from per-port mean daily outbound and inbound demand.
/// `threshold = fraction * mean over ports of (outbound + inbound)`.
pub fn roles_from_flows(outbound: &[f64], inbound: &[f64], fraction: f64) -> PortRoles {
    let n = outbound.len().max(1) as f64;
    let per_port_total: f64 = outbound
        .iter()
        .zip(inbound)
        .map(|(o, i)| o + i)
        .sum::<f64>()
        / n;
    let threshold = fraction * per_port_total;
    let roles = outbound
        .iter()
        .zip(inbound)
        .map(|(o, i)| {
            let net_flow = o - i;
            let label = if net_flow > threshold {
                PortLabel::Exporting
            } else if net_flow < -threshold {
                PortLabel::Importing
            } else {
                PortLabel::Balanced
            };
            PortRole { label, net_flow }
        })
        .collect();
    PortRoles { roles, threshold }
}

/// Classify every port from the analytic clipped means of the order model,
/// averaged over the horizon.
pub fn classify_ports(t: &Topology, fraction: f64) -> Result<PortRoles> {
    let layout = Layout::new(t)?;
    Ok(classify_layout(&layout, fraction))
}

pub fn classify_layout(layout: &Layout, fraction: f64) -> PortRoles {
    let n = layout.ports.len();
    let mut outbound = vec![0.0; n];
    let mut inbound = vec![0.0; n];
    let days = layout.horizon.max(1);
    for pair in &layout.pairs {
        let mean: f64 =
            (0..days).map(|d| pair.model.clipped_mean(d)).sum::<f64>() / f64::from(days);
        outbound[pair.origin] += mean;
        inbound[pair.destination] += mean;
    }
    roles_from_flows(&outbound, &inbound, fraction)
}

/// Discharge at least half of the empties aboard at exporting ports, load
/// at least half of the feasible maximum at importing ports, do nothing
/// at balanced ones.
pub fn heuristic_policy(
    d: &DecisionPoint,
    roles: &PortRoles,
    rng: &mut SimRng,
) -> RepositionAction {
    let upper_half = |n: i64, rng: &mut SimRng| -> i64 {
        if n <= 0 {
            0
        } else {
            rng.random_range((n + 1) / 2..=n)
        }
    };
    let delta = match roles.label(d.port) {
        PortLabel::Exporting => -upper_half(d.observation.vessel_empties, rng),
        PortLabel::Importing => upper_half(d.feasible.1, rng),
        PortLabel::Balanced => 0,
    };
    RepositionAction::new(d.clamp(delta))
}

#[derive(Debug, Clone)]
pub struct HeuristicPolicy {
    pub roles: PortRoles,
}

impl HeuristicPolicy {
    pub fn new(layout: &Layout, fraction: f64) -> Self {
        Self {
            roles: classify_layout(layout, fraction),
        }
    }
}

impl Policy for HeuristicPolicy {
    fn act(&mut self, _: &SimState, d: &DecisionPoint, rng: &mut SimRng) -> RepositionAction {
        heuristic_policy(d, &self.roles, rng)
    }
}

/// The planned delta for this vessel's current call; unplanned calls get 0.
pub fn plan_executor(plan: &Plan, d: &DecisionPoint) -> RepositionAction {
    RepositionAction::new(plan.delta(d.vessel, d.call).unwrap_or(0))
}

/// Executes a fixed plan, counting calls where the simulator had to clamp.
#[derive(Debug, Clone)]
pub struct PlanPolicy {
    pub plan: Plan,
    pub divergences: u64,
}

impl PlanPolicy {
    pub fn new(plan: Plan) -> Self {
        Self {
            plan,
            divergences: 0,
        }
    }
}

impl Policy for PlanPolicy {
    fn act(&mut self, _: &SimState, d: &DecisionPoint, _: &mut SimRng) -> RepositionAction {
        let a = plan_executor(&self.plan, d);
        if d.clamp(a.delta) != a.delta {
            self.divergences += 1;
        }
        a
    }
}

#[cfg(test)]
mod tests;
