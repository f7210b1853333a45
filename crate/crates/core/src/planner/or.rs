use super::forecast::{forecast_with_noise, make_forecast, Forecast, ForecastNoise, PlanningStart};
use super::plan::{plan_window, Plan};
use crate::domain::{FleetConfiguration, Topology};
use crate::error::{Error, Result};
use crate::policy::{plan_executor, PlanPolicy, Policy};
use crate::seed::SimRng;
use crate::sim::{DecisionPoint, RepositionAction, SimState, World};
use std::sync::Arc;

pub const DEFAULT_REPLAN_WINDOW: u32 = 20;
pub const DEFAULT_PLAN_HORIZON: u32 = 60;
pub const DEFAULT_NOISE_LEVEL: f64 = 0.2;

/// One plan for the whole horizon, built before the episode starts.
pub fn or_policy_world(
    world: &Arc<World>,
    noise_level: f64,
    rng: &mut SimRng,
) -> Result<PlanPolicy> {
    let state = SimState::init(Arc::clone(world), 0);
    let start = PlanningStart::cold(world);
    let forecast = make_forecast(world, &start, world.layout.horizon, noise_level, rng);
    Ok(PlanPolicy::new(plan_window(&state, &forecast)?))
}

pub fn or_policy(
    t: &Topology,
    p: &FleetConfiguration,
    noise_level: f64,
    rng: &mut SimRng,
) -> Result<PlanPolicy> {
    or_policy_world(&World::new(t, p)?, noise_level, rng)
}

/// Rolling horizon: at the first decision of every `window`-day block, plan
/// `plan_horizon` days ahead from the true state and follow that plan until
/// the next block.
#[derive(Debug, Clone)]
pub struct OriPolicy {
    world: Arc<World>,
    pub window: u32,
    pub plan_horizon: u32,
    pub noise_level: f64,
    rng: SimRng,
    plan: Option<Plan>,
    next_replan: u32,
    pub replans: u32,
    pub divergences: u64,
    /// Planning failures; the policy then idles until the next block.
    pub failures: u32,
}

impl OriPolicy {
    pub fn new(
        world: Arc<World>,
        window: u32,
        plan_horizon: u32,
        noise_level: f64,
        rng: SimRng,
    ) -> Result<Self> {
        if window == 0 || window > plan_horizon {
            return Err(Error::InvalidArgument(format!(
                "replanning window {window} must be in 1..={plan_horizon}"
            )));
        }
        Ok(OriPolicy {
            world,
            window,
            plan_horizon,
            noise_level,
            rng,
            plan: None,
            next_replan: 0,
            replans: 0,
            divergences: 0,
            failures: 0,
        })
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }
}

pub fn ori_policy(
    t: &Topology,
    p: &FleetConfiguration,
    window: u32,
    plan_horizon: u32,
    noise_level: f64,
    rng: SimRng,
) -> Result<OriPolicy> {
    OriPolicy::new(World::new(t, p)?, window, plan_horizon, noise_level, rng)
}

impl Policy for OriPolicy {
    fn act(&mut self, state: &SimState, d: &DecisionPoint, _: &mut SimRng) -> RepositionAction {
        if d.day >= self.next_replan {
            let start = PlanningStart::from_state(state);
            let forecast = make_forecast(
                &self.world,
                &start,
                self.plan_horizon,
                self.noise_level,
                &mut self.rng,
            );
            self.plan = match plan_window(state, &forecast) {
                Ok(plan) => Some(plan),
                Err(_) => {
                    self.failures += 1;
                    None
                }
            };
            self.replans += 1;
            self.next_replan = (d.day / self.window + 1) * self.window;
        }
        let a = match &self.plan {
            Some(plan) => plan_executor(plan, d),
            None => RepositionAction::default(),
        };
        if d.clamp(a.delta) != a.delta {
            self.divergences += 1;
        }
        a
    }
}

/// Planned satisfied demand for the configuration of `world` under the
/// given forecast noise, planning from day 0 over the full horizon.
pub fn plan_objective_with_noise(world: &Arc<World>, noise: &ForecastNoise) -> Result<i64> {
    let start = PlanningStart::cold(world);
    let forecast = forecast_with_noise(world, &start, world.layout.horizon, noise);
    Ok(plan_window(&SimState::init(Arc::clone(world), 0), &forecast)?.planned_objective)
}

pub fn plan_objective(t: &Topology, p: &FleetConfiguration, f: &Forecast) -> Result<i64> {
    if f.start_day != 0 {
        return Err(Error::InvalidArgument(
            "objective forecasts must start on day 0".into(),
        ));
    }
    Ok(plan_window(&SimState::init(World::new(t, p)?, 0), f)?.planned_objective)
}
