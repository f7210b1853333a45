//! Planning baselines. A forecast of orders and vessel calls becomes a
//! time-expanded min-cost flow over empties; the optimal flow is read back
//! as one signed load/discharge move per forecast vessel call.

mod brute;
mod forecast;
mod laden;
mod mcf;
mod network;
mod or;
mod plan;

pub use brute::brute_force_min_shortage;
pub use forecast::{
    forecast_with_noise, make_forecast, CallForecast, DemandForecast, Forecast, ForecastNoise,
    NextCall, PlanningStart, VesselStart,
};
pub use laden::{route_laden, Chunk, LadenPlan};
pub use mcf::{optimality_certificate, solve_min_cost_flow, McfSolution};
pub use network::{
    build_flow_network, ArcKind, CallArcs, DemandArc, FlowArc, FlowNetwork, OrderArcs, MOVE_COST,
    REWARD, SPILL_COST, UNBOUNDED,
};
pub use or::{
    or_policy, or_policy_world, ori_policy, plan_objective, plan_objective_with_noise, OriPolicy,
    DEFAULT_NOISE_LEVEL, DEFAULT_PLAN_HORIZON, DEFAULT_REPLAN_WINDOW,
};
pub use plan::{
    extract_plan, forecast_script, parse_plan_text, plan_to_text, plan_window, replay_plan, Plan,
    PlannedMove, Replay, MAX_REFINEMENTS, PLAN_HEADER, PLAN_MAGIC,
};
