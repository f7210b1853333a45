use crate::domain::Layout;
use crate::seed::SimRng;
use crate::sim::{Laden, SimState, World};
use rand::Rng;

/// How the planner learns about a vessel's next call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextCall {
    /// The call day is known (the vessel is at port or arrives today).
    Known { day: u32 },
    /// Sailing since `departed` on a leg of `leg_days` nominal days; the
    /// call cannot happen before `not_before`.
    Sailing {
        departed: u32,
        leg_days: f64,
        not_before: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselStart {
    pub empties: i64,
    /// Laden aboard, indexed by destination port.
    pub laden: Vec<i64>,
    /// Route position of the next call.
    pub next_stop: usize,
    pub next_call: NextCall,
    pub next_ordinal: u32,
}

/// The state a plan starts from: either a fresh episode or a snapshot of
/// a running simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningStart {
    pub day: u32,
    /// Orders and maturities of `day` have already been processed.
    pub orders_done: bool,
    pub port_stock: Vec<i64>,
    /// `(release day, port, quantity)` empties in the return pool.
    pub pool: Vec<(u32, usize, i64)>,
    pub vessels: Vec<VesselStart>,
    /// Laden waiting at each origin port, first-in first-out.
    pub waiting: Vec<Vec<Laden>>,
}

impl PlanningStart {
    pub fn cold(world: &World) -> Self {
        let layout = &world.layout;
        PlanningStart {
            day: 0,
            orders_done: false,
            port_stock: layout.ports.iter().map(|p| p.initial_stock).collect(),
            pool: Vec::new(),
            vessels: (0..layout.vessels.len())
                .map(|v| VesselStart {
                    empties: 0,
                    laden: vec![0; layout.ports.len()],
                    next_stop: world.deployment.start[v],
                    next_call: NextCall::Known { day: 0 },
                    next_ordinal: 0,
                })
                .collect(),
            waiting: vec![Vec::new(); layout.ports.len()],
        }
    }

    pub fn from_state(state: &SimState) -> Self {
        let world = state.world();
        let day = state.day();
        let vessels = state
            .vessels()
            .iter()
            .enumerate()
            .map(|(v, s)| {
                let route = world.vessel_route(v);
                let (next_call, next_ordinal) = if s.at_port {
                    (NextCall::Known { day }, s.calls - 1)
                } else if s.next_arrival == day || s.last_departure.is_none() {
                    (
                        NextCall::Known {
                            day: s.next_arrival,
                        },
                        s.calls,
                    )
                } else {
                    let prev = (s.stop + route.stops.len() - 1) % route.stops.len();
                    (
                        NextCall::Sailing {
                            departed: s.last_departure.expect("sailing vessel departed"),
                            leg_days: route.legs[prev],
                            not_before: day + 1,
                        },
                        s.calls,
                    )
                };
                VesselStart {
                    empties: s.empties,
                    laden: s.laden.clone(),
                    next_stop: s.stop,
                    next_call,
                    next_ordinal,
                }
            })
            .collect();
        PlanningStart {
            day,
            orders_done: state.day_started(),
            port_stock: state.port_stock().to_vec(),
            pool: state.pool().collect(),
            vessels,
            waiting: state
                .waiting()
                .iter()
                .map(|q| q.iter().copied().collect())
                .collect(),
        }
    }

    /// First day whose orders are still to be forecast.
    pub fn first_order_day(&self) -> u32 {
        if self.orders_done {
            self.day + 1
        } else {
            self.day
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandForecast {
    pub pair: usize,
    pub origin: usize,
    pub destination: usize,
    pub day: u32,
    pub quantity: f64,
}

impl DemandForecast {
    pub fn rounded(&self) -> i64 {
        self.quantity.round() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallForecast {
    pub port: usize,
    pub day: u32,
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub start_day: u32,
    /// Days covered: `start_day .. start_day + window`.
    pub window: u32,
    pub demands: Vec<DemandForecast>,
    /// Per vessel, calls in strictly increasing day order.
    pub arrivals: Vec<Vec<CallForecast>>,
    pub noise_level: f64,
}

impl Forecast {
    pub fn end_day(&self) -> u32 {
        self.start_day + self.window
    }

    pub fn total_demand(&self) -> i64 {
        self.demands.iter().map(DemandForecast::rounded).sum()
    }
}

/// Multiplicative perturbations `1 + eps`, `eps ~ U[-level, level]`, drawn
/// once per (pair, day) and per (vessel, leg number). Keeping them in a
/// table lets one noise draw be reused across configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastNoise {
    pub level: f64,
    first_day: u32,
    demand: Vec<Vec<f64>>,
    legs: Vec<Vec<f64>>,
}

impl ForecastNoise {
    pub fn sample(
        layout: &Layout,
        first_day: u32,
        days: u32,
        level: f64,
        rng: &mut SimRng,
    ) -> Self {
        let draw = |rng: &mut SimRng| {
            if level > 0.0 {
                1.0 + rng.random_range(-level..=level)
            } else {
                1.0
            }
        };
        let demand = (0..layout.pairs.len())
            .map(|_| (0..days).map(|_| draw(rng)).collect())
            .collect();
        // A vessel makes at most one call per day.
        let legs = (0..layout.vessels.len())
            .map(|_| (0..=days).map(|_| draw(rng)).collect())
            .collect();
        ForecastNoise {
            level,
            first_day,
            demand,
            legs,
        }
    }

    fn demand_factor(&self, pair: usize, day: u32) -> f64 {
        self.demand[pair]
            .get((day - self.first_day) as usize)
            .copied()
            .unwrap_or(1.0)
    }

    fn leg_factor(&self, vessel: usize, k: usize) -> f64 {
        self.legs[vessel].get(k).copied().unwrap_or(1.0)
    }
}

fn forecast_leg(leg_days: f64, factor: f64) -> u32 {
    (leg_days * factor).round().max(1.0) as u32
}

/// Build the forecast for `world` from `start`, covering up to `horizon`
/// days (cut at the episode horizon), using pre-drawn `noise`.
pub fn forecast_with_noise(
    world: &World,
    start: &PlanningStart,
    horizon: u32,
    noise: &ForecastNoise,
) -> Forecast {
    let layout = &world.layout;
    let window = horizon.min(layout.horizon.saturating_sub(start.day));
    let end = start.day + window;

    let mut demands = Vec::new();
    for day in start.first_order_day()..end {
        for (i, pair) in layout.pairs.iter().enumerate() {
            demands.push(DemandForecast {
                pair: i,
                origin: pair.origin,
                destination: pair.destination,
                day,
                quantity: pair.model.clipped_mean(day) * noise.demand_factor(i, day),
            });
        }
    }

    let arrivals = start
        .vessels
        .iter()
        .enumerate()
        .map(|(v, vs)| {
            let route = world.vessel_route(v);
            let n = route.stops.len();
            let mut k = 0;
            let mut day = match vs.next_call {
                NextCall::Known { day } => day,
                NextCall::Sailing {
                    departed,
                    leg_days,
                    not_before,
                } => {
                    let d = departed + forecast_leg(leg_days, noise.leg_factor(v, k));
                    k += 1;
                    d.max(not_before)
                }
            };
            let mut stop = vs.next_stop;
            let mut ordinal = vs.next_ordinal;
            let mut calls = Vec::new();
            while day < end {
                calls.push(CallForecast {
                    port: route.stops[stop],
                    day,
                    ordinal,
                });
                day += forecast_leg(route.legs[stop], noise.leg_factor(v, k));
                k += 1;
                stop = (stop + 1) % n;
                ordinal += 1;
            }
            calls
        })
        .collect();

    Forecast {
        start_day: start.day,
        window,
        demands,
        arrivals,
        noise_level: noise.level,
    }
}

/// Noisy estimates of future orders and arrivals: clipped trigonometric
/// means and nominal legs, each scaled by `1 + eps` with
/// `eps ~ U[-noise_level, noise_level]`.
pub fn make_forecast(
    world: &World,
    start: &PlanningStart,
    horizon: u32,
    noise_level: f64,
    rng: &mut SimRng,
) -> Forecast {
    let noise = ForecastNoise::sample(&world.layout, start.day, horizon, noise_level, rng);
    forecast_with_noise(world, start, horizon, &noise)
}
