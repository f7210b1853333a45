//! Policy-learning algorithms as values, and cached seeded evaluation of a
//! fleet configuration under one of them.

use crate::domain::{Deployment, FleetConfiguration, Layout, Topology};
use crate::error::{Error, Result};
use crate::planner::{
    or_policy_world, OriPolicy, DEFAULT_NOISE_LEVEL, DEFAULT_PLAN_HORIZON, DEFAULT_REPLAN_WINDOW,
};
use crate::policy::{HeuristicPolicy, Policy, RandomPolicy, DEFAULT_THRESHOLD_FRACTION};
use crate::seed::{derive_seed, stream};
use crate::sim::{rollout_world, World};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Stream of an episode seed that planning policies draw forecast noise from.
const PLANNER_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgorithmSpec {
    Rand,
    Heur {
        threshold_fraction: f64,
    },
    Or {
        noise_level: f64,
    },
    Ori {
        window: u32,
        plan_horizon: u32,
        noise_level: f64,
    },
}

impl AlgorithmSpec {
    pub fn rand() -> Self {
        AlgorithmSpec::Rand
    }

    pub fn heur() -> Self {
        AlgorithmSpec::Heur {
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
        }
    }

    pub fn or() -> Self {
        AlgorithmSpec::Or {
            noise_level: DEFAULT_NOISE_LEVEL,
        }
    }

    pub fn ori() -> Self {
        AlgorithmSpec::Ori {
            window: DEFAULT_REPLAN_WINDOW,
            plan_horizon: DEFAULT_PLAN_HORIZON,
            noise_level: DEFAULT_NOISE_LEVEL,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            AlgorithmSpec::Rand => "rand",
            AlgorithmSpec::Heur { .. } => "heur",
            AlgorithmSpec::Or { .. } => "or",
            AlgorithmSpec::Ori { .. } => "ori",
        }
    }

    /// Display name used in report rows.
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::Rand => "Rand",
            AlgorithmSpec::Heur { .. } => "Heur",
            AlgorithmSpec::Or { .. } => "OR",
            AlgorithmSpec::Ori { .. } => "OR(I)",
        }
    }

    /// The trained (or planned) policy for `world`. Planning policies draw
    /// their forecast noise from `seed`.
    pub fn build(&self, world: &Arc<World>, seed: u64) -> Result<Box<dyn Policy>> {
        Ok(match *self {
            AlgorithmSpec::Rand => Box::new(RandomPolicy),
            AlgorithmSpec::Heur { threshold_fraction } => {
                Box::new(HeuristicPolicy::new(&world.layout, threshold_fraction))
            }
            AlgorithmSpec::Or { noise_level } => Box::new(or_policy_world(
                world,
                noise_level,
                &mut stream(seed, PLANNER_STREAM),
            )?),
            AlgorithmSpec::Ori {
                window,
                plan_horizon,
                noise_level,
            } => Box::new(OriPolicy::new(
                Arc::clone(world),
                window,
                plan_horizon,
                noise_level,
                stream(seed, PLANNER_STREAM),
            )?),
        })
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rand" => Ok(Self::rand()),
            "heur" => Ok(Self::heur()),
            "or" => Ok(Self::or()),
            "ori" | "or(i)" => Ok(Self::ori()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown algorithm \"{s}\" (expected rand, heur, or, ori)"
            ))),
        }
    }
}

/// Mean outcome of seeded rollouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fulfillment_pct: f64,
    /// Mean undiscounted return, minus the total shortage.
    pub ret: f64,
    pub episodes: usize,
}

/// Seed of the `i`-th evaluation episode under master seed `seed`.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, 1_000 + i as u64)
}

pub fn evaluate_world(
    world: &Arc<World>,
    alg: &AlgorithmSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<Evaluation> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument(
            "at least one evaluation episode is needed".into(),
        ));
    }
    let (mut pct, mut ret) = (0.0, 0.0);
    for i in 0..n_episodes {
        let s = episode_seed(seed, i);
        let mut policy = alg.build(world, s)?;
        let m = rollout_world(Arc::clone(world), &mut policy, s, 1.0)?;
        pct += m.fulfillment_pct;
        ret -= m.total_shortage as f64;
    }
    let n = n_episodes as f64;
    Ok(Evaluation {
        fulfillment_pct: pct / n,
        ret: ret / n,
        episodes: n_episodes,
    })
}

/// Uncached; see [`Evaluator`] for repeated calls.
pub fn evaluate_configuration(
    t: &Topology,
    p: &FleetConfiguration,
    alg: &AlgorithmSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<Evaluation> {
    evaluate_world(&World::new(t, p)?, alg, n_episodes, seed)
}

/// Evaluates configurations of one topology with one algorithm, caching by
/// `(deployment, seed)`.
#[derive(Debug)]
pub struct Evaluator {
    pub layout: Layout,
    pub alg: AlgorithmSpec,
    pub n_episodes: usize,
    cache: HashMap<(Deployment, u64), Evaluation>,
    /// Rollouts actually run.
    pub rollouts: usize,
    pub hits: usize,
}

impl Evaluator {
    pub fn new(t: &Topology, alg: AlgorithmSpec, n_episodes: usize) -> Result<Self> {
        if n_episodes == 0 {
            return Err(Error::InvalidArgument(
                "at least one evaluation episode is needed".into(),
            ));
        }
        Ok(Evaluator {
            layout: Layout::new(t)?,
            alg,
            n_episodes,
            cache: HashMap::new(),
            rollouts: 0,
            hits: 0,
        })
    }

    pub fn evaluate_deployment(&mut self, d: &Deployment, seed: u64) -> Result<Evaluation> {
        if let Some(e) = self.cache.get(&(d.clone(), seed)) {
            self.hits += 1;
            return Ok(*e);
        }
        let world = World::from_parts(self.layout.clone(), d.clone());
        let e = evaluate_world(&world, &self.alg, self.n_episodes, seed)?;
        self.rollouts += self.n_episodes;
        self.cache.insert((d.clone(), seed), e);
        Ok(e)
    }

    pub fn evaluate(
        &mut self,
        t: &Topology,
        p: &FleetConfiguration,
        seed: u64,
    ) -> Result<Evaluation> {
        let d = self.layout.deploy(t, p)?;
        self.evaluate_deployment(&d, seed)
    }

    pub fn distinct(&self) -> usize {
        self.cache.len()
    }
}
