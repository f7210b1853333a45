use super::{
    crossover_deployment, evolve, mutate_deployment, random_deployment, GaParams, GenerationStats,
};
use crate::domain::{Deployment, FleetConfiguration, Layout, Topology};
use crate::error::Result;
use crate::eval::episode_seed;
use crate::policy::Policy;
use crate::seed::{stream, SimRng};
use crate::sim::{rollout_world, DecisionPoint, RepositionAction, SimState, World};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::sync::Arc;

pub const DEFAULT_JOINT_EPISODES: usize = 3;

/// Open-loop repositioning: cell `(i, j)` is vessel `i`'s action at its
/// `j`-th call, as a fraction of the feasible range. Positive values load
/// that fraction of the most the vessel can take, negative ones discharge
/// that fraction of the most it can give. Calls past the last column do
/// nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolicy {
    pub cells: Vec<Vec<f64>>,
}

impl MatrixPolicy {
    pub fn zeros(vessels: usize, calls: usize) -> Self {
        MatrixPolicy {
            cells: vec![vec![0.0; calls]; vessels],
        }
    }

    pub fn delta(&self, d: &DecisionPoint) -> i64 {
        let c = self
            .cells
            .get(d.vessel)
            .and_then(|row| row.get(d.call as usize))
            .copied()
            .unwrap_or(0.0);
        let (lo, hi) = d.feasible;
        let delta = if c >= 0.0 {
            (c * hi.max(0) as f64).round()
        } else {
            (-c * lo.min(0) as f64).round()
        };
        d.clamp(delta as i64)
    }
}

impl Policy for MatrixPolicy {
    fn act(&mut self, _: &SimState, d: &DecisionPoint, _: &mut SimRng) -> RepositionAction {
        RepositionAction::new(self.delta(d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointGenome {
    pub deployment: Deployment,
    pub matrix: MatrixPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcome {
    pub configuration: FleetConfiguration,
    pub policy: MatrixPolicy,
    /// Mean fulfillment of the best genome over the search episodes.
    pub fulfillment_pct: f64,
    pub history: Vec<GenerationStats>,
    /// Fitness of every genome of the first generation.
    pub initial_fitness: Vec<f64>,
}

/// Most calls any vessel can make in the horizon.
pub fn max_calls(layout: &Layout) -> usize {
    let shortest = layout
        .routes
        .iter()
        .flat_map(|r| r.legs.iter())
        .fold(f64::INFINITY, |m, &l| m.min(l))
        .max(1.0);
    (f64::from(layout.horizon) / shortest).ceil() as usize + 1
}

/// Mean fulfillment of `matrix` under `deployment` over the seeded episodes.
pub fn joint_fitness(layout: &Layout, g: &JointGenome, seeds: &[u64]) -> Result<f64> {
    let world = World::from_parts(layout.clone(), g.deployment.clone());
    let mut total = 0.0;
    for &s in seeds {
        let mut pol = g.matrix.clone();
        total += rollout_world(Arc::clone(&world), &mut pol, s, 1.0)?.fulfillment_pct;
    }
    Ok(total / seeds.len().max(1) as f64)
}

/// Genetic search over deployments and action matrices together. Genes are
/// per vessel: its route, start and matrix row travel as one unit through
/// crossover; mutation resamples the deployment gene and perturbs cells.
pub fn ga_joint(t: &Topology, params: &GaParams, n_eval_episodes: usize) -> Result<JointOutcome> {
    let layout = Layout::new(t)?;
    let calls = max_calls(&layout);
    let n = layout.vessels.len();
    let seeds: Vec<u64> = (0..n_eval_episodes.max(1))
        .map(|i| episode_seed(params.seed ^ 0x6a01, i))
        .collect();
    let mut rng = stream(params.seed, 22);
    let jitter = Normal::new(0.0, 0.3).expect("finite std");
    let mut initial = Vec::new();
    let (best, fitness, history) = evolve(
        params,
        &mut rng,
        |rng| JointGenome {
            deployment: random_deployment(&layout, rng),
            matrix: MatrixPolicy {
                cells: (0..n)
                    .map(|_| (0..calls).map(|_| rng.random_range(-1.0..=1.0)).collect())
                    .collect(),
            },
        },
        |g| {
            let f = joint_fitness(&layout, g, &seeds)?;
            if initial.len() < params.population {
                initial.push(f);
            }
            Ok(f)
        },
        |a, b, rng| {
            let (deployment, cut) = crossover_deployment(&a.deployment, &b.deployment, rng);
            let mut cells = a.matrix.cells.clone();
            cells[cut..].clone_from_slice(&b.matrix.cells[cut..]);
            JointGenome {
                deployment,
                matrix: MatrixPolicy { cells },
            }
        },
        |g, rng| {
            mutate_deployment(&layout, &mut g.deployment, params.mutation_rate, rng);
            for c in g.matrix.cells.iter_mut().flatten() {
                if rng.random_bool(params.mutation_rate) {
                    *c = (*c + jitter.sample(rng)).clamp(-1.0, 1.0);
                }
            }
        },
    )?;
    Ok(JointOutcome {
        configuration: layout.configuration(&best.deployment),
        policy: best.matrix,
        fulfillment_pct: fitness,
        history,
        initial_fitness: initial,
    })
}
