//! Configuration search baselines: random deployments, a genetic algorithm
//! over deployments, its planner-objective variant, and a genetic
//! algorithm over deployments paired with open-loop action matrices.

mod joint;

pub use joint::{ga_joint, JointGenome, JointOutcome, MatrixPolicy, DEFAULT_JOINT_EPISODES};

use crate::domain::{Deployment, FleetConfiguration, Layout, Topology};
use crate::error::{Error, Result};
use crate::planner::{plan_objective_with_noise, ForecastNoise};
use crate::seed::{stream, SimRng};
use crate::sim::World;
use rand::Rng;
use std::collections::HashMap;
use std::fmt::Write as _;

pub const HISTORY_HEADER: &str = "generation,best,mean";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene resampling probability.
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 20,
            generations: 50,
            tournament: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elitism: 2,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if self.population < 2 {
            return Err(Error::InvalidArgument(
                "population must be at least 2".into(),
            ));
        }
        if !rate(self.crossover_rate) || !rate(self.mutation_rate) {
            return Err(Error::InvalidArgument(
                "crossover and mutation rates must lie in [0, 1]".into(),
            ));
        }
        if self.tournament == 0 || self.elitism > self.population {
            return Err(Error::InvalidArgument(
                "tournament must be positive and elitism at most the population".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness in the population.
    pub best: f64,
    pub mean: f64,
}

pub fn history_csv(history: &[GenerationStats]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for h in history {
        let _ = writeln!(out, "{},{:.6},{:.6}", h.generation, h.best, h.mean);
    }
    out
}

/// Generation loop shared by the searches. Elites are copied with their
/// fitness, so with `elitism >= 1` the best fitness never decreases.
pub(crate) fn evolve<G: Clone>(
    params: &GaParams,
    rng: &mut SimRng,
    mut init: impl FnMut(&mut SimRng) -> G,
    mut fitness: impl FnMut(&G) -> Result<f64>,
    mut crossover: impl FnMut(&G, &G, &mut SimRng) -> G,
    mut mutate: impl FnMut(&mut G, &mut SimRng),
) -> Result<(G, f64, Vec<GenerationStats>)> {
    params.validate()?;
    let mut pop: Vec<(G, f64)> = Vec::with_capacity(params.population);
    for _ in 0..params.population {
        let g = init(rng);
        let f = fitness(&g)?;
        pop.push((g, f));
    }
    let mut history = Vec::with_capacity(params.generations + 1);
    let stats = |generation: usize, pop: &[(G, f64)]| GenerationStats {
        generation,
        best: pop.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        mean: pop.iter().map(|p| p.1).sum::<f64>() / pop.len() as f64,
    };
    history.push(stats(0, &pop));
    let mut best = pop
        .iter()
        .fold(None::<&(G, f64)>, |b, p| {
            if b.is_none_or(|b| p.1 > b.1) {
                Some(p)
            } else {
                b
            }
        })
        .cloned()
        .expect("non-empty population");

    for generation in 1..=params.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        // Stable: earlier individuals win ties.
        order.sort_by(|&a, &b| pop[b].1.total_cmp(&pop[a].1));
        let mut next: Vec<(G, f64)> = order[..params.elitism]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let tournament = |rng: &mut SimRng| -> usize {
            let mut win = rng.random_range(0..pop.len());
            for _ in 1..params.tournament {
                let c = rng.random_range(0..pop.len());
                if pop[c].1 > pop[win].1 {
                    win = c;
                }
            }
            win
        };
        while next.len() < params.population {
            let a = tournament(rng);
            let b = tournament(rng);
            let mut child = if rng.random_bool(params.crossover_rate) {
                crossover(&pop[a].0, &pop[b].0, rng)
            } else {
                pop[a].0.clone()
            };
            mutate(&mut child, rng);
            let f = fitness(&child)?;
            if f > best.1 {
                best = (child.clone(), f);
            }
            next.push((child, f));
        }
        pop = next;
        history.push(stats(generation, &pop));
    }
    Ok((best.0, best.1, history))
}

/// Uniform route, then a uniform stop of that route.
pub(crate) fn random_deployment(layout: &Layout, rng: &mut SimRng) -> Deployment {
    let n = layout.vessels.len();
    let mut d = Deployment {
        route: Vec::with_capacity(n),
        start: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let r = rng.random_range(0..layout.routes.len());
        d.route.push(r);
        d.start
            .push(rng.random_range(0..layout.routes[r].stops.len()));
    }
    d
}

/// Keep every start position on its route.
pub(crate) fn repair(layout: &Layout, d: &mut Deployment) {
    for (r, s) in d.route.iter_mut().zip(d.start.iter_mut()) {
        *r %= layout.routes.len();
        *s %= layout.routes[*r].stops.len();
    }
}

/// One-point crossover on the per-vessel gene string.
pub(crate) fn crossover_deployment(
    a: &Deployment,
    b: &Deployment,
    rng: &mut SimRng,
) -> (Deployment, usize) {
    let n = a.route.len();
    let cut = if n > 1 { rng.random_range(1..n) } else { 0 };
    let mut child = a.clone();
    child.route[cut..].copy_from_slice(&b.route[cut..]);
    child.start[cut..].copy_from_slice(&b.start[cut..]);
    (child, cut)
}

/// Resample `(route, start)` of each vessel with probability `rate`.
pub(crate) fn mutate_deployment(layout: &Layout, d: &mut Deployment, rate: f64, rng: &mut SimRng) {
    for v in 0..d.route.len() {
        if rng.random_bool(rate) {
            let r = rng.random_range(0..layout.routes.len());
            d.route[v] = r;
            d.start[v] = rng.random_range(0..layout.routes[r].stops.len());
        }
    }
    repair(layout, d);
}

pub fn random_configurations(
    t: &Topology,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<FleetConfiguration>> {
    let layout = Layout::new(t)?;
    if layout.routes.is_empty() && !layout.vessels.is_empty() {
        return Err(Error::InvalidTopology(
            "no routes to deploy vessels on".into(),
        ));
    }
    Ok((0..n)
        .map(|_| layout.configuration(&random_deployment(&layout, rng)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: FleetConfiguration,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Distinct configurations handed to the fitness function.
    pub fitness_calls: usize,
    /// Fitness requests answered from the cache.
    pub cache_hits: usize,
}

/// Genetic search over deployments. `fitness` must be deterministic; it is
/// called once per distinct configuration.
pub fn ga_search_configs(
    t: &Topology,
    mut fitness: impl FnMut(&FleetConfiguration) -> Result<f64>,
    params: &GaParams,
) -> Result<GaOutcome> {
    let layout = Layout::new(t)?;
    let mut rng = stream(params.seed, 20);
    let mut cache: HashMap<Deployment, f64> = HashMap::new();
    let mut hits = 0;
    let (best, best_fitness, history) = evolve(
        params,
        &mut rng,
        |rng| random_deployment(&layout, rng),
        |d| {
            if let Some(&f) = cache.get(d) {
                hits += 1;
                return Ok(f);
            }
            let f = fitness(&layout.configuration(d))?;
            cache.insert(d.clone(), f);
            Ok(f)
        },
        |a, b, rng| crossover_deployment(a, b, rng).0,
        |d, rng| mutate_deployment(&layout, d, params.mutation_rate, rng),
    )?;
    Ok(GaOutcome {
        best: layout.configuration(&best),
        best_fitness,
        history,
        fitness_calls: cache.len(),
        cache_hits: hits,
    })
}

/// Genetic search whose fitness is the planner's satisfied demand under
/// one forecast drawn up front and shared by every evaluation.
pub fn ls_net(t: &Topology, params: &GaParams, noise_level: f64) -> Result<GaOutcome> {
    let layout = Layout::new(t)?;
    let noise = ForecastNoise::sample(
        &layout,
        0,
        layout.horizon,
        noise_level,
        &mut stream(params.seed, 21),
    );
    ga_search_configs(
        t,
        |p| {
            let world = World::from_parts(layout.clone(), layout.deploy(t, p)?);
            Ok(plan_objective_with_noise(&world, &noise)? as f64)
        },
        params,
    )
}
