//! Configure, then conquer: pick a fleet configuration with a cheap
//! algorithm, then evaluate a stronger one in that configuration. Also the
//! multi-row comparison report.

use crate::configurator::{train_configurator, ConfigSpace, TrainParams};
use crate::domain::{FleetConfiguration, Topology};
use crate::error::{Error, Result};
use crate::eval::{episode_seed, AlgorithmSpec, Evaluator};
use crate::planner::DEFAULT_NOISE_LEVEL;
use crate::search::{ga_joint, ls_net, random_configurations, GaParams, DEFAULT_JOINT_EPISODES};
use crate::seed::{derive_seed, stream};
use crate::sim::{rollout_world, EpisodeMetrics, World};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub const DEFAULT_BUDGET: usize = 2000;
pub const DEFAULT_SEEDS: usize = 5;
/// Rollouts per configuration evaluation during the configure step.
pub const CONFIGURE_EPISODES: usize = 2;
pub const TABLE_HEADER: &str = "row,mean,ci95,seeds,walltime_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigureMethod {
    RlConfigurator,
    LsNet,
    RandomConfBest,
}

impl ConfigureMethod {
    pub fn name(self) -> &'static str {
        match self {
            ConfigureMethod::RlConfigurator => "rl-configurator",
            ConfigureMethod::LsNet => "lsnet",
            ConfigureMethod::RandomConfBest => "randomconf-best",
        }
    }
}

impl fmt::Display for ConfigureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfigureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl" | "rl-configurator" => Ok(ConfigureMethod::RlConfigurator),
            "lsnet" => Ok(ConfigureMethod::LsNet),
            "randomconf" | "randomconf-best" => Ok(ConfigureMethod::RandomConfBest),
            _ => Err(Error::InvalidArgument(format!(
                "unknown configure method \"{s}\" (expected rl-configurator, lsnet, randomconf-best)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigureOutcome {
    pub configuration: FleetConfiguration,
    pub method: ConfigureMethod,
    /// Configurations scored during the search.
    pub evaluations: usize,
    /// Rollouts actually run; repeats are served from the cache.
    pub rollouts: usize,
}

/// The one configuration the random-configuration baseline uses for `seed`.
pub fn random_configuration(t: &Topology, seed: u64) -> Result<FleetConfiguration> {
    Ok(random_configurations(t, 1, &mut stream(seed, 30))?.remove(0))
}

/// Training settings for a rollout budget. Budgets too small for one full
/// batch shrink the batch instead.
pub fn configure_params(budget: usize, seed: u64) -> TrainParams {
    let mut params = TrainParams {
        seed,
        eval_episodes: CONFIGURE_EPISODES,
        ..TrainParams::default()
    }
    .with_budget(budget);
    if params.iterations == 0 {
        params.batch_size = (budget / CONFIGURE_EPISODES).max(1);
        params.iterations = 1;
    }
    params
}

/// `budget` caps the rollouts requested from the cheap algorithm, cached
/// or not. The planner-objective search runs no rollouts and ignores it.
pub fn configure_step(
    t: &Topology,
    cheap: &AlgorithmSpec,
    method: ConfigureMethod,
    budget: usize,
    seed: u64,
) -> Result<ConfigureOutcome> {
    match method {
        ConfigureMethod::RlConfigurator => {
            let space = ConfigSpace::new(t)?;
            let mut ev = Evaluator::new(t, *cheap, CONFIGURE_EPISODES)?;
            let params = configure_params(budget, seed);
            let (_, report) = train_configurator(&space, &mut ev, &params)?;
            Ok(ConfigureOutcome {
                configuration: crate::configurator::extract_best_configuration(&report)?,
                method,
                evaluations: report.evaluations,
                rollouts: report.rollouts,
            })
        }
        ConfigureMethod::LsNet => {
            let out = ls_net(
                t,
                &GaParams {
                    seed,
                    ..GaParams::default()
                },
                DEFAULT_NOISE_LEVEL,
            )?;
            Ok(ConfigureOutcome {
                configuration: out.best,
                method,
                evaluations: out.fitness_calls + out.cache_hits,
                rollouts: 0,
            })
        }
        ConfigureMethod::RandomConfBest => {
            let n = (budget / CONFIGURE_EPISODES).max(1);
            let candidates = random_configurations(t, n, &mut stream(seed, 30))?;
            let mut ev = Evaluator::new(t, *cheap, CONFIGURE_EPISODES)?;
            let eval_seed = derive_seed(seed, 12);
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in candidates.iter().enumerate() {
                let f = ev.evaluate(t, p, eval_seed)?.fulfillment_pct;
                if best.is_none_or(|(_, b)| f > b) {
                    best = Some((i, f));
                }
            }
            let (i, _) = best.expect("at least one candidate");
            Ok(ConfigureOutcome {
                configuration: candidates[i].clone(),
                method,
                evaluations: n,
                rollouts: ev.rollouts,
            })
        }
    }
}

/// Half-width of the two-sided 95% Student-t interval of the mean.
pub fn ci95_half_width(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a confidence interval needs at least 2 values, got {n}"
        )));
    }
    let k = n as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let t = StudentsT::new(0.0, 1.0, k - 1.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(t * (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcResult {
    pub label: String,
    pub configuration: FleetConfiguration,
    pub star: AlgorithmSpec,
    pub method: Option<ConfigureMethod>,
    /// Fulfillment per evaluation seed.
    pub values: Vec<f64>,
    pub episodes: Vec<EpisodeMetrics>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub ci95: f64,
    pub walltime_s: f64,
}

/// One rollout of `star`'s policy in `world` per seed.
fn episodes(
    world: &Arc<World>,
    star: &AlgorithmSpec,
    seeds: &[u64],
) -> Result<Vec<EpisodeMetrics>> {
    seeds
        .iter()
        .map(|&s| {
            let mut policy = star.build(world, s)?;
            rollout_world(Arc::clone(world), &mut policy, s, 1.0)
        })
        .collect()
}

fn evaluate_seeds(world: &Arc<World>, star: &AlgorithmSpec, seeds: &[u64]) -> Result<Vec<f64>> {
    Ok(episodes(world, star, seeds)?
        .iter()
        .map(|m| m.fulfillment_pct)
        .collect())
}

/// Evaluate `star` in configuration `p` over `k_seeds` seeded rollouts.
pub fn conquer_step(
    t: &Topology,
    p: &FleetConfiguration,
    star: &AlgorithmSpec,
    k_seeds: usize,
    seed: u64,
) -> Result<CcResult> {
    if k_seeds < 2 {
        return Err(Error::InvalidArgument(format!(
            "conquer needs at least 2 seeds, got {k_seeds}"
        )));
    }
    let started = Instant::now();
    let world = World::new(t, p)?;
    let seeds: Vec<u64> = (0..k_seeds).map(|i| episode_seed(seed, i)).collect();
    let episodes = episodes(&world, star, &seeds)?;
    let values: Vec<f64> = episodes.iter().map(|m| m.fulfillment_pct).collect();
    Ok(CcResult {
        episodes,
        label: star.label().to_string(),
        configuration: p.clone(),
        star: *star,
        method: None,
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ci95: ci95_half_width(&values)?,
        values,
        seeds,
        walltime_s: started.elapsed().as_secs_f64(),
    })
}

pub fn run_cc(
    t: &Topology,
    cheap: &AlgorithmSpec,
    star: &AlgorithmSpec,
    method: ConfigureMethod,
    budget: usize,
    k_seeds: usize,
    seed: u64,
) -> Result<CcResult> {
    let started = Instant::now();
    let conf = configure_step(t, cheap, method, budget, seed)?;
    let mut r = conquer_step(t, &conf.configuration, star, k_seeds, seed)?;
    r.label = format!("CC-{}-{}", cheap.label(), star.label());
    r.method = Some(method);
    r.walltime_s = started.elapsed().as_secs_f64();
    Ok(r)
}

/// One row of a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowSpec {
    Cc {
        cheap: AlgorithmSpec,
        star: AlgorithmSpec,
    },
    GaJoint,
    LsNet {
        star: AlgorithmSpec,
    },
    RandomConf {
        star: AlgorithmSpec,
    },
}

impl RowSpec {
    pub fn label(&self) -> String {
        match self {
            RowSpec::Cc { cheap, star } => format!("CC-{}-{}", cheap.label(), star.label()),
            RowSpec::GaJoint => "GA joint".into(),
            RowSpec::LsNet { star } => format!("LS-NET+{}", star.label()),
            RowSpec::RandomConf { star } => format!("RandomConf-{}", star.label()),
        }
    }

    /// The rows of the standard comparison.
    pub fn standard() -> Vec<RowSpec> {
        let (rand, heur, ori) = (
            AlgorithmSpec::rand(),
            AlgorithmSpec::heur(),
            AlgorithmSpec::ori(),
        );
        vec![
            RowSpec::Cc {
                cheap: heur,
                star: ori,
            },
            RowSpec::Cc {
                cheap: rand,
                star: ori,
            },
            RowSpec::Cc {
                cheap: heur,
                star: heur,
            },
            RowSpec::Cc {
                cheap: rand,
                star: rand,
            },
            RowSpec::Cc {
                cheap: ori,
                star: rand,
            },
            RowSpec::GaJoint,
            RowSpec::LsNet { star: ori },
            RowSpec::RandomConf { star: ori },
        ]
    }
}

impl FromStr for RowSpec {
    type Err = Error;

    /// `cc-<cheap>-<star>`, `gajoint`, `lsnet-<star>` or `randomconf-<star>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let parts: Vec<&str> = lower.split('-').collect();
        match parts.as_slice() {
            ["cc", cheap, star] => Ok(RowSpec::Cc { cheap: cheap.parse()?, star: star.parse()? }),
            ["gajoint"] => Ok(RowSpec::GaJoint),
            ["lsnet", star] => Ok(RowSpec::LsNet { star: star.parse()? }),
            ["randomconf", star] => Ok(RowSpec::RandomConf { star: star.parse()? }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown row \"{s}\" (expected cc-<cheap>-<star>, gajoint, lsnet-<star>, randomconf-<star>)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    /// Pipeline runs per row; run `j` uses the same seed in every row.
    pub runs: usize,
    /// Evaluation rollouts per run.
    pub eval_episodes: usize,
    pub budget: usize,
    pub seed: u64,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            runs: DEFAULT_SEEDS,
            eval_episodes: DEFAULT_SEEDS,
            budget: DEFAULT_BUDGET,
            seed: 0,
        }
    }
}

impl TableOptions {
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs)
            .map(|j| derive_seed(self.seed, 500 + j as u64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    /// Mean evaluation fulfillment of each pipeline run.
    pub per_run: Vec<f64>,
    pub configurations: Vec<FleetConfiguration>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    /// Zero when there is a single run.
    pub ci95: f64,
    pub walltime_s: f64,
}

/// One pipeline run of `row`: its configuration and mean evaluation
/// fulfillment over the seeds shared by every row.
pub fn run_row(
    t: &Topology,
    row: &RowSpec,
    budget: usize,
    seed: u64,
    eval_seeds: &[u64],
) -> Result<(FleetConfiguration, f64)> {
    let (p, values) = match row {
        RowSpec::Cc { cheap, star } => {
            let p = configure_step(t, cheap, ConfigureMethod::RlConfigurator, budget, seed)?
                .configuration;
            let values = evaluate_seeds(&World::new(t, &p)?, star, eval_seeds)?;
            (p, values)
        }
        RowSpec::LsNet { star } => {
            let p = configure_step(t, star, ConfigureMethod::LsNet, budget, seed)?.configuration;
            let values = evaluate_seeds(&World::new(t, &p)?, star, eval_seeds)?;
            (p, values)
        }
        RowSpec::RandomConf { star } => {
            let p = random_configuration(t, seed)?;
            let values = evaluate_seeds(&World::new(t, &p)?, star, eval_seeds)?;
            (p, values)
        }
        RowSpec::GaJoint => {
            let out = ga_joint(
                t,
                &GaParams {
                    seed,
                    ..GaParams::default()
                },
                DEFAULT_JOINT_EPISODES,
            )?;
            let world = World::new(t, &out.configuration)?;
            let values = eval_seeds
                .iter()
                .map(|&s| {
                    let mut pol = out.policy.clone();
                    Ok(rollout_world(Arc::clone(&world), &mut pol, s, 1.0)?.fulfillment_pct)
                })
                .collect::<Result<Vec<f64>>>()?;
            (out.configuration, values)
        }
    };
    Ok((p, values.iter().sum::<f64>() / values.len().max(1) as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<TableRow>,
    pub options: TableOptions,
}

/// Run every row over the same pipeline seeds and evaluation seeds.
pub fn compare_table(t: &Topology, rows: &[RowSpec], opts: &TableOptions) -> Result<Table> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "a comparison needs at least one row".into(),
        ));
    }
    if opts.runs == 0 || opts.eval_episodes == 0 {
        return Err(Error::InvalidArgument(
            "runs and evaluation episodes must be positive".into(),
        ));
    }
    let seeds = opts.run_seeds();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let started = Instant::now();
        let mut per_run = Vec::with_capacity(seeds.len());
        let mut configurations = Vec::with_capacity(seeds.len());
        for &s in &seeds {
            let eval: Vec<u64> = (0..opts.eval_episodes)
                .map(|i| episode_seed(s, i))
                .collect();
            let (p, v) = run_row(t, row, opts.budget, s, &eval)?;
            per_run.push(v);
            configurations.push(p);
        }
        let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
        out.push(TableRow {
            label: row.label(),
            ci95: if per_run.len() >= 2 {
                ci95_half_width(&per_run)?
            } else {
                0.0
            },
            mean,
            per_run,
            configurations,
            seeds: seeds.clone(),
            walltime_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(Table {
        rows: out,
        options: *opts,
    })
}

impl Table {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Aligned text; the best mean is wrapped in `**`.
    pub fn text(&self) -> String {
        let best = self
            .rows
            .iter()
            .map(|r| r.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(3);
        let mut out = format!("{:<width$}  {:>18}\n", "row", "fulfillment %");
        for r in &self.rows {
            let cell = format!("{:.2} ± {:.2}", r.mean, r.ci95);
            let cell = if r.mean == best {
                format!("**{cell}**")
            } else {
                cell
            };
            let _ = writeln!(out, "{:<width$}  {:>18}", r.label, cell);
        }
        out
    }

    /// `row,mean,ci95,seeds,walltime_s`; wall time is left empty unless
    /// `timing` is set, so reruns produce identical files.
    pub fn csv(&self, timing: bool) -> String {
        let mut out = format!("{TABLE_HEADER}\n");
        for r in &self.rows {
            let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
            let wall = if timing {
                format!("{:.3}", r.walltime_s)
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{},{}",
                r.label,
                r.mean,
                r.ci95,
                seeds.join(";"),
                wall
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_topology, planted_topology, Shape, PLANTED_ROUTE};

    #[test]
    fn t_interval_matches_tables() {
        // t(0.975, 4) = 2.776445.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let expected = 2.776_445_105 * (2.5f64 / 5.0).sqrt();
        assert!((ci95_half_width(&xs).unwrap() - expected).abs() < 1e-6);
        assert!(ci95_half_width(&[1.0]).is_err());
        assert_eq!(ci95_half_width(&[3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn conquer_needs_two_seeds() {
        let t = planted_topology();
        let p = FleetConfiguration::round_robin(&t);
        assert!(conquer_step(&t, &p, &AlgorithmSpec::Rand, 1, 0).is_err());
        let r = conquer_step(&t, &p, &AlgorithmSpec::Rand, 3, 0).unwrap();
        assert_eq!(r.values.len(), 3);
        let direct =
            crate::eval::evaluate_configuration(&t, &p, &AlgorithmSpec::Rand, 3, 0).unwrap();
        assert!((r.mean - direct.fulfillment_pct).abs() < 1e-9);
        assert!((0.0..=100.0).contains(&r.mean));
    }

    #[test]
    fn conquer_sees_the_configuration_only() {
        let t = gen_topology(Shape::Desk, 0);
        let p = random_configuration(&t, 4).unwrap();
        let yaml = p.to_yaml_string();
        let back = FleetConfiguration::from_yaml_str(&yaml).unwrap();
        let a = conquer_step(&t, &p, &AlgorithmSpec::heur(), 3, 9).unwrap();
        let b = conquer_step(&t, &back, &AlgorithmSpec::heur(), 3, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn single_evaluation_budget_returns_that_configuration() {
        let t = gen_topology(Shape::Desk, 0);
        let rl = configure_step(
            &t,
            &AlgorithmSpec::heur(),
            ConfigureMethod::RlConfigurator,
            CONFIGURE_EPISODES,
            3,
        )
        .unwrap();
        assert_eq!(rl.evaluations, 1);
        let rb = configure_step(
            &t,
            &AlgorithmSpec::heur(),
            ConfigureMethod::RandomConfBest,
            CONFIGURE_EPISODES,
            3,
        )
        .unwrap();
        assert_eq!(rb.configuration, random_configuration(&t, 3).unwrap());
    }

    #[test]
    fn cc_runs_repeat_exactly() {
        let t = gen_topology(Shape::Desk, 0);
        let run = || {
            run_cc(
                &t,
                &AlgorithmSpec::heur(),
                &AlgorithmSpec::heur(),
                ConfigureMethod::RlConfigurator,
                200,
                3,
                1,
            )
        };
        let (a, b) = (run().unwrap(), run().unwrap());
        assert_eq!(
            (a.values, a.configuration, a.label.clone()),
            (b.values, b.configuration, b.label)
        );
        assert_eq!(a.label, "CC-Heur-Heur");
    }

    #[test]
    fn rl_configure_recovers_the_planted_route() {
        let t = planted_topology();
        let out = configure_step(
            &t,
            &AlgorithmSpec::heur(),
            ConfigureMethod::RlConfigurator,
            DEFAULT_BUDGET,
            0,
        )
        .unwrap();
        assert!(
            out.configuration.count_on(PLANTED_ROUTE) >= 3,
            "{}",
            out.configuration
        );
        assert!(out.rollouts <= DEFAULT_BUDGET);
    }

    #[test]
    fn row_names_parse() {
        for row in RowSpec::standard() {
            let key = match row {
                RowSpec::Cc { cheap, star } => format!("cc-{}-{}", cheap.tag(), star.tag()),
                RowSpec::GaJoint => "gajoint".into(),
                RowSpec::LsNet { star } => format!("lsnet-{}", star.tag()),
                RowSpec::RandomConf { star } => format!("randomconf-{}", star.tag()),
            };
            assert_eq!(key.parse::<RowSpec>().unwrap(), row);
        }
        assert!("cc-heur".parse::<RowSpec>().is_err());
    }

    #[test]
    fn one_row_table_is_one_line_and_repeatable() {
        let t = gen_topology(Shape::Desk, 0);
        let opts = TableOptions {
            runs: 2,
            eval_episodes: 2,
            budget: 100,
            seed: 3,
        };
        let rows = [RowSpec::Cc {
            cheap: AlgorithmSpec::Rand,
            star: AlgorithmSpec::Rand,
        }];
        let a = compare_table(&t, &rows, &opts).unwrap();
        let b = compare_table(&t, &rows, &opts).unwrap();
        assert_eq!(a.csv(false), b.csv(false));
        assert_eq!(a.csv(false).lines().count(), 2);
        assert_eq!(a.text().lines().count(), 2);
        assert!(a.text().contains("**"));
        assert!(compare_table(&t, &[], &opts).is_err());
    }
}
