use clap::{Args, Parser, Subcommand};
use ecrfd::cc::{
    compare_table, configure_params, configure_step, conquer_step, run_cc, ConfigureMethod,
    RowSpec, TableOptions, CONFIGURE_EPISODES, DEFAULT_BUDGET, DEFAULT_SEEDS,
};
use ecrfd::configurator::{
    checkpoint_string, extract_best_configuration, train_configurator, ConfigSpace,
};
use ecrfd::domain::{FleetConfiguration, Layout, Topology};
use ecrfd::eval::{episode_seed, AlgorithmSpec, Evaluator};
use ecrfd::gen::{gen_topology, planted_topology, Shape};
use ecrfd::planner::{or_policy_world, parse_plan_text, plan_to_text, DEFAULT_NOISE_LEVEL};
use ecrfd::policy::{PlanPolicy, Policy};
use ecrfd::search::{ga_joint, history_csv, ls_net, GaParams, DEFAULT_JOINT_EPISODES};
use ecrfd::seed::stream;
use ecrfd::sim::{policy_rng, run_episode, EpisodeMetrics, SimState, World, TRACE_HEADER};
use ecrfd::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const METRICS_HEADER: &str = "run,seed,total_demand,total_shortage,fulfillment_pct,return";

/// Empty-container repositioning experiments with fleet deployment.
#[derive(Parser)]
#[command(name = "ecrfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Topology YAML file.
    #[arg(long)]
    topology: PathBuf,
    /// Fleet configuration YAML file; round-robin when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; nothing is written when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the topology's horizon in days.
    #[arg(long)]
    horizon: Option<u32>,
}

#[derive(Clone)]
enum PolicyArg {
    Algorithm(AlgorithmSpec),
    PlanFile(PathBuf),
}

fn parse_policy(s: &str) -> std::result::Result<PolicyArg, String> {
    match s.strip_prefix("plan:") {
        Some(path) if !path.is_empty() => Ok(PolicyArg::PlanFile(path.into())),
        Some(_) => Err("plan: needs a file path".into()),
        None => s
            .parse()
            .map(PolicyArg::Algorithm)
            .map_err(|e: Error| e.to_string()),
    }
}

fn parse_algorithm(s: &str) -> std::result::Result<AlgorithmSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<ConfigureMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_row(s: &str) -> std::result::Result<RowSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy)]
enum ShapeArg {
    Shape(Shape),
    Planted,
}

impl ShapeArg {
    fn name(self) -> &'static str {
        match self {
            ShapeArg::Shape(s) => s.name(),
            ShapeArg::Planted => "planted",
        }
    }
}

fn parse_shape(s: &str) -> std::result::Result<ShapeArg, String> {
    if s == "planted" {
        Ok(ShapeArg::Planted)
    } else {
        s.parse().map(ShapeArg::Shape)
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SearchMethod {
    Lsnet,
    Gajoint,
    Randomconf,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a policy in one configuration.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// rand, heur, or, ori or plan:<file>.
        #[arg(long, default_value = "rand", value_parser = parse_policy)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Also write a per-port daily trace of the first episode.
        #[arg(long)]
        trace: bool,
    },
    /// Plan the whole horizon once and print the plan.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Forecast noise level.
        #[arg(long, default_value_t = DEFAULT_NOISE_LEVEL)]
        noise: f64,
    },
    /// Train the configurator with a cheap repositioning algorithm.
    TrainConf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "heur", value_parser = parse_algorithm)]
        cheap: AlgorithmSpec,
        /// Rollouts requested from the cheap algorithm.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Search configurations without the configurator.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: SearchMethod,
        #[arg(long, default_value = "heur", value_parser = parse_algorithm)]
        cheap: AlgorithmSpec,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Configure with a cheap algorithm, conquer with a strong one.
    Cc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "heur", value_parser = parse_algorithm)]
        cheap: AlgorithmSpec,
        #[arg(long, default_value = "ori", value_parser = parse_algorithm)]
        star: AlgorithmSpec,
        #[arg(long, default_value = "rl-configurator", value_parser = parse_method)]
        method: ConfigureMethod,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Evaluation rollouts of the conquering algorithm.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        episodes: usize,
    },
    /// Compare pipelines over shared seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rows such as cc-heur-ori, gajoint, lsnet-ori,
        /// randomconf-ori; the standard set when absent.
        #[arg(long, value_delimiter = ',', value_parser = parse_row)]
        rows: Vec<RowSpec>,
        /// Pipeline runs per row.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        runs: usize,
        /// Evaluation rollouts per run.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        episodes: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Record wall time in the CSV.
        #[arg(long)]
        timing: bool,
    },
    /// Write the reference topologies.
    GenTopology {
        /// desk, wwt1-shaped, wwt2-shaped or planted; the first three when
        /// absent.
        #[arg(long, value_parser = parse_shape)]
        shape: Option<ShapeArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let text = e.to_string();
            let head: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            eprintln!("{}", head.join(" "));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e
                .to_string()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

struct Inputs {
    topology: Topology,
    config: FleetConfiguration,
    out: Option<PathBuf>,
    seed: u64,
}

impl Common {
    fn load(&self) -> Result<Inputs> {
        let mut topology = Topology::load(&self.topology)?;
        if let Some(h) = self.horizon {
            topology.horizon = h;
        }
        let config = match &self.config {
            Some(path) => FleetConfiguration::load(path)?,
            None => FleetConfiguration::round_robin(&topology),
        };
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Inputs {
            topology,
            config,
            out: self.out.clone(),
            seed: self.seed,
        })
    }
}

fn write(out: &Option<PathBuf>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = out {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn metrics_csv(rows: &[(u64, EpisodeMetrics)]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for (run, (seed, m)) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{run},{seed},{},{},{:.4},{:.4}",
            m.total_demand, m.total_shortage, m.fulfillment_pct, m.discounted_return
        );
    }
    out
}

fn metrics_line(run: usize, seed: u64, m: &EpisodeMetrics) -> String {
    format!(
        "run={run} seed={seed} total_demand={} total_shortage={} fulfillment_pct={:.4} return={:.4}",
        m.total_demand, m.total_shortage, m.fulfillment_pct, m.discounted_return
    )
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            common,
            policy,
            episodes,
            trace,
        } => simulate(&common.load()?, &policy, episodes, trace),
        Command::Plan { common, noise } => plan(&common.load()?, noise),
        Command::TrainConf {
            common,
            cheap,
            budget,
        } => train_conf(&common.load()?, cheap, budget),
        Command::Search {
            common,
            method,
            cheap,
            budget,
        } => search(&common.load()?, method, cheap, budget),
        Command::Cc {
            common,
            cheap,
            star,
            method,
            budget,
            episodes,
        } => {
            let inp = common.load()?;
            let r = run_cc(
                &inp.topology,
                &cheap,
                &star,
                method,
                budget,
                episodes,
                inp.seed,
            )?;
            let rows: Vec<(u64, EpisodeMetrics)> = r
                .seeds
                .iter()
                .copied()
                .zip(r.episodes.iter().cloned())
                .collect();
            write(&inp.out, "config.yaml", &r.configuration.to_yaml_string())?;
            write(&inp.out, "metrics.csv", &metrics_csv(&rows))?;
            println!(
                "{} fulfillment_pct={:.2} ci95={:.2} method={method}",
                r.label, r.mean, r.ci95
            );
            Ok(())
        }
        Command::Compare {
            common,
            rows,
            runs,
            episodes,
            budget,
            timing,
        } => {
            let inp = common.load()?;
            let rows = if rows.is_empty() {
                RowSpec::standard()
            } else {
                rows
            };
            let opts = TableOptions {
                runs,
                eval_episodes: episodes,
                budget,
                seed: inp.seed,
            };
            let table = compare_table(&inp.topology, &rows, &opts)?;
            write(&inp.out, "table.csv", &table.csv(timing))?;
            print!("{}", table.text());
            Ok(())
        }
        Command::GenTopology {
            shape,
            seed,
            horizon,
            out,
        } => gen(shape, seed, horizon, out),
    }
}

fn simulate(inp: &Inputs, policy: &PolicyArg, episodes: usize, trace: bool) -> Result<()> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be positive".into()));
    }
    let world = World::new(&inp.topology, &inp.config)?;
    let plan = match policy {
        PolicyArg::PlanFile(path) => Some(parse_plan_text(
            &ecrfd::domain::read_file(path)?,
            &world.layout,
        )?),
        PolicyArg::Algorithm(_) => None,
    };
    let mut rows = Vec::with_capacity(episodes);
    let mut trace_csv = None;
    for run in 0..episodes {
        let seed = episode_seed(inp.seed, run);
        let mut pol: Box<dyn Policy> = match (policy, &plan) {
            (PolicyArg::Algorithm(alg), _) => alg.build(&world, seed)?,
            (PolicyArg::PlanFile(_), Some(p)) => Box::new(PlanPolicy::new(p.clone())),
            (PolicyArg::PlanFile(_), None) => unreachable!("plan loaded above"),
        };
        let mut state = SimState::init(Arc::clone(&world), seed);
        if trace && run == 0 {
            state.enable_trace();
        }
        let m = run_episode(&mut state, &mut pol, &mut policy_rng(seed), 1.0)?;
        if let Some(records) = state.trace() {
            let mut csv = format!("{TRACE_HEADER}\n");
            for r in records {
                let port = &world.layout.port_ids[r.port];
                let _ = writeln!(
                    csv,
                    "{},{port},{},{},{},{}",
                    r.day, r.stock, r.demand, r.fulfilled, r.shortage
                );
            }
            trace_csv = Some(csv);
        }
        println!("{}", metrics_line(run, seed, &m));
        rows.push((seed, m));
    }
    write(&inp.out, "metrics.csv", &metrics_csv(&rows))?;
    if let Some(csv) = trace_csv {
        write(&inp.out, "trace.csv", &csv)?;
    }
    Ok(())
}

fn plan(inp: &Inputs, noise: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!(
            "noise {noise} outside [0, 1]"
        )));
    }
    let world = World::new(&inp.topology, &inp.config)?;
    let policy = or_policy_world(&world, noise, &mut stream(inp.seed, 3))?;
    let text = plan_to_text(&policy.plan, &world.layout);
    if inp.out.is_some() {
        write(&inp.out, "plan.txt", &text)?;
        println!(
            "planned_objective={} planned_demand={} moves={}",
            policy.plan.planned_objective,
            policy.plan.planned_demand,
            policy.plan.moves.len()
        );
    } else {
        print!("{text}");
    }
    Ok(())
}

fn train_conf(inp: &Inputs, cheap: AlgorithmSpec, budget: usize) -> Result<()> {
    let space = ConfigSpace::new(&inp.topology)?;
    let mut ev = Evaluator::new(&inp.topology, cheap, CONFIGURE_EPISODES)?;
    let params = configure_params(budget, inp.seed);
    let (policy, report) = train_configurator(&space, &mut ev, &params)?;
    let best = extract_best_configuration(&report)?;
    write(
        &inp.out,
        "checkpoint.txt",
        &checkpoint_string(&policy, inp.topology.fingerprint()),
    )?;
    write(&inp.out, "curve.csv", &report.curve_csv())?;
    write(&inp.out, "config.yaml", &best.to_yaml_string())?;
    let reward = report.best.as_ref().map_or(0.0, |b| b.1);
    println!(
        "iterations={} evaluations={} rollouts={} best_reward={reward:.4}",
        report.history.len(),
        report.evaluations,
        report.rollouts
    );
    Ok(())
}

fn search(inp: &Inputs, method: SearchMethod, cheap: AlgorithmSpec, budget: usize) -> Result<()> {
    let t = &inp.topology;
    let ga = GaParams {
        seed: inp.seed,
        ..GaParams::default()
    };
    let (config, summary) = match method {
        SearchMethod::Lsnet => {
            let out = ls_net(t, &ga, DEFAULT_NOISE_LEVEL)?;
            write(&inp.out, "history.csv", &history_csv(&out.history))?;
            (
                out.best,
                format!(
                    "lsnet planned_objective={:.0} fitness_calls={}",
                    out.best_fitness, out.fitness_calls
                ),
            )
        }
        SearchMethod::Gajoint => {
            let out = ga_joint(t, &ga, DEFAULT_JOINT_EPISODES)?;
            write(&inp.out, "history.csv", &history_csv(&out.history))?;
            (
                out.configuration,
                format!("gajoint fulfillment_pct={:.4}", out.fulfillment_pct),
            )
        }
        SearchMethod::Randomconf => {
            let out = configure_step(t, &cheap, ConfigureMethod::RandomConfBest, budget, inp.seed)?;
            let r = conquer_step(t, &out.configuration, &cheap, 2, inp.seed)?;
            (
                out.configuration,
                format!(
                    "randomconf candidates={} fulfillment_pct={:.4}",
                    out.evaluations, r.mean
                ),
            )
        }
    };
    write(&inp.out, "config.yaml", &config.to_yaml_string())?;
    println!("{summary}");
    Ok(())
}

fn gen(
    shape: Option<ShapeArg>,
    seed: u64,
    horizon: Option<u32>,
    out: Option<PathBuf>,
) -> Result<()> {
    let shapes: Vec<ShapeArg> = match shape {
        Some(s) => vec![s],
        None => Shape::ALL.iter().map(|&s| ShapeArg::Shape(s)).collect(),
    };
    if shapes.len() > 1 && out.is_none() {
        return Err(Error::InvalidArgument(
            "--out is required when writing more than one topology".into(),
        ));
    }
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    for s in shapes {
        let mut t = match s {
            ShapeArg::Shape(shape) => gen_topology(shape, seed),
            ShapeArg::Planted => planted_topology(),
        };
        if let Some(h) = horizon {
            t.horizon = h;
        }
        let report = ecrfd::domain::validate_topology(&t);
        if !report.ok {
            return Err(Error::InvalidTopology(report.summary()));
        }
        Layout::new(&t)?;
        match &out {
            Some(dir) => {
                let path: &Path = dir.as_ref();
                t.save(path.join(format!("{}.yaml", s.name())))?;
                println!(
                    "{} ports={} routes={} vessels={} horizon={}",
                    s.name(),
                    t.ports.len(),
                    t.routes.len(),
                    t.vessels.len(),
                    t.horizon
                );
            }
            None => print!("{}", t.to_yaml_string()),
        }
    }
    Ok(())
}
