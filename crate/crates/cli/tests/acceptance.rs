//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as failing but do not fail
//! the run; any other failure exits non-zero.

use ecrfd::cc::{compare_table, configure_step, run_cc, ConfigureMethod, RowSpec, TableOptions};
use ecrfd::configurator::{
    autoregressive_sample, surrogate, ConfigSpace, ConfiguratorPolicy, PolicyDims, Sample,
    StepInput, SurrogateParams,
};
use ecrfd::domain::FleetConfiguration;
use ecrfd::eval::AlgorithmSpec;
use ecrfd::gen::{
    gen_topology, planted_topology, random_small_instance, tiny_grid, Shape, PLANTED_ROUTE,
};
use ecrfd::planner::{brute_force_min_shortage, or_policy_world};
use ecrfd::policy::random_policy;
use ecrfd::search::{ga_search_configs, GaParams};
use ecrfd::seed::{rng_from, stream};
use ecrfd::sim::{rollout_world, SimState, Step, World};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

const KNOWN_RED: &[u32] = &[3, 6];

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(t: Instant, limit: Duration) -> bool {
    t.elapsed() < limit
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let t = gen_topology(Shape::Desk, 0);
    let p = FleetConfiguration::round_robin(&t);
    let mut days = 0;
    for ep in 0..50u64 {
        let mut s = SimState::new(&t, &p, ep).unwrap();
        let mut rng = stream(ep, 2);
        loop {
            // The simulator also checks every invariant as each day closes.
            let step = match s.next_decision() {
                Ok(step) => step,
                Err(e) => return outcome(false, format!("episode {ep}: {e}")),
            };
            if let Err(e) = s.check_invariants() {
                return outcome(false, format!("episode {ep} day {}: {e}", s.day()));
            }
            match step {
                Step::Decision(d) => {
                    let a = random_policy(&d, &mut rng);
                    if let Err(e) = s.apply_action(&d, a) {
                        return outcome(false, format!("episode {ep}: {e}"));
                    }
                }
                Step::End => break,
            }
        }
        days += t.horizon;
    }
    let ok = within(start, Duration::from_secs(30));
    outcome(
        ok,
        format!(
            "50 episodes, {days} days, {:.1}s (limit 30s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn planner_oracle() -> Outcome {
    let start = Instant::now();
    let grid = tiny_grid();
    let mut mismatches = 0;
    for (t, p) in &grid {
        let world = World::new(t, p).unwrap();
        let best = brute_force_min_shortage(&SimState::init(Arc::clone(&world), 1)).unwrap();
        let pol = or_policy_world(&world, 0.0, &mut rng_from(0)).unwrap();
        if pol.plan.planned_shortage() != best {
            mismatches += 1;
        }
    }
    let ok = grid.len() >= 200 && mismatches == 0 && within(start, Duration::from_secs(120));
    outcome(
        ok,
        format!(
            "{} instances, {mismatches} mismatches, {:.1}s (limit 120s)",
            grid.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn plan_equals_execution() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..20 {
        let (t, p) = random_small_instance(seed);
        let world = World::new(&t, &p).unwrap();
        let mut pol = or_policy_world(&world, 0.0, &mut rng_from(0)).unwrap();
        let planned = pol.plan.planned_shortage();
        let executed = rollout_world(world, &mut pol, seed, 1.0)
            .unwrap()
            .total_shortage;
        if planned != executed {
            bad.push(format!(
                "seed {seed}: planned {planned} executed {executed}"
            ));
        }
    }
    let detail = if bad.is_empty() {
        "20 instances exact".to_string()
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

fn masking_and_gradients() -> Outcome {
    let t = gen_topology(Shape::Desk, 0);
    let space = ConfigSpace::new(&t).unwrap();
    let pol = ConfiguratorPolicy::new(space.dims(16), &mut rng_from(3));
    let mut rng = rng_from(4);
    let (mut samples, mut infeasible) = (0, 0);
    let mut s = space.reset();
    while samples < 100_000 {
        if s.is_terminal() {
            s = space.reset();
        }
        let (triple, _) = autoregressive_sample(&pol, &space, &s, &mut rng).unwrap();
        samples += 1;
        if !space.is_feasible(&s, triple) {
            infeasible += 1;
            s = space.reset();
            continue;
        }
        s = space.assign(&s, triple).unwrap();
    }

    let dims = PolicyDims {
        n_in: 4,
        hidden: 3,
        n_routes: 2,
        n_ports: 3,
        n_vessels: 2,
    };
    let mut rng = rng_from(9);
    let pol = ConfiguratorPolicy::new(dims, &mut rng);
    let batch: Vec<Sample> = (0..8)
        .map(|i| {
            let x = (0..4).map(|j| ((i * 4 + j) as f64 * 0.37).sin()).collect();
            let input = StepInput {
                x,
                route_mask: vec![true, true],
                port_mask: vec![vec![true, true, false], vec![false, true, true]],
                vessel_mask: vec![true, i % 3 != 0],
            };
            let (choice, lp) = pol.choose(&input, &mut rng, false).unwrap();
            let shift = [0.05, -0.4, 0.3, -0.02][i % 4];
            Sample {
                input,
                choice,
                old_log_prob: lp + shift,
                advantage: [1.0, -0.7][i % 2],
            }
        })
        .collect();
    let sp = SurrogateParams::default();
    let (_, g, _) = surrogate(&pol, &batch, sp);
    let eps = 1e-6;
    let num: Vec<f64> = (0..g.len())
        .map(|i| {
            let (mut plus, mut minus) = (pol.clone(), pol.clone());
            plus.theta[i] += eps;
            minus.theta[i] -= eps;
            (surrogate(&plus, &batch, sp).0 - surrogate(&minus, &batch, sp).0) / (2.0 * eps)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = g.iter().zip(&num).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&g).max(norm(&num));
    outcome(
        infeasible == 0 && rel < 1e-4,
        format!("{infeasible} infeasible of {samples} samples; gradient relative error {rel:.2e} (limit 1e-4)"),
    )
}

fn planted_recovery() -> Outcome {
    let t = planted_topology();
    let start = Instant::now();
    let mut rl = Vec::new();
    for seed in 0..5 {
        let out = configure_step(
            &t,
            &AlgorithmSpec::heur(),
            ConfigureMethod::RlConfigurator,
            2000,
            seed,
        )
        .unwrap();
        rl.push(out.configuration.count_on(PLANTED_ROUTE));
    }
    let rl_time = start.elapsed();
    let start = Instant::now();
    let mut ga = Vec::new();
    for seed in 0..5 {
        let params = GaParams {
            generations: 30,
            seed,
            ..GaParams::default()
        };
        let out = ga_search_configs(&t, |p| Ok(p.count_on(PLANTED_ROUTE) as f64), &params).unwrap();
        ga.push(out.best.count_on(PLANTED_ROUTE));
    }
    let ga_time = start.elapsed();
    let wins = |v: &[usize]| v.iter().filter(|&&n| n >= 3).count();
    let limit = Duration::from_secs(300);
    outcome(
        wins(&rl) >= 4 && wins(&ga) >= 4 && rl_time < limit && ga_time < limit,
        format!(
            "vessels on A: rl {rl:?} ({:.0}s), ga {ga:?} ({:.1}s)",
            rl_time.as_secs_f64(),
            ga_time.as_secs_f64()
        ),
    )
}

fn table_ordering() -> Outcome {
    let start = Instant::now();
    let t = gen_topology(Shape::Desk, 0);
    let table = compare_table(&t, &RowSpec::standard(), &TableOptions::default()).unwrap();
    print!("{}", indent(&table.text()));
    let runs = |label: &str| -> &[f64] { &table.row(label).unwrap().per_run };
    let count = |a: &str, b: &str, holds: fn(f64, f64) -> bool| {
        runs(a)
            .iter()
            .zip(runs(b))
            .filter(|(x, y)| holds(**x, **y))
            .count()
    };
    let gt = |x: f64, y: f64| x > y;
    let ge = |x: f64, y: f64| x >= y;
    let lt = |x: f64, y: f64| x < y;
    let checks = [
        ("a", count("CC-Heur-OR(I)", "RandomConf-OR(I)", gt)),
        ("b", count("CC-Rand-OR(I)", "CC-Rand-Rand", gt)),
        ("c", count("CC-OR(I)-Rand", "RandomConf-OR(I)", lt)),
        ("d/GA", count("CC-Heur-OR(I)", "GA joint", ge)),
        ("d/LS-NET", count("CC-Heur-OR(I)", "LS-NET+OR(I)", ge)),
    ];
    let n = table.options.runs;
    let ok = checks.iter().all(|(_, c)| *c >= 4) && within(start, Duration::from_secs(900));
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, c)| format!("({name}) {c}/{n}"))
        .collect();
    outcome(
        ok,
        format!(
            "{}; {:.0}s (limit 900s)",
            detail.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("      {l}\n")).collect()
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ecrfd"))
        .args(args)
        .output()
        .expect("run ecrfd")
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("ecrfd-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let topo_dir = root.join("topo");
    let topo = topo_dir.join("desk.yaml");
    let out = cli(&[
        "gen-topology",
        "--shape",
        "desk",
        "--out",
        topo_dir.to_str().unwrap(),
    ]);
    if !out.status.success() {
        return outcome(
            false,
            format!(
                "gen-topology failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ),
        );
    }
    let topo = topo.to_str().unwrap();
    let runs: &[(&str, &[&str], &[&str])] = &[
        (
            "simulate",
            &["--policy", "heur", "--episodes", "3", "--trace"],
            &["metrics.csv", "trace.csv"],
        ),
        ("train-conf", &["--budget", "40"], &["curve.csv"]),
        (
            "search",
            &["--method", "gajoint", "--budget", "40"],
            &["history.csv"],
        ),
        (
            "cc",
            &["--cheap", "heur", "--star", "heur", "--budget", "40"],
            &["metrics.csv"],
        ),
        (
            "compare",
            &[
                "--rows",
                "cc-heur-heur,randomconf-heur",
                "--runs",
                "2",
                "--budget",
                "20",
            ],
            &["table.csv"],
        ),
    ];
    let mut compared = 0;
    for (cmd, extra, files) in runs {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let dir = root.join(format!("{cmd}-{attempt}"));
            let mut args = vec![
                *cmd,
                "--topology",
                topo,
                "--seed",
                "7",
                "--out",
                dir.to_str().unwrap(),
            ];
            args.extend_from_slice(extra);
            let out = cli(&args);
            if !out.status.success() {
                return outcome(
                    false,
                    format!("{cmd} failed: {}", String::from_utf8_lossy(&out.stderr)),
                );
            }
            outputs.push(dir);
        }
        for f in *files {
            let read = |d: &Path| std::fs::read(d.join(f)).unwrap_or_default();
            let (a, b) = (read(&outputs[0]), read(&outputs[1]));
            if a.is_empty() || a != b {
                return outcome(false, format!("{cmd}: {f} differs between runs"));
            }
            compared += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    outcome(
        true,
        format!("{compared} CSV files byte-identical across repeated runs"),
    )
}

fn scale_smoke() -> Outcome {
    let start = Instant::now();
    let t = gen_topology(Shape::Wwt1, 0);
    let heur = AlgorithmSpec::heur();
    match run_cc(&t, &heur, &heur, ConfigureMethod::RlConfigurator, 200, 5, 0) {
        Ok(r) => outcome(
            within(start, Duration::from_secs(600)),
            format!(
                "{} {:.2}% ± {:.2}, {:.0}s (limit 600s)",
                r.label,
                r.mean,
                r.ci95,
                start.elapsed().as_secs_f64()
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() {
    // `cargo test -- <filter>` style arguments select criteria by number.
    let only: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 8] = [
        (1, "conservation suite", conservation),
        (2, "planner oracle equivalence", planner_oracle),
        (3, "plan equals execution", plan_equals_execution),
        (
            4,
            "configurator masking and gradients",
            masking_and_gradients,
        ),
        (5, "planted optimum recovery", planted_recovery),
        (6, "table ordering at desk scale", table_ordering),
        (7, "CLI determinism", determinism),
        (8, "wwt1 scale smoke test", scale_smoke),
    ];
    let mut unexpected = 0;
    for (n, name, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let r = run();
        let known = KNOWN_RED.contains(&n);
        let tag = match (r.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {n} {tag}: {name}: {}", r.detail);
        if !r.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
