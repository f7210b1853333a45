use std::path::PathBuf;
use std::process::{Command, Output};

fn ecrfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecrfd"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ecrfd-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn desk(dir: &std::path::Path) -> String {
    let out = ecrfd(&[
        "gen-topology",
        "--shape",
        "desk",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.join("desk.yaml").to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_prints_a_metrics_line() {
    let dir = scratch("sim");
    let topo = desk(&dir);
    let out = ecrfd(&[
        "simulate",
        "--topology",
        &topo,
        "--policy",
        "rand",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.contains("fulfillment"), "{text}");
}

#[test]
fn missing_topology_is_a_usage_error() {
    let out = ecrfd(&["simulate", "--policy", "rand"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("--topology"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = ecrfd(&["simulate", "--topology", "x.yaml", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--bogus"));
}

#[test]
fn unknown_policy_is_a_usage_error() {
    let out = ecrfd(&["simulate", "--topology", "x.yaml", "--policy", "magic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = ecrfd(&["simulate", "--topology", "/nonexistent/nope.yaml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("nope.yaml"), "{err}");
}

#[test]
fn malformed_topology_names_the_field() {
    let dir = scratch("bad");
    let path = dir.join("bad.yaml");
    let text =
        std::fs::read_to_string(desk(&dir))
            .unwrap()
            .replacen("horizon:", "horizon_days:", 1);
    std::fs::write(&path, text).unwrap();
    let out = ecrfd(&["simulate", "--topology", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("horizon"), "{err}");
}

#[test]
fn plan_round_trips_through_simulate() {
    let dir = scratch("plan");
    let topo = desk(&dir);
    let out_dir = dir.join("out");
    let out = ecrfd(&[
        "plan",
        "--topology",
        &topo,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let plan = format!("plan:{}", out_dir.join("plan.txt").display());
    let out = ecrfd(&["simulate", "--topology", &topo, "--policy", &plan]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn help_exits_zero() {
    assert_eq!(ecrfd(&["--help"]).status.code(), Some(0));
    assert_eq!(ecrfd(&["cc", "--help"]).status.code(), Some(0));
}

#[test]
fn gen_topology_writes_every_shape() {
    let dir = scratch("gen");
    let out = ecrfd(&["gen-topology", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["desk", "wwt1", "wwt2"] {
        assert!(dir.join(format!("{name}.yaml")).exists(), "{name}");
    }
}
