use std::path::Path;
use std::process::{Command, Output};

use tracerec_cli::report::{load_report, RunReport};

fn tracerec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracerec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_a_header_and_traces() {
    let out = tracerec(&["simulate", "--x", "1101011", "--delta", "0.3", "--count", "5", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# n=7 delta=0.3 seed=7 count=5");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.len() <= 7 && l.bytes().all(|b| b == b'0' || b == b'1')));
    let again = tracerec(&["--threads", "1", "simulate", "--x", "1101011", "--delta", "0.3", "--count", "5", "--seed", "7"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn missing_seed_is_generated_and_printed() {
    let out = tracerec(&["perturb", "--n", "16", "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let seed: u64 = stderr(&out).trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let replay = tracerec(&["perturb", "--n", "16", "--sigma", "1", "--seed", &seed.to_string()]);
    assert_eq!(stdout(&replay), stdout(&out));
}

#[test]
fn usage_errors_exit_two() {
    let out = tracerec(&["deck", "--k", "3", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    let out = tracerec(&["simulate", "--x", "0110", "--count", "3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`delta`"), "{}", stderr(&out));
    let out = tracerec(&["simulate", "--x", "01a0", "--delta", "0.2", "--count", "3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_limits_exit_three() {
    let x = "0".repeat(24);
    let out = tracerec(&["oracle", "distribution", "--x", &x, "--delta", "0.5"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn deck_from_a_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t.txt");
    let report = dir.path().join("r.json");
    let out = tracerec(&[
        "simulate", "--x", "1101011", "--delta", "0.3", "--count", "20000", "--seed", "7", "-o", path_str(&traces),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = tracerec(&[
        "deck", "--traces", path_str(&traces), "--k", "3", "--seed", "1", "--report", path_str(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "010 1\n011 1\n101 2\n110 1\n");
    let r: RunReport = load_report(&report).unwrap();
    assert_eq!(r.schema_version, 1);
    assert_eq!(r.seed, Some(1));
    assert_eq!(r.parameters["delta"], 0.3);
    assert_eq!(r.derived["k"], 3);
    assert_eq!(r.result["valid"], true);
}

#[test]
fn assembly() {
    let dir = tempfile::tempdir().unwrap();
    let deck = dir.path().join("deck.txt");
    std::fs::write(&deck, "001 1\n011 1\n110 1\n").unwrap();
    let out = tracerec(&["assemble", "--deck", path_str(&deck), "--n", "5"]);
    assert_eq!(stdout(&out), "00110\n");
    std::fs::write(&deck, "010 1\n011 1\n101 2\n110 1\n").unwrap();
    let out = tracerec(&["assemble", "--deck", path_str(&deck), "--n", "7"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&deck, "010 1\n0110 1\n").unwrap();
    let out = tracerec(&["assemble", "--deck", path_str(&deck), "--n", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn config_file_supplies_and_yields_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let traces = dir.path().join("t.txt");
    let report = dir.path().join("r.json");
    std::fs::write(
        &config,
        format!(
            "[simulate]\nx = \"1101011\"\ndelta = 0.3\ncount = 9\nseed = 3\noutput = {:?}\n\n[deck]\nk = 2\ntau = 0.2\nseed = 5\n",
            path_str(&traces)
        ),
    )
    .unwrap();
    let out = tracerec(&["--config", path_str(&config), "simulate", "--count", "4000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&traces).unwrap();
    assert!(text.starts_with("# n=7 delta=0.3 seed=3 count=4000\n"));
    let out = tracerec(&[
        "--config", path_str(&config), "deck", "--traces", path_str(&traces), "--report", path_str(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: RunReport = load_report(&report).unwrap();
    assert_eq!(r.parameters["tau"], 0.2);
    assert_eq!(r.parameters["k"], 2);
    assert_eq!(r.seed, Some(5));
}

#[test]
fn config_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "[simulate]\ndelta = 0.3\ncont = 9\n").unwrap();
    let out = tracerec(&["--config", path_str(&config), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn reconstruct_a_small_source() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let args = [
        "reconstruct", "--x", "110100111000", "--sigma", "1", "--delta", "0.2", "--eta", "0.5", "--tau", "0.2",
        "--k-constant", "1.06", "--repetitions", "3", "--traces-per-unit", "5000", "--cap", "5000", "--seed", "9",
        "--report", path_str(&report),
    ];
    let out = tracerec(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "110100111000\n");
    let r: RunReport = load_report(&report).unwrap();
    assert_eq!(r.derived["k"], 5);
    assert_eq!(r.result["correct"], true);
}

#[test]
fn oracles() {
    let out = tracerec(&["oracle", "poly", "--x", "1101011", "--w", "11"]);
    assert_eq!(stdout(&out), "7 2 2 2 2 1 2 1\n");
    let out = tracerec(&["oracle", "expectation", "--x", "111", "--w", "11", "--delta", "0.5"]);
    assert_eq!(stdout(&out), "0.625\n");
    let out = tracerec(&["oracle", "gamma-beta", "--gamma", "0,1", "--beta", "0,0", "--delta", "0.3"]);
    let text = stdout(&out);
    let values: Vec<f64> = text.lines().map(|l| l.split(' ').nth(1).unwrap().parse().unwrap()).collect();
    assert!((values[0] - values[1]).abs() < 1e-12);
    let out = tracerec(&["oracle", "taylor", "--x", "110101", "--w", "10", "--delta", "0.4", "--zeta", "0.1,-0.3"]);
    assert!(stdout(&out).trim().parse::<f64>().unwrap() < 1e-9);
    let out = tracerec(&["oracle", "goodness", "--n", "32", "--sigma", "1", "--k", "12", "--trials", "50", "--seed", "2"]);
    assert!(stdout(&out).starts_with("k=12 trials=50 rate="));
}

#[test]
fn experiment_reports_are_reproducible() {
    let args = [
        "experiment", "--n", "10", "--sigma", "1", "--delta", "0.2", "--trials", "2", "--seed", "42",
        "--repetitions", "1", "--traces-per-unit", "1000", "--cap", "1000", "--k-constant", "1",
    ];
    let one = tracerec(&[&["--threads", "1"], &args[..]].concat());
    let two = tracerec(&[&["--threads", "2"], &args[..]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, two.stdout);
    let v: serde_json::Value = serde_json::from_slice(&one.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
}
