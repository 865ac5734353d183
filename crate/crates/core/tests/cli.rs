use std::fs;
use std::path::{Path, PathBuf};

use scuc_core::cli::{run_cli, EXIT_DATA, EXIT_INFEASIBLE, EXIT_NO_INPUT, EXIT_OK, EXIT_USAGE};
use scuc_core::instance::Instance;
use scuc_core::schedule::Schedule;
use serde_json::Value;

fn scuc(args: &[&str]) -> i32 {
    run_cli(std::iter::once("scuc").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, seed: u64, horizon: usize) -> PathBuf {
    let out = dir.join(name);
    let seed = seed.to_string();
    let horizon = horizon.to_string();
    let code = scuc(&[
        "generate", "--buses", "6", "--generators", "4", "--lines", "8", "--contingencies", "2", "-T", &horizon, "--seed", &seed,
        "--output", s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    out
}

fn report(path: &Path) -> Value {
    let mut r = path.as_os_str().to_owned();
    r.push(".report.json");
    serde_json::from_str(&fs::read_to_string(PathBuf::from(r)).unwrap()).unwrap()
}

#[test]
fn generate_is_reproducible_and_checks_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json", 4, 6);
    let b = generate(dir.path(), "b.json", 4, 6);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = generate(dir.path(), "c.json", 5, 6);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert!(Instance::from_path(&a).is_ok());
    assert_eq!(report(&a)["header"]["seed"], 4);

    let bad = dir.path().join("bad.json");
    assert_eq!(scuc(&["generate", "--buses", "10", "--lines", "3", "--output", s(&bad)]), EXIT_USAGE);
    assert!(!bad.exists());
}

#[test]
fn solve_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "i.json", 2, 8);
    let out = dir.path().join("sched.json");
    let code = scuc(&[
        "solve", "--instance", s(&inst), "--output", s(&out), "--mode", "td-r", "--sI", "4", "--sR", "2", "--dt", "2", "--threads", "1",
        "--rins-window", "4", "--rins-stride", "3",
    ]);
    assert_eq!(code, EXIT_OK);
    let r = report(&out);
    assert_eq!(r["header"]["command"], "solve");
    assert_eq!(r["header"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["header"]["flags"]["flags"]["s_i"], 4);
    assert_eq!(r["validation"]["feasible"], true);

    let vrep = dir.path().join("v.json");
    assert_eq!(scuc(&["validate", "--instance", s(&inst), "--schedule", s(&out), "--report", s(&vrep)]), EXIT_OK);
    let v: Value = serde_json::from_str(&fs::read_to_string(&vrep).unwrap()).unwrap();
    assert_eq!(v["feasible"], true);

    let instance = Instance::from_path(&inst).unwrap();
    let mut sched = Schedule::from_json_str(&fs::read_to_string(&out).unwrap(), &instance).unwrap();
    let g = (0..instance.num_generators()).find(|&g| sched.x[g][0] > 0.5).unwrap();
    sched.p[g][0] += 1000.0;
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, sched.to_json_pretty(&instance)).unwrap();
    assert_eq!(scuc(&["validate", "--instance", s(&inst), "--schedule", s(&tampered), "--report", s(&vrep)]), EXIT_INFEASIBLE);
    let v: Value = serde_json::from_str(&fs::read_to_string(&vrep).unwrap()).unwrap();
    assert_eq!(v["feasible"], false);
}

#[test]
fn input_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let short = generate(dir.path(), "short.json", 2, 4);
    let long = generate(dir.path(), "long.json", 2, 6);
    let out = dir.path().join("sched.json");
    assert_eq!(scuc(&["solve", "--instance", s(&short), "--output", s(&out), "--mode", "monolithic"]), EXIT_OK);
    assert_eq!(scuc(&["validate", "--instance", s(&long), "--schedule", s(&out)]), EXIT_DATA);

    let missing = dir.path().join("nope.json");
    assert_eq!(scuc(&["solve", "--instance", s(&missing), "--output", s(&out)]), EXIT_NO_INPUT);
    assert_eq!(scuc(&["validate", "--instance", s(&short), "--schedule", s(&missing)]), EXIT_NO_INPUT);

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(scuc(&["solve", "--instance", s(&junk), "--output", s(&out)]), EXIT_DATA);

    assert_eq!(scuc(&["solve", "--instance", s(&short)]), EXIT_USAGE);
    assert_eq!(scuc(&["solve", "--instance", s(&short), "--output", s(&out), "--mode", "greedy"]), EXIT_USAGE);
    assert_eq!(scuc(&["solve", "--instance", s(&short), "--output", s(&out), "--ref-bus", "nowhere"]), EXIT_USAGE);
    assert_eq!(scuc(&["solve", "--instance", s(&short), "--output", s(&out), "--dt", "9", "--sI", "2"]), EXIT_USAGE);
    assert_eq!(scuc(&["frobnicate"]), EXIT_USAGE);
}

#[test]
fn benchmark_writes_rows_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for seed in 1..=3 {
        generate(&corpus, &format!("i{seed}.json"), seed, 4);
    }
    let out = dir.path().join("bench.csv");
    let code = scuc(&[
        "benchmark", "--corpus", s(&corpus), "--output", s(&out), "--methods", "monolithic:enumerate,td:dynamic", "--sI", "2", "--sR",
        "1", "--dt", "1",
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance,method,objective,gap_vs_best,wall_seconds,cuts,subproblems,restarts,status");
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert!(lines[1..7].iter().all(|l| l.starts_with('i')));
    assert!(lines[7..].iter().all(|l| l.starts_with("geomean,") && l.ends_with("solved=3")));
    let r = report(&out);
    assert_eq!(r["rows"], 6);
    assert_eq!(r["header"]["instances"].as_array().unwrap().len(), 3);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(scuc(&["benchmark", "--corpus", s(&empty), "--output", s(&out)]), EXIT_NO_INPUT);
}
