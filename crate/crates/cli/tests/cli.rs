use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tdgsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdgsim"))
        .args(args)
        .output()
        .unwrap()
}

fn quickstart() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/quickstart.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_writes_outputs_and_prints_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let o = tdgsim(&["run", "--scenario", s(&quickstart()), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let printed = stdout(&o);
    assert!(printed.starts_with("metric,value\n"));
    assert_eq!(
        printed,
        fs::read_to_string(out.join("summary.csv")).unwrap()
    );
    for f in [
        "series.csv",
        "ledger.txt",
        "effective_config.txt",
        "events.jsonl",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let replay = tdgsim(&["replay", "--log", s(&out.join("events.jsonl"))]);
    assert_eq!(replay.status.code(), Some(0), "{}", stderr(&replay));
    assert_eq!(stdout(&replay), printed);

    let verify = tdgsim(&["verify-ledger", s(&out.join("ledger.txt"))]);
    assert_eq!(verify.status.code(), Some(0));
    assert!(stdout(&verify).starts_with("ok: "), "{}", stdout(&verify));
}

#[test]
fn overrides_reach_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdgsim(&[
        "run",
        "--scenario",
        s(&quickstart()),
        "--out",
        s(dir.path()),
        "--seed",
        "9",
        "--strategy",
        "random",
        "--mode",
        "centralized",
        "--ticks",
        "40",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let effective = fs::read_to_string(dir.path().join("effective_config.txt")).unwrap();
    assert!(effective.contains("seed = 9"));
    assert!(effective.contains("strategy = \"random\""));
    assert!(effective.contains("mode = \"centralized\""));
    assert!(effective.contains("horizon_ticks = 40"));
    assert!(stdout(&o).contains("horizon_ticks,40\n"));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = tdgsim(&[
            "run",
            "--scenario",
            s(&quickstart()),
            "--out",
            s(d),
            "--ticks",
            "200",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["summary.csv", "series.csv", "ledger.txt", "events.jsonl"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn batch_writes_one_directory_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("short.toml");
    let text = fs::read_to_string(quickstart())
        .unwrap()
        .replace("horizon_ticks = 600", "horizon_ticks = 50");
    fs::write(&other, text).unwrap();
    let out = dir.path().join("batch");
    let o = tdgsim(&[
        "run",
        "--scenario",
        s(&quickstart()),
        "--scenario",
        s(&other),
        "--out",
        s(&out),
        "--jobs",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("quickstart/summary.csv").is_file());
    assert!(out.join("short/summary.csv").is_file());
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn config_errors_exit_with_one_and_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "name = \"bad\"\nmode = \"trust\"\nseed = 1\nhorizon_ticks = 0\n[work]\ncomplexity = [3, 1]\n",
    )
    .unwrap();
    let o = tdgsim(&["run", "--scenario", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("horizon_ticks"), "{err}");
    assert!(err.contains("work.complexity"), "{err}");
    assert!(err.lines().all(|l| l.starts_with(s(&bad))), "{err}");

    let missing = tdgsim(&["run", "--scenario", "/nonexistent/x.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("/nonexistent/x.toml"));
}

#[test]
fn tampered_ledger_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let o = tdgsim(&[
        "run",
        "--scenario",
        s(&quickstart()),
        "--out",
        s(&out),
        "--ticks",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let ledger = out.join("ledger.txt");
    let text = fs::read_to_string(&ledger).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    assert!(lines.len() > 3);
    // Inflate one allocation in the third block.
    let fields: Vec<&str> = lines[2].split(' ').collect();
    let (agent, mc) = fields[3]
        .split(',')
        .next()
        .unwrap()
        .split_once(':')
        .unwrap();
    let forged = format!("{agent}:{}", mc.parse::<u64>().unwrap() + 1);
    lines[2] = lines[2].replacen(&format!("{agent}:{mc}"), &forged, 1);
    fs::write(&ledger, lines.join("\n") + "\n").unwrap();

    let v = tdgsim(&["verify-ledger", s(&ledger)]);
    assert_eq!(v.status.code(), Some(3));
    assert!(stderr(&v).contains("block 2"), "{}", stderr(&v));

    fs::write(&ledger, "garbage\n").unwrap();
    assert_eq!(
        tdgsim(&["verify-ledger", s(&ledger)]).status.code(),
        Some(3)
    );
}

#[test]
fn unreadable_log_is_a_runtime_error() {
    let o = tdgsim(&["replay", "--log", "/nonexistent/events.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/events.jsonl"));
}
