use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(rel)
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_distreconf"));
    cmd.args(args);
    for var in [
        "DISTRECONF_EPS_PRIMAL",
        "DISTRECONF_EPS_DUAL",
        "DISTRECONF_MAX_ITERS",
        "DISTRECONF_ALGORITHM",
    ] {
        cmd.env_remove(var);
    }
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(v: &str) -> f64 {
    v.parse().unwrap()
}

fn all_scenarios() -> Vec<String> {
    [
        "no-fault",
        "fault-line-7",
        "fault-lines-13-28",
        "fault-line-18",
    ]
    .iter()
    .map(|n| s(&data(&format!("scenarios/{n}.json"))).to_string())
    .collect()
}

#[test]
fn intact_feeder_profiles() {
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let sc = data("scenarios/no-fault.json");
    let o = run(
        &[
            "solve",
            "--network",
            s(&net),
            "--scenario",
            s(&sc),
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let dir = out.path().join("no-fault");
    for row in csv(&dir.join("bf-voltage.csv")) {
        let v = num(&row[1]);
        assert!(
            (0.9 - 1e-6..=1.05 + 1e-6).contains(&v),
            "bus {}: {v}",
            row[0]
        );
    }
    for row in csv(&dir.join("bf-load.csv")) {
        assert!(num(&row[3]).abs() <= 1e-6);
    }
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("bf-result.json")).unwrap())
            .unwrap();
    assert_eq!(doc["schema"], "distreconf.result/1");
    assert_eq!(doc["closed_switches"], "none");
    assert_eq!(doc["status"], "optimal");
}

#[test]
fn both_models_write_a_small_diff() {
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let sc = data("scenarios/fault-lines-13-28.json");
    let o = run(
        &[
            "solve",
            "--network",
            s(&net),
            "--scenario",
            s(&sc),
            "--model",
            "both",
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let diff = csv(&out.path().join("fault-lines-13-28/diff.csv"));
    assert_eq!(diff.len(), 33);
    let worst = diff.iter().map(|r| num(&r[3])).fold(0.0, f64::max);
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn emitted_profiles_are_consistent() {
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let mut args = vec![
        "solve".to_string(),
        "--network".into(),
        s(&net).into(),
        "--model".into(),
        "both".into(),
    ];
    args.push("--scenario".into());
    args.extend(all_scenarios());
    args.extend(["--out".into(), s(out.path()).into()]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(run(&argv, &[]).status.code(), Some(0));
    for name in [
        "no-fault",
        "fault-line-7",
        "fault-lines-13-28",
        "fault-line-18",
    ] {
        for m in ["bf", "bi"] {
            let dir = out.path().join(name);
            for r in csv(&dir.join(format!("{m}-load.csv"))) {
                assert!((num(&r[2]) + num(&r[3]) - num(&r[1])).abs() <= 1e-6);
                assert!((num(&r[5]) + num(&r[6]) - num(&r[4])).abs() <= 1e-6);
            }
            for r in csv(&dir.join(format!("{m}-current.csv"))) {
                if r[3] == "0" {
                    assert!(num(&r[4]) <= 1e-3, "{name} {m} line {}: {}", r[0], r[4]);
                }
            }
        }
    }
}

#[test]
fn missing_network_is_a_usage_failure() {
    let out = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "solve",
            "--network",
            "/no/such/feeder.json",
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/feeder.json"));
}

#[test]
fn bad_arguments_exit_with_one() {
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let o = run(
        &[
            "solve",
            "--network",
            s(&net),
            "--model",
            "dc",
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        &[
            "compare",
            "--network",
            s(&net),
            "--solvers",
            "admm",
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least two"));
}

#[test]
fn infeasible_and_iteration_limit_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let cut = out.path().join("cut.json");
    std::fs::write(&cut, r#"{"name": "cut", "faulted_lines": [1]}"#).unwrap();
    let net = data("two_bus.json");
    for solver in ["exact", "admm"] {
        let o = run(
            &[
                "solve",
                "--network",
                s(&net),
                "--scenario",
                s(&cut),
                "--solver",
                solver,
                "--out",
                s(out.path()),
            ],
            &[],
        );
        assert_eq!(o.status.code(), Some(2), "{solver}");
    }
    let o = run(
        &["solve", "--network", s(&net), "--out", s(out.path())],
        &[("DISTRECONF_MAX_ITERS", "2")],
    );
    assert_eq!(o.status.code(), Some(3));
    let o = run(
        &["solve", "--network", s(&net), "--out", s(out.path())],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn operator_splitting_is_selectable_from_the_environment() {
    let out = tempfile::tempdir().unwrap();
    let net = data("two_bus.json");
    let o = run(
        &["solve", "--network", s(&net), "--out", s(out.path())],
        &[("DISTRECONF_ALGORITHM", "splitting")],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = run(
        &["solve", "--network", s(&net), "--out", s(out.path())],
        &[("DISTRECONF_ALGORITHM", "simplex")],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_flags_matches_on_the_intact_feeder() {
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let sc = data("scenarios/no-fault.json");
    let o = run(
        &[
            "compare",
            "--network",
            s(&net),
            "--scenario",
            s(&sc),
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = csv(&out.path().join("compare.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[7] == "MATCH"), "{rows:?}");
}

#[test]
fn compare_reports_a_heuristic_mismatch() {
    // an almost-1 rounding threshold after one iteration rounds every switch
    // open; the repair then picks the first nearest radial assignment, which
    // is not the optimal one for this scenario
    let out = tempfile::tempdir().unwrap();
    let net = data("ieee33.json");
    let sc = data("scenarios/fault-lines-13-28.json");
    let o = run(
        &[
            "compare",
            "--network",
            s(&net),
            "--scenario",
            s(&sc),
            "--solvers",
            "exact-bf,admm",
            "--threshold",
            "0.999999",
            "--admm-iters",
            "1",
            "--out",
            s(out.path()),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = csv(&out.path().join("compare.csv"));
    let admm = rows.iter().find(|r| r[1] == "admm").unwrap();
    assert_eq!(admm[7], "MISMATCH");
    assert_eq!(admm[6], "2");
    assert!(String::from_utf8_lossy(&o.stdout).contains("MISMATCH (hamming 2)"));
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_are_byte_identical() {
    let net = data("ieee33.json");
    let sc = data("scenarios/fault-line-7.json");
    let variants: Vec<Vec<&str>> = vec![
        vec!["solve", "--solver", "exact", "--model", "both"],
        vec!["solve", "--solver", "admm", "--qubo", "exhaustive"],
        vec!["solve", "--solver", "admm", "--qubo", "sa", "--seed", "4"],
        vec![
            "solve", "--solver", "admm", "--qubo", "qaoa", "--seed", "4", "--model", "bi",
        ],
        vec!["compare", "--qubo", "sa", "--seed", "2"],
    ];
    for v in variants {
        let runs: Vec<_> = (0..2)
            .map(|k| {
                let out = tempfile::tempdir().unwrap();
                let mut args = v.clone();
                args.extend([
                    "--network",
                    s(&net),
                    "--scenario",
                    s(&sc),
                    "--out",
                    s(out.path()),
                ]);
                let jobs = if k == 0 { "1" } else { "4" };
                args.extend(["--jobs", jobs]);
                let o = run(&args, &[]);
                assert_eq!(o.status.code(), Some(0), "{v:?}");
                (o.stdout, snapshot(out.path()))
            })
            .collect();
        assert!(!runs[0].1.is_empty());
        assert_eq!(runs[0], runs[1], "{v:?}");
    }
}
