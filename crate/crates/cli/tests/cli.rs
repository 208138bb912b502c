use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use recur_core::Builtin;
use serde_json::Value;
use tempfile::TempDir;

fn recur(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recur"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RECUR_DEPTH_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Temp dir holding every shipped formula as `<name>.rf` plus `table1.csv`.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for b in Builtin::ALL {
        fs::write(dir.path().join(format!("{}.rf", b.name())), b.source()).unwrap();
    }
    fs::write(
        dir.path().join("table1.csv"),
        recur_core::builtin::TABLE1_CSV,
    )
    .unwrap();
    dir
}

#[test]
fn census_of_resnet_is_binomial() {
    let dir = workspace();
    let o = recur(
        &[
            "census",
            "resnet.rf",
            "--depth",
            "5",
            "--wrt",
            "0",
            "--check",
            "binomial",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let census = &v[0]["census"];
    let counts: Vec<u64> = (0..=5)
        .map(|k| census[k.to_string()]["count"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, [1, 5, 10, 10, 5, 1]);
    assert_eq!(census.as_object().unwrap().len(), 6);
    let check = &v[0]["check"];
    assert_eq!(check["check"], "binomial");
    assert_eq!(check["pass"], true);
    assert_eq!(check["violations"].as_array().unwrap().len(), 0);
    for key in ["spec", "depth", "wrt"] {
        assert!(check.get(key).is_some());
    }
}

#[test]
fn failed_structure_check_exits_one_with_violations() {
    let dir = workspace();
    let o = recur(
        &[
            "census", "chain.rf", "--depth", "4", "--check", "binomial", "--format", "json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["check"]["pass"], false);
    assert!(!v[0]["check"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn value_equivalent_but_structurally_different() {
    let dir = workspace();
    let o = recur(
        &["equiv", "newarch.rf", "eq22.rf", "--depth", "6"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = recur(
        &[
            "equiv",
            "newarch.rf",
            "eq22.rf",
            "--depth",
            "6",
            "--structural",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["value"]["pass"], true);
    assert_eq!(v["structural"]["isomorphic"], false);
}

#[test]
fn stats_on_table1_reports_critical_difference() {
    let dir = workspace();
    let o = recur(
        &[
            "stats",
            "table1.csv",
            "--alpha",
            "0.05",
            "--graph-json",
            "out.json",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["nemenyi"]["cd"].as_f64().unwrap() - 6.062).abs() < 1e-9);
    assert_eq!(v["friedman"]["df1"], 7);
    let graph: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(graph["entries"][0]["method"], "ResNet50s");
    assert_eq!(graph["entries"].as_array().unwrap().len(), 8);
}

#[test]
fn stats_beyond_tabulated_k_skips_nemenyi() {
    let dir = workspace();
    let o = recur(
        &["stats", "--table", "table2", "--format", "json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["nemenyi"].is_null());
    assert!(v["friedman"]["tau_f"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}

#[test]
fn verify_emits_check_reports() {
    let dir = workspace();
    let o = recur(
        &[
            "verify",
            "--builtin",
            "newarch",
            "--depth",
            "4",
            "--dim",
            "3",
            "--seeds",
            "3",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3 * 5);
    for r in rows {
        for key in [
            "spec",
            "L",
            "j",
            "d",
            "seed",
            "activation",
            "error",
            "tol",
            "pass",
        ] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
        assert_eq!(r["pass"], true);
    }
    let o = recur(
        &[
            "verify",
            "--builtin",
            "resnet",
            "--activation",
            "tanh",
            "--depth",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn chain_identity_holds_only_for_the_new_architecture() {
    let dir = workspace();
    assert_eq!(
        recur(
            &["chain-identity", "newarch.rf", "--depth", "12"],
            dir.path()
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        recur(&["chain-identity", "resnet.rf", "--depth", "4"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn graph_json_follows_schema() {
    let dir = workspace();
    let o = recur(
        &[
            "graph",
            "--builtin",
            "newarch",
            "--depth",
            "2",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["name"], "newarch");
    assert_eq!(v["depth"], 2);
    for n in v["nodes"].as_array().unwrap() {
        for key in ["id", "kind", "block"] {
            assert!(n.get(key).is_some());
        }
    }
    for e in v["edges"].as_array().unwrap() {
        for key in ["from", "to", "sign", "label"] {
            assert!(e.get(key).is_some());
        }
    }
}

#[test]
fn errors_exit_two_with_one_line() {
    let dir = workspace();
    fs::write(dir.path().join("bad.rf"), "X[i] = W[i+1]*X[i-1]\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["parse", "bad.rf"],
        &["parse", "missing.rf"],
        &["census", "resnet.rf", "--depth", "30"],
        &["stats", "table1.csv", "--alpha", "0.2"],
        &["equiv", "resnet.rf"],
    ];
    for args in cases {
        let o = recur(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(stdout(&o).is_empty());
    }
    let o = recur(&["parse", "bad.rf"], dir.path());
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("1:"),
        "position is reported"
    );
}

#[test]
fn depth_cap_is_configurable() {
    let dir = workspace();
    let o = Command::new(env!("CARGO_BIN_EXE_recur"))
        .args(["census", "chain.rf", "--depth", "30"])
        .current_dir(dir.path())
        .env("RECUR_DEPTH_CAP", "32")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn parse_prints_canonical_form() {
    let dir = workspace();
    fs::write(dir.path().join("r.rf"), "X[i] = X[i-1] + W[i]*X[i-1]\n").unwrap();
    let o = recur(&["parse", "r.rf"], dir.path());
    assert_eq!(stdout(&o), "# r\nX[i] = (1 + W[i])*X[i-1]\nX[0] = input\n");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = workspace();
    let runs: [&[&str]; 6] = [
        &[
            "expand",
            "newarch.rf",
            "--depth",
            "5",
            "--wrt",
            "1",
            "--format",
            "json",
        ],
        &["census", "resnet.rf", "--depth", "6"],
        &["graph", "eq22.rf", "--depth", "4"],
        &["graph", "newarch.rf", "--depth", "4", "--format", "json"],
        &["verify", "appendix-ex1.rf", "--seeds", "2"],
        &["stats", "table1.csv", "--format", "json"],
    ];
    for args in runs {
        let a = recur(args, dir.path());
        let b = recur(args, dir.path());
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn help_documents_every_flag() {
    let dir = workspace();
    let subcommands: [(&str, &[&str]); 8] = [
        ("parse", &["--builtin", "--format"]),
        (
            "expand",
            &["--depth", "--wrt", "--method", "--builtin", "--format"],
        ),
        ("census", &["--depth", "--wrt", "--check", "--format"]),
        ("equiv", &["--depth", "--structural", "--format"]),
        ("graph", &["--depth", "--format", "--report"]),
        (
            "verify",
            &[
                "--dim",
                "--seed",
                "--seeds",
                "--tol",
                "--activation",
                "--epsilon",
                "--wrt",
            ],
        ),
        ("chain-identity", &["--depth", "--format"]),
        ("stats", &["--alpha", "--graph-json", "--table", "--format"]),
    ];
    for (sub, flags) in subcommands {
        let o = recur(&[sub, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let help = stdout(&o);
        for flag in flags {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert_eq!(recur(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(
        recur(&["census", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
}
