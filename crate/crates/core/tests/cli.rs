use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use serde_json::Value;

use robin_core::cli::{main_with_args, Cli, RunConfig};
use robin_core::Error;

fn robin(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_robin")).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_passes_for_decaying_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["robin", "check", "--dim", "3", "--half-width", "4", "--spacing", "0.25", "--alpha", "1/(1+x1^2+x2^2)", "--out", out];
    assert_eq!(main_with_args(args), 0);
    let doc = json(&dir.path().join("check.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "check");
    assert_eq!(doc["result"]["theorem_id"], "T1.1");
    assert_eq!(doc["result"]["verdict"], "PASS");
    assert_eq!(doc["config"]["grid"]["dim"], 3);
    assert!(dir.path().join("hypotheses.csv").exists());
}

#[test]
fn negative_alpha_fails_with_exit_two_and_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = robin(&["check", "--dim", "2", "--half-width", "3", "--spacing", "0.25", "--alpha=-1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = robin(&["report", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let doc = json(&dir.path().join("report.json"));
    assert_eq!(doc["result"]["any_failed"], true);
    assert_eq!(doc["result"]["reports"][0]["verdict"], "FAIL");
}

#[test]
fn eigs_finds_the_robin_bound_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
seed = 3
[grid]
dim = 1
half_width = 10.0
spacing = 0.01
[alpha]
kind = "constant"
value = [-1.0, 0.0]
[eigs]
shifts = [[-1.5, 0.0]]
count = 3
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = robin(&["eigs", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("eigs.csv")).unwrap();
    let hit = rdr.records().map(|r| r.unwrap()).any(|r| {
        let re: f64 = r[0].parse().unwrap();
        (re + 1.0).abs() < 1e-3 && &r[6] == "localized"
    });
    assert!(hit);
}

#[test]
fn malformed_config_names_the_field() {
    let cli = Cli::try_parse_from(["robin", "check", "--spacing", "-0.1"]).unwrap();
    match cli.resolve() {
        Err(Error::Config { field, .. }) => assert_eq!(field, "grid.spacing"),
        other => panic!("expected a config error, got {:?}", other.map(|_| ())),
    }
    let dir = tempfile::tempdir().unwrap();
    let o = robin(&["check", "--spacing=-0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.spacing"));
}

#[test]
fn unknown_keys_are_rejected() {
    let e = RunConfig::from_toml("[grid]\ndim = 2\nwidth = 3.0\n").unwrap_err();
    assert!(e.to_string().contains("width"), "{e}");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"grid": {"dim": 2}, "colour": 1}"#).unwrap();
    assert!(matches!(RunConfig::from_path(&p), Err(Error::Config { .. })));
}

#[test]
fn json_and_toml_configs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("a.toml");
    let j = dir.path().join("a.json");
    fs::write(&t, "[grid]\ndim = 2\nspacing = 0.1\n[alpha]\nkind = \"complex_phase\"\namplitude = 0.3\nphase = 0.4\n").unwrap();
    fs::write(&j, r#"{"grid": {"dim": 2, "spacing": 0.1}, "alpha": {"kind": "complex_phase", "amplitude": 0.3, "phase": 0.4}}"#)
        .unwrap();
    let a = serde_json::to_value(RunConfig::from_path(&t).unwrap()).unwrap();
    let b = serde_json::to_value(RunConfig::from_path(&j).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = robin(&[
            "identities", "--dim", "2", "--half-width", "10", "--spacing", "0.2", "--alpha", "0.5", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(fs::read(a.join("identities.csv")).unwrap(), fs::read(b.join("identities.csv")).unwrap());
    let strip = |p: &Path| {
        let mut v = json(&p.join("identities.json"));
        v["config"]["output"]["dir"] = Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(
        &cfg,
        r#"
[grid]
dim = 1
half_width = 8.0
spacing = 0.05
[lambda_grid]
kind = "rectangle"
re = [-1.0, 1.0]
im = [0.5, 1.0]
re_count = 3
im_count = 2
[f_family]
count = 4
"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = robin(&[
        "resolvent-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv", "--format",
        "svg", "--jobs", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(out.join("sweep.csv")).unwrap().records().count();
    assert_eq!(rows, 6 * 4);
    assert!(fs::read_to_string(out.join("sweep.svg")).unwrap().starts_with("<svg"));
    let doc = json(&out.join("resolvent-sweep.json"));
    assert_eq!(doc["result"]["summary"]["points"], 6);
}

#[test]
fn inequality_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (cmd, dim, l) in [("hardy", "3", "8"), ("trace", "2", "8"), ("cutoff", "2", "16"), ("assemble", "2", "8")] {
        let o = robin(&[cmd, "--dim", dim, "--half-width", l, "--spacing", "0.25", "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let hardy = json(&dir.path().join("hardy.json"));
    assert!(hardy["result"]["max_ratio"].as_f64().unwrap() <= 4.0);
    let trace = json(&dir.path().join("trace.json"));
    assert!(trace["result"]["max_trace_minus_grad"].as_f64().unwrap() <= 0.0);
    assert!(dir.path().join("operator.mtx").exists());
}
