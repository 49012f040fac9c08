use std::process::Command;

use courant_forge::bundled::{self, BUNDLED};
use courant_forge::config::{ConfigError, Expect};
use courant_forge::{load_config, resolve, run, ManifoldConfig, RunOptions, Suite};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_courant-forge"))
}

fn bundled_cfg(name: &str) -> ManifoldConfig {
    resolve(name).unwrap()
}

fn entry_path(e: ConfigError) -> String {
    match e {
        ConfigError::Entry { path, .. } => path,
        other => panic!("expected an entry error, got {other}"),
    }
}

const PLANE: &str = r#"
name = "t"
[chart]
coords = ["x", "y"]
domain = [[-1.0, 1.0], [-1.0, 1.0]]
[metric]
gamma = GAMMA
psi = PSI
"#;

fn plane(gamma: &str, psi: &str) -> Result<ManifoldConfig, ConfigError> {
    ManifoldConfig::from_toml(&PLANE.replace("GAMMA", gamma).replace("PSI", psi))
}

#[test]
fn every_bundled_config_loads() {
    for (name, _) in BUNDLED {
        let c = bundled_cfg(name);
        assert_eq!(c.name, name);
        assert!(!c.suites.is_empty());
        assert!(!c.entries.is_empty());
    }
    assert_eq!(bundled_cfg("r3_twisted").dim(), 3);
}

#[test]
fn load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, bundled::source("r3_twisted").unwrap()).unwrap();
    let c = load_config(&p).unwrap();
    assert_eq!(c.dim(), 3);
    assert!(c.twist.is_some());
    assert!(matches!(load_config(&dir.path().join("missing.toml")), Err(ConfigError::Io { .. })));
}

#[test]
fn asymmetric_gamma_names_the_entry() {
    let e = plane(r#"[["1", "x"], ["0", "1"]]"#, r#"[["0", "0"], ["0", "0"]]"#).unwrap_err();
    assert!(e.to_string().contains("not symmetric"), "{e}");
    assert_eq!(entry_path(e), "metric.gamma[0][1]");
}

#[test]
fn unknown_identifier_in_psi() {
    let e = plane(r#"[["1", "0"], ["0", "1"]]"#, r#"[["0", "x + w"], ["-(x + w)", "0"]]"#).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("unknown identifier `w`"), "{msg}");
    assert_eq!(entry_path(e), "metric.psi[0][1]");
}

#[test]
fn shape_and_sign_errors() {
    let e = plane(r#"[["1", "0"]]"#, r#"[["0", "0"], ["0", "0"]]"#).unwrap_err();
    assert_eq!(entry_path(e), "metric.gamma");
    let e = plane(r#"[["1", "0"], ["0"]]"#, r#"[["0", "0"], ["0", "0"]]"#).unwrap_err();
    assert_eq!(entry_path(e), "metric.gamma[1]");
    let e = plane(r#"[["1", "0"], ["0", "1"]]"#, r#"[["0", "x"], ["x", "0"]]"#).unwrap_err();
    assert!(e.to_string().contains("antisymmetric"));
    let e = plane(r#"[["1", "0"], ["0", "x"]]"#, r#"[["0", "0"], ["0", "0"]]"#).unwrap_err();
    assert_eq!(entry_path(e), "metric.gamma");
    let e = plane(r#"[["1", "0"], ["0", "1"]]"#, r#"[["0", "(x"], ["0", "0"]]"#).unwrap_err();
    assert!(e.to_string().contains("syntax error at 1:3"), "{e}");
}

#[test]
fn twist_order_sets_the_sign() {
    let text = bundled::source("r3_twisted").unwrap().replace(r#"at = ["x", "y", "z"]"#, r#"at = ["y", "x", "z"]"#);
    let c = ManifoldConfig::from_toml(&text).unwrap();
    let t = c.twist.unwrap();
    assert_eq!(t.component(&[0, 1, 2]).as_const(), Some(-1.0));
    assert_eq!(t.component(&[2, 0, 1]).as_const(), Some(-1.0));
}

#[test]
fn default_suites_follow_the_data() {
    let text = PLANE.replace("GAMMA", r#"[["1", "0"], ["0", "1"]]"#).replace("PSI", r#"[["0", "0"], ["0", "0"]]"#);
    let c = ManifoldConfig::from_toml(&text).unwrap();
    assert_eq!(c.suites, vec![Suite::Metric, Suite::Connection, Suite::Torsion]);
    assert_eq!(c.sampling, courant_core::sampling::Sampling::default());
}

#[test]
fn torsion_on_twisted_space() {
    let c = bundled_cfg("r3_twisted");
    let rep = run(&c, Suite::Torsion, RunOptions::from_config(&c));
    let same = rep.records.iter().find(|r| r.id == "torsion.gualtieri_same_side").unwrap();
    assert!(same.pass && same.witness.is_none());
    assert!(rep.passed());
    let ids: Vec<&str> = rep.records.iter().map(|r| r.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(ids, sorted);
}

#[test]
fn parallel_on_kahler_plane() {
    let c = bundled_cfg("r2_kahler");
    let rep = run(&c, Suite::Parallel, RunOptions::from_config(&c));
    assert!(rep.passed());
    assert!(rep.records.iter().any(|r| r.id == "parallel.complex_graph"));
}

#[test]
fn nilpotent_witness_fails_with_a_point() {
    let c = bundled_cfg("r4_nonclosed");
    let rep = run(&c, Suite::Nilpotent, RunOptions::from_config(&c));
    assert_eq!(rep.exit_code(), 1);
    let full = rep.records.iter().find(|r| r.id == "nilpotent.integrability").unwrap();
    assert!(!full.pass);
    let w = full.witness.as_ref().unwrap();
    assert_eq!(w.len(), 4);
    assert!(rep.records.iter().filter(|r| !r.pass).all(|r| r.witness.is_some()));
}

#[test]
fn verdicts_match_expectations() {
    for name in bundled::names() {
        let c = bundled_cfg(name);
        let rep = run(&c, Suite::All, RunOptions::from_config(&c));
        assert_eq!(rep.passed(), c.expect == Expect::Pass, "{name}");
    }
}

#[test]
fn suite_without_data_reports_a_failed_build() {
    let c = bundled_cfg("r2_flat");
    let rep = run(&c, Suite::Nilpotent, RunOptions::from_config(&c));
    assert_eq!(rep.records.len(), 1);
    assert_eq!(rep.records[0].id, "nilpotent.build");
    assert!(!rep.passed());
}

#[test]
fn binary_exit_codes() {
    let ok = bin().args(["run", "--config", "r2_flat", "--suite", "metric"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("PASS  metric.phi_squared"));
    let fail = bin().args(["run", "--config", "r2_poisson_x", "--suite", "parallel"]).output().unwrap();
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8(fail.stdout).unwrap().contains("witness ("));
    let bad_suite = bin().args(["run", "--config", "r2_flat", "--suite", "curvature"]).output().unwrap();
    assert_eq!(bad_suite.status.code(), Some(2));
    let bad_cfg = bin().args(["run", "--config", "nowhere.toml", "--suite", "all"]).output().unwrap();
    assert_eq!(bad_cfg.status.code(), Some(2));
    let unknown = bin().args(["run", "--config", "r9_nothing", "--suite", "all"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let usage = bin().args(["run", "--suite", "all"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let tol = bin().args(["run", "--config", "r2_flat", "--suite", "metric", "--tol", "-1"]).output().unwrap();
    assert_eq!(tol.status.code(), Some(2));
}

#[test]
fn machine_report_shape() {
    let out = bin()
        .args(["run", "--config", "r2_tangent", "--suite", "kahler", "--report", "machine", "--samples", "5", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["samples"], 5);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["suite"], "kahler");
    assert!(v.get("elapsed").is_none());
    let recs = v["records"].as_array().unwrap();
    assert_eq!(v["summary"]["total"].as_u64().unwrap() as usize, recs.len());
    for r in recs {
        let s = r["residual"].to_string();
        let digits: String = s.split(['e', 'E']).next().unwrap().chars().filter(char::is_ascii_digit).collect();
        assert!(digits.trim_start_matches('0').len() <= 3, "{s}");
    }
}

#[test]
fn list_commands() {
    let out = bin().arg("list-suites").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for s in Suite::ALL {
        assert!(text.lines().any(|l| l.starts_with(s.name())));
    }
    let out = bin().arg("list-configs").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), BUNDLED.len());
    assert!(!text.contains("invalid"));
}
