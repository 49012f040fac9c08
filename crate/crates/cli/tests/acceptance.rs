//! One line per acceptance criterion, at the stated tolerances.

use std::process::Command;
use std::time::Instant;

use courant_core::chartfield::linalg::unit;
use courant_core::connections::{AffineConnection, BigConnection};
use courant_core::genmetric::Side;
use courant_core::nilpotent::{graph_two_form_tau, MetricTau, TauStructure};
use courant_core::sampling::{sample_points, sweep};
use courant_forge::bundled::{self, BUNDLED};
use courant_forge::config::Expect;
use courant_forge::suites::derivative_oracle;
use courant_forge::{resolve, run, ManifoldConfig, Record, RunOptions, Suite};

struct Ledger {
    failed: Vec<usize>,
}

impl Ledger {
    fn line(&mut self, n: usize, title: &str, start: Instant, result: Result<String, String>) {
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {title}: {detail} ({secs:.2} s)"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL  {title}: {detail} ({secs:.2} s)");
                self.failed.push(n);
            }
        }
    }
}

fn cfg(name: &str) -> ManifoldConfig {
    resolve(name).unwrap()
}

fn records(name: &str, suite: Suite, samples: usize) -> Vec<Record> {
    let c = cfg(name);
    let mut o = RunOptions::from_config(&c);
    o.samples = samples;
    run(&c, suite, o).records
}

fn pick<'a>(recs: &'a [Record], id: &str) -> &'a Record {
    recs.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("missing record {id}"))
}

/// Worst residual over the listed ids, failing if any exceeds `tol`.
fn bound(recs: &[Record], ids: &[&str], tol: f64, ctx: &str) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for id in ids {
        let r = pick(recs, id);
        if !(r.residual <= tol) {
            return Err(format!("{ctx} {id} = {:.3e} > {tol:e}", r.residual));
        }
        worst = worst.max(r.residual);
    }
    Ok(worst)
}

fn c1() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut fields = 0;
    for (name, _) in BUNDLED {
        let c = cfg(name);
        fields += c.entries.len();
        let r = derivative_oracle(&c, 100, 2024, 1e-5);
        if !r.passes(1e-6) {
            return Err(format!("{name}: relative error {:.3e} at {:?}", r.max, r.witness));
        }
        worst = worst.max(r.max);
    }
    Ok(format!("{fields} fields, max relative error {worst:.3e}"))
}

fn c2() -> Result<String, String> {
    let c = cfg("r3_twisted");
    let pts = sample_points(&c.chart, 50, 1);
    let dpsi = c.pair.dpsi();
    let mut worst: f64 = 0.0;
    for side in [Side::Plus, Side::Minus] {
        let d = AffineConnection::dpm(&c.pair, side);
        let r = d.torsion_form_residual(&c.pair.gamma, &dpsi, side.sign(), &pts);
        if !r.passes(1e-9) {
            return Err(format!("{side:?}: {:.3e}", r.max));
        }
        worst = worst.max(r.max);
    }
    let t = AffineConnection::dpm(&c.pair, Side::Plus).torsion(&unit(3, 0), &unit(3, 1));
    let v = t[2].eval(&pts[0]).unwrap();
    if (v - 1.0).abs() > 1e-12 {
        return Err(format!("γ(T^{{D+}}(∂x,∂y),∂z) = {v}"));
    }
    Ok(format!("27 triples x 2 sides, residual {worst:.3e}; γ(T^{{D+}}(∂x,∂y),∂z) = {v}"))
}

fn c3() -> Result<String, String> {
    let recs = records("r3_twisted", Suite::Torsion, 50);
    let w = bound(&recs, &["torsion.mixed_courant", "torsion.gualtieri_mixed"], 1e-9, "r3_twisted")?;
    Ok(format!("mixed Courant and Gualtieri residual {w:.3e}"))
}

fn c4() -> Result<String, String> {
    let c = cfg("r3_twisted");
    let pts = sample_points(&c.chart, 50, 1);
    let nab = BigConnection::canonical(&c.metric);
    let lift = |i: usize| c.metric.lift(&unit(3, i), Side::Plus);
    let t = nab.gualtieri_torsion(&lift(0), &lift(1), &lift(2));
    let r = sweep(&pts, |p| Ok(t.eval(p)? - 2.0));
    if !r.passes(1e-9) {
        return Err(format!("𝒯(∂x₊,∂y₊,∂z₊) − 2 = {:.3e}", r.max));
    }
    let recs = records("r3_twisted", Suite::Torsion, 50);
    let ids = ["torsion.gualtieri_same_side", "torsion.gualtieri_antisymmetric", "torsion.gualtieri_tensorial"];
    let w = bound(&recs, &ids, 1e-9, "r3_twisted")?;
    Ok(format!("value 2 within {:.3e}; 2dψ, antisymmetry, trilinearity within {w:.3e}", r.max))
}

fn c5() -> Result<String, String> {
    let recs = records("r3_twisted", Suite::Torsion, 50);
    let ids = ["torsion.big_levi_civita", "torsion.generalized_lc_same_side", "torsion.generalized_lc_mixed"];
    let w = bound(&recs, &ids, 1e-8, "r3_twisted")?;
    Ok(format!("−dψ∘pr, ±3dψ and (±,±,∓) formulas within {w:.3e}"))
}

fn c6() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for name in ["r2_kahler", "r2_poisson_const"] {
        let recs = records(name, Suite::Dirac, 50);
        let ids = ["dirac.nijenhuis_torsion", "dirac.chart_connection_commutes", "dirac.chart_connection_metric"];
        worst = worst.max(bound(&recs, &ids, 1e-8, name)?);
    }
    Ok(format!("identity residual {worst:.3e} on r2_kahler, r2_poisson_const"))
}

fn c7() -> Result<String, String> {
    let base = bundled::source("r2_kahler").unwrap();
    let mut worst: f64 = 0.0;
    for c in ["0", "0.5", "-2", "3.25"] {
        let text = base.replace(
            r#"psi = [["0", "0.5"], ["-0.5", "0"]]"#,
            &format!(r#"psi = [["0", "{c}"], ["-({c})", "0"]]"#),
        );
        let cf = ManifoldConfig::from_toml(&text).map_err(|e| e.to_string())?;
        let rep = run(&cf, Suite::Parallel, RunOptions::from_config(&cf));
        let ids = ["parallel.lc_condition", "parallel.psi_condition", "parallel.direct", "parallel.complex_graph"];
        worst = worst.max(bound(&rep.records, &ids, 1e-9, &format!("c = {c}"))?);
    }
    Ok(format!("c ∈ {{0, 0.5, -2, 3.25}} parallel, span residual {worst:.3e}"))
}

fn c8() -> Result<String, String> {
    let good = records("r2_poisson_const", Suite::Parallel, 50);
    if let Some(r) = good.iter().find(|r| !r.pass) {
        return Err(format!("r2_poisson_const {} = {:.3e}", r.id, r.residual));
    }
    let bad = records("r2_poisson_x", Suite::Parallel, 50);
    let lc = pick(&bad, "parallel.lc_condition");
    if lc.residual <= 0.1 {
        return Err(format!("r2_poisson_x residual only {:.3e}", lc.residual));
    }
    Ok(format!("constant P parallel; P = x∂x∧∂y fails with residual {:.3e}", lc.residual))
}

fn c9() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for name in ["r2_tangent", "r2_bivector", "r4_symplectic"] {
        let recs = records(name, Suite::Nilpotent, 50);
        worst = worst.max(bound(&recs, &["nilpotent.d_omega_identity"], 1e-8, name)?);
    }
    Ok(format!("d_Eω(τ𝒳,τ𝒴,τ𝒵) + g(𝒳,N_τ(𝒴,𝒵)) within {worst:.3e}"))
}

fn c10() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for name in ["r2_tangent", "r2_bivector", "r4_symplectic", "r4_almost_kahler"] {
        let recs = records(name, Suite::Nilpotent, 50);
        worst = worst.max(bound(&recs, &["nilpotent.gd_jacobi"], 1e-8, name)?);
    }
    let bad = records("r4_nonclosed", Suite::Nilpotent, 50);
    let j = pick(&bad, "nilpotent.gd_jacobi");
    if j.residual <= 1e-3 {
        return Err(format!("r4_nonclosed Jacobi residual only {:.3e}", j.residual));
    }
    Ok(format!("Jacobi within {worst:.3e} on integrable data, {:.3e} on r4_nonclosed", j.residual))
}

fn c11() -> Result<String, String> {
    let c = cfg("r2_tangent");
    let pts = sample_points(&c.chart, 50, 1);
    let spec = c.tau.as_ref().unwrap();
    let op = graph_two_form_tau(&spec.graph, &spec.form);
    let verdicts = |op| -> Result<Vec<bool>, String> {
        let t = TauStructure::build(op, &pts, 1e-9).map_err(|e| e.to_string())?;
        let mt = MetricTau::new(t, c.metric.clone(), &pts).map_err(|e| e.to_string())?;
        Ok(mt.conditions(&pts).iter().map(|(_, r)| r.passes(1e-9)).collect())
    };
    let good = verdicts(op.clone())?;
    let bad = verdicts(op.scale(0.5))?;
    if good.len() != 6 || !good.iter().all(|&b| b) {
        return Err(format!("r2_tangent verdicts {good:?}"));
    }
    if bad.iter().any(|&b| b) {
        return Err(format!("perturbed verdicts {bad:?}"));
    }
    Ok("six conditions all pass on r2_tangent, all fail with ω scaled by 2".into())
}

/// Bundled τ configs whose six compatibility conditions hold.
fn compatible() -> Vec<&'static str> {
    bundled::names()
        .filter(|n| cfg(n).tau.is_some())
        .filter(|n| {
            let recs = records(n, Suite::Compat, 50);
            recs.iter().filter(|r| r.id.starts_with("compat.condition")).count() == 6
                && recs.iter().filter(|r| r.id.starts_with("compat.condition")).all(|r| r.pass)
        })
        .collect()
}

fn c12() -> Result<String, String> {
    let names = compatible();
    let mut worst: f64 = 0.0;
    for name in &names {
        let recs = records(name, Suite::Compat, 50);
        let ids = ["compat.f_structure_phi_cubed", "compat.f_structure_g_skew", "compat.f_structure_G_skew"];
        worst = worst.max(bound(&recs, &ids, 1e-9, name)?);
    }
    if names.len() < 3 {
        return Err(format!("only {names:?} compatible"));
    }
    Ok(format!("Φ³+Φ, g-skew, G-skew within {worst:.3e} on {}", names.join(", ")))
}

fn c13() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut seen = Vec::new();
    for name in compatible() {
        let recs = records(name, Suite::Compat, 50);
        let ids: Vec<&str> = recs.iter().filter(|r| r.id.starts_with("compat.correspondence_")).map(|r| r.id.as_str()).collect();
        worst = worst.max(bound(&recs, &ids, 1e-9, name)?);
        seen.push(name);
    }
    for name in bundled::names() {
        let c = cfg(name);
        if c.f.is_none() && c.p.is_none() && c.theta.is_none() {
            continue;
        }
        let recs = records(name, Suite::Dirac, 50);
        let ids = ["dirac.e_round_trip", "dirac.f_round_trip", "dirac.classical_round_trip"];
        worst = worst.max(bound(&recs, &ids, 1e-9, name)?);
        seen.push(name);
    }
    Ok(format!("reconstruction within {worst:.3e} on {}", seen.join(", ")))
}

fn c14() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for name in ["r2_tangent", "r2_bivector", "r4_almost_kahler"] {
        let recs = records(name, Suite::Kahler, 50);
        worst = worst.max(bound(&recs, &["kahler.kobayashi_nomizu"], 1e-8, name)?);
        let verdict = pick(&recs, "kahler.d_lambda").pass && pick(&recs, "kahler.n_lambda").pass;
        let want = name != "r4_almost_kahler";
        if verdict != want {
            return Err(format!("{name}: Kähler verdict {verdict}"));
        }
    }
    Ok(format!("display within {worst:.3e}; constant data Kähler, r4_almost_kahler not"))
}

fn c15() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_courant-forge");
    for name in bundled::names() {
        let go = || {
            Command::new(bin)
                .args(["run", "--config", name, "--suite", "all", "--report", "machine", "--seed", "11"])
                .output()
                .unwrap()
        };
        let (a, b) = (go(), go());
        let want = if cfg(name).expect == Expect::Pass { 0 } else { 1 };
        if a.status.code() != Some(want) {
            return Err(format!("{name}: exit {:?}", a.status.code()));
        }
        if a.stdout != b.stdout || a.stdout.is_empty() {
            return Err(format!("{name}: machine reports differ"));
        }
    }
    Ok(format!("{} configs, byte-identical machine reports", BUNDLED.len()))
}

#[test]
fn acceptance() {
    let mut l = Ledger { failed: Vec::new() };
    let criteria: [(&str, fn() -> Result<String, String>); 15] = [
        ("derivative oracle", c1),
        ("D± torsion is ±dψ", c2),
        ("mixed torsions vanish", c3),
        ("same-side Gualtieri torsion is 2dψ", c4),
        ("Levi-Civita torsion formulas", c5),
        ("Nijenhuis-torsion identity", c6),
        ("Kähler plane is parallel", c7),
        ("graph ♯P parallel iff D♯P = 0", c8),
        ("d_Eω identity", c9),
        ("Gelfand-Dorfman Jacobi both ways", c10),
        ("six compatibility conditions agree", c11),
        ("f-structure Φ", c12),
        ("round trips", c13),
        ("Kobayashi-Nomizu display and Kähler verdicts", c14),
        ("determinism", c15),
    ];
    for (i, (title, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        l.line(i + 1, title, start, f());
    }
    assert!(l.failed.is_empty(), "failed criteria: {:?}", l.failed);
}
