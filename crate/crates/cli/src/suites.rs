//! Suites: named groups of checks run against one configuration.

use std::fmt;
use std::str::FromStr;

use courant_core::bigtangent::{courant_bracket, neutral_pairing, tensoriality_check, twist_closedness, BigOperator, Frame, Section};
use courant_core::chartfield::linalg::unit;
use courant_core::chartfield::tensor::{directional, lie_bracket, schouten};
use courant_core::chartfield::{Expr, Mat, Point};
use courant_core::connections::{max_sweep, three_form_on, AffineConnection, BigConnection, GenConnection};
use courant_core::dirac::{
    chart_compatible_connection, classical_from_isometry, closure_residual, graph_isometry_closed_form, isometry_from_dirac,
    isometry_residual, para_from_isometry, parallel_dirac_check, psi_of_dirac, DiracData, ParaHermitian,
};
use courant_core::genmetric::{GenMetric, Side};
use courant_core::nilpotent::{graph_bivector_tau, graph_two_form_tau, tau_torsion_conditions, MetricTau, TauStructure};
use courant_core::sampling::{sample_points, sweep, Residual};

use crate::config::{ManifoldConfig, TauKind};
use crate::report::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Metric,
    Connection,
    Torsion,
    Dirac,
    Parallel,
    Nilpotent,
    Compat,
    Kahler,
    All,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Metric,
        Suite::Connection,
        Suite::Torsion,
        Suite::Dirac,
        Suite::Parallel,
        Suite::Nilpotent,
        Suite::Compat,
        Suite::Kahler,
        Suite::All,
    ];

    pub fn concrete() -> Vec<Suite> {
        Suite::ALL.into_iter().filter(|s| *s != Suite::All).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metric => "metric",
            Suite::Connection => "connection",
            Suite::Torsion => "torsion",
            Suite::Dirac => "dirac",
            Suite::Parallel => "parallel",
            Suite::Nilpotent => "nilpotent",
            Suite::Compat => "compat",
            Suite::Kahler => "kahler",
            Suite::All => "all",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Suite::Metric => "generalized metric: φ² = Id, G positive, V± frames, twist closedness",
            Suite::Connection => "D± and the canonical big connection, generalized Levi-Civita, curvature",
            Suite::Torsion => "Courant and Gualtieri torsion identities",
            Suite::Dirac => "paracomplex structure of F_E, round trips, Nijenhuis-torsion identity",
            Suite::Parallel => "parallel Dirac structure conditions",
            Suite::Nilpotent => "2-nilpotent τ, its form ω, integrability and brackets",
            Suite::Compat => "metric compatibility of τ, Φ and Ψ_E",
            Suite::Kahler => "Kähler-type test via D^E and the recipe connection",
            Suite::All => "every suite listed by the config",
        }
    }

    /// Whether the config carries the data this suite needs.
    pub fn applies(self, cfg: &ManifoldConfig) -> bool {
        match self {
            Suite::Metric | Suite::Connection | Suite::Torsion | Suite::All => true,
            Suite::Dirac | Suite::Parallel => cfg.f.is_some() || cfg.p.is_some() || cfg.theta.is_some(),
            Suite::Nilpotent | Suite::Compat | Suite::Kahler => cfg.tau.is_some(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Suite, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl RunOptions {
    pub fn from_config(cfg: &ManifoldConfig) -> RunOptions {
        RunOptions {
            samples: cfg.sampling.samples,
            seed: cfg.sampling.seed,
            tol: cfg.sampling.tol,
        }
    }
}

/// Tolerance factor for checks with nested brackets or second derivatives.
const LOOSE: f64 = 10.0;

struct Ctx<'a> {
    cfg: &'a ManifoldConfig,
    pts: Vec<Point>,
    tol: f64,
    prefix: &'static str,
    out: Vec<Record>,
}

impl Ctx<'_> {
    fn push(&mut self, id: &str, anchor: &str, r: Residual, scale: f64) {
        let mut note = None;
        if !r.skipped.is_empty() {
            note = Some(format!("{} points skipped at singular denominators", r.skipped.len()));
        }
        let tol = self.tol * scale;
        self.out.push(Record {
            id: format!("{}.{id}", self.prefix),
            anchor: anchor.to_string(),
            residual: r.max,
            tol,
            pass: r.passes(tol),
            witness: if r.passes(tol) { None } else { r.witness },
            note,
        });
    }

    fn error(&mut self, id: &str, anchor: &str, message: String) {
        self.out.push(Record {
            id: format!("{}.{id}", self.prefix),
            anchor: anchor.to_string(),
            residual: f64::INFINITY,
            tol: self.tol,
            pass: false,
            witness: None,
            note: Some(message),
        });
    }

    fn m(&self) -> usize {
        self.cfg.dim()
    }

    fn gm(&self) -> &GenMetric {
        &self.cfg.metric
    }
}

fn stacked(secs: &[Section], pts: &[Point]) -> Residual {
    let comps: Vec<Expr> = secs.iter().flat_map(Section::stacked).collect();
    max_sweep(&comps, pts)
}

fn op_distance(a: &BigOperator, b: &BigOperator, pts: &[Point]) -> Residual {
    max_sweep(a.sub(b).matrix().entries(), pts)
}

/// Three fixed polynomial-trigonometric vector fields on the chart.
pub fn probe_fields(m: usize) -> [Vec<Expr>; 3] {
    let x = |i: usize| Expr::var(i % m);
    let field = |k: usize| -> Vec<Expr> {
        (0..m)
            .map(|i| {
                let a = x(i + k + 1);
                let b = x(i + 2 * k + 1);
                Expr::sum([Expr::constant(1.0 + 0.25 * k as f64), (&a * &b).scale(0.5), x(i + k).sin().scale(0.3)])
            })
            .collect()
    };
    [field(0), field(1), field(2)]
}

/// Three fixed generic sections (vector plus form part).
pub fn probe_sections(m: usize) -> [Section; 3] {
    let [a, b, c] = probe_fields(m);
    let x = |i: usize| Expr::var(i % m);
    let form = |k: usize| -> Vec<Expr> {
        (0..m)
            .map(|i| Expr::sum([x(i + k).scale(0.5), x(i + k + 1).cos().scale(0.4), Expr::constant(0.2 * k as f64)]))
            .collect()
    };
    [Section::new(a, form(0)), Section::new(b, form(1)), Section::new(c, form(2))]
}

/// Runs one suite; `All` expands to the config's suite list.
pub fn run_suite(cfg: &ManifoldConfig, suite: Suite, opts: RunOptions) -> Vec<Record> {
    let suites = if suite == Suite::All { cfg.suites.clone() } else { vec![suite] };
    let pts = sample_points(&cfg.chart, opts.samples, opts.seed);
    let mut out = Vec::new();
    for s in suites {
        let mut ctx = Ctx {
            cfg,
            pts: pts.clone(),
            tol: opts.tol,
            prefix: s.name(),
            out: Vec::new(),
        };
        match s {
            Suite::Metric => metric(&mut ctx),
            Suite::Connection => connection(&mut ctx),
            Suite::Torsion => torsion(&mut ctx),
            Suite::Dirac => dirac(&mut ctx),
            Suite::Parallel => parallel(&mut ctx),
            Suite::Nilpotent => nilpotent(&mut ctx),
            Suite::Compat => compat(&mut ctx),
            Suite::Kahler => kahler(&mut ctx),
            Suite::All => unreachable!("expanded above"),
        }
        out.extend(ctx.out);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn metric(c: &mut Ctx) {
    let inv = c.gm().invariants(&c.pts);
    for (name, r) in inv {
        c.push(name, "G ↔ (γ,ψ): φ² = Id, φ g-isometric, G > 0, V± eigenframes", r, 1.0);
    }
    let [x, y, _] = probe_sections(c.m());
    let skew = courant_bracket(&x, &y).add(&courant_bracket(&y, &x));
    let r = stacked(&[skew], &c.pts);
    c.push("courant_skew", "[𝒳,𝒴] = −[𝒴,𝒳]", r, 1.0);
    if let Some(theta) = &c.cfg.twist {
        match twist_closedness(theta, &c.pts) {
            Ok(r) => c.push("twist_closed", "dΘ = 0 for the twisted bracket", r, 1.0),
            Err(e) => c.error("twist_closed", "dΘ = 0 for the twisted bracket", e.to_string()),
        }
    }
}

fn connection(c: &mut Ctx) {
    let gm = c.gm().clone();
    let m = c.m();
    let dpsi = gm.pair.dpsi();
    for side in [Side::Plus, Side::Minus] {
        let tag = if side == Side::Plus { "dplus" } else { "dminus" };
        let d = AffineConnection::dpm(&gm.pair, side);
        let r = d.torsion_form_residual(&gm.pair.gamma, &dpsi, side.sign(), &c.pts);
        c.push(&format!("{tag}_torsion"), "γ(T^{D±}(X,Y),Z) = ±dψ(X,Y,Z)", r, 1.0);
        let r = d.metric_residual(&gm.pair.gamma, &c.pts);
        c.push(&format!("{tag}_metric"), "D±γ = 0", r, 1.0);
    }
    let nab = BigConnection::canonical(&gm);
    let r = nab.g_compat_residual(&c.pts);
    c.push("canonical_g_compatible", "∇g = 0", r, 1.0);
    let r = nab.big_g_compat_residual(&gm, &c.pts);
    c.push("canonical_G_compatible", "∇G = 0", r, 1.0);
    let r = nab.preserves_frames_residual(&gm, &c.pts);
    c.push("canonical_preserves_V", "∇ΓV± ⊂ ΓV±", r, 1.0);
    let r = nab.curvature_split_residual(&gm, &c.pts);
    c.push("curvature_split", "R^∇ on V± transfers to R^{D±}", r, LOOSE);
    let dd = GenConnection::generalized_lc(&gm);
    let r = dd.xi_antisymmetry(&c.pts);
    c.push("xi_antisymmetry", "Ξ±(X,Y,Z) + Ξ±(Y,X,Z) = 0", r, 1.0);
    let r = dd.star_compat_residual(&gm, &c.pts);
    c.push("generalized_lc_compatible", "𝒟g = 0 and 𝒟G = 0", r, 1.0);
    let [x, y, _] = probe_fields(m);
    let (xp, ym) = (gm.lift(&x, Side::Plus), gm.lift(&y, Side::Minus));
    let diff = dd.modified_bracket(&xp, &ym).sub(&courant_bracket(&xp, &ym));
    let r = stacked(&[diff], &c.pts);
    c.push("modified_bracket_mixed", "[𝒳₊,𝒴₋]^𝒟 = [𝒳₊,𝒴₋]", r, 1.0);
    let [a, b, s] = probe_sections(m);
    let w = Section::new(unit(m, 0), unit(m, m - 1));
    let t = |p: &Section, q: &Section, z: &Section| neutral_pairing(&dd.gen_curvature(p, q, z), &w);
    let [r0, r1, _] = tensoriality_check(&t, [&a, &b, &s], &c.pts);
    c.push("gen_curvature_tensorial_xy", "ℛ^𝒟 is C∞-linear in 𝒳 and 𝒴", r0.merge(r1), LOOSE);
    let f = Expr::var(0);
    let defect = dd.gen_curvature(&a, &b, &s.scale(&f)).sub(&dd.gen_curvature(&a, &b, &s).scale(&f));
    let anchor = directional(&lie_bracket(&a.vec, &b.vec), &f) - directional(&dd.modified_bracket(&a, &b).vec, &f);
    let r = stacked(&[defect.sub(&s.scale(&anchor))], &c.pts);
    c.push("gen_curvature_z_defect", "ℛ^𝒟(𝒳,𝒴)f𝒵 − fℛ^𝒟(𝒳,𝒴)𝒵 = (pr[𝒳,𝒴] − pr[𝒳,𝒴]^𝒟)(f)𝒵", r, LOOSE);
}

fn torsion(c: &mut Ctx) {
    let gm = c.gm().clone();
    let m = c.m();
    let dpsi = gm.pair.dpsi();
    let nab = BigConnection::canonical(&gm);
    let [x, y, z] = probe_fields(m);
    let coords: Vec<Vec<Expr>> = (0..m).map(|i| unit(m, i)).collect();
    let mut mixed = Vec::new();
    for s in [Side::Plus, Side::Minus] {
        mixed.push(nab.courant_torsion(&gm.lift(&x, s), &gm.lift(&y, s.flip())));
    }
    let r = stacked(&mixed, &c.pts);
    c.push("mixed_courant", "T^∇(𝒳₊,𝒴₋) = 0", r, 1.0);
    let mut same = Vec::new();
    let mut cross = Vec::new();
    let mut triples = vec![[x.clone(), y.clone(), z.clone()]];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if i < j && j < k {
                    triples.push([coords[i].clone(), coords[j].clone(), coords[k].clone()]);
                }
            }
        }
    }
    for [p, q, r] in &triples {
        for s in [Side::Plus, Side::Minus] {
            let (a, b, cc) = (gm.lift(p, s), gm.lift(q, s), gm.lift(r, s));
            same.push(nab.gualtieri_torsion(&a, &b, &cc) - three_form_on(&dpsi, p, q, r).scale(2.0));
            let o = |v: &Vec<Expr>| gm.lift(v, s.flip());
            cross.push(nab.gualtieri_torsion(&a, &b, &o(r)));
            cross.push(nab.gualtieri_torsion(&a, &o(q), &cc));
            cross.push(nab.gualtieri_torsion(&o(p), &b, &cc));
        }
    }
    let r = max_sweep(&same, &c.pts);
    c.push("gualtieri_same_side", "𝒯^∇(𝒳±,𝒴±,𝒵±) = 2dψ(X,Y,Z)", r, 1.0);
    let r = max_sweep(&cross, &c.pts);
    c.push("gualtieri_mixed", "𝒯^∇ vanishes on mixed V± arguments", r, 1.0);
    let [a, b, s] = probe_sections(m);
    let t = |p: &Section, q: &Section, z: &Section| nab.gualtieri_torsion(p, q, z);
    let base = t(&a, &b, &s);
    let skew = [base.clone() + t(&b, &a, &s), base.clone() + t(&a, &s, &b), base + t(&s, &b, &a)];
    let r = max_sweep(&skew, &c.pts);
    c.push("gualtieri_antisymmetric", "𝒯^∇ is totally antisymmetric", r, 1.0);
    let [r0, r1, r2] = tensoriality_check(&t, [&a, &b, &s], &c.pts);
    c.push("gualtieri_tensorial", "𝒯^∇ is C∞-trilinear", r0.merge(r1).merge(r2), 1.0);
    let lc = BigConnection::big_levi_civita(&gm);
    let v = lc.gualtieri_torsion(&a, &b, &s) + three_form_on(&dpsi, &a.vec, &b.vec, &s.vec);
    let r = max_sweep(&[v], &c.pts);
    c.push("big_levi_civita", "𝒯^{∇LC} = −dψ∘pr", r, LOOSE);
    let dd = GenConnection::generalized_lc(&gm);
    let mut same = Vec::new();
    let mut cross = Vec::new();
    for s in [Side::Plus, Side::Minus] {
        let (a, b, cc) = (gm.lift(&x, s), gm.lift(&y, s), gm.lift(&z, s));
        let rhs = dd.nabla.gualtieri_torsion(&a, &b, &cc) + three_form_on(&dpsi, &x, &y, &z).scale(3.0 * s.sign());
        same.push(dd.gualtieri_torsion(&a, &b, &cc) - rhs);
        let co = gm.lift(&z, s.flip());
        let zz = gm.pair.flat_pm(s).inverse().mul_vec(&co.form);
        let rhs = dd.nabla.gualtieri_torsion(&a, &b, &co) + three_form_on(&dpsi, &x, &y, &zz).scale(s.sign());
        cross.push(dd.gualtieri_torsion(&a, &b, &co) - rhs);
    }
    let r = max_sweep(&same, &c.pts);
    c.push("generalized_lc_same_side", "𝒯^{𝒟LC}(𝒳±,𝒴±,𝒵±) = 𝒯^{∇LC} ± 3dψ", r, LOOSE);
    let r = max_sweep(&cross, &c.pts);
    c.push("generalized_lc_mixed", "𝒯^{𝒟LC}(𝒳±,𝒴±,𝒵∓) = 𝒯^{∇LC} ± dψ(X,Y,♯_{ψ±γ}♭_{ψ∓γ}Z)", r, LOOSE);
    let lhs = neutral_pairing(&dd.d(&a, &b).sub(&dd.d(&b, &a)).sub(&dd.modified_bracket(&a, &b)), &s);
    let r = max_sweep(&[lhs - dd.gualtieri_torsion(&a, &b, &s)], &c.pts);
    c.push("modified_bracket_torsion", "g(𝒟_𝒳𝒴 − 𝒟_𝒴𝒳 − [𝒳,𝒴]^𝒟, 𝒵) = 𝒯^𝒟(𝒳,𝒴,𝒵)", r, LOOSE);
}

/// The Dirac structure of the config with its F_E, or an error message.
fn dirac_data(c: &Ctx) -> Result<(Frame, Mat, ParaHermitian), String> {
    let gm = c.gm();
    if let Some(f) = &c.cfg.f {
        let ph = para_from_isometry(gm, f);
        return Ok((ph.e.clone(), f.clone(), ph));
    }
    let data = match (&c.cfg.p, &c.cfg.theta) {
        (Some(p), _) => DiracData::graph_bivector(p),
        (None, Some(t)) => DiracData::graph_two_form(t),
        (None, None) => return Err("no Dirac structure in config".into()),
    };
    let data = data.with_metric(gm, &c.pts).map_err(|e| e.to_string())?;
    let f = data.f_e.clone().expect("set by with_metric");
    let ph = psi_of_dirac(gm, &data.frame, &c.pts).map_err(|e| e.to_string())?;
    Ok((data.frame, f, ph))
}

fn dirac(c: &mut Ctx) {
    let gm = c.gm().clone();
    let m = c.m();
    let (frame, f, ph) = match dirac_data(c) {
        Ok(v) => v,
        Err(e) => return c.error("build", "E ↔ F_E", e),
    };
    let r = isometry_residual(&gm, &f, &c.pts);
    c.push("f_isometry", "F_E is a γ-isometry", r, 1.0);
    for (name, r) in ph.psi.structure_residuals(&c.pts) {
        c.push(&format!("psi_{name}"), "Ψ² = Id, Ψ g-skew, block relations of (A,π,σ)", r, 1.0);
    }
    for (name, r) in ph.psi.compat_residuals(&gm, &c.pts) {
        c.push(&format!("psi_{name}"), "G(Ψ·,Ψ·) = G, φΨ = −Ψφ", r, 1.0);
    }
    let r = frame.isotropy(&c.pts);
    c.push("e_isotropic", "E is g-isotropic", r, 1.0);
    let r = ph.e.span_distance(&frame, &c.pts);
    c.push("e_round_trip", "E = {(X,♭_{ψ+γ}X) + (F_EX,♭_{ψ−γ}F_EX)}", r, 1.0);
    match isometry_from_dirac(&gm, &ph.e, &c.pts) {
        Ok(back) => {
            let r = max_sweep(back.sub(&f).entries(), &c.pts);
            c.push("f_round_trip", "F ↦ E ↦ F_E recovers F", r, 1.0);
        }
        Err(e) => c.error("f_round_trip", "F ↦ E ↦ F_E recovers F", e.to_string()),
    }
    let (a, pi, sigma) = classical_from_isometry(&gm, &f);
    let r = op_distance(&BigOperator::from_classical(&a, &pi, &sigma), &ph.psi.op, &c.pts);
    c.push("classical_round_trip", "(A,π,σ) from F_E rebuild Ψ", r, 1.0);
    if let (None, Some(p)) = (&c.cfg.f, &c.cfg.p) {
        let r = max_sweep(f.sub(&graph_isometry_closed_form(&gm, p)).entries(), &c.pts);
        c.push("graph_closed_form", "F_E = (Q⁺ − Id)(Q⁻ + Id)⁻¹ for E = graph ♯P", r, 1.0);
    }
    if c.cfg.f.is_none() {
        let r = closure_residual(&frame, &c.pts);
        c.push("closed", "E closed under the Courant bracket", r, 1.0);
    }
    let [x, y, z] = probe_sections(m);
    let r = stacked(&[ph.psi.ehresmann_identity(&x, &y)], &c.pts);
    c.push("ehresmann_identity", "Courant-Ehresmann curvature identity", r, 1.0);
    let nab = chart_compatible_connection(&gm, &f);
    let r = ph.psi.commutation_residual(&nab, &c.pts);
    c.push("chart_connection_commutes", "∇Ψ = Ψ∇ for the chart-built connection", r, 1.0);
    let r = nab.g_compat_residual(&c.pts);
    c.push("chart_connection_metric", "∇g = 0 for the chart-built connection", r, 1.0);
    let v = ph.psi.nijenhuis_torsion_identity(&nab, &x, &y, &z);
    let r = max_sweep(&[v], &c.pts);
    c.push("nijenhuis_torsion", "g(N_Ψ(𝒳,𝒴),𝒵) through 𝒯^∇ for ∇ commuting with Ψ", r, LOOSE);
}

fn parallel(c: &mut Ctx) {
    let gm = c.gm().clone();
    let m = c.m();
    let (frame, f, _) = match dirac_data(c) {
        Ok(v) => v,
        Err(e) => return c.error("build", "E ↔ F_E", e),
    };
    let rep = parallel_dirac_check(&gm, &frame, &f, &c.pts);
    c.push("lc_condition", "γ(F_EZ,(D_XF_E)Y) = ½[dψ(X,Y,Z) + dψ(X,F_EY,F_EZ)]", rep.lc, 1.0);
    c.push("psi_condition", "dψ(X,Y,Z) + dψ(F_EX,F_EY,F_EZ) = 0", rep.psi, 1.0);
    c.push("direct", "∇_X ΓE ⊂ ΓE", rep.direct, 1.0);
    let sq = f.mul(&f).add(&Mat::identity(m));
    if max_sweep(sq.entries(), &c.pts).passes(c.tol) {
        let omega = f.transpose().mul(&gm.pair.gamma);
        let graph = DiracData::graph_two_form(&gm.pair.psi.sub(&omega)).frame;
        let r = frame.span_distance(&graph, &c.pts);
        c.push("complex_graph", "F_E² = −Id: E = graph ♭_{ψ−ω}, ω = γ(F_E·,·)", r, 1.0);
    }
}

fn build_tau(c: &Ctx) -> Result<TauStructure, String> {
    let spec = c.cfg.tau.as_ref().ok_or("no τ in config")?;
    let op = match spec.kind {
        TauKind::TwoForm => graph_two_form_tau(&spec.graph, &spec.form),
        TauKind::Bivector => graph_bivector_tau(&spec.graph, &spec.form),
    };
    TauStructure::build(op, &c.pts, c.tol).map_err(|e| e.to_string())
}

fn build_metric_tau(c: &Ctx) -> Result<MetricTau, String> {
    let t = build_tau(c)?;
    MetricTau::new(t, c.gm().clone(), &c.pts).map_err(|e| e.to_string())
}

fn nilpotent(c: &mut Ctx) {
    let t = match build_tau(c) {
        Ok(t) => t,
        Err(e) => return c.error("build", "τ² = 0, g-skew, constant even rank", e),
    };
    for (name, r) in t.invariants(&c.pts) {
        c.push(name, "τ² = 0, τ g-skew, ω_E well defined and non-degenerate", r, 1.0);
    }
    let rep = t.integrability(&c.pts);
    c.push("weak_integrability", "E = im τ closed under the Courant bracket", rep.weak, 1.0);
    c.push("integrability", "N_τ = 0", rep.full, 1.0);
    if let Some(r) = rep.tau_nijenhuis {
        c.push("tau_nijenhuis", "τN_τ = 0", r, 1.0);
    }
    c.push("d_omega_identity", "d_Eω(τ𝒳,τ𝒴,τ𝒵) = −g(𝒳,N_τ(𝒴,𝒵))", rep.d_omega_identity, LOOSE);
    c.push("d_omega_expanded", "six-term expansion of d_Eω(τ𝒳,τ𝒴,τ𝒵)", rep.d_omega_expanded, LOOSE);
    c.push("quotient_brackets", "induced τ-bracket = τ'⁻¹[τ𝒳,τ𝒴]", rep.quotient_brackets, 1.0);
    c.push("gd_jacobi", "Gelfand-Dorfman bracket satisfies Jacobi", rep.gd_jacobi, LOOSE);
    c.push("gd_anchor", "Gelfand-Dorfman anchor is a morphism", rep.gd_anchor, LOOSE);
    c.push("gd_closed_form", "{,}_Λ against its closed form", rep.gd_closed_form, LOOSE);
    let m = c.m();
    let [x, y, _] = probe_sections(m);
    let lin = |j: usize, k: usize| Section::basis(m, j).scale(&(Expr::one() + Expr::var(k % m)));
    let r = stacked(&[t.jacobi_defect(&lin(0, 1), &lin(m, 0), &lin(2 * m - 1, 2))], &c.pts);
    c.push("quasi_jacobi", "τ-bracket Jacobiator through N_τ", r, LOOSE);
    let f = Expr::var(0).sin();
    let r = stacked(&[t.leibniz_defect(&x, &y, &f)], &c.pts);
    c.push("leibniz", "[𝒳,f𝒴]_τ = f[𝒳,𝒴]_τ + (pr τ𝒳)(f)𝒴 − g(𝒳,𝒴)τ∂f", r, 1.0);
    let pb = t.poisson_bivector();
    let r = max_sweep(schouten(&pb, &pb).compressed(), &c.pts);
    c.push("poisson", "[Π,Π] = 0 for the Poisson bivector of τ", r, LOOSE);
}

fn compat(c: &mut Ctx) {
    let mt = match build_metric_tau(c) {
        Ok(v) => v,
        Err(e) => return c.error("build", "S = (E ⊕ φE)^⊥ inside ker τ", e),
    };
    for (i, (name, r)) in mt.conditions(&c.pts).into_iter().enumerate() {
        c.push(&format!("condition{}_{name}", i + 1), "six equivalent compatibility conditions of G and τ", r, 1.0);
    }
    let r = mt.hermit_residual(&c.pts);
    c.push("hermitian", "G(λ̃·,λ̃·) = G on E ⊕ φE", r, 1.0);
    for (name, r) in mt.f_structure(&c.pts) {
        c.push(&format!("f_structure_{name}"), "Φ³ + Φ = 0, Φ g-skew and G-skew", r, 1.0);
    }
    for (name, r) in mt.decomposition(&c.pts) {
        c.push(&format!("decomposition_{name}"), "TM ⊕ T*M = E ⊕ φE ⊕ S", r, 1.0);
    }
    match mt.correspondences(&c.pts) {
        Ok(list) => {
            for (name, r) in list {
                c.push(&format!("correspondence_{name}"), "τ = ½Φ(Id + Ψ)φ and ΦΨ = ΨΦ", r, 1.0);
            }
        }
        Err(e) => c.error("correspondence", "τ = ½Φ(Id + Ψ)φ", e.to_string()),
    }
    let r = mt.integr_phi_residual(&c.pts);
    c.push("integrability_phi", "N_Φ against N_τ", r, LOOSE);
}

fn kahler(c: &mut Ctx) {
    let mt = match build_metric_tau(c) {
        Ok(v) => v,
        Err(e) => return c.error("build", "S = (E ⊕ φE)^⊥ inside ker τ", e),
    };
    let rep = mt.kahler_report(&c.pts);
    c.push("d_lambda", "D^Eλ = 0", rep.d_lambda, 1.0);
    c.push("n_lambda", "N_λ = 0 on E", rep.n_lambda, 1.0);
    c.push(
        "kobayashi_nomizu",
        "G((D_Xλ)Y,Z) = ½[d_Eω(X,Y,Z) − d_Eω(X,λY,λZ) + G(N_λ(Y,Z),λX)]",
        rep.kobayashi_nomizu,
        LOOSE,
    );
    let nab = mt.recipe_connection();
    let ind = mt.induced_connection_report(&nab, &c.pts);
    c.push("recipe_commutes", "recipe connection commutes with τ", ind.commutes, 1.0);
    c.push("recipe_metric", "recipe connection preserves g", ind.g_metric, 1.0);
    let tc = tau_torsion_conditions(&mt.tau, &nab, &c.pts);
    c.push("recipe_torsion_identity", "g(N_τ(𝒳,𝒴),𝒵) through 𝒯^∇ for ∇ commuting with τ", tc.identity, LOOSE);
}

/// Relative error between symbolic and central-difference derivatives.
pub fn derivative_oracle(cfg: &ManifoldConfig, n: usize, seed: u64, h: f64) -> Residual {
    let pts = sample_points(&cfg.chart, n, seed);
    let m = cfg.dim();
    let mut r = Residual::zero();
    r.evaluated = pts.len();
    for (_, e) in &cfg.entries {
        for i in 0..m {
            let d = e.diff(i);
            let s = sweep(&pts, |p| {
                let sym = d.eval(p)?;
                let mut hi = p.to_vec();
                let mut lo = p.to_vec();
                hi[i] += h;
                lo[i] -= h;
                let fd = (e.eval(&hi)? - e.eval(&lo)?) / (2.0 * h);
                Ok((sym - fd).abs() / sym.abs().max(1.0))
            });
            r = r.merge(s);
        }
    }
    r
}
