use courant_core::bigtangent::{neutral_pairing, tensoriality_check, Section};
use courant_core::chartfield::{Chart, Expr, Mat};
use courant_core::connections::{three_form_on, AffineConnection, BigConnection, GenConnection, XiReading};
use courant_core::genmetric::{GenMetric, MetricPair, Side};
use courant_core::sampling::{sample_points, sweep, Residual};

fn chart() -> Chart {
    Chart::cube(&["x", "y", "z"], -1.0, 1.0).unwrap()
}

/// Upper triangle in row order: xx, xy, xz, yy, yz, zz.
fn sym(c: &Chart, e: [&str; 6]) -> Mat {
    let pos = |a: usize, b: usize| [[0, 1, 2], [1, 3, 4], [2, 4, 5]][a][b];
    Mat::from_fn(3, 3, |i, j| c.parse(e[pos(i, j)]).unwrap())
}

fn skew(c: &Chart, xy: &str, xz: &str, yz: &str) -> Mat {
    let v = [c.parse(xy).unwrap(), c.parse(xz).unwrap(), c.parse(yz).unwrap()];
    Mat::from_fn(3, 3, |i, j| {
        let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        match (a, b) {
            _ if i == j => Expr::zero(),
            (0, 1) => v[0].scale(s),
            (0, 2) => v[1].scale(s),
            _ => v[2].scale(s),
        }
    })
}

fn twisted() -> GenMetric {
    let c = chart();
    GenMetric::new(MetricPair::new(Mat::identity(3), skew(&c, "z", "0", "0")).unwrap())
}

fn curved() -> GenMetric {
    let c = chart();
    let g = sym(&c, ["2+x^2", "0.3*y", "0", "1+z^2", "0.1*x*z", "3+sin(y)"]);
    GenMetric::new(MetricPair::new(g, skew(&c, "z+x*y", "sin(y)", "x^2*z")).unwrap())
}

fn vf(c: &Chart, s: [&str; 3]) -> Vec<Expr> {
    s.iter().map(|t| c.parse(t).unwrap()).collect()
}

fn fields(c: &Chart) -> [Vec<Expr>; 3] {
    [
        vf(c, ["1+y*z", "x", "cos(z)"]),
        vf(c, ["y^2", "1-x*z", "x+y"]),
        vf(c, ["sin(x)", "z", "2+x*y"]),
    ]
}

fn general(c: &Chart) -> [Section; 3] {
    let [x, y, z] = fields(c);
    [
        Section::new(x, vf(c, ["z", "x*y", "1"])),
        Section::new(y, vf(c, ["cos(y)", "0", "x^2"])),
        Section::new(z, vf(c, ["1+x", "y*z", "sin(z)"])),
    ]
}

fn pts() -> Vec<Vec<f64>> {
    sample_points(&chart(), 12, 11)
}

fn resid(e: &Expr) -> Residual {
    sweep(&pts(), |p| e.eval(p))
}

#[test]
fn dpm_torsion_is_plus_minus_dpsi() {
    for gm in [twisted(), curved()] {
        let dpsi = gm.pair.dpsi();
        for side in [Side::Plus, Side::Minus] {
            let d = AffineConnection::dpm(&gm.pair, side);
            let r = d.torsion_form_residual(&gm.pair.gamma, &dpsi, side.sign(), &pts());
            assert!(r.passes(1e-9), "{side:?} {}", r.max);
            assert!(d.metric_residual(&gm.pair.gamma, &pts()).passes(1e-9));
        }
    }
}

#[test]
fn twisted_dplus_torsion_value() {
    let gm = twisted();
    let d = AffineConnection::dpm(&gm.pair, Side::Plus);
    let e = |i| courant_core::chartfield::linalg::unit(3, i);
    let t = d.torsion(&e(0), &e(1));
    assert!((t[2].eval(&[0.2, 0.1, -0.4]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn canonical_connection_is_compatible() {
    let gm = curved();
    let nab = BigConnection::canonical(&gm);
    assert!(nab.g_compat_residual(&pts()).passes(1e-9));
    assert!(nab.big_g_compat_residual(&gm, &pts()).passes(1e-9));
    assert!(nab.preserves_frames_residual(&gm, &pts()).passes(1e-9));
    assert!(nab.curvature_split_residual(&gm, &pts()).passes(1e-8));
}

#[test]
fn mixed_courant_torsion_vanishes() {
    let c = chart();
    for gm in [twisted(), curved()] {
        let nab = BigConnection::canonical(&gm);
        let [x, y, _] = fields(&c);
        let t = nab.courant_torsion(&gm.lift(&x, Side::Plus), &gm.lift(&y, Side::Minus));
        for comp in t.stacked() {
            assert!(resid(&comp).passes(1e-9));
        }
    }
}

#[test]
fn gualtieri_torsion_same_side_and_mixed() {
    let c = chart();
    for gm in [twisted(), curved()] {
        let nab = BigConnection::canonical(&gm);
        let dpsi = gm.pair.dpsi();
        let [x, y, z] = fields(&c);
        for s in [Side::Plus, Side::Minus] {
            let (a, b, cc) = (gm.lift(&x, s), gm.lift(&y, s), gm.lift(&z, s));
            let val = nab.gualtieri_torsion(&a, &b, &cc) - three_form_on(&dpsi, &x, &y, &z).scale(2.0);
            assert!(resid(&val).passes(1e-9), "{s:?} {}", resid(&val).max);
            let mixed = nab.gualtieri_torsion(&a, &b, &gm.lift(&z, s.flip()));
            assert!(resid(&mixed).passes(1e-9));
        }
    }
}

#[test]
fn gualtieri_torsion_is_tensorial_and_skew() {
    let c = chart();
    let gm = twisted();
    let nab = BigConnection::canonical(&gm);
    let [a, b, cc] = general(&c);
    let t = |x: &Section, y: &Section, z: &Section| nab.gualtieri_torsion(x, y, z);
    for r in tensoriality_check(&t, [&a, &b, &cc], &pts()) {
        assert!(r.passes(1e-9), "{}", r.max);
    }
    let skew = t(&a, &b, &cc) + t(&b, &a, &cc);
    assert!(resid(&skew).passes(1e-9));
    let skew2 = t(&a, &b, &cc) + t(&a, &cc, &b);
    assert!(resid(&skew2).passes(1e-9));
}

#[test]
fn courant_torsion_is_not_tensorial() {
    let c = chart();
    let gm = twisted();
    let nab = BigConnection::canonical(&gm);
    let [a, b, cc] = general(&c);
    let t = |x: &Section, y: &Section, z: &Section| neutral_pairing(&nab.courant_torsion(x, y), z);
    let r = tensoriality_check(&t, [&a, &b, &cc], &pts());
    assert!(r[0].max > 1e-3 || r[1].max > 1e-3);
}

#[test]
fn big_levi_civita_torsion_is_minus_dpsi() {
    let c = chart();
    for gm in [twisted(), curved()] {
        let nab = BigConnection::big_levi_civita(&gm);
        let dpsi = gm.pair.dpsi();
        let [a, b, cc] = general(&c);
        let v = nab.gualtieri_torsion(&a, &b, &cc) + three_form_on(&dpsi, &a.vec, &b.vec, &cc.vec);
        assert!(resid(&v).passes(1e-8), "{}", resid(&v).max);
    }
}

#[test]
fn generalized_lc_same_side() {
    let c = chart();
    for gm in [twisted(), curved()] {
        let dd = GenConnection::generalized_lc(&gm);
        let dpsi = gm.pair.dpsi();
        let [x, y, z] = fields(&c);
        for s in [Side::Plus, Side::Minus] {
            let (a, b, cc) = (gm.lift(&x, s), gm.lift(&y, s), gm.lift(&z, s));
            let lhs = dd.gualtieri_torsion(&a, &b, &cc);
            let rhs = dd.nabla.gualtieri_torsion(&a, &b, &cc) + three_form_on(&dpsi, &x, &y, &z).scale(3.0 * s.sign());
            assert!(resid(&(lhs - rhs)).passes(1e-8), "{s:?}");
        }
    }
}

#[test]
fn generalized_lc_mixed_pattern() {
    let c = chart();
    for gm in [twisted(), curved()] {
        let dd = GenConnection::generalized_lc(&gm);
        let dpsi = gm.pair.dpsi();
        let [x, y, z] = fields(&c);
        for s in [Side::Plus, Side::Minus] {
            let (a, b, cc) = (gm.lift(&x, s), gm.lift(&y, s), gm.lift(&z, s.flip()));
            let lhs = dd.gualtieri_torsion(&a, &b, &cc);
            let zz = gm.pair.flat_pm(s).inverse().mul_vec(&cc.form);
            let rhs = dd.nabla.gualtieri_torsion(&a, &b, &cc) + three_form_on(&dpsi, &x, &y, &zz).scale(s.sign());
            let r = resid(&(lhs - rhs));
            assert!(r.passes(1e-8), "{s:?} {}", r.max);
        }
    }
}

#[test]
fn literal_xi_reading_misses_the_factor() {
    let c = chart();
    let gm = twisted();
    let dd = GenConnection::generalized_lc_with(&gm, XiReading::Literal);
    let [x, y, z] = fields(&c);
    let dpsi = gm.pair.dpsi();
    let s = Side::Plus;
    let (a, b, cc) = (gm.lift(&x, s), gm.lift(&y, s), gm.lift(&z, s));
    let lhs = dd.gualtieri_torsion(&a, &b, &cc);
    let rhs = dd.nabla.gualtieri_torsion(&a, &b, &cc) + three_form_on(&dpsi, &x, &y, &z).scale(3.0);
    assert!(resid(&(lhs - rhs)).max > 1e-3);
}

#[test]
fn xi_antisymmetry_and_star_compatibility() {
    let gm = curved();
    let dd = GenConnection::generalized_lc(&gm);
    assert!(dd.xi_antisymmetry(&pts()).passes(1e-12));
    assert!(dd.star_compat_residual(&gm, &pts()).passes(1e-9));
}

#[test]
fn modified_bracket_agrees_on_mixed_pairs() {
    let c = chart();
    let gm = twisted();
    let dd = GenConnection::generalized_lc(&gm);
    let [x, y, _] = fields(&c);
    let (a, b) = (gm.lift(&x, Side::Plus), gm.lift(&y, Side::Minus));
    let diff = dd.modified_bracket(&a, &b).sub(&courant_core::bigtangent::courant_bracket(&a, &b));
    for comp in diff.stacked() {
        assert!(resid(&comp).passes(1e-9));
    }
}

#[test]
fn modified_bracket_reproduces_gualtieri_torsion() {
    let c = chart();
    let gm = curved();
    let dd = GenConnection::generalized_lc(&gm);
    let [a, b, cc] = general(&c);
    let lhs = neutral_pairing(&dd.d(&a, &b).sub(&dd.d(&b, &a)).sub(&dd.modified_bracket(&a, &b)), &cc);
    let v = lhs - dd.gualtieri_torsion(&a, &b, &cc);
    assert!(resid(&v).passes(1e-8));
}

#[test]
fn gen_curvature_tensoriality() {
    use courant_core::chartfield::tensor::{directional, lie_bracket};
    let c = chart();
    let f = Expr::var(0);
    for gm in [twisted(), curved()] {
        let dd = GenConnection::generalized_lc(&gm);
        let [a, b, cc] = general(&c);
        let w = Section::new(vf(&c, ["x", "1", "y*z"]), vf(&c, ["1", "z", "x"]));
        let t = |x: &Section, y: &Section, z: &Section| neutral_pairing(&dd.gen_curvature(x, y, z), &w);
        let r = tensoriality_check(&t, [&a, &b, &cc], &pts());
        assert!(r[0].passes(1e-9) && r[1].passes(1e-9));
        assert!(r[2].max > 1e-3);
        // the Z-slot defect is the anchor mismatch of the modified bracket
        let defect = dd.gen_curvature(&a, &b, &cc.scale(&f)).sub(&dd.gen_curvature(&a, &b, &cc).scale(&f));
        let anchor = directional(&lie_bracket(&a.vec, &b.vec), &f) - directional(&dd.modified_bracket(&a, &b).vec, &f);
        let rest = defect.sub(&cc.scale(&anchor));
        assert!(max_of(&rest, 1e-9));
        let [x, y, z] = fields(&c);
        let (xp, ym, zp) = (gm.lift(&x, Side::Plus), gm.lift(&y, Side::Minus), gm.lift(&z, Side::Plus));
        let mixed = dd.gen_curvature(&xp, &ym, &zp.scale(&f)).sub(&dd.gen_curvature(&xp, &ym, &zp).scale(&f));
        assert!(max_of(&mixed, 1e-9));
    }
}

fn max_of(s: &Section, tol: f64) -> bool {
    s.stacked().iter().all(|e| resid(e).passes(tol))
}
