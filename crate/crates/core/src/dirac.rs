//! Generalized (para)complex structures, almost Dirac structures and the
//! isometry F_E, integrability and parallelism.

use thiserror::Error;

use crate::bigtangent::{courant_bracket, neutral_pairing, BigOperator, Frame, FrameLabel, Section};
use crate::chartfield::linalg::{numeric_rank, unit};
use crate::chartfield::{Evaluator, Expr, Mat, Point};
use crate::connections::{max_sweep, three_form_on, AffineConnection, BigConnection};
use crate::genmetric::{GenMetric, Side};
use crate::sampling::{sweep, Residual};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiracError {
    #[error("F is not a γ-isometry (residual {residual:e} at {witness:?})")]
    NotIsometry { residual: f64, witness: Option<Point> },
    #[error("frame has {got} sections, a Dirac structure needs {expected}")]
    Rank { expected: usize, got: usize },
    #[error("the vector parts of E fail to span TM at {0:?}")]
    Degenerate(Point),
    #[error("frame is not isotropic (residual {0:e})")]
    NotIsotropic(f64),
}

/// N_Ψ(𝒳,𝒴) = [Ψ𝒳,Ψ𝒴] − Ψ[𝒳,Ψ𝒴] − Ψ[Ψ𝒳,𝒴] + Ψ²[𝒳,𝒴].
pub fn nijenhuis(psi: &BigOperator, a: &Section, b: &Section) -> Section {
    let pa = psi.apply(a);
    let pb = psi.apply(b);
    let t1 = courant_bracket(&pa, &pb);
    let t2 = psi.apply(&courant_bracket(a, &pb));
    let t3 = psi.apply(&courant_bracket(&pa, b));
    let t4 = psi.apply(&psi.apply(&courant_bracket(a, b)));
    t1.sub(&t2).sub(&t3).add(&t4)
}

/// Ψ with Ψ² = εId.
#[derive(Debug, Clone)]
pub struct GenEndo {
    pub op: BigOperator,
    pub epsilon: f64,
}

impl GenEndo {
    pub fn new(op: BigOperator, epsilon: f64) -> GenEndo {
        GenEndo { op, epsilon }
    }

    /// Ψ² = εId, g-skewness and the three block identities.
    pub fn structure_residuals(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let (a, pi, sigma, _) = self.op.blocks();
        let m = self.op.dim();
        let pim = pi.transpose();
        let sm = sigma.transpose();
        let block1 = a.mul(&a).add(&pim.mul(&sm)).sub(&Mat::identity(m).scale(self.epsilon));
        let block2 = a.mul(&pi).sub(&pi.mul(&a.transpose()));
        let block3 = a.transpose().mul(&sigma).sub(&sigma.mul(&a));
        let mut blocks = block1.entries().to_vec();
        blocks.extend(block2.entries().iter().cloned());
        blocks.extend(block3.entries().iter().cloned());
        vec![
            ("square", self.op.square_residual(self.epsilon, points)),
            ("g_skew", self.op.g_skew_residual(points)),
            ("blocks", max_sweep(&blocks, points)),
        ]
    }

    /// G(Ψ·,Ψ·) = G and φΨ = −εΨφ.
    pub fn compat_residuals(&self, gm: &GenMetric, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let g = gm.g_matrix();
        let p = self.op.matrix();
        let iso = p.transpose().mul(&g).mul(p).sub(&g);
        let phi = gm.phi.matrix();
        let anti = phi.mul(p).add(&p.mul(phi).scale(self.epsilon));
        vec![
            ("G_isometry", max_sweep(iso.entries(), points)),
            ("phi_commutation", max_sweep(anti.entries(), points)),
        ]
    }

    /// max |∂_iΨ + C_iΨ − ΨC_i|: ∇ commutes with Ψ.
    pub fn commutation_residual(&self, nab: &BigConnection, points: &[Point]) -> Residual {
        let p = self.op.matrix();
        let comps: Vec<Expr> = (0..self.op.dim())
            .flat_map(|i| {
                let c = nab.matrix(i);
                p.diff(i).add(&c.mul(p)).sub(&p.mul(c)).entries().to_vec()
            })
            .collect();
        max_sweep(&comps, points)
    }

    /// g(N_Ψ(𝒳,𝒴),𝒵) + εT(𝒳,𝒴,𝒵) + T(𝒳,Ψ𝒴,Ψ𝒵) + T(Ψ𝒳,𝒴,Ψ𝒵) + T(Ψ𝒳,Ψ𝒴,𝒵).
    pub fn nijenhuis_torsion_identity(&self, nab: &BigConnection, a: &Section, b: &Section, c: &Section) -> Expr {
        let n = neutral_pairing(&nijenhuis(&self.op, a, b), c);
        n + self.torsion_sum(nab, a, b, c)
    }

    /// The four-term ε-weighted Gualtieri torsion sum.
    pub fn torsion_sum(&self, nab: &BigConnection, a: &Section, b: &Section, c: &Section) -> Expr {
        let (pa, pb, pc) = (self.op.apply(a), self.op.apply(b), self.op.apply(c));
        nab.gualtieri_torsion(a, b, c).scale(self.epsilon)
            + nab.gualtieri_torsion(a, &pb, &pc)
            + nab.gualtieri_torsion(&pa, b, &pc)
            + nab.gualtieri_torsion(&pa, &pb, c)
    }

    /// T(𝒳,𝒴,𝒵) + T(𝒳,Ψ𝒴,𝒵) + T(Ψ𝒳,𝒴,𝒵) + T(Ψ𝒳,Ψ𝒴,𝒵), meant for 𝒵 ∈ E.
    pub fn dirac_torsion_sum(&self, nab: &BigConnection, a: &Section, b: &Section, c: &Section) -> Expr {
        let (pa, pb) = (self.op.apply(a), self.op.apply(b));
        nab.gualtieri_torsion(a, b, c)
            + nab.gualtieri_torsion(a, &pb, c)
            + nab.gualtieri_torsion(&pa, b, c)
            + nab.gualtieri_torsion(&pa, &pb, c)
    }

    /// 𝓔(𝒳,𝒴) = (Id−Ψ)[(Id+Ψ)𝒳,(Id+Ψ)𝒴].
    pub fn ehresmann(&self, a: &Section, b: &Section) -> Section {
        let pa = a.add(&self.op.apply(a));
        let pb = b.add(&self.op.apply(b));
        let br = courant_bracket(&pa, &pb);
        br.sub(&self.op.apply(&br))
    }

    /// 𝓔(𝒳,𝒴) − ½(Id−Ψ)N_Ψ(𝒳,𝒴).
    pub fn ehresmann_identity(&self, a: &Section, b: &Section) -> Section {
        let n = nijenhuis(&self.op, a, b);
        let rhs = n.sub(&self.op.apply(&n)).scale_f(0.5);
        self.ehresmann(a, b).sub(&rhs)
    }
}

/// F⁻¹ = γ⁻¹Fᵀγ for a γ-isometry.
pub fn isometry_inverse(gm: &GenMetric, f: &Mat) -> Mat {
    gm.gamma_inv().mul(&f.transpose()).mul(&gm.pair.gamma)
}

/// max |FᵀγF − γ|.
pub fn isometry_residual(gm: &GenMetric, f: &Mat, points: &[Point]) -> Residual {
    let g = &gm.pair.gamma;
    max_sweep(f.transpose().mul(g).mul(f).sub(g).entries(), points)
}

/// The G-compatible paracomplex structure of a γ-isometry with its
/// eigenframes.
#[derive(Debug, Clone)]
pub struct ParaHermitian {
    pub psi: GenEndo,
    pub f: Mat,
    pub f_inv: Mat,
    pub e: Frame,
    pub e_prime: Frame,
}

/// Ψ(X,♭_{ψ+γ}X) = (FX,♭_{ψ−γ}FX) and Ψ(X,♭_{ψ−γ}X) = (F⁻¹X,♭_{ψ+γ}F⁻¹X).
pub fn para_from_isometry(gm: &GenMetric, f: &Mat) -> ParaHermitian {
    let m = gm.dim();
    let f_inv = isometry_inverse(gm, f);
    let op = gm
        .embedding(Side::Minus)
        .mul(f)
        .mul(&gm.transfer_matrix(Side::Plus))
        .add(&gm.embedding(Side::Plus).mul(&f_inv).mul(&gm.transfer_matrix(Side::Minus)));
    let frame = |sign: f64, label| {
        let secs = (0..m)
            .map(|i| {
                let x = unit(m, i);
                gm.lift(&x, Side::Plus).add(&gm.lift(&f.column(i), Side::Minus).scale_f(sign))
            })
            .collect();
        Frame::new(m, secs, label)
    };
    ParaHermitian {
        psi: GenEndo::new(BigOperator::from_matrix(op), 1.0),
        f: f.clone(),
        f_inv,
        e: frame(1.0, FrameLabel::E),
        e_prime: frame(-1.0, FrameLabel::EPrime),
    }
}

pub fn checked_para_from_isometry(gm: &GenMetric, f: &Mat, points: &[Point], tol: f64) -> Result<ParaHermitian, DiracError> {
    let r = isometry_residual(gm, f, points);
    if !r.passes(tol) {
        return Err(DiracError::NotIsometry {
            residual: r.max,
            witness: r.witness,
        });
    }
    Ok(para_from_isometry(gm, f))
}

/// Classical tensors (A, π, σ) of Ψ recovered from F:
/// ♯π = ½(F−F⁻¹)♯γ, A = ½(F+F⁻¹) − ♯π♭ψ,
/// ♭σ = ½[♭ψ(F+F⁻¹) − ♭γ(F−F⁻¹)] + ᵗA♭ψ.
pub fn classical_from_isometry(gm: &GenMetric, f: &Mat) -> (Mat, Mat, Mat) {
    let fi = isometry_inverse(gm, f);
    let plus = f.add(&fi);
    let minus = f.sub(&fi);
    let psi_m = gm.pair.psi.transpose();
    let sharp_pi = minus.mul(gm.gamma_inv()).scale(0.5);
    let a = plus.scale(0.5).sub(&sharp_pi.mul(&psi_m));
    let flat_sigma = psi_m
        .mul(&plus)
        .sub(&gm.pair.gamma.mul(&minus))
        .scale(0.5)
        .add(&a.transpose().mul(&psi_m));
    (a, sharp_pi.transpose(), flat_sigma.transpose())
}

/// The same blocks as printed, with ♭σ = ♭ψ(F+F⁻¹) − ᵗA♭ψ.
pub fn classical_sigma_as_printed(gm: &GenMetric, f: &Mat) -> Mat {
    let (a, _, _) = classical_from_isometry(gm, f);
    let fi = isometry_inverse(gm, f);
    let psi_m = gm.pair.psi.transpose();
    psi_m.mul(&f.add(&fi)).sub(&a.transpose().mul(&psi_m)).transpose()
}

/// F_E of an almost Dirac structure: each frame section (Z,ζ) gives
/// X = ½(Z + ♯γ(ζ − ♭ψZ)) and F_EX = ½(Z − ♯γ(ζ − ♭ψZ)).
pub fn isometry_from_dirac(gm: &GenMetric, e: &Frame, points: &[Point]) -> Result<Mat, DiracError> {
    let m = gm.dim();
    if e.len() != m {
        return Err(DiracError::Rank { expected: m, got: e.len() });
    }
    let psi_m = gm.pair.psi.transpose();
    let mut xs = Vec::with_capacity(m);
    let mut fxs = Vec::with_capacity(m);
    for s in &e.sections {
        let rest: Vec<Expr> = s.form.iter().zip(psi_m.mul_vec(&s.vec)).map(|(a, b)| a - b).collect();
        let w = gm.gamma_inv().mul_vec(&rest);
        xs.push(s.vec.iter().zip(&w).map(|(z, w)| (z + w).scale(0.5)).collect::<Vec<_>>());
        fxs.push(s.vec.iter().zip(&w).map(|(z, w)| (z - w).scale(0.5)).collect::<Vec<_>>());
    }
    let xm = Mat::from_columns(&xs);
    for p in points {
        if let Ok(v) = xm.eval(&mut Evaluator::new(p)) {
            if numeric_rank(&v, 1e-9) < m {
                return Err(DiracError::Degenerate(p.clone()));
            }
        }
    }
    Ok(Mat::from_columns(&fxs).mul(&xm.inverse()))
}

/// Ψ_E: the paracomplex structure with +1-eigenbundle E and −1-eigenbundle φ(E).
pub fn psi_of_dirac(gm: &GenMetric, e: &Frame, points: &[Point]) -> Result<ParaHermitian, DiracError> {
    Ok(para_from_isometry(gm, &isometry_from_dirac(gm, e, points)?))
}

/// 𝒥(X,♭_{ψ±γ}X) = (J±X, ♭_{ψ±γ}J±X).
pub fn hermitian_from_pair(gm: &GenMetric, j_plus: &Mat, j_minus: &Mat) -> GenEndo {
    let op = gm
        .embedding(Side::Plus)
        .mul(j_plus)
        .mul(&gm.transfer_matrix(Side::Plus))
        .add(&gm.embedding(Side::Minus).mul(j_minus).mul(&gm.transfer_matrix(Side::Minus)));
    GenEndo::new(BigOperator::from_matrix(op), -1.0)
}

/// The J± of a 𝒥 that preserves V±.
pub fn transferred_pair(gm: &GenMetric, j: &BigOperator) -> (Mat, Mat) {
    let t = |s: Side| gm.transfer_matrix(s).mul(j.matrix()).mul(&gm.embedding(s));
    (t(Side::Plus), t(Side::Minus))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Presentation {
    GraphTwoForm(Mat),
    GraphBivector(Mat),
    ParaEigenbundle,
}

#[derive(Debug, Clone)]
pub struct DiracData {
    pub frame: Frame,
    pub f_e: Option<Mat>,
    pub presentation: Presentation,
}

impl DiracData {
    /// {(∂_i, ♭θ∂_i)}.
    pub fn graph_two_form(theta: &Mat) -> DiracData {
        let m = theta.rows();
        let flat = theta.transpose();
        let secs = (0..m).map(|i| Section::new(unit(m, i), flat.column(i))).collect();
        DiracData {
            frame: Frame::new(m, secs, FrameLabel::E),
            f_e: None,
            presentation: Presentation::GraphTwoForm(theta.clone()),
        }
    }

    /// {(♯P dx^i, dx^i)}.
    pub fn graph_bivector(p: &Mat) -> DiracData {
        let m = p.rows();
        let sharp = p.transpose();
        let secs = (0..m).map(|i| Section::new(sharp.column(i), unit(m, i))).collect();
        DiracData {
            frame: Frame::new(m, secs, FrameLabel::E),
            f_e: None,
            presentation: Presentation::GraphBivector(p.clone()),
        }
    }

    pub fn with_metric(mut self, gm: &GenMetric, points: &[Point]) -> Result<DiracData, DiracError> {
        self.f_e = Some(isometry_from_dirac(gm, &self.frame, points)?);
        Ok(self)
    }

    /// Maximal isotropy: m sections of rank m with g(e_i,e_j) = 0.
    pub fn check(&self, points: &[Point], tol: f64) -> Result<(), DiracError> {
        let m = self.frame.dim();
        if self.frame.len() != m {
            return Err(DiracError::Rank { expected: m, got: self.frame.len() });
        }
        self.frame.check_rank(points).map_err(|_| DiracError::Rank { expected: m, got: m - 1 })?;
        let iso = self.frame.isotropy(points);
        if !iso.passes(tol) {
            return Err(DiracError::NotIsotropic(iso.max));
        }
        Ok(())
    }
}

/// max over frame triples of |g([e_i,e_j],e_k)|.
pub fn integrability_report(frame: &Frame, points: &[Point]) -> Residual {
    let n = frame.len();
    let mut comps = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let br = courant_bracket(&frame.sections[i], &frame.sections[j]);
            for k in 0..n {
                comps.push(neutral_pairing(&br, &frame.sections[k]));
            }
        }
    }
    if comps.is_empty() {
        let mut r = Residual::zero();
        r.evaluated = points.len();
        return r;
    }
    max_sweep(&comps, points)
}

/// Distance of every [e_i,e_j] from the span of the frame.
pub fn closure_residual(frame: &Frame, points: &[Point]) -> Residual {
    let n = frame.len();
    let mut acc: Option<Residual> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = frame.membership(&courant_bracket(&frame.sections[i], &frame.sections[j]), points);
            acc = Some(match acc {
                None => r,
                Some(a) => a.merge(r),
            });
        }
    }
    acc.unwrap_or_else(|| {
        let mut r = Residual::zero();
        r.evaluated = points.len();
        r
    })
}

/// (D_iF)^a_b = ∂_iF^a_b + Γ^a_{ic}F^c_b − F^a_cΓ^c_{ib}.
pub fn covariant_endo(d: &AffineConnection, f: &Mat, i: usize) -> Mat {
    f.diff(i).add(&d.matrix(i).mul(f)).sub(&f.mul(d.matrix(i)))
}

#[derive(Debug, Clone)]
pub struct ParallelReport {
    /// γ(F_EZ,(D_XF_E)Y) − ½[dψ(X,Y,Z) + dψ(X,F_EY,F_EZ)].
    pub lc: Residual,
    /// dψ(X,Y,Z) + dψ(F_EX,F_EY,F_EZ).
    pub psi: Residual,
    /// ∇ of frame sections measured against span E.
    pub direct: Residual,
}

impl ParallelReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.lc.passes(tol) && self.psi.passes(tol)
    }

    pub fn consistent(&self, tol: f64) -> bool {
        self.passes(tol) == self.direct.passes(tol)
    }
}

pub fn parallel_dirac_check(gm: &GenMetric, frame: &Frame, f: &Mat, points: &[Point]) -> ParallelReport {
    let m = gm.dim();
    let d = AffineConnection::levi_civita(&gm.pair);
    let dpsi = gm.pair.dpsi();
    let g = &gm.pair.gamma;
    let mut lc = Vec::new();
    let mut ps = Vec::new();
    for x in 0..m {
        let df = covariant_endo(&d, f, x);
        let ex = unit(m, x);
        for y in 0..m {
            let ey = unit(m, y);
            for z in 0..m {
                let ez = unit(m, z);
                let fz = f.column(z);
                let dfy = df.column(y);
                let lhs = crate::chartfield::linalg::dot(fz.iter(), g.mul_vec(&dfy).iter());
                let rhs = three_form_on(&dpsi, &ex, &ey, &ez) + three_form_on(&dpsi, &ex, &f.column(y), &fz);
                lc.push(lhs - rhs.scale(0.5));
                ps.push(three_form_on(&dpsi, &ex, &ey, &ez) + three_form_on(&dpsi, &f.column(x), &f.column(y), &fz));
            }
        }
    }
    let nab = BigConnection::canonical(gm);
    let mut direct = Residual::zero();
    direct.evaluated = points.len();
    for i in 0..m {
        for s in &frame.sections {
            direct = direct.merge(frame.membership(&nab.nabla(&unit(m, i), s), points));
        }
    }
    ParallelReport {
        lc: max_sweep(&lc, points),
        psi: max_sweep(&ps, points),
        direct,
    }
}

/// Single-chart compatible pair: D⁺ has vanishing Christoffels in the
/// coordinate frame and D⁻(F∂_i) = 0, so Γ⁻_i = −(∂_iF)F⁻¹.
pub fn chart_compatible_connection(gm: &GenMetric, f: &Mat) -> BigConnection {
    let m = gm.dim();
    let fi = isometry_inverse(gm, f);
    let dplus = AffineConnection::trivial(m);
    let chr = (0..m).map(|i| f.diff(i).mul(&fi).neg()).collect();
    let dminus = AffineConnection::from_christoffels(chr, crate::connections::Variant::Custom);
    BigConnection::from_pair(gm, dplus, dminus)
}

/// For E = graph ♯P: F_E = (Q⁺−Id)(Q⁻+Id)⁻¹ with Q± = ±♯γ♭_{ψ±γ}♯P♭γ.
pub fn graph_isometry_closed_form(gm: &GenMetric, p: &Mat) -> Mat {
    let m = gm.dim();
    let q = |s: Side| {
        gm.gamma_inv()
            .mul(&gm.pair.flat_pm(s))
            .mul(&p.transpose())
            .mul(&gm.pair.gamma)
            .scale(s.sign())
    };
    let id = Mat::identity(m);
    q(Side::Plus).sub(&id).mul(&q(Side::Minus).add(&id).inverse())
}

/// min over points of |det(Id − ♭_{ψ∓γ}♯P)|, both signs.
pub fn graph_invertibility(gm: &GenMetric, p: &Mat, points: &[Point]) -> f64 {
    let m = gm.dim();
    let dets: Vec<Expr> = [Side::Plus, Side::Minus]
        .iter()
        .map(|&s| Mat::identity(m).sub(&gm.pair.flat_pm(s).mul(&p.transpose())).det())
        .collect();
    let r = sweep(points, |pt| {
        let v = Evaluator::new(pt).eval_all(&dets)?;
        Ok(1.0 / v.iter().fold(f64::INFINITY, |a, b| a.min(b.abs())))
    });
    1.0 / r.max
}
