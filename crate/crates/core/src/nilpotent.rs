//! Generalized 2-nilpotent structures τ: the form ω_E on E = im τ, the
//! τ-brackets, integrability, compatibility with a generalized metric and
//! the Kähler-type test.
//!
//! Quotient classes of TM⊕T*M / E^{⊥g} are carried as their pairing vectors
//! ξ_a = g(𝒳, e_a) against the image frame, i.e. as sections of E*.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bigtangent::{courant_bracket, neutral_matrix, neutral_pairing, partial_of_function, BigOperator, Frame, FrameLabel, Section, RANK_THRESHOLD};
use crate::chartfield::linalg::{numeric_rank, unit};
use crate::chartfield::tensor::{gradient, lie_bracket};
use crate::chartfield::{EvalError, Evaluator, Expr, Mat, Point};
use crate::connections::{max_sweep, BigConnection};
use crate::dirac::{nijenhuis, psi_of_dirac, GenEndo};
use crate::genmetric::GenMetric;
use crate::sampling::{sweep, Residual};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NilpotentError {
    #[error("τ² ≠ 0 (residual {residual:e} at {witness:?})")]
    NotNilpotent { residual: f64, witness: Option<Point> },
    #[error("τ is not g-skew (residual {residual:e} at {witness:?})")]
    NotSkew { residual: f64, witness: Option<Point> },
    #[error("rank of τ is {found} at {point:?}, {expected} elsewhere")]
    RankJump { expected: usize, found: usize, point: Point },
    #[error("rank of τ is odd ({0})")]
    OddRank(usize),
    #[error("ω is degenerate at {0:?}")]
    Degenerate(Point),
    #[error("frame is not isotropic (residual {0:e})")]
    NotIsotropic(f64),
    #[error("E is not closed under brackets (residual {residual:e} at {witness:?})")]
    NotWeaklyIntegrable { residual: f64, witness: Option<Point> },
    #[error("rank {rank} differs from dim M = {dim}")]
    NotAlmostTangent { rank: usize, dim: usize },
    #[error("G and τ are not compatible (λ² + Id residual {0:e})")]
    NotCompatible(f64),
    #[error("no sample point could be evaluated")]
    NoPoints,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn vacuous(points: &[Point]) -> Residual {
    let mut r = Residual::zero();
    r.evaluated = points.len();
    r
}

fn merge_all(points: &[Point], rs: impl IntoIterator<Item = Residual>) -> Residual {
    rs.into_iter().fold(vacuous(points), Residual::merge)
}

fn stacked_sweep(secs: &[Section], points: &[Point]) -> Residual {
    let comps: Vec<Expr> = secs.iter().flat_map(Section::stacked).collect();
    if comps.is_empty() {
        return vacuous(points);
    }
    max_sweep(&comps, points)
}

fn probe(points: &[Point], f: impl Fn(&[f64]) -> Result<DMatrix<f64>, EvalError>) -> Result<DMatrix<f64>, NilpotentError> {
    points.iter().find_map(|p| f(p).ok()).ok_or(NilpotentError::NoPoints)
}

fn rank_at(a: &DMatrix<f64>, scale: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let floor = RANK_THRESHOLD * scale.max(1.0);
    a.clone().svd(false, false).singular_values.iter().filter(|s| **s > floor).count()
}

/// Indices of columns of `a` kept greedily while the rank grows. Singular
/// values are measured against `scale`, not against `a` itself.
fn greedy_columns(a: &DMatrix<f64>, scale: f64) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..a.ncols() {
        let mut idx = keep.clone();
        idx.push(j);
        if rank_at(&a.select_columns(&idx), scale) == idx.len() {
            keep = idx;
        }
    }
    keep
}

/// τ(X,α) = (U, ♭θU) with U = ♯µ(α − ♭θX) and ♯µ♭µ = −Id.
pub fn graph_two_form_tau(theta: &Mat, mu: &Mat) -> BigOperator {
    let sharp_mu = mu.transpose().inverse().neg();
    let flat_theta = theta.transpose();
    let u_x = sharp_mu.mul(&flat_theta).neg();
    BigOperator::from_matrix(Mat::from_blocks(&u_x, &sharp_mu, &flat_theta.mul(&u_x), &flat_theta.mul(&sharp_mu)))
}

/// τ(X,α) = (♯Pλ, λ) with λ = ♭W(X − ♯Pα) and ♭W♯W = −Id.
pub fn graph_bivector_tau(p: &Mat, w: &Mat) -> BigOperator {
    let sharp_p = p.transpose();
    let flat_w = w.transpose().inverse().neg();
    let l_a = flat_w.mul(&sharp_p).neg();
    BigOperator::from_matrix(Mat::from_blocks(&sharp_p.mul(&flat_w), &sharp_p.mul(&l_a), &flat_w, &l_a))
}

/// τ𝒳 = Σ_ab e_a (ω⁻¹)_ab g(e_b, 𝒳): the unique τ with image E and form ω.
pub fn tau_from_omega(frame: &Frame, omega: &Mat) -> BigOperator {
    let m = frame.dim();
    let e = frame.matrix();
    if frame.is_empty() {
        return BigOperator::zero(m);
    }
    BigOperator::from_matrix(e.mul(&omega.inverse()).mul(&e.transpose()).mul(&neutral_matrix(m)))
}

#[derive(Debug, Clone)]
pub struct TauStructure {
    pub op: BigOperator,
    /// e_a = τB_{j_a} for the pivot basis sections B_{j_a}.
    pub image_frame: Frame,
    pub kernel_frame: Frame,
    /// The B_{j_a}.
    pub preimages: Vec<Section>,
    /// ω_ab = ω(e_a, e_b).
    pub omega: Mat,
    /// Λ in the dual frame, (−ω)⁻¹.
    pub lambda_inv: Mat,
    omega_inv_t: Mat,
}

impl TauStructure {
    /// Extracts the frames and ω, rejecting non-nilpotent, non-skew or
    /// rank-jumping operators.
    pub fn build(op: BigOperator, points: &[Point], tol: f64) -> Result<TauStructure, NilpotentError> {
        let sq = op.square_residual(0.0, points);
        if !sq.passes(tol) {
            return Err(NilpotentError::NotNilpotent {
                residual: sq.max,
                witness: sq.witness,
            });
        }
        let sk = op.g_skew_residual(points);
        if !sk.passes(tol) {
            return Err(NilpotentError::NotSkew {
                residual: sk.max,
                witness: sk.witness,
            });
        }
        let m = op.dim();
        let at = probe(points, |p| op.eval(&mut Evaluator::new(p)))?;
        let scale = at.norm();
        let pivots = greedy_columns(&at, scale);
        let rank = pivots.len();
        for p in points {
            if let Ok(v) = op.eval(&mut Evaluator::new(p)) {
                let r = rank_at(&v, scale);
                if r != rank {
                    return Err(NilpotentError::RankJump {
                        expected: rank,
                        found: r,
                        point: p.clone(),
                    });
                }
            }
        }
        if rank % 2 == 1 {
            return Err(NilpotentError::OddRank(rank));
        }
        let preimages: Vec<Section> = pivots.iter().map(|&j| Section::basis(m, j)).collect();
        let image: Vec<Section> = preimages.iter().map(|b| op.apply(b)).collect();
        let image_frame = Frame::new(m, image, FrameLabel::E);
        let kernel_frame = Frame::new(m, kernel_sections(&image_frame, points)?, FrameLabel::Generic);
        let omega = Mat::from_fn(rank, rank, |a, b| neutral_pairing(&image_frame.sections[a], &preimages[b]));
        for p in points {
            if let Ok(w) = omega.eval(&mut Evaluator::new(p)) {
                if numeric_rank(&w, RANK_THRESHOLD) < rank {
                    return Err(NilpotentError::Degenerate(p.clone()));
                }
            }
        }
        let (lambda_inv, omega_inv_t) = if rank == 0 {
            (Mat::zeros(0, 0), Mat::zeros(0, 0))
        } else {
            let inv = omega.inverse();
            (inv.neg(), inv.transpose())
        };
        Ok(TauStructure {
            op,
            image_frame,
            kernel_frame,
            preimages,
            omega,
            lambda_inv,
            omega_inv_t,
        })
    }

    /// tau_from_omega followed by build, confirming ω is recovered.
    pub fn from_omega(frame: &Frame, omega: &Mat, points: &[Point], tol: f64) -> Result<(TauStructure, Residual), NilpotentError> {
        let iso = frame.isotropy(points);
        if !iso.passes(tol) {
            return Err(NilpotentError::NotIsotropic(iso.max));
        }
        for p in points {
            if let Ok(w) = omega.eval(&mut Evaluator::new(p)) {
                if numeric_rank(&w, RANK_THRESHOLD) < omega.rows() {
                    return Err(NilpotentError::Degenerate(p.clone()));
                }
            }
        }
        let t = TauStructure::build(tau_from_omega(frame, omega), points, tol)?;
        let mut comps = Vec::new();
        for (a, ea) in frame.sections.iter().enumerate() {
            for (b, eb) in frame.sections.iter().enumerate() {
                comps.push(t.omega_on(ea, eb) - omega.get(a, b));
            }
        }
        let r = if comps.is_empty() { vacuous(points) } else { max_sweep(&comps, points) };
        Ok((t, r))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn rank(&self) -> usize {
        self.image_frame.len()
    }

    pub fn apply(&self, s: &Section) -> Section {
        self.op.apply(s)
    }

    /// β with b = Σ β_c e_c, for b ∈ E.
    pub fn coefficients(&self, b: &Section) -> Vec<Expr> {
        let v: Vec<Expr> = self.preimages.iter().map(|p| neutral_pairing(b, p)).collect();
        self.omega_inv_t.mul_vec(&v)
    }

    /// A section 𝒳 with τ𝒳 = b, for b ∈ E.
    pub fn preimage(&self, b: &Section) -> Section {
        let beta = self.coefficients(b);
        Section::sum(self.dim(), self.preimages.iter().zip(&beta).map(|(p, c)| p.scale(c)))
    }

    /// ω(a, b) = g(a, 𝒳) with τ𝒳 = b.
    pub fn omega_on(&self, a: &Section, b: &Section) -> Expr {
        neutral_pairing(a, &self.preimage(b))
    }

    /// The class of 𝒳 in E*: ξ_a = g(𝒳, e_a).
    pub fn class_of(&self, x: &Section) -> Vec<Expr> {
        self.image_frame.sections.iter().map(|e| neutral_pairing(x, e)).collect()
    }

    /// A representative of the class ξ, built on the preimages.
    pub fn class_rep(&self, xi: &[Expr]) -> Section {
        let u = self.omega_inv_t.transpose().mul_vec(xi);
        Section::sum(self.dim(), self.preimages.iter().zip(&u).map(|(p, c)| p.scale(c)))
    }

    /// Named residuals of the defining identities.
    pub fn invariants(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let k = self.rank();
        let e = &self.image_frame.sections;
        let mut wd = Vec::new();
        let mut perp = Vec::new();
        for (a, ea) in e.iter().enumerate() {
            for (b, pb) in self.preimages.iter().enumerate() {
                for kk in &self.kernel_frame.sections {
                    wd.push(neutral_pairing(ea, &pb.add(kk)) - self.omega.get(a, b));
                }
            }
            for kk in &self.kernel_frame.sections {
                perp.push(neutral_pairing(ea, kk));
            }
        }
        let ker_tau: Vec<Section> = self.kernel_frame.sections.iter().map(|s| self.apply(s)).collect();
        let sharp_flat = self.omega.mul(&self.lambda_inv).add(&Mat::identity(k));
        let lambda_omega = self.omega.mul(&self.lambda_inv).mul(&self.omega.transpose()).sub(&self.omega);
        let skew = self.omega.add(&self.omega.transpose());
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        vec![
            ("tau_squared", self.op.square_residual(0.0, points)),
            ("g_skew", self.op.g_skew_residual(points)),
            ("isotropy", if k == 0 { vacuous(points) } else { self.image_frame.isotropy(points) }),
            ("kernel_is_perp", sweep_or(&perp)),
            ("kernel_annihilated", stacked_sweep(&ker_tau, points)),
            ("omega_well_defined", sweep_or(&wd)),
            ("omega_skew", sweep_or(skew.entries())),
            ("sharp_flat", sweep_or(sharp_flat.entries())),
            ("lambda_omega", sweep_or(lambda_omega.entries())),
        ]
    }

    /// N_τ(𝒳,𝒴) = [τ𝒳,τ𝒴] − τ[𝒳,τ𝒴] − τ[τ𝒳,𝒴].
    pub fn nijenhuis(&self, a: &Section, b: &Section) -> Section {
        nijenhuis(&self.op, a, b)
    }

    /// [𝒳,𝒴]_τ = [τ𝒳,𝒴] + [𝒳,τ𝒴].
    pub fn tau_bracket(&self, a: &Section, b: &Section) -> Section {
        courant_bracket(&self.apply(a), b).add(&courant_bracket(a, &self.apply(b)))
    }

    /// [𝒳,f𝒴]_τ − f[𝒳,𝒴]_τ − (τ𝒳)(f)𝒴 − 𝒳(f)τ𝒴.
    pub fn leibniz_defect(&self, a: &Section, b: &Section, f: &Expr) -> Section {
        let lhs = self.tau_bracket(a, &b.scale(f));
        let rhs = self
            .tau_bracket(a, b)
            .scale(f)
            .add(&b.scale(&self.apply(a).anchor_on(f)))
            .add(&self.apply(b).scale(&a.anchor_on(f)));
        lhs.sub(&rhs)
    }

    /// Both sides of the quasi-Jacobi identity of the τ-bracket, subtracted.
    pub fn jacobi_defect(&self, a: &Section, b: &Section, c: &Section) -> Section {
        let m = self.dim();
        let cyc = [(a, b, c), (b, c, a), (c, a, b)];
        let lhs = Section::sum(m, cyc.iter().map(|(x, y, z)| self.tau_bracket(&self.tau_bracket(x, y), z)));
        let brackets = Section::sum(m, cyc.iter().map(|(x, y, z)| courant_bracket(z, &self.nijenhuis(x, y))));
        let scalar = Expr::sum(cyc.iter().map(|(x, y, z)| neutral_pairing(z, &self.nijenhuis(x, y))));
        let rhs = brackets.add(&partial_of_function(&scalar, m).scale_f(1.0 / 3.0));
        lhs.sub(&rhs)
    }

    /// The induced τ-bracket of two classes, as an element of E*.
    pub fn induced_bracket(&self, a: &Section, b: &Section) -> Vec<Expr> {
        self.class_of(&self.tau_bracket(a, b))
    }

    /// τ'⁻¹[τ𝒳,τ𝒴] as an element of E*.
    pub fn quotient_bracket(&self, a: &Section, b: &Section) -> Vec<Expr> {
        self.class_of(&self.preimage(&courant_bracket(&self.apply(a), &self.apply(b))))
    }

    /// d_Eω(a,b,c) for a, b, c ∈ ΓE by the Lie algebroid formula.
    pub fn d_e_omega(&self, a: &Section, b: &Section, c: &Section) -> Expr {
        let w = |x: &Section, y: &Section| self.omega_on(x, y);
        a.anchor_on(&w(b, c)) - b.anchor_on(&w(a, c)) + c.anchor_on(&w(a, b)) - w(&courant_bracket(a, b), c)
            + w(&courant_bracket(a, c), b)
            - w(&courant_bracket(b, c), a)
    }

    /// d_Eω(τ𝒳,τ𝒴,τ𝒵) + g(𝒳, N_τ(𝒴,𝒵)).
    pub fn d_omega_identity(&self, x: &Section, y: &Section, z: &Section) -> Expr {
        let (tx, ty, tz) = (self.apply(x), self.apply(y), self.apply(z));
        self.d_e_omega(&tx, &ty, &tz) + neutral_pairing(x, &self.nijenhuis(y, z))
    }

    /// The six-term expression of d_Eω(τ𝒳,τ𝒴,τ𝒵) in g and brackets.
    pub fn d_omega_expanded(&self, x: &Section, y: &Section, z: &Section) -> Expr {
        let (tx, ty, tz) = (self.apply(x), self.apply(y), self.apply(z));
        let g = neutral_pairing;
        tx.anchor_on(&g(&ty, z)) - ty.anchor_on(&g(&tx, z)) + tz.anchor_on(&g(&tx, y)) - g(&courant_bracket(&tx, &ty), z)
            + g(&courant_bracket(&tx, &tz), y)
            - g(&courant_bracket(&ty, &tz), x)
    }

    /// {𝒳,𝒴}_Λ on the image frame, from Lie derivatives on E and d_E.
    pub fn gd_bracket(&self, x: &Section, y: &Section) -> Vec<Expr> {
        let (tx, ty) = (self.apply(x), self.apply(y));
        let lam = neutral_pairing(&tx, y);
        self.image_frame
            .sections
            .iter()
            .map(|e| {
                tx.anchor_on(&neutral_pairing(y, e)) - neutral_pairing(y, &courant_bracket(&tx, e)) - ty.anchor_on(&neutral_pairing(x, e))
                    + neutral_pairing(x, &courant_bracket(&ty, e))
                    - e.anchor_on(&lam)
            })
            .collect()
    }

    /// τ'⁻¹[♯Λ𝒳,♯Λ𝒴] − i(♯Λ𝒳∧♯Λ𝒴)d_Eω on the image frame.
    pub fn gd_closed_form(&self, x: &Section, y: &Section) -> Vec<Expr> {
        let (tx, ty) = (self.apply(x), self.apply(y));
        let q = self.quotient_bracket(x, y);
        self.image_frame
            .sections
            .iter()
            .zip(q)
            .map(|(e, qc)| qc - self.d_e_omega(&tx, &ty, e))
            .collect()
    }

    /// {f,h} = g(τ(0,df),(0,dh)).
    pub fn poisson_bracket(&self, f: &Expr, h: &Expr) -> Expr {
        let m = self.dim();
        neutral_pairing(&self.apply(&Section::covector(gradient(f, m))), &Section::covector(gradient(h, m)))
    }

    /// π with ♯π = the upper right block of τ.
    pub fn poisson_bivector(&self) -> Mat {
        self.op.blocks().1
    }

    pub fn integrability(&self, points: &[Point]) -> IntegrabilityReport {
        let m = self.dim();
        let n = 2 * m;
        let basis: Vec<Section> = (0..n).map(|j| Section::basis(m, j)).collect();
        let weak = crate::dirac::closure_residual(&self.image_frame, points);
        let mut nij = Vec::new();
        let mut tau_nij = Vec::new();
        let mut quotient = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let nt = self.nijenhuis(&basis[i], &basis[j]);
                tau_nij.push(self.apply(&nt));
                nij.push(nt);
                let ind = self.induced_bracket(&basis[i], &basis[j]);
                let quo = self.quotient_bracket(&basis[i], &basis[j]);
                quotient.extend(ind.into_iter().zip(quo).map(|(a, b)| a - b));
            }
        }
        let mut ident = Vec::new();
        let mut expanded = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let (x, y, z) = (&basis[i], &basis[j], &basis[k]);
                    ident.push(self.d_omega_identity(x, y, z));
                    expanded.push(self.d_omega_expanded(x, y, z) - self.d_e_omega(&self.apply(x), &self.apply(y), &self.apply(z)));
                }
            }
        }
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        let gd = self.gd_report(points);
        IntegrabilityReport {
            weak,
            full: stacked_sweep(&nij, points),
            tau_nijenhuis: if self.rank() == m { Some(stacked_sweep(&tau_nij, points)) } else { None },
            d_omega_identity: sweep_or(&ident),
            d_omega_expanded: sweep_or(&expanded),
            quotient_brackets: sweep_or(&quotient),
            gd_jacobi: gd.0,
            gd_anchor: gd.1,
            gd_closed_form: gd.2,
        }
    }

    /// Jacobiator and anchor defect of {,}_Λ on the classes of the preimages,
    /// plus agreement of the two expressions of the bracket.
    fn gd_report(&self, points: &[Point]) -> (Residual, Residual, Residual) {
        let k = self.rank();
        let b = &self.preimages;
        let mut jac = Vec::new();
        let mut anchor = Vec::new();
        let mut closed = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let br = self.gd_bracket(&b[i], &b[j]);
                let alt = self.gd_closed_form(&b[i], &b[j]);
                closed.extend(br.iter().zip(&alt).map(|(p, q)| p - q));
                let rep = self.class_rep(&br);
                let lhs = self.apply(&rep).vec;
                let rhs = lie_bracket(&self.apply(&b[i]).vec, &self.apply(&b[j]).vec);
                anchor.extend(lhs.iter().zip(&rhs).map(|(p, q)| p - q));
                for l in (j + 1)..k {
                    let cyc = [(i, j, l), (j, l, i), (l, i, j)];
                    let parts: Vec<Vec<Expr>> = cyc
                        .iter()
                        .map(|&(p, q, r)| {
                            let inner = self.class_rep(&self.gd_bracket(&b[p], &b[q]));
                            self.gd_bracket(&inner, &b[r])
                        })
                        .collect();
                    for c in 0..k {
                        jac.push(Expr::sum(parts.iter().map(|v| v[c].clone())));
                    }
                }
            }
        }
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        (sweep_or(&jac), sweep_or(&anchor), sweep_or(&closed))
    }
}

/// Frame of E^{⊥g}: solve EᵀH v = 0 on pivot columns, one vector per free column.
fn kernel_sections(image: &Frame, points: &[Point]) -> Result<Vec<Section>, NilpotentError> {
    let m = image.dim();
    let n = 2 * m;
    if image.is_empty() {
        return Ok((0..n).map(|j| Section::basis(m, j)).collect());
    }
    let a = image.matrix().transpose().mul(&neutral_matrix(m));
    let at = probe(points, |p| a.eval(&mut Evaluator::new(p)))?;
    let piv = greedy_columns(&at, at.norm());
    let k = piv.len();
    let ap = Mat::from_fn(k, k, |r, c| a.get(r, piv[c]).clone());
    let api = ap.inverse();
    let mut out = Vec::new();
    for f in (0..n).filter(|j| !piv.contains(j)) {
        let col = a.column(f);
        let sol = api.mul_vec(&col);
        let mut v = unit(n, f);
        for (r, &pj) in piv.iter().enumerate() {
            v[pj] = -sol[r].clone();
        }
        out.push(Section::from_stacked(&v));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    /// Distance of [e_a,e_b] from E.
    pub weak: Residual,
    /// max |N_τ| on basis pairs.
    pub full: Residual,
    /// max |τN_τ|, rank m only.
    pub tau_nijenhuis: Option<Residual>,
    /// d_Eω(τ𝒳,τ𝒴,τ𝒵) + g(𝒳,N_τ(𝒴,𝒵)).
    pub d_omega_identity: Residual,
    /// The six-term expansion against the algebroid formula.
    pub d_omega_expanded: Residual,
    /// Induced τ-bracket minus τ'⁻¹[τ𝒳,τ𝒴].
    pub quotient_brackets: Residual,
    pub gd_jacobi: Residual,
    pub gd_anchor: Residual,
    /// {,}_Λ against its closed form.
    pub gd_closed_form: Residual,
}

impl IntegrabilityReport {
    pub fn weakly_integrable(&self, tol: f64) -> bool {
        self.weak.passes(tol)
    }

    pub fn integrable(&self, tol: f64) -> bool {
        self.full.passes(tol)
    }
}

/// τ together with a generalized metric and the derived λ, S, Φ.
#[derive(Debug, Clone)]
pub struct MetricTau {
    pub tau: TauStructure,
    pub metric: GenMetric,
    /// φe_a.
    pub phi_frame: Frame,
    pub s_frame: Frame,
    /// G(e_a, e_b).
    pub gram: Mat,
    gram_inv: Mat,
}

impl MetricTau {
    /// Builds S as the G-orthogonal complement of E inside ker τ.
    pub fn new(tau: TauStructure, metric: GenMetric, points: &[Point]) -> Result<MetricTau, NilpotentError> {
        let m = tau.dim();
        let k = tau.rank();
        let e = tau.image_frame.sections.clone();
        let gram = Mat::from_fn(k, k, |a, b| metric.big_g(&e[a], &e[b]));
        let gram_inv = if k == 0 { Mat::zeros(0, 0) } else { gram.inverse() };
        let phi_frame = Frame::new(m, e.iter().map(|s| metric.phi.apply(s)).collect(), FrameLabel::EPrime);
        let proj: Vec<Section> = tau
            .kernel_frame
            .sections
            .iter()
            .map(|s| {
                let v: Vec<Expr> = e.iter().map(|ea| metric.big_g(ea, s)).collect();
                let c = gram_inv.mul_vec(&v);
                s.sub(&Section::sum(m, e.iter().zip(&c).map(|(ea, ca)| ea.scale(ca))))
            })
            .collect();
        let cand = Frame::new(m, proj, FrameLabel::S);
        let at = probe(points, |p| cand.eval(&mut Evaluator::new(p)))?;
        let keep = greedy_columns(&at, 1.0);
        let want = (2 * m).saturating_sub(2 * k);
        if keep.len() != want {
            return Err(NilpotentError::RankJump {
                expected: want,
                found: keep.len(),
                point: points[0].clone(),
            });
        }
        let s_frame = Frame::new(m, keep.iter().map(|&i| cand.sections[i].clone()).collect(), FrameLabel::S);
        Ok(MetricTau {
            tau,
            metric,
            phi_frame,
            s_frame,
            gram,
            gram_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.tau.dim()
    }

    /// λ̃ = τ∘φ.
    pub fn lambda_tilde(&self) -> BigOperator {
        self.tau.op.compose(&self.metric.phi)
    }

    /// λ̃′ = φ∘τ.
    pub fn lambda_tilde_prime(&self) -> BigOperator {
        self.metric.phi.compose(&self.tau.op)
    }

    /// Φ = τφ + φτ.
    pub fn big_phi(&self) -> BigOperator {
        self.lambda_tilde().add(&self.lambda_tilde_prime())
    }

    /// The six equivalent compatibility conditions, in order.
    pub fn conditions(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let m = self.dim();
        let t = self.tau.op.matrix();
        let phi = self.metric.phi.matrix();
        let h = neutral_matrix(m);
        let g = self.metric.g_matrix();
        let tpt = t.mul(phi).mul(t);
        let c1 = tpt.transpose().mul(&g).mul(&tpt).sub(&t.transpose().mul(&g).mul(t));
        let c2 = tpt.transpose().mul(&h).mul(&phi.mul(&tpt)).sub(&t.transpose().mul(&h).mul(&phi.mul(t)));
        let c3 = tpt.mul(phi).mul(t).add(t);
        let pt = phi.mul(t);
        let c4 = pt.mul(&pt).mul(&pt).add(&pt);
        let tp = t.mul(phi);
        let c5 = tp.mul(&tp).mul(&tp).add(&tp);
        let c6 = {
            let l = self.lambda_tilde_prime();
            let lm = l.matrix();
            lm.mul(lm).mul(lm).add(lm)
        };
        vec![
            ("G_isometry", max_sweep(c1.entries(), points)),
            ("omega_invariant", max_sweep(c2.entries(), points)),
            ("lambda_complex", max_sweep(c3.entries(), points)),
            ("lambda_prime_complex", max_sweep(c4.entries(), points)),
            ("lambda_tilde_cubic", max_sweep(c5.entries(), points)),
            ("lambda_tilde_prime_cubic", max_sweep(c6.entries(), points)),
        ]
    }

    /// G(τ𝒳,τ𝒴) − ω_E(τ𝒳,λτ𝒴), with ω_E(τ𝒳,τ𝒵) = g(τ𝒳,𝒵).
    pub fn hermit_residual(&self, points: &[Point]) -> Residual {
        let t = self.tau.op.matrix();
        let phi = self.metric.phi.matrix();
        let h = neutral_matrix(self.dim());
        let lhs = t.transpose().mul(&self.metric.g_matrix()).mul(t);
        let rhs = t.transpose().mul(&h).mul(&phi.mul(t));
        max_sweep(lhs.sub(&rhs).entries(), points)
    }

    /// Φ³ + Φ, g-skewness and G-skewness of Φ.
    pub fn f_structure(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let p = self.big_phi();
        let pm = p.matrix();
        let cube = pm.mul(pm).mul(pm).add(pm);
        let g = self.metric.g_matrix();
        let gskew = g.mul(pm).add(&pm.transpose().mul(&g));
        vec![
            ("phi_cubed", max_sweep(cube.entries(), points)),
            ("g_skew", p.g_skew_residual(points)),
            ("G_skew", max_sweep(gskew.entries(), points)),
        ]
    }

    /// TM⊕T*M = (E ⊕ φE) ⊕ S: spanning, G-orthogonality, φ-invariance of S
    /// and (E^{⊥G})^{⊥g} = φ(E).
    pub fn decomposition(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let m = self.dim();
        let e = &self.tau.image_frame.sections;
        let f = &self.phi_frame.sections;
        let s = &self.s_frame.sections;
        let mut all = e.clone();
        all.extend(f.iter().cloned());
        all.extend(s.iter().cloned());
        let total = Frame::new(m, all, FrameLabel::Generic);
        let spans = sweep(points, |p| {
            let v = total.eval(&mut Evaluator::new(p))?;
            Ok((2 * m - numeric_rank(&v, RANK_THRESHOLD)) as f64)
        });
        let gg = |a: &Section, b: &Section| self.metric.big_g(a, b);
        let mut orth = Vec::new();
        for a in e {
            orth.extend(f.iter().map(|b| gg(a, b)));
            orth.extend(s.iter().map(|b| gg(a, b)));
        }
        for a in f {
            orth.extend(s.iter().map(|b| gg(a, b)));
        }
        let s_inv = merge_all(points, s.iter().map(|x| self.s_frame.membership(&self.metric.phi.apply(x), points)));
        // E^{⊥G} = φ(E)^{⊥g}, whose g-orthogonal is φ(E): g(φe_a, ·) must vanish on it.
        let perp_g: Vec<Section> = self.tau.kernel_frame.sections.iter().map(|x| self.metric.phi.apply(x)).collect();
        let mut dual = Vec::new();
        for a in f {
            dual.extend(perp_g.iter().map(|b| neutral_pairing(a, b)));
        }
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        vec![
            ("spanning", spans),
            ("G_orthogonal", sweep_or(&orth)),
            ("S_phi_invariant", s_inv),
            ("perp_G_perp_g", sweep_or(&dual)),
        ]
    }

    /// Ψ_E = 2P_E − Id with P_E the G-orthogonal projector onto E.
    pub fn psi_e(&self) -> Result<BigOperator, NilpotentError> {
        let m = self.dim();
        if self.tau.rank() != m {
            return Err(NilpotentError::NotAlmostTangent {
                rank: self.tau.rank(),
                dim: m,
            });
        }
        let em = self.tau.image_frame.matrix();
        let proj = em.mul(&self.gram_inv).mul(&em.transpose()).mul(&self.metric.g_matrix());
        Ok(BigOperator::from_matrix(proj.scale(2.0).sub(&Mat::identity(2 * m))))
    }

    /// Round trips through (Φ,Ψ) and (E,Φ) in the almost tangent case.
    pub fn correspondences(&self, points: &[Point]) -> Result<Vec<(&'static str, Residual)>, NilpotentError> {
        let m = self.dim();
        let psi = self.psi_e()?;
        let id = BigOperator::identity(m);
        let phi_big = self.big_phi();
        let phi = &self.metric.phi;
        let t = &self.tau.op;
        let from_pair = phi_big.compose(&id.add(&psi)).compose(phi).scale(0.5);
        let from_e = phi_big.compose(phi).compose(&id.sub(&psi)).scale(0.5);
        let lt = self.lambda_tilde().sub(&self.lambda_tilde_prime());
        let d = |a: &BigOperator, b: &BigOperator| max_sweep(a.sub(b).matrix().entries(), points);
        let oracle = psi_of_dirac(&self.metric, &self.tau.image_frame, points).map_err(|_| NilpotentError::Degenerate(points[0].clone()))?;
        let invariant = merge_all(
            points,
            self.tau.image_frame.sections.iter().map(|s| self.tau.image_frame.membership(&phi_big.apply(s), points)),
        );
        let psi_g = GenEndo::new(psi.clone(), 1.0);
        let compat = psi_g.compat_residuals(&self.metric, points).into_iter().map(|(_, r)| r);
        let phi_g = GenEndo::new(phi_big.clone(), -1.0);
        let phi_compat = phi_g.compat_residuals(&self.metric, points).into_iter().map(|(_, r)| r);
        Ok(vec![
            ("tau_from_phi_psi", d(&from_pair, t)),
            ("tau_from_e_phi", d(&from_e, t)),
            ("phi_psi_commute", d(&phi_big.compose(&psi), &psi.compose(&phi_big))),
            ("phi_psi_product", d(&phi_big.compose(&psi), &lt)),
            ("psi_matches_isometry", d(&psi, &oracle.psi.op)),
            ("phi_square", phi_big.square_residual(-1.0, points)),
            ("psi_square", psi.square_residual(1.0, points)),
            ("phi_preserves_e", invariant),
            ("psi_G_compatible", merge_all(points, compat)),
            ("phi_G_compatible", merge_all(points, phi_compat)),
        ])
    }

    /// [Φ𝒳,φ𝒴] + [φ𝒳,Φ𝒴] + φΦ[Φ𝒳,Φ𝒴] measured against E on frame pairs.
    pub fn integr_phi_residual(&self, points: &[Point]) -> Residual {
        let phi_big = self.big_phi();
        let phi = &self.metric.phi;
        let e = &self.tau.image_frame;
        let n = e.len();
        let mut acc = vacuous(points);
        for i in 0..n {
            for j in (i + 1)..n {
                let (x, y) = (&e.sections[i], &e.sections[j]);
                let (px, py) = (phi_big.apply(x), phi_big.apply(y));
                let v = courant_bracket(&px, &phi.apply(y))
                    .add(&courant_bracket(&phi.apply(x), &py))
                    .add(&phi.apply(&phi_big.apply(&courant_bracket(&px, &py))));
                acc = acc.merge(e.membership(&v, points));
            }
        }
        acc
    }

    /// λ on E-sections: λ = τφ.
    pub fn lambda(&self, s: &Section) -> Section {
        self.tau.apply(&self.metric.phi.apply(s))
    }

    /// 2G(D^E_a b, c) by the Koszul formula of the Lie algebroid E.
    pub fn koszul2(&self, a: &Section, b: &Section, c: &Section) -> Expr {
        let g = |x: &Section, y: &Section| self.metric.big_g(x, y);
        a.anchor_on(&g(b, c)) + b.anchor_on(&g(a, c)) - c.anchor_on(&g(a, b)) + g(&courant_bracket(a, b), c)
            - g(&courant_bracket(a, c), b)
            - g(&courant_bracket(b, c), a)
    }

    /// D^E_a b as a section, expanded on the image frame.
    pub fn levi_civita_e(&self, a: &Section, b: &Section) -> Section {
        let e = &self.tau.image_frame.sections;
        let v: Vec<Expr> = e.iter().map(|ed| self.koszul2(a, b, ed).scale(0.5)).collect();
        let c = self.gram_inv.mul_vec(&v);
        Section::sum(self.dim(), e.iter().zip(&c).map(|(s, k)| s.scale(k)))
    }

    /// G((D^E_aλ)b, c).
    pub fn d_lambda(&self, a: &Section, b: &Section, c: &Section) -> Expr {
        let lhs = self.metric.big_g(&self.levi_civita_e(a, &self.lambda(b)), c);
        lhs - self.metric.big_g(&self.lambda(&self.levi_civita_e(a, b)), c)
    }

    /// E-Nijenhuis tensor of λ.
    pub fn e_nijenhuis(&self, a: &Section, b: &Section) -> Section {
        let (la, lb) = (self.lambda(a), self.lambda(b));
        courant_bracket(&la, &lb)
            .sub(&self.lambda(&courant_bracket(&la, b)))
            .sub(&self.lambda(&courant_bracket(a, &lb)))
            .add(&self.lambda(&self.lambda(&courant_bracket(a, b))))
    }

    /// G((D_Xλ)Y,Z) − ½[d_Eω(X,Y,Z) − d_Eω(X,λY,λZ) + KN_SIGN·G(N_λ(Y,Z),λX)].
    pub fn kobayashi_nomizu(&self, x: &Section, y: &Section, z: &Section) -> Expr {
        let (ly, lz, lx) = (self.lambda(y), self.lambda(z), self.lambda(x));
        let d1 = self.tau.d_e_omega(x, y, z);
        let d2 = self.tau.d_e_omega(x, &ly, &lz);
        let n = self.metric.big_g(&self.e_nijenhuis(y, z), &lx).scale(KN_SIGN);
        self.d_lambda(x, y, z) - (d1 - d2 + n).scale(0.5)
    }

    pub fn kahler_report(&self, points: &[Point]) -> KahlerReport {
        let e = &self.tau.image_frame.sections;
        let n = e.len();
        let mut dl = Vec::new();
        let mut nl = Vec::new();
        let mut kn = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    nl.extend(self.e_nijenhuis(&e[i], &e[j]).stacked());
                }
                for k in 0..n {
                    dl.push(self.d_lambda(&e[i], &e[j], &e[k]));
                    kn.push(self.kobayashi_nomizu(&e[i], &e[j], &e[k]));
                }
            }
        }
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        KahlerReport {
            d_lambda: sweep_or(&dl),
            n_lambda: sweep_or(&nl),
            kobayashi_nomizu: sweep_or(&kn),
        }
    }

    /// The recipe connection: ∇′ = ∇⁰ + Θ on E with ∇⁰e_a = 0 and
    /// ω(Θ(X,e),e′) = ½X(ω(e,e′)), the dual connection on φ(E) and
    /// ∇^S_i s = s·½k_S⁻¹∂_ik_S on S.
    pub fn recipe_connection(&self) -> BigConnection {
        let m = self.dim();
        let k = self.tau.rank();
        let e = self.tau.image_frame.matrix();
        let f = self.phi_frame.matrix();
        let s = self.s_frame.matrix();
        let ks = s.transpose().mul(&neutral_matrix(m)).mul(&s);
        let ks_inv = if ks.rows() == 0 { ks.clone() } else { ks.inverse() };
        let w = &self.tau.omega;
        let w_inv = if k == 0 { Mat::zeros(0, 0) } else { w.inverse() };
        let h = &self.gram;
        let cols: Vec<Vec<Expr>> = e.columns().into_iter().chain(f.columns()).chain(s.columns()).collect();
        let big_f = Mat::from_columns(&cols);
        let r = ks.rows();
        let n = 2 * m;
        // F⁻¹ = K⁻¹FᵀH with K = FᵀHF block anti-diagonal on E ⊕ φ(E).
        let k_inv = Mat::from_fn(n, n, |i, j| {
            if i < k && (k..2 * k).contains(&j) {
                self.gram_inv.get(i, j - k).clone()
            } else if (k..2 * k).contains(&i) && j < k {
                self.gram_inv.get(i - k, j).clone()
            } else if i >= 2 * k && j >= 2 * k {
                ks_inv.get(i - 2 * k, j - 2 * k).clone()
            } else {
                Expr::zero()
            }
        });
        let f_inv = k_inv.mul(&big_f.transpose()).mul(&neutral_matrix(m));
        let c = (0..m)
            .map(|i| {
                let theta = w_inv.mul(&w.diff(i)).scale(0.5);
                let b = self.gram_inv.mul(&h.diff(i).sub(&theta.transpose().mul(h)));
                let a = ks_inv.mul(&ks.diff(i)).scale(0.5);
                let omega = Mat::from_fn(n, n, |p, q| {
                    if p < k && q < k {
                        theta.get(p, q).clone()
                    } else if (k..2 * k).contains(&p) && (k..2 * k).contains(&q) {
                        b.get(p - k, q - k).clone()
                    } else if p >= 2 * k && q >= 2 * k && r > 0 {
                        a.get(p - 2 * k, q - 2 * k).clone()
                    } else {
                        Expr::zero()
                    }
                });
                big_f.mul(&omega).sub(&big_f.diff(i)).mul(&f_inv)
            })
            .collect();
        BigConnection::from_matrices(c)
    }

    /// Checks of a τ-commuting big connection against D^E.
    pub fn induced_connection_report(&self, nab: &BigConnection, points: &[Point]) -> InducedReport {
        let e = &self.tau.image_frame.sections;
        let n = e.len();
        let mut lc = Vec::new();
        let mut tor = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let nab_ab = nab.nabla(&e[a].vec, &e[b]);
                for d in 0..n {
                    lc.push(self.metric.big_g(&nab_ab, &e[d]) - self.koszul2(&e[a], &e[b], &e[d]).scale(0.5));
                }
                if a < b {
                    let t = nab_ab.sub(&nab.nabla(&e[b].vec, &e[a])).sub(&courant_bracket(&e[a], &e[b]));
                    tor.extend(t.stacked());
                }
            }
        }
        let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
        InducedReport {
            commutes: GenEndo::new(self.tau.op.clone(), 0.0).commutation_residual(nab, points),
            g_metric: nab.g_compat_residual(points),
            big_g_metric: nab.big_g_compat_residual(&self.metric, points),
            torsion: sweep_or(&tor),
            matches_levi_civita: sweep_or(&lc),
        }
    }
}

/// Sign of the N_λ term in the D^Eλ formula, fixed on the almost Kähler ℝ⁴
/// example where d_Eω = 0 and N_λ ≠ 0.
pub const KN_SIGN: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct KahlerReport {
    /// max |G((D^E_aλ)e_b, e_c)|.
    pub d_lambda: Residual,
    /// max |N_λ| on frame pairs.
    pub n_lambda: Residual,
    pub kobayashi_nomizu: Residual,
}

impl KahlerReport {
    pub fn kahler(&self, tol: f64) -> bool {
        self.d_lambda.passes(tol) && self.n_lambda.passes(tol)
    }
}

#[derive(Debug, Clone)]
pub struct InducedReport {
    pub commutes: Residual,
    pub g_metric: Residual,
    pub big_g_metric: Residual,
    /// Torsion of the induced E-connection on frame pairs.
    pub torsion: Residual,
    /// G(∇_{e_a}e_b, e_d) against the Koszul value.
    pub matches_levi_civita: Residual,
}

#[derive(Debug, Clone)]
pub struct TorsionConditions {
    /// ∇τ − τ∇.
    pub commutation: Residual,
    /// 𝒯∇ on kernel triples.
    pub kernel_triples: Residual,
    /// 𝒯∇(τ𝒳,τ𝒴,𝒵) + 𝒯∇(τ𝒳,𝒴,τ𝒵) + 𝒯∇(𝒳,τ𝒴,τ𝒵) on basis triples.
    pub three_term: Residual,
    /// g(N_τ(𝒳,𝒴),𝒵) plus the three-term sum.
    pub identity: Residual,
    pub nijenhuis: Residual,
}

impl TorsionConditions {
    pub fn passes(&self, tol: f64) -> bool {
        self.kernel_triples.passes(tol) && self.three_term.passes(tol)
    }
}

pub fn tau_torsion_conditions(tau: &TauStructure, nab: &BigConnection, points: &[Point]) -> TorsionConditions {
    let m = tau.dim();
    let n = 2 * m;
    let endo = GenEndo::new(tau.op.clone(), 0.0);
    let basis: Vec<Section> = (0..n).map(|j| Section::basis(m, j)).collect();
    let ker = &tau.kernel_frame.sections;
    let mut kt = Vec::new();
    for i in 0..ker.len() {
        for j in (i + 1)..ker.len() {
            for l in (j + 1)..ker.len() {
                kt.push(nab.gualtieri_torsion(&ker[i], &ker[j], &ker[l]));
            }
        }
    }
    let mut three = Vec::new();
    let mut ident = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for l in 0..n {
                let (x, y, z) = (&basis[i], &basis[j], &basis[l]);
                let s = endo.torsion_sum(nab, x, y, z);
                ident.push(endo.nijenhuis_torsion_identity(nab, x, y, z));
                three.push(s);
            }
        }
    }
    let nij: Vec<Section> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| tau.nijenhuis(&basis[i], &basis[j]))
        .collect();
    let sweep_or = |c: &[Expr]| if c.is_empty() { vacuous(points) } else { max_sweep(c, points) };
    TorsionConditions {
        commutation: endo.commutation_residual(nab, points),
        kernel_triples: sweep_or(&kt),
        three_term: sweep_or(&three),
        identity: sweep_or(&ident),
        nijenhuis: stacked_sweep(&nij, points),
    }
}

/// Closed-form d of a 2-form given by its full matrix, as a 3-form component
/// (dµ)_{ijk}; used to cross-check d_E under graph identifications.
pub fn d_two_form(mu: &Mat, i: usize, j: usize, k: usize) -> Expr {
    mu.get(j, k).diff(i) - mu.get(i, k).diff(j) + mu.get(i, j).diff(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartfield::Chart;
    use crate::sampling::sample_points;

    fn plane() -> (Chart, Vec<Point>) {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let p = sample_points(&c, 6, 3);
        (c, p)
    }

    fn area(a: f64) -> Mat {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 1, Expr::constant(a));
        m.set(1, 0, Expr::constant(-a));
        m
    }

    #[test]
    fn graph_two_form_tau_on_flat_plane() {
        let (_, pts) = plane();
        let op = graph_two_form_tau(&Mat::zeros(2, 2), &area(1.0));
        let t = TauStructure::build(op, &pts, 1e-9).unwrap();
        assert_eq!(t.rank(), 2);
        for (name, r) in t.invariants(&pts) {
            assert!(r.passes(1e-12), "{name} {}", r.max);
        }
        let e = &t.image_frame.sections;
        let w = t.omega_on(&e[0], &e[1]).eval(&pts[0]).unwrap();
        let x = Section::vector(unit(2, 0));
        let y = Section::vector(unit(2, 1));
        assert!((t.omega_on(&x, &y).eval(&pts[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(w.abs() == 1.0);
    }

    #[test]
    fn zero_operator_is_rank_zero() {
        let (_, pts) = plane();
        let t = TauStructure::build(BigOperator::zero(2), &pts, 1e-9).unwrap();
        assert_eq!(t.rank(), 0);
        assert_eq!(t.kernel_frame.len(), 4);
    }

    #[test]
    fn identity_is_rejected() {
        let (_, pts) = plane();
        assert!(matches!(
            TauStructure::build(BigOperator::identity(2), &pts, 1e-9),
            Err(NilpotentError::NotNilpotent { .. })
        ));
    }

    #[test]
    fn two_form_tau_has_rank_two() {
        let (_, pts) = plane();
        let mut m = Mat::zeros(4, 4);
        // (X,α) ↦ (0, X¹dx² − X²dx¹)
        m.set(3, 0, Expr::one());
        m.set(2, 1, Expr::constant(-1.0));
        let t = TauStructure::build(BigOperator::from_matrix(m), &pts, 1e-9).unwrap();
        assert_eq!(t.rank(), 2);
    }
}
