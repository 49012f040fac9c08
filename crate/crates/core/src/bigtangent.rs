//! The big tangent bundle TM⊕T*M: sections, the neutral metric, the
//! (twisted) Courant bracket, block operators and frames.
//!
//! Sections stack as `(X^1..X^m, α_1..α_m)`. The neutral metric is
//! g((X,α),(Y,µ)) = α(Y) + µ(X) with no factor ½, so its matrix is
//! `[[0, I], [I, 0]]`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::chartfield::linalg::{self, dot, numeric_rank, span_residual, vec_add, vec_scale, vec_scale_f, vec_sub, zeros};
use crate::chartfield::tensor::{d_one_form, exterior_derivative, gradient, lie_bracket, lie_derivative_one_form};
use crate::chartfield::{EvalError, Evaluator, Expr, Kind, Mat, Point, TensorField};
use crate::sampling::{sweep, Residual};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BigTangentError {
    #[error("sections live on charts of dimension {0} and {1}")]
    ChartMismatch(usize, usize),
    #[error("twist is not a closed 3-form: |dΘ| = {residual:e} at {witness:?}")]
    TwistNotClosed { residual: f64, witness: Option<Point> },
    #[error("twist must be a 3-form, got {0:?}")]
    TwistKind(Kind),
    #[error("frame rank {found} at {point:?}, expected {expected}")]
    Rank { expected: usize, found: usize, point: Point },
    #[error("operator shape {got} does not match dimension {dim}")]
    Shape { dim: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub vec: Vec<Expr>,
    pub form: Vec<Expr>,
}

impl Section {
    pub fn new(vec: Vec<Expr>, form: Vec<Expr>) -> Section {
        assert_eq!(vec.len(), form.len(), "vector and form parts on one chart");
        Section { vec, form }
    }

    pub fn zero(m: usize) -> Section {
        Section::new(zeros(m), zeros(m))
    }

    pub fn vector(vec: Vec<Expr>) -> Section {
        let m = vec.len();
        Section::new(vec, zeros(m))
    }

    pub fn covector(form: Vec<Expr>) -> Section {
        let m = form.len();
        Section::new(zeros(m), form)
    }

    /// The `j`-th constant frame section: `∂_j` for `j < m`, `dx^{j-m}` after.
    pub fn basis(m: usize, j: usize) -> Section {
        Section::from_stacked(&linalg::unit(2 * m, j))
    }

    pub fn from_stacked(v: &[Expr]) -> Section {
        let m = v.len() / 2;
        Section::new(v[..m].to_vec(), v[m..].to_vec())
    }

    pub fn stacked(&self) -> Vec<Expr> {
        let mut v = self.vec.clone();
        v.extend(self.form.iter().cloned());
        v
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn add(&self, o: &Section) -> Section {
        Section::new(vec_add(&self.vec, &o.vec), vec_add(&self.form, &o.form))
    }

    pub fn sub(&self, o: &Section) -> Section {
        Section::new(vec_sub(&self.vec, &o.vec), vec_sub(&self.form, &o.form))
    }

    pub fn scale(&self, f: &Expr) -> Section {
        Section::new(vec_scale(&self.vec, f), vec_scale(&self.form, f))
    }

    pub fn scale_f(&self, c: f64) -> Section {
        Section::new(vec_scale_f(&self.vec, c), vec_scale_f(&self.form, c))
    }

    pub fn neg(&self) -> Section {
        self.scale_f(-1.0)
    }

    /// Component-wise partial derivative.
    pub fn diff(&self, i: usize) -> Section {
        Section::from_stacked(&Expr::diff_many(&self.stacked(), i))
    }

    /// pr_TM𝒳 applied to f.
    pub fn anchor_on(&self, f: &Expr) -> Expr {
        crate::chartfield::tensor::directional(&self.vec, f)
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<DVector<f64>, EvalError> {
        Ok(DVector::from_vec(ev.eval_all(&self.stacked())?))
    }

    pub fn sum(m: usize, parts: impl IntoIterator<Item = Section>) -> Section {
        let parts: Vec<Section> = parts.into_iter().collect();
        let n = 2 * m;
        let comps: Vec<Expr> = (0..n)
            .map(|k| {
                Expr::sum(parts.iter().map(|p| {
                    if k < m {
                        p.vec[k].clone()
                    } else {
                        p.form[k - m].clone()
                    }
                }))
            })
            .collect();
        Section::from_stacked(&comps)
    }
}

/// g(𝒳,𝒴) = α(Y) + µ(X).
pub fn neutral_pairing(a: &Section, b: &Section) -> Expr {
    dot(a.form.iter(), b.vec.iter()) + dot(b.form.iter(), a.vec.iter())
}

pub fn checked_pairing(a: &Section, b: &Section) -> Result<Expr, BigTangentError> {
    if a.dim() != b.dim() {
        return Err(BigTangentError::ChartMismatch(a.dim(), b.dim()));
    }
    Ok(neutral_pairing(a, b))
}

/// Matrix of the neutral metric on stacked components.
pub fn neutral_matrix(m: usize) -> Mat {
    let i = Mat::identity(m);
    let z = Mat::zeros(m, m);
    Mat::from_blocks(&z, &i, &i, &z)
}

pub fn neutral_matrix_f64(m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        h[(i, m + i)] = 1.0;
        h[(m + i, i)] = 1.0;
    }
    h
}

/// ([X,Y], L_Xµ − L_Yα + ½d(α(Y) − µ(X))).
pub fn courant_bracket(a: &Section, b: &Section) -> Section {
    let m = a.dim();
    let v = lie_bracket(&a.vec, &b.vec);
    let lx = lie_derivative_one_form(&a.vec, &b.form);
    let ly = lie_derivative_one_form(&b.vec, &a.form);
    let pairing = dot(a.form.iter(), b.vec.iter()) - dot(b.form.iter(), a.vec.iter());
    let dp = gradient(&pairing, m);
    let form = (0..m).map(|j| &lx[j] - &ly[j] + dp[j].scale(0.5)).collect();
    Section::new(v, form)
}

/// The Courant bracket with the extra form term −½ i(Y)i(X)Θ.
pub fn twisted_courant_bracket(a: &Section, b: &Section, theta: &TensorField) -> Result<Section, BigTangentError> {
    if theta.kind() != Kind::ThreeForm {
        return Err(BigTangentError::TwistKind(theta.kind()));
    }
    if a.dim() != b.dim() || a.dim() != theta.dim() {
        return Err(BigTangentError::ChartMismatch(a.dim(), b.dim().max(theta.dim())));
    }
    let plain = courant_bracket(a, b);
    let m = a.dim();
    let extra: Vec<Expr> = (0..m)
        .map(|l| {
            let mut terms = Vec::new();
            for i in 0..m {
                for j in 0..m {
                    if i != j && j != l && i != l && !a.vec[i].is_zero() && !b.vec[j].is_zero() {
                        terms.push(&a.vec[i] * &b.vec[j] * theta.component(&[i, j, l]));
                    }
                }
            }
            Expr::sum(terms).scale(-0.5)
        })
        .collect();
    Ok(Section::new(plain.vec, vec_add(&plain.form, &extra)))
}

/// Largest |dΘ| component over the points; twisting needs this to vanish.
pub fn twist_closedness(theta: &TensorField, points: &[Point]) -> Result<Residual, BigTangentError> {
    if theta.kind() != Kind::ThreeForm {
        return Err(BigTangentError::TwistKind(theta.kind()));
    }
    if theta.dim() < 4 {
        let mut r = Residual::zero();
        r.evaluated = points.len();
        return Ok(r);
    }
    let d = exterior_derivative(theta).expect("3-form in dimension ≥ 4");
    Ok(sweep(points, |p| {
        let mut ev = Evaluator::new(p);
        Ok(ev.eval_all(d.compressed())?.into_iter().fold(0.0, |a, v| a.max(v.abs())))
    }))
}

/// ∂f = (0, ½df), so that pr_TM𝒳(f) = 2g(𝒳, ∂f).
pub fn partial_of_function(f: &Expr, m: usize) -> Section {
    Section::covector(vec_scale_f(&gradient(f, m), 0.5))
}

/// The ½d-free part of the bracket, L_Xµ − i(Y)dα; used by the Leibniz
/// identities in tests.
pub fn dorfman(a: &Section, b: &Section) -> Section {
    let m = a.dim();
    let lx = lie_derivative_one_form(&a.vec, &b.form);
    let da = d_one_form(&a.form);
    let iy: Vec<Expr> = (0..m)
        .map(|j| dot(b.vec.iter(), (0..m).map(|i| da.get(i, j)).collect::<Vec<_>>().into_iter()))
        .collect();
    Section::new(lie_bracket(&a.vec, &b.vec), vec_sub(&lx, &iy))
}

/// An endomorphism of the big tangent bundle as a 2m×2m matrix in the block
/// layout `[[A, ♯π], [♭σ, D]]` with ♯π α = π(α,·) and ♭σ X = σ(X,·).
#[derive(Debug, Clone, PartialEq)]
pub struct BigOperator {
    mat: Mat,
}

impl BigOperator {
    pub fn from_matrix(mat: Mat) -> BigOperator {
        assert!(mat.is_square() && mat.rows() % 2 == 0, "2m×2m operator");
        BigOperator { mat }
    }

    pub fn identity(m: usize) -> BigOperator {
        BigOperator::from_matrix(Mat::identity(2 * m))
    }

    pub fn zero(m: usize) -> BigOperator {
        BigOperator::from_matrix(Mat::zeros(2 * m, 2 * m))
    }

    /// Assembles from classical tensors: `a` is `A^i_j`, `pi` and `sigma`
    /// are the full antisymmetric component matrices, `d` acts on forms.
    pub fn from_blocks(a: &Mat, pi: &Mat, sigma: &Mat, d: &Mat) -> BigOperator {
        BigOperator::from_matrix(Mat::from_blocks(a, &pi.transpose(), &sigma.transpose(), d))
    }

    /// The structured form with D = −ᵗA.
    pub fn from_classical(a: &Mat, pi: &Mat, sigma: &Mat) -> BigOperator {
        BigOperator::from_blocks(a, pi, sigma, &a.transpose().neg())
    }

    pub fn dim(&self) -> usize {
        self.mat.rows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    /// `(A, π, σ, D)`.
    pub fn blocks(&self) -> (Mat, Mat, Mat, Mat) {
        let m = self.dim();
        (
            self.mat.block(0, 0, m, m),
            self.mat.block(0, m, m, m).transpose(),
            self.mat.block(m, 0, m, m).transpose(),
            self.mat.block(m, m, m, m),
        )
    }

    pub fn apply(&self, s: &Section) -> Section {
        Section::from_stacked(&self.mat.mul_vec(&s.stacked()))
    }

    pub fn checked_apply(&self, s: &Section) -> Result<Section, BigTangentError> {
        if s.dim() != self.dim() {
            return Err(BigTangentError::Shape {
                dim: s.dim(),
                got: self.dim(),
            });
        }
        Ok(self.apply(s))
    }

    /// `self ∘ o`.
    pub fn compose(&self, o: &BigOperator) -> BigOperator {
        BigOperator::from_matrix(self.mat.mul(&o.mat))
    }

    pub fn add(&self, o: &BigOperator) -> BigOperator {
        BigOperator::from_matrix(self.mat.add(&o.mat))
    }

    pub fn sub(&self, o: &BigOperator) -> BigOperator {
        BigOperator::from_matrix(self.mat.sub(&o.mat))
    }

    pub fn scale(&self, c: f64) -> BigOperator {
        BigOperator::from_matrix(self.mat.scale(c))
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<DMatrix<f64>, EvalError> {
        self.mat.eval(ev)
    }

    /// max |HΦ + ΦᵀH| over the points.
    pub fn g_skew_residual(&self, points: &[Point]) -> Residual {
        let m = self.dim();
        let h = neutral_matrix_f64(m);
        sweep(points, |p| {
            let a = self.eval(&mut Evaluator::new(p))?;
            Ok((&h * &a + a.transpose() * &h).abs().max())
        })
    }

    /// max |Φ² − εId| over the points.
    pub fn square_residual(&self, epsilon: f64, points: &[Point]) -> Residual {
        let n = 2 * self.dim();
        sweep(points, |p| {
            let a = self.eval(&mut Evaluator::new(p))?;
            Ok((&a * &a - DMatrix::identity(n, n) * epsilon).abs().max())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    E,
    EPrime,
    VPlus,
    VMinus,
    S,
    Generic,
}

/// An ordered spanning list of sections for a subbundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub sections: Vec<Section>,
    pub label: FrameLabel,
    dim: usize,
}

pub const RANK_THRESHOLD: f64 = 1e-9;

impl Frame {
    pub fn new(dim: usize, sections: Vec<Section>, label: FrameLabel) -> Frame {
        assert!(sections.iter().all(|s| s.dim() == dim));
        Frame { sections, label, dim }
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 2m×k matrix of stacked sections.
    pub fn matrix(&self) -> Mat {
        let cols: Vec<Vec<Expr>> = self.sections.iter().map(Section::stacked).collect();
        if cols.is_empty() {
            return Mat::zeros(2 * self.dim, 0);
        }
        Mat::from_columns(&cols)
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<DMatrix<f64>, EvalError> {
        let mut out = DMatrix::zeros(2 * self.dim, self.len());
        for (j, s) in self.sections.iter().enumerate() {
            out.set_column(j, &s.eval(ev)?);
        }
        Ok(out)
    }

    /// Confirms rank `len()` at every point.
    pub fn check_rank(&self, points: &[Point]) -> Result<(), BigTangentError> {
        for p in points {
            let m = match self.eval(&mut Evaluator::new(p)) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let r = numeric_rank(&m, RANK_THRESHOLD);
            if r != self.len() {
                return Err(BigTangentError::Rank {
                    expected: self.len(),
                    found: r,
                    point: p.clone(),
                });
            }
        }
        Ok(())
    }

    /// Distance of `s` from the span of the frame, maximised over points.
    pub fn membership(&self, s: &Section, points: &[Point]) -> Residual {
        sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let b = self.eval(&mut ev)?;
            Ok(span_residual(&b, &s.eval(&mut ev)?))
        })
    }

    /// max |g(e_i, e_j)|.
    pub fn isotropy(&self, points: &[Point]) -> Residual {
        let h = neutral_matrix_f64(self.dim);
        sweep(points, |p| {
            let b = self.eval(&mut Evaluator::new(p))?;
            Ok((b.transpose() * &h * &b).abs().max())
        })
    }

    /// Largest distance of either frame from the other's span.
    pub fn span_distance(&self, o: &Frame, points: &[Point]) -> Residual {
        sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let a = self.eval(&mut ev)?;
            let b = o.eval(&mut ev)?;
            Ok(linalg::span_residual_all(&a, &b).max(linalg::span_residual_all(&b, &a)))
        })
    }
}

/// A trilinear form on sections, checked for C∞-linearity slot by slot.
pub type Trilinear<'a> = dyn Fn(&Section, &Section, &Section) -> Expr + Sync + 'a;

/// Per slot, max over f ∈ {x¹, sin x¹} of |T(…, f𝒳, …) − f T(…, 𝒳, …)|.
pub fn tensoriality_check(t: &Trilinear, args: [&Section; 3], points: &[Point]) -> [Residual; 3] {
    let x1 = Expr::var(0);
    let fs = [x1.clone(), x1.sin()];
    let base = t(args[0], args[1], args[2]);
    let mut out = [Residual::zero(), Residual::zero(), Residual::zero()];
    for (slot, o) in out.iter_mut().enumerate() {
        let mut acc: Option<Residual> = None;
        for f in &fs {
            let mut a = [args[0].clone(), args[1].clone(), args[2].clone()];
            a[slot] = a[slot].scale(f);
            let r = t(&a[0], &a[1], &a[2]) - f * &base;
            let res = sweep(points, |p| r.eval(p));
            acc = Some(match acc {
                None => res,
                Some(prev) => prev.merge(res),
            });
        }
        *o = acc.unwrap();
    }
    out
}
