//! Generalized Riemannian metrics G ↔ (γ, ψ), the involution φ, the
//! eigenbundles V± and the transfer maps τ±.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bigtangent::{neutral_matrix_f64, neutral_pairing, BigOperator, Frame, FrameLabel, Section};
use crate::chartfield::tensor::exterior_derivative;
use crate::chartfield::{Evaluator, Expr, Kind, Mat, Point, TensorField};
use crate::sampling::{sweep, Residual};

/// G restricted to V± and transferred by τ± is this multiple of γ.
pub const TRANSFER_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenMetricError {
    #[error("γ is not symmetric at entry ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("ψ is not antisymmetric at entry ({0}, {1})")]
    NotAntisymmetric(usize, usize),
    #[error("γ is not positive definite at {0:?}")]
    NotPositive(Point),
    #[error("shape mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("section is not in V{side} (residual {residual:e} at {witness:?})")]
    NotInEigenbundle { side: char, residual: f64, witness: Option<Point> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    fn symbol(self) -> char {
        match self {
            Side::Plus => '+',
            Side::Minus => '-',
        }
    }
}

/// (γ, ψ) as full component matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPair {
    pub gamma: Mat,
    pub psi: Mat,
}

impl MetricPair {
    /// Checks symmetry of γ and antisymmetry of ψ structurally (equal or
    /// negated ASTs after a numeric probe at a fixed point).
    pub fn new(gamma: Mat, psi: Mat) -> Result<MetricPair, GenMetricError> {
        let m = gamma.rows();
        for (mat, _) in [(&gamma, 0), (&psi, 1)] {
            if mat.rows() != m || mat.cols() != m {
                return Err(GenMetricError::Shape {
                    expected: m,
                    rows: mat.rows(),
                    cols: mat.cols(),
                });
            }
        }
        let probe: Vec<f64> = (0..m).map(|i| 0.123 + 0.217 * i as f64).collect();
        let mut ev = Evaluator::new(&probe);
        for i in 0..m {
            for j in i..m {
                let close = |a: &Expr, b: &Expr, s: f64, ev: &mut Evaluator| match (ev.eval(a), ev.eval(b)) {
                    (Ok(x), Ok(y)) => (x - s * y).abs() <= 1e-12 * (1.0 + x.abs()),
                    _ => true,
                };
                if !close(gamma.get(i, j), gamma.get(j, i), 1.0, &mut ev) {
                    return Err(GenMetricError::NotSymmetric(i, j));
                }
                if !close(psi.get(i, j), psi.get(j, i), -1.0, &mut ev) {
                    return Err(GenMetricError::NotAntisymmetric(i, j));
                }
            }
        }
        Ok(MetricPair { gamma, psi })
    }

    pub fn from_fields(gamma: &TensorField, psi: &TensorField) -> Result<MetricPair, GenMetricError> {
        MetricPair::new(gamma.matrix(), psi.matrix())
    }

    pub fn flat(m: usize) -> MetricPair {
        MetricPair {
            gamma: Mat::identity(m),
            psi: Mat::zeros(m, m),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.rows()
    }

    pub fn psi_field(&self) -> TensorField {
        TensorField::from_matrix(Kind::TwoForm, &self.psi).expect("antisymmetric ψ")
    }

    pub fn dpsi(&self) -> TensorField {
        let m = self.dim();
        if m < 3 {
            return TensorField::zero(Kind::ThreeForm, m);
        }
        exterior_derivative(&self.psi_field()).expect("2-form")
    }

    /// Matrix of ♭_{ψ ± γ} acting on vector components.
    pub fn flat_pm(&self, side: Side) -> Mat {
        let g = self.gamma.scale(side.sign());
        self.psi.transpose().add(&g)
    }

    /// Cholesky of γ at every point.
    pub fn check_positive(&self, points: &[Point]) -> Result<(), GenMetricError> {
        for p in points {
            let g = match self.gamma.eval(&mut Evaluator::new(p)) {
                Ok(g) => g,
                Err(_) => continue,
            };
            if g.cholesky().is_none() {
                return Err(GenMetricError::NotPositive(p.clone()));
            }
        }
        Ok(())
    }
}

/// A generalized metric with its involution and eigenframes.
#[derive(Debug, Clone)]
pub struct GenMetric {
    pub pair: MetricPair,
    pub phi: BigOperator,
    pub vplus: Frame,
    pub vminus: Frame,
    gamma_inv: Mat,
}

impl GenMetric {
    /// With W = γ⁻¹(α − ♭ψX), φ(X, α) = (W, ♭ψW + ♭γX).
    pub fn new(pair: MetricPair) -> GenMetric {
        let m = pair.dim();
        let gi = pair.gamma.inverse();
        let psi_m = pair.psi.transpose();
        let g = &pair.gamma;
        let tl = gi.mul(&psi_m).neg();
        let bl = g.sub(&psi_m.mul(&gi).mul(&psi_m));
        let br = psi_m.mul(&gi);
        let phi = BigOperator::from_matrix(Mat::from_blocks(&tl, &gi, &bl, &br));
        let frame = |side: Side| {
            let f = pair.flat_pm(side);
            let secs = (0..m).map(|i| Section::new(crate::chartfield::linalg::unit(m, i), f.column(i))).collect();
            Frame::new(m, secs, if side == Side::Plus { FrameLabel::VPlus } else { FrameLabel::VMinus })
        };
        let vplus = frame(Side::Plus);
        let vminus = frame(Side::Minus);
        GenMetric {
            pair,
            phi,
            vplus,
            vminus,
            gamma_inv: gi,
        }
    }

    pub fn checked(pair: MetricPair, points: &[Point]) -> Result<GenMetric, GenMetricError> {
        pair.check_positive(points)?;
        Ok(GenMetric::new(pair))
    }

    pub fn dim(&self) -> usize {
        self.pair.dim()
    }

    pub fn gamma_inv(&self) -> &Mat {
        &self.gamma_inv
    }

    /// Matrix of G on stacked components: φᵀH.
    pub fn g_matrix(&self) -> Mat {
        let m = self.dim();
        self.phi.matrix().transpose().mul(&crate::bigtangent::neutral_matrix(m))
    }

    pub fn big_g(&self, a: &Section, b: &Section) -> Expr {
        neutral_pairing(&self.phi.apply(a), b)
    }

    pub fn frame(&self, side: Side) -> &Frame {
        match side {
            Side::Plus => &self.vplus,
            Side::Minus => &self.vminus,
        }
    }

    /// (X, ♭_{ψ±γ}X).
    pub fn lift(&self, x: &[Expr], side: Side) -> Section {
        Section::new(x.to_vec(), self.pair.flat_pm(side).mul_vec(x))
    }

    /// m×2m matrix sending a section to the vector part of its V± component,
    /// ½(X ± γ⁻¹(α − ♭ψX)).
    pub fn transfer_matrix(&self, side: Side) -> Mat {
        let m = self.dim();
        let s = side.sign();
        let w_x = self.gamma_inv.mul(&self.pair.psi.transpose()).neg();
        let left = Mat::identity(m).add(&w_x.scale(s)).scale(0.5);
        let right = self.gamma_inv.scale(0.5 * s);
        Mat::from_fn(m, 2 * m, |i, j| if j < m { left.get(i, j).clone() } else { right.get(i, j - m).clone() })
    }

    /// 2m×m embedding X ↦ (X, ♭_{ψ±γ}X).
    pub fn embedding(&self, side: Side) -> Mat {
        let m = self.dim();
        Mat::from_blocks(&Mat::identity(m), &Mat::zeros(m, 0), &self.pair.flat_pm(side), &Mat::zeros(m, 0))
    }

    /// Vector part of the V± component of an arbitrary section.
    pub fn transfer_component(&self, s: &Section, side: Side) -> Vec<Expr> {
        self.transfer_matrix(side).mul_vec(&s.stacked())
    }

    /// τ±: recovers X from (X, ♭_{ψ±γ}X), refusing sections outside V±.
    pub fn tau_pm(&self, s: &Section, side: Side, points: &[Point], tol: f64) -> Result<Vec<Expr>, GenMetricError> {
        let r = self.frame(side).membership(s, points);
        if !r.passes(tol) {
            return Err(GenMetricError::NotInEigenbundle {
                side: side.symbol(),
                residual: r.max,
                witness: r.witness,
            });
        }
        Ok(s.vec.clone())
    }

    /// (½(Id+φ)𝒳, ½(Id−φ)𝒳).
    pub fn project_pm(&self, s: &Section) -> (Section, Section) {
        let ps = self.phi.apply(s);
        (s.add(&ps).scale_f(0.5), s.sub(&ps).scale_f(0.5))
    }

    /// Named residuals of the defining identities.
    pub fn invariants(&self, points: &[Point]) -> Vec<(&'static str, Residual)> {
        let m = self.dim();
        let h = neutral_matrix_f64(m);
        let id = DMatrix::<f64>::identity(2 * m, 2 * m);
        let phi = &self.phi;
        let ev_phi = |p: &[f64]| phi.eval(&mut Evaluator::new(p));
        let square = sweep(points, |p| {
            let f = ev_phi(p)?;
            Ok((&f * &f - &id).abs().max())
        });
        let isometry = sweep(points, |p| {
            let f = ev_phi(p)?;
            Ok((f.transpose() * &h * &f - &h).abs().max())
        });
        let positive = sweep(points, |p| {
            let g = ev_phi(p)?.transpose() * &h;
            let sym = (&g - g.transpose()).abs().max();
            let low = g.symmetric_eigenvalues().min();
            Ok(sym + if low > 0.0 { 0.0 } else { 1.0 - low })
        });
        let eigen = sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let f = phi.eval(&mut ev)?;
            let vp = self.vplus.eval(&mut ev)?;
            let vm = self.vminus.eval(&mut ev)?;
            Ok((&f * &vp - &vp).abs().max().max((&f * &vm + &vm).abs().max()))
        });
        let orth = sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let f = phi.eval(&mut ev)?;
            let vp = self.vplus.eval(&mut ev)?;
            let vm = self.vminus.eval(&mut ev)?;
            let g_orth = (vp.transpose() * &h * &vm).abs().max();
            let big_orth = (vp.transpose() * f.transpose() * &h * &vm).abs().max();
            Ok(g_orth.max(big_orth))
        });
        let transfer = sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let f = phi.eval(&mut ev)?;
            let g = self.pair.gamma.eval(&mut ev)?;
            let mut worst: f64 = 0.0;
            for (fr, s) in [(&self.vplus, 1.0), (&self.vminus, -1.0)] {
                let v = fr.eval(&mut ev)?;
                let big = v.transpose() * f.transpose() * &h * &v;
                let small = v.transpose() * &h * &v * s;
                worst = worst
                    .max((&big - &g * TRANSFER_FACTOR).abs().max())
                    .max((&big - small).abs().max());
            }
            Ok(worst)
        });
        vec![
            ("phi_squared", square),
            ("phi_g_isometry", isometry),
            ("G_positive", positive),
            ("eigenframes", eigen),
            ("V_orthogonal", orth),
            ("transfer_factor", transfer),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartfield::Chart;
    use crate::sampling::sample_points;

    fn pair(c: &Chart, g: [&str; 4], psi01: &str) -> MetricPair {
        let gm = Mat::from_fn(2, 2, |i, j| c.parse(g[2 * i + j]).unwrap());
        let p = c.parse(psi01).unwrap();
        let pm = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => p.clone(),
            (1, 0) => -&p,
            _ => Expr::zero(),
        });
        MetricPair::new(gm, pm).unwrap()
    }

    #[test]
    fn flat_phi_swaps() {
        let gm = GenMetric::new(MetricPair::flat(2));
        let out = gm.phi.apply(&Section::basis(2, 0));
        assert_eq!(out.form[0].as_const(), Some(1.0));
        assert!(out.vec.iter().all(Expr::is_zero));
        assert_eq!(gm.big_g(&Section::basis(2, 0), &Section::basis(2, 0)).as_const(), Some(1.0));
    }

    #[test]
    fn invariants_on_curved_data() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let gm = GenMetric::new(pair(&c, ["1", "0", "0", "1+x^2"], "-x"));
        let pts = sample_points(&c, 20, 1);
        for (name, r) in gm.invariants(&pts) {
            assert!(r.passes(1e-9), "{name}: {}", r.max);
        }
    }

    #[test]
    fn projections_of_flat_dx() {
        let gm = GenMetric::new(MetricPair::flat(2));
        let (p, q) = gm.project_pm(&Section::basis(2, 0));
        assert_eq!(p.vec[0].as_const(), Some(0.5));
        assert_eq!(p.form[0].as_const(), Some(0.5));
        assert_eq!(q.form[0].as_const(), Some(-0.5));
    }

    #[test]
    fn tau_rejects_wrong_side() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let gm = GenMetric::new(pair(&c, ["1", "0", "0", "1"], "x"));
        let pts = sample_points(&c, 5, 2);
        let x = vec![Expr::zero(), c.parse("x").unwrap()];
        let minus = gm.lift(&x, Side::Minus);
        assert_eq!(gm.tau_pm(&minus, Side::Minus, &pts, 1e-9).unwrap(), x);
        assert!(gm.tau_pm(&minus, Side::Plus, &pts, 1e-9).is_err());
    }

    #[test]
    fn rejects_indefinite_gamma() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let p = pair(&c, ["1", "0", "0", "x"], "0");
        assert!(matches!(p.check_positive(&sample_points(&c, 5, 0)), Err(GenMetricError::NotPositive(_))));
    }
}
