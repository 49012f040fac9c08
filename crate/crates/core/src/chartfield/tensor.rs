//! Tensor fields on a chart and the coordinate formulas of classical
//! calculus: d, interior products, Lie brackets and derivatives, musical
//! maps, and the Schouten bracket of bivectors.
//!
//! Vector fields and 1-forms are passed around as plain component slices;
//! [`TensorField`] is the storage type for everything with more indices.

use thiserror::Error;

use super::expr::Expr;
use super::linalg::{dot, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Scalar,
    Vector,
    OneForm,
    TwoForm,
    SymTwoTensor,
    Bivector,
    ThreeForm,
    Trivector,
    Endo,
}

impl Kind {
    /// Form degree, for covariant antisymmetric kinds.
    pub fn form_degree(self) -> Option<usize> {
        match self {
            Kind::Scalar => Some(0),
            Kind::OneForm => Some(1),
            Kind::TwoForm => Some(2),
            Kind::ThreeForm => Some(3),
            _ => None,
        }
    }

    fn form_of_degree(k: usize) -> Option<Kind> {
        match k {
            0 => Some(Kind::Scalar),
            1 => Some(Kind::OneForm),
            2 => Some(Kind::TwoForm),
            3 => Some(Kind::ThreeForm),
            _ => None,
        }
    }

    fn antisym_rank(self) -> Option<usize> {
        match self {
            Kind::Bivector => Some(2),
            Kind::Trivector => Some(3),
            Kind::Vector => Some(1),
            _ => self.form_degree(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{0:?} is not a differential form")]
    NotAForm(Kind),
    #[error("degree {degree} form does not fit in dimension {dim}")]
    Degree { degree: usize, dim: usize },
    #[error("expected {expected} components for {kind:?}, got {got}")]
    Shape { kind: Kind, expected: usize, got: usize },
    #[error("{kind:?} does not support {op}")]
    Unsupported { kind: Kind, op: &'static str },
}

/// Increasing `k`-tuples of `0..m` in lexicographic order.
pub fn combos(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Sorts an index tuple, returning the permutation sign, or `None` when an
/// index repeats.
fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    kind: Kind,
    dim: usize,
    comps: Vec<Expr>,
}

impl TensorField {
    pub fn storage_len(kind: Kind, m: usize) -> usize {
        match kind {
            Kind::Scalar => 1,
            Kind::Vector | Kind::OneForm => m,
            Kind::SymTwoTensor => m * (m + 1) / 2,
            Kind::Endo => m * m,
            _ => combos(m, kind.antisym_rank().unwrap()).len(),
        }
    }

    /// Builds from compressed components: increasing multi-indices for
    /// antisymmetric kinds, the upper triangle row by row for symmetric
    /// ones, row-major `T^i_j` for endomorphisms.
    pub fn new(kind: Kind, dim: usize, comps: Vec<Expr>) -> Result<TensorField, TensorError> {
        let expected = TensorField::storage_len(kind, dim);
        if comps.len() != expected {
            return Err(TensorError::Shape {
                kind,
                expected,
                got: comps.len(),
            });
        }
        Ok(TensorField { kind, dim, comps })
    }

    pub fn zero(kind: Kind, dim: usize) -> TensorField {
        TensorField {
            kind,
            dim,
            comps: vec![Expr::zero(); TensorField::storage_len(kind, dim)],
        }
    }

    pub fn scalar(e: Expr, dim: usize) -> TensorField {
        TensorField {
            kind: Kind::Scalar,
            dim,
            comps: vec![e],
        }
    }

    pub fn vector(c: Vec<Expr>) -> TensorField {
        TensorField {
            kind: Kind::Vector,
            dim: c.len(),
            comps: c,
        }
    }

    pub fn one_form(c: Vec<Expr>) -> TensorField {
        TensorField {
            kind: Kind::OneForm,
            dim: c.len(),
            comps: c,
        }
    }

    /// Reads a two-index kind from a full matrix (upper part for
    /// antisymmetric and symmetric kinds).
    pub fn from_matrix(kind: Kind, m: &Mat) -> Result<TensorField, TensorError> {
        let n = m.rows();
        let comps = match kind {
            Kind::TwoForm | Kind::Bivector => combos(n, 2).iter().map(|c| m.get(c[0], c[1]).clone()).collect(),
            Kind::SymTwoTensor => {
                let mut v = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        v.push(m.get(i, j).clone());
                    }
                }
                v
            }
            Kind::Endo => m.entries().to_vec(),
            _ => {
                return Err(TensorError::Unsupported {
                    kind,
                    op: "matrix construction",
                })
            }
        };
        TensorField::new(kind, n, comps)
    }

    /// Builds an antisymmetric kind from a function of increasing indices.
    pub fn antisym_from_fn(kind: Kind, dim: usize, f: impl Fn(&[usize]) -> Expr) -> TensorField {
        let k = kind.antisym_rank().expect("antisymmetric kind");
        TensorField {
            kind,
            dim,
            comps: combos(dim, k).iter().map(|c| f(c)).collect(),
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn compressed(&self) -> &[Expr] {
        &self.comps
    }

    /// Component at an arbitrary multi-index, expanded with signs.
    pub fn component(&self, idx: &[usize]) -> Expr {
        let m = self.dim;
        match self.kind {
            Kind::Scalar => self.comps[0].clone(),
            Kind::SymTwoTensor => {
                let (i, j) = if idx[0] <= idx[1] { (idx[0], idx[1]) } else { (idx[1], idx[0]) };
                let start: usize = (0..i).map(|r| m - r).sum();
                self.comps[start + (j - i)].clone()
            }
            Kind::Endo => self.comps[idx[0] * m + idx[1]].clone(),
            kind => {
                let k = kind.antisym_rank().unwrap();
                assert_eq!(idx.len(), k);
                match sort_sign(idx) {
                    None => Expr::zero(),
                    Some((sorted, sign)) => {
                        let pos = combos(m, k).iter().position(|c| *c == sorted).unwrap();
                        if sign > 0.0 {
                            self.comps[pos].clone()
                        } else {
                            -&self.comps[pos]
                        }
                    }
                }
            }
        }
    }

    /// Full matrix of a two-index kind; `M[i][j]` is the `(i, j)` component.
    pub fn matrix(&self) -> Mat {
        assert!(
            matches!(self.kind, Kind::TwoForm | Kind::Bivector | Kind::SymTwoTensor | Kind::Endo),
            "matrix of {:?}",
            self.kind
        );
        Mat::from_fn(self.dim, self.dim, |i, j| self.component(&[i, j]))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> TensorField {
        TensorField {
            kind: self.kind,
            dim: self.dim,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn add(&self, o: &TensorField) -> TensorField {
        assert_eq!((self.kind, self.dim), (o.kind, o.dim));
        TensorField {
            kind: self.kind,
            dim: self.dim,
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &TensorField) -> TensorField {
        self.add(&o.map(|e| -e))
    }
}

pub fn directional(x: &[Expr], f: &Expr) -> Expr {
    Expr::sum(
        x.iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| c * f.diff(i)),
    )
}

/// Components of df.
pub fn gradient(f: &Expr, m: usize) -> Vec<Expr> {
    (0..m).map(|i| f.diff(i)).collect()
}

pub fn exterior_derivative(f: &TensorField) -> Result<TensorField, TensorError> {
    let k = f.kind.form_degree().ok_or(TensorError::NotAForm(f.kind))?;
    let m = f.dim;
    let out_kind = Kind::form_of_degree(k + 1).filter(|_| k < m).ok_or(TensorError::Degree {
        degree: k + 1,
        dim: m,
    })?;
    let partials: Vec<Vec<Expr>> = (0..m).map(|i| Expr::diff_many(&f.comps, i)).collect();
    let lower = combos(m, k);
    let comps = combos(m, k + 1)
        .iter()
        .map(|idx| {
            Expr::sum((0..=k).map(|a| {
                let mut rest = idx.clone();
                let i = rest.remove(a);
                let pos = lower.iter().position(|c| *c == rest).unwrap();
                let t = partials[i][pos].clone();
                if a % 2 == 0 {
                    t
                } else {
                    -t
                }
            }))
        })
        .collect();
    Ok(TensorField {
        kind: out_kind,
        dim: m,
        comps,
    })
}

/// i(X)ω for a form of degree at least one.
pub fn interior_product(x: &[Expr], w: &TensorField) -> Result<TensorField, TensorError> {
    let k = w.kind.form_degree().ok_or(TensorError::NotAForm(w.kind))?;
    if k == 0 {
        return Err(TensorError::Degree { degree: 0, dim: w.dim });
    }
    let m = w.dim;
    let comps = combos(m, k - 1)
        .iter()
        .map(|rest| {
            Expr::sum((0..m).filter(|i| !x[*i].is_zero()).map(|i| {
                let mut idx = vec![i];
                idx.extend_from_slice(rest);
                &x[i] * w.component(&idx)
            }))
        })
        .collect();
    Ok(TensorField {
        kind: Kind::form_of_degree(k - 1).unwrap(),
        dim: m,
        comps,
    })
}

/// [X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i.
pub fn lie_bracket(x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    let m = x.len();
    let dy: Vec<Vec<Expr>> = (0..m).map(|j| Expr::diff_many(y, j)).collect();
    let dx: Vec<Vec<Expr>> = (0..m).map(|j| Expr::diff_many(x, j)).collect();
    (0..m)
        .map(|i| {
            let a = dot(x.iter(), (0..m).map(|j| &dy[j][i]).collect::<Vec<_>>().into_iter());
            let b = dot(y.iter(), (0..m).map(|j| &dx[j][i]).collect::<Vec<_>>().into_iter());
            a - b
        })
        .collect()
}

/// Matrix of dα: `M[i][j] = ∂_i α_j − ∂_j α_i`.
pub fn d_one_form(a: &[Expr]) -> Mat {
    let m = a.len();
    let da: Vec<Vec<Expr>> = (0..m).map(|i| Expr::diff_many(a, i)).collect();
    Mat::from_fn(m, m, |i, j| &da[i][j] - &da[j][i])
}

/// L_X α by Cartan's formula.
pub fn lie_derivative_one_form(x: &[Expr], a: &[Expr]) -> Vec<Expr> {
    let m = x.len();
    let da = d_one_form(a);
    let ax = dot(a.iter(), x.iter());
    let grad = gradient(&ax, m);
    (0..m)
        .map(|j| dot(x.iter(), (0..m).map(|i| da.get(i, j)).collect::<Vec<_>>().into_iter()) + &grad[j])
        .collect()
}

/// (♭_B X)_j = B_ij X^i.
pub fn flat(b: &Mat, x: &[Expr]) -> Vec<Expr> {
    b.transpose().mul_vec(x)
}

/// (♯_π α)^j = π^{ij} α_i.
pub fn sharp_bivector(p: &Mat, a: &[Expr]) -> Vec<Expr> {
    p.transpose().mul_vec(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Flat,
    Sharp,
}

/// Musical isomorphisms. Sharp of a metric inverts its flat; sharp of a
/// non-degenerate 2-form µ is normalised by ♯µ∘♭µ = −Id; sharp of a
/// bivector contracts its first slot.
pub fn musical(t: &TensorField, dir: Direction, arg: &[Expr]) -> Result<Vec<Expr>, TensorError> {
    let b = match t.kind {
        Kind::SymTwoTensor | Kind::TwoForm | Kind::Bivector => t.matrix(),
        kind => return Err(TensorError::Unsupported { kind, op: "musical maps" }),
    };
    match (dir, t.kind) {
        (Direction::Flat, Kind::Bivector) => Err(TensorError::Unsupported {
            kind: Kind::Bivector,
            op: "flat",
        }),
        (Direction::Flat, _) => Ok(flat(&b, arg)),
        (Direction::Sharp, Kind::Bivector) => Ok(sharp_bivector(&b, arg)),
        (Direction::Sharp, Kind::SymTwoTensor) => Ok(b.inverse().mul_vec(arg)),
        (Direction::Sharp, _) => Ok(b.transpose().inverse().neg().mul_vec(arg)),
    }
}

/// Schouten bracket of two bivectors,
/// [P,W]^{ijk} = Σ_cyc (P^{li} ∂_l W^{jk} + W^{li} ∂_l P^{jk}).
/// For P = W it is −2 times the Jacobiator of {f,h} = P(df,dh).
pub fn schouten(p: &Mat, w: &Mat) -> TensorField {
    let m = p.rows();
    let dp: Vec<Mat> = (0..m).map(|l| p.diff(l)).collect();
    let dw: Vec<Mat> = (0..m).map(|l| w.diff(l)).collect();
    TensorField::antisym_from_fn(Kind::Trivector, m, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let cyc = [(i, j, k), (j, k, i), (k, i, j)];
        let mut terms = Vec::new();
        for &(a, b, c) in &cyc {
            for l in 0..m {
                terms.push(p.get(l, a) * dw[l].get(b, c));
                terms.push(w.get(l, a) * dp[l].get(b, c));
            }
        }
        Expr::sum(terms)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartfield::Chart;

    fn r3() -> Chart {
        Chart::cube(&["x", "y", "z"], -1.0, 1.0).unwrap()
    }

    fn e(c: &Chart, s: &str) -> Expr {
        c.parse(s).unwrap()
    }

    fn close(a: &Expr, want: f64, p: &[f64]) {
        let v = a.eval(p).unwrap();
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn sym_component_lookup() {
        let c = r3();
        let g = TensorField::new(
            Kind::SymTwoTensor,
            3,
            ["1", "2", "3", "4", "5", "6"].iter().map(|s| e(&c, s)).collect(),
        )
        .unwrap();
        let p = [0.0; 3];
        close(&g.component(&[0, 2]), 3.0, &p);
        close(&g.component(&[2, 1]), 5.0, &p);
        close(&g.component(&[2, 2]), 6.0, &p);
        close(&g.component(&[1, 1]), 4.0, &p);
    }

    #[test]
    fn d_of_twisted_psi() {
        let c = r3();
        let psi = TensorField::new(Kind::TwoForm, 3, vec![e(&c, "z"), Expr::zero(), Expr::zero()]).unwrap();
        let dpsi = exterior_derivative(&psi).unwrap();
        assert_eq!(dpsi.kind(), Kind::ThreeForm);
        close(&dpsi.component(&[0, 1, 2]), 1.0, &[0.3, 0.1, 0.2]);
        close(&dpsi.component(&[2, 1, 0]), -1.0, &[0.3, 0.1, 0.2]);
    }

    #[test]
    fn bracket_by_hand() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let x = vec![Expr::zero(), e(&c, "x")];
        let y = vec![e(&c, "y"), Expr::zero()];
        let b = lie_bracket(&x, &y);
        let p = [0.4, -0.7];
        close(&b[0], 0.4, &p);
        close(&b[1], 0.7, &p);
    }

    #[test]
    fn interior_and_musical_examples() {
        let c = r3();
        let vol = TensorField::antisym_from_fn(Kind::ThreeForm, 3, |_| Expr::one());
        let dx = vec![Expr::one(), Expr::zero(), Expr::zero()];
        let dy = vec![Expr::zero(), Expr::one(), Expr::zero()];
        let a = interior_product(&dx, &vol).unwrap();
        let b = interior_product(&dy, &a).unwrap();
        assert_eq!(b.kind(), Kind::OneForm);
        let p = [0.0; 3];
        close(&b.compressed()[2], 1.0, &p);
        close(&b.compressed()[0], 0.0, &p);

        let c2 = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        // ψ = x dy∧dx, γ = δ: (ψ+γ)(∂x,·) = dx − x dy
        let psi = TensorField::new(Kind::TwoForm, 2, vec![-e(&c2, "x")]).unwrap();
        let gamma = TensorField::from_matrix(Kind::SymTwoTensor, &Mat::identity(2)).unwrap();
        let b = psi.matrix().add(&gamma.matrix());
        let f = flat(&b, &[Expr::one(), Expr::zero()]);
        close(&f[0], 1.0, &[0.6, 0.0]);
        close(&f[1], -0.6, &[0.6, 0.0]);
        let _ = c;
    }

    #[test]
    fn form_sharp_is_minus_inverse() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let mu = TensorField::new(Kind::TwoForm, 2, vec![e(&c, "2+x")]).unwrap();
        let x = vec![e(&c, "y"), e(&c, "1")];
        let back = musical(&mu, Direction::Sharp, &musical(&mu, Direction::Flat, &x).unwrap()).unwrap();
        let p = [0.3, 0.8];
        close(&back[0], -0.8, &p);
        close(&back[1], -1.0, &p);
    }

    #[test]
    fn schouten_of_planar_bivector_vanishes() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let p = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => e(&c, "x"),
            (1, 0) => -e(&c, "x"),
            _ => Expr::zero(),
        });
        assert!(schouten(&p, &p).compressed().is_empty());
        let c3 = r3();
        // {x,y} = x, {x,z} = 1: Jacobiator of (x,y,z) is {z,{x,y}} = −1
        let q = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 1) => e(&c3, "x"),
            (1, 0) => -e(&c3, "x"),
            (0, 2) => Expr::one(),
            (2, 0) => -Expr::one(),
            _ => Expr::zero(),
        });
        let s = schouten(&q, &q);
        close(&s.compressed()[0], 2.0, &[0.2, 0.3, 0.5]);
    }
}
