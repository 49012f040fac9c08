//! Linear connections on TM, big connections on TM⊕T*M and generalized
//! connections, with their torsions, brackets and curvatures.
//!
//! A big connection is stored by its matrices `C_i` in the constant frame:
//! ∇_{∂i} s = ∂_i s + C_i s on stacked components.

use nalgebra::DMatrix;

use crate::bigtangent::{courant_bracket, neutral_matrix, neutral_matrix_f64, neutral_pairing, Section};
use crate::chartfield::linalg::{dot, vec_add, vec_sub};
use crate::chartfield::tensor::lie_bracket;
use crate::chartfield::{Evaluator, Expr, Mat, Point, TensorField};
use crate::genmetric::{GenMetric, MetricPair, Side};
use crate::sampling::{sweep, Residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    LeviCivita,
    DPlus,
    DMinus,
    Custom,
}

/// A linear connection on TM; `chr[i]` holds Γ^k_{il} at row k, column l.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConnection {
    chr: Vec<Mat>,
    pub variant: Variant,
}

impl AffineConnection {
    pub fn from_christoffels(chr: Vec<Mat>, variant: Variant) -> AffineConnection {
        let m = chr.len();
        assert!(chr.iter().all(|c| c.rows() == m && c.cols() == m));
        AffineConnection { chr, variant }
    }

    pub fn trivial(m: usize) -> AffineConnection {
        AffineConnection::from_christoffels(vec![Mat::zeros(m, m); m], Variant::Custom)
    }

    /// Γ^k_ij = ½γ^{kl}(∂_iγ_jl + ∂_jγ_il − ∂_lγ_ij).
    pub fn levi_civita(pair: &MetricPair) -> AffineConnection {
        let m = pair.dim();
        let gi = pair.gamma.inverse();
        let dg: Vec<Mat> = (0..m).map(|i| pair.gamma.diff(i)).collect();
        let chr = (0..m)
            .map(|i| {
                Mat::from_fn(m, m, |k, j| {
                    let terms = (0..m).map(|l| {
                        let koszul = dg[i].get(j, l) + dg[j].get(i, l) - dg[l].get(i, j);
                        gi.get(k, l) * koszul
                    });
                    Expr::sum(terms).scale(0.5)
                })
            })
            .collect();
        AffineConnection::from_christoffels(chr, Variant::LeviCivita)
    }

    /// D± = D ± ½♯γ i(Y)i(X)dψ.
    pub fn dpm(pair: &MetricPair, side: Side) -> AffineConnection {
        let lc = AffineConnection::levi_civita(pair);
        let m = pair.dim();
        let dpsi = pair.dpsi();
        let gi = pair.gamma.inverse();
        let s = 0.5 * side.sign();
        let chr = (0..m)
            .map(|i| {
                Mat::from_fn(m, m, |k, j| {
                    let corr = Expr::sum((0..m).map(|l| gi.get(k, l) * dpsi.component(&[i, j, l])));
                    lc.chr[i].get(k, j) + corr.scale(s)
                })
            })
            .collect();
        let variant = if side == Side::Plus { Variant::DPlus } else { Variant::DMinus };
        AffineConnection::from_christoffels(chr, variant)
    }

    pub fn dim(&self) -> usize {
        self.chr.len()
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &Expr {
        self.chr[i].get(k, j)
    }

    /// Matrix Γ_i acting on vector components.
    pub fn matrix(&self, i: usize) -> &Mat {
        &self.chr[i]
    }

    pub fn derivative(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let m = self.dim();
        (0..m)
            .map(|k| {
                let mut terms = Vec::new();
                for i in 0..m {
                    if x[i].is_zero() {
                        continue;
                    }
                    let row: Vec<Expr> = (0..m).map(|l| self.chr[i].get(k, l).clone()).collect();
                    terms.push(&x[i] * (y[k].diff(i) + dot(row.iter(), y.iter())));
                }
                Expr::sum(terms)
            })
            .collect()
    }

    pub fn torsion(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        vec_sub(&vec_sub(&self.derivative(x, y), &self.derivative(y, x)), &lie_bracket(x, y))
    }

    /// R_ij = ∂_iΓ_j − ∂_jΓ_i + [Γ_i, Γ_j].
    pub fn curvature_matrix(&self, i: usize, j: usize) -> Mat {
        let (a, b) = (&self.chr[i], &self.chr[j]);
        b.diff(i).sub(&a.diff(j)).add(&a.mul(b).sub(&b.mul(a)))
    }

    /// R(X,Y)Z = D_X D_Y Z − D_Y D_X Z − D_{[X,Y]} Z.
    pub fn curvature(&self, x: &[Expr], y: &[Expr], z: &[Expr]) -> Vec<Expr> {
        let a = self.derivative(x, &self.derivative(y, z));
        let b = self.derivative(y, &self.derivative(x, z));
        vec_sub(&vec_sub(&a, &b), &self.derivative(&lie_bracket(x, y), z))
    }

    /// max |(D_iγ)_jk|.
    pub fn metric_residual(&self, gamma: &Mat, points: &[Point]) -> Residual {
        let m = self.dim();
        let comps: Vec<Expr> = (0..m)
            .flat_map(|i| {
                let dg = gamma.diff(i);
                let t = self.chr[i].transpose().mul(gamma);
                let u = gamma.mul(&self.chr[i]);
                let r = dg.sub(&t).sub(&u);
                r.entries().to_vec()
            })
            .collect();
        max_sweep(&comps, points)
    }

    /// max over coordinate triples of |γ(T(∂i,∂j),∂k) − c·t(∂i,∂j,∂k)|.
    pub fn torsion_form_residual(&self, gamma: &Mat, t: &TensorField, c: f64, points: &[Point]) -> Residual {
        let m = self.dim();
        let mut comps = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let tor: Vec<Expr> = (0..m)
                    .map(|k| self.christoffel(k, i, j) - self.christoffel(k, j, i))
                    .collect();
                for k in 0..m {
                    let lhs = dot(tor.iter(), gamma.column(k).iter());
                    comps.push(lhs - t.component(&[i, j, k]).scale(c));
                }
            }
        }
        max_sweep(&comps, points)
    }
}

/// max over points of the largest absolute entry.
pub fn max_sweep(comps: &[Expr], points: &[Point]) -> Residual {
    sweep(points, |p| {
        let v = Evaluator::new(p).eval_all(comps)?;
        Ok(v.into_iter().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b.abs()) }))
    })
}

/// t(X,Y,Z) for a 3-form.
pub fn three_form_on(t: &TensorField, x: &[Expr], y: &[Expr], z: &[Expr]) -> Expr {
    let m = x.len();
    let mut terms = Vec::new();
    for i in 0..m {
        if x[i].is_zero() {
            continue;
        }
        for j in 0..m {
            if y[j].is_zero() || i == j {
                continue;
            }
            for k in 0..m {
                if z[k].is_zero() || k == i || k == j {
                    continue;
                }
                terms.push(&x[i] * &y[j] * &z[k] * t.component(&[i, j, k]));
            }
        }
    }
    Expr::sum(terms)
}

#[derive(Debug, Clone)]
pub struct BigConnection {
    c: Vec<Mat>,
    pub dplus: Option<AffineConnection>,
    pub dminus: Option<AffineConnection>,
}

impl BigConnection {
    pub fn from_matrices(c: Vec<Mat>) -> BigConnection {
        BigConnection {
            c,
            dplus: None,
            dminus: None,
        }
    }

    /// ∇ built from a pair of γ-metric connections acting on V± through τ±:
    /// C_i = Σ± E±(∂_i P± + Γ±_i P±).
    pub fn from_pair(gm: &GenMetric, dplus: AffineConnection, dminus: AffineConnection) -> BigConnection {
        let m = gm.dim();
        let parts = [(Side::Plus, &dplus), (Side::Minus, &dminus)];
        let c = (0..m)
            .map(|i| {
                let mut acc = Mat::zeros(2 * m, 2 * m);
                for (side, d) in parts {
                    let p = gm.transfer_matrix(side);
                    let e = gm.embedding(side);
                    acc = acc.add(&e.mul(&p.diff(i).add(&d.matrix(i).mul(&p))));
                }
                acc
            })
            .collect();
        BigConnection {
            c,
            dplus: Some(dplus),
            dminus: Some(dminus),
        }
    }

    pub fn canonical(gm: &GenMetric) -> BigConnection {
        BigConnection::from_pair(gm, AffineConnection::dpm(&gm.pair, Side::Plus), AffineConnection::dpm(&gm.pair, Side::Minus))
    }

    pub fn big_levi_civita(gm: &GenMetric) -> BigConnection {
        let d = AffineConnection::levi_civita(&gm.pair);
        BigConnection::from_pair(gm, d.clone(), d)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn matrix(&self, i: usize) -> &Mat {
        &self.c[i]
    }

    /// ∇_X s.
    pub fn nabla(&self, x: &[Expr], s: &Section) -> Section {
        let st = s.stacked();
        let n = st.len();
        let out: Vec<Expr> = (0..n)
            .map(|r| {
                let mut terms = Vec::new();
                for (i, xi) in x.iter().enumerate() {
                    if xi.is_zero() {
                        continue;
                    }
                    let row: Vec<Expr> = (0..n).map(|c| self.c[i].get(r, c).clone()).collect();
                    terms.push(xi * (st[r].diff(i) + dot(row.iter(), st.iter())));
                }
                Expr::sum(terms)
            })
            .collect();
        Section::from_stacked(&out)
    }

    /// T∇(𝒳,𝒴) = ∇_X𝒴 − ∇_Y𝒳 − [𝒳,𝒴].
    pub fn courant_torsion(&self, a: &Section, b: &Section) -> Section {
        self.nabla(&a.vec, b).sub(&self.nabla(&b.vec, a)).sub(&courant_bracket(a, b))
    }

    /// g(T∇(𝒳,𝒴),𝒵) + ½[g(∇_Z𝒳,𝒴) − g(∇_Z𝒴,𝒳)] with Z = pr_TM𝒵.
    pub fn gualtieri_torsion(&self, a: &Section, b: &Section, c: &Section) -> Expr {
        let t = neutral_pairing(&self.courant_torsion(a, b), c);
        let u = neutral_pairing(&self.nabla(&c.vec, a), b) - neutral_pairing(&self.nabla(&c.vec, b), a);
        t + u.scale(0.5)
    }

    /// R_ij = ∂_iC_j − ∂_jC_i + [C_i, C_j].
    pub fn curvature_matrix(&self, i: usize, j: usize) -> Mat {
        let (a, b) = (&self.c[i], &self.c[j]);
        b.diff(i).sub(&a.diff(j)).add(&a.mul(b).sub(&b.mul(a)))
    }

    /// R(X,Y)𝒵 for vector fields X, Y.
    pub fn curvature(&self, x: &[Expr], y: &[Expr], z: &Section) -> Section {
        let a = self.nabla(x, &self.nabla(y, z));
        let b = self.nabla(y, &self.nabla(x, z));
        a.sub(&b).sub(&self.nabla(&lie_bracket(x, y), z))
    }

    /// max |HC_i + C_iᵀH|: ∇ preserves g.
    pub fn g_compat_residual(&self, points: &[Point]) -> Residual {
        let m = self.dim();
        let h = neutral_matrix(m);
        let comps: Vec<Expr> = self
            .c
            .iter()
            .flat_map(|c| h.mul(c).add(&c.transpose().mul(&h)).entries().to_vec())
            .collect();
        max_sweep(&comps, points)
    }

    /// max |∂_iG − C_iᵀG − GC_i|: ∇ preserves G.
    pub fn big_g_compat_residual(&self, gm: &GenMetric, points: &[Point]) -> Residual {
        let g = gm.g_matrix();
        let comps: Vec<Expr> = (0..self.dim())
            .flat_map(|i| {
                let c = &self.c[i];
                g.diff(i).sub(&c.transpose().mul(&g)).sub(&g.mul(c)).entries().to_vec()
            })
            .collect();
        max_sweep(&comps, points)
    }

    /// Distance of ∇_{∂i} applied to the V± frames from V±.
    pub fn preserves_frames_residual(&self, gm: &GenMetric, points: &[Point]) -> Residual {
        let m = self.dim();
        let mut acc = Residual::zero();
        for side in [Side::Plus, Side::Minus] {
            let fr = gm.frame(side);
            for i in 0..m {
                for s in &fr.sections {
                    let d = self.nabla(&crate::chartfield::linalg::unit(m, i), s);
                    acc = acc.merge(fr.membership(&d, points));
                }
            }
        }
        acc
    }

    /// max |P± R_ij E± − R^{D±}_ij| and the off-diagonal blocks P∓ R_ij E±.
    pub fn curvature_split_residual(&self, gm: &GenMetric, points: &[Point]) -> Residual {
        let m = self.dim();
        let (Some(dp), Some(dm)) = (&self.dplus, &self.dminus) else {
            return Residual::zero();
        };
        let mut comps = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let r = self.curvature_matrix(i, j);
                for (side, d) in [(Side::Plus, dp), (Side::Minus, dm)] {
                    let p = gm.transfer_matrix(side);
                    let e = gm.embedding(side);
                    let diag = p.mul(&r).mul(&e).sub(&d.curvature_matrix(i, j));
                    comps.extend(diag.entries().iter().cloned());
                    let off = gm.transfer_matrix(side.flip()).mul(&r).mul(&e);
                    comps.extend(off.entries().iter().cloned());
                }
            }
        }
        max_sweep(&comps, points)
    }
}

/// How a tensor Ξ± determines Λ±.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiReading {
    /// g(∇*_{♭_{ψ±γ}Z}(X,♭_{ψ±γ}X), (Y,♭_{ψ±γ}Y)) = Ξ±(X,Y,Z).
    Neutral,
    /// γ(Λ±_{♭_{ψ±γ}Z}X, Y) = Ξ±(X,Y,Z).
    Literal,
}

/// 𝒟_{(X,α)} = ∇_X + Σ_k α_k N^k.
#[derive(Debug, Clone)]
pub struct GenConnection {
    pub nabla: BigConnection,
    n: Vec<Mat>,
    pub xi_plus: TensorField,
    pub xi_minus: TensorField,
}

impl GenConnection {
    /// Ξ± are given as 3-forms; only antisymmetry in the first two slots is
    /// used.
    pub fn from_xi(gm: &GenMetric, nabla: BigConnection, xi_plus: TensorField, xi_minus: TensorField, reading: XiReading) -> GenConnection {
        let m = gm.dim();
        let gi = gm.gamma_inv();
        let n = (0..m)
            .map(|k| {
                let mut acc = Mat::zeros(2 * m, 2 * m);
                for (side, xi) in [(Side::Plus, &xi_plus), (Side::Minus, &xi_minus)] {
                    let c = match reading {
                        XiReading::Neutral => 0.5 * side.sign(),
                        XiReading::Literal => 1.0,
                    };
                    let zs = gm.pair.flat_pm(side).inverse().column(k);
                    let lam = Mat::from_fn(m, m, |a, b| {
                        let mut terms = Vec::new();
                        for l in 0..m {
                            for (nn, z) in zs.iter().enumerate() {
                                if !z.is_zero() && !gi.get(a, l).is_zero() {
                                    terms.push(gi.get(a, l) * xi.component(&[b, l, nn]) * z);
                                }
                            }
                        }
                        Expr::sum(terms).scale(c)
                    });
                    let p = gm.transfer_matrix(side);
                    let e = gm.embedding(side);
                    acc = acc.add(&e.mul(&lam).mul(&p));
                }
                acc
            })
            .collect();
        GenConnection {
            nabla,
            n,
            xi_plus,
            xi_minus,
        }
    }

    /// ∇^{LC} with Ξ± = ±dψ.
    pub fn generalized_lc(gm: &GenMetric) -> GenConnection {
        GenConnection::generalized_lc_with(gm, XiReading::Neutral)
    }

    pub fn generalized_lc_with(gm: &GenMetric, reading: XiReading) -> GenConnection {
        let dpsi = gm.pair.dpsi();
        let neg = dpsi.map(|e| -e);
        GenConnection::from_xi(gm, BigConnection::big_levi_civita(gm), dpsi, neg, reading)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// ∇*_{dx^k} as a matrix.
    pub fn star_matrix(&self, k: usize) -> &Mat {
        &self.n[k]
    }

    /// ∇*_α s.
    pub fn star(&self, alpha: &[Expr], s: &Section) -> Section {
        let st = s.stacked();
        let mut acc: Vec<Expr> = vec![Expr::zero(); st.len()];
        for (k, a) in alpha.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let v: Vec<Expr> = self.n[k].mul_vec(&st).iter().map(|e| e * a).collect();
            acc = vec_add(&acc, &v);
        }
        Section::from_stacked(&acc)
    }

    /// 𝒟_𝒳 s.
    pub fn d(&self, a: &Section, s: &Section) -> Section {
        self.nabla.nabla(&a.vec, s).add(&self.star(&a.form, s))
    }

    pub fn courant_torsion(&self, a: &Section, b: &Section) -> Section {
        self.d(a, b).sub(&self.d(b, a)).sub(&courant_bracket(a, b))
    }

    /// The Gualtieri form of T^𝒟, differentiating along the full 𝒵.
    pub fn gualtieri_torsion(&self, a: &Section, b: &Section, c: &Section) -> Expr {
        let t = neutral_pairing(&self.courant_torsion(a, b), c);
        let u = neutral_pairing(&self.d(c, a), b) - neutral_pairing(&self.d(c, b), a);
        t + u.scale(0.5)
    }

    /// g([𝒳,𝒴]^𝒟,𝒵) = g([𝒳,𝒴],𝒵) − ½g(𝒟_𝒵𝒳,𝒴) + ½g(𝒟_𝒵𝒴,𝒳),
    /// solved by pairing against the constant frame.
    pub fn modified_bracket(&self, a: &Section, b: &Section) -> Section {
        let m = self.dim();
        let br = courant_bracket(a, b);
        let value = |z: &Section| {
            let corr = neutral_pairing(&self.d(z, b), a) - neutral_pairing(&self.d(z, a), b);
            neutral_pairing(&br, z) + corr.scale(0.5)
        };
        let vec = (0..m).map(|k| value(&Section::basis(m, m + k))).collect();
        let form = (0..m).map(|k| value(&Section::basis(m, k))).collect();
        Section::new(vec, form)
    }

    /// ℛ^𝒟(𝒳,𝒴)𝒵 = 𝒟_𝒳𝒟_𝒴𝒵 − 𝒟_𝒴𝒟_𝒳𝒵 − 𝒟_{[𝒳,𝒴]^𝒟}𝒵.
    pub fn gen_curvature(&self, a: &Section, b: &Section, c: &Section) -> Section {
        let x = self.d(a, &self.d(b, c));
        let y = self.d(b, &self.d(a, c));
        x.sub(&y).sub(&self.d(&self.modified_bracket(a, b), c))
    }

    /// max |Ξ±(X,Y,Z) + Ξ±(Y,X,Z)| over coordinate triples.
    pub fn xi_antisymmetry(&self, points: &[Point]) -> Residual {
        let m = self.dim();
        let mut comps = Vec::new();
        for xi in [&self.xi_plus, &self.xi_minus] {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        comps.push(xi.component(&[i, j, k]) + xi.component(&[j, i, k]));
                    }
                }
            }
        }
        max_sweep(&comps, points)
    }

    /// ∇* preserves g and G.
    pub fn star_compat_residual(&self, gm: &GenMetric, points: &[Point]) -> Residual {
        let m = self.dim();
        let h = neutral_matrix_f64(m);
        sweep(points, |p| {
            let mut ev = Evaluator::new(p);
            let gmat: DMatrix<f64> = gm.g_matrix().eval(&mut ev)?;
            let mut worst: f64 = 0.0;
            for n in &self.n {
                let a = n.eval(&mut ev)?;
                worst = worst
                    .max((&h * &a + a.transpose() * &h).abs().max())
                    .max((&gmat * &a + a.transpose() * &gmat).abs().max());
            }
            Ok(worst)
        })
    }
}

/// max over triples of |t(J∂i,∂j,∂k) + t(∂i,J∂j,∂k)|.
pub fn hermitian_residual(t: &TensorField, j: &Mat, points: &[Point]) -> Residual {
    let m = t.dim();
    let mut comps = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let ea = crate::chartfield::linalg::unit(m, a);
                let eb = crate::chartfield::linalg::unit(m, b);
                let ec = crate::chartfield::linalg::unit(m, c);
                comps.push(three_form_on(t, &j.column(a), &eb, &ec) + three_form_on(t, &ea, &j.column(b), &ec));
            }
        }
    }
    max_sweep(&comps, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartfield::Chart;
    use crate::sampling::sample_points;

    #[test]
    fn christoffels_of_warped_plane() {
        let c = Chart::cube(&["x", "y"], -1.0, 1.0).unwrap();
        let g = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Expr::one(),
            (1, 1) => c.parse("x^2+1").unwrap(),
            _ => Expr::zero(),
        });
        let pair = MetricPair::new(g, Mat::zeros(2, 2)).unwrap();
        let d = AffineConnection::levi_civita(&pair);
        let p = [0.6, -0.2];
        let v = |e: &Expr| e.eval(&p).unwrap();
        assert!((v(d.christoffel(1, 0, 1)) - 0.6 / 1.36).abs() < 1e-14);
        assert!((v(d.christoffel(0, 1, 1)) + 0.6).abs() < 1e-14);
        let pts = sample_points(&c, 20, 4);
        assert!(d.metric_residual(&pair.gamma, &pts).passes(1e-12));
    }

    #[test]
    fn flat_canonical_is_trivial() {
        let gm = GenMetric::new(MetricPair::flat(2));
        let nab = BigConnection::canonical(&gm);
        assert!(nab.matrix(0).entries().iter().all(|e| e.as_const().map_or(true, |v| v == 0.0)));
    }
}
