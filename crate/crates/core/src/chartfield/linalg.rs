//! Small dense matrices of expressions, plus the pointwise numeric helpers
//! used for rank and span decisions.

use nalgebra::{DMatrix, DVector};

use super::expr::{EvalError, Evaluator, Expr};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Expr>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![Expr::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| if i == j { Expr::one() } else { Expr::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Mat {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| Expr::constant(m[(i, j)]))
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<Expr>]) -> Mat {
        let rows = cols.first().map_or(0, Vec::len);
        Mat::from_fn(rows, cols.len(), |i, j| cols[j][i].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.data[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[Expr] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Expr> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Expr>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn add(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + o.get(i, j))
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - o.get(i, j))
    }

    pub fn neg(&self) -> Mat {
        self.map(|e| -e)
    }

    pub fn scale(&self, c: f64) -> Mat {
        self.map(|e| e.scale(c))
    }

    pub fn scale_by(&self, f: &Expr) -> Mat {
        self.map(|e| e * f)
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "matrix product shape");
        Mat::from_fn(self.rows, o.cols, |i, j| {
            Expr::sum((0..self.cols).filter_map(|k| {
                let a = self.get(i, k);
                let b = o.get(k, j);
                (!a.is_zero() && !b.is_zero()).then(|| a * b)
            }))
        })
    }

    pub fn mul_vec(&self, v: &[Expr]) -> Vec<Expr> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape");
        (0..self.rows)
            .map(|i| dot((0..self.cols).map(|k| self.get(i, k)), v.iter()))
            .collect()
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j).clone())
    }

    /// `[[a, b], [c, d]]`.
    pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let (r, k) = (a.rows, a.cols);
        Mat::from_fn(a.rows + c.rows, a.cols + b.cols, |i, j| match (i < r, j < k) {
            (true, true) => a.get(i, j).clone(),
            (true, false) => b.get(i, j - k).clone(),
            (false, true) => c.get(i - r, j).clone(),
            (false, false) => d.get(i - r, j - k).clone(),
        })
    }

    pub fn diff(&self, i: usize) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: Expr::diff_many(&self.data, i),
        }
    }

    /// Determinant by Laplace expansion memoized over column subsets.
    pub fn det(&self) -> Expr {
        assert!(self.is_square(), "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return Expr::one();
        }
        assert!(n <= 16, "symbolic determinant limited to 16x16");
        let mut table: Vec<Option<Expr>> = vec![None; 1 << n];
        table[0] = Some(Expr::one());
        for mask in 1usize..(1 << n) {
            let k = mask.count_ones() as usize;
            let row = k - 1;
            let mut terms = Vec::new();
            let mut pos = 0;
            for j in 0..n {
                if mask & (1 << j) == 0 {
                    continue;
                }
                let a = self.get(row, j);
                let sub = table[mask ^ (1 << j)].as_ref().unwrap();
                if !a.is_zero() && !sub.is_zero() {
                    let t = a * sub;
                    terms.push(if (row + pos) % 2 == 0 { t } else { -t });
                }
                pos += 1;
            }
            table[mask] = Some(Expr::sum(terms));
        }
        table[(1 << n) - 1].take().unwrap()
    }

    pub fn minor(&self, r: usize, c: usize) -> Mat {
        Mat::from_fn(self.rows - 1, self.cols - 1, |i, j| {
            self.get(if i < r { i } else { i + 1 }, if j < c { j } else { j + 1 }).clone()
        })
    }

    pub fn adjugate(&self) -> Mat {
        assert!(self.is_square());
        let n = self.rows;
        if n == 1 {
            return Mat::identity(1);
        }
        Mat::from_fn(n, n, |i, j| {
            let c = self.minor(j, i).det();
            if (i + j) % 2 == 0 {
                c
            } else {
                -c
            }
        })
    }

    /// Symbolic inverse `adj / det`; singular points surface at evaluation.
    pub fn inverse(&self) -> Mat {
        let det = self.det();
        self.adjugate().map(|e| e / &det)
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<DMatrix<f64>, EvalError> {
        let vals = ev.eval_all(&self.data)?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &vals))
    }
}

pub fn dot<'a>(a: impl IntoIterator<Item = &'a Expr>, b: impl IntoIterator<Item = &'a Expr>) -> Expr {
    Expr::sum(
        a.into_iter()
            .zip(b)
            .filter(|(x, y)| !x.is_zero() && !y.is_zero())
            .map(|(x, y)| x * y),
    )
}

pub fn vec_add(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_sub(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_scale(a: &[Expr], f: &Expr) -> Vec<Expr> {
    a.iter().map(|x| x * f).collect()
}

pub fn vec_scale_f(a: &[Expr], c: f64) -> Vec<Expr> {
    a.iter().map(|x| x.scale(c)).collect()
}

pub fn zeros(n: usize) -> Vec<Expr> {
    vec![Expr::zero(); n]
}

pub fn unit(n: usize, i: usize) -> Vec<Expr> {
    let mut v = zeros(n);
    v[i] = Expr::one();
    v
}

/// Number of singular values above `rel` times the largest.
pub fn numeric_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel * top).count()
}

/// Distance from `v` to the column span of `basis` (least squares).
pub fn span_residual(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let svd = basis.clone().svd(true, true);
    match svd.solve(v, 1e-12) {
        Ok(c) => (basis * c - v).norm(),
        Err(_) => v.norm(),
    }
}

/// Largest span residual of the columns of `vs` against `basis`.
pub fn span_residual_all(basis: &DMatrix<f64>, vs: &DMatrix<f64>) -> f64 {
    (0..vs.ncols())
        .map(|j| span_residual(basis, &vs.column(j).into_owned()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(m: &Mat, p: &[f64]) -> DMatrix<f64> {
        m.eval(&mut Evaluator::new(p)).unwrap()
    }

    #[test]
    fn det_matches_nalgebra() {
        let x = Expr::var(0);
        let m = Mat::from_fn(4, 4, |i, j| {
            let c = Expr::constant((i * 4 + j) as f64 * 0.3 - 1.0);
            if (i + j) % 3 == 0 {
                c * &x
            } else {
                c + Expr::constant(i as f64 - j as f64)
            }
        });
        let p = [0.37];
        let want = num(&m, &p).determinant();
        let got = m.det().eval(&p).unwrap();
        assert!((want - got).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn inverse_is_inverse() {
        let x = Expr::var(0);
        let y = Expr::var(1);
        let m = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                Expr::constant(2.0) + &x * &x
            } else {
                &y * Expr::constant((i + 2 * j) as f64 * 0.1)
            }
        });
        let p = [0.4, -0.8];
        let prod = num(&m.mul(&m.inverse()), &p);
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn rank_and_span() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(numeric_rank(&b, 1e-9), 2);
        assert!(span_residual(&b, &DVector::from_vec(vec![2.0, -1.0, 0.0])) < 1e-14);
        assert!((span_residual(&b, &DVector::from_vec(vec![0.0, 0.0, 3.0])) - 3.0).abs() < 1e-14);
    }
}
