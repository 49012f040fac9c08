//! Sample points and residual bookkeeping shared by every check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chartfield::{Chart, EvalError, Point};

pub const DEFAULT_SAMPLES: usize = 50;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            tol: DEFAULT_TOL,
        }
    }
}

/// The 2^m grid at 1/3 and 2/3 of each axis, then `n` seeded uniform points.
pub fn sample_points(chart: &Chart, n: usize, seed: u64) -> Vec<Point> {
    let m = chart.dim();
    let dom = chart.domain();
    let mut out = Vec::with_capacity((1 << m) + n);
    for mask in 0..(1usize << m) {
        out.push(
            (0..m)
                .map(|i| {
                    let (lo, hi) = dom[i];
                    let t = if mask & (1 << i) == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
                    lo + t * (hi - lo)
                })
                .collect(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        out.push(dom.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub max: f64,
    /// Point attaining the maximum.
    pub witness: Option<Point>,
    pub evaluated: usize,
    /// Points dropped because a denominator vanished there.
    pub skipped: Vec<(Point, String)>,
}

impl Residual {
    pub fn zero() -> Residual {
        Residual {
            max: 0.0,
            witness: None,
            evaluated: 0,
            skipped: Vec::new(),
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max <= tol && self.evaluated > 0
    }

    /// Pointwise maximum of two residual sweeps over the same points.
    pub fn merge(mut self, o: Residual) -> Residual {
        if o.max > self.max || self.witness.is_none() && o.witness.is_some() && o.max >= self.max {
            self.max = o.max;
            self.witness = o.witness;
        }
        self.evaluated = self.evaluated.max(o.evaluated);
        for s in o.skipped {
            if !self.skipped.iter().any(|(p, _)| *p == s.0) {
                self.skipped.push(s);
            }
        }
        self
    }
}

/// Evaluates `f` at every point in parallel; NaN counts as an infinite
/// residual, singular denominators skip the point.
pub fn sweep<F>(points: &[Point], f: F) -> Residual
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    let vals: Vec<Result<f64, EvalError>> = points.par_iter().map(|p| f(p)).collect();
    let mut r = Residual::zero();
    for (p, v) in points.iter().zip(vals) {
        match v {
            Ok(v) => {
                let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
                r.evaluated += 1;
                if r.witness.is_none() || v > r.max {
                    r.max = v;
                    r.witness = Some(p.clone());
                }
            }
            Err(e) => r.skipped.push((p.clone(), e.to_string())),
        }
    }
    if r.evaluated == 0 {
        r.max = f64::INFINITY;
    }
    r
}

/// Largest entry of a slice of absolute values.
pub fn max_abs(vals: impl IntoIterator<Item = f64>) -> f64 {
    vals.into_iter()
        .map(|v| if v.is_nan() { f64::INFINITY } else { v.abs() })
        .fold(0.0, f64::max)
}
