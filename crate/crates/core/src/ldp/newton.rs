//! Maximization of smooth concave duals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const KKT_TOLERANCE: f64 = 1e-10;
pub(crate) const MAX_ITERATIONS: usize = 100;
pub(crate) const MAX_HALVINGS: usize = 40;

/// Result of a maximization.
#[derive(Debug, Clone)]
pub(crate) struct Optimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Value, gradient and Hessian of the objective.
pub(crate) trait Concave {
    fn value(&self, y: &[f64]) -> f64;
    fn gradient_hessian(&self, y: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

fn kkt(y: &[f64], g: &DVector<f64>, bounded: bool) -> f64 {
    y.iter()
        .zip(g.iter())
        .map(|(&yi, &gi)| {
            if bounded && yi <= 0.0 {
                gi.max(0.0)
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Projected Newton ascent from `start`, with `y >= 0` enforced when
/// `bounded`. Coordinates sitting at the bound with a nonpositive gradient
/// are frozen for the step.
pub(crate) fn projected_newton<F: Concave>(f: &F, start: Vec<f64>, bounded: bool) -> Result<Optimum> {
    let n = start.len();
    let project = |v: f64| if bounded { v.max(0.0) } else { v };
    let mut y: Vec<f64> = start.into_iter().map(project).collect();
    let mut fy = f.value(&y);
    for iter in 0..=MAX_ITERATIONS {
        let (g, h) = f.gradient_hessian(&y);
        let residual = kkt(&y, &g, bounded);
        if residual <= KKT_TOLERANCE {
            return Ok(Optimum {
                point: y,
                value: fy,
                iterations: iter,
                kkt_residual: residual,
            });
        }
        if iter == MAX_ITERATIONS {
            return Err(Error::Numerical(format!(
                "Newton stopped after {MAX_ITERATIONS} iterations with KKT residual {residual:e}"
            )));
        }
        let free: Vec<usize> = (0..n)
            .filter(|&i| !(bounded && y[i] <= 0.0 && g[i] <= 0.0))
            .collect();
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let neg_h = DMatrix::from_fn(free.len(), free.len(), |a, b| -h[(free[a], free[b])]);
        let step = match neg_h.cholesky() {
            Some(ch) => ch.solve(&gf),
            None => gf.clone(),
        };

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = y.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = project(y[i] + t * step[k]);
            }
            let gain: f64 = free.iter().map(|&i| g[i] * (trial[i] - y[i])).sum();
            let ft = f.value(&trial);
            let slack = 4.0 * f64::EPSILON * fy.abs().max(1.0);
            if ft.is_finite() && ft >= fy + 1e-4 * gain - slack {
                y = trial;
                fy = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical(format!(
                "line search failed after {MAX_HALVINGS} halvings with KKT residual {residual:e}"
            )));
        }
    }
    unreachable!("the loop returns on its last iteration")
}

/// `y . x - ln((1/d) sum_i cosh y_i)`.
pub(crate) struct CoshDual<'a> {
    pub x: &'a [f64],
}

impl CoshDual<'_> {
    /// `(m, e^{y_i - m} + e^{-y_i - m})` with `m = max |y_i|`.
    fn scaled(y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let plus: Vec<f64> = y.iter().map(|v| (v - m).exp()).collect();
        let minus: Vec<f64> = y.iter().map(|v| (-v - m).exp()).collect();
        (m, plus, minus)
    }

    pub(crate) fn log_mean_cosh(y: &[f64]) -> f64 {
        let (m, plus, minus) = Self::scaled(y);
        let total: f64 = plus.iter().zip(&minus).map(|(a, b)| a + b).sum();
        m + (total / (2 * y.len()) as f64).ln()
    }
}

impl Concave for CoshDual<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        let dot: f64 = y.iter().zip(self.x).map(|(a, b)| a * b).sum();
        dot - Self::log_mean_cosh(y)
    }

    fn gradient_hessian(&self, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (_, plus, minus) = Self::scaled(y);
        let total: f64 = plus.iter().zip(&minus).map(|(a, b)| a + b).sum();
        let sinh: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / total).collect();
        let cosh: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a + b) / total).collect();
        let n = y.len();
        let g = DVector::from_fn(n, |i, _| self.x[i] - sinh[i]);
        let h = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { cosh[i] } else { 0.0 };
            sinh[i] * sinh[j] - diag
        });
        (g, h)
    }
}

/// `sum_i s_i w_i - ln((1/d) sum_i e^{s_i})` over the support, with the
/// first support coordinate held at zero.
pub(crate) struct ExpDual<'a> {
    /// Positive weights on the support, first one is the gauge coordinate.
    pub w: &'a [f64],
    pub dim: usize,
}

impl ExpDual<'_> {
    fn full(y: &[f64]) -> Vec<f64> {
        std::iter::once(0.0).chain(y.iter().copied()).collect()
    }

    fn softmax(s: &[f64]) -> (f64, Vec<f64>) {
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = e.iter().sum();
        (m + total.ln(), e.into_iter().map(|v| v / total).collect())
    }

    pub(crate) fn gauge_point(y: &[f64]) -> Vec<f64> {
        Self::full(y)
    }
}

impl Concave for ExpDual<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        let s = Self::full(y);
        let dot: f64 = s.iter().zip(self.w).map(|(a, b)| a * b).sum();
        dot - Self::softmax(&s).0 + (self.dim as f64).ln()
    }

    fn gradient_hessian(&self, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let s = Self::full(y);
        let (_, p) = Self::softmax(&s);
        let n = y.len();
        let g = DVector::from_fn(n, |i, _| self.w[i + 1] - p[i + 1]);
        let h = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { p[i + 1] } else { 0.0 };
            p[i + 1] * p[j + 1] - diag
        });
        (g, h)
    }
}

/// Solves `tanh y = x` for `0 <= x < 1` by bisection.
pub(crate) fn bisect_tanh(x: f64) -> Optimum {
    let mut lo = 0.0f64;
    let mut hi = if x == 0.0 { 0.0 } else { 1.0f64 };
    let mut iterations = 0;
    while hi.tanh() < x && hi < 1e3 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
    }
    while hi - lo > f64::EPSILON * hi.max(1.0) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid.tanh() < x {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let y = 0.5 * (lo + hi);
    let point = vec![y];
    Optimum {
        value: CoshDual { x: &[x] }.value(&point),
        kkt_residual: (x - y.tanh()).abs(),
        point,
        iterations,
    }
}
