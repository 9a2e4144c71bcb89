//! Large-deviation rate functions.
//!
//! `psi` is the limit of `E[exp(s . |X_n|)]^{1/n}` and `Lambda = ln psi`. The
//! rate function `Lambda*` is its Legendre transform. Below the kink
//! `s_0 = ln(lambda) / 2` a coordinate stops contributing, so the transform
//! only has to search `s >= s_0`; writing `s = s_0 + y` there gives
//!
//! ```text
//! Lambda*(x) = s_0 (x_1 + ... + x_d) - ln rho + sup_{y >= 0} [ y . x - ln((1/d) sum_i cosh y_i) ]
//! ```
//!
//! which is smooth and strictly concave in `y`.

mod closed_form;
mod clt;
mod consistency;
mod newton;
mod path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ModelParams;

pub use closed_form::rate_closed_form;
pub use clt::{clt_matrix_check, scaling_matrix};
pub use consistency::{ldp_consistency, ConsistencyReport, ConsistencyRow};
pub use path::{path_rate_functional, Breakpoint, PiecewiseLinearPath};

use newton::{bisect_tanh, projected_newton, CoshDual, ExpDual};

/// Tolerance for deciding that `x_1 + ... + x_d = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `ln psi(s)`, evaluated without overflow.
pub fn log_psi(p: &ModelParams, s: &[f64]) -> f64 {
    assert_eq!(s.len(), p.dim(), "s must have one entry per coordinate");
    let d = p.dim() as f64;
    let lambda = p.lambda();
    if lambda == 0.0 {
        return log_sum_exp(s.iter().copied()) - d.ln();
    }
    let s0 = p.s0();
    let flat = (p.rho() / d).ln();
    let scale = (d * (1.0 + lambda)).ln();
    let ln_lambda = lambda.ln();
    log_sum_exp(s.iter().flat_map(|&si| {
        if si < s0 {
            [flat, f64::NEG_INFINITY]
        } else {
            [ln_lambda - si - scale, si - scale]
        }
    }))
}

/// `psi(s) = N(s) rho / d + (1 / (d (1 + lambda))) sum_{s_i >= s_0} (lambda e^{-s_i} + e^{s_i})`
/// where `N(s)` counts the coordinates below `s_0`.
pub fn psi(p: &ModelParams, s: &[f64]) -> f64 {
    log_psi(p, s).exp()
}

/// Where `x` sits relative to the effective domain of `Lambda*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainClass {
    Interior,
    SimplexBoundary,
    CoordinateBoundary,
    Outside,
}

impl DomainClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainClass::Interior => "interior",
            DomainClass::SimplexBoundary => "simplex_boundary",
            DomainClass::CoordinateBoundary => "coordinate_boundary",
            DomainClass::Outside => "outside",
        }
    }
}

/// The `s` achieving the supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Maximizer {
    Finite { s: Vec<f64> },
    /// The supremum is the limit of the objective along `base + t direction`
    /// as `t -> infinity`.
    AtInfinity { base: Vec<f64>, direction: Vec<f64> },
    /// The transform is infinite.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateQuery {
    pub params: ModelParams,
    pub x: Vec<f64>,
}

impl RateQuery {
    pub fn new(params: ModelParams, x: Vec<f64>) -> Self {
        RateQuery { params, x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    /// `Lambda*(x)`, `f64::INFINITY` off the effective domain.
    pub value: f64,
    pub argmax: Maximizer,
    pub domain_class: DomainClass,
    pub iterations: usize,
    /// Zero when the value comes from a closed limit rather than a solve.
    pub kkt_residual: f64,
}

impl RateResult {
    fn outside() -> Self {
        RateResult {
            value: f64::INFINITY,
            argmax: Maximizer::None,
            domain_class: DomainClass::Outside,
            iterations: 0,
            kkt_residual: 0.0,
        }
    }
}

pub(crate) fn check_rate_params(p: &ModelParams) -> Result<()> {
    if p.dim() == 1 && p.lambda() == 0.0 {
        return Err(Error::invalid(
            "lambda",
            "the rate function needs lambda in (0, 1) when d = 1",
        ));
    }
    Ok(())
}

fn x_log_x(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// `Lambda*(x)` by projected Newton on the concave dual.
pub fn rate_function(q: &RateQuery) -> Result<RateResult> {
    let p = &q.params;
    let x = &q.x;
    check_rate_params(p)?;
    if x.len() != p.dim() {
        return Err(Error::invalid(
            "x",
            format!("has {} coordinates but the dimension is {}", x.len(), p.dim()),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x", "coordinates must be finite"));
    }
    let total: f64 = x.iter().sum();
    if x.iter().any(|&v| v < 0.0) || total > 1.0 + SIMPLEX_TOLERANCE {
        return Ok(RateResult::outside());
    }
    if p.lambda() == 0.0 {
        return rate_without_backtracking(p, x, total);
    }

    let d = p.dim() as f64;
    let s0 = p.s0();
    let zeros = x.iter().filter(|&&v| v == 0.0).count();
    if (total - 1.0).abs() <= SIMPLEX_TOLERANCE {
        let entropy: f64 = x.iter().map(|&v| x_log_x(v)).sum();
        return Ok(RateResult {
            value: s0 - p.rho().ln() + (2.0 * d).ln() + entropy,
            argmax: Maximizer::AtInfinity {
                base: x
                    .iter()
                    .map(|&v| if v > 0.0 { s0 + v.ln() } else { s0 })
                    .collect(),
                direction: x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
            },
            domain_class: DomainClass::SimplexBoundary,
            iterations: 0,
            kkt_residual: 0.0,
        });
    }

    let opt = if p.dim() == 1 {
        bisect_tanh(x[0])
    } else {
        let start = x.iter().map(|v| d * v).collect();
        projected_newton(&CoshDual { x }, start, true)?
    };
    let domain_class = if zeros > 0 && zeros < p.dim() {
        DomainClass::CoordinateBoundary
    } else {
        DomainClass::Interior
    };
    Ok(RateResult {
        value: (s0 * total - p.rho().ln() + opt.value).max(0.0),
        argmax: Maximizer::Finite {
            s: opt.point.iter().map(|y| s0 + y).collect(),
        },
        domain_class,
        iterations: opt.iterations,
        kkt_residual: opt.kkt_residual,
    })
}

/// The `lambda = 0` case: the walk never steps inward, `psi` is the mean of
/// `e^{s_i}` and the transform lives on the simplex.
fn rate_without_backtracking(p: &ModelParams, x: &[f64], total: f64) -> Result<RateResult> {
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Ok(RateResult::outside());
    }
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    let w: Vec<f64> = support.iter().map(|&i| x[i]).collect();
    let opt = projected_newton(
        &ExpDual {
            w: &w,
            dim: p.dim(),
        },
        vec![0.0; support.len() - 1],
        false,
    )?;
    let on_support = ExpDual::gauge_point(&opt.point);
    let mut base = vec![0.0; x.len()];
    for (k, &i) in support.iter().enumerate() {
        base[i] = on_support[k];
    }
    let (argmax, domain_class) = if support.len() == x.len() {
        (Maximizer::Finite { s: base }, DomainClass::Interior)
    } else {
        let direction = x.iter().map(|&v| if v > 0.0 { 0.0 } else { -1.0 }).collect();
        (
            Maximizer::AtInfinity { base, direction },
            DomainClass::CoordinateBoundary,
        )
    };
    Ok(RateResult {
        value: opt.value.max(0.0),
        argmax,
        domain_class,
        iterations: opt.iterations,
        kkt_residual: opt.kkt_residual,
    })
}

/// Evaluates `Lambda*` at every point of `{0, 1/k, ..., 1}^d`.
pub fn rate_grid(p: &ModelParams, steps_per_axis: usize) -> Result<Vec<(Vec<f64>, RateResult)>> {
    check_rate_params(p)?;
    if steps_per_axis == 0 {
        return Err(Error::invalid("grid", "needs at least one step per axis"));
    }
    let side = steps_per_axis + 1;
    let count = side
        .checked_pow(p.dim() as u32)
        .filter(|&c| c <= 10_000_000)
        .ok_or_else(|| Error::Resource(format!("grid of {side}^{} points", p.dim())))?;
    (0..count)
        .into_par_iter()
        .map(|mut code| {
            let x: Vec<f64> = (0..p.dim())
                .map(|_| {
                    let k = code % side;
                    code /= side;
                    k as f64 / steps_per_axis as f64
                })
                .collect();
            let r = rate_function(&RateQuery::new(*p, x.clone()))?;
            Ok((x, r))
        })
        .collect()
}
