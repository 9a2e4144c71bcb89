use serde::Serialize;

use super::{check_rate_params, rate_function, RateQuery};
use crate::error::{Error, Result};
use crate::exact::{ExactBudget, ReflectedPropagator};
use crate::kernel::{ModelParams, ReflectedState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    /// `P_0(|X_n^1| >= a n)`.
    pub tail_prob: f64,
    /// `-(1/n) ln tail_prob`.
    pub empirical_rate: f64,
    pub rate_inf: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub threshold: f64,
    /// `inf { Lambda*(x) : x_1 >= a }`.
    pub rate_inf: f64,
    pub rows: Vec<ConsistencyRow>,
}

fn rate_at(p: &ModelParams, x: Vec<f64>) -> Result<f64> {
    Ok(rate_function(&RateQuery::new(*p, x))?.value)
}

/// Minimizes a convex function on `[lo, hi]` by golden-section search.
fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > 1e-12 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok([f(lo)?, f(hi)?, fa, fb].into_iter().fold(f64::INFINITY, f64::min))
}

/// `inf { Lambda*(x) : x_1 >= a }` for `d` in `{1, 2}`.
fn half_space_infimum(p: &ModelParams, a: f64) -> Result<f64> {
    let v = p.speed_entry();
    if a <= v {
        return Ok(0.0);
    }
    if a > 1.0 {
        return Ok(f64::INFINITY);
    }
    // the infimum sits on the face x_1 = a by convexity
    match (p.dim(), p.lambda() == 0.0) {
        (1, _) => rate_at(p, vec![a]),
        (_, false) => golden_min(0.0, 1.0 - a, |x2| rate_at(p, vec![a, x2])),
        (_, true) => golden_min(a, 1.0, |x1| rate_at(p, vec![x1, 1.0 - x1])),
    }
}

/// Exact tail rates `-(1/n) ln P_0(|X_n^1| >= a n)` against the limit.
pub fn ldp_consistency(p: &ModelParams, a: f64, ns: &[usize]) -> Result<ConsistencyReport> {
    check_rate_params(p)?;
    if !(1..=2).contains(&p.dim()) {
        return Err(Error::invalid("dim", "the consistency table supports d = 1 or 2"));
    }
    if !a.is_finite() {
        return Err(Error::invalid("a", "must be finite"));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::invalid("n-list", "needs at least one positive horizon"));
    }
    let rate_inf = half_space_infimum(p, a)?;
    let mut order: Vec<usize> = ns.to_vec();
    order.sort_unstable();
    order.dedup();
    let horizon = *order.last().expect("nonempty");
    let mut prop = ReflectedPropagator::new(
        p,
        &ReflectedState::origin(p.dim()),
        horizon,
        &ExactBudget::default(),
    )?;
    let mut rows = Vec::with_capacity(order.len());
    for n in order {
        while prop.steps() < n {
            prop.step();
        }
        // a n can be fractional; the walk lives on integers
        let cut = (a * n as f64 - 1e-9 * n as f64).ceil().max(0.0) as i64;
        let mut tail = 0.0;
        prop.for_each(|c, m| {
            if c[0] >= cut {
                tail += m;
            }
        });
        let empirical_rate = -tail.ln() / n as f64;
        rows.push(ConsistencyRow {
            n,
            tail_prob: tail,
            empirical_rate,
            rate_inf,
            gap: empirical_rate - rate_inf,
        });
    }
    Ok(ConsistencyReport {
        threshold: a,
        rate_inf,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_outward_path() {
        let p = ModelParams::new(1, 0.25).unwrap();
        let report = ldp_consistency(&p, 1.0, &[10, 50, 100]).unwrap();
        for row in &report.rows {
            let want = (1.0 - 1.0 / row.n as f64) * 1.25f64.ln();
            assert!((row.empirical_rate - want).abs() < 1e-13, "{row:?}");
        }
    }

    #[test]
    fn typical_events_cost_nothing() {
        let p = ModelParams::new(1, 0.25).unwrap();
        let report = ldp_consistency(&p, 0.5, &[100, 400]).unwrap();
        assert_eq!(report.rate_inf, 0.0);
        assert!(report.rows[1].empirical_rate < report.rows[0].empirical_rate);
        assert!(report.rows[1].empirical_rate < 0.01);
    }

    #[test]
    fn two_dimensional_rates_decrease_toward_the_limit() {
        let p = ModelParams::new(2, 0.5).unwrap();
        let report = ldp_consistency(&p, 0.4, &[50, 100, 200]).unwrap();
        let gaps: Vec<f64> = report.rows.iter().map(|r| r.gap).collect();
        assert!(gaps.iter().all(|&g| g > 0.0));
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }
}
