use serde::Serialize;

use super::{check_dim, Codec, Coordinates, Evolver};
use crate::error::{Error, Result};
use crate::kernel::{drifted_moves, full_moves, ModelParams, Move, ReflectedState};

/// The worst cell at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepExtreme {
    pub n: usize,
    pub extreme: f64,
    pub cells: u64,
}

/// Outcome of the upper comparison `P_0(X_n = k) <= P(Z_n = k | Z_0 = 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperReport {
    /// Largest `P_0(X_n = k) - P(Z_n = k)`; nonpositive when the bound holds.
    pub max_violation: f64,
    pub cells_checked: u64,
    pub per_step: Vec<StepExtreme>,
}

/// Outcome of the lower comparison `P_z(X_n = k) >= n^{-d} P(Z_n = k | Z_0 = z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerReport {
    /// Smallest `P_z(X_n = k) - n^{-d} P(Z_n = k)`; nonnegative when the bound holds.
    pub min_slack: f64,
    pub cells_checked: u64,
    pub per_step: Vec<StepExtreme>,
}

const MAX_DOMINATION_DIM: usize = 3;

fn check_small_dim(p: &ModelParams) -> Result<()> {
    if p.dim() > MAX_DOMINATION_DIM {
        return Err(Error::invalid(
            "dim",
            format!("domination checks support d <= {MAX_DOMINATION_DIM}"),
        ));
    }
    Ok(())
}

type Both = (
    Evolver<Box<dyn FnMut(&[i64], &mut Vec<Move>)>>,
    Evolver<Box<dyn FnMut(&[i64], &mut Vec<Move>)>>,
);

/// The full chain and the comparison walk from the same point, on one codec.
fn evolvers(p: &ModelParams, start: &[i64], n_max: usize) -> Result<Both> {
    let reach = start.iter().copied().max().unwrap_or(0) + n_max as i64;
    let codec = Codec::new(p.dim(), -reach, reach)?;
    let (a, b) = (*p, *p);
    let full = Evolver::new(
        codec.clone(),
        start,
        Box::new(move |c: &[i64], out: &mut Vec<Move>| full_moves(&a, c, out))
            as Box<dyn FnMut(&[i64], &mut Vec<Move>)>,
    );
    let drifted = Evolver::new(
        codec,
        start,
        Box::new(move |_: &[i64], out: &mut Vec<Move>| drifted_moves(&b, out))
            as Box<dyn FnMut(&[i64], &mut Vec<Move>)>,
    );
    Ok((full, drifted))
}

/// Visits every `k` in `Z_+^d` charged by either law, with both masses.
fn for_each_orthant_cell<M, N>(x: &Evolver<M>, z: &Evolver<N>, mut f: impl FnMut(f64, f64))
where
    M: FnMut(&[i64], &mut Vec<Move>),
    N: FnMut(&[i64], &mut Vec<Move>),
{
    let mut coords = vec![0; x.dim];
    let in_orthant = |key: u64, coords: &mut Vec<i64>| {
        x.codec.decode(key, coords);
        coords.iter().all(|&c| c >= 0)
    };
    for (&key, &px) in x.mass() {
        if in_orthant(key, &mut coords) {
            f(px, z.mass().get(&key).copied().unwrap_or(0.0));
        }
    }
    for (&key, &pz) in z.mass() {
        if !x.mass().contains_key(&key) && in_orthant(key, &mut coords) {
            f(0.0, pz);
        }
    }
}

/// Checks the upper comparison for every horizon `1..=n_max` from the origin.
pub fn check_domination_upper(p: &ModelParams, n_max: usize) -> Result<UpperReport> {
    check_small_dim(p)?;
    let (mut x, mut z) = evolvers(p, &vec![0; p.dim()], n_max)?;
    let mut report = UpperReport {
        max_violation: f64::NEG_INFINITY,
        cells_checked: 0,
        per_step: Vec::with_capacity(n_max),
    };
    for n in 1..=n_max {
        x.step();
        z.step();
        let mut step = StepExtreme {
            n,
            extreme: f64::NEG_INFINITY,
            cells: 0,
        };
        for_each_orthant_cell(&x, &z, |px, pz| {
            step.extreme = step.extreme.max(px - pz);
            step.cells += 1;
        });
        report.max_violation = report.max_violation.max(step.extreme);
        report.cells_checked += step.cells;
        report.per_step.push(step);
    }
    Ok(report)
}

/// Checks the lower comparison for every horizon `1..=n_max` from `z`, which
/// must have every coordinate positive.
pub fn check_domination_lower(
    p: &ModelParams,
    z: &ReflectedState,
    n_max: usize,
) -> Result<LowerReport> {
    check_small_dim(p)?;
    check_dim(p, z.dim(), "start")?;
    if z.on_boundary() {
        return Err(Error::invalid(
            "start",
            "every coordinate must be at least 1",
        ));
    }
    let (mut x, mut w) = evolvers(p, &z.coords(), n_max)?;
    let mut report = LowerReport {
        min_slack: f64::INFINITY,
        cells_checked: 0,
        per_step: Vec::with_capacity(n_max),
    };
    for n in 1..=n_max {
        x.step();
        w.step();
        let factor = (n as f64).powi(-(p.dim() as i32));
        let mut step = StepExtreme {
            n,
            extreme: f64::INFINITY,
            cells: 0,
        };
        for_each_orthant_cell(&x, &w, |px, pz| {
            step.extreme = step.extreme.min(px - factor * pz);
            step.cells += 1;
        });
        report.min_slack = report.min_slack.min(step.extreme);
        report.cells_checked += step.cells;
        report.per_step.push(step);
    }
    Ok(report)
}
