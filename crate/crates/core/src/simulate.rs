//! Monte Carlo over the reflected chain.
//!
//! Every path owns an independent random stream: path `j` of a plan with seed
//! `seed` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `j`
//! (see [`path_rng`]). Paths are grouped into fixed blocks of
//! [`PATHS_PER_BLOCK`]; blocks may run on any number of threads, and their
//! partial sums are combined in block order. A plan therefore produces the
//! same bits whatever the size of the thread pool.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{ModelParams, ReflectedState};

/// Paths per reduction block. Part of the reproducibility contract: changing
/// it changes floating-point summation order.
pub const PATHS_PER_BLOCK: usize = 256;

/// Default cap on `paths * (dim + 1)`, the number of per-path values a batch
/// keeps in memory.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 28;

/// What to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub params: ModelParams,
    pub start: ReflectedState,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub memory_budget: usize,
}

impl SimPlan {
    pub fn new(
        params: ModelParams,
        start: ReflectedState,
        steps: usize,
        paths: usize,
        seed: u64,
    ) -> Result<Self> {
        if start.dim() != params.dim() {
            return Err(Error::invalid(
                "start",
                format!(
                    "has {} coordinates but the dimension is {}",
                    start.dim(),
                    params.dim()
                ),
            ));
        }
        if paths == 0 {
            return Err(Error::invalid("paths", "at least one path is required"));
        }
        Ok(SimPlan {
            params,
            start,
            steps,
            paths,
            seed,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        })
    }

    pub fn with_memory_budget(mut self, budget: usize) -> Self {
        self.memory_budget = budget;
        self
    }
}

/// Random stream of path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Aggregate statistics of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub steps: usize,
    pub paths: usize,
    /// Average of `|X_n^i| / n`.
    pub mean_endpoint: Vec<f64>,
    /// Second-moment matrix of `(|X_n| - n v) / sqrt(n)` about the known mean.
    pub cov_scaled: Vec<Vec<f64>>,
    /// Per path, the number of times `k = 0..=n` with some coordinate at 0.
    pub boundary_visit_counts: Vec<u64>,
    /// Average of the increments `|X_k^i| - |X_{k-1}^i| - f_i(X_{k-1})`.
    pub martingale_mean: Vec<f64>,
    /// Pooled variance of the same increments.
    pub martingale_variance: Vec<f64>,
}

/// Walker on the reflected chain with the move table precomputed per number
/// of zero coordinates.
struct Walker {
    coords: Vec<u64>,
    zeros: usize,
    // indexed by zero count
    from_zero: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
    drift_at_zero: Vec<f64>,
    drift_off_zero: Vec<f64>,
    up_share: f64,
}

impl Walker {
    fn new(params: &ModelParams, start: &ReflectedState) -> Self {
        let d = params.dim();
        let weights: Vec<_> = (0..=d).map(|k| params.reflected_weights(k)).collect();
        let lambda = params.lambda();
        Walker {
            coords: start.0.clone(),
            zeros: start.zeros(),
            from_zero: weights.iter().map(|w| w.from_zero).collect(),
            up: weights.iter().map(|w| w.up).collect(),
            down: weights.iter().map(|w| w.down).collect(),
            drift_at_zero: (0..=d).map(|k| 2.0 / params.normalizer(k)).collect(),
            drift_off_zero: (0..=d)
                .map(|k| (1.0 - lambda) / params.normalizer(k))
                .collect(),
            up_share: 1.0 / (1.0 + lambda),
        }
    }

    /// Draws a move; returns the axis and whether it goes up.
    #[inline]
    fn sample(&self, u: f64) -> (usize, bool) {
        let d = self.coords.len();
        if self.zeros == 0 {
            // Off the boundary every axis carries mass 1/d.
            let scaled = u * d as f64;
            let axis = (scaled as usize).min(d - 1);
            return (axis, scaled - (axis as f64) < self.up_share);
        }
        let k = self.zeros;
        let mut acc = 0.0;
        for (axis, &c) in self.coords.iter().enumerate() {
            if c == 0 {
                acc += self.from_zero[k];
                if u < acc {
                    return (axis, true);
                }
            } else {
                acc += self.up[k];
                if u < acc {
                    return (axis, true);
                }
                acc += self.down[k];
                if u < acc {
                    return (axis, false);
                }
            }
        }
        // u fell into the rounding gap above the last cumulative weight.
        let axis = d - 1;
        (axis, self.coords[axis] == 0 || self.down[k] == 0.0)
    }

    #[inline]
    fn apply(&mut self, axis: usize, up: bool) {
        let c = &mut self.coords[axis];
        if up {
            if *c == 0 {
                self.zeros -= 1;
            }
            *c += 1;
        } else {
            *c -= 1;
            if *c == 0 {
                self.zeros += 1;
            }
        }
    }

    #[inline]
    fn drift(&self, axis: usize) -> f64 {
        if self.coords[axis] == 0 {
            self.drift_at_zero[self.zeros]
        } else {
            self.drift_off_zero[self.zeros]
        }
    }
}

/// Partial sums over one block of paths.
struct BlockSums {
    endpoint: Vec<f64>,
    outer: Vec<f64>,
    xi: Vec<f64>,
    xi_sq: Vec<f64>,
    boundary: Vec<u64>,
}

fn run_block(plan: &SimPlan, first: usize, last: usize) -> BlockSums {
    let d = plan.params.dim();
    let n = plan.steps;
    let center = n as f64 * plan.params.speed_entry();
    let scale = (n as f64).sqrt();
    let mut sums = BlockSums {
        endpoint: vec![0.0; d],
        outer: vec![0.0; d * d],
        xi: vec![0.0; d],
        xi_sq: vec![0.0; d],
        boundary: Vec::with_capacity(last - first),
    };
    let mut path_xi = vec![0.0; d];
    let mut path_xi_sq = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for path in first..last {
        let mut rng = path_rng(plan.seed, path as u64);
        let mut walker = Walker::new(&plan.params, &plan.start);
        let mut visits = u64::from(walker.zeros > 0);
        path_xi.iter_mut().for_each(|v| *v = 0.0);
        path_xi_sq.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n {
            let u: f64 = rng.gen();
            let (axis, up) = walker.sample(u);
            for i in 0..d {
                let step = if i == axis {
                    if up {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                let xi = step - walker.drift(i);
                path_xi[i] += xi;
                path_xi_sq[i] += xi * xi;
            }
            walker.apply(axis, up);
            visits += u64::from(walker.zeros > 0);
        }
        sums.boundary.push(visits);
        for i in 0..d {
            let y = walker.coords[i] as f64;
            sums.endpoint[i] += y / n as f64;
            centered[i] = (y - center) / scale;
            sums.xi[i] += path_xi[i];
            sums.xi_sq[i] += path_xi_sq[i];
        }
        for i in 0..d {
            for j in 0..d {
                sums.outer[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    sums
}

/// Simulates `plan.paths` independent paths of `plan.steps` steps and reduces
/// them to a [`BatchSummary`].
pub fn simulate_batch(plan: &SimPlan) -> Result<BatchSummary> {
    if plan.steps == 0 {
        return Err(Error::invalid("steps", "at least one step is required"));
    }
    let d = plan.params.dim();
    let footprint = plan.paths.saturating_mul(d + 1);
    if footprint > plan.memory_budget {
        return Err(Error::Resource(format!(
            "{} paths in dimension {d} need {footprint} slots, budget is {}",
            plan.paths, plan.memory_budget
        )));
    }
    let blocks = plan.paths.div_ceil(PATHS_PER_BLOCK);
    let partials: Vec<BlockSums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let first = b * PATHS_PER_BLOCK;
            let last = (first + PATHS_PER_BLOCK).min(plan.paths);
            run_block(plan, first, last)
        })
        .collect();

    let mut endpoint = vec![0.0; d];
    let mut outer = vec![0.0; d * d];
    let mut xi = vec![0.0; d];
    let mut xi_sq = vec![0.0; d];
    let mut boundary = Vec::with_capacity(plan.paths);
    for block in partials {
        for i in 0..d {
            endpoint[i] += block.endpoint[i];
            xi[i] += block.xi[i];
            xi_sq[i] += block.xi_sq[i];
        }
        for (o, b) in outer.iter_mut().zip(&block.outer) {
            *o += b;
        }
        boundary.extend(block.boundary);
    }

    let m = plan.paths as f64;
    let increments = m * plan.steps as f64;
    let martingale_mean: Vec<f64> = xi.iter().map(|s| s / increments).collect();
    let martingale_variance = xi_sq
        .iter()
        .zip(&martingale_mean)
        .map(|(sq, mean)| sq / increments - mean * mean)
        .collect();
    let mut cov_scaled = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            // average the two triangles so the result is exactly symmetric
            let v = 0.5 * (outer[i * d + j] + outer[j * d + i]) / m;
            cov_scaled[i][j] = v;
            cov_scaled[j][i] = v;
        }
    }
    Ok(BatchSummary {
        steps: plan.steps,
        paths: plan.paths,
        mean_endpoint: endpoint.iter().map(|s| s / m).collect(),
        cov_scaled,
        boundary_visit_counts: boundary,
        martingale_mean,
        martingale_variance,
    })
}

/// Full path of a single-path plan, `steps + 1` states starting at `start`.
///
/// Uses the same stream as path 0 of a batch with the same seed.
pub fn trajectory(plan: &SimPlan) -> Result<Vec<ReflectedState>> {
    if plan.paths != 1 {
        return Err(Error::invalid(
            "paths",
            format!("a trajectory needs exactly one path, got {}", plan.paths),
        ));
    }
    let mut rng = path_rng(plan.seed, 0);
    let mut walker = Walker::new(&plan.params, &plan.start);
    let mut out = Vec::with_capacity(plan.steps + 1);
    out.push(plan.start.clone());
    for _ in 0..plan.steps {
        let (axis, up) = walker.sample(rng.gen());
        walker.apply(axis, up);
        out.push(ReflectedState(walker.coords.clone()));
    }
    Ok(out)
}

/// Sample mean and variance of the martingale increments, per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleDiagnostic {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Number of increments pooled per coordinate, `n * m`.
    pub increments: u64,
}

impl MartingaleDiagnostic {
    /// Two-sided 95% Hoeffding radius for the mean of increments bounded by 2
    /// in absolute value: `4 / sqrt(n m)`.
    pub fn hoeffding_radius(&self) -> f64 {
        4.0 / (self.increments as f64).sqrt()
    }
}

pub fn martingale_diagnostic(plan: &SimPlan) -> Result<MartingaleDiagnostic> {
    let summary = simulate_batch(plan)?;
    Ok(MartingaleDiagnostic {
        mean: summary.martingale_mean,
        variance: summary.martingale_variance,
        increments: (plan.steps as u64) * (plan.paths as u64),
    })
}

/// Per-path boundary visit counts and their histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVisits {
    pub per_path: Vec<u64>,
    /// visit count -> number of paths
    pub histogram: BTreeMap<u64, u64>,
}

pub fn boundary_visits(plan: &SimPlan) -> Result<BoundaryVisits> {
    let per_path = simulate_batch(plan)?.boundary_visit_counts;
    let mut histogram = BTreeMap::new();
    for &c in &per_path {
        *histogram.entry(c).or_insert(0) += 1;
    }
    Ok(BoundaryVisits {
        per_path,
        histogram,
    })
}

/// Writes a trajectory as CSV with header `step,x1,...,xd`.
pub fn write_trajectory_csv<W: Write>(out: W, path: &[ReflectedState]) -> csv::Result<()> {
    let d = path.first().map_or(0, |s| s.dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (k, state) in path.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(state.0.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
