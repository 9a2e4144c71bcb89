//! Exact finite-horizon laws.
//!
//! The reachable set after `n` steps is finite, so the law of the chain can be
//! pushed forward step by step without truncation. States are packed into
//! `u64` keys (mixed radix over a box that contains every reachable point) and
//! the mass lives in a hash map that is swapped between steps.

mod ballot;
mod domination;
mod oracle;

use std::collections::BTreeMap;
use std::io::Write;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{
    drifted_moves, full_moves, reflected_moves, LatticePoint, ModelParams, Move, ReflectedState,
};

pub use ballot::{ballot_counts, BallotCount, MAX_BALLOT_STEPS};
pub use domination::{
    check_domination_lower, check_domination_upper, LowerReport, StepExtreme, UpperReport,
};
pub use oracle::{enumerate_oracle, RationalDistribution};

/// Limits on exact computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactBudget {
    /// Upper bound on the number of states a propagation may reach.
    pub max_states: u64,
    /// Upper bound on `(2d)^n` for path enumeration.
    pub max_paths: u64,
}

impl Default for ExactBudget {
    fn default() -> Self {
        ExactBudget {
            max_states: 20_000_000,
            max_paths: 1 << 24,
        }
    }
}

/// Coordinates of a state type, for CSV output and key packing.
pub trait Coordinates {
    fn coords(&self) -> Vec<i64>;
}

impl Coordinates for LatticePoint {
    fn coords(&self) -> Vec<i64> {
        self.0.clone()
    }
}

impl Coordinates for ReflectedState {
    fn coords(&self) -> Vec<i64> {
        self.0.iter().map(|&c| c as i64).collect()
    }
}

/// A finitely supported probability law, ordered lexicographically by state.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDistribution<K> {
    dim: usize,
    mass: BTreeMap<K, f64>,
}

impl<K: Ord> SparseDistribution<K> {
    pub fn from_map(dim: usize, mass: BTreeMap<K, f64>) -> Self {
        SparseDistribution { dim, mass }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mass at `state`; zero off the support.
    pub fn get(&self, state: &K) -> f64 {
        self.mass.get(state).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.mass.iter().map(|(k, &p)| (k, p))
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn into_map(self) -> BTreeMap<K, f64> {
        self.mass
    }
}

impl SparseDistribution<LatticePoint> {
    /// Law of the coordinate-wise absolute value.
    pub fn reflect(&self) -> SparseDistribution<ReflectedState> {
        let mut mass = BTreeMap::new();
        for (k, p) in self.iter() {
            *mass.entry(k.reflect()).or_insert(0.0) += p;
        }
        SparseDistribution::from_map(self.dim, mass)
    }
}

impl<K: Ord + Coordinates> SparseDistribution<K> {
    /// CSV with header `x1,...,xd,prob`, rows in lexicographic state order.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        header.push("prob".into());
        w.write_record(&header)?;
        for (k, p) in self.iter() {
            let mut row: Vec<String> = k.coords().iter().map(|c| c.to_string()).collect();
            row.push(p.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mixed-radix packing of points of a box `[lo, hi]^d` into `u64`.
#[derive(Debug, Clone)]
pub(crate) struct Codec {
    lo: i64,
    base: u64,
    strides: Vec<u64>,
}

impl Codec {
    pub(crate) fn new(dim: usize, lo: i64, hi: i64) -> Result<Self> {
        let base = (hi - lo + 1) as u64;
        let mut strides = Vec::with_capacity(dim);
        let mut stride: u64 = 1;
        for _ in 0..dim {
            strides.push(stride);
            stride = stride.checked_mul(base).ok_or_else(|| {
                Error::Resource(format!(
                    "a box of side {base} in dimension {dim} does not fit in 64-bit keys"
                ))
            })?;
        }
        Ok(Codec { lo, base, strides })
    }

    pub(crate) fn encode(&self, coords: &[i64]) -> u64 {
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c - self.lo) as u64 * s)
            .sum()
    }

    pub(crate) fn decode(&self, mut key: u64, out: &mut [i64]) {
        for c in out.iter_mut() {
            *c = (key % self.base) as i64 + self.lo;
            key /= self.base;
        }
    }

    #[inline]
    fn shift(&self, key: u64, axis: usize, delta: i64) -> u64 {
        if delta > 0 {
            key + self.strides[axis]
        } else {
            key - self.strides[axis]
        }
    }
}

/// Number of points of `Z^d` within l1 distance `radius` of a point.
fn ball_size(dim: usize, radius: u64) -> f64 {
    // sum_k 2^k C(d,k) C(r,k)
    let mut total = 0.0;
    let mut c_dk = 1.0;
    let mut c_rk = 1.0;
    for k in 0..=dim as u64 {
        if k > 0 {
            c_dk *= (dim as u64 - k + 1) as f64 / k as f64;
            c_rk *= (radius as f64 - k as f64 + 1.0).max(0.0) / k as f64;
        }
        total += 2f64.powi(k as i32) * c_dk * c_rk;
    }
    total
}

/// Number of points of `Z_+^d` with coordinate sum at most `total`.
fn simplex_size(dim: usize, total: u64) -> f64 {
    // C(total + d, d)
    (1..=dim as u64).fold(1.0, |acc, k| acc * (total + k) as f64 / k as f64)
}

fn check_states(estimate: f64, budget: &ExactBudget) -> Result<()> {
    if estimate > budget.max_states as f64 {
        return Err(Error::Resource(format!(
            "up to {estimate:.0} reachable states, budget is {}",
            budget.max_states
        )));
    }
    Ok(())
}

/// Pushes a point mass forward through a nearest-neighbour kernel.
pub(crate) struct Evolver<M> {
    codec: Codec,
    dim: usize,
    current: FxHashMap<u64, f64>,
    next: FxHashMap<u64, f64>,
    moves: M,
    coords: Vec<i64>,
    buf: Vec<Move>,
}

impl<M: FnMut(&[i64], &mut Vec<Move>)> Evolver<M> {
    pub(crate) fn new(codec: Codec, start: &[i64], moves: M) -> Self {
        let mut current = FxHashMap::default();
        current.insert(codec.encode(start), 1.0);
        Evolver {
            dim: start.len(),
            codec,
            current,
            next: FxHashMap::default(),
            moves,
            coords: vec![0; start.len()],
            buf: Vec::new(),
        }
    }

    pub(crate) fn step(&mut self) {
        self.next.clear();
        self.next.reserve(self.current.len() * 2);
        for (&key, &mass) in &self.current {
            self.codec.decode(key, &mut self.coords);
            (self.moves)(&self.coords, &mut self.buf);
            for &(axis, delta, w) in &self.buf {
                let target = self.codec.shift(key, axis, delta);
                *self.next.entry(target).or_insert(0.0) += mass * w;
            }
        }
        std::mem::swap(&mut self.current, &mut self.next);
    }

    pub(crate) fn mass(&self) -> &FxHashMap<u64, f64> {
        &self.current
    }

    /// Multiplies every mass by `factor`.
    pub(crate) fn scale(&mut self, factor: f64) {
        self.current.values_mut().for_each(|m| *m *= factor);
    }

    pub(crate) fn mass_at(&self, coords: &[i64]) -> f64 {
        self.current
            .get(&self.codec.encode(coords))
            .copied()
            .unwrap_or(0.0)
    }

    pub(crate) fn decode(&self, key: u64) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        self.codec.decode(key, &mut out);
        out
    }

    pub(crate) fn collect<K: Ord>(&self, make: impl Fn(Vec<i64>) -> K) -> SparseDistribution<K> {
        let mass = self
            .current
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(&k, &p)| (make(self.decode(k)), p))
            .collect();
        SparseDistribution::from_map(self.dim, mass)
    }
}

fn check_dim(p: &ModelParams, dim: usize, name: &'static str) -> Result<()> {
    if dim != p.dim() {
        return Err(Error::invalid(
            name,
            format!("has {dim} coordinates but the dimension is {}", p.dim()),
        ));
    }
    Ok(())
}

type BoxedMoves = Box<dyn FnMut(&[i64], &mut Vec<Move>) + Send>;

/// Streaming propagation of the reflected chain, one step at a time.
pub struct ReflectedPropagator {
    inner: Evolver<BoxedMoves>,
    steps: usize,
    horizon: usize,
}

impl ReflectedPropagator {
    /// Prepares to run at most `horizon` steps from `start`.
    pub fn new(
        p: &ModelParams,
        start: &ReflectedState,
        horizon: usize,
        budget: &ExactBudget,
    ) -> Result<Self> {
        check_dim(p, start.dim(), "start")?;
        let reach = start.norm() + horizon as u64;
        check_states(simplex_size(p.dim(), reach), budget)?;
        let codec = Codec::new(p.dim(), 0, reach as i64)?;
        let params = *p;
        let moves: BoxedMoves =
            Box::new(move |c: &[i64], out: &mut Vec<Move>| reflected_moves(&params, c, out));
        Ok(ReflectedPropagator {
            inner: Evolver::new(codec, &start.coords(), moves),
            steps: 0,
            horizon,
        })
    }

    /// Advances one step. Panics past the horizon given at construction.
    pub fn step(&mut self) {
        assert!(self.steps < self.horizon, "propagator horizon exceeded");
        self.inner.step();
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mass_at(&self, state: &ReflectedState) -> f64 {
        self.inner.mass_at(&state.coords())
    }

    /// Calls `f(coords, mass)` for every state in the current support.
    pub fn for_each(&self, mut f: impl FnMut(&[i64], f64)) {
        let mut coords = vec![0; self.inner.dim];
        for (&k, &m) in self.inner.mass() {
            self.inner.codec.decode(k, &mut coords);
            f(&coords, m);
        }
    }

    pub fn distribution(&self) -> SparseDistribution<ReflectedState> {
        self.inner
            .collect(|c| ReflectedState(c.into_iter().map(|v| v as u64).collect()))
    }
}

/// Exact law of the reflected chain after `n` steps from `start`.
pub fn propagate(
    p: &ModelParams,
    start: &ReflectedState,
    n: usize,
) -> Result<SparseDistribution<ReflectedState>> {
    propagate_with(p, start, n, &ExactBudget::default())
}

pub fn propagate_with(
    p: &ModelParams,
    start: &ReflectedState,
    n: usize,
    budget: &ExactBudget,
) -> Result<SparseDistribution<ReflectedState>> {
    let mut prop = ReflectedPropagator::new(p, start, n, budget)?;
    for _ in 0..n {
        prop.step();
    }
    Ok(prop.distribution())
}

fn lattice_evolver<M: FnMut(&[i64], &mut Vec<Move>)>(
    p: &ModelParams,
    start: &LatticePoint,
    n: usize,
    budget: &ExactBudget,
    moves: M,
) -> Result<Evolver<M>> {
    check_dim(p, start.dim(), "start")?;
    check_states(ball_size(p.dim(), n as u64), budget)?;
    let reach = start.0.iter().map(|c| c.abs()).max().unwrap_or(0) + n as i64;
    let codec = Codec::new(p.dim(), -reach, reach)?;
    Ok(Evolver::new(codec, &start.0, moves))
}

/// Exact law of the walk on `Z^d` after `n` steps from `start`.
pub fn propagate_full(
    p: &ModelParams,
    start: &LatticePoint,
    n: usize,
) -> Result<SparseDistribution<LatticePoint>> {
    let params = *p;
    let mut ev = lattice_evolver(p, start, n, &ExactBudget::default(), |c, out| {
        full_moves(&params, c, out)
    })?;
    for _ in 0..n {
        ev.step();
    }
    Ok(ev.collect(LatticePoint))
}

/// Exact law of the comparison walk after `n` steps from `start`.
pub fn propagate_drifted(
    p: &ModelParams,
    start: &LatticePoint,
    n: usize,
) -> Result<SparseDistribution<LatticePoint>> {
    let params = *p;
    let mut ev = lattice_evolver(p, start, n, &ExactBudget::default(), |_, out| {
        drifted_moves(&params, out)
    })?;
    for _ in 0..n {
        ev.step();
    }
    Ok(ev.collect(LatticePoint))
}

/// Largest `|s_i|` accepted by [`log_mgf`]; keeps `exp(s_i)` finite.
pub const MAX_TILT: f64 = 500.0;

/// `ln E_x[exp(sum_i s_i |X_n^i|)]` for the chain started at `start`.
///
/// The law is propagated under the exponential tilt `exp(s . (y' - y))` and
/// renormalized after every step; the logarithms of the normalizers add up to
/// the answer, so nothing overflows however large `n |s|` gets.
pub fn log_mgf(p: &ModelParams, start: &ReflectedState, n: usize, s: &[f64]) -> Result<f64> {
    check_dim(p, s.len(), "s")?;
    check_dim(p, start.dim(), "start")?;
    if let Some(bad) = s.iter().find(|v| !v.is_finite() || v.abs() > MAX_TILT) {
        return Err(Error::invalid(
            "s",
            format!("entries must be finite with |s_i| <= {MAX_TILT}, got {bad}"),
        ));
    }
    let offset: f64 = s.iter().zip(&start.0).map(|(si, &x)| si * x as f64).sum();
    if s.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let up: Vec<f64> = s.iter().map(|v| v.exp()).collect();
    let down: Vec<f64> = s.iter().map(|v| (-v).exp()).collect();
    let params = *p;
    let reach = start.norm() + n as u64;
    check_states(simplex_size(p.dim(), reach), &ExactBudget::default())?;
    let codec = Codec::new(p.dim(), 0, reach as i64)?;
    let mut ev = Evolver::new(codec, &start.coords(), |c: &[i64], out: &mut Vec<Move>| {
        reflected_moves(&params, c, out);
        for m in out.iter_mut() {
            m.2 *= if m.1 > 0 { up[m.0] } else { down[m.0] };
        }
    });
    let mut log_norm = offset;
    for _ in 0..n {
        ev.step();
        let total: f64 = ev.mass().values().sum();
        log_norm += total.ln();
        ev.scale(1.0 / total);
    }
    Ok(log_norm)
}

/// `P_0(X_{2n} = 0)`.
pub fn return_probability(p: &ModelParams, half_steps: usize) -> Result<f64> {
    if half_steps == 0 {
        return Ok(1.0);
    }
    Ok(*return_probabilities(p, half_steps)?
        .last()
        .expect("nonempty"))
}

/// `P_0(X_{2k} = 0)` for `k = 1..=max_half_steps`, from a single propagation.
pub fn return_probabilities(p: &ModelParams, max_half_steps: usize) -> Result<Vec<f64>> {
    let origin = ReflectedState::origin(p.dim());
    let mut prop =
        ReflectedPropagator::new(p, &origin, 2 * max_half_steps, &ExactBudget::default())?;
    let mut out = Vec::with_capacity(max_half_steps);
    for _ in 0..max_half_steps {
        prop.step();
        prop.step();
        out.push(prop.mass_at(&origin));
    }
    Ok(out)
}

/// One row of a return-probability table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnRow {
    pub half_steps: usize,
    pub prob: f64,
    pub log_prob: f64,
    /// `ln p - 2n ln rho + (3d/2) ln n`, bounded when `p ~ rho^{2n} n^{-3d/2}`.
    pub normalized: f64,
}

pub fn return_table(p: &ModelParams, max_half_steps: usize) -> Result<Vec<ReturnRow>> {
    let ln_rho = p.rho().ln();
    let power = 1.5 * p.dim() as f64;
    Ok(return_probabilities(p, max_half_steps)?
        .into_iter()
        .enumerate()
        .map(|(i, prob)| {
            let n = (i + 1) as f64;
            let log_prob = prob.ln();
            ReturnRow {
                half_steps: i + 1,
                prob,
                log_prob,
                normalized: log_prob - 2.0 * n * ln_rho + power * n.ln(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(d: usize, lambda: f64) -> ModelParams {
        ModelParams::new(d, lambda).unwrap()
    }

    #[test]
    fn codec_round_trips() {
        let codec = Codec::new(3, -4, 4).unwrap();
        let mut out = [0; 3];
        for c in [[-4, 0, 4], [1, -2, 3], [0, 0, 0]] {
            codec.decode(codec.encode(&c), &mut out);
            assert_eq!(out, c);
        }
        assert!(Codec::new(8, 0, 1 << 20).is_err());
    }

    #[test]
    fn reachable_set_sizes() {
        assert_eq!(ball_size(1, 5), 11.0);
        assert_eq!(ball_size(2, 2), 13.0);
        assert_eq!(simplex_size(2, 3), 10.0);
    }

    #[test]
    fn first_step_from_origin() {
        let dist = propagate(&params(2, 0.37), &ReflectedState::origin(2), 1).unwrap();
        assert_eq!(dist.len(), 2);
        assert_eq!(dist.get(&ReflectedState(vec![1, 0])), 0.5);
        assert_eq!(dist.get(&ReflectedState(vec![0, 1])), 0.5);
    }

    #[test]
    fn two_steps_in_one_dimension() {
        let dist = propagate(&params(1, 0.25), &ReflectedState(vec![0]), 2).unwrap();
        assert_abs_diff_eq!(dist.get(&ReflectedState(vec![0])), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.get(&ReflectedState(vec![2])), 0.8, epsilon = 1e-15);
        assert_eq!(dist.len(), 2);
    }

    #[test]
    fn support_respects_parity_and_reach() {
        let start = ReflectedState(vec![2, 1]);
        let dist = propagate(&params(2, 0.5), &start, 7).unwrap();
        for (y, m) in dist.iter() {
            assert!(m > 0.0);
            assert!(y.norm() <= 7 + 3);
            // every step changes the l1 norm by one
            assert_eq!((y.norm() + 3 + 7) % 2, 0);
        }
    }

    #[test]
    fn drifted_walk_examples() {
        let dist = propagate_drifted(&params(1, 0.5), &LatticePoint(vec![0]), 2).unwrap();
        assert_abs_diff_eq!(dist.get(&LatticePoint(vec![-2])), 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.get(&LatticePoint(vec![0])), 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.get(&LatticePoint(vec![2])), 4.0 / 9.0, epsilon = 1e-15);

        let lambda = 0.3;
        let dist = propagate_drifted(&params(2, lambda), &LatticePoint::origin(2), 1).unwrap();
        assert_eq!(dist.len(), 4);
        assert_abs_diff_eq!(
            dist.get(&LatticePoint(vec![1, 0])),
            1.0 / (2.0 * (1.0 + lambda)),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            dist.get(&LatticePoint(vec![0, -1])),
            lambda / (2.0 * (1.0 + lambda)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn drifted_marginal_is_one_dimensional_walk() {
        // a coordinate moves w.p. 1/d per step, then +1 / -1 in ratio 1 : lambda
        let (d, lambda, n) = (2, 0.4, 6);
        let joint = propagate_drifted(&params(d, lambda), &LatticePoint::origin(d), n).unwrap();
        let mut marginal = BTreeMap::new();
        for (k, m) in joint.iter() {
            *marginal.entry(k.0[0]).or_insert(0.0) += m;
        }
        let lazy = |x: i64| {
            let (plus, minus) = (1.0 / (d as f64 * (1.0 + lambda)), lambda / (d as f64 * (1.0 + lambda)));
            let stay = 1.0 - plus - minus;
            // brute force over step sequences
            let mut total = 0.0;
            for code in 0..3usize.pow(n as u32) {
                let (mut c, mut pos, mut w) = (code, 0i64, 1.0);
                for _ in 0..n {
                    match c % 3 {
                        0 => w *= stay,
                        1 => {
                            pos += 1;
                            w *= plus
                        }
                        _ => {
                            pos -= 1;
                            w *= minus
                        }
                    }
                    c /= 3;
                }
                if pos == x {
                    total += w;
                }
            }
            total
        };
        for (x, m) in marginal {
            assert_abs_diff_eq!(m, lazy(x), epsilon = 1e-14);
        }
    }

    #[test]
    fn mass_is_conserved() {
        for d in 1..=2 {
            for lambda in [0.0, 0.25, 0.75] {
                let dist = propagate(&params(d, lambda), &ReflectedState::origin(d), 500).unwrap();
                assert!((dist.total_mass() - 1.0).abs() <= 1e-10, "{d} {lambda}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let tight = ExactBudget {
            max_states: 100,
            ..ExactBudget::default()
        };
        let p = params(2, 0.5);
        let err = propagate_with(&p, &ReflectedState::origin(2), 50, &tight).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        assert!(propagate_with(&p, &ReflectedState::origin(2), 5, &tight).is_ok());
    }

    #[test]
    fn log_mgf_basics() {
        let p = params(1, 0.25);
        let origin = ReflectedState(vec![0]);
        assert_eq!(log_mgf(&p, &origin, 50, &[0.0]).unwrap(), 0.0);
        // two steps: |X_2| is 0 w.p. 0.2 and 2 w.p. 0.8
        let s: f64 = 0.7;
        let want = (0.2 + 0.8 * (2.0 * s).exp()).ln();
        assert_abs_diff_eq!(log_mgf(&p, &origin, 2, &[s]).unwrap(), want, epsilon = 1e-14);
        assert!(log_mgf(&p, &origin, 2, &[f64::NAN]).is_err());
        assert!(log_mgf(&p, &origin, 2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn log_mgf_matches_distribution_route() {
        for (d, lambda, start) in [(1, 0.25, vec![0]), (2, 0.5, vec![0, 0]), (2, 0.1, vec![3, 1])] {
            let p = params(d, lambda);
            let start = ReflectedState(start);
            let dist = propagate(&p, &start, 60).unwrap();
            for s in [[-2.0, 0.5], [0.3, 0.3], [1.5, -1.0]] {
                let s = &s[..d];
                let terms: Vec<f64> = dist
                    .iter()
                    .map(|(y, m)| m.ln() + s.iter().zip(&y.0).map(|(a, &b)| a * b as f64).sum::<f64>())
                    .collect();
                let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
                let direct = log_mgf(&p, &start, 60, s).unwrap();
                assert!((direct - lse).abs() <= 1e-11 * (1.0 + lse.abs()), "{direct} {lse}");
            }
        }
    }

    #[test]
    fn log_mgf_survives_large_tilts() {
        let p = params(1, 0.25);
        let v = log_mgf(&p, &ReflectedState(vec![0]), 400, &[50.0]).unwrap();
        // dominated by the single outward path: 400 s + 399 ln(1/(1+lambda))
        let lead = 400.0 * 50.0 - 399.0 * 1.25f64.ln();
        assert!(v.is_finite() && (v - lead).abs() < 1e-6);
    }

    #[test]
    fn log_mgf_is_monotone_in_s() {
        let p = params(2, 0.4);
        let x = ReflectedState::origin(2);
        let grid = [-1.5, -0.5, 0.0, 0.5, 1.5];
        for &a in &grid {
            for &b in &grid {
                let base = log_mgf(&p, &x, 40, &[a, b]).unwrap();
                let bumped = log_mgf(&p, &x, 40, &[a + 0.25, b]).unwrap();
                assert!(bumped >= base - 1e-12);
            }
        }
    }

    fn ln_psi(p: &ModelParams, s: &[f64]) -> f64 {
        crate::ldp::log_psi(p, s)
    }

    #[test]
    fn scaled_log_mgf_approaches_limit() {
        // |Lambda_n / n - ln psi| is O(ln n / n): the n^{-3d/2} prefactor of
        // the mass near the origin dominates when some s_i sits below the kink.
        for (d, n) in [(1usize, 100usize), (1, 200), (2, 100), (2, 200)] {
            let p = params(d, 0.25);
            let x = ReflectedState::origin(d);
            let grid = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
            let mut points: Vec<Vec<f64>> = Vec::new();
            if d == 1 {
                points.extend(grid.iter().map(|&a| vec![a]));
            } else {
                for &a in &grid {
                    for &b in &grid {
                        points.push(vec![a, b]);
                    }
                }
            }
            let envelope = (1.5 * d as f64 * (n as f64).ln() + 2.0) / n as f64;
            for s in points {
                let gap = (log_mgf(&p, &x, n, &s).unwrap() / n as f64 - ln_psi(&p, &s)).abs();
                assert!(gap <= envelope, "d={d} n={n} s={s:?} gap={gap} envelope={envelope}");
            }
        }
    }

    #[test]
    fn one_dimensional_return_probability() {
        let p = params(1, 0.25);
        assert_abs_diff_eq!(return_probability(&p, 1).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(return_probability(&p, 0).unwrap(), 1.0);
    }

    #[test]
    fn distribution_csv_is_sorted() {
        let dist = propagate(&params(2, 0.5), &ReflectedState::origin(2), 2).unwrap();
        let mut buf = Vec::new();
        dist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,prob");
        let keys: Vec<&str> = lines[1..].iter().map(|l| l.rsplit_once(',').unwrap().0).collect();
        assert_eq!(keys, vec!["0,0", "0,2", "1,1", "2,0"]);
    }
}
