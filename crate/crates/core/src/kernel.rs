//! Transition law of the biased walk on `Z^d` and of its coordinate-wise
//! absolute value.
//!
//! Edges at graph distance `n` from the origin carry conductance `lambda^-n`,
//! so from a vertex `v != 0` with `kappa(v)` zero coordinates every step
//! towards the origin has probability `lambda / D` and every other step
//! `1 / D`, where
//!
//! ```text
//! D = d + kappa(v) + lambda * (d - kappa(v)).
//! ```
//!
//! The origin itself is left uniformly. Because the law depends on `v` only
//! through `kappa(v)` and the step direction, `(|X^1|, ..., |X^d|)` is again
//! a Markov chain on `Z_+^d`: the *reflected chain*. Simulation and exact
//! propagation run on the reflected chain; the full chain is kept for the
//! path-enumeration oracle and the domination checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and bias of the walk, plus the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    dim: usize,
    lambda: f64,
}

impl ModelParams {
    /// Requires `dim >= 1` and `0 <= lambda < 1`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be at least 1"));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid(
                "lambda",
                format!("must satisfy 0 <= lambda < 1, got {lambda}"),
            ));
        }
        Ok(ModelParams { dim, lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Kink of the limiting log-MGF, `ln(lambda) / 2`; `-inf` at `lambda = 0`.
    pub fn s0(&self) -> f64 {
        if self.lambda == 0.0 {
            f64::NEG_INFINITY
        } else {
            0.5 * self.lambda.ln()
        }
    }

    /// Spectral radius `2 sqrt(lambda) / (1 + lambda)`.
    pub fn rho(&self) -> f64 {
        2.0 * self.lambda.sqrt() / (1.0 + self.lambda)
    }

    /// Common entry `(1 - lambda) / (d (1 + lambda))` of the speed vector.
    pub fn speed_entry(&self) -> f64 {
        (1.0 - self.lambda) / (self.dim as f64 * (1.0 + self.lambda))
    }

    /// Almost-sure limit of `(|X_n^1|, ..., |X_n^d|) / n`.
    pub fn speed(&self) -> Vec<f64> {
        vec![self.speed_entry(); self.dim]
    }

    /// Local normalizer `D = d + kappa + lambda (d - kappa)` for a state with
    /// `zeros` vanishing coordinates. At the origin this is `2d`.
    pub fn normalizer(&self, zeros: usize) -> f64 {
        debug_assert!(zeros <= self.dim);
        let d = self.dim as f64;
        let k = zeros as f64;
        d + k + self.lambda * (d - k)
    }

    /// Per-coordinate move probabilities of the reflected chain at a state
    /// with `zeros` vanishing coordinates.
    pub fn reflected_weights(&self, zeros: usize) -> ReflectedWeights {
        let denom = self.normalizer(zeros);
        ReflectedWeights {
            from_zero: 2.0 / denom,
            up: 1.0 / denom,
            down: self.lambda / denom,
        }
    }

    /// Covariance `Sigma` of the scaled reflected walk:
    /// `1/d - c` on the diagonal and `-c` off it, `c = (1-lambda)^2 / (d^2 (1+lambda)^2)`.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim as f64;
        let c = ((1.0 - self.lambda) / (d * (1.0 + self.lambda))).powi(2);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| if i == j { 1.0 / d - c } else { -c })
                    .collect()
            })
            .collect()
    }
}

/// Reflected-chain move probabilities at a fixed number of zero coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedWeights {
    /// `+1` on a coordinate that is currently `0`.
    pub from_zero: f64,
    /// `+1` on a positive coordinate.
    pub up: f64,
    /// `-1` on a positive coordinate.
    pub down: f64,
}

/// A point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Graph distance to the origin.
    pub fn norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    /// Number of vanishing coordinates.
    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|&&c| c == 0).count()
    }

    /// Coordinate-wise absolute value.
    pub fn reflect(&self) -> ReflectedState {
        ReflectedState(self.0.iter().map(|c| c.unsigned_abs()).collect())
    }

    fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut coords = self.0.clone();
        coords[axis] += delta;
        LatticePoint(coords)
    }
}

/// A point of `Z_+^d`, standing for `(|X^1|, ..., |X^d|)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReflectedState(pub Vec<u64>);

impl ReflectedState {
    pub fn origin(dim: usize) -> Self {
        ReflectedState(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|&&c| c == 0).count()
    }

    /// Whether the state lies on the coordinate hyperplanes.
    pub fn on_boundary(&self) -> bool {
        self.0.contains(&0)
    }

    pub fn to_lattice(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|&c| c as i64).collect())
    }

    fn shifted(&self, axis: usize, up: bool) -> Self {
        let mut coords = self.0.clone();
        if up {
            coords[axis] += 1;
        } else {
            coords[axis] -= 1;
        }
        ReflectedState(coords)
    }
}

/// Finite law of a single step: distinct targets with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution<S> {
    entries: Vec<(S, f64)>,
}

impl<S: PartialEq> StepDistribution<S> {
    fn from_entries(entries: Vec<(S, f64)>) -> Self {
        StepDistribution {
            entries: entries.into_iter().filter(|(_, p)| *p > 0.0).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.entries.iter().map(|(s, p)| (s, *p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Mass at `target`, zero when outside the support.
    pub fn prob(&self, target: &S) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| s == target)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// A single move: axis, signed unit increment, probability.
pub(crate) type Move = (usize, i64, f64);

/// Moves of the walk on `Z^d` out of `coords`; zero-mass moves are omitted.
pub(crate) fn full_moves(p: &ModelParams, coords: &[i64], out: &mut Vec<Move>) {
    out.clear();
    let d = p.dim();
    if coords.iter().all(|&c| c == 0) {
        let mass = 1.0 / (2 * d) as f64;
        for axis in 0..d {
            out.push((axis, 1, mass));
            out.push((axis, -1, mass));
        }
        return;
    }
    let zeros = coords.iter().filter(|&&c| c == 0).count();
    let denom = p.normalizer(zeros);
    let outward = 1.0 / denom;
    let inward = p.lambda() / denom;
    for (axis, &c) in coords.iter().enumerate() {
        for delta in [1, -1] {
            let towards_origin = c != 0 && c.signum() != delta;
            let mass = if towards_origin { inward } else { outward };
            if mass > 0.0 {
                out.push((axis, delta, mass));
            }
        }
    }
}

/// Moves of the reflected chain out of `coords` (all nonnegative).
pub(crate) fn reflected_moves(p: &ModelParams, coords: &[i64], out: &mut Vec<Move>) {
    out.clear();
    let zeros = coords.iter().filter(|&&c| c == 0).count();
    let w = p.reflected_weights(zeros);
    for (axis, &c) in coords.iter().enumerate() {
        if c == 0 {
            out.push((axis, 1, w.from_zero));
        } else {
            out.push((axis, 1, w.up));
            if w.down > 0.0 {
                out.push((axis, -1, w.down));
            }
        }
    }
}

/// Moves of the comparison walk; the same at every point.
pub(crate) fn drifted_moves(p: &ModelParams, out: &mut Vec<Move>) {
    out.clear();
    let (plus, minus) = drifted_step_probs(p);
    for axis in 0..p.dim() {
        out.push((axis, 1, plus));
        if minus > 0.0 {
            out.push((axis, -1, minus));
        }
    }
}

/// One step of the walk on `Z^d` from `v`.
pub fn full_kernel(p: &ModelParams, v: &LatticePoint) -> StepDistribution<LatticePoint> {
    assert_eq!(v.dim(), p.dim(), "point dimension must match the model");
    let mut moves = Vec::with_capacity(2 * p.dim());
    full_moves(p, &v.0, &mut moves);
    StepDistribution::from_entries(
        moves
            .into_iter()
            .map(|(axis, delta, m)| (v.shifted(axis, delta), m))
            .collect(),
    )
}

/// One step of the reflected chain from `y`.
pub fn reflected_kernel(p: &ModelParams, y: &ReflectedState) -> StepDistribution<ReflectedState> {
    assert_eq!(y.dim(), p.dim(), "state dimension must match the model");
    let coords: Vec<i64> = y.0.iter().map(|&c| c as i64).collect();
    let mut moves = Vec::with_capacity(2 * p.dim());
    reflected_moves(p, &coords, &mut moves);
    StepDistribution::from_entries(
        moves
            .into_iter()
            .map(|(axis, delta, m)| (y.shifted(axis, delta > 0), m))
            .collect(),
    )
}

/// Conditional mean increment of each `|X^i|` at state `x`.
pub fn drift(p: &ModelParams, x: &ReflectedState) -> Vec<f64> {
    let mut out = vec![0.0; p.dim()];
    drift_into(p, &x.0, &mut out);
    out
}

pub(crate) fn drift_into(p: &ModelParams, coords: &[u64], out: &mut [f64]) {
    let zeros = coords.iter().filter(|&&c| c == 0).count();
    let denom = p.normalizer(zeros);
    let at_zero = 2.0 / denom;
    let off_zero = (1.0 - p.lambda()) / denom;
    for (o, &c) in out.iter_mut().zip(coords) {
        *o = if c == 0 { at_zero } else { off_zero };
    }
}

/// One step of the comparison walk with i.i.d. increments:
/// `+e_i` w.p. `1/(d(1+lambda))` and `-e_i` w.p. `lambda/(d(1+lambda))`.
pub fn drifted_kernel(p: &ModelParams, z: &LatticePoint) -> StepDistribution<LatticePoint> {
    assert_eq!(z.dim(), p.dim(), "point dimension must match the model");
    let mut moves = Vec::with_capacity(2 * p.dim());
    drifted_moves(p, &mut moves);
    StepDistribution::from_entries(
        moves
            .into_iter()
            .map(|(axis, delta, m)| (z.shifted(axis, delta), m))
            .collect(),
    )
}

/// Probabilities of `+e_i` and `-e_i` for the comparison walk.
pub fn drifted_step_probs(p: &ModelParams) -> (f64, f64) {
    let scale = p.dim() as f64 * (1.0 + p.lambda());
    (1.0 / scale, p.lambda() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(d: usize, lambda: f64) -> ModelParams {
        ModelParams::new(d, lambda).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(0, 0.5).is_err());
        assert!(ModelParams::new(2, 1.0).is_err());
        assert!(ModelParams::new(2, -0.1).is_err());
        assert!(ModelParams::new(2, f64::NAN).is_err());
        assert!(ModelParams::new(1, 0.0).is_ok());
    }

    #[test]
    fn derived_constants() {
        let p = params(2, 0.5);
        assert_abs_diff_eq!(p.speed_entry(), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.rho(), 2.0 * 0.5f64.sqrt() / 1.5, epsilon = 1e-15);
        assert_eq!(params(3, 0.0).s0(), f64::NEG_INFINITY);
        let sigma = p.covariance();
        assert_abs_diff_eq!(sigma[0][0], 17.0 / 36.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma[0][1], -1.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn full_kernel_off_axis_point() {
        let p = params(2, 0.5);
        let k = full_kernel(&p, &LatticePoint(vec![1, 0]));
        assert_eq!(k.len(), 4);
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![0, 0])), 1.0 / 7.0, epsilon = 1e-15);
        for t in [[2, 0], [1, 1], [1, -1]] {
            assert_abs_diff_eq!(k.prob(&LatticePoint(t.to_vec())), 2.0 / 7.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_kernel_origin_is_uniform() {
        for d in 1..=4 {
            for lambda in [0.0, 0.3, 0.9] {
                let k = full_kernel(&params(d, lambda), &LatticePoint::origin(d));
                assert_eq!(k.len(), 2 * d);
                for (_, m) in k.iter() {
                    assert_eq!(m, 1.0 / (2 * d) as f64);
                }
            }
        }
    }

    #[test]
    fn zero_lambda_drops_inward_moves() {
        let k = full_kernel(&params(1, 0.0), &LatticePoint(vec![3]));
        assert_eq!(k.len(), 1);
        assert_eq!(k.prob(&LatticePoint(vec![4])), 1.0);
        let r = reflected_kernel(&params(2, 0.0), &ReflectedState(vec![0, 3]));
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn reflected_kernel_examples() {
        let k = reflected_kernel(&params(2, 0.5), &ReflectedState(vec![1, 0]));
        assert_abs_diff_eq!(k.prob(&ReflectedState(vec![2, 0])), 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&ReflectedState(vec![0, 0])), 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&ReflectedState(vec![1, 1])), 4.0 / 7.0, epsilon = 1e-15);

        let k = reflected_kernel(&params(2, 0.7), &ReflectedState(vec![0, 0]));
        assert_eq!(k.prob(&ReflectedState(vec![1, 0])), 0.5);
        assert_eq!(k.prob(&ReflectedState(vec![0, 1])), 0.5);

        let k = reflected_kernel(&params(1, 0.25), &ReflectedState(vec![5]));
        assert_abs_diff_eq!(k.prob(&ReflectedState(vec![6])), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&ReflectedState(vec![4])), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn drift_examples() {
        let f = drift(&params(2, 0.5), &ReflectedState(vec![1, 0]));
        assert_abs_diff_eq!(f[0], 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 4.0 / 7.0, epsilon = 1e-15);

        let f = drift(&params(2, 0.0), &ReflectedState(vec![0, 3]));
        assert_abs_diff_eq!(f[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 1.0 / 3.0, epsilon = 1e-15);

        for d in 1..=4 {
            let p = params(d, 0.35);
            for c in drift(&p, &ReflectedState(vec![4; d])) {
                assert_abs_diff_eq!(c, p.speed_entry(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn drifted_kernel_examples() {
        let k = drifted_kernel(&params(1, 0.5), &LatticePoint(vec![0]));
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![1])), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![-1])), 1.0 / 3.0, epsilon = 1e-15);

        let k = drifted_kernel(&params(2, 0.25), &LatticePoint(vec![0, 0]));
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![1, 0])), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![-1, 0])), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![0, 1])), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(k.prob(&LatticePoint(vec![0, -1])), 0.1, epsilon = 1e-15);
    }

    /// Every point of `Z^d` with `|v| <= radius`.
    fn ball(d: usize, radius: i64) -> Vec<LatticePoint> {
        let mut out = vec![LatticePoint(Vec::new())];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (-radius..=radius).map(move |c| {
                        let mut q = p.0.clone();
                        q.push(c);
                        LatticePoint(q)
                    })
                })
                .filter(|p| p.norm() as i64 <= radius)
                .collect();
        }
        out
    }

    #[test]
    fn reflected_kernel_is_pushforward_of_full_kernel() {
        for d in 1..=3 {
            for lambda in [0.0, 0.2, 0.5, 0.9] {
                let p = params(d, lambda);
                for v in ball(d, 6) {
                    let mut pushed: Vec<(ReflectedState, f64)> = Vec::new();
                    for (u, m) in full_kernel(&p, &v).iter() {
                        let r = u.reflect();
                        match pushed.iter_mut().find(|(s, _)| *s == r) {
                            Some(e) => e.1 += m,
                            None => pushed.push((r, m)),
                        }
                    }
                    let refl = reflected_kernel(&p, &v.reflect());
                    assert_eq!(pushed.len(), refl.len(), "support at {v:?}");
                    for (s, m) in pushed {
                        assert_abs_diff_eq!(refl.prob(&s), m, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn drift_is_mean_increment() {
        for d in 1..=3 {
            for lambda in [0.0, 0.4, 0.8] {
                let p = params(d, lambda);
                for v in ball(d, 4) {
                    let y = v.reflect();
                    let f = drift(&p, &y);
                    let mut mean = vec![0.0; d];
                    for (t, m) in reflected_kernel(&p, &y).iter() {
                        for i in 0..d {
                            mean[i] += (t.0[i] as f64 - y.0[i] as f64) * m;
                        }
                    }
                    for i in 0..d {
                        assert_abs_diff_eq!(f[i], mean[i], epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn drifted_kernel_is_translation_invariant() {
        let p = params(3, 0.6);
        let base = drifted_kernel(&p, &LatticePoint::origin(3));
        for z in ball(3, 3) {
            let k = drifted_kernel(&p, &z);
            for ((a, pa), (b, pb)) in base.iter().zip(k.iter()) {
                assert_eq!(pa, pb);
                let shift: Vec<i64> = a.0.iter().zip(&z.0).map(|(x, y)| x + y).collect();
                assert_eq!(shift, b.0);
            }
        }
    }

    #[test]
    fn kernels_are_normalized() {
        for d in 1..=4 {
            for step in 0..10 {
                let p = params(d, step as f64 / 10.0);
                for v in ball(d, 6) {
                    assert_abs_diff_eq!(full_kernel(&p, &v).total_mass(), 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(
                        reflected_kernel(&p, &v.reflect()).total_mass(),
                        1.0,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }
}
