use std::collections::BTreeMap;

use num::{BigRational, One, ToPrimitive, Zero};

use super::{check_dim, ExactBudget, SparseDistribution};
use crate::error::{Error, Result};
use crate::kernel::{LatticePoint, ModelParams, ReflectedState};

/// A law with exact rational masses.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalDistribution<K> {
    dim: usize,
    mass: BTreeMap<K, BigRational>,
}

impl<K: Ord + Clone> RationalDistribution<K> {
    pub fn get(&self, state: &K) -> BigRational {
        self.mass.get(state).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &BigRational)> {
        self.mass.iter()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> BigRational {
        self.mass.values().fold(BigRational::zero(), |acc, m| acc + m)
    }

    /// Rounds every mass to the nearest double.
    pub fn to_f64(&self) -> SparseDistribution<K> {
        let mass = self
            .mass
            .iter()
            .map(|(k, m)| (k.clone(), m.to_f64().unwrap_or(f64::NAN)))
            .collect();
        SparseDistribution::from_map(self.dim, mass)
    }
}

impl RationalDistribution<LatticePoint> {
    /// Law of the coordinate-wise absolute value, summed exactly.
    pub fn reflect(&self) -> RationalDistribution<ReflectedState> {
        let mut mass: BTreeMap<ReflectedState, BigRational> = BTreeMap::new();
        for (k, m) in &self.mass {
            *mass.entry(k.reflect()).or_insert_with(BigRational::zero) += m;
        }
        RationalDistribution {
            dim: self.dim,
            mass,
        }
    }
}

/// Exact one-step weights: `outward[k]` and `inward[k]` for `k` zero
/// coordinates, stored flat as `[outward_0, inward_0, outward_1, ...]`.
struct RationalKernel {
    weights: Vec<BigRational>,
}

impl RationalKernel {
    fn new(p: &ModelParams) -> Result<Self> {
        let lambda = BigRational::from_float(p.lambda())
            .ok_or_else(|| Error::invalid("lambda", "not representable as a rational"))?;
        let d = p.dim();
        let mut weights = Vec::with_capacity(2 * (d + 1));
        for zeros in 0..=d {
            let denom = BigRational::from_integer((d + zeros).into())
                + &lambda * BigRational::from_integer((d - zeros).into());
            weights.push(BigRational::one() / &denom);
            weights.push(&lambda / &denom);
        }
        Ok(RationalKernel { weights })
    }

    /// `prod_t weights[t]^{exponents[t]}`.
    fn product(&self, exponents: &[u8]) -> BigRational {
        exponents
            .iter()
            .zip(&self.weights)
            .filter(|(&e, _)| e > 0)
            .fold(BigRational::one(), |acc, (&e, w)| acc * num::pow(w.clone(), e as usize))
    }
}

/// Depth-first walk over all paths. A path's weight is a product of kernel
/// weights, so each leaf only records how often each weight was used; the
/// rational products are formed once per distinct exponent pattern.
struct Enumerator {
    zero_mass: Vec<bool>,
    point: Vec<i64>,
    exponents: Vec<u8>,
    classes: BTreeMap<(Vec<i64>, Vec<u8>), u64>,
}

impl Enumerator {
    fn walk(&mut self, remaining: usize) {
        if remaining == 0 {
            *self
                .classes
                .entry((self.point.clone(), self.exponents.clone()))
                .or_insert(0) += 1;
            return;
        }
        let zeros = self.point.iter().filter(|&&c| c == 0).count();
        for axis in 0..self.point.len() {
            for delta in [1i64, -1] {
                let c = self.point[axis];
                let inward = c != 0 && c.signum() != delta;
                let t = 2 * zeros + usize::from(inward);
                if self.zero_mass[t] {
                    continue;
                }
                self.exponents[t] += 1;
                self.point[axis] += delta;
                self.walk(remaining - 1);
                self.point[axis] -= delta;
                self.exponents[t] -= 1;
            }
        }
    }
}

/// Law of the walk on `Z^d` after `n` steps, by summing the weight of every
/// nearest-neighbour path of length `n` in exact rational arithmetic.
///
/// `lambda` enters as the exact rational value of its double.
pub fn enumerate_oracle(
    p: &ModelParams,
    start: &LatticePoint,
    n: usize,
    budget: &ExactBudget,
) -> Result<RationalDistribution<LatticePoint>> {
    check_dim(p, start.dim(), "start")?;
    let paths = (2 * p.dim() as u64).checked_pow(n as u32);
    if paths.map_or(true, |c| c > budget.max_paths) {
        return Err(Error::Resource(format!(
            "(2d)^n paths for d = {}, n = {n} exceeds the budget of {}",
            p.dim(),
            budget.max_paths
        )));
    }
    let kernel = RationalKernel::new(p)?;
    let mut e = Enumerator {
        zero_mass: kernel.weights.iter().map(|w| w.is_zero()).collect(),
        point: start.0.clone(),
        exponents: vec![0; kernel.weights.len()],
        classes: BTreeMap::new(),
    };
    e.walk(n);
    let mut mass: BTreeMap<LatticePoint, BigRational> = BTreeMap::new();
    for ((point, exponents), count) in e.classes {
        let w = kernel.product(&exponents) * BigRational::from_integer(count.into());
        *mass.entry(LatticePoint(point)).or_insert_with(BigRational::zero) += w;
    }
    Ok(RationalDistribution {
        dim: p.dim(),
        mass,
    })
}
