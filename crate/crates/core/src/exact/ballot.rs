use num::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};

/// Counts are held in `u128`; `C(127, 63)` is the largest central binomial
/// that fits.
pub const MAX_BALLOT_STEPS: usize = 127;

/// Numbers of `+-1` paths of length `n` from `alpha` to `beta`: all of them
/// (`p`) and those that never go below `min(alpha, beta)` (`q`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BallotCount {
    pub n: usize,
    pub alpha: i64,
    pub beta: i64,
    pub p: u128,
    pub q: u128,
}

impl BallotCount {
    /// `q >= ((|alpha - beta| max 1) / n) p`, checked in integers.
    pub fn satisfies_bound(&self) -> bool {
        let gap = BigUint::from(self.alpha.abs_diff(self.beta).max(1));
        BigUint::from(self.q) * self.n >= gap * self.p
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    // Pascal's rule never forms an intermediate larger than the answer's row
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=i).rev() {
            row[j] += row[j - 1];
        }
    }
    row[k]
}

pub fn ballot_counts(n: usize, alpha: i64, beta: i64) -> Result<BallotCount> {
    if n == 0 || n > MAX_BALLOT_STEPS {
        return Err(Error::invalid(
            "n",
            format!("must lie in 1..={MAX_BALLOT_STEPS}, got {n}"),
        ));
    }
    let rise = beta - alpha;
    let reachable = rise.unsigned_abs() <= n as u64 && (n as i64 - rise) % 2 == 0;
    if !reachable {
        return Ok(BallotCount {
            n,
            alpha,
            beta,
            p: 0,
            q: 0,
        });
    }
    let p = binomial(n, ((n as i64 + rise) / 2) as usize);

    // heights measured from the floor min(alpha, beta)
    let floor = alpha.min(beta);
    let top = n + 1;
    let mut ways = vec![0u128; top + 1];
    ways[(alpha - floor) as usize] = 1;
    let mut next = vec![0u128; top + 1];
    for _ in 0..n {
        next.iter_mut().for_each(|w| *w = 0);
        for h in 0..top {
            let w = ways[h];
            if w == 0 {
                continue;
            }
            next[h + 1] += w;
            if h > 0 {
                next[h - 1] += w;
            }
        }
        std::mem::swap(&mut ways, &mut next);
    }
    let q = ways[(beta - floor) as usize];
    Ok(BallotCount {
        n,
        alpha,
        beta,
        p,
        q,
    })
}
