//! Biased random walks on `Z^d`.
//!
//! The walk `RW_lambda` steps to a uniformly chosen neighbour, except that a
//! step bringing a coordinate closer to zero has its weight cut to `lambda`.
//! For `lambda < 1` the walk drifts outward and its coordinate-wise absolute
//! value `|X_n|` grows linearly at speed `(1 - lambda) / (d (1 + lambda))` in
//! each coordinate.
//!
//! - [`kernel`]: one-step transition laws of the walk, its reflection onto
//!   `Z_+^d` and an i.i.d. comparison walk.
//! - [`simulate`]: reproducible Monte Carlo of the reflected chain.
//! - [`exact`]: exact finite-horizon laws, moment generating functions,
//!   return probabilities and path counts.
//! - [`ldp`]: the large-deviation rate function and its closed forms.
//!
//! ```
//! use biased_walk::{exact, kernel::{ModelParams, ReflectedState}};
//!
//! let p = ModelParams::new(1, 0.25)?;
//! let law = exact::propagate(&p, &ReflectedState::origin(1), 2)?;
//! assert!((law.get(&ReflectedState(vec![0])) - 0.2).abs() < 1e-15);
//! # Ok::<(), biased_walk::Error>(())
//! ```

pub mod error;
pub mod exact;
pub mod kernel;
pub mod ldp;
pub mod simulate;

pub use error::{Error, Result};
pub use kernel::{LatticePoint, ModelParams, ReflectedState};

// The guide's snippets run as doctests of these empty modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/rate-function.md")]
    mod rate_function {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
