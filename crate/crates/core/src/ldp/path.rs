use serde::{Deserialize, Serialize};

use super::{rate_function, RateQuery};
use crate::error::{Error, Result};
use crate::kernel::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub phi: Vec<f64>,
}

/// A continuous path on `[0, 1]`, linear between breakpoints, starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearPath {
    points: Vec<Breakpoint>,
}

impl PiecewiseLinearPath {
    pub fn new(points: Vec<Breakpoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("path", "needs at least two breakpoints"));
        }
        let dim = points[0].phi.len();
        if dim == 0 {
            return Err(Error::invalid("path", "values must have at least one coordinate"));
        }
        if points[0].t != 0.0 || points[points.len() - 1].t != 1.0 {
            return Err(Error::invalid("path", "breakpoints must run from t = 0 to t = 1"));
        }
        // negated so that NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if points.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return Err(Error::invalid("path", "breakpoint times must increase strictly"));
        }
        if points.iter().any(|b| b.phi.len() != dim) {
            return Err(Error::invalid("path", "values have inconsistent dimensions"));
        }
        if points[0].phi.iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("path", "must start at the origin"));
        }
        if points.iter().flat_map(|b| &b.phi).any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("path", "values must be finite and nonnegative"));
        }
        Ok(PiecewiseLinearPath { points })
    }

    /// Parses a JSON array of `{"t": .., "phi": [..]}` objects.
    pub fn from_json(text: &str) -> Result<Self> {
        let points: Vec<Breakpoint> = serde_json::from_str(text)
            .map_err(|e| Error::invalid("path", format!("malformed JSON: {e}")))?;
        Self::new(points)
    }

    /// The straight line `t -> t x`.
    pub fn straight(x: Vec<f64>) -> Result<Self> {
        let zero = vec![0.0; x.len()];
        Self::new(vec![
            Breakpoint { t: 0.0, phi: zero },
            Breakpoint { t: 1.0, phi: x },
        ])
    }

    pub fn dim(&self) -> usize {
        self.points[0].phi.len()
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.points
    }

    /// `(duration, slope)` of every segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
        self.points.windows(2).map(|w| {
            let dt = w[1].t - w[0].t;
            let slope = w[1].phi.iter().zip(&w[0].phi).map(|(b, a)| (b - a) / dt).collect();
            (dt, slope)
        })
    }
}

/// `integral_0^1 Lambda*(phi'(t)) dt`, exact for piecewise-linear paths.
pub fn path_rate_functional(p: &ModelParams, path: &PiecewiseLinearPath) -> Result<f64> {
    if path.dim() != p.dim() {
        return Err(Error::invalid(
            "path",
            format!("has {} coordinates but the dimension is {}", path.dim(), p.dim()),
        ));
    }
    let mut total = 0.0;
    for (dt, slope) in path.segments() {
        let r = rate_function(&RateQuery::new(*p, slope))?;
        if r.value.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += dt * r.value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_paths() {
        let p = ModelParams::new(2, 0.5).unwrap();
        let along_speed = PiecewiseLinearPath::straight(p.speed()).unwrap();
        assert!(path_rate_functional(&p, &along_speed).unwrap().abs() < 1e-12);
        let x = vec![0.2, 0.4];
        let direct = rate_function(&RateQuery::new(p, x.clone())).unwrap().value;
        let path = PiecewiseLinearPath::straight(x).unwrap();
        assert!((path_rate_functional(&p, &path).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn two_segments() {
        let p = ModelParams::new(1, 0.25).unwrap();
        let path = PiecewiseLinearPath::from_json(
            r#"[{"t":0,"phi":[0]},{"t":0.5,"phi":[0.5]},{"t":1,"phi":[0.5]}]"#,
        )
        .unwrap();
        let want = 0.5 * 1.25f64.ln() - 0.5 * 0.8f64.ln();
        assert!((path_rate_functional(&p, &path).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn too_fast_is_infinite() {
        let p = ModelParams::new(1, 0.25).unwrap();
        let path = PiecewiseLinearPath::straight(vec![1.5]).unwrap();
        assert_eq!(path_rate_functional(&p, &path).unwrap(), f64::INFINITY);
    }

    #[test]
    fn validation() {
        assert!(PiecewiseLinearPath::from_json("[]").is_err());
        assert!(PiecewiseLinearPath::from_json(r#"[{"t":0,"phi":[1]},{"t":1,"phi":[1]}]"#).is_err());
        assert!(PiecewiseLinearPath::from_json(r#"[{"t":0,"phi":[0]},{"t":1,"phi":[-1]}]"#).is_err());
        assert!(PiecewiseLinearPath::from_json(
            r#"[{"t":0,"phi":[0]},{"t":0.5,"phi":[0.1]},{"t":0.5,"phi":[0.2]},{"t":1,"phi":[0.3]}]"#
        )
        .is_err());
    }
}
