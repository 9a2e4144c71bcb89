use crate::error::{Error, Result};
use crate::kernel::ModelParams;

use super::{x_log_x, SIMPLEX_TOLERANCE};

/// `sup_u [u a - ln cosh u]` for `|a| <= 1`.
fn cosh_conjugate(a: f64) -> f64 {
    let a = a.abs();
    0.5 * (x_log_x(1.0 + a) + x_log_x(1.0 - a))
}

/// Explicit `Lambda*` where one exists: `d = 1` or `d = 2` with
/// `0 < lambda < 1`, and `lambda = 0` with `d >= 2`.
///
/// For `d = 2`, `(cosh y_1 + cosh y_2) / 2 = cosh((y_1+y_2)/2) cosh((y_1-y_2)/2)`
/// splits the transform into two one-dimensional ones in `x_1 + x_2` and
/// `x_1 - x_2`. The square-root expression sometimes given for this case
/// agrees with it only on the diagonal `x_1 = x_2`.
pub fn rate_closed_form(p: &ModelParams, x: &[f64]) -> Result<f64> {
    let d = p.dim();
    let lambda = p.lambda();
    if x.len() != d {
        return Err(Error::invalid(
            "x",
            format!("has {} coordinates but the dimension is {d}", x.len()),
        ));
    }
    let total: f64 = x.iter().sum();
    let outside = x.iter().any(|&v| v < 0.0) || total > 1.0 + SIMPLEX_TOLERANCE;

    if lambda == 0.0 {
        if d == 1 {
            return Err(Error::Domain(
                "no rate function for d = 1 without backtracking".into(),
            ));
        }
        if outside || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Ok(f64::INFINITY);
        }
        return Ok((d as f64).ln() + x.iter().map(|&v| x_log_x(v)).sum::<f64>());
    }
    if d > 2 {
        return Err(Error::Domain(format!(
            "no closed form for d = {d} with lambda > 0"
        )));
    }
    if outside {
        return Ok(f64::INFINITY);
    }
    let total = total.min(1.0);
    let head = 0.5 * total * lambda.ln() - p.rho().ln();
    let bar = match d {
        1 => cosh_conjugate(x[0]),
        _ => cosh_conjugate(total) + cosh_conjugate(x[0] - x[1]),
    };
    Ok((head + bar).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::{rate_function, RateQuery};

    #[test]
    fn one_dimensional_zero_at_the_speed() {
        let p = ModelParams::new(1, 0.25).unwrap();
        assert!(rate_closed_form(&p, &[0.6]).unwrap().abs() < 1e-15);
        assert!((rate_closed_form(&p, &[1.0]).unwrap() - 1.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_symmetry() {
        let p = ModelParams::new(2, 0.5).unwrap();
        for (a, b) in [(0.1, 0.3), (0.0, 0.5), (0.45, 0.55)] {
            let x = rate_closed_form(&p, &[a, b]).unwrap();
            let y = rate_closed_form(&p, &[b, a]).unwrap();
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_the_transform_off_the_diagonal() {
        let p = ModelParams::new(2, 0.5).unwrap();
        for x in [[0.5, 0.0], [0.45, 0.05], [0.1, 0.6], [0.3, 0.3]] {
            let closed = rate_closed_form(&p, &x).unwrap();
            let numeric = rate_function(&RateQuery::new(p, x.to_vec())).unwrap().value;
            assert!((closed - numeric).abs() < 1e-10, "{x:?}: {closed} {numeric}");
        }
    }

    #[test]
    fn rejects_parameters_without_a_formula() {
        assert!(rate_closed_form(&ModelParams::new(3, 0.5).unwrap(), &[0.1; 3]).is_err());
        assert!(rate_closed_form(&ModelParams::new(1, 0.0).unwrap(), &[0.5]).is_err());
        let p = ModelParams::new(3, 0.0).unwrap();
        let v = rate_closed_form(&p, &[1.0 / 3.0; 3]).unwrap();
        assert!(v.abs() < 1e-15);
    }
}
