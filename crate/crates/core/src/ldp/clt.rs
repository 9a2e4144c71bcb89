use nalgebra::DMatrix;

use crate::kernel::ModelParams;

/// `M = (1/sqrt d) [I - ((1 - rho) / d) E]` with `E` the all-ones matrix.
pub fn scaling_matrix(p: &ModelParams) -> DMatrix<f64> {
    let d = p.dim();
    let shrink = (1.0 - p.rho()) / d as f64;
    let scale = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, d, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        scale * (identity - shrink)
    })
}

/// `max_ij |(M M^T - Sigma)_ij|`.
pub fn clt_matrix_check(p: &ModelParams) -> f64 {
    let m = scaling_matrix(p);
    let product = &m * m.transpose();
    let sigma = p.covariance();
    let mut worst = 0.0f64;
    for (i, row) in sigma.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            worst = worst.max((product[(i, j)] - s).abs());
        }
    }
    worst
}
