//! Small least-squares fits used for extrapolating limits `r ↓ 0`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Standard errors of the coefficients; zero when the fit has no spare degrees of freedom.
    pub std_err: Vec<f64>,
    pub residual_rms: f64,
}

/// Ordinary least squares `y ≈ X·c` for a row-major design matrix.
///
/// Returns `None` when there are fewer rows than columns or the design is rank deficient.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Option<LinearFit> {
    let rows = design.len();
    let cols = design.first()?.len();
    if rows < cols || rows != y.len() || cols == 0 {
        return None;
    }
    // column scaling keeps the normal matrix well conditioned for r and r² columns
    let scale: Vec<f64> =
        (0..cols).map(|c| design.iter().map(|r| r[c].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)).collect();
    let x = DMatrix::from_fn(rows, cols, |r, c| design[r][c] / scale[c]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return None;
    }
    let beta = svd.solve(&yv, 0.0).ok()?;
    let resid = &yv - &x * &beta;
    let sse = resid.norm_squared();
    let dof = rows - cols;
    let residual_rms = (sse / rows as f64).sqrt();
    let std_err = if dof == 0 {
        vec![0.0; cols]
    } else {
        let sigma2 = sse / dof as f64;
        let xtx = x.transpose() * &x;
        match xtx.try_inverse() {
            Some(inv) => (0..cols).map(|c| (sigma2 * inv[(c, c)]).max(0.0).sqrt() / scale[c]).collect(),
            None => vec![f64::INFINITY; cols],
        }
    };
    let coef = (0..cols).map(|c| beta[c] / scale[c]).collect();
    Some(LinearFit { coef, std_err, residual_rms })
}

/// Fits `y ≈ a + b·r + c·r²` and returns the fit with coefficients `[a, b, c]`.
pub fn quadratic(r: &[f64], y: &[f64]) -> Option<LinearFit> {
    let design: Vec<Vec<f64>> = r.iter().map(|&x| vec![1.0, x, x * x]).collect();
    least_squares(&design, y)
}

/// Composite trapezoid rule on sorted abscissae, extended by constants to `[lo, hi]`.
pub fn trapezoid(t: &[f64], v: &[f64], lo: f64, hi: f64) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let mut total = (t[0] - lo).max(0.0) * v[0];
    for k in 1..t.len() {
        total += 0.5 * (t[k] - t[k - 1]) * (v[k] + v[k - 1]);
    }
    total + (hi - t[t.len() - 1]).max(0.0) * v[v.len() - 1]
}
