//! Central finite differences, used as an independent check on the analytic
//! derivatives.

use ndarray::{Array1, Array2};

use crate::error::Result;

/// Per-coordinate step `1e-6 (1 + |x|)`.
pub fn step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

pub fn gradient<F>(f: F, x: &Array1<f64>) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Result<f64>,
{
    let mut g = Array1::zeros(x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        let up = f(&xp)?;
        xp[j] = x[j] - h;
        let dn = f(&xp)?;
        xp[j] = x[j];
        g[j] = (up - dn) / (2.0 * h);
    }
    Ok(g)
}

/// Jacobian of a vector-valued map; column `j` is the derivative along `x_j`.
pub fn jacobian<F>(f: F, x: &Array1<f64>) -> Result<Array2<f64>>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        let up = f(&xp)?;
        xp[j] = x[j] - h;
        let dn = f(&xp)?;
        xp[j] = x[j];
        cols.push((up - dn) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    let mut out = Array2::zeros((rows, x.len()));
    for (j, c) in cols.into_iter().enumerate() {
        out.column_mut(j).assign(&c);
    }
    Ok(out)
}

/// Derivative of `t -> f(x + t u)` at zero.
pub fn directional<F>(f: F, x: &Array1<f64>, u: &Array1<f64>, h: f64) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    let up = f(&(x + &(u * h)))?;
    let dn = f(&(x - &(u * h)))?;
    Ok((up - dn) / (2.0 * h))
}

/// Norm-scaled discrepancy `max|a - b| / max(max|a|, max|b|)`; zero when both
/// are identically zero.
pub fn rel_error<'a>(
    a: impl IntoIterator<Item = &'a f64>,
    b: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.into_iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gradient_of_quadratic() {
        let g = gradient(|x| Ok(x[0] * x[0] + 3.0 * x[0] * x[1]), &array![1.0, 2.0]).unwrap();
        assert!((g[0] - 8.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn rel_error_is_scale_free() {
        let a = array![1.0, 2.0];
        let b = array![1.0, 2.002];
        assert!((rel_error(&a, &b) - 0.002 / 2.002).abs() < 1e-12);
        let z = array![0.0, 0.0];
        assert_eq!(rel_error(&z, &z), 0.0);
    }
}
