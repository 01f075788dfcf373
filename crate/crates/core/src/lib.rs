//! Predictor channel selection for (weighted) PLS regression.
//!
//! Subset selection is embedded as a continuous problem over per-channel
//! predictor weights. The cross-validated error (or an information
//! criterion with a smooth model-size surrogate) is minimized over the
//! weights by BFGS using an analytic Jacobian of the PLS residuals, and the
//! optimized weights are then turned back into ranked channel subsets that
//! are scored by RMSECV or aBIC.

pub mod bfgs;
pub mod cli;
pub mod cv;
pub mod data_io;
pub mod dataset;
pub mod error;
pub mod fd;
pub mod jacobian;
pub mod objective;
pub mod selection;
pub mod wpls;

pub use cv::{CvPlan, Fold};
pub use dataset::Dataset;
pub use error::{Result, SrcekError};
pub use jacobian::WeightVector;
pub use wpls::{WplsFactorization, WplsModel};

#[cfg(test)]
pub(crate) mod testutil {
    use ndarray::{Array1, Array2};

    pub use crate::data_io::artif::random_dataset;

    pub fn rel_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        crate::fd::rel_error(a, b)
    }

    /// Cholesky solve of `A x = b` for symmetric positive definite `A`.
    pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
        let n = b.len();
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
                if i == j {
                    l[[i, i]] = (a[[i, i]] - s).sqrt();
                } else {
                    l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
                }
            }
        }
        let mut z = Array1::<f64>::zeros(n);
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[[i, k]] * z[k]).sum();
            z[i] = (b[i] - s) / l[[i, i]];
        }
        let mut x = Array1::<f64>::zeros(n);
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
            x[i] = (z[i] - s) / l[[i, i]];
        }
        x
    }
}
