//! Model-size surrogate, discrete information criteria and the embedded
//! criterion minimized over the predictor weights.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::cv::{rmsecv_with_gradient, weighted_rmsecv, CvPlan};
use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};
use crate::jacobian::WeightVector;

/// Below this magnitude a weight is clamped when evaluating the surrogate's
/// gradient, which is unbounded at zero for `p < 1`.
pub const MRPQ_GRADIENT_FLOOR: f64 = 1e-12;

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q.is_finite() && p > 0.0 && p < q) {
        return Err(SrcekError::InvalidArgument(format!(
            "surrogate exponents need 0 < p < q, got p = {p}, q = {q}"
        )));
    }
    Ok(())
}

fn power_sums(lambda: &Array1<f64>, p: f64, q: f64) -> Result<(f64, f64)> {
    let mut a = 0.0;
    let mut b = 0.0;
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(SrcekError::InvalidArgument(
            "size surrogate of the all-zero weight vector".into(),
        ));
    }
    for v in lambda {
        let t = v.abs() / scale;
        a += t.powf(p);
        b += t.powf(q);
    }
    Ok((a, b))
}

/// `(||lambda||_p / ||lambda||_q)^{pq/(q-p)}`, which equals the number of
/// nonzero entries of a scaled binary vector.
pub fn mrpq(lambda: &Array1<f64>, p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let (a, b) = power_sums(lambda, p, q)?;
    // (a^{1/p} / b^{1/q})^{pq/(q-p)} = exp((q ln a - p ln b) / (q - p))
    Ok(((q * a.ln() - p * b.ln()) / (q - p)).exp())
}

/// Value and gradient of [`mrpq`]:
/// `d mrpq / d lambda_j = mrpq * pq/(q-p) * sgn(lambda_j)
///   * (|lambda_j|^{p-1} / sum|lambda|^p - |lambda_j|^{q-1} / sum|lambda|^q)`.
pub fn mrpq_value_and_gradient(lambda: &Array1<f64>, p: f64, q: f64) -> Result<(f64, Array1<f64>)> {
    check_pq(p, q)?;
    let value = mrpq(lambda, p, q)?;
    let a: f64 = lambda.iter().map(|v| v.abs().powf(p)).sum();
    let b: f64 = lambda.iter().map(|v| v.abs().powf(q)).sum();
    let c = value * p * q / (q - p);
    let grad = lambda.mapv(|v| {
        let s = if v < 0.0 { -1.0 } else { 1.0 };
        let t = v.abs().max(MRPQ_GRADIENT_FLOOR);
        c * s * (t.powf(p - 1.0) / a - t.powf(q - 1.0) / b)
    });
    Ok((value, grad))
}

/// Size penalty `k ln(m) / (m - l - 1)` shared by the discrete and embedded
/// criteria.
pub fn size_penalty(size: f64, m: usize, l: usize) -> Result<f64> {
    if m <= l + 1 {
        return Err(SrcekError::InvalidArgument(format!(
            "information criterion needs more than {} objects for {l} factors, got {m}",
            l + 1
        )));
    }
    Ok(size * (m as f64).ln() / (m - l - 1) as f64)
}

/// `ln(mse) + k ln(m) / (m - l - 1)` with natural logarithms. Pass an MSEP
/// for the classical criterion or an MSECV for the cross-validated one.
pub fn discrete_abic(mse: f64, m: usize, l: usize, k: usize) -> Result<f64> {
    if !(mse > 0.0 && mse.is_finite()) {
        return Err(SrcekError::InvalidArgument(format!(
            "information criterion needs a positive finite error, got {mse}"
        )));
    }
    Ok(mse.ln() + size_penalty(k as f64, m, l)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Rmsecv,
    EmbeddedAbic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub p: f64,
    pub q: f64,
    pub factors: usize,
    pub plan: CvPlan,
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        check_pq(self.p, self.q)?;
        if self.factors == 0 {
            return Err(SrcekError::FactorCount {
                requested: 0,
                reason: "at least one factor is required".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionValue {
    pub value: f64,
    pub gradient: Array1<f64>,
    /// `ln MSECV` for the embedded criterion, RMSECV itself otherwise.
    pub error_term: f64,
    pub size_term: f64,
}

/// `F(lambda) = ln MSECV(lambda) + ln(m) mrpq(lambda) / (m - l - 1)` with
/// gradient `grad MSECV / MSECV + ln(m) grad mrpq / (m - l - 1)`. With
/// [`ObjectiveKind::Rmsecv`] the value is the RMSECV and there is no size
/// term.
pub fn embedded_abic_objective(
    data: &Dataset,
    cfg: &ObjectiveConfig,
    lambda: &WeightVector,
) -> Result<CriterionValue> {
    cfg.validate()?;
    let cv = rmsecv_with_gradient(data, &cfg.plan, cfg.factors, lambda)?;
    let g = cv.gradient.expect("gradient requested");
    match cfg.kind {
        ObjectiveKind::Rmsecv => Ok(CriterionValue {
            value: cv.rmsecv,
            gradient: g,
            error_term: cv.rmsecv,
            size_term: 0.0,
        }),
        ObjectiveKind::EmbeddedAbic => {
            let m = data.n_objects();
            let (size, dsize) = mrpq_value_and_gradient(lambda.as_array(), cfg.p, cfg.q)?;
            let unit = size_penalty(1.0, m, cfg.factors)?;
            let error_term = cv.msecv.ln();
            let size_term = unit * size;
            // grad MSECV / MSECV = 2 f grad f / f^2
            let gradient = g * (2.0 / cv.rmsecv) + dsize * unit;
            Ok(CriterionValue {
                value: error_term + size_term,
                gradient,
                error_term,
                size_term,
            })
        }
    }
}

/// Value of [`embedded_abic_objective`] without the gradient.
pub fn objective_value(data: &Dataset, cfg: &ObjectiveConfig, lambda: &WeightVector) -> Result<f64> {
    cfg.validate()?;
    let cv = weighted_rmsecv(data, &cfg.plan, cfg.factors, lambda)?;
    match cfg.kind {
        ObjectiveKind::Rmsecv => Ok(cv.rmsecv),
        ObjectiveKind::EmbeddedAbic => {
            if cv.msecv <= 0.0 {
                return Err(SrcekError::PerfectFit);
            }
            let size = mrpq(lambda.as_array(), cfg.p, cfg.q)?;
            Ok(cv.msecv.ln() + size_penalty(size, data.n_objects(), cfg.factors)?)
        }
    }
}

/// The criterion as an optimizer blackbox over `lambda`.
pub struct SelectionObjective<'a> {
    pub data: &'a Dataset,
    pub cfg: &'a ObjectiveConfig,
}

impl crate::bfgs::Objective for SelectionObjective<'_> {
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        objective_value(self.data, self.cfg, &WeightVector(x.clone()))
    }

    fn value_and_gradient(&self, x: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        let c = embedded_abic_objective(self.data, self.cfg, &WeightVector(x.clone()))?;
        Ok((c.value, c.gradient))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn binary_vectors_count_their_support() {
        for &(p, q) in &[(1.0, 2.0), (0.8, 2.4), (2.0, 5.0)] {
            for j in 1..=6 {
                let mut v = Array1::zeros(9);
                for i in 0..j {
                    v[(4 * i) % 9] = 3.7;
                }
                let got = mrpq(&v, p, q).unwrap();
                assert!((got - j as f64).abs() < 1e-12, "p={p} q={q} j={j}: {got}");
            }
        }
    }

    #[test]
    fn unit_circle_values() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mrpq(&array![s, s], 1.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((mrpq(&array![1.0, 0.0], 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((mrpq(&array![0.0, 1.0], 0.8, 2.4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_and_bad_exponents() {
        assert!(mrpq(&array![0.0, 0.0], 1.0, 2.0).is_err());
        assert!(mrpq(&array![1.0, 0.0], 2.0, 1.0).is_err());
        assert!(mrpq(&array![1.0, 0.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn abic_table_arithmetic() {
        let a = discrete_abic(1.203f64.powi(2), 60, 2, 2).unwrap();
        assert!((a - 0.514).abs() < 1e-3, "{a}");
        let b = discrete_abic(1.354f64.powi(2), 60, 2, 8).unwrap();
        assert!((b - 1.18).abs() < 1e-2, "{b}");
        assert_eq!(discrete_abic(2.5, 60, 2, 0).unwrap(), 2.5f64.ln());
        assert!(discrete_abic(1.0, 3, 2, 1).is_err());
        assert!(discrete_abic(0.0, 30, 2, 1).is_err());
    }
}
