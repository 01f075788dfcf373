//! Dense BFGS with a value-only Armijo backtracking line search.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrcekError};

/// A differentiable blackbox. The line search only ever calls [`value`].
///
/// [`value`]: Objective::value
pub trait Objective {
    fn value(&self, x: &Array1<f64>) -> Result<f64>;
    fn value_and_gradient(&self, x: &Array1<f64>) -> Result<(f64, Array1<f64>)>;
}

/// Adapts a pair of closures to [`Objective`].
pub struct FnObjective<F, G> {
    pub value: F,
    pub value_and_gradient: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&Array1<f64>) -> Result<f64>,
    G: Fn(&Array1<f64>) -> Result<(f64, Array1<f64>)>,
{
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        (self.value)(x)
    }

    fn value_and_gradient(&self, x: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        (self.value_and_gradient)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub initial_hessian_scale: f64,
    pub max_iterations: usize,
    /// Budget on objective evaluations of either kind.
    pub max_evaluations: usize,
    pub grad_norm_tol: f64,
    /// Zero disables the relative-change test.
    pub rel_obj_change_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            initial_hessian_scale: 1.0,
            max_iterations: 200,
            max_evaluations: 5000,
            grad_norm_tol: 1e-6,
            rel_obj_change_tol: 1e-5,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
        }
    }
}

impl BfgsOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_hessian_scale > 0.0
            && self.initial_hessian_scale.is_finite()
            && self.grad_norm_tol >= 0.0
            && self.rel_obj_change_tol >= 0.0
            && self.armijo_c1 > 0.0
            && self.armijo_c1 < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SrcekError::InvalidArgument(format!(
                "invalid optimizer options: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GradTol,
    RelChange,
    MaxIter,
    MaxEval,
    LineSearchFailure,
    /// The objective or its gradient could not be evaluated at an accepted
    /// point (for instance a perfect fit has no RMSECV gradient).
    ObjectiveUnavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Cumulative objective evaluations (value-only and with gradient).
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub initial_objective: f64,
    pub initial_grad_norm: f64,
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub value_evaluations: usize,
    pub gradient_evaluations: usize,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub value: f64,
    pub evaluations: usize,
}

const MIN_STEP: f64 = 1e-16;

/// Largest step `initial_step * backtrack_factor^i` with
/// `f(x + s d) <= f(x) + c1 s grad.d`. Evaluation failures and non-finite
/// values count as rejections.
pub fn backtracking_line_search<O: Objective + ?Sized>(
    f: &O,
    x: &Array1<f64>,
    direction: &Array1<f64>,
    f_x: f64,
    grad_x: &Array1<f64>,
    opts: &BfgsOptions,
) -> Result<LineSearchOutcome> {
    let slope = grad_x.dot(direction);
    if !(slope < 0.0) {
        return Err(SrcekError::NotDescent(slope));
    }
    let mut step = opts.initial_step;
    let mut evaluations = 0;
    while step >= MIN_STEP {
        let trial = x + &(direction * step);
        evaluations += 1;
        if let Ok(v) = f.value(&trial) {
            if v.is_finite() && v <= f_x + opts.armijo_c1 * step * slope {
                return Ok(LineSearchOutcome {
                    step,
                    value: v,
                    evaluations,
                });
            }
        }
        step *= opts.backtrack_factor;
    }
    Err(SrcekError::LineSearchFailure)
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Minimizes `f` from `x0`. Search directions come from the inverse-Hessian
/// approximation `H`, started at `scale * I` and updated by the BFGS
/// two-rank formula when `y.s > 1e-10 |y| |s|`.
pub fn bfgs_minimize<O: Objective + ?Sized>(
    f: &O,
    x0: &Array1<f64>,
    opts: &BfgsOptions,
) -> Result<(Array1<f64>, OptimizerTrace)> {
    opts.validate()?;
    let n = x0.len();
    let (mut fx, mut g) = f.value_and_gradient(x0)?;
    if !fx.is_finite() {
        return Err(SrcekError::NonFinite("objective at the starting point"));
    }
    if g.len() != n || g.iter().any(|v| !v.is_finite()) {
        return Err(SrcekError::NonFinite("gradient at the starting point"));
    }
    let mut trace = OptimizerTrace {
        initial_objective: fx,
        initial_grad_norm: norm(&g),
        records: Vec::new(),
        termination: TerminationReason::GradTol,
        value_evaluations: 0,
        gradient_evaluations: 1,
    };
    let scale = opts.initial_hessian_scale;
    let mut h = Array2::<f64>::eye(n) * scale;
    let mut x = x0.clone();
    loop {
        let evals = trace.value_evaluations + trace.gradient_evaluations;
        if norm(&g) <= opts.grad_norm_tol {
            trace.termination = TerminationReason::GradTol;
            break;
        }
        if trace.records.len() >= opts.max_iterations {
            trace.termination = TerminationReason::MaxIter;
            break;
        }
        if evals >= opts.max_evaluations {
            trace.termination = TerminationReason::MaxEval;
            break;
        }
        let mut d = -h.dot(&g);
        if !(g.dot(&d) < 0.0) {
            h = Array2::eye(n) * scale;
            d = &g * -scale;
        }
        let ls = match backtracking_line_search(f, &x, &d, fx, &g, opts) {
            Ok(ls) => ls,
            Err(SrcekError::LineSearchFailure) => {
                trace.value_evaluations += line_search_budget(opts);
                trace.termination = TerminationReason::LineSearchFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        trace.value_evaluations += ls.evaluations;
        let s = &d * ls.step;
        let x_new = &x + &s;
        trace.gradient_evaluations += 1;
        let (f_new, g_new) = match f.value_and_gradient(&x_new) {
            Ok((v, gr)) if v.is_finite() && gr.iter().all(|t| t.is_finite()) => (v, gr),
            _ => {
                x = x_new;
                fx = ls.value;
                trace.records.push(IterationRecord {
                    iteration: trace.records.len() + 1,
                    objective: fx,
                    grad_norm: 0.0,
                    step: ls.step,
                    evaluations: trace.value_evaluations + trace.gradient_evaluations,
                });
                trace.termination = TerminationReason::ObjectiveUnavailable;
                break;
            }
        };
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T, r = 1 / y.s
            let r = 1.0 / sy;
            let hy = h.dot(&y);
            let yhy = y.dot(&hy);
            let c = r * r * yhy + r;
            for i in 0..n {
                for j in 0..n {
                    h[[i, j]] += c * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let denom = fx.abs().max(f_new.abs()).max(f64::MIN_POSITIVE);
        let rel = (fx - f_new).abs() / denom;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.records.push(IterationRecord {
            iteration: trace.records.len() + 1,
            objective: fx,
            grad_norm: norm(&g),
            step: ls.step,
            evaluations: trace.value_evaluations + trace.gradient_evaluations,
        });
        if opts.rel_obj_change_tol > 0.0 && rel <= opts.rel_obj_change_tol {
            trace.termination = TerminationReason::RelChange;
            break;
        }
    }
    Ok((x, trace))
}

fn line_search_budget(opts: &BfgsOptions) -> usize {
    // number of trial steps tried before the step fell below the floor
    let mut step = opts.initial_step;
    let mut k = 0;
    while step >= MIN_STEP {
        k += 1;
        step *= opts.backtrack_factor;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn square() -> impl Objective {
        FnObjective {
            value: |x: &Array1<f64>| Ok(x[0] * x[0]),
            value_and_gradient: |x: &Array1<f64>| Ok((x[0] * x[0], array![2.0 * x[0]])),
        }
    }

    #[test]
    fn full_step_on_exact_direction() {
        let f = square();
        let ls = backtracking_line_search(
            &f,
            &array![1.0],
            &array![-1.0],
            1.0,
            &array![2.0],
            &BfgsOptions::default(),
        )
        .unwrap();
        assert_eq!(ls.step, 1.0);
        assert_eq!(ls.value, 0.0);
    }

    #[test]
    fn overlong_direction_backtracks_twice() {
        // f(1 - 4s): s=1 -> 9, s=1/2 -> 1, s=1/4 -> 0; Armijo needs f <= 1 - 8e-4 s
        let f = square();
        let ls = backtracking_line_search(
            &f,
            &array![1.0],
            &array![-4.0],
            1.0,
            &array![2.0],
            &BfgsOptions::default(),
        )
        .unwrap();
        assert_eq!(ls.step, 0.25);
        assert_eq!(ls.evaluations, 3);
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let f = square();
        let e = backtracking_line_search(
            &f,
            &array![1.0],
            &array![1.0],
            1.0,
            &array![2.0],
            &BfgsOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, SrcekError::NotDescent(_)));
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let f = square();
        let (x, trace) = bfgs_minimize(&f, &array![0.0], &BfgsOptions::default()).unwrap();
        assert_eq!(x, array![0.0]);
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.termination, TerminationReason::GradTol);
    }
}
