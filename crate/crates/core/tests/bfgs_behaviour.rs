use std::cell::Cell;

use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use srcek::bfgs::{
    backtracking_line_search, bfgs_minimize, BfgsOptions, Objective, TerminationReason,
};
use srcek::{Result, SrcekError};

/// Counts value-only and value-plus-gradient calls.
struct Counted<F> {
    f: F,
    values: Cell<usize>,
    gradients: Cell<usize>,
}

impl<F> Counted<F> {
    fn new(f: F) -> Self {
        Counted {
            f,
            values: Cell::new(0),
            gradients: Cell::new(0),
        }
    }
}

impl<F: Fn(&Array1<f64>) -> (f64, Array1<f64>)> Objective for Counted<F> {
    fn value(&self, x: &Array1<f64>) -> Result<f64> {
        self.values.set(self.values.get() + 1);
        Ok((self.f)(x).0)
    }

    fn value_and_gradient(&self, x: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        self.gradients.set(self.gradients.get() + 1);
        Ok((self.f)(x))
    }
}

fn quadratic(a: Array2<f64>, b: Array1<f64>) -> impl Fn(&Array1<f64>) -> (f64, Array1<f64>) {
    move |x| {
        let ax = a.dot(x);
        (0.5 * x.dot(&ax) - b.dot(x), ax - &b)
    }
}

fn spd(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(&mut rng));
    m.t().dot(&m) + Array2::<f64>::eye(n)
}

#[test]
fn trace_invariants_hold_on_rosenbrock() {
    let f = Counted::new(|x: &Array1<f64>| {
        let (u, v) = (x[0], x[1]);
        (
            100.0 * (v - u * u).powi(2) + (1.0 - u).powi(2),
            array![-400.0 * u * (v - u * u) - 2.0 * (1.0 - u), 200.0 * (v - u * u)],
        )
    });
    let (x, trace) = bfgs_minimize(&f, &array![-1.2, 1.0], &BfgsOptions::default()).unwrap();
    assert!(matches!(
        trace.termination,
        TerminationReason::GradTol | TerminationReason::RelChange
    ));
    let mut prev = trace.initial_objective;
    let mut evals = 0;
    for (i, r) in trace.records.iter().enumerate() {
        assert_eq!(r.iteration, i + 1);
        assert!(r.objective < prev, "objective must strictly decrease");
        assert!(r.step > 0.0);
        assert!(r.evaluations > evals);
        prev = r.objective;
        evals = r.evaluations;
    }
    assert_eq!(trace.final_objective(), prev);
    assert_eq!(f.gradients.get(), trace.iterations() + 1);
    assert_eq!(trace.gradient_evaluations, trace.iterations() + 1);
    assert_eq!(f.values.get(), trace.value_evaluations);
    assert!((x[0] - 1.0).abs() < 1e-2);
}

#[test]
fn iteration_limit_is_respected() {
    let a = spd(8, 1);
    let f = Counted::new(quadratic(a, Array1::ones(8)));
    let opts = BfgsOptions {
        max_iterations: 3,
        grad_norm_tol: 1e-14,
        rel_obj_change_tol: 0.0,
        ..BfgsOptions::default()
    };
    let (_, trace) = bfgs_minimize(&f, &Array1::zeros(8), &opts).unwrap();
    assert_eq!(trace.iterations(), 3);
    assert_eq!(trace.termination, TerminationReason::MaxIter);
}

#[test]
fn evaluation_budget_is_respected() {
    let a = spd(8, 2);
    let f = Counted::new(quadratic(a, Array1::ones(8)));
    let opts = BfgsOptions {
        max_evaluations: 6,
        grad_norm_tol: 1e-14,
        rel_obj_change_tol: 0.0,
        ..BfgsOptions::default()
    };
    let (_, trace) = bfgs_minimize(&f, &Array1::zeros(8), &opts).unwrap();
    assert_eq!(trace.termination, TerminationReason::MaxEval);
    let used = f.values.get() + f.gradients.get();
    assert_eq!(used, trace.records.last().unwrap().evaluations);
    assert!(used >= 6);
    // the budget is checked between iterations
    let before = trace.records.iter().rev().nth(1).map_or(1, |r| r.evaluations);
    assert!(before < 6);
}

#[test]
fn stationary_start_returns_immediately() {
    let a = spd(4, 3);
    let b = Array1::ones(4);
    let f = Counted::new(quadratic(a.clone(), a.dot(&b)));
    let (x, trace) = bfgs_minimize(&f, &b, &BfgsOptions::default()).unwrap();
    assert_eq!(x, b);
    assert_eq!(trace.iterations(), 0);
    assert_eq!(trace.termination, TerminationReason::GradTol);
}

#[test]
fn non_finite_start_is_an_error() {
    let f = Counted::new(|_: &Array1<f64>| (f64::NAN, array![1.0]));
    assert!(bfgs_minimize(&f, &array![0.0], &BfgsOptions::default()).is_err());
}

#[test]
fn line_search_uses_values_only() {
    let f = Counted::new(|x: &Array1<f64>| (x[0] * x[0], array![2.0 * x[0]]));
    let x = array![1.0];
    let out = backtracking_line_search(&f, &x, &array![-4.0], 1.0, &array![2.0], &BfgsOptions::default())
        .unwrap();
    assert_eq!(out.step, 0.25);
    assert_eq!(f.gradients.get(), 0);
    assert_eq!(f.values.get(), out.evaluations);
}

#[test]
fn line_search_rejects_ascent_directions() {
    let f = Counted::new(|x: &Array1<f64>| (x[0] * x[0], array![2.0 * x[0]]));
    let r = backtracking_line_search(&f, &array![1.0], &array![1.0], 1.0, &array![2.0], &BfgsOptions::default());
    assert!(matches!(r, Err(SrcekError::NotDescent(_))));
}

#[test]
fn invalid_options_are_rejected() {
    let f = Counted::new(|x: &Array1<f64>| (x[0] * x[0], array![2.0 * x[0]]));
    for opts in [
        BfgsOptions { armijo_c1: 1.5, ..BfgsOptions::default() },
        BfgsOptions { backtrack_factor: 0.0, ..BfgsOptions::default() },
        BfgsOptions { initial_step: -1.0, ..BfgsOptions::default() },
    ] {
        assert!(bfgs_minimize(&f, &array![1.0], &opts).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_quadratics_are_solved(seed in 0u64..10_000, n in 1usize..10) {
        let a = spd(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let b = Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng));
        let opts = BfgsOptions { grad_norm_tol: 1e-8, rel_obj_change_tol: 0.0, ..BfgsOptions::default() };
        let f = Counted::new(quadratic(a.clone(), b.clone()));
        let (x, trace) = bfgs_minimize(&f, &Array1::zeros(n), &opts).unwrap();
        let r = a.dot(&x) - &b;
        prop_assert!(r.dot(&r).sqrt() <= 1e-6, "{:?}", trace.termination);
        prop_assert!(trace.iterations() <= 5 * n + 10);
    }
}
