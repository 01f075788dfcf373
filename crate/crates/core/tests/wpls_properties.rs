use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use srcek::cv::{weighted_rmsecv, CvPlan};
use srcek::data_io::artif::{random_dataset, random_weights};
use srcek::data_io::{autoscale_weights, channel_std};
use srcek::wpls::{wpls_implicit, wpls_vanilla};
use srcek::{Dataset, WeightVector};

fn rel(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let d = (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    d / (1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn gamma_dot(g: &Array1<f64>, a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    (&a * g).dot(&b)
}

#[test]
fn scores_are_gamma_orthogonal() {
    let d = random_dataset(10, 6, 4, true);
    for (_, f) in [wpls_vanilla(&d, 3).unwrap(), wpls_implicit(&d, 3).unwrap()] {
        for j in 0..f.t.ncols() {
            for k in 0..j {
                let (a, b) = (f.t.column(j), f.t.column(k));
                let c = gamma_dot(&d.gamma, a, b).abs()
                    / (gamma_dot(&d.gamma, a, a) * gamma_dot(&d.gamma, b, b)).sqrt();
                assert!(c < 1e-9, "T{j} vs T{k}: {c}");
            }
        }
    }
}

#[test]
fn exact_affine_data_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_simple_fn((12, 3), || rng.sample::<f64, _>(StandardNormal));
    let coef = ndarray::array![1.5, -2.0, 0.25];
    let y = x.dot(&coef) + 4.0;
    let d = Dataset::new(x, y).unwrap();
    for (m, _) in [wpls_vanilla(&d, 3).unwrap(), wpls_implicit(&d, 3).unwrap()] {
        assert!(rel(&m.beta, &coef) < 1e-10, "{}", m.beta);
        assert!((m.beta0 - 4.0).abs() < 1e-10);
    }
}

#[test]
fn unit_weights_reduce_to_ordinary_pls() {
    // oracle: explicit NIPALS on centered data with gamma = 1
    let d = random_dataset(9, 5, 21, false);
    let l = 3;
    let xm = d.x.mean_axis(Axis(0)).unwrap();
    let ym = d.y.mean().unwrap();
    let mut xk = &d.x - &xm.view().insert_axis(Axis(0));
    let mut yk = &d.y - ym;
    let mut ws = Vec::new();
    let mut ps = Vec::new();
    let mut cs = Vec::new();
    for _ in 0..l {
        let w = xk.t().dot(&yk);
        let w = &w / w.dot(&w).sqrt();
        let t = xk.dot(&w);
        let tt = t.dot(&t);
        let p = xk.t().dot(&t) / tt;
        let c = yk.dot(&t) / tt;
        xk = &xk - &t.view().insert_axis(Axis(1)).dot(&p.view().insert_axis(Axis(0)));
        yk = &yk - &(&t * c);
        ws.push(w);
        ps.push(p);
        cs.push(c);
    }
    // beta = W (P^T W)^{-1} c, solved by Gaussian elimination
    let wm = Array2::from_shape_fn((5, l), |(i, j)| ws[j][i]);
    let pm = Array2::from_shape_fn((5, l), |(i, j)| ps[j][i]);
    let mut a = pm.t().dot(&wm);
    let mut r = Array1::from(cs);
    for c in 0..l {
        for i in c + 1..l {
            let f = a[[i, c]] / a[[c, c]];
            for k in 0..l {
                a[[i, k]] -= f * a[[c, k]];
            }
            r[i] -= f * r[c];
        }
    }
    let mut z = Array1::zeros(l);
    for i in (0..l).rev() {
        let s: f64 = (i + 1..l).map(|k| a[[i, k]] * z[k]).sum();
        z[i] = (r[i] - s) / a[[i, i]];
    }
    let beta = wm.dot(&z);
    let (m, _) = wpls_vanilla(&d, l).unwrap();
    assert!(rel(&m.beta, &beta) < 1e-10, "{} vs {}", m.beta, beta);
    assert!((m.beta0 - (ym - xm.dot(&beta))).abs() < 1e-10);
}

#[test]
fn autoscaled_weights_match_prestandardized_data() {
    let d = random_dataset(15, 7, 8, false);
    let plan = CvPlan::interleaved(15, 5).unwrap();
    let lam = autoscale_weights(&d);
    let sd = channel_std(&d);
    let std_x = &d.x / &sd.view().insert_axis(Axis(0));
    let std_d = Dataset::new(std_x, d.y.clone()).unwrap();
    let a = weighted_rmsecv(&d, &plan, 3, &lam).unwrap();
    let b = weighted_rmsecv(&std_d, &plan, 3, &WeightVector::ones(7)).unwrap();
    assert!((a.rmsecv - b.rmsecv).abs() < 1e-12 * b.rmsecv);
}

#[test]
fn high_factor_counts_stay_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Array2::from_shape_simple_fn((32, 36), || rng.sample::<f64, _>(StandardNormal));
    let y = Array1::from_shape_simple_fn(32, || rng.sample::<f64, _>(StandardNormal));
    let g = Array1::from_shape_simple_fn(32, || rng.random_range(0.2..3.0));
    let d = Dataset::with_gamma(x, y, g).unwrap();
    let (a, _) = wpls_vanilla(&d, 30).unwrap();
    let (b, _) = wpls_implicit(&d, 30).unwrap();
    assert_eq!(a.factors_used, b.factors_used);
    assert!(rel(&a.beta, &b.beta) < 1e-8, "{}", rel(&a.beta, &b.beta));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vanilla_and_implicit_agree(seed in 0u64..10_000, m in 4usize..25, n in 2usize..30, l in 1usize..8) {
        let d = random_dataset(m, n, seed, seed % 2 == 0);
        let (a, _) = wpls_vanilla(&d, l).unwrap();
        let (b, _) = wpls_implicit(&d, l).unwrap();
        prop_assert_eq!(a.factors_used, b.factors_used);
        prop_assert!(rel(&a.beta, &b.beta) < 1e-8);
        prop_assert!((a.beta0 - b.beta0).abs() < 1e-8 * (1.0 + a.beta0.abs()));
    }

    #[test]
    fn effective_model_is_scale_invariant(seed in 0u64..10_000, s in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let d = random_dataset(14, 9, seed, true);
        let lam = random_weights(9, seed + 1);
        let eff = |lam: &Array1<f64>| {
            let (m, _) = wpls_vanilla(&d.weighted(lam).unwrap(), 3).unwrap();
            (&m.beta * lam, m.beta0)
        };
        let (e1, b1) = eff(&lam);
        let (e2, b2) = eff(&(&lam * s));
        prop_assert!(rel(&e1, &e2) < 1e-8);
        prop_assert!((b1 - b2).abs() < 1e-8 * (1.0 + b1.abs()));
    }

    #[test]
    fn factor_count_never_exceeds_request_or_rank(seed in 0u64..10_000, m in 3usize..12, n in 1usize..12, l in 1usize..15) {
        let d = random_dataset(m, n, seed, false);
        let (model, f) = wpls_implicit(&d, l).unwrap();
        prop_assert!(model.factors_used <= l.min(m - 1).min(n));
        prop_assert_eq!(f.t.ncols(), model.factors_used + 1);
    }
}
