//! Weighted PLS regression (single response) in two algebraically equivalent
//! forms: explicit deflation of the predictor matrix, and an implicit form
//! that works entirely in object space through the preimages `V_k`.
//!
//! Both forms use unnormalized weight, score and loading vectors, so the
//! matrix `P^T W` is upper bidiagonal with unit diagonal and the regression
//! vector follows by a short back substitution.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};

/// Relative tolerance for `|r_k| <= eps * |y| * |T_k| * max(gamma)`.
pub const RANK_EPS: f64 = 1e-12;

/// Relative tolerance on the weight vector norm: since `r_k = |W_k|^2`,
/// rank is also exhausted once `r_k <= (eps * |X|_F * |y| * max(gamma))^2`.
/// This catches the case where `X_k` has deflated to rounding noise, which
/// the cosine test above cannot see. The level is about the square root of
/// machine precision: a smaller `W_k` carries no reliable direction.
pub const WEIGHT_EPS: f64 = 1.5e-8;

/// The affine model `y ~ X beta + beta0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WplsModel {
    pub beta: Array1<f64>,
    pub beta0: f64,
    pub factors_used: usize,
}

impl WplsModel {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.beta) + self.beta0
    }
}

/// Factorization internals. Column `k` of `t` and `p` holds `T_k` and `P_k`
/// for `k = 0..=l'`; column `k - 1` of `w` and `v` holds `W_k` and its
/// preimage `V_k` for `k = 1..=l'`. `w_scalars[k]` is `w_k` for
/// `k = 0..l'` (so `w_scalars[0] = 0` and entries `1..` are the
/// superdiagonal of `P^T W`).
#[derive(Debug, Clone, PartialEq)]
pub struct WplsFactorization {
    pub t: Array2<f64>,
    pub p: Array2<f64>,
    pub w: Array2<f64>,
    pub v: Array2<f64>,
    pub q: Array1<f64>,
    pub w_scalars: Array1<f64>,
    pub t_scalars: Array1<f64>,
    pub r_scalars: Array1<f64>,
}

/// Rank-termination test shared by every WPLS variant so that all of them
/// stop at the same factor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RankTest {
    y_norm: f64,
    gamma_max: f64,
    floor: f64,
}

impl RankTest {
    pub(crate) fn new(y: ArrayView1<f64>, gamma: ArrayView1<f64>, x_fro: f64) -> Self {
        let y_norm = y.dot(&y).sqrt();
        let gamma_max = gamma.fold(0.0f64, |a, &b| a.max(b));
        let s = WEIGHT_EPS * x_fro * y_norm * gamma_max;
        RankTest {
            y_norm,
            gamma_max,
            floor: s * s,
        }
    }

    pub(crate) fn exhausted(&self, r_k: f64, t_norm: f64) -> bool {
        r_k.abs() <= RANK_EPS * self.y_norm * t_norm * self.gamma_max || r_k.abs() <= self.floor
    }
}

/// Largest factor count the data can support: `T_0` takes one of the `m`
/// object-space dimensions, and the `W_k` are mutually orthogonal in `R^n`.
pub(crate) fn effective_factors(l: usize, m: usize, n: usize) -> Result<usize> {
    if l == 0 {
        return Err(SrcekError::FactorCount {
            requested: l,
            reason: "at least one factor is required".into(),
        });
    }
    Ok(l.min(m - 1).min(n))
}

/// Solves the unit-diagonal upper bidiagonal system `M v = q` for
/// `q = (q_1..q_l)`, where `w = (w_0..w_{l-1})` and `M[k, k+1] = w_k`.
pub(crate) fn bidiagonal_back_substitution(q: &[f64], w: &[f64]) -> Vec<f64> {
    let l = q.len();
    let mut v = vec![0.0; l];
    if l == 0 {
        return v;
    }
    v[l - 1] = q[l - 1];
    for j in (0..l - 1).rev() {
        v[j] = q[j] - w[j + 1] * v[j + 1];
    }
    v
}

pub(crate) fn gamma_dot(gamma: &Array1<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut s = 0.0;
    for ((g, x), y) in gamma.iter().zip(a.iter()).zip(b.iter()) {
        s += g * x * y;
    }
    s
}

fn columns(vectors: &[Array1<f64>], len: usize) -> Array2<f64> {
    let mut out = Array2::zeros((len, vectors.len()));
    for (j, v) in vectors.iter().enumerate() {
        out.column_mut(j).assign(v);
    }
    out
}

fn ensure_finite<'a>(what: &'static str, mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SrcekError::NonFinite(what))
    }
}

fn frobenius(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Weighted PLS by explicit deflation of `X`.
pub fn wpls_vanilla(data: &Dataset, l: usize) -> Result<(WplsModel, WplsFactorization)> {
    data.validate()?;
    let (m, n) = data.x.dim();
    let l = effective_factors(l, m, n)?;
    let gamma = &data.gamma;
    let y = &data.y;
    let gy = gamma * y;
    let rank = RankTest::new(y.view(), gamma.view(), frobenius(&data.x));

    let mut xk = data.x.clone();
    let mut tk = Array1::<f64>::ones(m);
    let mut ts: Vec<Array1<f64>> = Vec::with_capacity(l + 1);
    let mut ps: Vec<Array1<f64>> = Vec::with_capacity(l + 1);
    let mut ws: Vec<Array1<f64>> = Vec::with_capacity(l);
    let mut q = Vec::with_capacity(l + 1);
    let mut t_sc = Vec::with_capacity(l + 1);
    let mut r_sc = Vec::with_capacity(l + 1);
    let mut used = l;

    for k in 0..=l {
        let r_k = gy.dot(&tk);
        if k > 0 && rank.exhausted(r_k, tk.dot(&tk).sqrt()) {
            // W_k and T_k carry no information about y
            used = k - 1;
            ws.truncate(used);
            break;
        }
        let gt = gamma * &tk;
        let t_k = tk.dot(&gt);
        let pk = xk.t().dot(&gt) / t_k;
        let q_k = r_k / t_k;
        if !(t_k.is_finite() && q_k.is_finite()) {
            return Err(SrcekError::NonFinite("WPLS score normalization"));
        }
        if k < l {
            general_mat_mul(
                -1.0,
                &tk.view().insert_axis(Axis(1)),
                &pk.view().insert_axis(Axis(0)),
                1.0,
                &mut xk,
            );
            let wk = xk.t().dot(&gy);
            let next_t = xk.dot(&wk);
            ws.push(wk);
            ts.push(std::mem::replace(&mut tk, next_t));
        } else {
            ts.push(tk.clone());
        }
        ps.push(pk);
        q.push(q_k);
        t_sc.push(t_k);
        r_sc.push(r_k);
    }
    ts.truncate(used + 1);

    // beta = W (P^T W)^{-1} q, with P^T W upper triangular
    let mut v = vec![0.0; used];
    for j in (0..used).rev() {
        let mut s = q[j + 1];
        for i in j + 1..used {
            s -= ps[j + 1].dot(&ws[i]) * v[i];
        }
        v[j] = s / ps[j + 1].dot(&ws[j]);
    }
    let mut beta = Array1::<f64>::zeros(n);
    for (wk, vk) in ws.iter().zip(&v) {
        beta.scaled_add(*vk, wk);
    }
    let beta0 = q[0] - ps[0].dot(&beta);
    ensure_finite("WPLS regression vector", beta.iter().chain(std::iter::once(&beta0)))?;

    // preimages: V_1 = y - q_0 T_0, V_{k+1} = V_k - q_k T_k
    let mut vs = Vec::with_capacity(used);
    let mut vk = y.clone();
    for k in 0..used {
        vk.scaled_add(-q[k], &ts[k]);
        vs.push(vk.clone());
    }
    let mut w_scalars = vec![0.0; used];
    for k in 1..used {
        w_scalars[k] = ps[k].dot(&ws[k]);
    }

    let fact = WplsFactorization {
        t: columns(&ts, m),
        p: columns(&ps, n),
        w: columns(&ws, n),
        v: columns(&vs, m),
        q: Array1::from(q),
        w_scalars: Array1::from(w_scalars),
        t_scalars: Array1::from(t_sc),
        r_scalars: Array1::from(r_sc),
    };
    Ok((
        WplsModel {
            beta,
            beta0,
            factors_used: used,
        },
        fact,
    ))
}

/// Removes from `t` its gamma-projections onto the earlier scores `prev`,
/// whose gamma-norms squared are `norms`. A no-op in exact arithmetic.
pub(crate) fn reorthogonalize<'a>(
    t: &mut Array1<f64>,
    prev: impl Iterator<Item = &'a Array1<f64>>,
    norms: &[f64],
    gamma: &Array1<f64>,
) {
    for (tj, nj) in prev.zip(norms) {
        let s = gamma_dot(gamma, tj.view(), t.view()) / nj;
        t.scaled_add(-s, tj);
    }
}

/// `X X^T diag(gamma)`.
pub(crate) fn gram_gamma(x: &Array2<f64>, gamma: &Array1<f64>) -> Array2<f64> {
    let mut k = x.dot(&x.t());
    k *= &gamma.view().insert_axis(Axis(0));
    k
}

/// Weighted PLS without forming the deflated matrices; every per-factor
/// quantity lives in object space. Produces the same model and factorization
/// as [`wpls_vanilla`] up to rounding.
pub fn wpls_implicit(data: &Dataset, l: usize) -> Result<(WplsModel, WplsFactorization)> {
    data.validate()?;
    let (m, n) = data.x.dim();
    let l = effective_factors(l, m, n)?;
    let gamma = &data.gamma;
    let y = &data.y;
    let gy = gamma * y;
    let rank = RankTest::new(y.view(), gamma.view(), frobenius(&data.x));
    let kern = gram_gamma(&data.x, gamma);
    let t0 = gamma.sum();

    let mut tk = Array1::<f64>::ones(m);
    let mut vk = y.clone();
    let mut ts = Vec::with_capacity(l + 1);
    let mut vs: Vec<Array1<f64>> = Vec::with_capacity(l);
    let mut q = Vec::with_capacity(l + 1);
    let mut w_sc = Vec::with_capacity(l);
    let mut t_sc = Vec::with_capacity(l + 1);
    let mut r_sc = Vec::with_capacity(l + 1);
    let mut used = l;

    for k in 0..=l {
        let r_k = gy.dot(&tk);
        if k > 0 && rank.exhausted(r_k, tk.dot(&tk).sqrt()) {
            used = k - 1;
            vs.truncate(used);
            w_sc.truncate(used);
            break;
        }
        let t_k = gamma_dot(gamma, tk.view(), tk.view());
        let q_k = r_k / t_k;
        if !(t_k.is_finite() && q_k.is_finite()) {
            return Err(SrcekError::NonFinite("WPLS score normalization"));
        }
        q.push(q_k);
        t_sc.push(t_k);
        r_sc.push(r_k);
        if k < l {
            vk.scaled_add(-q_k, &tk);
            let qv = kern.dot(&vk);
            let u = &qv - gamma.dot(&qv) / t0;
            let w_k = gamma_dot(gamma, tk.view(), u.view()) / t_k;
            let mut next_t = &u - &(w_k * &tk);
            reorthogonalize(&mut next_t, ts.iter().chain(std::iter::once(&tk)), &t_sc, gamma);
            vs.push(vk.clone());
            w_sc.push(w_k);
            ts.push(std::mem::replace(&mut tk, next_t));
        } else {
            ts.push(tk.clone());
        }
    }
    ts.truncate(used + 1);

    let coef = bidiagonal_back_substitution(&q[1..=used], &w_sc);
    let mut alpha = Array1::<f64>::zeros(m);
    for (vk, c) in vs.iter().zip(&coef) {
        alpha.scaled_add(*c, vk);
    }
    let beta = data.x.t().dot(&(gamma * &alpha));
    let beta0 = q[0] - gamma.dot(&data.x.dot(&beta)) / t0;
    ensure_finite("WPLS regression vector", beta.iter().chain(std::iter::once(&beta0)))?;

    let xg = data.x.t();
    let ps: Vec<Array1<f64>> = ts
        .iter()
        .zip(&t_sc)
        .map(|(t, tk)| xg.dot(&(gamma * t)) / *tk)
        .collect();
    let ws: Vec<Array1<f64>> = vs.iter().map(|v| xg.dot(&(gamma * v))).collect();
    let fact = WplsFactorization {
        t: columns(&ts, m),
        p: columns(&ps, n),
        w: columns(&ws, n),
        v: columns(&vs, m),
        q: Array1::from(q),
        w_scalars: Array1::from(w_sc),
        t_scalars: Array1::from(t_sc),
        r_scalars: Array1::from(r_sc),
    };
    Ok((
        WplsModel {
            beta,
            beta0,
            factors_used: used,
        },
        fact,
    ))
}
