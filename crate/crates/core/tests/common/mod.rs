//! Test-only oracles, written from the model rules without touching the
//! library's generator or solvers.

#![allow(dead_code)]

use tsp_aqm::{FeedbackPolicy, ModelParams, RawParams};

pub fn tiny_instance() -> ModelParams {
    RawParams {
        capacity_n: 4,
        threshold_r: 1,
        threshold_l: 2,
        lambda_rt: 1.0,
        lambda_nrt: 1.0,
        mu_rt: 2.0,
        mu_nrt: 3.0,
        feedback: FeedbackPolicy::Linear,
    }
    .validate()
    .unwrap()
}

pub fn canonical(lambda_nrt: f64, policy: FeedbackPolicy) -> ModelParams {
    RawParams::canonical(lambda_nrt, policy).validate().unwrap()
}

/// NRT admission rate at occupancy `k`, restated from the model description.
pub fn feedback_rate(p: &ModelParams, k: usize) -> f64 {
    let (l, h, lam1) = (p.threshold_l(), p.threshold_h(), p.lambda_nrt());
    if k < l {
        lam1
    } else if k < h {
        match p.feedback() {
            FeedbackPolicy::Linear => lam1 * (h as f64 - k as f64) / (h as f64 - l as f64),
            FeedbackPolicy::ConstantFraction(c) => c * lam1,
        }
    } else {
        0.0
    }
}

/// Dense generator, row-major over `(i, j)` with index `i*(H+1) + j`.
pub fn dense_generator(p: &ModelParams) -> Vec<Vec<f64>> {
    let (r, h) = (p.threshold_r(), p.threshold_h());
    let idx = |i: usize, j: usize| i * (h + 1) + j;
    let n = (r + 1) * (h + 1);
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..=r {
        for j in 0..=h {
            let s = idx(i, j);
            if i < r {
                q[s][idx(i + 1, j)] += p.lambda_rt();
            }
            let a = feedback_rate(p, i + j);
            if a > 0.0 {
                q[s][idx(i, j + 1)] += a;
            }
            if i > 0 {
                q[s][idx(i - 1, j)] += p.mu_rt();
            } else if j > 0 {
                q[s][idx(i, j - 1)] += p.mu_nrt();
            }
            let out: f64 = q[s].iter().sum();
            q[s][s] = -out;
        }
    }
    q
}

/// Solves `pi Q = 0, sum pi = 1` by replacing the last balance equation with
/// the normalization and running Gaussian elimination with partial pivoting.
pub fn dense_null_space_solve(q: &[Vec<f64>]) -> Vec<f64> {
    let n = q.len();
    // Row s of `a` is column s of Q (the balance equation of state s).
    let mut a: Vec<Vec<f64>> = (0..n).map(|s| (0..n).map(|t| q[t][s]).collect()).collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * y;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Exact stationary vector and metrics of [`tiny_instance`], from a
/// rational-arithmetic solve of the same chain.
pub mod tiny_exact {
    pub const PI: [f64; 8] = [
        162.0 / 427.0,
        72.0 / 427.0,
        38.0 / 427.0,
        38.0 / 1281.0,
        54.0 / 427.0,
        6.0 / 61.0,
        40.0 / 427.0,
        19.0 / 1281.0,
    ];
    pub const P_LRT: f64 = 1.0 / 3.0;
    pub const N_RT: f64 = 1.0 / 3.0;
    pub const N_NRT: f64 = 327.0 / 427.0;
    pub const LAMBDA_EFF: f64 = 368.0 / 427.0;
    pub const D_RT: f64 = 0.5;
    pub const D_NRT_PAPER: f64 = 88.0 / 69.0;
    pub const D_NRT_LITTLE: f64 = 327.0 / 368.0;
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Birth-death product form restated: `p(j) ∝ prod_{m<j} rate(m)/mu1`.
pub fn birth_death(p: &ModelParams) -> Vec<f64> {
    let h = p.threshold_h();
    let mut w = vec![1.0];
    for j in 1..=h {
        let prev = w[j - 1];
        w.push(prev * feedback_rate(p, j - 1) / p.mu_nrt());
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// M/M/1/R distribution restated.
pub fn mm1k(r: usize, lambda: f64, mu: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..=r).map(|i| (lambda / mu).powi(i as i32)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}
