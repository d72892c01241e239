//! Stationary distribution of a finite generator.
//!
//! The direct backend is Grassmann–Taksar–Heyman state reduction on banded
//! storage: every quantity it forms is a sum or product of nonnegative
//! numbers, so there is no cancellation. The iterative backend runs the power
//! method on the uniformized chain and is used to cross-check.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::generator::RateMatrix;

/// Residual bound a direct solve must meet before its output is used.
pub const DIRECT_RESIDUAL_BOUND: f64 = 1e-10;
/// Default iterate-difference tolerance for the power method.
pub const DEFAULT_ITERATIVE_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 2_000_000;
/// Uniformization constant as a multiple of the largest row outflow.
const UNIFORMIZATION_FACTOR: f64 = 1.01;
/// Iterations over which the contraction rate is averaged.
const RATE_WINDOW: usize = 10;

/// Geometric-tail bound `d * g / (1 - g)` on the distance to the fixed point,
/// with `g` the mean per-step contraction over the window.
fn tail_estimate(history: &VecDeque<f64>) -> f64 {
    let (Some(&first), Some(&last)) = (history.front(), history.back()) else {
        return f64::INFINITY;
    };
    if last == 0.0 {
        return 0.0;
    }
    if history.len() <= RATE_WINDOW || first == 0.0 {
        return f64::INFINITY;
    }
    let g = (last / first).powf(1.0 / RATE_WINDOW as f64);
    if g >= 1.0 {
        f64::INFINITY
    } else {
        last * g / (1.0 - g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectElimination,
    UniformizationPower,
    /// Built from a caller-supplied vector, not by a solver.
    Supplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probabilities: Vec<f64>,
    residual_inf: f64,
    method: SolveMethod,
    iterations: usize,
}

impl StationaryDistribution {
    /// Wraps an arbitrary vector; the residual is left as NaN until a
    /// generator is supplied via [`with_residual`](Self::with_residual).
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        StationaryDistribution {
            probabilities,
            residual_inf: f64::NAN,
            method: SolveMethod::Supplied,
            iterations: 0,
        }
    }

    pub fn with_residual(mut self, gen: &RateMatrix) -> Result<Self> {
        self.residual_inf = residual_inf_norm(gen, &self)?;
        Ok(self)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
    pub fn residual_inf(&self) -> f64 {
        self.residual_inf
    }
    pub fn method(&self) -> SolveMethod {
        self.method
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }
    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Max-norm distance to another distribution.
    pub fn max_abs_diff(&self, other: &StationaryDistribution) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `max_s |(pi * Q)(s)|`.
pub fn residual_inf_norm(gen: &RateMatrix, dist: &StationaryDistribution) -> Result<f64> {
    let y = gen.left_multiply(dist.probabilities())?;
    Ok(y.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// States reachable from state 0, in ascending order. Fails if some
/// reachable state cannot return to 0, i.e. the class is not closed and
/// communicating.
fn recurrent_class(gen: &RateMatrix) -> Result<Vec<usize>> {
    let dim = gen.dimension();
    let mut forward = vec![false; dim];
    let mut queue = VecDeque::from([0usize]);
    forward[0] = true;
    while let Some(n) = queue.pop_front() {
        for (c, _) in gen.row(n) {
            if !forward[c] {
                forward[c] = true;
                queue.push_back(c);
            }
        }
    }

    let mut reverse_adj = vec![Vec::new(); dim];
    for n in (0..dim).filter(|&n| forward[n]) {
        for (c, _) in gen.row(n) {
            reverse_adj[c].push(n);
        }
    }
    let mut backward = vec![false; dim];
    backward[0] = true;
    queue.push_back(0);
    while let Some(n) = queue.pop_front() {
        for &src in &reverse_adj[n] {
            if !backward[src] {
                backward[src] = true;
                queue.push_back(src);
            }
        }
    }
    if let Some(bad) = (0..dim).find(|&n| forward[n] && !backward[n]) {
        return Err(Error::ReducibleChain(bad));
    }
    Ok((0..dim).filter(|&n| forward[n]).collect())
}

/// Square matrix restricted to `|row - col| <= band`.
struct BandMatrix {
    band: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn new(dim: usize, band: usize) -> Self {
        let width = 2 * band + 1;
        BandMatrix {
            band,
            width,
            data: vec![0.0; dim * width],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.band - i)
    }
}

/// Stationary distribution by GTH elimination over the recurrent class of
/// state 0. States outside that class get probability exactly zero.
pub fn solve_stationary_direct(gen: &RateMatrix) -> Result<StationaryDistribution> {
    let dim = gen.dimension();
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let class = recurrent_class(gen)?;
    let m = class.len();
    let mut local = vec![usize::MAX; dim];
    for (c, &n) in class.iter().enumerate() {
        local[n] = c;
    }

    let band = class
        .iter()
        .flat_map(|&n| {
            let local = &local;
            gen.row(n).map(move |(c, _)| local[n].abs_diff(local[c]))
        })
        .max()
        .unwrap_or(0);
    let mut a = BandMatrix::new(m, band);
    for (li, &n) in class.iter().enumerate() {
        for (c, rate) in gen.row(n) {
            let idx = a.at(li, local[c]);
            a.data[idx] = rate;
        }
    }

    for n in (1..m).rev() {
        let lo = n.saturating_sub(band);
        let pivot: f64 = (lo..n).map(|j| a.data[a.at(n, j)]).sum();
        if pivot <= 0.0 {
            return Err(Error::ReducibleChain(class[n]));
        }
        for i in lo..n {
            let idx = a.at(i, n);
            a.data[idx] /= pivot;
        }
        for i in lo..n {
            let scaled = a.data[a.at(i, n)];
            if scaled == 0.0 {
                continue;
            }
            for j in lo..n {
                let out = a.data[a.at(n, j)];
                if out != 0.0 {
                    let idx = a.at(i, j);
                    a.data[idx] += scaled * out;
                }
            }
        }
    }

    let mut pi_local = vec![0.0; m];
    pi_local[0] = 1.0;
    for j in 1..m {
        let lo = j.saturating_sub(band);
        pi_local[j] = (lo..j).map(|i| pi_local[i] * a.data[a.at(i, j)]).sum();
    }
    let total: f64 = pi_local.iter().sum();
    let mut probabilities = vec![0.0; dim];
    for (c, &n) in class.iter().enumerate() {
        probabilities[n] = pi_local[c] / total;
    }

    StationaryDistribution {
        probabilities,
        residual_inf: 0.0,
        method: SolveMethod::DirectElimination,
        iterations: 0,
    }
    .with_residual(gen)
}

/// Power iteration on `P = I + Q / Lambda`, `Lambda = 1.01 * max outflow`,
/// started from the uniform vector. Stops once successive iterates differ
/// by at most `tol` in max-norm and the geometric-tail estimate of the
/// remaining error is also below `tol`; slowly mixing chains otherwise stop
/// far from the fixed point.
pub fn solve_stationary_iterative(
    gen: &RateMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDistribution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidConfig(format!(
            "iterative solve needs tol > 0 and max_iter > 0 (got {tol}, {max_iter})"
        )));
    }
    let dim = gen.dimension();
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let outflow = gen.max_outflow();
    let uniformization = if outflow > 0.0 {
        UNIFORMIZATION_FACTOR * outflow
    } else {
        1.0
    };
    // Self-loop probability per state: 1 + q(s,s)/Lambda.
    let stay: Vec<f64> = (0..dim)
        .map(|n| 1.0 + gen.diagonal(n) / uniformization)
        .collect();

    let mut x = vec![1.0 / dim as f64; dim];
    let mut y = vec![0.0; dim];
    let mut difference = f64::INFINITY;
    // Recent iterate differences, used to estimate the contraction rate.
    let mut history: VecDeque<f64> = VecDeque::with_capacity(RATE_WINDOW + 1);
    for iter in 1..=max_iter {
        for (yn, (xn, s)) in y.iter_mut().zip(x.iter().zip(&stay)) {
            *yn = xn * s;
        }
        for (n, &xn) in x.iter().enumerate() {
            if xn == 0.0 {
                continue;
            }
            for (c, rate) in gen.row(n) {
                y[c] += xn * rate / uniformization;
            }
        }
        let total: f64 = y.iter().sum();
        difference = 0.0;
        for (yn, xn) in y.iter_mut().zip(&x) {
            *yn /= total;
            difference = f64::max(difference, (*yn - xn).abs());
        }
        std::mem::swap(&mut x, &mut y);
        history.push_back(difference);
        if history.len() > RATE_WINDOW + 1 {
            history.pop_front();
        }
        if difference <= tol && tail_estimate(&history) <= tol {
            return StationaryDistribution {
                probabilities: x,
                residual_inf: 0.0,
                method: SolveMethod::UniformizationPower,
                iterations: iter,
            }
            .with_residual(gen);
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        difference,
        last: x,
    })
}
