//! Model parameters, the NRT feedback function and the two-dimensional
//! state space `{0..R} x {0..H}`.

use std::fmt;

use crate::error::{Error, Result};

/// How the NRT arrival rate is reduced inside the band `L <= k < H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackPolicy {
    /// Linear decrease from `lambda_nrt` at `k = L` to zero at `k = H`.
    Linear,
    /// Constant rate `c * lambda_nrt` anywhere in the band.
    ConstantFraction(f64),
}

impl FeedbackPolicy {
    /// Short tag used in CSV output and config files (`linear`, `constant:0.5`).
    pub fn tag(&self) -> String {
        match self {
            FeedbackPolicy::Linear => "linear".to_string(),
            FeedbackPolicy::ConstantFraction(c) => format!("constant:{c}"),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("linear") {
            return Some(FeedbackPolicy::Linear);
        }
        let c = text.strip_prefix("constant:")?.trim().parse::<f64>().ok()?;
        Some(FeedbackPolicy::ConstantFraction(c))
    }
}

impl fmt::Display for FeedbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Unvalidated parameters as supplied by a caller or a config file.
///
/// `H` is not part of the input; it is always derived as `N - R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub capacity_n: usize,
    pub threshold_r: usize,
    pub threshold_l: usize,
    pub lambda_rt: f64,
    pub lambda_nrt: f64,
    pub mu_rt: f64,
    pub mu_nrt: f64,
    pub feedback: FeedbackPolicy,
}

impl RawParams {
    /// The canonical configuration (`N=100, R=30, L=50, lambda=30, mu=30,
    /// mu1=35`) with the given NRT rate and policy.
    pub fn canonical(lambda_nrt: f64, feedback: FeedbackPolicy) -> Self {
        RawParams {
            capacity_n: 100,
            threshold_r: 30,
            threshold_l: 50,
            lambda_rt: 30.0,
            lambda_nrt,
            mu_rt: 30.0,
            mu_nrt: 35.0,
            feedback,
        }
    }

    pub fn validate(self) -> Result<ModelParams> {
        validate_params(self)
    }
}

/// A validated parameterization of the Markov chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    raw: RawParams,
    threshold_h: usize,
}

/// Checks threshold ordering, rates and the policy fraction; derives `H = N - R`.
pub fn validate_params(raw: RawParams) -> Result<ModelParams> {
    let RawParams {
        capacity_n: n,
        threshold_r: r,
        threshold_l: l,
        ..
    } = raw;
    if !(r > 0 && r < l && n > r && l < n - r) {
        return Err(Error::ThresholdOrderViolation { n, r, l });
    }
    for (name, value) in [
        ("lambda_rt", raw.lambda_rt),
        ("mu_rt", raw.mu_rt),
        ("mu_nrt", raw.mu_nrt),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositiveRate {
                name,
                requirement: "finite and > 0",
                value,
            });
        }
    }
    if !(raw.lambda_nrt.is_finite() && raw.lambda_nrt >= 0.0) {
        return Err(Error::NonPositiveRate {
            name: "lambda_nrt",
            requirement: "finite and >= 0",
            value: raw.lambda_nrt,
        });
    }
    if let FeedbackPolicy::ConstantFraction(c) = raw.feedback {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::BadFraction(c));
        }
    }
    Ok(ModelParams {
        raw,
        threshold_h: n - r,
    })
}

impl ModelParams {
    pub fn raw(&self) -> RawParams {
        self.raw
    }
    pub fn capacity_n(&self) -> usize {
        self.raw.capacity_n
    }
    pub fn threshold_r(&self) -> usize {
        self.raw.threshold_r
    }
    pub fn threshold_l(&self) -> usize {
        self.raw.threshold_l
    }
    pub fn threshold_h(&self) -> usize {
        self.threshold_h
    }
    pub fn lambda_rt(&self) -> f64 {
        self.raw.lambda_rt
    }
    pub fn lambda_nrt(&self) -> f64 {
        self.raw.lambda_nrt
    }
    pub fn mu_rt(&self) -> f64 {
        self.raw.mu_rt
    }
    pub fn mu_nrt(&self) -> f64 {
        self.raw.mu_nrt
    }
    pub fn feedback(&self) -> FeedbackPolicy {
        self.raw.feedback
    }

    /// Slope `a = -1/(H-L)` of the linear feedback `(a*k + b) * lambda_nrt`.
    pub fn linear_slope(&self) -> f64 {
        -1.0 / (self.threshold_h - self.threshold_l()) as f64
    }

    /// Intercept `b = H/(H-L)` of the linear feedback.
    pub fn linear_intercept(&self) -> f64 {
        self.threshold_h as f64 / (self.threshold_h - self.threshold_l()) as f64
    }

    /// NRT arrival rate at total occupancy `k`.
    pub fn arrival_rate_nrt(&self, k: i64) -> Result<f64> {
        if k < 0 || k as u64 > self.capacity_n() as u64 {
            return Err(Error::OutOfRangeOccupancy {
                k,
                capacity: self.capacity_n(),
            });
        }
        Ok(self.nrt_rate(k as usize))
    }

    /// Infallible form of [`arrival_rate_nrt`](Self::arrival_rate_nrt) for
    /// occupancies already known to be in range.
    pub fn nrt_rate(&self, k: usize) -> f64 {
        let (l, h) = (self.threshold_l(), self.threshold_h);
        let lambda1 = self.lambda_nrt();
        if k < l {
            lambda1
        } else if k < h {
            match self.feedback() {
                FeedbackPolicy::Linear => lambda1 * ((h - k) as f64 / (h - l) as f64),
                FeedbackPolicy::ConstantFraction(c) => c * lambda1,
            }
        } else {
            0.0
        }
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace::new(*self)
    }
}

/// `(rt, nrt)` packet counts: `X1(t)` and `X2(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub rt: usize,
    pub nrt: usize,
}

impl State {
    pub const fn new(rt: usize, nrt: usize) -> Self {
        State { rt, nrt }
    }

    /// Total occupancy `k = i + j`.
    pub fn occupancy(&self) -> usize {
        self.rt + self.nrt
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.rt, self.nrt)
    }
}

/// Row-major indexing of `{0..R} x {0..H}`: `index(i, j) = i*(H+1) + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpace {
    params: ModelParams,
}

impl StateSpace {
    pub fn new(params: ModelParams) -> Self {
        StateSpace { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn size(&self) -> usize {
        (self.params.threshold_r() + 1) * self.row_len()
    }

    /// Number of states sharing one RT count, `H + 1`.
    pub fn row_len(&self) -> usize {
        self.params.threshold_h() + 1
    }

    pub fn contains(&self, s: State) -> bool {
        s.rt <= self.params.threshold_r() && s.nrt <= self.params.threshold_h()
    }

    pub fn index(&self, s: State) -> Result<usize> {
        if !self.contains(s) {
            return Err(Error::InvalidState(s));
        }
        Ok(s.rt * self.row_len() + s.nrt)
    }

    pub fn state_of(&self, n: usize) -> Option<State> {
        (n < self.size()).then(|| State::new(n / self.row_len(), n % self.row_len()))
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.size()).map(move |n| State::new(n / self.row_len(), n % self.row_len()))
    }
}

/// All states in index order.
pub fn enumerate_states(params: &ModelParams) -> Vec<State> {
    params.state_space().states().collect()
}
