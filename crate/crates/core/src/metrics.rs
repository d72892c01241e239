//! QoS metrics derived from a stationary distribution, and the two closed
//! forms (RT marginal, NRT-only birth-death chain) used to validate it.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::StationaryDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoSReport {
    pub params: ModelParams,
    pub p_lrt: f64,
    pub n_rt: f64,
    pub n_nrt: f64,
    pub d_rt: f64,
    /// `(N_RT + N_NRT) / lambda_eff`.
    pub d_nrt_paper: f64,
    /// `N_NRT / lambda_eff`, Little's law applied to the NRT class alone.
    pub d_nrt_little: f64,
    pub lambda_eff_nrt: f64,
}

impl QoSReport {
    pub fn compute(dist: &StationaryDistribution, params: &ModelParams) -> Result<Self> {
        let (d_nrt_paper, d_nrt_little) = delay_nrt(dist, params)?;
        Ok(QoSReport {
            params: *params,
            p_lrt: loss_probability_rt(dist, params)?,
            n_rt: mean_queue_rt(dist, params)?,
            n_nrt: mean_queue_nrt(dist, params)?,
            d_rt: delay_rt(dist, params)?,
            d_nrt_paper,
            d_nrt_little,
            lambda_eff_nrt: effective_nrt_rate(dist, params)?,
        })
    }
}

fn grid<'a>(dist: &'a StationaryDistribution, params: &ModelParams) -> Result<&'a [f64]> {
    let size = params.state_space().size();
    if dist.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            actual: dist.len(),
        });
    }
    Ok(dist.probabilities())
}

/// `(i, j, p(i,j))` over the whole state space.
fn cells<'a>(
    dist: &'a StationaryDistribution,
    params: &ModelParams,
) -> Result<impl Iterator<Item = (usize, usize, f64)> + 'a> {
    let probs = grid(dist, params)?;
    let row_len = params.threshold_h() + 1;
    Ok(probs
        .iter()
        .enumerate()
        .map(move |(n, &p)| (n / row_len, n % row_len, p)))
}

/// `P_LRT = sum_j p(R, j)`.
pub fn loss_probability_rt(dist: &StationaryDistribution, params: &ModelParams) -> Result<f64> {
    let r = params.threshold_r();
    Ok(cells(dist, params)?
        .filter(|&(i, _, _)| i == r)
        .map(|(_, _, p)| p)
        .sum())
}

pub fn mean_queue_rt(dist: &StationaryDistribution, params: &ModelParams) -> Result<f64> {
    Ok(cells(dist, params)?.map(|(i, _, p)| i as f64 * p).sum())
}

pub fn mean_queue_nrt(dist: &StationaryDistribution, params: &ModelParams) -> Result<f64> {
    Ok(cells(dist, params)?.map(|(_, j, p)| j as f64 * p).sum())
}

/// Admitted NRT rate: `sum p(i,j) * lambda1(i+j)` using the policy's band rate.
pub fn effective_nrt_rate(dist: &StationaryDistribution, params: &ModelParams) -> Result<f64> {
    Ok(cells(dist, params)?
        .map(|(i, j, p)| params.nrt_rate(i + j) * p)
        .sum())
}

/// `D_RT = N_RT / (lambda * (1 - P_LRT))`.
pub fn delay_rt(dist: &StationaryDistribution, params: &ModelParams) -> Result<f64> {
    let accepted = params.lambda_rt() * (1.0 - loss_probability_rt(dist, params)?);
    if !(accepted > 0.0) {
        return Err(Error::ZeroAcceptedFlow("RT"));
    }
    Ok(mean_queue_rt(dist, params)? / accepted)
}

/// Returns `(d_nrt_paper, d_nrt_little)`.
pub fn delay_nrt(dist: &StationaryDistribution, params: &ModelParams) -> Result<(f64, f64)> {
    let lambda_eff = effective_nrt_rate(dist, params)?;
    if !(lambda_eff > 0.0) {
        return Err(Error::ZeroAcceptedFlow("NRT"));
    }
    let n_rt = mean_queue_rt(dist, params)?;
    let n_nrt = mean_queue_nrt(dist, params)?;
    Ok(((n_rt + n_nrt) / lambda_eff, n_nrt / lambda_eff))
}

/// `sum_j p(i, j)` for `i = 0..=R`.
pub fn rt_marginal(dist: &StationaryDistribution, params: &ModelParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.threshold_r() + 1];
    for (i, _, p) in cells(dist, params)? {
        out[i] += p;
    }
    Ok(out)
}

/// `sum_i p(i, j)` for `j = 0..=H`.
pub fn nrt_marginal(dist: &StationaryDistribution, params: &ModelParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.threshold_h() + 1];
    for (_, j, p) in cells(dist, params)? {
        out[j] += p;
    }
    Ok(out)
}

/// M/M/1/R stationary distribution, `p(i) ∝ rho^i`.
pub fn rt_marginal_oracle(threshold_r: usize, lambda: f64, mu: f64) -> Vec<f64> {
    let rho = lambda / mu;
    // Weights relative to the largest term keep rho^R finite for rho > 1.
    let weights: Vec<f64> = (0..=threshold_r)
        .map(|i| {
            if rho <= 1.0 {
                rho.powi(i as i32)
            } else {
                rho.powi(i as i32 - threshold_r as i32)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Birth-death distribution of the NRT count when no RT traffic is present:
/// `p(j) ∝ prod_{m<j} lambda1(m) / mu1`, zero past the first zero birth rate.
pub fn nrt_only_oracle(params: &ModelParams) -> Vec<f64> {
    let h = params.threshold_h();
    let mut weights = vec![0.0; h + 1];
    weights[0] = 1.0;
    for j in 1..=h {
        let ratio = params.nrt_rate(j - 1) / params.mu_nrt();
        if ratio == 0.0 {
            break;
        }
        weights[j] = weights[j - 1] * ratio;
    }
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeedbackPolicy, RawParams};

    fn params(lambda_nrt: f64, policy: FeedbackPolicy) -> ModelParams {
        RawParams::canonical(lambda_nrt, policy).validate().unwrap()
    }

    fn point_mass(params: &ModelParams) -> StationaryDistribution {
        let mut v = vec![0.0; params.state_space().size()];
        v[0] = 1.0;
        StationaryDistribution::from_probabilities(v)
    }

    #[test]
    fn oracle_closed_forms() {
        assert!(rt_marginal_oracle(30, 30.0, 30.0)
            .iter()
            .all(|p| (p - 1.0 / 31.0).abs() < 1e-15));
        let half = rt_marginal_oracle(1, 1.0, 2.0);
        assert!((half[0] - 2.0 / 3.0).abs() < 1e-15 && (half[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rt_marginal_oracle(0, 5.0, 1.0), vec![1.0]);
        let heavy = rt_marginal_oracle(3, 2.0, 1.0);
        assert!((heavy[3] - 8.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn nrt_oracle_cases() {
        let p = params(0.0, FeedbackPolicy::Linear);
        let o = nrt_only_oracle(&p);
        assert_eq!(o[0], 1.0);
        assert!(o[1..].iter().all(|&x| x == 0.0));

        // c = 1 and lambda1 = mu1: every ratio is 1 up to the cutoff at H.
        let raw = RawParams {
            lambda_nrt: 35.0,
            ..RawParams::canonical(35.0, FeedbackPolicy::ConstantFraction(1.0))
        };
        let o = nrt_only_oracle(&raw.validate().unwrap());
        assert!(o.iter().all(|x| (x - 1.0 / 71.0).abs() < 1e-15));

        // Linear: last ratio uses lambda1 / (H - L) at m = H - 1.
        let p = params(20.0, FeedbackPolicy::Linear);
        let o = nrt_only_oracle(&p);
        assert!(o[70] > 0.0);
        assert!((o[70] / o[69] - (20.0 / 20.0) / 35.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_metrics() {
        let p = params(20.0, FeedbackPolicy::Linear);
        let d = point_mass(&p);
        assert_eq!(mean_queue_rt(&d, &p).unwrap(), 0.0);
        assert_eq!(mean_queue_nrt(&d, &p).unwrap(), 0.0);
        assert_eq!(loss_probability_rt(&d, &p).unwrap(), 0.0);
        assert_eq!(effective_nrt_rate(&d, &p).unwrap(), 20.0);
    }

    #[test]
    fn zero_flow_guards() {
        let p = params(0.0, FeedbackPolicy::Linear);
        assert!(matches!(
            delay_nrt(&point_mass(&p), &p),
            Err(Error::ZeroAcceptedFlow("NRT"))
        ));
        // All mass on (R, 0): every RT arrival is lost.
        let mut v = vec![0.0; p.state_space().size()];
        v[30 * 71] = 1.0;
        let d = StationaryDistribution::from_probabilities(v);
        assert!(matches!(
            delay_rt(&d, &p),
            Err(Error::ZeroAcceptedFlow("RT"))
        ));
    }

    #[test]
    fn dimension_checked() {
        let p = params(20.0, FeedbackPolicy::Linear);
        let d = StationaryDistribution::from_probabilities(vec![1.0]);
        assert!(matches!(
            loss_probability_rt(&d, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
