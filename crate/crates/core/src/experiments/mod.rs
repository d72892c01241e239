//! Single solves, parameter sweeps and the comparative figure scenarios.

mod chart;
pub mod config;
pub mod csv;
pub mod reproduce;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::generator::build_generator;
use crate::metrics::QoSReport;
use crate::model::{FeedbackPolicy, ModelParams, RawParams};
use crate::simulator::{simulate_run, SimConfig, SimEstimate, DEFAULT_MEASURED_EVENTS};
use crate::solver::{solve_stationary_direct, DIRECT_RESIDUAL_BOUND};

pub use config::{parse_config, Config, SingleConfig};
pub use csv::{emit_csv, write_csv, CSV_HEADER};
pub use reproduce::{reproduce_figure, Figure, FigureOutcome, OrderingSummary, Verdict, Winner};

/// One solved parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub params: ModelParams,
    pub report: QoSReport,
    pub residual: f64,
    pub sim: Option<SimEstimate>,
}

impl ResultRow {
    pub fn policy(&self) -> FeedbackPolicy {
        self.params.feedback()
    }
}

/// Generator, direct solve and metrics for one parameter point. Fails with
/// a solver error if the residual exceeds the direct-solve bound.
pub fn run_solve(params: &ModelParams) -> Result<ResultRow> {
    let gen = build_generator(params);
    let dist = solve_stationary_direct(&gen)?;
    if !(dist.residual_inf() <= DIRECT_RESIDUAL_BOUND) {
        return Err(Error::ResidualTooLarge {
            residual: dist.residual_inf(),
            bound: DIRECT_RESIDUAL_BOUND,
        });
    }
    Ok(ResultRow {
        params: *params,
        report: QoSReport::compute(&dist, params)?,
        residual: dist.residual_inf(),
        sim: None,
    })
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    LambdaNrt,
    /// `R`, with `H = N - R` re-derived at every point.
    ThresholdR,
}

impl Axis {
    pub fn key(&self) -> &'static str {
        match self {
            Axis::LambdaNrt => "lambda_nrt",
            Axis::ThresholdR => "threshold_r",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "lambda_nrt" => Some(Axis::LambdaNrt),
            "threshold_r" | "r" => Some(Axis::ThresholdR),
            _ => None,
        }
    }

    /// Default grids: `lambda_nrt` 5..=35 step 2.5, `R` 10..=45 step 5.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            Axis::LambdaNrt => (0..=12).map(|i| 5.0 + 2.5 * i as f64).collect(),
            Axis::ThresholdR => (0..=7).map(|i| 10.0 + 5.0 * i as f64).collect(),
        }
    }

    fn apply(&self, raw: RawParams, value: f64) -> Result<RawParams> {
        match self {
            Axis::LambdaNrt => Ok(RawParams {
                lambda_nrt: value,
                ..raw
            }),
            Axis::ThresholdR => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "threshold_r grid value {value} is not a nonnegative integer"
                    )));
                }
                Ok(RawParams {
                    threshold_r: value as usize,
                    ..raw
                })
            }
        }
    }
}

/// Metrics a sweep summarises and charts. The CSV always carries every column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMetric {
    DNrtPaper,
    DNrtLittle,
    NNrt,
    NRt,
    PLrt,
    DRt,
    LambdaEff,
}

impl OutputMetric {
    pub fn key(&self) -> &'static str {
        match self {
            OutputMetric::DNrtPaper => "d_nrt_paper",
            OutputMetric::DNrtLittle => "d_nrt_little",
            OutputMetric::NNrt => "n_nrt",
            OutputMetric::NRt => "n_rt",
            OutputMetric::PLrt => "p_lrt",
            OutputMetric::DRt => "d_rt",
            OutputMetric::LambdaEff => "lambda_eff",
        }
    }

    pub fn value(&self, report: &QoSReport) -> f64 {
        match self {
            OutputMetric::DNrtPaper => report.d_nrt_paper,
            OutputMetric::DNrtLittle => report.d_nrt_little,
            OutputMetric::NNrt => report.n_nrt,
            OutputMetric::NRt => report.n_rt,
            OutputMetric::PLrt => report.p_lrt,
            OutputMetric::DRt => report.d_rt,
            OutputMetric::LambdaEff => report.lambda_eff_nrt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub seed: u64,
    pub measured_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ModelParams,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub policies: Vec<FeedbackPolicy>,
    pub outputs: Vec<OutputMetric>,
    pub simulate: Option<SimOptions>,
}

impl SweepSpec {
    pub fn new(
        base: ModelParams,
        axis: Axis,
        grid: Vec<f64>,
        policies: Vec<FeedbackPolicy>,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        if policies.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one policy".into(),
            ));
        }
        Ok(SweepSpec {
            base,
            axis,
            grid,
            policies,
            outputs: vec![OutputMetric::DNrtPaper, OutputMetric::NNrt],
            simulate: None,
        })
    }

    /// Validated parameters for every `(policy, grid value)` pair in output
    /// order, or every rejected point.
    pub fn points(&self) -> Result<Vec<ModelParams>> {
        let mut points = Vec::with_capacity(self.policies.len() * self.grid.len());
        let mut rejected = Vec::new();
        for &policy in &self.policies {
            for &value in &self.grid {
                let raw = RawParams {
                    feedback: policy,
                    ..self.base.raw()
                };
                match self.axis.apply(raw, value).and_then(RawParams::validate) {
                    Ok(p) => points.push(p),
                    Err(e) => rejected.push((value, e)),
                }
            }
        }
        if rejected.is_empty() {
            Ok(points)
        } else {
            Err(Error::SweepPoints(rejected))
        }
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with(spec, Execution::default())
}

/// Solves every sweep point independently; rows come back ordered by
/// `(policy, grid value)` whatever the execution order.
pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<Vec<ResultRow>> {
    let points = spec.points()?;
    let indexed: Vec<(usize, ModelParams)> = points.into_iter().enumerate().collect();
    exec.map(&indexed, |(idx, params)| {
        let mut row = run_solve(params)?;
        if let Some(sim) = spec.simulate {
            let cfg = SimConfig::new(*params, sim.seed.wrapping_add(*idx as u64))
                .with_measured_events(sim.measured_events);
            row.sim = Some(simulate_run(&cfg)?);
        }
        Ok(row)
    })
    .into_iter()
    .collect()
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 1,
            measured_events: DEFAULT_MEASURED_EVENTS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(lambda1: f64, policy: FeedbackPolicy) -> ModelParams {
        RawParams::canonical(lambda1, policy).validate().unwrap()
    }

    #[test]
    fn canonical_solve_row() {
        let lin = run_solve(&canonical(20.0, FeedbackPolicy::Linear)).unwrap();
        assert!((lin.report.p_lrt - 1.0 / 31.0).abs() < 1e-9);
        assert!(lin.residual <= 1e-10);
        let half = run_solve(&canonical(20.0, FeedbackPolicy::ConstantFraction(0.5))).unwrap();
        assert!((lin.report.p_lrt - half.report.p_lrt).abs() < 1e-9);
        assert!((lin.report.n_rt - half.report.n_rt).abs() < 1e-9);
        assert!((lin.report.d_rt - half.report.d_rt).abs() < 1e-9);
    }

    #[test]
    fn lambda_sweep_row_count_and_order() {
        let spec = SweepSpec::new(
            canonical(20.0, FeedbackPolicy::Linear),
            Axis::LambdaNrt,
            Axis::LambdaNrt.default_grid(),
            vec![
                FeedbackPolicy::Linear,
                FeedbackPolicy::ConstantFraction(0.5),
            ],
        )
        .unwrap();
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 26);
        assert_eq!(rows[0].policy(), FeedbackPolicy::Linear);
        assert_eq!(rows[0].params.lambda_nrt(), 5.0);
        assert_eq!(rows[12].params.lambda_nrt(), 35.0);
        assert_eq!(rows[13].policy(), FeedbackPolicy::ConstantFraction(0.5));
        let seq = run_sweep_with(&spec, Execution::Sequential).unwrap();
        assert_eq!(rows, seq);
    }

    #[test]
    fn threshold_sweep_rederives_h() {
        let spec = SweepSpec::new(
            canonical(15.0, FeedbackPolicy::Linear),
            Axis::ThresholdR,
            Axis::ThresholdR.default_grid(),
            vec![FeedbackPolicy::Linear],
        )
        .unwrap();
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 8);
        for row in &rows {
            assert_eq!(row.params.threshold_h(), 100 - row.params.threshold_r());
        }
    }

    #[test]
    fn threshold_sweep_rejects_r_above_l() {
        let spec = SweepSpec::new(
            canonical(15.0, FeedbackPolicy::Linear),
            Axis::ThresholdR,
            vec![40.0, 45.0, 55.0],
            vec![FeedbackPolicy::Linear],
        )
        .unwrap();
        match run_sweep(&spec) {
            Err(Error::SweepPoints(bad)) => {
                assert_eq!(bad.len(), 1);
                assert_eq!(bad[0].0, 55.0);
                assert!(matches!(bad[0].1, Error::ThresholdOrderViolation { .. }));
            }
            other => panic!("expected per-point rejection, got {other:?}"),
        }
    }

    #[test]
    fn grid_must_increase() {
        let base = canonical(15.0, FeedbackPolicy::Linear);
        assert!(
            SweepSpec::new(base, Axis::LambdaNrt, vec![], vec![FeedbackPolicy::Linear]).is_err()
        );
        assert!(SweepSpec::new(
            base,
            Axis::LambdaNrt,
            vec![1.0, 1.0],
            vec![FeedbackPolicy::Linear]
        )
        .is_err());
    }
}
