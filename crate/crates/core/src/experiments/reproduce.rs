//! The three comparative scenarios: linear feedback against constant-fraction
//! reduction, swept over the nominal NRT rate (figures 3 and 4) and over the
//! RT threshold (figure 5).

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use super::chart::line_chart_svg;
use super::{emit_csv, run_solve, run_sweep, Axis, OutputMetric, ResultRow, SweepSpec};
use crate::error::{Error, Result};
use crate::model::{FeedbackPolicy, RawParams};

/// Two delays closer than this count as a tie (the linear policy "wins" ties).
pub const TIE_TOLERANCE: f64 = 1e-9;
const BISECTION_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            3 => Some(Figure::Fig3),
            4 => Some(Figure::Fig4),
            5 => Some(Figure::Fig5),
            _ => None,
        }
    }

    pub fn number(&self) -> u32 {
        match self {
            Figure::Fig3 => 3,
            Figure::Fig4 => 4,
            Figure::Fig5 => 5,
        }
    }

    /// The constant-fraction policy the linear policy is compared against.
    pub fn baseline(&self) -> FeedbackPolicy {
        match self {
            Figure::Fig4 => FeedbackPolicy::ConstantFraction(0.25),
            Figure::Fig3 | Figure::Fig5 => FeedbackPolicy::ConstantFraction(0.5),
        }
    }

    pub fn claim(&self) -> Claim {
        match self {
            Figure::Fig3 | Figure::Fig5 => Claim::LinearAlwaysLower,
            Figure::Fig4 => Claim::SingleCrossover,
        }
    }

    pub fn spec(&self) -> SweepSpec {
        let (lambda1, axis) = match self {
            Figure::Fig3 | Figure::Fig4 => (20.0, Axis::LambdaNrt),
            Figure::Fig5 => (15.0, Axis::ThresholdR),
        };
        let base = RawParams::canonical(lambda1, FeedbackPolicy::Linear)
            .validate()
            .expect("canonical parameters are valid");
        let mut spec = SweepSpec::new(
            base,
            axis,
            axis.default_grid(),
            vec![FeedbackPolicy::Linear, self.baseline()],
        )
        .expect("default grids are increasing");
        spec.outputs = match self {
            Figure::Fig3 | Figure::Fig4 => vec![OutputMetric::DNrtPaper, OutputMetric::NNrt],
            Figure::Fig5 => vec![OutputMetric::DNrtPaper],
        };
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim {
    /// Linear delay is never above the baseline delay.
    LinearAlwaysLower,
    /// Baseline lower at the low end, linear lower at the high end, one switch.
    SingleCrossover,
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::LinearAlwaysLower => {
                f.write_str("linear d_nrt_paper <= baseline d_nrt_paper at every grid point")
            }
            Claim::SingleCrossover => f.write_str(
                "baseline lower at the low end, linear lower at the high end, exactly one crossover",
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Confirmed,
    Contradicted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Confirmed => "CONFIRMED",
            Verdict::Contradicted => "CONTRADICTED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Linear,
    Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointComparison {
    pub value: f64,
    pub linear: f64,
    pub baseline: f64,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingSummary {
    pub figure: Figure,
    pub axis: Axis,
    pub baseline: FeedbackPolicy,
    pub points: Vec<PointComparison>,
    pub claim: Claim,
    pub verdict: Verdict,
    /// Axis values where the winner changes. For the `lambda_nrt` axis each
    /// one is located by bisection on fresh solves; otherwise it is the
    /// linear interpolation of the delay difference between grid points.
    pub crossovers: Vec<f64>,
}

impl OrderingSummary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "figure {}", self.figure.number());
        let _ = writeln!(s, "metric: d_nrt_paper");
        let _ = writeln!(s, "policies: linear vs {}", self.baseline);
        let _ = writeln!(
            s,
            "grid: {} = {} (implementation default)",
            self.axis.key(),
            self.points
                .iter()
                .map(|p| p.value.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        for p in &self.points {
            let _ = writeln!(
                s,
                "{}={} linear={:.16e} {}={:.16e} winner={}",
                self.axis.key(),
                p.value,
                p.linear,
                self.baseline,
                p.baseline,
                match p.winner {
                    Winner::Linear => "linear".to_string(),
                    Winner::Baseline => self.baseline.tag(),
                }
            );
        }
        let _ = writeln!(s, "claim: {}", self.claim);
        if self.crossovers.is_empty() {
            let _ = writeln!(s, "crossovers: none");
        } else {
            let _ = writeln!(
                s,
                "crossovers: {}",
                self.crossovers
                    .iter()
                    .map(|c| format!("{c:.6}"))
                    .collect::<Vec<_>>()
                    .join(",")
            );
        }
        let _ = writeln!(s, "verdict: {}", self.verdict);
        s
    }
}

fn winner(linear: f64, baseline: f64) -> Winner {
    if linear <= baseline + TIE_TOLERANCE {
        Winner::Linear
    } else {
        Winner::Baseline
    }
}

/// Builds the ordering summary from sweep rows (linear rows first, then baseline).
pub fn summarize(figure: Figure, spec: &SweepSpec, rows: &[ResultRow]) -> Result<OrderingSummary> {
    let n = spec.grid.len();
    let baseline = figure.baseline();
    let linear_rows = rows.iter().filter(|r| r.policy() == FeedbackPolicy::Linear);
    let baseline_rows = rows.iter().filter(|r| r.policy() == baseline);
    let points: Vec<PointComparison> = spec
        .grid
        .iter()
        .zip(linear_rows.zip(baseline_rows))
        .map(|(&value, (lin, base))| PointComparison {
            value,
            linear: lin.report.d_nrt_paper,
            baseline: base.report.d_nrt_paper,
            winner: winner(lin.report.d_nrt_paper, base.report.d_nrt_paper),
        })
        .collect();
    if points.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: points.len(),
        });
    }

    let mut crossovers = Vec::new();
    for w in points.windows(2) {
        if w[0].winner != w[1].winner {
            let crossing = match spec.axis {
                Axis::LambdaNrt => bisect_crossover(spec, baseline, w[0].value, w[1].value)?,
                Axis::ThresholdR => {
                    let d0 = w[0].linear - w[0].baseline;
                    let d1 = w[1].linear - w[1].baseline;
                    w[0].value + (w[1].value - w[0].value) * d0 / (d0 - d1)
                }
            };
            crossovers.push(crossing);
        }
    }

    let claim = figure.claim();
    let holds = match claim {
        Claim::LinearAlwaysLower => points.iter().all(|p| p.winner == Winner::Linear),
        Claim::SingleCrossover => {
            points.first().map(|p| p.winner) == Some(Winner::Baseline)
                && points.last().map(|p| p.winner) == Some(Winner::Linear)
                && crossovers.len() == 1
        }
    };
    Ok(OrderingSummary {
        figure,
        axis: spec.axis,
        baseline,
        points,
        claim,
        verdict: if holds {
            Verdict::Confirmed
        } else {
            Verdict::Contradicted
        },
        crossovers,
    })
}

/// Delay difference `linear - baseline` at NRT rate `lambda1`.
fn delay_gap(spec: &SweepSpec, baseline: FeedbackPolicy, lambda1: f64) -> Result<f64> {
    let at = |feedback| {
        RawParams {
            lambda_nrt: lambda1,
            feedback,
            ..spec.base.raw()
        }
        .validate()
        .and_then(|p| run_solve(&p))
        .map(|row| row.report.d_nrt_paper)
    };
    Ok(at(FeedbackPolicy::Linear)? - at(baseline)?)
}

fn bisect_crossover(spec: &SweepSpec, baseline: FeedbackPolicy, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let lo_sign = delay_gap(spec, baseline, lo)? > TIE_TOLERANCE;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if (delay_gap(spec, baseline, mid)? > TIE_TOLERANCE) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutcome {
    pub rows: Vec<ResultRow>,
    pub summary: OrderingSummary,
    pub files: Vec<PathBuf>,
}

/// Runs one figure scenario and writes `figN.csv`, `figN_summary.txt` and one
/// `figN_<metric>.svg` chart per output metric into `outdir`.
pub fn reproduce_figure(figure: Figure, outdir: &Path) -> Result<FigureOutcome> {
    let spec = figure.spec();
    let rows = run_sweep(&spec)?;
    let summary = summarize(figure, &spec, &rows)?;

    fs::create_dir_all(outdir)?;
    let stem = format!("fig{}", figure.number());
    let csv_path = outdir.join(format!("{stem}.csv"));
    emit_csv(&rows, &csv_path)?;
    let summary_path = outdir.join(format!("{stem}_summary.txt"));
    fs::write(&summary_path, summary.render())?;
    let mut files = vec![csv_path, summary_path];

    for metric in &spec.outputs {
        let series: Vec<(String, Vec<(f64, f64)>)> = spec
            .policies
            .iter()
            .map(|policy| {
                let pts = spec
                    .grid
                    .iter()
                    .zip(rows.iter().filter(|r| r.policy() == *policy))
                    .map(|(&x, r)| (x, metric.value(&r.report)))
                    .collect();
                (policy.tag(), pts)
            })
            .collect();
        let svg = line_chart_svg(
            &format!(
                "Figure {}: {} vs {}",
                figure.number(),
                metric.key(),
                spec.axis.key()
            ),
            spec.axis.key(),
            metric.key(),
            &series,
        );
        let path = outdir.join(format!("{stem}_{}.svg", metric.key()));
        fs::write(&path, svg)?;
        files.push(path);
    }

    Ok(FigureOutcome {
        rows,
        summary,
        files,
    })
}
