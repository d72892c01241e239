//! Infinitesimal generator of the RT/NRT chain and the balance-equation audit.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ModelParams, State};
use crate::solver::StationaryDistribution;

/// Sparse generator stored by rows (CSR for off-diagonals, explicit diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl RateMatrix {
    /// Builds a generator from per-row off-diagonal entries. Zero rates are
    /// dropped and the diagonal is set to minus the row outflow.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut diag = Vec::with_capacity(dim);
        row_ptr.push(0);
        for (n, row) in rows.into_iter().enumerate() {
            let mut out = 0.0;
            for (col, rate) in row {
                if col >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: col + 1,
                    });
                }
                if col == n || rate == 0.0 {
                    continue;
                }
                debug_assert!(rate > 0.0 && rate.is_finite());
                cols.push(col);
                rates.push(rate);
                out += rate;
            }
            diag.push(-out);
            row_ptr.push(cols.len());
        }
        Ok(RateMatrix {
            row_ptr,
            cols,
            rates,
            diag,
        })
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    /// Off-diagonal `(column, rate)` pairs of row `n`.
    pub fn row(&self, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[n]..self.row_ptr[n + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.rates[range].iter().copied())
    }

    pub fn diagonal(&self, n: usize) -> f64 {
        self.diag[n]
    }

    pub fn row_sum(&self, n: usize) -> f64 {
        self.row(n).map(|(_, r)| r).sum::<f64>() + self.diag[n]
    }

    pub fn off_diagonal_count(&self) -> usize {
        self.cols.len()
    }

    pub fn row_off_diagonal_count(&self, n: usize) -> usize {
        self.row_ptr[n + 1] - self.row_ptr[n]
    }

    /// Largest total outflow `-q(s,s)` over all rows.
    pub fn max_outflow(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// Largest `|row - col|` over stored off-diagonal entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dimension())
            .flat_map(|n| self.row(n).map(move |(c, _)| n.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// Row vector times generator, `x * Q`.
    pub fn left_multiply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        let mut y: Vec<f64> = x.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        for (n, &xn) in x.iter().enumerate() {
            if xn == 0.0 {
                continue;
            }
            for (c, r) in self.row(n) {
                y[c] += xn * r;
            }
        }
        Ok(y)
    }

    /// Writes every stored entry (diagonal included) as `row col rate`,
    /// one per line, rates with 17 significant digits.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for n in 0..self.dimension() {
            let mut entries: Vec<(usize, f64)> = self.row(n).collect();
            entries.push((n, self.diag[n]));
            entries.sort_by_key(|&(c, _)| c);
            for (c, r) in entries {
                writeln!(w, "{n} {c} {r:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Positive-rate transitions out of `s`.
pub fn transitions_from(params: &ModelParams, s: State) -> Result<Vec<(State, f64)>> {
    if !params.state_space().contains(s) {
        return Err(Error::InvalidState(s));
    }
    let mut out = Vec::with_capacity(4);
    if s.rt < params.threshold_r() {
        out.push((State::new(s.rt + 1, s.nrt), params.lambda_rt()));
    }
    let admit = params.nrt_rate(s.occupancy());
    if admit > 0.0 {
        out.push((State::new(s.rt, s.nrt + 1), admit));
    }
    if s.rt > 0 {
        out.push((State::new(s.rt - 1, s.nrt), params.mu_rt()));
    } else if s.nrt > 0 {
        // NRT is served only when no RT packet is waiting.
        out.push((State::new(s.rt, s.nrt - 1), params.mu_nrt()));
    }
    Ok(out)
}

pub fn build_generator(params: &ModelParams) -> RateMatrix {
    build_generator_with(params, Execution::default())
}

pub fn build_generator_with(params: &ModelParams, exec: Execution) -> RateMatrix {
    let space = params.state_space();
    let rows = exec.map_range(space.size(), |n| {
        let s = space.state_of(n).expect("index in range");
        transitions_from(params, s)
            .expect("enumerated state is valid")
            .into_iter()
            .map(|(t, r)| (space.index(t).expect("target in E"), r))
            .collect::<Vec<_>>()
    });
    RateMatrix::from_rows(rows).expect("targets indexed within the state space")
}

/// Families of balance equations, one per boundary/band region of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquationFamily {
    Empty,
    NoRtBelowL,
    NoRtAtL,
    NoRtBand,
    NoRtAtH,
    FullRtEmptyNrt,
    FullRtBelowL,
    FullRtAtL,
    FullRtBand,
    FullRtAtH,
    FullRtSaturated,
    InteriorEmptyNrt,
    InteriorBelowL,
    InteriorAtL,
    InteriorBand,
    InteriorAtH,
    InteriorSaturated,
}

impl EquationFamily {
    pub fn label(&self) -> &'static str {
        use EquationFamily::*;
        match self {
            Empty => "p(0,0)",
            NoRtBelowL => "p(0,j), 1<=j<L",
            NoRtAtL => "p(0,L)",
            NoRtBand => "p(0,j), L<j<H",
            NoRtAtH => "p(0,H)",
            FullRtEmptyNrt => "p(R,0)",
            FullRtBelowL => "p(R,j), 1<=j<L-R",
            FullRtAtL => "p(R,L-R)",
            FullRtBand => "p(R,j), L-R<j<H-R",
            FullRtAtH => "p(R,H-R)",
            FullRtSaturated => "p(R,j), H-R<j<=H",
            InteriorEmptyNrt => "p(i,0), 0<i<R",
            InteriorBelowL => "p(i,j), 0<i<R, 1<=j<L-i",
            InteriorAtL => "p(i,L-i), 0<i<R",
            InteriorBand => "p(i,j), 0<i<R, L-i<j<H-i",
            InteriorAtH => "p(i,H-i), 0<i<R",
            InteriorSaturated => "p(i,j), 0<i<R, H-i<j<=H",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyResidual {
    pub family: EquationFamily,
    pub equations: usize,
    pub max_residual: f64,
    pub worst_state: State,
}

/// Residuals of the empty-state equation in both its corrected and its
/// literal form with the service rates swapped on the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstEquationAudit {
    pub corrected: f64,
    pub literal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub max_residual: f64,
    pub worst_state: State,
    pub families: Vec<FamilyResidual>,
    /// `|1 - sum p(i,j)|`.
    pub normalization_error: f64,
    pub first_equation: FirstEquationAudit,
}

/// One balance equation: `outflow_rate * p(s) = inflow`.
struct Equation {
    family: EquationFamily,
    outflow: f64,
    inflow: f64,
}

/// Evaluates the balance equation of `(i, j)` region by region, written out
/// term by term rather than derived from the generator.
fn balance_equation(
    params: &ModelParams,
    p: &dyn Fn(usize, usize) -> f64,
    i: usize,
    j: usize,
) -> Equation {
    use EquationFamily::*;
    let (r, l, h) = (
        params.threshold_r(),
        params.threshold_l(),
        params.threshold_h(),
    );
    let (lam, lam1, mu, mu1) = (
        params.lambda_rt(),
        params.lambda_nrt(),
        params.mu_rt(),
        params.mu_nrt(),
    );
    let f = |k: usize| params.nrt_rate(k);
    let pij = p(i, j);
    let eq = |family, out_rate: f64, inflow: f64| Equation {
        family,
        outflow: out_rate * pij,
        inflow,
    };

    if i == 0 {
        return if j == 0 {
            eq(Empty, lam1 + lam, mu1 * p(0, 1) + mu * p(1, 0))
        } else if j < l {
            eq(
                NoRtBelowL,
                lam + lam1 + mu1,
                mu * p(1, j) + lam1 * p(0, j - 1) + mu1 * p(0, j + 1),
            )
        } else if j == l {
            eq(
                NoRtAtL,
                lam + f(l) + mu1,
                mu * p(1, l) + lam1 * p(0, l - 1) + mu1 * p(0, l + 1),
            )
        } else if j < h {
            eq(
                NoRtBand,
                lam + f(j) + mu1,
                mu * p(1, j) + f(j - 1) * p(0, j - 1) + mu1 * p(0, j + 1),
            )
        } else {
            eq(NoRtAtH, lam + mu1, f(h - 1) * p(0, h - 1) + mu * p(1, h))
        };
    }

    if i == r {
        return if j == 0 {
            eq(FullRtEmptyNrt, mu + lam1, lam * p(r - 1, 0))
        } else if j < l - r {
            eq(
                FullRtBelowL,
                lam1 + mu,
                lam * p(r - 1, j) + lam1 * p(r, j - 1),
            )
        } else if j == l - r {
            eq(FullRtAtL, f(l) + mu, lam * p(r - 1, j) + lam1 * p(r, j - 1))
        } else if j < h - r {
            eq(
                FullRtBand,
                f(r + j) + mu,
                lam * p(r - 1, j) + f(r + j - 1) * p(r, j - 1),
            )
        } else if j == h - r {
            eq(FullRtAtH, mu, lam * p(r - 1, j) + f(h - 1) * p(r, j - 1))
        } else {
            eq(FullRtSaturated, mu, lam * p(r - 1, j))
        };
    }

    if j == 0 {
        eq(
            InteriorEmptyNrt,
            lam1 + mu + lam,
            lam * p(i - 1, 0) + mu * p(i + 1, 0),
        )
    } else if j < l - i {
        eq(
            InteriorBelowL,
            lam1 + mu + lam,
            lam * p(i - 1, j) + lam1 * p(i, j - 1) + mu * p(i + 1, j),
        )
    } else if j == l - i {
        eq(
            InteriorAtL,
            f(l) + mu + lam,
            lam * p(i - 1, j) + lam1 * p(i, j - 1) + mu * p(i + 1, j),
        )
    } else if j < h - i {
        eq(
            InteriorBand,
            f(i + j) + mu + lam,
            lam * p(i - 1, j) + f(i + j - 1) * p(i, j - 1) + mu * p(i + 1, j),
        )
    } else if j == h - i {
        eq(
            InteriorAtH,
            mu + lam,
            f(h - 1) * p(i, j - 1) + mu * p(i + 1, j) + lam * p(i - 1, j),
        )
    } else {
        eq(
            InteriorSaturated,
            mu + lam,
            lam * p(i - 1, j) + mu * p(i + 1, j),
        )
    }
}

/// Evaluates every balance equation and the normalizing equation at `dist`.
pub fn check_balance_residual(
    params: &ModelParams,
    dist: &StationaryDistribution,
) -> Result<BalanceReport> {
    let space = params.state_space();
    let probs = dist.probabilities();
    if probs.len() != space.size() {
        return Err(Error::DimensionMismatch {
            expected: space.size(),
            actual: probs.len(),
        });
    }
    let row_len = space.row_len();
    let p = |i: usize, j: usize| probs[i * row_len + j];

    let mut families: Vec<FamilyResidual> = Vec::new();
    let mut max_residual = 0.0;
    let mut worst_state = State::new(0, 0);
    for s in space.states() {
        let e = balance_equation(params, &p, s.rt, s.nrt);
        let residual = (e.outflow - e.inflow).abs();
        if residual > max_residual {
            max_residual = residual;
            worst_state = s;
        }
        match families.iter_mut().find(|f| f.family == e.family) {
            Some(f) => {
                f.equations += 1;
                if residual > f.max_residual {
                    f.max_residual = residual;
                    f.worst_state = s;
                }
            }
            None => families.push(FamilyResidual {
                family: e.family,
                equations: 1,
                max_residual: residual,
                worst_state: s,
            }),
        }
    }
    families.sort_by_key(|f| f.family);

    let corrected = balance_equation(params, &p, 0, 0);
    let literal_inflow = params.mu_rt() * p(0, 1) + params.mu_nrt() * p(1, 0);
    let first_equation = FirstEquationAudit {
        corrected: (corrected.outflow - corrected.inflow).abs(),
        literal: (corrected.outflow - literal_inflow).abs(),
    };

    Ok(BalanceReport {
        max_residual,
        worst_state,
        families,
        normalization_error: (1.0 - probs.iter().sum::<f64>()).abs(),
        first_equation,
    })
}
