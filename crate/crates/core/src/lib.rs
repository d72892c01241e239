//! Exact stationary analysis and discrete-event simulation of a finite
//! buffer shared by real-time (RT) and non-real-time (NRT) packets.
//!
//! RT packets have strict service priority and may occupy at most `R`
//! places. NRT arrivals are throttled by a feedback function of the total
//! occupancy `k`: full rate below `L`, reduced rate on `L <= k < H`, none at
//! or above `H = N - R`.
//!
//! ```
//! use tsp_aqm::{model::{FeedbackPolicy, RawParams}, experiments::run_solve};
//!
//! let params = RawParams::canonical(20.0, FeedbackPolicy::Linear).validate().unwrap();
//! let row = run_solve(&params).unwrap();
//! assert!((row.report.p_lrt - 1.0 / 31.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
pub use generator::{build_generator, check_balance_residual, transitions_from, RateMatrix};
pub use metrics::QoSReport;
pub use model::{validate_params, FeedbackPolicy, ModelParams, RawParams, State, StateSpace};
pub use solver::{solve_stationary_direct, solve_stationary_iterative, StationaryDistribution};
