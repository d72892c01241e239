//! `key = value` configuration files.
//!
//! Recognised keys: `n`, `r`, `l`, `lambda_rt`, `lambda_nrt`, `mu_rt`,
//! `mu_nrt`, `policy`, `axis`, `grid`, `seed`, `simulate`. `#` starts a
//! comment. `policy` may list several comma-separated policies. A file with
//! an `axis` key describes a sweep; otherwise a single model.

use std::collections::HashMap;

use super::{Axis, SimOptions, SweepSpec};
use crate::error::{Error, Result};
use crate::model::{FeedbackPolicy, ModelParams, RawParams};

/// NRT rate used when a config leaves `lambda_nrt` out.
pub const DEFAULT_LAMBDA_NRT: f64 = 20.0;

const KEYS: [&str; 12] = [
    "n",
    "r",
    "l",
    "lambda_rt",
    "lambda_nrt",
    "mu_rt",
    "mu_nrt",
    "policy",
    "axis",
    "grid",
    "seed",
    "simulate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SingleConfig {
    /// Parameters under the first listed policy.
    pub params: ModelParams,
    pub policies: Vec<FeedbackPolicy>,
    pub simulate: bool,
    pub seed: Option<u64>,
}

impl SingleConfig {
    /// The model once per listed policy.
    pub fn models(&self) -> Vec<ModelParams> {
        self.policies
            .iter()
            .map(|&feedback| {
                RawParams {
                    feedback,
                    ..self.params.raw()
                }
                .validate()
                .expect("policies validated at parse time")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Single(SingleConfig),
    Sweep(SweepSpec),
}

struct Entries {
    values: HashMap<&'static str, (usize, String)>,
}

impl Entries {
    fn parse<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line: *line,
                message: format!("invalid value `{v}` for `{key}`"),
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &'static str) -> Result<T> {
        self.parse(key)?.ok_or(Error::MissingKey(key))
    }

    fn raw(&self, key: &'static str) -> Option<&(usize, String)> {
        self.values.get(key)
    }
}

pub fn parse_config(text: &str) -> Result<Config> {
    let mut values = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            })?;
        if values
            .insert(*known, (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    let e = Entries { values };

    let policies = match e.raw("policy") {
        None => vec![FeedbackPolicy::Linear],
        Some((line, v)) => v
            .split(',')
            .map(|p| {
                FeedbackPolicy::parse(p).ok_or_else(|| Error::Parse {
                    line: *line,
                    message: format!(
                        "unknown policy `{}` (expected linear | constant:<c>)",
                        p.trim()
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let simulate = match e.raw("simulate") {
        None => false,
        Some((line, v)) => match v.as_str() {
            "true" => true,
            "false" => false,
            _ => {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("`simulate` must be true or false, got `{v}`"),
                })
            }
        },
    };
    let seed: Option<u64> = e.parse("seed")?;

    let raw = RawParams {
        capacity_n: e.require("n")?,
        threshold_r: e.require("r")?,
        threshold_l: e.require("l")?,
        lambda_rt: e.require("lambda_rt")?,
        lambda_nrt: e.parse("lambda_nrt")?.unwrap_or(DEFAULT_LAMBDA_NRT),
        mu_rt: e.require("mu_rt")?,
        mu_nrt: e.require("mu_nrt")?,
        feedback: policies[0],
    };
    let params = raw.validate()?;
    for &feedback in &policies[1..] {
        RawParams { feedback, ..raw }.validate()?;
    }

    let axis = match e.raw("axis") {
        None => None,
        Some((line, v)) => Some(Axis::parse(v).ok_or_else(|| Error::Parse {
            line: *line,
            message: format!("unknown axis `{v}` (expected lambda_nrt | threshold_r)"),
        })?),
    };
    let Some(axis) = axis else {
        if let Some((line, _)) = e.raw("grid") {
            return Err(Error::Parse {
                line: *line,
                message: "`grid` requires `axis`".into(),
            });
        }
        return Ok(Config::Single(SingleConfig {
            params,
            policies,
            simulate,
            seed,
        }));
    };

    let grid = match e.raw("grid") {
        None => axis.default_grid(),
        Some((line, v)) => v
            .split(',')
            .map(|g| {
                g.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: *line,
                    message: format!("invalid grid value `{}`", g.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let mut spec = SweepSpec::new(params, axis, grid, policies)?;
    if simulate {
        spec.simulate = Some(SimOptions {
            seed: seed.unwrap_or(SimOptions::default().seed),
            ..SimOptions::default()
        });
    }
    Ok(Config::Sweep(spec))
}
