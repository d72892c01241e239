use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};
use crate::simulator::SimEstimate;

pub const CSV_HEADER: &str = "policy,n,r,l,h,lambda_rt,lambda_nrt,mu_rt,mu_nrt,p_lrt,n_rt,n_nrt,d_rt,d_nrt_paper,d_nrt_little,lambda_eff,residual";

const SIM_METRICS: [&str; 6] = [
    "rt_loss_fraction",
    "mean_rt_in_queue",
    "mean_nrt_in_queue",
    "accepted_nrt_rate",
    "mean_rt_sojourn",
    "mean_nrt_sojourn",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sim_cells(sim: Option<&SimEstimate>) -> Vec<String> {
    match sim {
        Some(est) => est
            .metrics()
            .iter()
            .flat_map(|(_, e)| [num(e.point), num(e.half_width)])
            .collect(),
        None => vec![String::new(); 2 * SIM_METRICS.len()],
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    let with_sim = rows.iter().any(|r| r.sim.is_some());
    let mut header = CSV_HEADER.to_string();
    if with_sim {
        for m in SIM_METRICS {
            header.push_str(&format!(",sim_{m},sim_{m}_hw"));
        }
    }
    writeln!(w, "{header}")?;
    for row in rows {
        let p = &row.params;
        let q = &row.report;
        let mut cells = vec![
            p.feedback().tag(),
            p.capacity_n().to_string(),
            p.threshold_r().to_string(),
            p.threshold_l().to_string(),
            p.threshold_h().to_string(),
        ];
        cells.extend(
            [
                p.lambda_rt(),
                p.lambda_nrt(),
                p.mu_rt(),
                p.mu_nrt(),
                q.p_lrt,
                q.n_rt,
                q.n_nrt,
                q.d_rt,
                q.d_nrt_paper,
                q.d_nrt_little,
                q.lambda_eff_nrt,
                row.residual,
            ]
            .into_iter()
            .map(num),
        );
        if with_sim {
            cells.extend(sim_cells(row.sim.as_ref()));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes `rows` to `path`. With no rows nothing is created.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyResult);
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}
