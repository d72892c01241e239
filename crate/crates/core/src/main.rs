#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsp_aqm::experiments::{
    emit_csv, parse_config, reproduce_figure, run_solve, run_sweep, Config, Figure, ResultRow,
};
use tsp_aqm::generator::{build_generator, check_balance_residual};
use tsp_aqm::simulator::{compare_to_analytic, simulate_run, SimConfig, DEFAULT_MEASURED_EVENTS};
use tsp_aqm::solver::{solve_stationary_direct, DIRECT_RESIDUAL_BOUND};
use tsp_aqm::{Error, ModelParams, Result};

/// Balance residual above which `validate` reports a solver failure.
const BALANCE_BOUND: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "tsp-aqm",
    version,
    about = "RT/NRT priority buffer with NRT feedback throttling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and print its QoS metrics.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Cross-check against a discrete-event simulation.
        #[arg(long)]
        simulate: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Measured simulation events.
        #[arg(long)]
        events: Option<u64>,
    },
    /// Run the sweep described by a config file and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate one of the comparative figures (3, 4 or 5).
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..=5))]
        figure: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve and audit the balance equations.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Also write the generator as `row col rate` triplets.
        #[arg(long)]
        dump_generator: Option<PathBuf>,
    },
}

fn read_config(path: &Path) -> Result<Config> {
    parse_config(&fs::read_to_string(path)?)
}

fn single_models(config: Config) -> Result<(Vec<ModelParams>, bool, Option<u64>)> {
    match config {
        Config::Single(c) => Ok((c.models(), c.simulate, c.seed)),
        Config::Sweep(_) => Err(Error::InvalidConfig(
            "config describes a sweep; use the `sweep` subcommand".into(),
        )),
    }
}

fn print_row(row: &ResultRow) {
    let p = &row.params;
    let q = &row.report;
    println!(
        "model: policy={} N={} R={} L={} H={} lambda_rt={} lambda_nrt={} mu_rt={} mu_nrt={}",
        p.feedback(),
        p.capacity_n(),
        p.threshold_r(),
        p.threshold_l(),
        p.threshold_h(),
        p.lambda_rt(),
        p.lambda_nrt(),
        p.mu_rt(),
        p.mu_nrt()
    );
    println!("  p_lrt        = {:.12e}", q.p_lrt);
    println!("  n_rt         = {:.12e}", q.n_rt);
    println!("  n_nrt        = {:.12e}", q.n_nrt);
    println!("  d_rt         = {:.12e}", q.d_rt);
    println!("  d_nrt_paper  = {:.12e}", q.d_nrt_paper);
    println!("  d_nrt_little = {:.12e}", q.d_nrt_little);
    println!("  lambda_eff   = {:.12e}", q.lambda_eff_nrt);
    println!("  residual     = {:.3e}", row.residual);
}

fn solve(config: &Path, simulate: bool, seed: Option<u64>, events: Option<u64>) -> Result<()> {
    let (models, cfg_simulate, cfg_seed) = single_models(read_config(config)?)?;
    for params in models {
        let row = run_solve(&params)?;
        print_row(&row);
        if simulate || cfg_simulate {
            let cfg = SimConfig::new(params, seed.or(cfg_seed).unwrap_or(1))
                .with_measured_events(events.unwrap_or(DEFAULT_MEASURED_EVENTS));
            let est = simulate_run(&cfg)?;
            let agreement = compare_to_analytic(&est, &row.report)?;
            println!(
                "  simulation ({} measured events, seed {}):",
                cfg.measured_events, cfg.seed
            );
            for c in &agreement.checks {
                println!(
                    "    {:<18} analytic={:.6e} sim={:.6e} +/- {:.2e} {}",
                    c.metric,
                    c.analytic,
                    c.simulated.point,
                    c.simulated.half_width,
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
            println!(
                "    mean_nrt_sojourn   sim={:.6e} +/- {:.2e}; closer analytic NRT delay: {:?}",
                agreement.measured_nrt_sojourn.point,
                agreement.measured_nrt_sojourn.half_width,
                agreement.closer_nrt_delay
            );
        }
    }
    Ok(())
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let Config::Sweep(spec) = read_config(config)? else {
        return Err(Error::InvalidConfig(
            "sweep config needs an `axis` key".into(),
        ));
    };
    let rows = run_sweep(&spec)?;
    fs::create_dir_all(out)?;
    let path = out.join("sweep.csv");
    emit_csv(&rows, &path)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn reproduce(figure: u32, out: &Path) -> Result<()> {
    let figure = Figure::from_number(figure).expect("clap restricts the range");
    let outcome = reproduce_figure(figure, out)?;
    print!("{}", outcome.summary.render());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn validate(config: &Path, dump: Option<&Path>) -> Result<()> {
    let (models, _, _) = single_models(read_config(config)?)?;
    let mut worst: f64 = 0.0;
    for params in models {
        let gen = build_generator(&params);
        if let Some(path) = dump {
            gen.write_triplets(BufWriter::new(fs::File::create(path)?))?;
            println!("wrote generator triplets to {}", path.display());
        }
        let dist = solve_stationary_direct(&gen)?;
        let report = check_balance_residual(&params, &dist)?;
        println!(
            "policy={} states={} off-diagonals={} solve residual={:.3e}",
            params.feedback(),
            gen.dimension(),
            gen.off_diagonal_count(),
            dist.residual_inf()
        );
        for f in &report.families {
            println!(
                "  {:<28} equations={:<5} max residual={:.3e} at {}",
                f.family.label(),
                f.equations,
                f.max_residual,
                f.worst_state
            );
        }
        println!(
            "  max balance residual {:.3e} at {}; normalization error {:.3e}",
            report.max_residual, report.worst_state, report.normalization_error
        );
        println!(
            "  empty-state equation: corrected form residual {:.3e}, literal swapped-rate form residual {:.3e}",
            report.first_equation.corrected, report.first_equation.literal
        );
        worst = worst.max(report.max_residual);
        if !(dist.residual_inf() <= DIRECT_RESIDUAL_BOUND) {
            return Err(Error::ResidualTooLarge {
                residual: dist.residual_inf(),
                bound: DIRECT_RESIDUAL_BOUND,
            });
        }
    }
    if !(worst <= BALANCE_BOUND) {
        return Err(Error::ResidualTooLarge {
            residual: worst,
            bound: BALANCE_BOUND,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            config,
            simulate,
            seed,
            events,
        } => solve(config, *simulate, *seed, *events),
        Command::Sweep { config, out } => sweep(config, out),
        Command::Reproduce { figure, out } => reproduce(*figure, out),
        Command::Validate {
            config,
            dump_generator,
        } => validate(config, dump_generator.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
