//! Command-line harness: `simulate` runs a configured Monte-Carlo
//! experiment, `sweep` varies one config field over a range, and `cdf`
//! recomputes an error CDF from a previously written results.csv.

use std::io;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gsticp::eval::{
    compute_cdf, final_slot_errors, median, parse_sweep, read_results_csv_path, run_monte_carlo,
    run_sweep, write_results, RangeSpec, RunResult, ScenarioConfig,
};
use gsticp::netsim::{Algorithm, Counters};

#[derive(Parser)]
#[command(
    name = "gsticp",
    about = "3D cooperative positioning simulator for LOS/NLOS mixed environments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured Monte-Carlo experiment and write CSV results.
    Simulate {
        /// JSON scenario configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, cdf.csv, counters.csv, config.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured algorithm.
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Use ground-truth LOS/NLOS labels (upper-bound mode).
        #[arg(long)]
        oracle_nlos: bool,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CDF thresholds as start:stop:step meters.
        #[arg(long, default_value = "0:10:0.1")]
        eps: RangeSpec,
    },
    /// Run the experiment repeatedly while varying one config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Field and range, e.g. comm_range=200:600:100 or n_agents=10:40:10.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "0:10:0.1")]
        eps: RangeSpec,
    },
    /// Recompute an error CDF from an existing results.csv (CSV to stdout).
    Cdf {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "0:10:0.1")]
        eps: RangeSpec,
        /// Label for the algorithm column.
        #[arg(long, default_value = "results")]
        label: String,
        /// Aggregate every slot instead of the final slot only.
        #[arg(long)]
        all_slots: bool,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            algorithm,
            oracle_nlos,
            seed,
            eps,
        } => {
            let mut cfg = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(a) = algorithm {
                cfg.algorithm = a;
                cfg.gie = None;
            }
            if oracle_nlos {
                cfg.oracle_nlos = true;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let results = run_monte_carlo(&cfg)?;
            let curve = compute_cdf(
                &results,
                &eps.values(),
                cfg.aggregate_all_slots,
                cfg.algorithm.label(),
            )?;
            write_results(&results, &[curve], &cfg, &out)?;
            let errors = final_slot_errors(&results, cfg.aggregate_all_slots);
            println!(
                "{}: {} runs, {} agents, median error {:.3} m -> {}",
                cfg.algorithm.label(),
                cfg.mc_runs,
                cfg.n_agents,
                median(&errors).unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Sweep {
            config,
            vary,
            out,
            eps,
        } => {
            let cfg = ScenarioConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let (param, range) = parse_sweep(&vary)?;
            let points = run_sweep(&cfg, param, &range.values(), &eps.values())?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let summary_path = out.join("sweep_summary.csv");
            let mut w = csv::Writer::from_path(&summary_path)?;
            w.write_record(["param", "value", "algorithm", "p_le_5m", "median_error"])?;
            for pt in &points {
                w.write_record([
                    pt.param,
                    &pt.value.to_string(),
                    &pt.curve.label,
                    &pt.p_at_5m.to_string(),
                    &pt.median_error.to_string(),
                ])?;
            }
            w.flush()?;
            let cdf_path = out.join("sweep_cdf.csv");
            let mut w = csv::Writer::from_path(&cdf_path)?;
            w.write_record(["param", "value", "algorithm", "epsilon", "p"])?;
            for pt in &points {
                for c in &pt.curve.points {
                    w.write_record([
                        pt.param,
                        &pt.value.to_string(),
                        &pt.curve.label,
                        &c.epsilon.to_string(),
                        &c.p.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            for pt in &points {
                println!(
                    "{}={}: P(e<=5m) = {:.3}, median error {:.3} m",
                    pt.param, pt.value, pt.p_at_5m, pt.median_error
                );
            }
            println!("-> {}", out.display());
        }
        Command::Cdf {
            results,
            eps,
            label,
            all_slots,
        } => {
            let rows = read_results_csv_path(&results)?;
            let bundle = vec![RunResult {
                run: 0,
                rows,
                counters: Counters::default(),
            }];
            let curve = compute_cdf(&bundle, &eps.values(), all_slots, &label)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            w.write_record(["algorithm", "epsilon", "p"])?;
            for pt in &curve.points {
                w.write_record([label.as_str(), &pt.epsilon.to_string(), &pt.p.to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
