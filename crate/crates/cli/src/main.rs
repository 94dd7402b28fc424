use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dimgp::data::ConeSpec;
use dimgp::run::Mode;
use dimgp_cli::{
    cmd_batch, cmd_eval, cmd_histogram, cmd_run, cmd_synth, cmd_validate, parse_methods,
    parse_seeds, CliResult, Failure, RunConfig, RunOptions,
};

/// Dimensionally consistent feature construction with grammar-guided GP.
#[derive(Parser)]
#[command(name = "dimgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the grammar, transitions and dataset named by a config.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one evolution and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the mode implied by the config (simple, gggp, pgggp).
        #[arg(long, value_parser = parse_mode)]
        method: Option<Mode>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fitness evaluation threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run several methods over several seeds and compare their test gains.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// Comma list and/or ranges, e.g. `0..20` or `1,2,3`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
        #[arg(long, value_parser = parse_methods, default_value = "simple,gggp,pgggp")]
        methods: MethodList,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score a formulas file (one expression per line) against the dataset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        formulas: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_mode)]
        method: Option<Mode>,
    },
    /// Per-class histogram of a column or formula.
    Histogram {
        #[arg(long)]
        config: PathBuf,
        /// Column name or expression.
        #[arg(long)]
        feature: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, value_parser = parse_mode)]
        method: Option<Mode>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic cone dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

type SeedList = Vec<u64>;
type MethodList = Vec<Mode>;

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: dimgp::Error| e.to_string())
}

fn print_json<T: serde::Serialize>(v: &T) -> CliResult<()> {
    println!(
        "{}",
        serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?
    );
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Validate { config } => {
            let r = cmd_validate(&RunConfig::load(&config)?)?;
            for w in &r.warnings {
                eprintln!("{w}");
            }
            println!(
                "ok: {} mode, {} rows, {} columns",
                r.mode, r.rows, r.columns
            );
        }
        Command::Run {
            config,
            seed,
            method,
            out,
            jobs,
        } => {
            let cfg = RunConfig::load(&config)?;
            let r = cmd_run(
                &cfg,
                &RunOptions {
                    seed,
                    out,
                    workers: jobs,
                    mode: method,
                },
            )?;
            println!(
                "{} seed {}: cv {:.2} (baseline {:.2}), test {:.2} -> {:.2}, gain {:+.2}",
                r.mode,
                r.seed,
                r.best_cv,
                r.baseline_cv,
                r.test.base_accuracy,
                r.test.accuracy,
                r.test.gain
            );
            for f in &r.formulas {
                println!("  {f}");
            }
        }
        Command::Batch {
            config,
            seeds,
            methods,
            out,
            jobs,
        } => {
            let cfg = RunConfig::load(&config)?;
            let s = cmd_batch(&cfg, &methods, &seeds, out.as_deref(), jobs)?;
            for m in &s.methods {
                match (m.mean, m.std) {
                    (Some(mean), Some(std)) => {
                        println!("{:<7} gain {mean:.2} +- {std:.2}", m.method.name())
                    }
                    _ => println!("{:<7} too few successful runs", m.method.name()),
                }
                for f in &m.failures {
                    eprintln!("{} seed {} failed: {}", m.method, f.seed, f.error);
                }
            }
            for c in &s.comparisons {
                println!(
                    "{} vs {}: t = {:.3}, dof = {:.2}, p = {:.4}",
                    c.a, c.b, c.t, c.dof, c.p
                );
            }
        }
        Command::Eval {
            config,
            formulas,
            seed,
            method,
        } => {
            let cfg = RunConfig::load(&config)?;
            let r = cmd_eval(
                &cfg,
                &formulas,
                &RunOptions {
                    seed,
                    mode: method,
                    ..RunOptions::default()
                },
            )?;
            print_json(&r)?;
        }
        Command::Histogram {
            config,
            feature,
            bins,
            method,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let csv = cmd_histogram(&cfg, &feature, bins, method)?;
            match out {
                Some(p) => fs::write(&p, csv)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
        }
        Command::Synth {
            out,
            rows,
            noise,
            seed,
        } => {
            let d = cmd_synth(&ConeSpec { rows, noise, seed }, &out)?;
            println!("wrote {} rows to {}", d.n_rows(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{e}");
            if matches!(e, Failure::Runtime(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
