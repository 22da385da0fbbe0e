use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nnround_cli::{check_winner_fixture, emit_reports, run_grid, CliError, EvalConfig, Overrides};
use nnround_core::fixtures::REFERENCE_WINNER_TABLES;
use nnround_core::raster::{read_pnm_file, write_pnm_file};
use nnround_core::{build_index_map, format_percent, resize_nn, RoundingRule, ScalePair};

#[derive(Parser)]
#[command(
    name = "nnround",
    version,
    about = "Nearest-neighbor rounding-rule benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evaluation grid described by a TOML config and write reports.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated rule names: floor, ceil, round, fix, even.
        #[arg(long, value_delimiter = ',')]
        rules: Option<Vec<RoundingRule>>,
        /// Comma-separated scaling ratios.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<u32>>,
        /// Absolute tolerance for ties between scores.
        #[arg(long)]
        tie_epsilon: Option<f64>,
        /// Maximum number of parallel workers and scorer processes.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Replay winner-letter tables through the tally and check the counts.
    Fixtures {
        /// Fixture CSV (image_pair,metric,ratio,winners); defaults to the bundled tables.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Print the index map of one axis as CSV.
    IndexMap {
        #[arg(long)]
        src: u32,
        #[arg(long)]
        dest: u32,
        #[arg(long, default_value = "ceil")]
        rule: RoundingRule,
    },
    /// Resize a PGM/PPM image by nearest-neighbor interpolation.
    Resize {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long, default_value = "ceil")]
        rule: RoundingRule,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            rules,
            ratios,
            tie_epsilon,
            jobs,
        } => {
            let config = EvalConfig::load(&config)?.apply(Overrides {
                output_dir: out,
                rules,
                ratios,
                tie_epsilon,
                jobs,
            })?;
            let outcome = run_grid(&config)?;
            let written = emit_reports(&outcome, &config.output_dir)?;
            let t = &outcome.tally;
            for (rule, achieved) in t.ranked() {
                let pct = if t.targeted() > 0 {
                    format_percent(achieved as f64 / t.targeted() as f64)
                } else {
                    "n/a".into()
                };
                println!("{},{achieved}/{},{pct}", rule.name(), t.targeted());
            }
            if !outcome.exclusions.is_empty() {
                println!("{} exclusion(s) recorded", outcome.exclusions.len());
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Fixtures { file } => {
            let (text, bundled) = match file {
                Some(path) => (std::fs::read_to_string(path)?, false),
                None => (REFERENCE_WINNER_TABLES.to_string(), true),
            };
            let check = check_winner_fixture(&text, bundled)?;
            for line in &check.lines {
                println!("{line}");
            }
            if check.passed {
                Ok(())
            } else {
                Err(CliError::FixtureMismatch)
            }
        }
        Command::IndexMap { src, dest, rule } => {
            let pair = ScalePair::new(src, dest).map_err(|e| CliError::Image(e.to_string()))?;
            print!("{}", build_index_map(pair, rule).to_csv());
            Ok(())
        }
        Command::Resize {
            input,
            output,
            width,
            height,
            rule,
        } => {
            let img = read_pnm_file(&input).map_err(|e| CliError::Image(e.to_string()))?;
            let out =
                resize_nn(&img, width, height, rule).map_err(|e| CliError::Image(e.to_string()))?;
            write_pnm_file(&output, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
