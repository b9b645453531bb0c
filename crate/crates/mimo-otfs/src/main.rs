//! Thin command-line front end for the experiment harness: run BER sweeps
//! from configuration files or named presets, cross-validate the fast
//! signal paths against brute-force references, and list presets.

use clap::{Parser, Subcommand};
use mimo_otfs::harness::{
    self, parse_config, preset_configs, run_oracle_check, run_suite, HarnessError, PRESET_NAMES,
};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "mimo-otfs",
    version,
    about = "MIMO-OTFS link simulator: iterative detection BER experiments",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER experiment from a config file or a named preset.
    #[command(after_help = harness::CONFIG_HELP)]
    Run {
        /// Configuration file (see the key reference below).
        #[arg(long, value_name = "PATH", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Named preset (see `list-presets`).
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
        /// Override the master seed.
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        /// Output CSV path; standard output when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Worker threads for the frame loops (0 = all cores).
        #[arg(long, value_name = "N", default_value_t = 0)]
        threads: usize,
        /// Suppress progress lines on standard error.
        #[arg(long)]
        quiet: bool,
    },
    /// Cross-validate fast paths against brute-force matrix references.
    OracleCheck {
        /// Random instances to check.
        #[arg(long, value_name = "N", default_value_t = 50)]
        instances: usize,
        /// Seed for instance generation.
        #[arg(long, value_name = "SEED", default_value_t = 1)]
        seed: u64,
    },
    /// List the named experiment presets.
    ListPresets,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Io(_) => 3,
                _ => 2,
            }
        }
    };
    std::process::exit(code);
}

fn dispatch(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            threads,
            quiet,
        } => {
            let mut configs = match (&config, &preset) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(path)?;
                    vec![parse_config(&text)?]
                }
                (None, Some(name)) => preset_configs(name).ok_or_else(|| {
                    HarnessError::Config(format!("unknown preset `{name}` (see `list-presets`)"))
                })?,
                _ => {
                    return Err(HarnessError::Config(
                        "pass exactly one of --config or --preset".into(),
                    ))
                }
            };
            if let Some(seed) = seed {
                for cfg in &mut configs {
                    cfg.seed = seed;
                }
            }
            let out_path = out.or_else(|| {
                configs
                    .iter()
                    .find_map(|c| c.out.clone().map(PathBuf::from))
            });
            match out_path {
                Some(path) => {
                    let mut file = std::fs::File::create(&path)?;
                    run_suite(&configs, threads, &mut file, !quiet)?;
                    file.flush()?;
                    if !quiet {
                        eprintln!("wrote {}", path.display());
                    }
                }
                None => {
                    let mut stdout = std::io::stdout();
                    run_suite(&configs, threads, &mut stdout, !quiet)?;
                    stdout.flush()?;
                }
            }
            Ok(0)
        }
        Command::OracleCheck { instances, seed } => {
            let outcome = run_oracle_check(instances, seed)?;
            let verdict = |err: f64| {
                if err < outcome.tolerance {
                    "pass"
                } else {
                    "FAIL"
                }
            };
            println!(
                "serial stream vs time-domain matrix: max |diff| = {:.3e} ... {}",
                outcome.max_serial_err,
                verdict(outcome.max_serial_err)
            );
            println!(
                "demodulated frame vs delay-Doppler matrix: max |diff| = {:.3e} ... {}",
                outcome.max_dd_err,
                verdict(outcome.max_dd_err)
            );
            println!(
                "delay-time frame vs per-block tensor: max |diff| = {:.3e} ... {}",
                outcome.max_dt_err,
                verdict(outcome.max_dt_err)
            );
            println!(
                "{} instances checked against tolerance {:.0e}",
                outcome.instances, outcome.tolerance
            );
            Ok(if outcome.passed() { 0 } else { 1 })
        }
        Command::ListPresets => {
            for (name, summary) in PRESET_NAMES {
                println!("{name:12} {summary}");
            }
            Ok(0)
        }
    }
}
