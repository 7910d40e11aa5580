use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fris_core::error::{Error, Result};
use fris_core::harness::{
    compare_architectures, override_key, run_scenario, sweep_csv, ScenarioConfig,
};
use fris_core::oracle::special_function_checks;
use fris_core::secrecy::{fit_mle, sop_closed_form, sop_numeric, FitRow, GammaParams, SecrecyParams};

#[derive(Parser)]
#[command(name = "fris", version, about = "Secrecy-outage simulator for fluid RIS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the SOP table as CSV.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the architecture ranking to stderr.
        #[arg(long)]
        compare: bool,
    },
    /// Run a scenario once per value of a dotted configuration key.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit Nakagami laws to each column of a CSV of channel magnitudes.
    Fit { samples: PathBuf },
    /// Closed-form and integrated outage for an exponential eavesdropper link.
    Sop {
        #[arg(long)]
        kb: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        rs: f64,
    },
    /// Compare the special functions with their reference evaluations.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            seed,
            out,
            compare,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.mc.seed = s;
            }
            let res = run_scenario(&cfg)?;
            if compare {
                eprint!("{}", compare_architectures(std::slice::from_ref(&res))?.to_text());
            }
            emit(&res.to_csv(), out)?;
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let base: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("invalid scenario file: {e}")))?;
            let mut runs = Vec::with_capacity(values.len());
            for v in values {
                let mut table = base.clone();
                override_key(&mut table, &param, &v)?;
                let cfg = ScenarioConfig::from_table(table)?;
                runs.push((v, run_scenario(&cfg)?));
            }
            emit(&sweep_csv(&runs), out)?;
        }
        Command::Fit { samples } => {
            let mut reader = csv::Reader::from_path(&samples)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", samples.display())))?;
            let headers: Vec<String> = reader
                .headers()
                .map_err(|e| Error::Config(e.to_string()))?
                .iter()
                .map(str::to_string)
                .collect();
            let mut columns = vec![Vec::new(); headers.len()];
            for record in reader.records() {
                let record = record.map_err(|e| Error::Config(e.to_string()))?;
                for (col, field) in columns.iter_mut().zip(record.iter()) {
                    let v: f64 = field
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("not a number: '{field}'")))?;
                    col.push(v);
                }
            }
            println!("{}", FitRow::HEADER);
            for (name, col) in headers.iter().zip(&columns) {
                println!("{}", FitRow::new(name, &fit_mle(col)?).to_csv());
            }
        }
        Command::Sop { kb, rho, rs } => {
            let params = SecrecyParams::new(rs, rho)?;
            let closed = sop_closed_form(kb, &params)?;
            let b = GammaParams::new(kb, 1.0, 1.0)?;
            let e = GammaParams::new(1.0, rho, 1.0)?;
            let numeric = sop_numeric(&b, &e, rs)?;
            println!("sop_closed,sop_numeric");
            println!("{},{}", closed.value, numeric);
            if closed.out_of_range {
                eprintln!("warning: closed form exceeded one before clamping ({})", closed.raw);
            }
        }
        Command::Selftest => {
            let checks = special_function_checks(1000);
            for c in &checks {
                println!("{}", c.summary());
            }
            if checks.iter().any(|c| !c.passed()) {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
