use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blowuplab::calculator::bounds_json;
use blowuplab::config::RunConfig;
use blowuplab::verify::{run_suite, Suite};
use blowuplab::{experiment, presets, report, resolve_out, tables, LabError, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blowuplab", version, about = "Blow-up time experiments for the heat equation with a local nonlinear Neumann condition")]
struct Cli {
    /// Output directory (overrides BLOWUPLAB_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Constant of the lower bounds.
    #[arg(long = "c-constant", global = true)]
    c_constant: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config file (or a preset name such as table1).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the four table presets and write table1.csv .. table4.csv.
    ReproduceTables,
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Summarize the records in a directory (default: the output directory).
    Report { dir: Option<PathBuf> },
    /// Evaluate the closed-form bounds for constant initial data.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        u0: f64,
        #[arg(long)]
        gamma1: f64,
        /// Volume of the domain.
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    if !path.exists() {
        if let Some(name) = path.to_str() {
            if presets::PRESETS.iter().any(|(n, _)| *n == name) {
                return presets::preset(name);
            }
        }
    }
    RunConfig::load(path)
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let mut cfg = load_config(&config)?;
            if let Some(c) = cli.c_constant {
                cfg.c_constant = c;
                cfg.validate()?;
            }
            let out = resolve_out(cli.out.as_deref(), cfg.output.as_deref());
            let record = experiment::execute(&cfg, &out, cli.jobs)?;
            for r in &record.rows {
                println!(
                    "{} |Γ1|={} crossed={} T0={} m1={} upper={}",
                    cfg.name,
                    r.gamma1,
                    r.crossed,
                    r.t0.map_or("-".into(), |t| format!("{t:.2}")),
                    r.m1_at_t0.map_or("-".into(), |t| format!("{t:.3}")),
                    r.bounds.upper.map_or("-".into(), |t| format!("{t:.2}")),
                );
            }
            println!("record: {}", blowuplab::record::record_dir(&out, &cfg).display());
        }
        Command::ReproduceTables => {
            let out = resolve_out(cli.out.as_deref(), None);
            std::fs::create_dir_all(&out).map_err(|source| LabError::Io { path: out.clone(), source })?;
            for (path, rec) in tables::reproduce_tables(&out, cli.jobs, cli.c_constant.unwrap_or(1.0))? {
                println!("{} (global order {})", path.display(), rec.global_order.map_or("-".into(), |o| format!("{o:.3}")));
            }
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite);
            let out = resolve_out(cli.out.as_deref(), None);
            std::fs::create_dir_all(&out).map_err(|source| LabError::Io { path: out.clone(), source })?;
            let path = out.join(format!("verify-{}.json", suite.name()));
            std::fs::write(&path, serde_json::to_string_pretty(&checks)?).map_err(|source| LabError::Io { path: path.clone(), source })?;
            for c in &checks {
                println!("{}", serde_json::to_string(c)?);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(LabError::Verification { failed });
            }
        }
        Command::Report { dir } => {
            let out = resolve_out(cli.out.as_deref(), None);
            let dir = dir.unwrap_or_else(|| out.clone());
            let rep = report::build_report(&dir)?;
            rep.write(&dir)?;
            print!("{}", rep.to_markdown());
        }
        Command::Bounds { n, q, u0, gamma1, volume } => {
            println!("{}", bounds_json(n, q, u0, gamma1, volume, cli.c_constant.unwrap_or(1.0))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
