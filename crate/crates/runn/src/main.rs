use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use runn::{Error, Experiment, ExperimentConfig};

/// Run one experiment and write its artifacts.
#[derive(Debug, Parser)]
#[command(name = "runn", version)]
struct Cli {
    /// Experiment tag; required unless given by --config.
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON configuration, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tail mass cut from each end of the cumulative spectrum.
    #[arg(long)]
    alpha: Option<f64>,
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    // A manifest nests the run configuration under "config".
    let value = match value.get("config") {
        Some(c) if value.get("tool").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&cli.config, cli.experiment) {
        (Some(p), _) => load_config(p)?,
        (None, Some(e)) => ExperimentConfig::new(e, 0, "runn-out"),
        (None, None) => return Err(Error::Usage("--experiment or --config is required".into())),
    };
    if let Some(e) = cli.experiment {
        if e != cfg.experiment {
            cfg.overrides.clear();
            cfg.phases = None;
        }
        cfg.experiment = e;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = build_config(cli).and_then(|cfg| runn::run_experiment(&cfg));
    match result {
        Ok(report) => match report.failure {
            None => {
                println!("{}", report.dir.display());
                ExitCode::SUCCESS
            }
            Some(f) => {
                eprintln!("runn: run stopped early: {f}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("runn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
