use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncgfdm::experiment::{run_ber, run_power, run_psd, run_sir, run_validation, ExperimentConfig, ExperimentKind};
use ncgfdm::{Result, ResultTable};

#[derive(Parser)]
#[command(name = "ncgfdm", version, about = "N-continuous GFDM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Welch PSD of every waveform variant plus a sidelobe table.
    Psd(Common),
    /// Bit error rate versus Eb/N0.
    Ber(Common),
    /// SIR over the roll-off and HDO grid.
    Sir(Common),
    /// Data and smooth-signal power versus symbol index.
    Power(Common),
    /// Operator identity suite; exits with status 1 on any failure.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file. Without it the preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key, e.g. `--set waveform.beta=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn load(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(match self.preset {
                Preset::Desk => "desk",
                Preset::Full => "full",
            })?,
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if cfg.kind.is_none() {
            cfg.kind = Some(kind);
        }
        Ok(cfg)
    }
}

fn write(cfg: &ExperimentConfig, tables: &[ResultTable]) -> Result<()> {
    for t in tables {
        let (csv, _) = t.write_to(&cfg.output_dir)?;
        println!("wrote {} ({} rows)", csv.display(), t.rows.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (kind, common) = match &cli.command {
        Command::Psd(c) => (ExperimentKind::Psd, c),
        Command::Ber(c) => (ExperimentKind::Ber, c),
        Command::Sir(c) => (ExperimentKind::Sir, c),
        Command::Power(c) => (ExperimentKind::Power, c),
        Command::Validate(c) => (ExperimentKind::Validate, c),
    };
    let cfg = common.load(kind)?;
    if common.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(ExitCode::SUCCESS);
    }
    match kind {
        ExperimentKind::Psd => {
            let r = run_psd(&cfg)?;
            for row in &r.sidelobes.rows {
                println!(
                    "{:<16} offset {:>5} spacings: {:>8.2} dB",
                    row[0].to_string(),
                    row[1].to_string(),
                    row[3].as_f64().unwrap_or(f64::NAN)
                );
            }
            write(&cfg, &r.tables())?;
        }
        ExperimentKind::Ber => write(&cfg, &[run_ber(&cfg)?])?,
        ExperimentKind::Sir => write(&cfg, &[run_sir(&cfg)?])?,
        ExperimentKind::Power => write(&cfg, &[run_power(&cfg)?])?,
        ExperimentKind::Validate => {
            let report = run_validation(&cfg)?;
            for r in &report.rows {
                let status = match (r.passed(), r.enforced) {
                    (true, _) => "pass",
                    (false, true) => "FAIL",
                    (false, false) => "info",
                };
                println!(
                    "{status} {:<34} {:<30} {:>10.3e} <= {:.0e}",
                    r.config_label(),
                    r.identity,
                    r.residual,
                    r.tolerance
                );
            }
            write(&cfg, &[report.table()])?;
            if !report.passed() {
                eprintln!("{} identities failed", report.failures().count());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
