use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermal_ghost::app::{error_line, execute, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "ghostsim", version, about = "Thermal-light ghost imaging and HBT simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hanbury Brown-Twiss timing correlation
    Hbt(Common),
    /// Monte Carlo ghost-imaging scan
    Ghost(Common),
    /// Lens equation residual and magnification
    CheckLens(Common),
    /// Analytic ghost-image reference curve
    IdealCurve(Common),
    /// Closed-form oracle checks
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the file
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix
    #[arg(long)]
    out: Option<String>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, common) = match cli.command {
        Command::Hbt(c) => (Scenario::Hbt, c),
        Command::Ghost(c) => (Scenario::Ghost, c),
        Command::CheckLens(c) => (Scenario::CheckLens, c),
        Command::IdealCurve(c) => (Scenario::IdealCurve, c),
        Command::Selftest(c) => (Scenario::Selftest, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        threads: common.threads,
    };
    let (code, result) = execute(scenario, common.config.as_deref(), &overrides);
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if let Some(e) = &report.deferred {
                eprintln!("{}", error_line(scenario, e));
            }
        }
        Err(e) => eprintln!("{}", error_line(scenario, &e)),
    }
    ExitCode::from(code as u8)
}
