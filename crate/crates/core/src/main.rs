use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinmag::commands::{self, FitInput};
use spinmag::config::{RunConfig, CONFIG_ENV};
use spinmag::reproduce::{reproduce, Figure};
use spinmag::{Error, Result};

/// Spin-rotation magnetization of centrifuged molecules: spectra, synthetic
/// pickup-coil waveforms, fits and figure datasets.
#[derive(Parser, Debug)]
#[command(name = "spinmag", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Configuration file (falls back to $SRM_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for noise injection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set gas.pressure_bar=0.9`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug, Default)]
struct Rotor {
    /// Rotational quantum number.
    #[arg(long = "N")]
    n: Option<u32>,
    /// Field strength (T).
    #[arg(long = "B")]
    b: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonalize the spin-rotation Hamiltonian and report precession frequencies.
    Spectrum {
        #[command(flatten)]
        rotor: Rotor,
        /// Compare with brute-force diagonalization in the uncoupled basis.
        #[arg(long)]
        oracle: bool,
    },
    /// Synthesize magnetization and pickup-coil EMF waveforms.
    Synthesize {
        #[command(flatten)]
        rotor: Rotor,
        /// transverse | longitudinal-infield | longitudinal-fieldfree
        #[arg(long)]
        channel: Option<String>,
        /// Signal-to-noise ratio of added white noise (dB).
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Fit the damped two-frequency model to an EMF waveform.
    Fit {
        #[command(flatten)]
        rotor: Rotor,
        /// Averaged EMF waveform CSV.
        #[arg(long, conflicts_with_all = ["plus", "minus"], required_unless_present = "plus")]
        input: Option<PathBuf>,
        /// Waveform for the positive sense; differenced against --minus.
        #[arg(long, requires = "minus")]
        plus: Option<PathBuf>,
        #[arg(long, requires = "plus")]
        minus: Option<PathBuf>,
        /// frequencies-fixed | frequencies-free
        #[arg(long)]
        mode: Option<String>,
    },
    /// Coupling coefficients of the configured coil.
    Coil,
    /// Emit the synthetic dataset and summary for fig2, fig3, fig4 or fig5.
    Reproduce { figure: String },
    /// Precession frequencies over a grid of N and B.
    Sweep {
        /// Comma-separated rotational quantum numbers.
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<u32>,
        /// Comma-separated field strengths (T).
        #[arg(long = "B", value_delimiter = ',', required = true)]
        b: Vec<f64>,
    },
}

fn resolve(global: &Global) -> Result<RunConfig> {
    let path = global.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    for o in &global.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn apply_rotor(cfg: &mut RunConfig, rotor: &Rotor) {
    if let Some(n) = rotor.n {
        cfg.n = n;
    }
    if let Some(b) = rotor.b {
        cfg.b_tesla = b;
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli.global)?;
    match cli.command {
        Command::Spectrum { rotor, oracle } => {
            apply_rotor(&mut cfg, &rotor);
            let report = commands::cmd_spectrum(&cfg, oracle)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(d) = report.oracle_max_relative_deviation {
                emit(&format!("oracle max relative deviation: {d:e}"))?;
            }
            print_json(&report)
        }
        Command::Synthesize { rotor, channel, snr_db } => {
            apply_rotor(&mut cfg, &rotor);
            if let Some(c) = channel {
                cfg.set("trace.channel", &c)?;
            }
            if snr_db.is_some() {
                cfg.snr_db = snr_db;
            }
            print_json(&commands::cmd_synthesize(&cfg)?)
        }
        Command::Fit { rotor, input, plus, minus, mode } => {
            let explicit = rotor.n.is_some() || rotor.b.is_some();
            apply_rotor(&mut cfg, &rotor);
            if let Some(m) = mode {
                cfg.set("fit.mode", &m)?;
            }
            let input = match (input, plus, minus) {
                (Some(p), _, _) => FitInput::Single(p),
                (None, Some(plus), Some(minus)) => FitInput::Pair { plus, minus },
                _ => return Err(Error::InvalidInput("give --input or both --plus and --minus".into())),
            };
            print_json(&commands::cmd_fit(&cfg, &input, !explicit)?)
        }
        Command::Coil => print_json(&commands::cmd_coil(&cfg)?),
        Command::Reproduce { figure } => {
            let summary = reproduce(figure.parse::<Figure>()?, &cfg)?;
            print_json(&summary)?;
            for c in summary.checks.iter().filter(|c| !c.pass) {
                eprintln!("check outside range: {} = {} (expected {}..{})", c.name, c.value, c.low, c.high);
            }
            Ok(())
        }
        Command::Sweep { n, b } => {
            let rows = commands::cmd_sweep(&cfg, &n, &b)?;
            eprintln!("wrote {} rows to {}", rows.len(), cfg.output_dir.join("sweep.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
