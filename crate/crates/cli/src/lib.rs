//! Command-line front end: reads a TOML config (or flags), runs one family
//! of experiments and writes CSV/JSON results plus a `manifest.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ttlab::symbol::parse_complex;
use ttlab::ZeroSequence;

pub use config::{ConfigFile, Format};
pub use error::CliError;
pub use output::{RunManifest, RunStatus};

#[derive(Debug, Parser)]
#[command(name = "ttlab", version, about = "Truncated Toeplitz operator experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Matrix of T_B(φ) in the TMW basis, with traces and norms.
    Operator(Flags),
    /// Clark measures (atoms and weights) for one α or an α-grid.
    Clark(Flags),
    /// (1/N) Tr f(T(φ)) against ∫ f∘φ dν_N over the N sweep.
    Szego(Flags),
    /// Tr[T(β_N) f(T(φ))] against ∫ f∘φ dm over the N sweep.
    Stz(Flags),
    /// Clark β-norm profile and angular-derivative partial sums.
    Angular(Flags),
    /// Fejér operator, Hilbert–Schmidt, product and rank-one suites.
    Lemmas(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Operator(_) => "operator",
            Command::Clark(_) => "clark",
            Command::Szego(_) => "szego",
            Command::Stz(_) => "stz",
            Command::Angular(_) => "angular",
            Command::Lemmas(_) => "lemmas",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Operator(f)
            | Command::Clark(f)
            | Command::Szego(f)
            | Command::Stz(f)
            | Command::Angular(f)
            | Command::Lemmas(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Absolute and relative quadrature tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest quadrature grid (power of two).
    #[arg(long = "max-grid")]
    pub max_grid: Option<usize>,
    #[arg(long = "alpha-count")]
    pub alpha_count: Option<usize>,
    /// Comma-separated zeros, e.g. `0,0.5,0.3i,-0.2+0.1i`.
    #[arg(long, allow_hyphen_values = true)]
    pub zeros: Option<String>,
    /// Preset name or `c<k>=<value>` terms.
    #[arg(long, allow_hyphen_values = true)]
    pub symbol: Option<String>,
    /// Function name or `poly:c0,c1,…`.
    #[arg(long, allow_hyphen_values = true)]
    pub function: Option<String>,
    /// Comma-separated sweep sizes.
    #[arg(long)]
    pub n: Option<String>,
    /// Single α = e^{iθ} for `clark` and `operator`.
    #[arg(long = "alpha-angle", allow_hyphen_values = true)]
    pub alpha_angle: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

fn parse_list<T: std::str::FromStr>(text: &str, key: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{key}: cannot parse `{}`", s.trim())))
        })
        .collect()
}

/// Config file with command-line overrides applied.
pub fn resolve_config(flags: &Flags) -> Result<ConfigFile, CliError> {
    let mut c = match &flags.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(z) = &flags.zeros {
        let pts = z
            .split(',')
            .map(|s| parse_complex(s.trim()).map_err(|e| CliError::Config(format!("--zeros: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        c.sequence = ZeroSequence::explicit(&pts);
        if flags.n.is_none() {
            c.sweep.n_values = vec![pts.len()];
        }
    }
    if let Some(s) = &flags.symbol {
        let t = s.trim();
        if t.starts_with('c') && t.contains('=') {
            c.symbol.coeffs = Some(t.to_string());
            c.symbol.preset = None;
        } else {
            c.symbol.preset = Some(t.to_string());
            c.symbol.coeffs = None;
        }
    }
    if let Some(f) = &flags.function {
        c.function.name = f.clone();
    }
    if let Some(n) = &flags.n {
        c.sweep.n_values = parse_list(n, "--n")?;
    }
    if let Some(s) = flags.seed {
        c.sweep.seed = s;
    }
    if let Some(t) = flags.tol {
        c.quadrature.abs_tol = t;
        c.quadrature.rel_tol = t;
    }
    if let Some(m) = flags.max_grid {
        c.quadrature.max_points = m;
        c.quadrature.initial_points = c.quadrature.initial_points.min(m);
    }
    if let Some(a) = flags.alpha_count {
        c.sweep.alpha_count = a;
    }
    if let Some(o) = &flags.out {
        c.output.dir = Some(o.clone());
    }
    if let Some(f) = &flags.format {
        c.output.formats = f.clone();
    }
    if let ZeroSequence::Explicit { points } = &c.sequence {
        if let Some(&n) = c.sweep.n_values.iter().max() {
            if n > points.len() {
                return Err(CliError::Config(format!(
                    "sweep.n_values: {n} exceeds the {} explicit zeros",
                    points.len()
                )));
            }
        }
    }
    Ok(c)
}

/// Runs a parsed command and returns its final manifest.
pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let flags = cli.command.flags();
    let config = resolve_config(flags)?;
    commands::execute(&cli.command, flags, &config)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(m) if m.status == RunStatus::AssertionFailed => {
            for n in &m.notes {
                eprintln!("{n}");
            }
            1
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
