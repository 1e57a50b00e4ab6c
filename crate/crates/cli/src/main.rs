mod commands;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavica::experiments::{Rational, SourceKind};
use wavica::EstimatorKind;

/// Failure carrying the process exit code: 2 for usage or input problems,
/// 3 for numerical failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn numeric(message: String) -> Self {
        Self { code: 3, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<wavica::Error> for CliError {
    fn from(e: wavica::Error) -> Self {
        use wavica::Error as E;
        match e {
            E::Singular(_) | E::Construction(_) | E::Overflow(_) => Self::numeric(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::input(format!("write failed: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(format!("write failed: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "wavica",
    version,
    about = "Wavelet contrast estimators for independent component analysis",
    after_help = "Exit codes: 0 success, 2 usage or input error, 3 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one contrast estimator on a CSV sample.
    ///
    /// Input: one observation per line, comma-separated, values in [0,1];
    /// an optional header line is detected by a non-numeric first field.
    /// Output columns: estimator,N,j,d,n,value
    Contrast(ContrastArgs),
    /// Monte Carlo MSE over a grid of sample sizes and the fitted log-log slope.
    ///
    /// Output rows, first field is the record type:
    ///   mse,estimator,N,j,d,n,replicates,mse,mse_stderr
    ///   summary,estimator,N,j,d,s,regime,slope,slope_stderr,theoretical,theoretical_rational
    /// `theoretical` is `inoperable` (or `none` for b2) when no exponent applies.
    Rates(RatesArgs),
    /// Whiten a CSV sample and search for the rotation minimizing the plug-in contrast.
    ///
    /// Output rows, first field is the record type:
    ///   W,row,w_1..w_d          rotation acting on whitened data (identity without accepted steps)
    ///   whitening,row,c_1..c_d  symmetric whitening matrix
    ///   unmixing,row,u_1..u_d   W times whitening, applied to centered observations
    ///   initial_contrast,value
    ///   final_contrast,value
    ///   trace,sweep,p,q,angle,contrast
    ///   amari_error,value       only with --truth, computed on unmixing times truth
    Demix(DemixArgs),
    /// Draw a mixed sample in [0,1]^d and write it as CSV with 17 significant digits.
    Gen(GenArgs),
    /// Quick internal consistency checks. Output columns: check,status,detail
    Selftest,
}

#[derive(Args, Debug, Clone, Copy)]
struct WaveletArgs {
    /// Daubechies order N (1 = Haar).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=8))]
    wavelet: u64,
    /// Resolution level j.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(0..=30))]
    level: u32,
}

#[derive(Args, Debug)]
struct ContrastArgs {
    #[command(flatten)]
    wavelet: WaveletArgs,
    /// One of c2, b2, d2, d2-brute, f2, g2, delta2.
    #[arg(long, default_value = "c2")]
    estimator: EstimatorKind,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Dimension.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=16))]
    d: u64,
    /// Latent source law: uniform, bimodal or triangular.
    #[arg(long, default_value = "uniform")]
    source: SourceKind,
    /// `identity`, `rotation:<degrees>` (d = 2), or a CSV file holding a d x d matrix.
    #[arg(long, default_value = "identity")]
    mixing: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[command(flatten)]
    wavelet: WaveletArgs,
    #[arg(long, default_value = "c2")]
    estimator: EstimatorKind,
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    replicates: u64,
    /// Comma-separated, strictly increasing sample sizes (at least 3).
    #[arg(long, default_value = "250,500,1000,2000")]
    n_grid: String,
    /// Besov smoothness for the theoretical exponent, e.g. 1, 0.25 or 1/4.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    s: String,
    /// Value the MSE is measured against (0 is the contrast at independence).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    target: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DemixArgs {
    #[command(flatten)]
    wavelet: WaveletArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = wavica::demix::DEFAULT_SWEEPS)]
    sweeps: usize,
    /// Number of angles in [0, pi/2).
    #[arg(long, default_value_t = wavica::demix::DEFAULT_GRID_SIZE, value_parser = parse_positive)]
    grid_size: usize,
    /// CSV file with the true d x d mixing matrix.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Number of observations.
    #[arg(long, default_value_t = 1000, value_parser = parse_positive)]
    n: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the effective mixing matrix (sources to observations).
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses `p/q`, an integer, or a plain decimal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    let bad = || CliError::input(format!("cannot parse smoothness '{s}'"));
    let t = s.trim();
    if let Ok(r) = t.parse::<Rational>() {
        return Ok(r);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (whole, frac) = body.split_once('.').ok_or_else(bad)?;
    if frac.len() > 12 || !(whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let num: i64 = if digits.is_empty() {
        return Err(bad());
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let r = Rational::new(num, 10_i64.pow(frac.len() as u32));
    Ok(if neg { -r } else { r })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Contrast(a) => commands::contrast(a),
        Command::Rates(a) => commands::rates(a),
        Command::Demix(a) => commands::demix(a),
        Command::Gen(a) => commands::gen(a),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/4").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_rational("0.25").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_rational("2").unwrap(), Rational::from_integer(2));
        assert_eq!(parse_rational("-0.5").unwrap(), Rational::new(-1, 2));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
