use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cusp_eta::{Error, ErrorKind};

mod commands;

/// Delocalised cusp contributions and the spectral checks behind them.
#[derive(Parser, Debug)]
#[command(name = "cusp-eta", version)]
struct Cli {
    /// Worker threads; overrides CUSP_ETA_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write results here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Completeness, volume and admissibility of a cusp shape.
    Diagnose {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 2)]
        p: u32,
        /// Spectral gap of the boundary operator.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
    },
    /// Circle Dirac spectrum `n + shift` with rotation `alpha`.
    SpectrumGen {
        #[arg(long, default_value_t = 0.5)]
        shift: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        n_max: u32,
    },
    /// Solutions theta_1, theta_2 on a uniform grid, as CSV.
    SlSolve {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, allow_hyphen_values = true)]
        nu: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        nu_im: f64,
        #[arg(long)]
        y_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Spectral measure (atoms and density samples), as CSV.
    SlMeasure {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long)]
        nu_max: f64,
    },
    /// Cusp contribution at a' for a shape and a spectrum file.
    Eta {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        a_prime: f64,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[command(flatten)]
        numerics: NumericArgs,
        /// Integrate even when the spectrum is g-symmetric.
        #[arg(long)]
        no_short_circuit: bool,
        /// Also write the per-eigenvalue breakdown as CSV.
        #[arg(long)]
        per_lambda: Option<PathBuf>,
    },
    /// Cylinder split into the eta invariant and the vanishing remainder.
    EtaCyl {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        a_dd: f64,
    },
    /// Regularised contribution for a boundary operator with kernel.
    EtaReg {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        spectrum: PathBuf,
        /// Decreasing shifts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, requires = "t_max")]
        t_min: Option<f64>,
        #[arg(long, requires = "t_min")]
        t_max: Option<f64>,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Clifford relations, commutator and connection identities, and the
    /// conformal Dirac operator on a cylinder.
    VerifyClifford {
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        p: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "shape_source")]
pub struct ShapeSource {
    /// Shape config file (`kind=mulog`, `mu=`, `a=` or `kind=tabulated`, `file=`).
    #[arg(long)]
    shape: Option<PathBuf>,
    /// phi(x) = -mu log x.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// phi = 0, the cylinder.
    #[arg(long)]
    flat: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ShapeArgs {
    #[command(flatten)]
    source: ShapeSource,
    /// Start of the cusp for --mu and --flat.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "potential_source")]
pub struct PotentialSource {
    /// q = c.
    #[arg(long, allow_hyphen_values = true)]
    constant: Option<f64>,
    /// q = y^2.
    #[arg(long)]
    harmonic: bool,
    /// q = y.
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    shape: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    flat: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PotentialArgs {
    #[command(flatten)]
    source: PotentialSource,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Boundary eigenvalue for shape potentials.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Plus)]
    sign: SignArg,
}

#[derive(Args, Debug, Clone, Default)]
pub struct NumericArgs {
    #[arg(long)]
    s_min: Option<f64>,
    #[arg(long)]
    s_max: Option<f64>,
    /// Ignore eigenvalues with |lambda| above this.
    #[arg(long)]
    lambda_cutoff: Option<f64>,
    /// Panel width of the s-rule in log s.
    #[arg(long)]
    log_s_panel: Option<f64>,
    /// The spectrum file is complete rather than a window of an infinite spectrum.
    #[arg(long)]
    complete: bool,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("CUSP_ETA_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("CUSP_ETA_THREADS = {v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Error::InvalidInput("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let mut out: Box<dyn Write> = match &cli.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    commands::dispatch(cli.command, &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cusp-eta: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Numerical => 2,
                ErrorKind::InvalidInput => 3,
            })
        }
    }
}
