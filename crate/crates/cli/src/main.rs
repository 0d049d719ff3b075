mod args;
mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use args::KernelSpec;

// Comma lists are single flag values; aliases stop clap from treating them as repeated flags.
type Sizes = Vec<usize>;
type Reals = Vec<f64>;
type Lags = Vec<i64>;
type Marginals = Vec<(f64, f64)>;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage or input error (bad flags, unreadable or malformed files)
  3  invalid model (fails the spectral validity check; witness printed)
  4  numerical failure (embedding/factorization failure, optimizer not converged)

Environment:
  SPECCOH_THREADS  cap on worker threads (default: all cores)";

/// Frequency-domain analysis of multivariate random fields on regular grids.
#[derive(Parser, Debug)]
#[command(name = "speccoh", version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate model coherence, phase and gain over log-spaced radii.
    #[command(after_help = EXIT_CODES)]
    ModelCurve(ModelCurveArgs),
    /// Simulate a Gaussian field from a model and write it as MFLD1.
    #[command(after_help = EXIT_CODES)]
    Simulate(SimulateArgs),
    /// Write the (optionally smoothed) periodogram matrix of a field.
    #[command(after_help = EXIT_CODES)]
    Periodogram(PeriodogramArgs),
    /// Estimate replicate-averaged coherence, phase and gain of a variable pair.
    #[command(after_help = EXIT_CODES)]
    Coherence(CoherenceArgs),
    /// Least-squares fit of marginal or cross Matérn parameters.
    #[command(after_help = EXIT_CODES)]
    Fit(FitArgs),
    /// Correlations of low- and high-pass filtered simulations of a bivariate model.
    #[command(after_help = EXIT_CODES)]
    FilterExperiment(FilterArgs),
    /// Check a model against the spectral validity criterion.
    #[command(after_help = EXIT_CODES)]
    ValidateModel(ValidateArgs),
}

#[derive(Args, Debug)]
struct ModelCurveArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Variable pair `k,l`.
    #[arg(long, value_parser = args::pair, default_value = "0,1")]
    pair: (usize, usize),
    #[arg(long, default_value_t = 1e-2)]
    rmin: f64,
    #[arg(long, default_value_t = 1e2)]
    rmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Output CSV (`r,coh2,abs_coh,phase,gain`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid sizes `n1,n2,...`.
    #[arg(long, value_parser = args::usize_list)]
    grid: Sizes,
    /// Spacings `d1,d2,...`; one value applies to every axis.
    #[arg(long, value_parser = args::f64_list, default_value = "1")]
    spacing: Reals,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Simulation method.
    #[arg(long, value_enum, default_value = "circulant")]
    method: commands::MethodArg,
    /// Output MFLD1 file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PeriodogramArgs {
    /// Input field: MFLD1, or CSV with a `rep,var,i1,..,re[,im]` header.
    #[arg(long)]
    input: PathBuf,
    /// Spacings for a CSV field input (MFLD1 files carry their own).
    #[arg(long, value_parser = args::f64_list)]
    spacing: Option<Reals>,
    /// Replicate to use; all replicates are averaged when omitted.
    #[arg(long)]
    rep: Option<usize>,
    /// Smoothing kernel: `box3` or `custom:<file>`; raw periodogram when omitted.
    #[arg(long, value_parser = args::kernel)]
    kernel: Option<KernelSpec>,
    /// Output CSV (`w1..wd,k,l,re,im`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Preprocess {
    /// Subtract the across-replicate mean and divide by the standard deviation.
    #[arg(long)]
    standardize: bool,
    /// Subtract a Nadaraya–Watson mean over replicates: `nw:<bandwidth>`.
    #[arg(long, value_parser = args::detrend)]
    detrend: Option<f64>,
}

#[derive(Args, Debug)]
struct CoherenceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Spacings for a CSV field input (MFLD1 files carry their own).
    #[arg(long, value_parser = args::f64_list)]
    spacing: Option<Reals>,
    /// Variable pair `k,l`.
    #[arg(long, value_parser = args::pair, default_value = "0,1")]
    pair: (usize, usize),
    /// Smoothing kernel: `box3` or `custom:<file>`.
    #[arg(long, value_parser = args::kernel, default_value = "box3")]
    kernel: KernelSpec,
    /// Pair replicate d of k with replicate d-lag of l.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    lag: i64,
    /// Average per-replicate squared coherences, or coherence of averaged spectra.
    #[arg(long, value_enum, default_value = "coherence")]
    averaging: commands::AveragingArg,
    #[command(flatten)]
    pre: Preprocess,
    /// Output CSV (`w1..wd,coh2,abs_coh,phase,gain`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// MFLD1 field, a periodogram CSV (marginal stage) or a coherence CSV (cross stage).
    #[arg(long)]
    input: PathBuf,
    /// Spacings for a CSV field input (MFLD1 files carry their own).
    #[arg(long, value_parser = args::f64_list)]
    spacing: Option<Reals>,
    #[arg(long, value_enum)]
    stage: commands::Stage,
    /// Variables for the marginal stage (all when omitted).
    #[arg(long, value_parser = args::usize_list)]
    vars: Option<Sizes>,
    /// Variable pair for the cross stage.
    #[arg(long, value_parser = args::pair, default_value = "0,1")]
    pair: (usize, usize),
    /// Replicate lags for the cross stage, e.g. `0,1,2`; one fit per lag.
    #[arg(long, value_parser = args::i64_list, default_value = "0", allow_hyphen_values = true)]
    lag: Lags,
    /// Radial band `rmin:rmax` (default: 0 < r <= 0.9 r_max).
    #[arg(long, value_parser = args::band)]
    band: Option<(Option<f64>, Option<f64>)>,
    #[arg(long, value_parser = args::kernel, default_value = "box3")]
    kernel: KernelSpec,
    /// Fixed marginals `nu:a,nu:a` for a cross fit from a coherence CSV.
    #[arg(long, value_parser = args::marginals)]
    marginals: Option<Marginals>,
    /// Search over the variance instead of profiling it out.
    #[arg(long)]
    joint_sigma2: bool,
    #[command(flatten)]
    pre: Preprocess,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = args::usize_list, default_value = "64,64")]
    grid: Sizes,
    #[arg(long, value_parser = args::f64_list, default_value = "0.125")]
    spacing: Reals,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (`filter,corr,nreps`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SPECCOH_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            anyhow::anyhow!("SPECCOH_THREADS must be a positive integer, got {v:?}")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::ModelCurve(a) => commands::model_curve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Periodogram(a) => commands::periodogram(a),
        Command::Coherence(a) => commands::coherence(a),
        Command::Fit(a) => commands::fit(a),
        Command::FilterExperiment(a) => commands::filter_experiment(a),
        Command::ValidateModel(a) => commands::validate_model(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e)
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>()
                    .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
