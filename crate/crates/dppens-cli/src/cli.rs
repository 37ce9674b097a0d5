//! Argument parsing, config-file merging, and dispatch.
//!
//! Flag precedence: explicit flag, then config-file value, then preset,
//! then the hard default. Exit codes: 0 success, 1 usage, 2 data,
//! 3 verification failure, 4 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dppens::{gram, KernelSpec, PreparedSampler, SamplerScheme};

use crate::config::ConfigFile;
use crate::dataset::{load_csv, subsample, Dataset};
use crate::experiment::{
    clamped_spectrum, run_ensemble_krr, run_ensemble_nystrom, split_and_stratify, SamplerRequest,
};
use crate::report::{self, RlsOutput, SampleOutput, SCHEMA_VERSION};
use crate::synth::synth500;
use crate::verify::{run_suite, verify_csv, Suite, SuiteParams};
use crate::{stream_tag, CliError, Result};

pub const DEFAULT_M_LIST: [usize; 5] = [1, 5, 10, 15, 20];
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Root-epsilon-scale nugget on the unit kernel diagonal: small enough to
/// keep members interpolating, large enough that a near-duplicate landmark
/// pair cannot blow a member up.
pub const DEFAULT_JITTER: f64 = 1e-6;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(
    name = "dppens",
    version,
    about = "Determinantal landmark sampling, ensemble kernel regression, \
             and verification oracles"
)]
struct Cli {
    /// Master random seed; every stream derives from it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (reports are byte-identical for any value)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    output: Option<String>,
    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value file supplying defaults; explicit flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw landmark subsets under a sampling scheme
    Sample(SampleArgs),
    /// Ridge leverage scores and the expected free-size subset size
    Rls(RlsArgs),
    /// Ensemble Nystrom approximation benchmark
    Nystrom(NystromArgs),
    /// Ensemble ridgeless regression benchmark on a leverage-stratified split
    KrrEnsemble(KrrArgs),
    /// Oracle verification suites
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV/TSV file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the built-in 500-point planar benchmark
    #[arg(long)]
    synth: bool,
    /// Header name of the label column
    #[arg(long)]
    label_column: Option<String>,
    /// Expand non-numeric columns into indicator columns
    #[arg(long)]
    one_hot: bool,
    /// Field delimiter: a single character, or "tab"
    #[arg(long)]
    delimiter: Option<String>,
    /// First draw a without-replacement row subsample of this size
    #[arg(long)]
    subsample: Option<usize>,
    /// Named defaults: abalone (sigma 3, k 50), wine (sigma 5, k 100),
    /// synth (sigma 0.5, k 25)
    #[arg(long)]
    preset: Option<String>,
    /// Kernel bandwidth
    #[arg(long)]
    sigma: Option<f64>,
    /// Kernel family: gaussian or laplace
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ground-set size for data-free uniform sampling
    #[arg(long)]
    n: Option<usize>,
    /// Sampling scheme: uniform, rls, dpp, or kdpp
    #[arg(long)]
    scheme: Option<String>,
    /// Subset size for the fixed-size schemes
    #[arg(long)]
    k: Option<usize>,
    /// Ridge for leverage scores and the free-size scheme
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of subsets to draw
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Debug, Args)]
struct RlsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ridge regularizer (default 1e-4 * n)
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct NystromArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sampling scheme: uniform, rls, dpp, or kdpp
    #[arg(long)]
    scheme: Option<String>,
    /// Landmark count for the fixed-size schemes
    #[arg(long)]
    k: Option<usize>,
    /// Ridge for leverage scores and the free-size scheme
    #[arg(long)]
    alpha: Option<f64>,
    /// Ensemble-size checkpoints, comma separated
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Independent repeats per checkpoint
    #[arg(long)]
    repeats: Option<usize>,
    /// Pseudoinverse cutoff for the landmark block
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct KrrArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sampling scheme: uniform, rls, dpp, or kdpp
    #[arg(long)]
    scheme: Option<String>,
    /// Training-subset size for the fixed-size schemes
    #[arg(long)]
    k: Option<usize>,
    /// Ridge for leverage scores and the free-size scheme
    /// (default: the stratification ridge 1e-4 * n_train)
    #[arg(long)]
    alpha: Option<f64>,
    /// Ensemble-size checkpoints, comma separated
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Independent repeats per checkpoint
    #[arg(long)]
    repeats: Option<usize>,
    /// Diagonal jitter added to each member's landmark block
    #[arg(long)]
    jitter: Option<f64>,
    /// Training fraction of the random split
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite: thm1, cor4, lemma2, prop5, remark, eq2-mc, or sampler-laws
    suite: String,
    /// Restrict the grid to one ground-set size
    #[arg(long)]
    n: Option<usize>,
    /// Restrict the grid to one subset size
    #[arg(long)]
    k: Option<usize>,
    /// Restrict the grid to one ridge value
    #[arg(long)]
    alpha: Option<f64>,
    /// Random instances per grid cell
    #[arg(long)]
    seeds: Option<usize>,
    /// Monte Carlo draws
    #[arg(long)]
    draws: Option<usize>,
    /// Random vectors or spectra for the scalar-bound suites
    #[arg(long)]
    count: Option<usize>,
    /// Test points for the mean-prediction suite
    #[arg(long)]
    test_points: Option<usize>,
}

/// Entry point: parses, executes, and maps everything to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(verify_failed) => {
            if verify_failed {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Flag-over-config resolution.
struct Merge {
    cfg: Option<ConfigFile>,
}

impl Merge {
    fn opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match &self.cfg {
                Some(c) => c.get_parsed(key),
                None => Ok(None),
            },
        }
    }

    fn flag(&self, set: bool, key: &str) -> Result<bool> {
        if set {
            return Ok(true);
        }
        match &self.cfg {
            Some(c) => Ok(c.get_bool(key)?.unwrap_or(false)),
            None => Ok(false),
        }
    }

    fn list(&self, flag: Option<Vec<usize>>, key: &str) -> Result<Option<Vec<usize>>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match &self.cfg {
                Some(c) => c.get_usize_list(key),
                None => Ok(None),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::usage(format!(
                "unknown output format {other:?} (expected json or csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Preset {
    Abalone,
    Wine,
    Synth,
}

impl Preset {
    fn sigma(&self) -> f64 {
        match self {
            Preset::Abalone => 3.0,
            Preset::Wine => 5.0,
            Preset::Synth => crate::synth::SYNTH_SIGMA,
        }
    }

    fn k(&self) -> usize {
        match self {
            Preset::Abalone => 50,
            Preset::Wine => 100,
            Preset::Synth => crate::synth::SYNTH_K,
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abalone" => Ok(Preset::Abalone),
            "wine" => Ok(Preset::Wine),
            "synth" => Ok(Preset::Synth),
            other => Err(CliError::usage(format!(
                "unknown preset {other:?} (expected abalone, wine, or synth)"
            ))),
        }
    }
}

fn parse_delimiter(raw: Option<String>) -> Result<u8> {
    let Some(raw) = raw else { return Ok(b',') };
    match raw.as_str() {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        other => Err(CliError::usage(format!(
            "delimiter must be one ASCII character or \"tab\", got {other:?}"
        ))),
    }
}

/// Loads and optionally subsamples the dataset, and resolves the kernel.
/// Returns the preset's subset size so callers can fall back to it.
fn resolve_data(
    args: &DataArgs,
    merge: &Merge,
    seed: u64,
    require_labels: bool,
) -> Result<(Dataset, KernelSpec<f64>, Option<usize>)> {
    let data_path = merge.opt::<PathBuf>(args.data.clone(), "data")?;
    let synth = merge.flag(args.synth, "synth")?;
    let preset = match merge.opt::<Preset>(
        args.preset.clone().map(|p| p.parse()).transpose()?,
        "preset",
    )? {
        Some(p) => Some(p),
        None if synth => Some(Preset::Synth),
        None => None,
    };

    let ds = match (&data_path, synth) {
        (Some(_), true) => {
            return Err(CliError::usage("--data and --synth are mutually exclusive"))
        }
        (Some(path), false) => {
            let delimiter = parse_delimiter(merge.opt(args.delimiter.clone(), "delimiter")?)?;
            let one_hot = merge.flag(args.one_hot, "one-hot")?;
            let label = merge.opt::<String>(args.label_column.clone(), "label-column")?;
            load_csv(path, label.as_deref(), delimiter, one_hot)?
        }
        (None, true) => synth500(seed),
        (None, false) => return Err(CliError::usage("no input: provide --data FILE or --synth")),
    };
    let ds = match merge.opt::<usize>(args.subsample, "subsample")? {
        Some(target) => subsample(&ds, target, seed)?,
        None => ds,
    };
    if require_labels && ds.labels().is_none() {
        return Err(CliError::data(
            "this command needs labels; pass --label-column NAME (or use --synth)",
        ));
    }

    let sigma = match merge
        .opt::<f64>(args.sigma, "sigma")?
        .or(preset.map(|p| p.sigma()))
    {
        Some(s) => s,
        None => {
            return Err(CliError::usage(
                "no kernel bandwidth: provide --sigma or --preset",
            ))
        }
    };
    let family = merge
        .opt::<String>(args.kernel.clone(), "kernel")?
        .unwrap_or_else(|| "gaussian".to_string());
    let spec = match family.to_ascii_lowercase().as_str() {
        "gaussian" => KernelSpec::gaussian(sigma)?,
        "laplace" => KernelSpec::laplace(sigma)?,
        other => {
            return Err(CliError::usage(format!(
                "unknown kernel {other:?} (expected gaussian or laplace)"
            )))
        }
    };
    Ok((ds, spec, preset.map(|p| p.k())))
}

/// Resolves scheme, subset size, and ridge into a sampler request. The
/// free-size scheme canonicalizes `k` to 0, which reports pass through.
/// A missing ridge stays unresolved here; it is filled in against the
/// kernel spectrum where the experiment runs.
fn resolve_sampler(
    scheme: Option<String>,
    k: Option<usize>,
    alpha: Option<f64>,
    merge: &Merge,
    preset_k: Option<usize>,
    seed: u64,
) -> Result<SamplerRequest> {
    let scheme = match merge.opt::<String>(scheme, "scheme")? {
        Some(s) => s.parse::<SamplerScheme>()?,
        None => {
            return Err(CliError::usage(
                "no scheme: provide --scheme uniform|rls|dpp|kdpp",
            ))
        }
    };
    let alpha = merge.opt::<f64>(alpha, "alpha")?;
    let k = if scheme.fixed_size() {
        match merge.opt::<usize>(k, "k")?.or(preset_k) {
            Some(k) => k,
            None => {
                return Err(CliError::usage(format!(
                    "scheme {scheme} needs a subset size: provide --k or --preset"
                )))
            }
        }
    } else {
        0
    };
    Ok(SamplerRequest {
        scheme,
        k,
        alpha,
        seed,
    })
}

/// Ridge for the bare leverage-score command, matching the stratification
/// convention.
fn default_rls_alpha(n: usize) -> f64 {
    1e-4 * n as f64
}

fn execute(cli: Cli) -> Result<bool> {
    let merge = Merge {
        cfg: match &cli.config {
            Some(path) => Some(ConfigFile::load(path)?),
            None => None,
        },
    };
    if let Some(t) = merge.opt::<usize>(cli.threads, "threads")? {
        if t == 0 {
            return Err(CliError::usage("threads must be at least 1"));
        }
        // tolerate an already-initialized pool (repeat calls in one process)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let seed = merge.opt::<u64>(cli.seed, "seed")?.unwrap_or(0);
    let format = merge
        .opt::<Format>(cli.output.map(|s| s.parse()).transpose()?, "output")?
        .unwrap_or(Format::Json);
    let out_path = merge.opt::<PathBuf>(cli.out.clone(), "out")?;

    let (text, verify_failed) = match cli.command {
        Command::Sample(args) => (cmd_sample(args, &merge, seed, format)?, false),
        Command::Rls(args) => (cmd_rls(args, &merge, seed, format)?, false),
        Command::Nystrom(args) => (cmd_nystrom(args, &merge, seed, format)?, false),
        Command::KrrEnsemble(args) => (cmd_krr(args, &merge, seed, format)?, false),
        Command::Verify(args) => cmd_verify(args, &merge, seed, format)?,
    };
    report::emit(&text, out_path.as_deref())?;
    Ok(verify_failed)
}

fn cmd_sample(args: SampleArgs, merge: &Merge, seed: u64, format: Format) -> Result<String> {
    let draws = merge.opt::<usize>(args.draws, "draws")?.unwrap_or(10);
    if draws == 0 {
        return Err(CliError::usage("draws must be at least 1"));
    }
    let n_flag = merge.opt::<usize>(args.n, "n")?;
    let (n, spectrum, request) = match n_flag {
        Some(n) => {
            if args.data.data.is_some() || args.data.synth {
                return Err(CliError::usage(
                    "--n is for data-free sampling and excludes --data/--synth",
                ));
            }
            if n == 0 {
                return Err(CliError::usage("ground-set size must be at least 1"));
            }
            let request = resolve_sampler(args.scheme, args.k, args.alpha, merge, None, seed)?;
            if request.scheme.needs_spectrum() {
                return Err(CliError::usage(format!(
                    "scheme {} needs a kernel; provide --data or --synth instead of --n",
                    request.scheme
                )));
            }
            (n, None, request)
        }
        None => {
            let (ds, spec, preset_k) = resolve_data(&args.data, merge, seed, false)?;
            let n = ds.n();
            let request = resolve_sampler(args.scheme, args.k, args.alpha, merge, preset_k, seed)?;
            crate::experiment::validate_sampler(&request, n, "dataset")?;
            let spectrum = if request.scheme.needs_spectrum() {
                let all: Vec<usize> = (0..n).collect();
                let standardized = ds.standardized(&all)?;
                let g = gram(standardized.features(), &spec)?;
                Some(clamped_spectrum(&g)?)
            } else {
                None
            };
            (n, spectrum, request)
        }
    };
    let config = request.resolve(spectrum.as_ref())?;
    let prepared = PreparedSampler::prepare(&config, n, spectrum.as_ref())?;
    let mut subsets = Vec::with_capacity(draws);
    for d in 0..draws {
        let subset = prepared.draw_stream(&[stream_tag::SAMPLE, d as u64])?;
        subsets.push(subset.into_indices());
    }
    let output = SampleOutput {
        schema_version: SCHEMA_VERSION,
        command: "sample".to_string(),
        seed,
        scheme: config.scheme.as_str().to_string(),
        n,
        k: config.k,
        alpha: config.alpha,
        draws,
        subsets,
    };
    Ok(match format {
        Format::Json => report::to_json(&output)?,
        Format::Csv => report::sample_csv(&output),
    })
}

fn cmd_rls(args: RlsArgs, merge: &Merge, seed: u64, format: Format) -> Result<String> {
    let (ds, spec, _) = resolve_data(&args.data, merge, seed, false)?;
    let n = ds.n();
    let alpha = merge
        .opt::<f64>(args.alpha, "alpha")?
        .unwrap_or(default_rls_alpha(n));
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::usage(format!(
            "alpha = {alpha} must be positive and finite"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let standardized = ds.standardized(&all)?;
    let g = gram(standardized.features(), &spec)?;
    let spectrum = clamped_spectrum(&g)?;
    let scores = spectrum.ridge_leverage_scores(alpha)?;
    let output = RlsOutput {
        schema_version: SCHEMA_VERSION,
        command: "rls".to_string(),
        seed,
        n,
        alpha,
        expected_dpp_size: spectrum.expected_dpp_size(alpha),
        scores: scores.as_slice().to_vec(),
    };
    Ok(match format {
        Format::Json => report::to_json(&output)?,
        Format::Csv => report::rls_csv(&output),
    })
}

fn cmd_nystrom(args: NystromArgs, merge: &Merge, seed: u64, format: Format) -> Result<String> {
    let (ds, spec, preset_k) = resolve_data(&args.data, merge, seed, false)?;
    let request = resolve_sampler(args.scheme, args.k, args.alpha, merge, preset_k, seed)?;
    let m_list = merge
        .list(args.m_list, "m-list")?
        .unwrap_or_else(|| DEFAULT_M_LIST.to_vec());
    let repeats = merge
        .opt::<usize>(args.repeats, "repeats")?
        .unwrap_or(DEFAULT_REPEATS);
    let epsilon = merge
        .opt::<f64>(args.epsilon, "epsilon")?
        .unwrap_or(DEFAULT_EPSILON);
    let rep = run_ensemble_nystrom(&ds, &spec, request, &m_list, repeats, epsilon)?;
    Ok(match format {
        Format::Json => report::to_json(&rep)?,
        Format::Csv => report::experiment_csv(&rep),
    })
}

fn cmd_krr(args: KrrArgs, merge: &Merge, seed: u64, format: Format) -> Result<String> {
    let (ds, spec, preset_k) = resolve_data(&args.data, merge, seed, true)?;
    let train_fraction = merge
        .opt::<f64>(args.train_fraction, "train-fraction")?
        .unwrap_or(DEFAULT_TRAIN_FRACTION);
    let split = split_and_stratify(&ds, &spec, train_fraction, seed)?;
    let request = resolve_sampler(args.scheme, args.k, args.alpha, merge, preset_k, seed)?;
    let m_list = merge
        .list(args.m_list, "m-list")?
        .unwrap_or_else(|| DEFAULT_M_LIST.to_vec());
    let repeats = merge
        .opt::<usize>(args.repeats, "repeats")?
        .unwrap_or(DEFAULT_REPEATS);
    let jitter = merge
        .opt::<f64>(args.jitter, "jitter")?
        .unwrap_or(DEFAULT_JITTER);
    let rep = run_ensemble_krr(&ds, &split, &spec, request, &m_list, repeats, jitter)?;
    Ok(match format {
        Format::Json => report::to_json(&rep)?,
        Format::Csv => report::experiment_csv(&rep),
    })
}

fn cmd_verify(
    args: VerifyArgs,
    merge: &Merge,
    seed: u64,
    format: Format,
) -> Result<(String, bool)> {
    let suite: Suite = args.suite.parse()?;
    let defaults = SuiteParams::default();
    let params = SuiteParams {
        n: merge.opt::<usize>(args.n, "n")?,
        k: merge.opt::<usize>(args.k, "k")?,
        alpha: merge.opt::<f64>(args.alpha, "alpha")?,
        seeds: merge
            .opt::<usize>(args.seeds, "seeds")?
            .unwrap_or(defaults.seeds),
        draws: merge.opt::<usize>(args.draws, "draws")?,
        count: merge
            .opt::<usize>(args.count, "count")?
            .unwrap_or(defaults.count),
        test_points: merge
            .opt::<usize>(args.test_points, "test-points")?
            .unwrap_or(defaults.test_points),
    };
    let output = run_suite(suite, &params, seed)?;
    let text = match format {
        Format::Json => report::to_json(&output)?,
        Format::Csv => verify_csv(&output),
    };
    Ok((text, !output.passed))
}
