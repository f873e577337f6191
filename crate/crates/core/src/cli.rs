//! Command-line front end: generate synthetic series, select orders, estimate
//! specific entropy rates and run the classic estimators over CSV files.
//!
//! Exit codes are 0 on success, 2 on usage errors and 3 when a computation
//! fails. A JSON run manifest is written next to the output file (or to
//! `--manifest`) only when the command succeeds.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ckde::Bandwidths;
use crate::classic;
use crate::entropy::{specific_entropy_series, time_averaged_rate, windowed_average};
use crate::error::Error;
use crate::selection::select_order;
use crate::series::{summary_stats, EstimationConfig, Series};
use crate::synth::{self, FireParams, Markov2Params, OdeSpec, OdeSystem, Signal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "SPENRA_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "spenra", version, about = "Specific entropy rates of interval series")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores, or SPENRA_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress informational messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Where to write the run manifest (default: `<output>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate a synthetic series.
    Generate(GenerateArgs),
    /// Fit bandwidths at each order and choose an order by block cross-validation.
    Select(SelectArgs),
    /// Specific entropy rate at every observed past.
    Estimate(EstimateArgs),
    /// ApEn, SampEn and their uniform-kernel counterparts.
    Classic(ClassicArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Markov2,
    LorenzIei,
    RosslerIei,
    Concat,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub system: SystemKind,
    /// Number of values (for `concat`, the total over three equal segments).
    #[arg(long)]
    pub n: usize,
    /// Firing threshold (default 60 for Lorenz, 125 for Rössler).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long = "burn-in", default_value_t = 100.0)]
    pub burn_in: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long = "max-p", default_value_t = 12)]
    pub max_p: usize,
    /// Block half-width for the order-selection score.
    #[arg(long, default_value_t = 50)]
    pub l: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, requires = "bandwidths", conflicts_with = "auto")]
    pub p: Option<usize>,
    /// Comma-separated `k0,k-1,..,k-p` (future first, then most recent lag).
    #[arg(long, value_delimiter = ',', requires = "p")]
    pub bandwidths: Option<Vec<f64>>,
    /// Select the order and bandwidths first.
    #[arg(long, required_unless_present = "p")]
    pub auto: bool,
    #[arg(long = "max-p", default_value_t = 12)]
    pub max_p: usize,
    #[arg(long, default_value_t = 50)]
    pub l: usize,
    /// Width of the moving-average window, in time units.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Apen,
    Sampen,
    PhiNorm,
    LooRate,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassicArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = classic::DEFAULT_EMBEDDING)]
    pub p: usize,
    /// Tolerance (default 0.2 times the sample standard deviation).
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "skip-isolated")]
    pub skip_isolated: bool,
}

/// Reproducibility record written after a successful run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    /// SHA-256 of the input file, hex encoded.
    pub input_sha256: Option<String>,
    pub duration_seconds: f64,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IsolatedVector { .. } => Failure::Compute(format!("{e}; try a larger --r or --skip-isolated")),
            e => Failure::Compute(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let started = Instant::now();
    let result = configure_threads(cli.threads).and_then(|()| dispatch(&cli));
    match result {
        Ok(done) => {
            let manifest_path = cli.manifest.clone().or_else(|| done.output.as_deref().map(default_manifest_path));
            if let Some(path) = manifest_path {
                let manifest = RunManifest {
                    command_line: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
                    config: serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null),
                    seed: cli.seed,
                    version: env!("CARGO_PKG_VERSION").to_string(),
                    input_sha256: done.input_sha256,
                    duration_seconds: started.elapsed().as_secs_f64(),
                };
                if let Err(e) = write_manifest(&path, &manifest) {
                    eprintln!("error: writing manifest {}: {e}", path.display());
                    return EXIT_COMPUTE;
                }
            }
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            EXIT_COMPUTE
        }
    }
}

fn default_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_manifest(path: &Path, m: &RunManifest) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, m)?;
    writeln!(f)?;
    f.flush()
}

fn configure_threads(flag: Option<usize>) -> Outcome<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim().parse().map_err(|_| Failure::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    match n {
        Some(0) => Err(Failure::Usage("thread count must be positive".into())),
        Some(n) => {
            // a pool may already exist when `run` is called twice in one process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        None => Ok(()),
    }
}

struct Done {
    output: Option<PathBuf>,
    input_sha256: Option<String>,
}

fn dispatch(cli: &Cli) -> Outcome<Done> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Select(a) => select(cli, a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Classic(a) => classic_cmd(a),
    }
}

fn read_input(path: &Path) -> Outcome<(Series, String)> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Compute(format!("reading {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    let series = Series::from_csv_reader(bytes.as_slice())?;
    Ok((series, hex))
}

fn open_output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Compute(format!("creating {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn info(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

/// `x` with six significant digits, in the style of C's `%g`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Outcome<Done> {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    let ode = |system: OdeSystem, seed: u64| -> OdeSpec {
        let mut spec = OdeSpec::seeded(system, seed);
        spec.dt = a.dt;
        spec.burn_in = a.burn_in;
        spec
    };
    let iei = |system: OdeSystem, fire: FireParams, seed: u64| {
        synth::iei_series(
            &ode(system, seed),
            &fire,
            &Signal::shifted_square(),
            synth::default_max_duration(fire.max_events),
        )
    };
    let mut theta = a.theta;
    let series = match a.system {
        SystemKind::Markov2 => {
            if a.theta.is_some() {
                return Err(Failure::Usage("--theta applies only to the interval generators".into()));
            }
            synth::gen_markov2(&Markov2Params::default(), a.n, cli.seed, [1.0, 1.0])?
        }
        SystemKind::LorenzIei => {
            let fire =
                FireParams { theta: a.theta.unwrap_or(FireParams::lorenz(a.n).theta), ..FireParams::lorenz(a.n) };
            theta = Some(fire.theta);
            iei(OdeSystem::lorenz(), fire, cli.seed)?
        }
        SystemKind::RosslerIei => {
            let fire =
                FireParams { theta: a.theta.unwrap_or(FireParams::rossler(a.n).theta), ..FireParams::rossler(a.n) };
            theta = Some(fire.theta);
            iei(OdeSystem::rossler(), fire, cli.seed)?
        }
        SystemKind::Concat => {
            if a.theta.is_some() {
                return Err(Failure::Usage("--theta cannot be set for concat; each segment uses its default".into()));
            }
            if !a.n.is_multiple_of(3) {
                return Err(Failure::Usage(format!("--n {} is not divisible into three segments", a.n)));
            }
            let m = a.n / 3;
            synth::concatenate(&[
                iei(OdeSystem::lorenz(), FireParams::lorenz(m), cli.seed)?,
                iei(OdeSystem::rossler(), FireParams::rossler(m), cli.seed.wrapping_add(1))?,
                iei(OdeSystem::lorenz(), FireParams::lorenz(m), cli.seed.wrapping_add(2))?,
            ])?
        }
    };

    let mut w = open_output(a.output.as_deref())?;
    match series.timestamps() {
        Some(ts) => {
            writeln!(w, "time,value")?;
            for (t, v) in ts.iter().zip(series.values()) {
                writeln!(w, "{t},{v}")?;
            }
        }
        None => {
            writeln!(w, "value")?;
            for v in series.values() {
                writeln!(w, "{v}")?;
            }
        }
    }
    writeln!(w, "# seed={}", cli.seed)?;
    writeln!(w, "# system={}", a.system.to_possible_value().expect("named variant").get_name())?;
    if let Some(theta) = theta {
        writeln!(w, "# theta={theta}")?;
    }
    if let Some(b) = series.label().split_once("boundaries=").map(|x| x.1) {
        writeln!(w, "# boundaries={b}")?;
    }
    w.flush()?;
    info(cli, format!("generated {} values", series.len()));
    Ok(Done { output: a.output.clone(), input_sha256: None })
}

fn select(cli: &Cli, a: &SelectArgs) -> Outcome<Done> {
    let (series, digest) = read_input(&a.input)?;
    let config =
        EstimationConfig { max_order: a.max_p, block_half_width: a.l, rng_seed: cli.seed, ..Default::default() };
    info(cli, format!("fitting orders 1..={} on {} values", a.max_p, series.len()));
    let report = select_order(&series, &config)?;
    let mut w = open_output(a.output.as_deref())?;
    report.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    println!("chosen_order={}", report.chosen_order);
    Ok(Done { output: a.output.clone(), input_sha256: Some(digest) })
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Outcome<Done> {
    if !(a.tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    if let Some(w) = a.window {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Failure::Usage("--window must be positive".into()));
        }
    }
    let (series, digest) = read_input(&a.input)?;
    let bandwidths = if a.auto {
        let config = EstimationConfig {
            max_order: a.max_p,
            block_half_width: a.l,
            rng_seed: cli.seed,
            quadrature_abs_tol: a.tol,
            ..Default::default()
        };
        let report = select_order(&series, &config)?;
        info(cli, format!("selected order {}", report.chosen_order));
        report.chosen().bandwidths.clone()
    } else {
        let (p, k) = (a.p.expect("clap requires --p"), a.bandwidths.as_deref().expect("clap requires --bandwidths"));
        if k.len() != p + 1 {
            return Err(Failure::Usage(format!("--p {p} needs {} bandwidths, got {}", p + 1, k.len())));
        }
        Bandwidths::from_table_order(k).map_err(|e| Failure::Usage(e.to_string()))?
    };

    let e = specific_entropy_series(&series, &bandwidths, a.tol)?;
    let windowed = a.window.map(|w| windowed_average(&e, w)).transpose()?;
    let mean = time_averaged_rate(&e)?;

    let mut w = open_output(a.output.as_deref())?;
    let mut header = String::from("t,time,value,h_specific");
    if windowed.is_some() {
        header.push_str(",h_windowed");
    }
    writeln!(w, "{header}")?;
    for (i, (t, h)) in e.indices.iter().zip(&e.values).enumerate() {
        let time = e.times.as_ref().map(|ts| ts[i].to_string()).unwrap_or_default();
        write!(w, "{t},{time},{},{h}", series.values()[t - 1])?;
        if let Some(wv) = &windowed {
            write!(w, ",{}", wv[i].1)?;
        }
        writeln!(w)?;
    }
    let k: Vec<String> = bandwidths.table_order().iter().map(|v| v.to_string()).collect();
    writeln!(w, "# p={}", e.order)?;
    writeln!(w, "# bandwidths={}", k.join(","))?;
    writeln!(w, "# time_averaged={mean}")?;
    w.flush()?;
    drop(w);
    println!("time_averaged={}", sig6(mean));
    Ok(Done { output: a.output.clone(), input_sha256: Some(digest) })
}

fn classic_cmd(a: &ClassicArgs) -> Outcome<Done> {
    let (series, digest) = read_input(&a.input)?;
    let r = match a.r {
        Some(r) => r,
        None => classic::DEFAULT_TOLERANCE_FACTOR * summary_stats(&series)?.std,
    };
    let value = match a.estimator {
        EstimatorKind::Apen => classic::apen(&series, a.p, r)?,
        EstimatorKind::Sampen => classic::sampen(&series, a.p, r)?,
        EstimatorKind::PhiNorm => classic::phi_normalized(&series, a.p, r)?,
        EstimatorKind::LooRate => classic::loo_entropy_rate_uniform(&series, a.p, r, a.skip_isolated)?,
    };
    let name = a.estimator.to_possible_value().expect("named variant");
    println!("{},{},{},{}", name.get_name(), a.p, sig6(r), sig6(value));
    Ok(Done { output: None, input_sha256: Some(digest) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-0.41), "-0.41");
        assert_eq!(sig6(1.7441234567), "1.74412");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(0.00012345678), "0.000123457");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(default_manifest_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.manifest.json"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["spenra", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["spenra", "generate", "--system", "nope", "--n", "3"]), EXIT_USAGE);
        assert_eq!(run(["spenra", "--help"]), EXIT_OK);
    }
}
