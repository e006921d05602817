//! Command-line driver.
//!
//! Every subcommand validates its whole configuration before doing any work
//! and writes CSV or JSON carrying a metadata header: tool version, seed,
//! the fully resolved configuration and a generation timestamp. Exit codes:
//! 0 on success, 2 on validation errors, 3 on runtime errors.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::distsim::{
    export_frame, import_frame, read_csv_matrix, run_simulation, DataSet, FrameFormat, NoiseModel,
    SimResult, StragglerModel,
};
use crate::error::Error;
use crate::frames::{
    build_frame, frame_properties, harmonic_frame, ncp_spec, nuspc_spec,
    quadratic_residue_difference_set, random_gaussian_frame, search_difference_set, uspc_spec,
    Frame, NuspcParams, PROPERTY_TOL,
};
use crate::montecarlo::{
    code_search, estimate_noise_amp, gamma_sweep, pooled_spectrum, trial_retained_set,
    NuspcRanges, SearchFamily, SearchPlan, SweepPlan, TrialPlan, DEFAULT_CANDIDATES,
    DEFAULT_PRESCREEN_TRIALS, DEFAULT_TRIALS,
};
use crate::spectra::{
    analyze_subframe, ks_distance_to_density, subframe, theoretical_noise_amp, DensityKind,
    DensityParams, SpectralLaw,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "FRAMECODE_THREADS";

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameters(_)
            | Error::UnsupportedParameters(_)
            | Error::RejectedAsUspc(_)
            | Error::Underdetermined { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn validation<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

#[derive(Parser, Debug)]
#[command(
    name = "framecode",
    version,
    about = "Frame codes for straggler-tolerant distributed matrix-vector multiplication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a frame, write it to a frame file and report its properties
    Gen(GenArgs),
    /// Pooled sub-frame eigenvalue histogram and KS distances to MP / MANOVA
    Spectrum(SpectrumArgs),
    /// Monte-Carlo noise amplification of one frame
    Noiseamp(NoiseAmpArgs),
    /// Best-of-N search within a code family
    Search(SearchArgs),
    /// Noise amplification versus redundancy for every family
    Sweep(SweepArgs),
    /// End-to-end simulation of two frames side by side
    Compare(CompareArgs),
    /// End-to-end simulation of one frame
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FamilyArg {
    Uspc,
    Nuspc,
    Ncp,
    Gaussian,
    Harmonic,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SearchFamilyArg {
    Uspc,
    Nuspc,
    Ncp,
}

impl From<SearchFamilyArg> for SearchFamily {
    fn from(f: SearchFamilyArg) -> Self {
        match f {
            SearchFamilyArg::Uspc => SearchFamily::Uspc,
            SearchFamilyArg::Nuspc => SearchFamily::Nuspc,
            SearchFamilyArg::Ncp => SearchFamily::Ncp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

/// Where a frame comes from: a frame file or a construction.
#[derive(Args, Debug, Clone, Serialize)]
struct FrameSource {
    /// Frame file (text `m n` + `re im` lines, or `.json`)
    #[arg(long, conflicts_with = "family")]
    frame: Option<PathBuf>,
    /// Construction family
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Number of nodes (frame columns)
    #[arg(long)]
    n: Option<usize>,
    /// Number of data blocks (frame rows)
    #[arg(long)]
    m: Option<usize>,
    /// NCP powers: `qr`, `search`, `random` or a list like `1,2,4`
    #[arg(long)]
    powers: Option<String>,
    /// NUSPC grid refinement factor
    #[arg(long)]
    b: Option<usize>,
    /// NUSPC offsets per period
    #[arg(long)]
    r: Option<usize>,
    /// NUSPC offsets, e.g. `0,3`
    #[arg(long)]
    y: Option<String>,
    /// Harmonic frame DFT rows: `qr` or a list
    #[arg(long)]
    rows: Option<String>,
    /// Seed for random constructions (Gaussian frames, random NCP powers)
    #[arg(long, default_value_t = 0)]
    frame_seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutputArgs {
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; defaults to CSV for `.csv` paths and JSON otherwise
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[command(flatten)]
    source: FrameSource,
    /// Frame file to write
    #[arg(long)]
    out: PathBuf,
    /// Property report path (stdout when omitted, always JSON)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TrialArgs {
    /// Retained (non-straggling) nodes per trial
    #[arg(long)]
    k: Option<usize>,
    /// Retained fraction, used when --k is absent
    #[arg(long)]
    k_over_n: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    source: FrameSource,
    #[command(flatten)]
    trials: TrialArgs,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct NoiseAmpArgs {
    #[command(flatten)]
    source: FrameSource,
    #[command(flatten)]
    trials: TrialArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long, value_enum)]
    family: SearchFamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    trials: TrialArgs,
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidates: usize,
    #[arg(long, default_value_t = DEFAULT_PRESCREEN_TRIALS)]
    prescreen: usize,
    /// NUSPC b range `lo:hi`
    #[arg(long, default_value = "1:4")]
    b_range: String,
    /// NUSPC r range `lo:hi` (restricted to divisors of n)
    #[arg(long)]
    r_range: Option<String>,
    /// Evaluate the quadratic-residue difference set as candidate 0 (NCP)
    #[arg(long)]
    inject_qr: bool,
    /// Write the best frame to this frame file
    #[arg(long)]
    best_frame: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    m: usize,
    /// Inverse aspect ratios `lo:hi[:step]` or a list `2,4,8`
    #[arg(long)]
    inv_gamma: String,
    #[arg(long)]
    k_over_n: f64,
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidates: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_PRESCREEN_TRIALS)]
    prescreen: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1:4")]
    b_range: String,
    #[arg(long)]
    r_range: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    /// Computation noise: `none`, `gaussian:SIGMA` or `bits:P`
    #[arg(long, default_value = "none")]
    noise: String,
    /// Retained nodes per trial (random-k stragglers)
    #[arg(long, conflicts_with_all = ["erased", "delay"])]
    k: Option<usize>,
    /// Fixed erased nodes, e.g. `0,5,7`
    #[arg(long, conflicts_with = "delay")]
    erased: Option<String>,
    /// Exponential response times `RATE:DEADLINE`
    #[arg(long)]
    delay: Option<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV with the data matrix A
    #[arg(long, requires = "data_x")]
    data_a: Option<PathBuf>,
    /// CSV with the vector x
    #[arg(long, requires = "data_a")]
    data_x: Option<PathBuf>,
    /// Rows of random A when no data files are given
    #[arg(long, default_value_t = 1000)]
    h: usize,
    /// Columns of random A when no data files are given
    #[arg(long, default_value_t = 100)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(long)]
    frame_a: PathBuf,
    #[arg(long)]
    frame_b: PathBuf,
    /// Expected frame rows
    #[arg(long)]
    m: Option<usize>,
    /// Expected frame columns
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    source: FrameSource,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_list(flag: &str, text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .or_else(|_| validation(format!("{flag}: cannot parse {text:?} as a list of integers")))
}

fn parse_usize_range(flag: &str, text: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match parsed.as_deref() {
        Some(&[lo, hi]) if lo <= hi => Ok((lo, hi)),
        _ => validation(format!("{flag}: expected `lo:hi` with lo <= hi, got {text:?}")),
    }
}

/// `lo:hi[:step]` (inclusive) or a comma-separated list.
fn parse_float_range(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    let bad = || validation(format!("{flag}: expected `lo:hi[:step]` or a list, got {text:?}"));
    if text.contains(':') {
        let parts: Option<Vec<f64>> = text.split(':').map(|p| p.trim().parse().ok()).collect();
        let (lo, hi, step) = match parts.as_deref() {
            Some(&[lo, hi]) => (lo, hi, 1.0),
            Some(&[lo, hi, step]) => (lo, hi, step),
            _ => return bad(),
        };
        if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return bad();
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    } else {
        let parsed: Option<Vec<f64>> = text.split(',').map(|p| p.trim().parse().ok()).collect();
        match parsed {
            Some(v) if !v.is_empty() => Ok(v),
            _ => bad(),
        }
    }
}

fn parse_noise(text: &str) -> CliResult<NoiseModel> {
    let noise = match text.split_once(':') {
        None if text == "none" => NoiseModel::None,
        Some(("gaussian", s)) => NoiseModel::AdditiveGaussian {
            sigma: s
                .parse()
                .or_else(|_| validation(format!("--noise: bad sigma {s:?}")))?,
        },
        Some(("bits", p)) => NoiseModel::RoundToBits {
            bits: p
                .parse()
                .or_else(|_| validation(format!("--noise: bad bit count {p:?}")))?,
        },
        _ => return validation(format!("--noise: expected none, gaussian:SIGMA or bits:P, got {text:?}")),
    };
    noise
        .validate()
        .map_err(|e| CliError::Validation(format!("--noise: {e}")))?;
    Ok(noise)
}

fn parse_straggler(sim: &SimArgs, m: usize, n: usize) -> CliResult<StragglerModel> {
    let model = if let Some(k) = sim.k {
        StragglerModel::RandomK { k }
    } else if let Some(erased) = &sim.erased {
        StragglerModel::FixedSet {
            erased: parse_list("--erased", erased)?,
        }
    } else if let Some(delay) = &sim.delay {
        let parsed: Option<Vec<f64>> = delay.split(':').map(|p| p.trim().parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[rate, deadline]) => StragglerModel::Delay { rate, deadline },
            _ => return validation(format!("--delay: expected RATE:DEADLINE, got {delay:?}")),
        }
    } else {
        return validation("one of --k, --erased or --delay is required");
    };
    let flag = match model {
        StragglerModel::RandomK { .. } => "--k",
        StragglerModel::FixedSet { .. } => "--erased",
        StragglerModel::Delay { .. } => "--delay",
    };
    model
        .validate(m, n)
        .map_err(|e| CliError::Validation(format!("{flag}: {e}")))?;
    Ok(model)
}

fn require<T: Copy>(value: Option<T>, flag: &str, family: &str) -> CliResult<T> {
    value.map_or_else(
        || validation(format!("{flag} is required for --family {family}")),
        Ok,
    )
}

fn with_flag(flag: &str) -> impl Fn(Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Validation(msg) => CliError::Validation(format!("{flag}: {msg}")),
        other => other,
    }
}

impl FrameSource {
    fn resolve(&self) -> CliResult<Frame> {
        if let Some(path) = &self.frame {
            let frame = import_frame(path, FrameFormat::from_path(path))?;
            if let Some(m) = self.m.filter(|&m| m != frame.m()) {
                return validation(format!("--m {m} does not match the frame file ({} rows)", frame.m()));
            }
            if let Some(n) = self.n.filter(|&n| n != frame.n()) {
                return validation(format!("--n {n} does not match the frame file ({} columns)", frame.n()));
            }
            return Ok(frame);
        }
        let Some(family) = self.family else {
            return validation("either --frame or --family is required");
        };
        let name = format!("{family:?}").to_lowercase();
        let n = require(self.n, "--n", &name)?;
        let frame = match family {
            FamilyArg::Uspc => {
                build_frame(&uspc_spec(n, require(self.m, "--m", &name)?).map_err(with_flag("--m"))?)?
            }
            FamilyArg::Nuspc => {
                let m = require(self.m, "--m", &name)?;
                let b = require(self.b, "--b", &name)?;
                let r = require(self.r, "--r", &name)?;
                let y = match &self.y {
                    Some(text) => parse_list("--y", text)?,
                    None => return validation("--y is required for --family nuspc"),
                };
                build_frame(&nuspc_spec(&NuspcParams { n, m, b, r, y }).map_err(with_flag("--y"))?)?
            }
            FamilyArg::Ncp => {
                let spec = self.powers.as_deref().unwrap_or("random");
                let powers = match spec {
                    "qr" => quadratic_residue_difference_set(n).map_err(with_flag("--powers"))?,
                    "search" => {
                        let m = require(self.m, "--m", &name)?;
                        search_difference_set(n, m)
                            .map_err(with_flag("--powers"))?
                            .ok_or_else(|| {
                                CliError::Validation(format!("--powers: no ({n}, {m}) difference set exists"))
                            })?
                    }
                    "random" => {
                        let m = require(self.m, "--m", &name)?;
                        let mut plan = SearchPlan::new(SearchFamily::Ncp, 1, TrialPlan::new(1, self.frame_seed, m));
                        plan.prescreen_trials = 0;
                        let out = code_search(&plan, n, m).map_err(with_flag("--powers"))?;
                        return Ok(out.best_frame);
                    }
                    list => parse_list("--powers", list)?,
                };
                if let Some(m) = self.m.filter(|&m| m != powers.len()) {
                    return validation(format!("--m {m} does not match {} powers", powers.len()));
                }
                build_frame(&ncp_spec(n, powers.len(), &powers).map_err(with_flag("--powers"))?)?
            }
            FamilyArg::Gaussian => {
                random_gaussian_frame(require(self.m, "--m", &name)?, n, self.frame_seed)
                    .map_err(with_flag("--m"))?
            }
            FamilyArg::Harmonic => {
                let rows = match self.rows.as_deref() {
                    Some("qr") => quadratic_residue_difference_set(n).map_err(with_flag("--rows"))?,
                    Some(list) => parse_list("--rows", list)?,
                    None => match self.m {
                        Some(m) => (0..m).collect(),
                        None => return validation("--rows or --m is required for --family harmonic"),
                    },
                };
                harmonic_frame(n, &rows).map_err(with_flag("--rows"))?
            }
        };
        Ok(frame)
    }
}

impl TrialArgs {
    fn plan(&self, m: usize, n: usize) -> CliResult<TrialPlan> {
        let k = match (self.k, self.k_over_n) {
            (Some(k), _) => k,
            (None, Some(f)) if f > 0.0 && f <= 1.0 => (f * n as f64).round() as usize,
            (None, Some(f)) => return validation(format!("--k-over-n must lie in (0, 1], got {f}")),
            (None, None) => return validation("one of --k or --k-over-n is required"),
        };
        let plan = TrialPlan::new(self.trials, self.seed, k);
        plan.validate(m, n).map_err(with_flag("--k"))?;
        if self.trials == 0 {
            return validation("--trials must be at least 1");
        }
        Ok(plan)
    }
}

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    generated_at: u64,
    config: &'a C,
}

fn metadata<'a, C: Serialize>(command: &'static str, seed: u64, config: &'a C) -> Metadata<'a, C> {
    Metadata {
        tool: "framecode",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        generated_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        config,
    }
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn resolve_format(output: &OutputArgs) -> OutputFormat {
    output.format.unwrap_or_else(|| match &output.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => OutputFormat::Csv,
        _ => OutputFormat::Json,
    })
}

fn emit_json<C: Serialize, R: Serialize>(
    path: Option<&Path>,
    meta: &Metadata<'_, C>,
    result: &R,
) -> CliResult<()> {
    let doc = json!({ "metadata": meta, "result": result });
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// CSV preceded by `# key: value` metadata lines.
fn emit_csv<C: Serialize>(
    path: Option<&Path>,
    meta: &Metadata<'_, C>,
    extra: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> CliResult<()> {
    let mut out = open_out(path)?;
    writeln!(out, "# tool: {} {}", meta.tool, meta.version)?;
    writeln!(out, "# command: {}", meta.command)?;
    writeln!(out, "# seed: {}", meta.seed)?;
    writeln!(out, "# generated_at: {}", meta.generated_at)?;
    let config = serde_json::to_string(meta.config).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "# config: {config}")?;
    for (k, v) in extra {
        writeln!(out, "# {k}: {v}")?;
    }
    {
        let mut writer = csv::Writer::from_writer(&mut out);
        let to_err = |e: csv::Error| CliError::Runtime(e.to_string());
        writer.write_record(header).map_err(to_err)?;
        for row in rows {
            writer.write_record(row).map_err(to_err)?;
        }
        writer.flush()?;
    }
    out.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let frame = args.source.resolve()?;
    export_frame(&frame, &args.out, FrameFormat::from_path(&args.out))?;
    let report = frame_properties(&frame, PROPERTY_TOL)?;
    let result = json!({
        "path": args.out,
        "kind": frame.kind(),
        "m": frame.m(),
        "n": frame.n(),
        "gamma": frame.gamma(),
        "properties": report,
    });
    emit_json(args.report.as_deref(), &metadata("gen", args.source.frame_seed, args), &result)
}

fn cmd_spectrum(args: &SpectrumArgs) -> CliResult<()> {
    let frame = args.source.resolve()?;
    let plan = args.trials.plan(frame.m(), frame.n())?;
    if args.bins == 0 {
        return validation("--bins must be at least 1");
    }
    let params = DensityParams::from_dims(frame.m(), frame.n(), plan.k)?;
    let eigen = pooled_spectrum(&frame, &plan)?;
    let ks_mp = ks_distance_to_density(&eigen, DensityKind::MarchenkoPastur, params)?;
    let ks_manova = ks_distance_to_density(&eigen, DensityKind::Manova, params)?;
    // Same law with the aspect ratio taken as k/n instead of m/n; defined
    // only while m/k >= k/n.
    let ks_manova_k_over_n = match DensityParams::new(plan.k as f64 / frame.n() as f64, params.beta) {
        Ok(alt) => Some(ks_distance_to_density(&eigen, DensityKind::Manova, alt)?),
        Err(_) => None,
    };

    let mean = eigen.iter().sum::<f64>() / eigen.len() as f64;
    let normalized: Vec<f64> = eigen.iter().map(|x| x / mean).collect();
    let top = normalized.iter().copied().fold(0.0, f64::max) * (1.0 + 1e-12);
    let width = top / args.bins as f64;
    let mut counts = vec![0usize; args.bins];
    for x in &normalized {
        counts[((x / width) as usize).min(args.bins - 1)] += 1;
    }
    let mp = SpectralLaw::new(DensityKind::MarchenkoPastur, params)?;
    let manova = SpectralLaw::new(DensityKind::Manova, params)?;
    let (mp_mean, manova_mean) = (mp.mean(), manova.mean());
    let rows: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lo = i as f64 * width;
            let mid = lo + 0.5 * width;
            vec![
                fmt(lo),
                fmt(lo + width),
                c.to_string(),
                fmt(c as f64 / (normalized.len() as f64 * width)),
                fmt(mp_mean * mp.density(mid * mp_mean)),
                fmt(manova_mean * manova.density(mid * manova_mean)),
            ]
        })
        .collect();
    let header = ["bin_lo", "bin_hi", "count", "empirical_density", "mp_density", "manova_density"];
    let meta = metadata("spectrum", plan.seed, args);
    match resolve_format(&args.output) {
        OutputFormat::Csv => emit_csv(
            args.output.out.as_deref(),
            &meta,
            &[
                ("ks_mp", fmt(ks_mp)),
                ("ks_manova", fmt(ks_manova)),
                ("ks_manova_k_over_n", ks_manova_k_over_n.map_or("none".into(), fmt)),
            ],
            &header,
            &rows,
        ),
        OutputFormat::Json => {
            let histogram: Vec<_> = rows
                .iter()
                .map(|r| header.iter().zip(r).map(|(h, v)| (h.to_string(), json!(v.parse::<f64>().ok()))).collect::<serde_json::Map<_, _>>())
                .collect();
            emit_json(
                args.output.out.as_deref(),
                &meta,
                &json!({
                    "m": frame.m(), "n": frame.n(), "k": plan.k,
                    "gamma": params.gamma, "beta": params.beta,
                    "eigenvalue_count": eigen.len(),
                    "ks_mp": ks_mp, "ks_manova": ks_manova,
                    "ks_manova_k_over_n": ks_manova_k_over_n,
                    "histogram": histogram,
                }),
            )
        }
    }
}

fn cmd_noiseamp(args: &NoiseAmpArgs) -> CliResult<()> {
    let frame = args.source.resolve()?;
    let plan = args.trials.plan(frame.m(), frame.n())?;
    let estimate = estimate_noise_amp(&frame, &plan)?;
    let params = DensityParams::from_dims(frame.m(), frame.n(), plan.k)?;
    let mp = theoretical_noise_amp(DensityKind::MarchenkoPastur, params)?;
    let manova = theoretical_noise_amp(DensityKind::Manova, params)?;
    // Same estimate normalized per received response (divide by k, not m).
    let per_response = estimate.mean * params.beta;
    let first = analyze_subframe(&subframe(&frame, &trial_retained_set(frame.n(), &plan, 0)?)?)?;

    let meta = metadata("noiseamp", plan.seed, args);
    let fields = [
        ("m", frame.m().to_string()),
        ("n", frame.n().to_string()),
        ("k", plan.k.to_string()),
        ("trials", plan.trials.to_string()),
        ("mean_amp", fmt(estimate.mean)),
        ("stddev", fmt(estimate.stddev)),
        ("std_error", fmt(estimate.std_error())),
        ("max_amp", fmt(estimate.max)),
        ("fraction_ill_conditioned", fmt(estimate.fraction_ill_conditioned)),
        ("mean_amp_per_response", fmt(per_response)),
        ("mp_benchmark", fmt(mp)),
        ("manova_benchmark", fmt(manova)),
    ];
    match resolve_format(&args.output) {
        OutputFormat::Csv => emit_csv(
            args.output.out.as_deref(),
            &meta,
            &[],
            &fields.iter().map(|f| f.0).collect::<Vec<_>>(),
            &[fields.iter().map(|f| f.1.clone()).collect()],
        ),
        OutputFormat::Json => emit_json(
            args.output.out.as_deref(),
            &meta,
            &json!({
                "m": frame.m(), "n": frame.n(), "k": plan.k,
                "estimate": estimate,
                "std_error": estimate.std_error(),
                "mean_amp_per_response": per_response,
                "mp_benchmark": mp,
                "manova_benchmark": manova,
                "first_trial": first,
            }),
        ),
    }
}

fn nuspc_ranges(b_range: &str, r_range: Option<&str>) -> CliResult<NuspcRanges> {
    let b_range = parse_usize_range("--b-range", b_range)?;
    if b_range.0 == 0 {
        return validation("--b-range: b must be at least 1");
    }
    let r_range = match r_range {
        Some(text) => parse_usize_range("--r-range", text)?,
        None => (1, usize::MAX),
    };
    Ok(NuspcRanges { b_range, r_range })
}

fn cmd_search(args: &SearchArgs) -> CliResult<()> {
    let trial_plan = args.trials.plan(args.m, args.n)?;
    let mut plan = SearchPlan::new(args.family.into(), args.candidates, trial_plan);
    plan.nuspc = nuspc_ranges(&args.b_range, args.r_range.as_deref())?;
    plan.prescreen_trials = args.prescreen;
    if args.inject_qr {
        if !matches!(args.family, SearchFamilyArg::Ncp) {
            return validation("--inject-qr only applies to --family ncp");
        }
        let qr = quadratic_residue_difference_set(args.n).map_err(with_flag("--inject-qr"))?;
        if qr.len() != args.m {
            return validation(format!("--inject-qr: the residue set has {} elements but --m is {}", qr.len(), args.m));
        }
        plan.injected.push(ncp_spec(args.n, args.m, &qr)?);
    }
    let outcome = code_search(&plan, args.n, args.m)?;
    if let Some(path) = &args.best_frame {
        export_frame(&outcome.best_frame, path, FrameFormat::from_path(path))?;
    }
    let meta = metadata("search", trial_plan.seed, args);
    match resolve_format(&args.output) {
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = outcome
                .log
                .iter()
                .map(|c| {
                    vec![
                        c.index.to_string(),
                        c.description.clone(),
                        fmt(c.estimate.mean),
                        fmt(c.estimate.stddev),
                        fmt(c.estimate.max),
                        (c.index == outcome.best_index).to_string(),
                    ]
                })
                .collect();
            emit_csv(
                args.output.out.as_deref(),
                &meta,
                &[
                    ("best_index", outcome.best_index.to_string()),
                    ("best_mean_amp", fmt(outcome.best_mean_amp)),
                    ("rejected", outcome.rejected.to_string()),
                ],
                &["index", "code", "mean_amp", "stddev", "max_amp", "best"],
                &rows,
            )
        }
        OutputFormat::Json => emit_json(
            args.output.out.as_deref(),
            &meta,
            &json!({
                "best_index": outcome.best_index,
                "best_mean_amp": outcome.best_mean_amp,
                "rejected": outcome.rejected,
                "candidates": outcome.log,
            }),
        ),
    }
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let inverse_gammas = parse_float_range("--inv-gamma", &args.inv_gamma)?;
    if let Some(g) = inverse_gammas.iter().find(|&&g| g < 1.0) {
        return validation(format!("--inv-gamma: values must be >= 1, got {g}"));
    }
    if !(args.k_over_n > 0.0 && args.k_over_n <= 1.0) {
        return validation(format!("--k-over-n must lie in (0, 1], got {}", args.k_over_n));
    }
    if args.m == 0 || args.candidates == 0 || args.trials == 0 {
        return validation("--m, --candidates and --trials must be at least 1");
    }
    let plan = SweepPlan {
        candidates: args.candidates,
        trials: args.trials,
        seed: args.seed,
        nuspc: nuspc_ranges(&args.b_range, args.r_range.as_deref())?,
        prescreen_trials: args.prescreen,
    };
    let rows = gamma_sweep(args.m, &inverse_gammas, args.k_over_n, &plan)?;
    let meta = metadata("sweep", args.seed, args);
    match resolve_format(&args.output) {
        OutputFormat::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.gamma_inv),
                        r.family.to_string(),
                        fmt(r.mean_amp),
                        fmt(r.mp_benchmark),
                        fmt(r.manova_benchmark),
                        r.n.to_string(),
                        r.k.to_string(),
                        fmt(r.max_amp),
                        fmt(r.fraction_ill_conditioned),
                        r.note.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            emit_csv(
                args.output.out.as_deref(),
                &meta,
                &[],
                &[
                    "gamma_inv",
                    "family",
                    "mean_amp",
                    "mp_benchmark",
                    "manova_benchmark",
                    "n",
                    "k",
                    "max_amp",
                    "fraction_ill_conditioned",
                    "note",
                ],
                &table,
            )
        }
        OutputFormat::Json => emit_json(args.output.out.as_deref(), &meta, &rows),
    }
}

fn load_data(sim: &SimArgs) -> CliResult<DataSet> {
    match (&sim.data_a, &sim.data_x) {
        (Some(a), Some(x)) => {
            let a = read_csv_matrix(a)?;
            let x = read_csv_matrix(x)?;
            let x = DVector::from_iterator(x.len(), x.iter().copied());
            Ok(DataSet::new(a, x).map_err(with_flag("--data-x"))?)
        }
        _ => {
            if sim.h == 0 || sim.l == 0 {
                return validation("--h and --l must be at least 1");
            }
            Ok(DataSet::random(sim.h, sim.l, sim.data_seed)?)
        }
    }
}

fn sim_row(name: &str, r: &SimResult) -> Vec<String> {
    vec![
        name.to_string(),
        fmt(r.mse),
        fmt(r.rel_frobenius),
        fmt(r.kappa_mean),
        fmt(r.kappa_min),
        fmt(r.kappa_max),
        r.decoded.to_string(),
        r.failed_decodes.to_string(),
    ]
}

const SIM_HEADER: [&str; 8] = [
    "frame",
    "mse",
    "rel_frobenius",
    "kappa_mean",
    "kappa_min",
    "kappa_max",
    "decoded",
    "failed_decodes",
];

fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    let noise = parse_noise(&args.sim.noise)?;
    if args.sim.trials == 0 {
        return validation("--trials must be at least 1");
    }
    let fa = import_frame(&args.frame_a, FrameFormat::from_path(&args.frame_a))?;
    let fb = import_frame(&args.frame_b, FrameFormat::from_path(&args.frame_b))?;
    for (flag, f) in [("--frame-a", &fa), ("--frame-b", &fb)] {
        if args.m.is_some_and(|m| m != f.m()) || args.n.is_some_and(|n| n != f.n()) {
            return validation(format!("{flag}: frame is {}x{}, expected --m/--n", f.m(), f.n()));
        }
    }
    if (fa.m(), fa.n()) != (fb.m(), fb.n()) {
        return validation(format!(
            "--frame-b: shape {}x{} differs from --frame-a {}x{}",
            fb.m(),
            fb.n(),
            fa.m(),
            fa.n()
        ));
    }
    let straggler = parse_straggler(&args.sim, fa.m(), fa.n())?;
    let data = load_data(&args.sim)?;
    let ra = run_simulation(&data, &fa, &noise, &straggler, args.sim.trials, args.sim.seed)?;
    let rb = run_simulation(&data, &fb, &noise, &straggler, args.sim.trials, args.sim.seed)?;
    let meta = metadata("compare", args.sim.seed, args);
    match resolve_format(&args.output) {
        OutputFormat::Csv => emit_csv(
            args.output.out.as_deref(),
            &meta,
            &[],
            &SIM_HEADER,
            &[sim_row("a", &ra), sim_row("b", &rb)],
        ),
        OutputFormat::Json => emit_json(
            args.output.out.as_deref(),
            &meta,
            &json!({ "frame_a": ra, "frame_b": rb }),
        ),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let noise = parse_noise(&args.sim.noise)?;
    if args.sim.trials == 0 {
        return validation("--trials must be at least 1");
    }
    let frame = args.source.resolve()?;
    let straggler = parse_straggler(&args.sim, frame.m(), frame.n())?;
    let data = load_data(&args.sim)?;
    let result = run_simulation(&data, &frame, &noise, &straggler, args.sim.trials, args.sim.seed)?;
    let meta = metadata("simulate", args.sim.seed, args);
    match resolve_format(&args.output) {
        OutputFormat::Csv => emit_csv(
            args.output.out.as_deref(),
            &meta,
            &[],
            &SIM_HEADER,
            &[sim_row("frame", &result)],
        ),
        OutputFormat::Json => emit_json(args.output.out.as_deref(), &meta, &result),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .or_else(|_| validation(format!("{THREADS_ENV}: expected a thread count, got {value:?}")))?;
    if threads > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> CliResult<()> {
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Noiseamp(a) => cmd_noiseamp(a),
        Command::Search(a) => cmd_search(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Simulate(a) => cmd_simulate(a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            EXIT_VALIDATION
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_ranges() {
        assert_eq!(parse_float_range("--x", "2:8").unwrap(), vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(parse_float_range("--x", "2:8:2").unwrap(), vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(parse_float_range("--x", "2,4,8").unwrap(), vec![2.0, 4.0, 8.0]);
        assert!(parse_float_range("--x", "8:2").is_err());
        assert!(parse_float_range("--x", "1:2:0").is_err());
        assert!(parse_float_range("--x", "a:b").is_err());
    }

    #[test]
    fn noise_specs() {
        assert_eq!(parse_noise("none").unwrap(), NoiseModel::None);
        assert_eq!(
            parse_noise("gaussian:0.5").unwrap(),
            NoiseModel::AdditiveGaussian { sigma: 0.5 }
        );
        assert_eq!(parse_noise("bits:20").unwrap(), NoiseModel::RoundToBits { bits: 20 });
        assert!(parse_noise("bits:60").is_err());
        assert!(parse_noise("gaussian:-1").is_err());
        assert!(parse_noise("loud").is_err());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("--y", "0, 3,5").unwrap(), vec![0, 3, 5]);
        assert!(parse_list("--y", "0,x").is_err());
        assert_eq!(parse_usize_range("--b", "1:4").unwrap(), (1, 4));
        assert!(parse_usize_range("--b", "4:1").is_err());
    }
}
