use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hecpd::compare::SignParams;
use hecpd::datagen::{gen_series, GenSpec, Noise, Scenario};
use hecpd::dp::{dp_cpd, DpParams};
use hecpd::oracle::cpd_plain;
use hecpd::pipeline::{cpd, normalize, ChangePointResult, CpdConfig, TimeSeries};
use hecpd::summarize::BlockLayout;
use hecpd::ChangeType;
use hecpd_cli::experiments::{dp_curve, exact_errors, setting_for};
use hecpd_cli::input::{read_series, write_series};
use hecpd_cli::plot::{line_chart, Series};
use hecpd_cli::report::{ErrorReport, InputInfo, Report};
use hecpd_cli::{exit, CliError};
use serde::Serialize;

const PRIVACY_CAVEAT: &str = "warning: no --bounds given, so the normalization bounds were taken from the data; \
they reveal the series minimum and maximum to anyone who sees them";

#[derive(Parser)]
#[command(name = "hecpd", version, about = "Change-point detection on an emulated homomorphic SIMD backend")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic series with one planted change as CSV.
    Generate(GenerateArgs),
    /// Run the encrypted detector.
    Detect(DetectArgs),
    /// Run the plaintext reference detector.
    DetectPlain(PlainArgs),
    /// Run the local differential privacy baseline.
    DetectDp(DpArgs),
    /// Operation counts and timings over a grid of series lengths.
    Bench(BenchArgs),
    /// Relative errors of the encrypted, plaintext and private detectors.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum Kind {
    MeanShift,
    VarianceShift,
    Ar1Shift,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Uniform,
    Laplace,
    StudentT,
}

impl From<NoiseArg> for Noise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => Noise::Gaussian,
            NoiseArg::Uniform => Noise::Uniform,
            NoiseArg::Laplace => Noise::Laplace,
            NoiseArg::StudentT => Noise::StudentT,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TypeArg {
    Mean,
    Variance,
    Frequency,
}

impl From<TypeArg> for ChangeType {
    fn from(t: TypeArg) -> Self {
        match t {
            TypeArg::Mean => ChangeType::Mean,
            TypeArg::Variance => ChangeType::Variance,
            TypeArg::Frequency => ChangeType::Frequency,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Parameter before the change: mean, standard deviation or AR coefficient.
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    /// Parameter after the change.
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    /// Noise standard deviation (mean shift) or innovation standard deviation (AR).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Constant mean of a variance shift.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    level: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    #[arg(short, long, default_value_t = 40_000)]
    n: usize,
    /// Index of the first changed point; defaults to n/2.
    #[arg(long)]
    change_at: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with one value per row and an optional header.
    input: PathBuf,
    /// Zero-based column holding the series.
    #[arg(long, default_value_t = 0)]
    column: usize,
    #[arg(long = "type", value_enum)]
    change_type: TypeArg,
    /// Points per block; defaults to the square root of the length.
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    out: Format,
    /// Destination file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Known value range as `lo,hi`.
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<(f64, f64)>,
    #[arg(long, default_value_t = SignParams::default().df)]
    df: u32,
    #[arg(long, default_value_t = SignParams::default().dg)]
    dg: u32,
    #[arg(long, default_value_t = hecpd::backend::DEFAULT_DEPTH_BUDGET)]
    depth_budget: usize,
    /// Standard deviation of the emulated encryption noise.
    #[arg(long, default_value_t = 0.0)]
    noise_stddev: f64,
}

#[derive(Args)]
struct PlainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<(f64, f64)>,
}

#[derive(Args)]
struct DpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to 1/n^2.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated series lengths.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    n: Vec<usize>,
    #[arg(long = "type", value_enum, default_value = "frequency")]
    change_type: TypeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also draw operation counts against length.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "type", value_enum, default_value = "mean")]
    change_type: TypeArg,
    #[arg(short, long, default_value_t = 10_000)]
    n: usize,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10,25,50")]
    epsilons: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also draw relative error against epsilon.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("upper bound: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err("bounds must be finite with lo < hi".into());
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Detect(args) => detect(args),
        Command::DetectPlain(args) => detect_plain(args),
        Command::DetectDp(args) => detect_dp(args),
        Command::Bench(args) => bench(args),
        Command::Compare(args) => compare(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let json = serde_json::to_string(&ErrorReport::from(&e)).unwrap_or_else(|_| e.to_string());
            eprintln!("{json}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|source| CliError::Io { path: p.to_owned(), source })?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(args: GenerateArgs) -> Result<i32, CliError> {
    let scenario = match args.kind {
        Kind::MeanShift => {
            Scenario::MeanShift { before: args.from.unwrap_or(0.0), after: args.to.unwrap_or(1.0), std: args.scale }
        }
        Kind::VarianceShift => Scenario::VarianceShift {
            mean: args.level,
            std_before: args.from.unwrap_or(1.0),
            std_after: args.to.unwrap_or(std::f64::consts::SQRT_2),
        },
        Kind::Ar1Shift => Scenario::Ar1Shift {
            phi_before: args.from.unwrap_or(0.3),
            phi_after: args.to.unwrap_or(0.7),
            innovation_std: args.scale,
        },
    };
    let mut spec = GenSpec::new(args.n, scenario, args.noise.into());
    if let Some(at) = args.change_at {
        spec.change_at = at;
    }
    let ts = gen_series(&spec, args.seed)?;
    let mut out = sink(args.output.as_deref())?;
    write_series(&mut out, ts.values())?;
    Ok(exit::SUCCESS)
}

struct Loaded {
    ts: TimeSeries,
    info: InputInfo,
    warnings: Vec<String>,
}

fn load(input: &InputArgs, bounds: Option<(f64, f64)>) -> Result<Loaded, CliError> {
    let values = read_series(&input.input, input.column)?;
    let name = input.input.display().to_string();
    let ts = match bounds {
        Some(b) => TimeSeries::new(values, b, name.clone())?,
        None => TimeSeries::with_data_bounds(values, name.clone())?,
    };
    let mut warnings = Vec::new();
    if ts.bounds_from_data() {
        eprintln!("{PRIVACY_CAVEAT}");
        warnings.push(PRIVACY_CAVEAT.to_owned());
    }
    let clamped = normalize(&ts).clamped;
    if clamped > 0 {
        warnings.push(format!("{clamped} values fell outside the bounds and were clamped"));
    }
    let info =
        InputInfo { path: Some(name), n: ts.len(), bounds: ts.bounds(), bounds_from_data: ts.bounds_from_data() };
    Ok(Loaded { ts, info, warnings })
}

fn emit(mut report: Report, input: &InputArgs, warnings: Vec<String>) -> Result<i32, CliError> {
    report.warnings = warnings;
    let out = sink(input.output.as_deref())?;
    match input.out {
        Format::Json => report.write_json(out)?,
        Format::Csv => report.write_csv(out)?,
    }
    Ok(if report.result.confidence_ok { exit::SUCCESS } else { exit::CONFIDENCE })
}

fn detect(args: DetectArgs) -> Result<i32, CliError> {
    let loaded = load(&args.input, args.bounds)?;
    let cfg = CpdConfig {
        change_type: args.input.change_type.into(),
        block_size: Some(block_size(&args.input, loaded.ts.len())),
        sign_params: SignParams::new(args.df, args.dg)?,
        depth_budget: args.depth_budget,
        noise_stddev: args.noise_stddev,
        seed: args.input.seed,
    };
    let result = cpd(&loaded.ts, &cfg)?;
    let report = Report::new("detect", cfg.seed, cfg, loaded.info, &result)?;
    emit(report, &args.input, loaded.warnings)
}

#[derive(Serialize)]
struct PlainConfig {
    change_type: ChangeType,
    block_size: usize,
}

fn detect_plain(args: PlainArgs) -> Result<i32, CliError> {
    let loaded = load(&args.input, args.bounds)?;
    let change_type: ChangeType = args.input.change_type.into();
    let block_size = block_size(&args.input, loaded.ts.len());
    let plain = cpd_plain(normalize(&loaded.ts).series.values(), block_size, change_type)?;
    let result = ChangePointResult {
        tau_block: plain.tau_block,
        tau_index: plain.tau_index(),
        confidence_ok: plain.tau_block.is_some(),
        change_type,
        layout: plain.layout,
        diagnostics: None,
    };
    let config = PlainConfig { change_type, block_size };
    let report = Report::new("detect-plain", args.input.seed, config, loaded.info, &result)?;
    emit(report, &args.input, loaded.warnings)
}

#[derive(Serialize)]
struct PrivateConfig {
    change_type: ChangeType,
    block_size: usize,
    epsilon: f64,
    delta: f64,
    clip: f64,
    sigma: f64,
}

fn detect_dp(args: DpArgs) -> Result<i32, CliError> {
    let values = read_series(&args.input.input, args.input.column)?;
    let n = values.len();
    let change_type: ChangeType = args.input.change_type.into();
    let block_size = block_size(&args.input, n);
    let delta = args.delta.unwrap_or(1.0 / (n as f64 * n as f64));
    let params = DpParams::new(args.epsilon, delta, args.clip)?;
    let result = dp_cpd(&values, block_size, change_type, &params, args.input.seed)?;
    let info = InputInfo {
        path: Some(args.input.input.display().to_string()),
        n,
        bounds: (-params.clip, params.clip),
        bounds_from_data: false,
    };
    let config = PrivateConfig {
        change_type,
        block_size,
        epsilon: params.epsilon,
        delta,
        clip: params.clip,
        sigma: params.sigma(),
    };
    let report = Report::new("detect-dp", args.input.seed, config, info, &result)?;
    emit(report, &args.input, Vec::new())
}

fn block_size(input: &InputArgs, n: usize) -> usize {
    CpdConfig { block_size: input.block_size, ..CpdConfig::new(input.change_type.into()) }.block_size_for(n)
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    change_type: &'static str,
    block_size: usize,
    n_blocks: usize,
    dim: usize,
    cipher_mults: u64,
    plain_mults: u64,
    rotations: u64,
    additions: u64,
    comparisons: u64,
    max_depth: usize,
    seconds: f64,
    tau_index: Option<usize>,
    change_at: usize,
}

fn bench(args: BenchArgs) -> Result<i32, CliError> {
    let change_type: ChangeType = args.change_type.into();
    let setting = setting_for(change_type);
    let mut rows = Vec::new();
    for &n in &args.n {
        let spec = setting.spec(n);
        let ts = gen_series(&spec, args.seed)?;
        let cfg = CpdConfig { seed: args.seed, ..CpdConfig::new(change_type) };
        let start = Instant::now();
        let result = cpd(&ts, &cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        let diag = result.diagnostics.as_ref().expect("encrypted runs carry diagnostics");
        let layout: &BlockLayout = &result.layout;
        rows.push(BenchRow {
            n,
            change_type: change_type.name(),
            block_size: layout.block_size,
            n_blocks: layout.n_blocks,
            dim: layout.dim,
            cipher_mults: diag.counts.cipher_mults,
            plain_mults: diag.counts.plain_mults,
            rotations: diag.counts.rotations,
            additions: diag.counts.additions,
            comparisons: diag.counts.comparisons,
            max_depth: diag.max_depth,
            seconds,
            tau_index: result.tau_index,
            change_at: spec.change_at,
        });
    }
    write_rows(args.output.as_deref(), &rows)?;
    if let Some(path) = &args.svg {
        let pick = |f: fn(&BenchRow) -> u64| rows.iter().map(|r| (r.n as f64, f(r) as f64)).collect();
        let series = [
            Series { name: "ciphertext mults", points: pick(|r| r.cipher_mults) },
            Series { name: "plaintext mults", points: pick(|r| r.plain_mults) },
            Series { name: "rotations", points: pick(|r| r.rotations) },
        ];
        let title = format!("{} detection cost", change_type.name());
        write_text(path, &line_chart(&title, "series length", "operations", &series, true))?;
    }
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct CompareRow {
    epsilon: f64,
    sigma: f64,
    dp_error: f64,
    encrypted_error: f64,
    plain_error: f64,
    encrypted_plain_agreement: f64,
    runs: usize,
}

fn compare(args: CompareArgs) -> Result<i32, CliError> {
    let setting = setting_for(args.change_type.into());
    let seeds = args.seed..args.seed + args.seeds;
    let exact = exact_errors(&setting, args.n, seeds.clone())?;
    let mut epsilons = args.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    let curve = dp_curve(&setting, args.n, &epsilons, seeds)?;
    let rows: Vec<CompareRow> = curve
        .iter()
        .map(|p| CompareRow {
            epsilon: p.epsilon,
            sigma: p.sigma,
            dp_error: p.mean_error,
            encrypted_error: exact.encrypted,
            plain_error: exact.plain,
            encrypted_plain_agreement: exact.agreement,
            runs: p.runs,
        })
        .collect();
    write_rows(args.output.as_deref(), &rows)?;
    if let Some(path) = &args.svg {
        let line = |f: fn(&CompareRow) -> f64| rows.iter().map(|r| (r.epsilon, f(r))).collect();
        let series = [
            Series { name: "local DP", points: line(|r| r.dp_error) },
            Series { name: "encrypted", points: line(|r| r.encrypted_error) },
            Series { name: "plaintext", points: line(|r| r.plain_error) },
        ];
        let title = format!("{} relative error, n = {}", setting.label, args.n);
        write_text(path, &line_chart(&title, "epsilon", "mean relative error", &series, true))?;
    }
    Ok(exit::SUCCESS)
}

fn write_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(sink(path)?);
    for row in rows {
        wtr.serialize(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    wtr.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}
