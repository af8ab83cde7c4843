//! Command-line front end: preprocessing, simulation, fitting, ensemble
//! bands and diagnostics, emitting self-describing TSV (or JSON) tables.
//!
//! Exit codes: 0 success, 1 numerical non-convergence (results still
//! written), 2 usage or data errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrw::analysis::{
    abs_acf, acf, dyadic_scales, ensemble_band, periodogram, wavelet_variogram, SeasonalSpec,
};
use mrw::dataprep::{
    daily_aggregate, load_prices, log_detrend, weekday_slice, weekly_mean, AggregateMode,
};
use mrw::estimate::{fit, FitConfig, FitStatus};
use mrw::likelihood::DEFAULT_TRUNCATION;
use mrw::model::{ModelParams, VariantKind};
use mrw::simulate::simulate;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "mrw", version, about = "Mean-reverting multifractal random walk toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Preprocess an hourly `timestamp,price` CSV into an analysis-ready series
    Prep(PrepArgs),
    /// Simulate one path of a model
    Simulate(SimArgs),
    /// Fit a model to a series file by approximate maximum likelihood
    Fit(FitArgs),
    /// Simulate an ensemble and emit wavelet-variogram quantile bands
    Ensemble(EnsembleArgs),
    /// Diagnostics of a series file: variogram, spectrum, acf, absacf
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Standard,
    Damped,
    Fractional,
}

impl ModelArg {
    fn kind(self) -> VariantKind {
        match self {
            ModelArg::Standard => VariantKind::Standard,
            ModelArg::Damped => VariantKind::Damped,
            ModelArg::Fractional => VariantKind::Fractional,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggArg {
    Mean,
    Max,
}

#[derive(Args)]
struct PrepArgs {
    /// Input CSV with header `timestamp,price`
    #[arg(long)]
    input: PathBuf,
    /// Daily aggregation of the hourly prices
    #[arg(long, value_enum, default_value = "mean")]
    aggregate: AggArg,
    /// Keep only this ISO weekday (1 = Monday) after detrending
    #[arg(long, conflicts_with = "weekly_mean")]
    weekday: Option<u8>,
    /// Take calendar-week means after detrending
    #[arg(long)]
    weekly_mean: bool,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Args)]
struct ModelParamArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    t_corr: f64,
    /// Correlation time 1/nu (damped model), in units of dt
    #[arg(long)]
    nu_inv: Option<f64>,
    /// AR coefficient phi (damped model; alternative to --nu-inv)
    #[arg(long, conflicts_with = "nu_inv")]
    phi: Option<f64>,
    /// Hurst exponent (fractional model)
    #[arg(long)]
    hurst: Option<f64>,
    /// Sampling interval (weeks by convention)
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
}

impl ModelParamArgs {
    fn params(&self) -> Result<ModelParams, String> {
        match self.model {
            ModelArg::Standard => {
                ModelParams::standard(self.lambda, self.sigma, self.t_corr, self.dt)
                    .map_err(|e| e.to_string())
            }
            ModelArg::Damped => {
                if let Some(phi) = self.phi {
                    ModelParams::damped(self.lambda, self.sigma, self.t_corr, phi, self.dt)
                        .map_err(|e| e.to_string())
                } else if let Some(nu_inv) = self.nu_inv {
                    ModelParams::damped_from_nu_inv(
                        self.lambda,
                        self.sigma,
                        self.t_corr,
                        nu_inv,
                        self.dt,
                    )
                    .map_err(|e| e.to_string())
                } else {
                    Err("the damped model needs --nu-inv or --phi".into())
                }
            }
            ModelArg::Fractional => {
                let hurst = self.hurst.ok_or("the fractional model needs --hurst")?;
                ModelParams::fractional(self.lambda, self.sigma, self.t_corr, hurst, self.dt)
                    .map_err(|e| e.to_string())
            }
        }
    }

    fn describe(&self) -> String {
        let mut s = format!(
            "--model {} --lambda {} --sigma {} --t-corr {} --dt {}",
            match self.model {
                ModelArg::Standard => "standard",
                ModelArg::Damped => "damped",
                ModelArg::Fractional => "fractional",
            },
            self.lambda,
            self.sigma,
            self.t_corr,
            self.dt
        );
        if let Some(v) = self.nu_inv {
            let _ = write!(s, " --nu-inv {v}");
        }
        if let Some(v) = self.phi {
            let _ = write!(s, " --phi {v}");
        }
        if let Some(v) = self.hurst {
            let _ = write!(s, " --hurst {v}");
        }
        s
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    params: ModelParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Args)]
struct FitArgs {
    /// Series file (output of `prep` or `simulate`); the `level`/`value`
    /// column is treated as the drift-removed level series
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    k_trunc: usize,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 400)]
    max_evals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    params: ModelParamArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Comma-separated scale grid, or `auto` for the dyadic default
    #[arg(long, default_value = "auto")]
    scales: String,
    #[arg(long)]
    seasonal_amplitude: Option<f64>,
    /// Sinusoid period in sampling intervals (e.g. 52 for one year weekly)
    #[arg(long)]
    seasonal_period: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    seasonal_phase: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Diagnostic {
    Variogram,
    Spectrum,
    Acf,
    Absacf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    which: Diagnostic,
    #[arg(long, default_value_t = 100)]
    max_lag: usize,
    /// Comma-separated scale grid, or `auto` (variogram only)
    #[arg(long, default_value = "auto")]
    scales: String,
    /// Column to analyze; defaults to `level`/`value` for variogram and
    /// spectrum, `return` (or level differences) for acf/absacf
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

// ------------------------------------------------------------------ tables

struct Table {
    config: String,
    seed: Option<u64>,
    extra_header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(config: String, seed: Option<u64>, columns: &[&str]) -> Self {
        Table {
            config,
            seed,
            extra_header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path, format: Format) -> std::io::Result<()> {
        let mut out = String::new();
        match format {
            Format::Tsv => {
                let _ = writeln!(out, "# mrw {VERSION}");
                let _ = writeln!(out, "# config: {}", self.config);
                if let Some(seed) = self.seed {
                    let _ = writeln!(out, "# seed: {seed}");
                }
                for line in &self.extra_header {
                    let _ = writeln!(out, "# {line}");
                }
                let _ = writeln!(out, "{}", self.columns.join("\t"));
                for row in &self.rows {
                    let _ = writeln!(out, "{}", row.join("\t"));
                }
            }
            Format::Json => {
                let obj = serde_json::json!({
                    "version": VERSION,
                    "config": self.config,
                    "seed": self.seed,
                    "notes": self.extra_header,
                    "columns": self.columns,
                    "rows": self.rows,
                });
                out = serde_json::to_string_pretty(&obj).expect("serializable table");
                out.push('\n');
            }
        }
        std::fs::write(path, out)
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

// ----------------------------------------------------------- series reading

/// Read a `#`-headed TSV series file and extract one numeric column.
fn read_series_column(path: &Path, prefer: &[&str]) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or("empty series file")?;
    let cols: Vec<&str> = header.split('\t').collect();
    let idx = prefer
        .iter()
        .find_map(|want| cols.iter().position(|c| c == want))
        .ok_or_else(|| {
            format!("none of the columns {prefer:?} found in header `{header}`")
        })?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let field = line.split('\t').nth(idx).ok_or_else(|| {
            format!("row {} has no column {}", i + 2, cols[idx])
        })?;
        let v: f64 = field
            .parse()
            .map_err(|_| format!("row {}: unparsable value `{field}`", i + 2))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err("series file has no data rows".into());
    }
    Ok(out)
}

fn parse_scales(spec: &str, n: usize) -> Result<Vec<f64>, String> {
    if spec == "auto" {
        return Ok(dyadic_scales(n));
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad scale `{s}`")))
        .collect()
}

// ------------------------------------------------------------- subcommands

fn cmd_prep(args: &PrepArgs) -> Result<u8, String> {
    let report = load_prices(&args.input).map_err(|e| e.to_string())?;
    let mode = match args.aggregate {
        AggArg::Mean => AggregateMode::Mean,
        AggArg::Max => AggregateMode::Max,
    };
    let daily = daily_aggregate(&report.frame, mode).map_err(|e| e.to_string())?;
    let (detrended, mu) = log_detrend(&daily).map_err(|e| e.to_string())?;
    let (frame, variant) = if let Some(wd) = args.weekday {
        (weekday_slice(&detrended, wd).map_err(|e| e.to_string())?, format!("--weekday {wd}"))
    } else if args.weekly_mean {
        (weekly_mean(&detrended).map_err(|e| e.to_string())?, "--weekly-mean".to_string())
    } else {
        (detrended, String::new())
    };

    let config = format!(
        "prep --input {} --aggregate {} {variant}",
        args.input.display(),
        match args.aggregate {
            AggArg::Mean => "mean",
            AggArg::Max => "max",
        }
    );
    let mut table = Table::new(config.trim().to_string(), None, &["timestamp", "value"]);
    table.extra_header.push(format!("drift_removed_per_day: {mu}"));
    table.extra_header.push(format!("resolution: {:?}", frame.meta.resolution));
    table
        .extra_header
        .push(format!("gaps: {} flagged: {}", frame.gaps.len(), frame.flagged.len()));
    for (ts, v) in frame.timestamps.iter().zip(&frame.values) {
        table.push_row(vec![ts.format("%Y-%m-%dT%H:%M:%S").to_string(), num(*v)]);
    }
    table.write(&args.output, args.format).map_err(|e| e.to_string())?;

    // sidecar gap report: missing timestamps and rejected records
    let mut sidecar = String::from("# mrw gap report\nkind\ttimestamp\tdetail\n");
    for g in &frame.gaps {
        let _ = writeln!(sidecar, "gap\t{}\t", g.format("%Y-%m-%dT%H:%M:%S"));
    }
    for r in &report.rejected {
        let _ = writeln!(sidecar, "rejected\t{}\tline {}: {}", r.timestamp, r.line, r.reason);
    }
    let gap_path = args.output.with_extension("gaps.tsv");
    std::fs::write(&gap_path, sidecar).map_err(|e| e.to_string())?;
    Ok(0)
}

fn cmd_simulate(args: &SimArgs) -> Result<u8, String> {
    let p = args.params.params()?;
    let out = simulate(args.n, &p, args.seed).map_err(|e| e.to_string())?;
    let config =
        format!("simulate {} --n {} --seed {}", args.params.describe(), args.n, args.seed);
    let mut table = Table::new(config, Some(args.seed), &["index", "level", "return"]);
    for (i, (lv, rt)) in out.levels.iter().zip(&out.returns).enumerate() {
        table.push_row(vec![i.to_string(), num(*lv), num(*rt)]);
    }
    table.write(&args.output, args.format).map_err(|e| e.to_string())?;
    Ok(0)
}

fn cmd_fit(args: &FitArgs) -> Result<u8, String> {
    let levels = read_series_column(&args.input, &["level", "value"])?;
    let mut cfg = FitConfig::new(levels.len(), args.dt);
    cfg.k_trunc = args.k_trunc;
    cfg.n_starts = args.starts;
    cfg.max_evals = args.max_evals;
    cfg.seed = args.seed;
    let kind = args.model.kind();
    let result = fit(&levels, kind, args.dt, &cfg).map_err(|e| e.to_string())?;

    let config = format!(
        "fit --input {} --model {} --k-trunc {} --starts {} --max-evals {} --seed {} --dt {}",
        args.input.display(),
        kind.name(),
        args.k_trunc,
        args.starts,
        args.max_evals,
        args.seed,
        args.dt
    );
    let mut columns: Vec<&str> = vec!["model"];
    match kind {
        VariantKind::Damped => columns.push("nu_inv"),
        VariantKind::Fractional => columns.push("hurst"),
        VariantKind::Standard => {}
    }
    columns.extend_from_slice(&[
        "lambda", "t_corr", "sigma", "loglik", "status", "k_trunc", "n", "warnings",
    ]);
    let mut table = Table::new(config, Some(args.seed), &columns);
    let mut row = vec![kind.name().to_string()];
    match kind {
        VariantKind::Damped => row.push(num(result.params.nu_inv().unwrap())),
        VariantKind::Fractional => row.push(num(result.params.hurst().unwrap())),
        VariantKind::Standard => {}
    }
    row.extend_from_slice(&[
        num(result.params.lambda),
        num(result.params.t_corr),
        num(result.params.sigma),
        num(result.loglik),
        result.status.name().to_string(),
        args.k_trunc.to_string(),
        levels.len().to_string(),
        result.warnings.join("; "),
    ]);
    table.push_row(row);
    for s in &result.starts {
        table.extra_header.push(format!(
            "start lambda={:.4} sigma={:.4} t_corr={:.2} -> loglik {:.4}",
            s.start.lambda, s.start.sigma, s.start.t_corr, s.loglik
        ));
    }
    table.write(&args.output, args.format).map_err(|e| e.to_string())?;
    Ok(if result.status == FitStatus::NoConverge { 1 } else { 0 })
}

fn cmd_ensemble(args: &EnsembleArgs) -> Result<u8, String> {
    let p = args.params.params()?;
    let scales = parse_scales(&args.scales, args.n)?;
    let seasonal = match (args.seasonal_amplitude, args.seasonal_period) {
        (Some(amplitude), Some(period)) => {
            Some(SeasonalSpec { amplitude, period, phase: args.seasonal_phase })
        }
        (None, None) => None,
        _ => {
            return Err(
                "--seasonal-amplitude and --seasonal-period must be given together".into()
            )
        }
    };
    let band = ensemble_band(&p, args.n, args.reps, &scales, seasonal, args.seed)
        .map_err(|e| e.to_string())?;
    let mut config = format!(
        "ensemble {} --n {} --reps {} --scales {} --seed {}",
        args.params.describe(),
        args.n,
        args.reps,
        args.scales,
        args.seed
    );
    if let Some(s) = &seasonal {
        let _ = write!(
            config,
            " --seasonal-amplitude {} --seasonal-period {} --seasonal-phase {}",
            s.amplitude, s.period, s.phase
        );
    }
    let mut table =
        Table::new(config, Some(args.seed), &["scale", "mean", "q1_40", "q1_8", "q7_8", "q39_40"]);
    table.extra_header.push(format!("n_reps: {}", band.n_reps));
    for (j, a) in band.scales.iter().enumerate() {
        table.push_row(vec![
            num(*a),
            num(band.mean[j]),
            num(band.quantiles[0].1[j]),
            num(band.quantiles[1].1[j]),
            num(band.quantiles[2].1[j]),
            num(band.quantiles[3].1[j]),
        ]);
    }
    table.write(&args.output, args.format).map_err(|e| e.to_string())?;
    Ok(0)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<u8, String> {
    let base_config = format!(
        "analyze --input {} --which {} ",
        args.input.display(),
        match args.which {
            Diagnostic::Variogram => "variogram",
            Diagnostic::Spectrum => "spectrum",
            Diagnostic::Acf => "acf",
            Diagnostic::Absacf => "absacf",
        }
    );
    match args.which {
        Diagnostic::Variogram | Diagnostic::Spectrum => {
            let prefer: Vec<&str> = match &args.column {
                Some(c) => vec![c.as_str()],
                None => vec!["level", "value"],
            };
            let x = read_series_column(&args.input, &prefer)?;
            if args.which == Diagnostic::Variogram {
                let scales = parse_scales(&args.scales, x.len())?;
                let v = wavelet_variogram(&x, &scales).map_err(|e| e.to_string())?;
                let mut table = Table::new(
                    format!("{base_config}--scales {}", args.scales),
                    None,
                    &["scale", "v", "count"],
                );
                for j in 0..v.scales.len() {
                    table.push_row(vec![
                        num(v.scales[j]),
                        num(v.v[j]),
                        v.counts[j].to_string(),
                    ]);
                }
                table.write(&args.output, args.format).map_err(|e| e.to_string())?;
            } else {
                let (freqs, power) = periodogram(&x).map_err(|e| e.to_string())?;
                let mut table =
                    Table::new(base_config.trim().to_string(), None, &["freq", "power"]);
                for (f, s) in freqs.iter().zip(&power) {
                    table.push_row(vec![num(*f), num(*s)]);
                }
                table.write(&args.output, args.format).map_err(|e| e.to_string())?;
            }
        }
        Diagnostic::Acf | Diagnostic::Absacf => {
            let x = match &args.column {
                Some(c) => read_series_column(&args.input, &[c.as_str()])?,
                None => match read_series_column(&args.input, &["return"]) {
                    Ok(r) => r,
                    Err(_) => {
                        let levels = read_series_column(&args.input, &["level", "value"])?;
                        levels.windows(2).map(|w| w[1] - w[0]).collect()
                    }
                },
            };
            let r = match args.which {
                Diagnostic::Acf => acf(&x, args.max_lag),
                _ => abs_acf(&x, args.max_lag),
            }
            .map_err(|e| e.to_string())?;
            let mut table = Table::new(
                format!("{base_config}--max-lag {}", args.max_lag),
                None,
                &["lag", "acf"],
            );
            for (lag, v) in r.iter().enumerate() {
                table.push_row(vec![lag.to_string(), num(*v)]);
            }
            table.write(&args.output, args.format).map_err(|e| e.to_string())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Prep(args) => cmd_prep(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Ensemble(args) => cmd_ensemble(args),
        Cmd::Analyze(args) => cmd_analyze(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
