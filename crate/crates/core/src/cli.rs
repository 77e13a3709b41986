//! Command-line front end.
//!
//! Exit codes: 0 pass or informational, 1 an assertion failed, 2 usage or
//! input error, 3 I/O failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::LabError;
use crate::exchange::{swap_chain_scan, ChainSpec, TestFn};
use crate::lindeberg::{decay_verdict, lindeberg_report, moment_identity_check, ArrayFamily};
use crate::par;
use crate::report::{
    DeltaVerdict, KsCheck, PhiRow, Report, ReportBody, RunHeader, TransitionRow, Verdict, TOOL, VERSION,
};
use crate::sampling::{DistributionSpec, Kind};
use crate::specfun::{normal_cdf, phi_density, Direction, TransitionFn};
use crate::stats::{family_convergence_scan, KS_BAND_99, KS_BAND_999};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Accepts plain integers and scientific notation such as `1e6`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.trim().parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x < 0.0 || x.fract() != 0.0 || x > 1e15 {
        return Err(format!("`{s}` is not a nonnegative integer"));
    }
    Ok(x as usize)
}

fn parse_dist(s: &str) -> Result<DistributionSpec, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(format!("`{s}` must be positive"));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Iid,
    Spike,
}

/// Lindeberg-swap laboratory for the central limit theorem.
///
/// Distributions are written `kind[:param][*scale]` with kind one of
/// `rademacher`, `uniform` (on ±√3), `exp` (Exp(1) − 1), `twopoint:p`
/// (p in [0.01, 0.99]) or `normal[:variance]`, e.g. `twopoint:0.1` or
/// `uniform*0.25`.
#[derive(Debug, Parser)]
#[command(name = "clt-lab", version)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "CLT_LAB_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; results do not depend on it. 0 = all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Standard normal density and distribution function at given points.
    Phi(PhiArgs),
    /// Tabulate a smooth transition function and its first three derivatives.
    Transition(TransitionArgs),
    /// Measure E[f(Z_{n,i})] along the swap chain against the per-swap bounds.
    SwapChain(SwapChainArgs),
    /// Lindeberg tail sums and the normal tail-sum bound over an n × δ grid.
    Lindeberg(LindebergArgs),
    /// Kolmogorov distance of normalized sums to Φ, with exact oracles where available.
    CltVerify(CltVerifyArgs),
    /// Monte Carlo check of E[Z²] = 1 and E[Z⁴] = 3.
    Moments(MomentsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phi(_) => "phi",
            Command::Transition(_) => "transition",
            Command::SwapChain(_) => "swap-chain",
            Command::Lindeberg(_) => "lindeberg",
            Command::CltVerify(_) => "clt-verify",
            Command::Moments(_) => "moments",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhiArgs {
    /// Evaluation points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-3,-2,-1,0,1,2,3")]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransitionArgs {
    /// Threshold location.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x: f64,
    /// Width of the drop.
    #[arg(long, default_value_t = 0.5, value_parser = parse_positive)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = DirectionArg::Before)]
    pub direction: DirectionArg,
    /// Rows to emit across [x − 2η, x + 2η].
    #[arg(long, default_value = "201", value_parser = parse_count)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SwapChainArgs {
    /// Base distribution (unit variance).
    #[arg(long, value_parser = parse_dist)]
    #[serde(serialize_with = "display")]
    pub dist: DistributionSpec,
    /// Array preset built from the base distribution.
    #[arg(long, value_enum, default_value_t = FamilyArg::Iid)]
    pub family: FamilyArg,
    /// Row index n.
    #[arg(long, default_value = "32", value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
    pub epsilon: f64,
    /// Test function: before:x:eta, after:x:eta or cos:omega.
    #[arg(long = "test-fn", default_value = "before:0:0.5", allow_hyphen_values = true)]
    #[serde(serialize_with = "display")]
    pub test_fn: TestFn,
    /// Monte Carlo samples per chain point.
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LindebergArgs {
    /// `iid:<dist>`, `spike:<dist>` or `custom` (with --file).
    #[arg(long)]
    pub array: String,
    /// JSON file for `--array custom`: {"rows": [{"n": .., "entries": [{"kind", "param", "scale"}]}]}.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Row indices; defaults to every row of a custom file.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n: Vec<usize>,
    /// Truncation levels.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, default_value = "0.5,0.1")]
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CltVerifyArgs {
    /// Summand distribution (unit variance); shorthand for --array iid:<dist>.
    #[arg(long, value_parser = parse_dist, conflicts_with = "array", required_unless_present = "array")]
    #[serde(serialize_with = "display_opt")]
    pub dist: Option<DistributionSpec>,
    /// Array preset such as `spike:rademacher`.
    #[arg(long)]
    pub array: Option<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count, default_value = "4,16,64")]
    pub n: Vec<usize>,
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    pub samples: usize,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_opt<T: std::fmt::Display, S: serde::Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

/// Failure outside the assertion verdicts.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io { path, message } => write!(f, "error: {}: {message}", path.display()),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn header(cli: &Cli) -> RunHeader {
    let mut params = BTreeMap::new();
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(&cli.command) {
        for (_, inner) in map {
            if let serde_json::Value::Object(fields) = inner {
                params.extend(fields);
            }
        }
    }
    params.insert("format".into(), serde_json::to_value(cli.format).unwrap_or_default());
    RunHeader {
        tool: TOOL.into(),
        version: VERSION.into(),
        subcommand: cli.command.name().into(),
        seed: cli.seed,
        params,
    }
}

fn parse_family(spec: &str, file: Option<&PathBuf>) -> Result<ArrayFamily, CliError> {
    if spec == "custom" {
        let path = file.ok_or_else(|| CliError::Usage("--array custom needs --file PATH".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        return ArrayFamily::custom_from_json(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
    }
    spec.parse().map_err(|e: LabError| {
        CliError::Usage(format!("{e}; expected iid:<dist>, spike:<dist> or custom"))
    })
}

/// Executes the parsed command and builds its report.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    par::with_workers(cli.workers, || execute_inner(cli))
}

fn execute_inner(cli: &Cli) -> Result<Report, CliError> {
    let seed = cli.seed;
    let mut failures = Vec::new();
    let (body, verdict) = match &cli.command {
        Command::Phi(a) => {
            let rows = a.t.iter().map(|&t| PhiRow { t, density: phi_density(t), cdf: normal_cdf(t) }).collect();
            (ReportBody::Phi { rows }, Verdict::Informational)
        }
        Command::Transition(a) => {
            let direction = match a.direction {
                DirectionArg::Before => Direction::DropBefore,
                DirectionArg::After => Direction::DropAfter,
            };
            let f = TransitionFn::new(a.x, a.eta, direction)?;
            let points = a.points.max(2);
            let (lo, hi) = (a.x - 2.0 * a.eta, a.x + 2.0 * a.eta);
            let rows = (0..points)
                .map(|k| {
                    let t = lo + (hi - lo) * k as f64 / (points - 1) as f64;
                    TransitionRow {
                        t,
                        f: f.eval_unchecked(t, 0),
                        f1: f.eval_unchecked(t, 1),
                        f2: f.eval_unchecked(t, 2),
                        f3: f.eval_unchecked(t, 3),
                    }
                })
                .collect();
            let function = TestFn::Transition(f).to_string();
            (ReportBody::Transition { function, bounds: f.bounds(), rows }, Verdict::Informational)
        }
        Command::SwapChain(a) => {
            let family = match a.family {
                FamilyArg::Iid => ArrayFamily::iid(a.dist)?,
                FamilyArg::Spike => ArrayFamily::spike(a.dist)?,
            };
            let chain = ChainSpec::new(family.row(a.n)?, a.test_fn, a.samples, seed)?;
            let report = swap_chain_scan(&chain, a.epsilon)?;
            for &i in &report.flagged {
                failures.push(format!(
                    "swap {i}: |gap| {} exceeds bound {} + 4 SE {}",
                    report.per_swap_gaps[i - 1].abs(),
                    report.per_swap_bounds[i - 1],
                    report.gap_std_errors[i - 1]
                ));
            }
            if !report.total_within_bound {
                failures.push(format!(
                    "total gap {} exceeds total bound {} + 4 SE {}",
                    report.total_gap.abs(),
                    report.total_bound,
                    report.total_std_error
                ));
            }
            let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
            (ReportBody::SwapChain(report), verdict)
        }
        Command::Lindeberg(a) => {
            let family = parse_family(&a.array, a.file.as_ref())?;
            let ns = if a.n.is_empty() {
                family.indices().ok_or_else(|| CliError::Usage("--n is required for preset arrays".into()))?
            } else {
                a.n.clone()
            };
            let mut rows = Vec::new();
            let mut decay = Vec::new();
            for &delta in &a.delta {
                let mut points = Vec::new();
                for &n in &ns {
                    let r = lindeberg_report(&family.row(n)?, delta)?;
                    if !r.normal_bound_holds() {
                        failures.push(format!(
                            "n={n} delta={delta}: normal tail sum {} exceeds bound {}",
                            r.normal_tail_sum, r.normal_tail_bound
                        ));
                    }
                    points.push((n, r.tail_sum));
                    rows.push(r);
                }
                decay.push(DeltaVerdict { delta, verdict: decay_verdict(&points) });
            }
            let verdict = if failures.is_empty() { Verdict::Informational } else { Verdict::Fail };
            (ReportBody::Lindeberg { array: family.to_string(), rows, decay }, verdict)
        }
        Command::CltVerify(a) => {
            let family = match (&a.dist, &a.array) {
                (Some(d), _) => ArrayFamily::iid(*d)?,
                (None, Some(s)) => parse_family(s, None)?,
                (None, None) => return Err(CliError::Usage("one of --dist or --array is required".into())),
            };
            let report = family_convergence_scan(&family, &a.n, a.samples, seed)?;
            let root_n = (a.samples as f64).sqrt();
            let is_normal = matches!(&family, ArrayFamily::Iid(d) if matches!(d.kind, Kind::Normal { .. }));
            let mut checks = Vec::new();
            for r in &report.rows {
                let check = match r.exact_ks {
                    Some(exact) => Some((exact, 2.0 * KS_BAND_99 / root_n, (r.ks - exact).abs())),
                    None if is_normal => Some((0.0, KS_BAND_999 / root_n, r.ks)),
                    None => None,
                };
                if let Some((reference, tolerance, deviation)) = check {
                    let passed = deviation <= tolerance;
                    if !passed {
                        failures.push(format!(
                            "n={}: ks {} deviates from {reference} by more than {tolerance}",
                            r.n, r.ks
                        ));
                    }
                    checks.push(KsCheck { n: r.n, ks: r.ks, reference, tolerance, passed });
                }
            }
            let verdict = match (checks.is_empty(), failures.is_empty()) {
                (_, false) => Verdict::Fail,
                (true, true) => Verdict::Informational,
                (false, true) => Verdict::Pass,
            };
            (ReportBody::CltVerify { report, checks }, verdict)
        }
        Command::Moments(a) => {
            let m = moment_identity_check(a.samples, seed)?;
            for (name, est, target) in [("E[Z^2]", &m.second, 1.0), ("E[Z^4]", &m.fourth, 3.0)] {
                if (est.mean - target).abs() > 4.0 * est.std_error {
                    failures.push(format!("{name} = {} is more than 4 SE from {target}", est.mean));
                }
            }
            let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
            (ReportBody::Moments(m), verdict)
        }
    };
    Ok(Report { header: header(cli), body, verdict, failures })
}

pub fn render(cli: &Cli, report: &Report) -> String {
    match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

/// Parses `args`, runs, writes the report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and writes its output to `--out` or stdout.
pub fn run_cli(cli: &Cli) -> Result<i32, CliError> {
    let report = execute(cli)?;
    let text = render(cli, &report);
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), message: e.to_string() })?;
        }
    }
    Ok(report.verdict.exit_code())
}
