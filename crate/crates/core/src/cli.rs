//! Command-line front end.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::error_profile::{grid_floor, residual, worst_case_error, ProfileError};
use crate::kernels::FourierKernel;
use crate::optimal::{check_half_width, kernel_sign, optimal_error, optimal_lambda, OptimalError};
use crate::quadrature::{IntervalQuadrature, QuadratureError, QuadratureFile, Violation};
use crate::report::{fmt_sig17, sig17};
use crate::verify::{self, NuRow, VerifyError};

/// Saturation below this at the requested spike width counts as a failure.
pub const SATURATION_FLOOR: f64 = 0.99;
pub const NU_GRID: usize = 8192;

#[derive(Debug, Parser)]
#[command(name = "optquad", version, about = "Optimal interval quadrature for periodic convolution classes")]
pub struct Cli {
    /// Tolerance for direct adaptive quadrature
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Profile grid size [default: max(4096, 512 n)]
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal formula and its worst-case error
    Optimal(CaseArgs),
    /// Worst-case error profile of a quadrature file
    Error(ErrorArgs),
    /// Numerical optimality checks
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Optimal values over kernel x n x h
    Sweep(SweepArgs),
    /// Quadrature file of the equidistant formula
    Emit(EmitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    /// `bernoulli:<r>` or `poly:<root>,<root>,...`
    #[arg(long)]
    pub kernel: FourierKernel,
    #[arg(long)]
    pub n: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub h: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ErrorArgs {
    /// Quadrature JSON file
    pub path: PathBuf,
    #[arg(long)]
    pub kernel: FourierKernel,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Random competitors against the optimal formula
    Perturb {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Simplex descent over feasible formulas
    Search {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 20)]
        starts: usize,
    },
    /// Saturation of the duality bound by spike densities
    Extremal {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Sign-change counts for random sign patterns
    Nu {
        #[arg(long)]
        kernel: FourierKernel,
        #[arg(long, default_value_t = 50)]
        patterns: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Repeat for several kernels
    #[arg(long, required = true, num_args = 1..)]
    pub kernel: Vec<FourierKernel>,
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Absolute half-widths
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "h_frac", required_unless_present = "h_frac")]
    pub h: Vec<f64>,
    /// Half-widths as fractions of pi/n
    #[arg(long = "h-frac", num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
    pub h_frac: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EmitArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub h: f64,
    /// Common weight, or `auto` for the optimal one (needs --kernel)
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: String,
    #[arg(long)]
    pub kernel: Option<FourierKernel>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("infeasible quadrature: {0}")]
    Infeasible(Violation),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<OptimalError> for CliError {
    fn from(e: OptimalError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<Violation> for CliError {
    fn from(e: Violation) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Rendered output and the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, code: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub kernel: String,
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub h: f64,
    #[serde(serialize_with = "sig17")]
    pub lambda_star: f64,
    #[serde(serialize_with = "sig17")]
    pub value: f64,
    #[serde(serialize_with = "sig17")]
    pub equioscillation_residual: f64,
}

pub const CSV_HEADER: &str = "kernel,n,h,lambda_star,value,equioscillation_residual";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let kernel = if self.kernel.contains(',') {
            format!("\"{}\"", self.kernel)
        } else {
            self.kernel.clone()
        };
        format!(
            "{},{},{},{},{},{}",
            kernel,
            self.n,
            fmt_sig17(self.h),
            fmt_sig17(self.lambda_star),
            fmt_sig17(self.value),
            fmt_sig17(self.equioscillation_residual)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
struct VerifyJson<F: Serialize> {
    mode: &'static str,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    optimal_value: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    min_ratio: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    best_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_q: Option<QuadratureFile>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    saturation: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
    #[serde(serialize_with = "sig17_opt", skip_serializing_if = "Option::is_none")]
    direct_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    patterns: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<NuJson>>,
    seed: u64,
    failures: Vec<F>,
}

impl<F: Serialize> VerifyJson<F> {
    fn new(mode: &'static str, seed: u64, failures: Vec<F>) -> Self {
        VerifyJson {
            mode,
            optimal_value: None,
            min_ratio: None,
            gap: None,
            best_value: None,
            best_q: None,
            saturation: None,
            delta: None,
            residual: None,
            direct_residual: None,
            trials: None,
            starts: None,
            patterns: None,
            rows: None,
            seed,
            failures,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct NuJson {
    pattern: String,
    nu_phi: usize,
    nu_conv: usize,
    ok: bool,
}

impl From<&NuRow> for NuJson {
    fn from(r: &NuRow) -> Self {
        NuJson {
            pattern: r.label.clone(),
            nu_phi: r.nu_phi,
            nu_conv: r.nu_conv,
            ok: r.ok(),
        }
    }
}

fn sig17_opt<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => sig17(v, s),
        None => s.serialize_none(),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serializes")
}

impl Cli {
    fn grid_for(&self, n: usize) -> usize {
        self.grid.unwrap_or_else(|| grid_floor(n))
    }

    fn json_only(&self, what: &str) -> Result<(), CliError> {
        if self.format == Some(Format::Csv) {
            return Err(CliError::Usage(format!("csv output is not available for {what}")));
        }
        Ok(())
    }
}

/// Parses `args`, runs the command and writes its output; returns the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli).and_then(|out| write_output(&cli, &out).map(|_| out.code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_output(cli: &Cli, out: &Output) -> Result<(), CliError> {
    let mut text = out.text.clone();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", cli.tol)));
    }
    match &cli.command {
        Command::Optimal(case) => cmd_optimal(cli, case),
        Command::Error(args) => cmd_error(cli, args),
        Command::Verify(v) => cmd_verify(cli, v),
        Command::Sweep(args) => cmd_sweep(cli, args),
        Command::Emit(args) => cmd_emit(cli, args),
    }
}

fn sweep_row(kernel: &FourierKernel, n: usize, h: f64, grid_size: usize) -> Result<SweepRow, CliError> {
    let r = optimal_error(kernel, n, h, grid_size)?;
    Ok(SweepRow {
        kernel: r.kernel,
        n,
        h,
        lambda_star: r.lambda_star,
        value: r.value,
        equioscillation_residual: r.equioscillation_residual,
    })
}

pub fn cmd_optimal(cli: &Cli, case: &CaseArgs) -> Result<Output, CliError> {
    let grid = cli.grid_for(case.n);
    if cli.format == Some(Format::Csv) {
        let row = sweep_row(&case.kernel, case.n, case.h, grid)?;
        return Ok(Output::ok(format!("{CSV_HEADER}\n{}", row.to_csv())));
    }
    let r = optimal_error(&case.kernel, case.n, case.h, grid)?;
    Ok(Output::ok(to_json(&r.to_json())))
}

pub fn read_quadrature(path: &std::path::Path) -> Result<IntervalQuadrature, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: QuadratureFile =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    IntervalQuadrature::try_from(file).map_err(|v| {
        if v.is_schema() {
            CliError::Usage(v.to_string())
        } else {
            CliError::Infeasible(v)
        }
    })
}

pub fn cmd_error(cli: &Cli, args: &ErrorArgs) -> Result<Output, CliError> {
    cli.json_only("error")?;
    let q = read_quadrature(&args.path)?;
    let wc = worst_case_error(&args.kernel, &q, cli.grid_for(q.n()))?;
    Ok(Output::ok(to_json(&wc.to_json())))
}

pub fn cmd_verify(cli: &Cli, command: &VerifyCommand) -> Result<Output, CliError> {
    cli.json_only("verify")?;
    let seed = cli.seed;
    match command {
        VerifyCommand::Perturb { case, trials } => {
            let r = verify::perturbation_test(&case.kernel, case.n, case.h, *trials, seed, cli.grid_for(case.n))?;
            let code = if r.passed() { 0 } else { 1 };
            let failures: Vec<QuadratureFile> = r.failures.iter().map(|q| q.to_file()).collect();
            let mut json = VerifyJson::new("perturb", seed, failures);
            json.optimal_value = Some(r.optimal_value);
            json.min_ratio = Some(r.min_ratio);
            json.trials = Some(r.trials);
            Ok(Output { text: to_json(&json), code })
        }
        VerifyCommand::Search { case, starts } => {
            let r = verify::local_search(&case.kernel, case.n, case.h, *starts, seed, cli.grid_for(case.n))?;
            let passed = r.passed();
            let failures = if passed { vec![] } else { vec![r.best_q.to_file()] };
            let mut json = VerifyJson::new("search", seed, failures);
            json.optimal_value = Some(r.optimal_value);
            json.gap = Some(r.gap);
            json.best_value = Some(r.best_value);
            json.best_q = Some(r.best_q.to_file());
            json.starts = Some(r.starts);
            Ok(Output {
                text: to_json(&json),
                code: if passed { 0 } else { 1 },
            })
        }
        VerifyCommand::Extremal { case, delta } => {
            let grid = cli.grid_for(case.n);
            let opt = optimal_error(&case.kernel, case.n, case.h, grid)?;
            let q = &opt.quadrature;
            let f = verify::near_extremal(&case.kernel, q, *delta, grid)?;
            let res = residual(&case.kernel, q, &f);
            let direct = f.integral() - q.apply(|x| f.eval(x), cli.tol)?;
            let saturation = res / opt.value;
            let passed = saturation >= SATURATION_FLOOR;
            let failures = if passed { vec![] } else { vec![q.to_file()] };
            let mut json = VerifyJson::new("extremal", seed, failures);
            json.optimal_value = Some(opt.value);
            json.saturation = Some(saturation);
            json.delta = Some(*delta);
            json.residual = Some(res);
            json.direct_residual = Some(direct);
            Ok(Output {
                text: to_json(&json),
                code: if passed { 0 } else { 1 },
            })
        }
        VerifyCommand::Nu { kernel, patterns } => {
            let grid = cli.grid.unwrap_or(NU_GRID);
            let rows = verify::nu_table(kernel, *patterns, seed, grid)?;
            let failures: Vec<NuJson> = rows.iter().filter(|r| !r.ok()).map(NuJson::from).collect();
            let code = if failures.is_empty() { 0 } else { 1 };
            let mut json = VerifyJson::new("nu", seed, failures);
            json.patterns = Some(rows.len());
            json.rows = Some(rows.iter().map(NuJson::from).collect());
            Ok(Output { text: to_json(&json), code })
        }
    }
}

/// `(kernel, n, h)` in input order: kernels outermost, then `n`, then `h`.
pub fn sweep_cases(args: &SweepArgs) -> Result<Vec<(FourierKernel, usize, f64)>, CliError> {
    let mut cases = Vec::new();
    for kernel in &args.kernel {
        if !kernel.has_zero_mean() {
            kernel_sign(kernel)?;
        }
        for &n in &args.n {
            let hs: Vec<f64> = if args.h_frac.is_empty() {
                args.h.clone()
            } else {
                if n == 0 {
                    return Err(Violation::Empty.into());
                }
                args.h_frac.iter().map(|f| f * PI / n as f64).collect()
            };
            for h in hs {
                check_half_width(n, h)?;
                cases.push((kernel.clone(), n, h));
            }
        }
    }
    Ok(cases)
}

pub fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<Output, CliError> {
    let cases = sweep_cases(args)?;
    let rows = cases
        .iter()
        .map(|(k, n, h)| sweep_row(k, *n, *h, cli.grid_for(*n)))
        .collect::<Result<Vec<_>, _>>()?;
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => std::iter::once(CSV_HEADER.to_string())
            .chain(rows.iter().map(SweepRow::to_csv))
            .collect::<Vec<_>>()
            .join("\n"),
        Format::Json => to_json(&rows),
    };
    Ok(Output::ok(text))
}

pub fn cmd_emit(cli: &Cli, args: &EmitArgs) -> Result<Output, CliError> {
    cli.json_only("emit")?;
    check_half_width(args.n, args.h)?;
    let lambda = if args.lambda == "auto" {
        let kernel = args
            .kernel
            .as_ref()
            .ok_or_else(|| CliError::Usage("--lambda auto requires --kernel".into()))?;
        optimal_lambda(kernel, args.n, args.h, cli.grid_for(args.n))?
    } else {
        args.lambda
            .parse::<f64>()
            .ok()
            .filter(|l| l.is_finite())
            .ok_or_else(|| CliError::Usage(format!("--lambda must be a number or auto, got {:?}", args.lambda)))?
    };
    let q = IntervalQuadrature::equidistant(args.n, args.h, lambda)?;
    Ok(Output::ok(to_json(&q.to_file())))
}
