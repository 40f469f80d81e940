//! Command-line front end.
//!
//! Exit codes: 0 on success (and convergence), 1 on invalid input, 2 when a
//! solve ran to completion without converging or the oracle found the
//! instance infeasible.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::analytic::oracle_solve;
use crate::dynamics::euler_integrate;
use crate::error::{Error, Result};
use crate::fmt::{num, parse_num};
use crate::metrics::{control_error, state_error, ErrorTracker};
use crate::problem::{ControlVector, Grid, ProblemSpec};
use crate::projectors::JacobianMode;
use crate::reference::{cache_path, ReferenceSolution, DEFAULT_REFERENCE_N, DEFAULT_REFERENCE_TOL};
use crate::solvers::{
    solve, solve_observed, InitialIterate, Method, Order, SolveReport, SolverConfig,
    DEFAULT_EPSILON, DEFAULT_MAX_ITER,
};
use crate::sweeps::{
    parse_grid_spec, refine_minimum, sweep_alpha_beta, sweep_lambda, SweepSettings,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

const DEFAULT_CACHE_DIR: &str = ".splitctl-cache";

#[derive(Debug, Parser)]
#[command(
    name = "splitctl",
    version,
    about = "Projection methods for the control-constrained double integrator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write the control as CSV.
    Solve(SolveArgs),
    /// Count iterations over a grid of DR or AAC parameters.
    Sweep(SweepArgs),
    /// Measure errors against a fine-grid reference for several N.
    Errors(ErrorsArgs),
    /// Compute (and cache) a reference solution with the oracle.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dykstra,
    Dr,
    Aac,
    Map,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dykstra => Method::Dykstra,
            MethodArg::Dr => Method::DouglasRachford,
            MethodArg::Aac => Method::AragonArtachoCampoy,
            MethodArg::Map => Method::AlternatingProjections,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMethodArg {
    Dr,
    Aac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OrderArg {
    #[default]
    BoxFirst,
    AffineFirst,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::BoxFirst => Order::BoxFirst,
            OrderArg::AffineFirst => Order::AffineFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum JacobianArg {
    #[default]
    Paper,
    Exact,
}

impl From<JacobianArg> for JacobianMode {
    fn from(j: JacobianArg) -> Self {
        match j {
            JacobianArg::Paper => JacobianMode::PaperContinuous,
            JacobianArg::Exact => JacobianMode::ExactDiscrete,
        }
    }
}

/// Boundary conditions; the benchmark instance by default.
#[derive(Debug, Clone, Args)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub sf: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub v0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub vf: f64,
}

impl BoundaryArgs {
    fn spec(&self, a: f64) -> Result<ProblemSpec> {
        ProblemSpec::new(self.s0, self.sf, self.v0, self.vf, a)
    }
}

#[derive(Debug, Clone, Args)]
pub struct IterationArgs {
    #[arg(long, value_enum, default_value_t = OrderArg::BoxFirst)]
    pub order: OrderArg,
    /// Number of subintervals.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = JacobianArg::Paper)]
    pub jacobian: JacobianArg,
    /// Print the resolved settings as JSON and exit.
    #[arg(long)]
    pub emit_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    /// Control bound.
    #[arg(long = "a", default_value_t = 2.5, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Start from a constant control instead of zero.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "init_file")]
    pub init_const: Option<f64>,
    /// Start from a control read from a `t,u` CSV file.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Record every monitored iterate to this CSV (`k,t,u`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the final control here as `t,u` CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub method: SweepMethodArg,
    #[command(flatten)]
    pub iteration: IterationArgs,
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    /// Comma-separated control bounds.
    #[arg(long, default_value = "2.5,3,3.5,4")]
    pub a_list: String,
    /// `lo:hi:step` (dr only).
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// `lo:hi:step` (aac only).
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// `lo:hi:step` (aac only).
    #[arg(long)]
    pub beta_grid: Option<String>,
    /// Zoom in on the best cell of each bound and report it as JSON.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 6)]
    pub refine_levels: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ErrorsArgs {
    #[arg(long, default_value = "1000,10000,100000")]
    pub n_list: String,
    #[arg(long, default_value = "dykstra,dr,aac")]
    pub methods: String,
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    #[arg(long = "a", default_value_t = 2.5, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t = OrderArg::BoxFirst)]
    pub order: OrderArg,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = JacobianArg::Paper)]
    pub jacobian: JacobianArg,
    #[arg(long, default_value_t = 0.7466)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8617)]
    pub beta: f64,
    /// Reference file; built with the oracle if missing.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_N)]
    pub ref_n: usize,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_TOL)]
    pub ref_tol: f64,
    /// Directory for cached references when `--reference` is not given.
    #[arg(long, default_value = DEFAULT_CACHE_DIR)]
    pub cache_dir: PathBuf,
    /// Also write `trace_<method>_<n>.csv` with per-iteration errors.
    #[arg(long)]
    pub per_iteration: bool,
    /// Directory for trace files (defaults to the directory of `--out`).
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub emit_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub boundary: BoundaryArgs,
    #[arg(long = "a", default_value_t = 2.5, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_N)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_TOL)]
    pub tol: f64,
    /// Binary reference file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the oracle control as `t,u` CSV.
    #[arg(long)]
    pub control_csv: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INVALID,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Errors(a) => cmd_errors(a, stdout, stderr),
        Command::Oracle(a) => cmd_oracle(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
    }
}

fn write_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(
        out,
        "{}",
        serde_json::to_string(v).expect("json value serializes")
    )?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// `t,u` CSV of a control on `grid`.
pub fn control_csv(u: &ControlVector, grid: &Grid) -> String {
    let mut s = String::from("t,u\n");
    for (i, &v) in u.as_slice().iter().enumerate() {
        s.push_str(&num(grid.t(i)));
        s.push(',');
        s.push_str(&num(v));
        s.push('\n');
    }
    s
}

/// Reads the `u` column of a `t,u` CSV.
pub fn parse_control_csv(text: &str) -> Result<ControlVector> {
    let bad = |detail: String| Error::Format {
        what: "control CSV",
        detail,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some("t,u") => {}
        other => return Err(bad(format!("expected header 't,u', found {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (_, u) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected two fields", i + 2)))?;
            parse_num(u).ok_or_else(|| bad(format!("line {}: bad number '{u}'", i + 2)))
        })
        .collect::<Result<Vec<_>>>()
        .map(ControlVector::new)
}

fn check_param_flags(
    method: Method,
    lambda: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<()> {
    let allowed: &[&str] = match method {
        Method::DouglasRachford => &["--lambda"],
        Method::AragonArtachoCampoy => &["--alpha", "--beta"],
        Method::Dykstra | Method::AlternatingProjections => &[],
    };
    for (flag, value) in [("--lambda", lambda), ("--alpha", alpha), ("--beta", beta)] {
        if value.is_some() && !allowed.contains(&flag) {
            return Err(Error::invalid(format!(
                "{flag} does not apply to --method {method}"
            )));
        }
    }
    for flag in allowed {
        let given = match *flag {
            "--lambda" => lambda.is_some(),
            "--beta" => beta.is_some(),
            _ => true,
        };
        if !given {
            return Err(Error::invalid(format!("--method {method} requires {flag}")));
        }
    }
    Ok(())
}

fn params_json(cfg: &SolverConfig) -> Value {
    let mut m = Map::new();
    for (k, v) in [
        ("lambda", cfg.lambda),
        ("alpha", cfg.alpha),
        ("beta", cfg.beta),
    ] {
        if let Some(v) = v {
            m.insert(k.into(), json!(v));
        }
    }
    Value::Object(m)
}

fn solve_config(args: &SolveArgs) -> Result<SolverConfig> {
    let method: Method = args.method.into();
    check_param_flags(method, args.lambda, args.alpha, args.beta)?;
    let mut cfg = match method {
        Method::Dykstra => SolverConfig::dykstra(),
        Method::DouglasRachford => SolverConfig::douglas_rachford(args.lambda.unwrap_or_default()),
        // α = 1 unless given.
        Method::AragonArtachoCampoy => SolverConfig::aragon_artacho_campoy(
            args.alpha.unwrap_or(1.0),
            args.beta.unwrap_or_default(),
        ),
        Method::AlternatingProjections => SolverConfig::alternating_projections(),
    };
    let it = &args.iteration;
    cfg = cfg
        .with_order(it.order.into())
        .with_epsilon(it.eps)
        .with_max_iter(it.max_iter)
        .with_jacobian(it.jacobian.into())
        .recording_shadow(args.trace.is_some());
    if let Some(c) = args.init_const {
        cfg = cfg.with_initial(InitialIterate::Constant(c));
    }
    if let Some(path) = &args.init_file {
        let u = parse_control_csv(&fs::read_to_string(path)?)?;
        cfg = cfg.with_initial(InitialIterate::Samples(u));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary_json(cfg: &SolverConfig, n: usize, report: &SolveReport) -> Value {
    json!({
        "method": cfg.method.name(),
        "order": cfg.order.name(),
        "n": n,
        "eps": cfg.epsilon,
        "params": params_json(cfg),
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residual": report.final_residual(),
    })
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<i32> {
    let spec = args.boundary.spec(args.a)?;
    let grid = Grid::new(args.iteration.n)?;
    let cfg = solve_config(args)?;
    if args.iteration.emit_config {
        write_json(
            stdout,
            &json!({
                "command": "solve",
                "method": cfg.method.name(),
                "order": cfg.order.name(),
                "n": grid.n(),
                "eps": cfg.epsilon,
                "max_iter": cfg.max_iter,
                "params": params_json(&cfg),
                "jacobian": cfg.jacobian_mode,
                "spec": spec,
            }),
        )?;
        return Ok(EXIT_OK);
    }

    let report = solve(&spec, &grid, &cfg)?;
    if let Some(path) = &args.out {
        write_text(path, &control_csv(&report.control, &grid))?;
    }
    if let (Some(path), Some(shadow)) = (&args.trace, &report.shadow) {
        let mut s = String::from("k,t,u\n");
        for (k, u) in shadow.iter().enumerate() {
            for (i, &v) in u.as_slice().iter().enumerate() {
                s.push_str(&format!("{k},{},{}\n", num(grid.t(i)), num(v)));
            }
        }
        write_text(path, &s)?;
    }
    write_json(stdout, &summary_json(&cfg, grid.n(), &report))?;
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::invalid(format!("{flag} is empty")));
    }
    items
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::invalid(format!("{flag}: cannot parse '{s}'")))
        })
        .collect()
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<i32> {
    let a_values: Vec<f64> = parse_list("--a-list", &args.a_list)?;
    let spec = args
        .boundary
        .spec(a_values[0].abs().max(f64::MIN_POSITIVE))?;
    let grid = Grid::new(args.iteration.n)?;
    let it = &args.iteration;
    let settings = SweepSettings {
        epsilon: it.eps,
        max_iter: it.max_iter,
        order: it.order.into(),
        jacobian_mode: it.jacobian.into(),
        jobs: args.jobs,
    };
    if it.max_iter == 0 || it.eps.is_nan() || it.eps <= 0.0 {
        return Err(Error::invalid(
            "--eps must be positive and --max-iter at least 1",
        ));
    }

    let result = match args.method {
        SweepMethodArg::Dr => {
            for (flag, v) in [
                ("--alpha-grid", &args.alpha_grid),
                ("--beta-grid", &args.beta_grid),
            ] {
                if v.is_some() {
                    return Err(Error::invalid(format!(
                        "{flag} does not apply to --method dr"
                    )));
                }
            }
            let lambdas = parse_grid_spec(args.lambda_grid.as_deref().unwrap_or("0.01:0.99:0.01"))?;
            if it.emit_config {
                write_json(
                    stdout,
                    &sweep_config_json(args, &settings, &a_values, json!({ "lambda": lambdas })),
                )?;
                return Ok(EXIT_OK);
            }
            sweep_lambda(&spec, &grid, &a_values, &lambdas, &settings)?
        }
        SweepMethodArg::Aac => {
            if args.lambda_grid.is_some() {
                return Err(Error::invalid(
                    "--lambda-grid does not apply to --method aac",
                ));
            }
            let alphas = parse_grid_spec(args.alpha_grid.as_deref().unwrap_or("0.1:1:0.1"))?;
            let betas = parse_grid_spec(args.beta_grid.as_deref().unwrap_or("0.01:0.99:0.01"))?;
            if it.emit_config {
                write_json(
                    stdout,
                    &sweep_config_json(
                        args,
                        &settings,
                        &a_values,
                        json!({ "alpha": alphas, "beta": betas }),
                    ),
                )?;
                return Ok(EXIT_OK);
            }
            sweep_alpha_beta(&spec, &grid, &a_values, &alphas, &betas, &settings)?
        }
    };

    let csv = result.to_csv();
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => stdout.write_all(csv.as_bytes())?,
    }
    if args.refine {
        for &a in &a_values {
            if let Some(m) = refine_minimum(&result, a, args.refine_levels, 21)? {
                let line = json!({ "a": a, "params": m.params, "iterations": m.iterations });
                if args.out.is_some() {
                    write_json(stdout, &line)?;
                } else {
                    log::info!("refined minimum: {line}");
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn sweep_config_json(args: &SweepArgs, s: &SweepSettings, a_values: &[f64], axes: Value) -> Value {
    json!({
        "command": "sweep",
        "method": match args.method { SweepMethodArg::Dr => "dr", SweepMethodArg::Aac => "aac" },
        "order": s.order.name(),
        "n": args.iteration.n,
        "eps": s.epsilon,
        "max_iter": s.max_iter,
        "jacobian": s.jacobian_mode,
        "a_list": a_values,
        "axes": axes,
        "refine": args.refine,
        "jobs": s.jobs,
    })
}

fn errors_config(args: &ErrorsArgs, method: Method) -> SolverConfig {
    let cfg = match method {
        Method::Dykstra => SolverConfig::dykstra(),
        Method::DouglasRachford => SolverConfig::douglas_rachford(args.lambda),
        Method::AragonArtachoCampoy => SolverConfig::aragon_artacho_campoy(args.alpha, args.beta),
        Method::AlternatingProjections => SolverConfig::alternating_projections(),
    };
    cfg.with_order(args.order.into())
        .with_epsilon(args.eps)
        .with_max_iter(args.max_iter)
        .with_jacobian(args.jacobian.into())
}

pub fn cmd_errors(
    args: &ErrorsArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let spec = args.boundary.spec(args.a)?;
    let ns: Vec<usize> = parse_list("--n-list", &args.n_list)?;
    let methods: Vec<Method> = parse_list("--methods", &args.methods)?;
    let ref_grid = Grid::new(args.ref_n)?;
    for &n in &ns {
        Grid::new(n)?;
        if !args.ref_n.is_multiple_of(n) {
            return Err(Error::NonNestedGrids {
                coarse: n,
                fine: args.ref_n,
            });
        }
    }
    let configs: Vec<SolverConfig> = methods.iter().map(|&m| errors_config(args, m)).collect();
    for c in &configs {
        c.validate()?;
    }
    let ref_path = args
        .reference
        .clone()
        .unwrap_or_else(|| cache_path(&args.cache_dir, &spec, args.ref_n, args.ref_tol));
    if args.emit_config {
        write_json(
            stdout,
            &json!({
                "command": "errors",
                "n_list": ns,
                "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
                "params": configs.iter().map(params_json).collect::<Vec<_>>(),
                "order": Order::from(args.order).name(),
                "eps": args.eps,
                "max_iter": args.max_iter,
                "jacobian": JacobianMode::from(args.jacobian),
                "spec": spec,
                "reference": ref_path,
                "ref_n": args.ref_n,
                "ref_tol": args.ref_tol,
            }),
        )?;
        return Ok(EXIT_OK);
    }

    let reference = ReferenceSolution::load_or_build(&ref_path, &spec, &ref_grid, args.ref_tol)?;
    let trace_dir = args.trace_dir.clone().unwrap_or_else(|| {
        args.out
            .as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });

    let mut csv = String::from("method,n,sigma_u,sigma_x,iterations\n");
    let mut all_converged = true;
    for &n in &ns {
        let grid = Grid::new(n)?;
        for cfg in &configs {
            let (report, trace) = if args.per_iteration {
                let mut tracker = ErrorTracker::new(&spec, &grid, &reference)?;
                let r = solve_observed(&spec, &grid, cfg, &mut tracker)?;
                (r, Some(tracker.finish()?))
            } else {
                (solve(&spec, &grid, cfg)?, None)
            };
            let x = euler_integrate(&report.control, &spec, &grid)?;
            let su = control_error(&report.control, &reference.control)?;
            let sx = state_error(&x, &reference.trajectory)?;
            if !report.converged {
                all_converged = false;
                writeln!(
                    stderr,
                    "warning: {} at n = {n} did not converge",
                    cfg.method
                )?;
            }
            csv.push_str(&format!(
                "{},{n},{},{},{}\n",
                cfg.method.name(),
                num(su),
                num(sx),
                report.iterations
            ));
            if let Some(trace) = trace {
                let mut s = String::from("k,residual,sigma_u,sigma_x\n");
                for k in 0..trace.len() {
                    s.push_str(&format!(
                        "{k},{},{},{}\n",
                        num(report.residuals[k]),
                        num(trace.sigma_u[k]),
                        num(trace.sigma_x[k])
                    ));
                }
                write_text(
                    &trace_dir.join(format!("trace_{}_{n}.csv", cfg.method.name())),
                    &s,
                )?;
            }
        }
    }
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => stdout.write_all(csv.as_bytes())?,
    }
    Ok(if all_converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let spec = args.boundary.spec(args.a)?;
    let grid = Grid::new(args.n)?;
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(Error::invalid(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let o = oracle_solve(&spec, &grid, args.tol);
    if o.feasible {
        if let Some(path) = &args.out {
            ReferenceSolution {
                spec,
                grid,
                constants: o.constants,
                tol: args.tol,
                control: o.control.clone(),
                trajectory: o.trajectory.clone(),
            }
            .save(path)?;
        }
        if let Some(path) = &args.control_csv {
            write_text(path, &control_csv(&o.control, &grid))?;
        }
    }
    write_json(
        stdout,
        &json!({
            "n": grid.n(),
            "a": spec.a,
            "feasible": o.feasible,
            "c1": o.constants.c1,
            "c2": o.constants.c2,
            "miss": [o.miss.0, o.miss.1],
        }),
    )?;
    Ok(if o.feasible {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("splitctl").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn param_flag_checks() {
        assert!(check_param_flags(Method::Dykstra, None, None, None).is_ok());
        let e = check_param_flags(Method::Dykstra, Some(0.5), None, None).unwrap_err();
        assert!(e.to_string().contains("--lambda"));
        let e = check_param_flags(Method::DouglasRachford, None, None, None).unwrap_err();
        assert!(e.to_string().contains("--lambda"));
        let e = check_param_flags(Method::AragonArtachoCampoy, None, Some(1.0), None).unwrap_err();
        assert!(e.to_string().contains("--beta"));
        assert!(check_param_flags(Method::AragonArtachoCampoy, None, None, Some(0.5)).is_ok());
    }

    #[test]
    fn control_csv_round_trip() {
        let g = Grid::new(7).unwrap();
        let u = ControlVector::sample(&g, |t| (t * 3.3).exp() - 1.0 / 3.0);
        let text = control_csv(&u, &g);
        let back = parse_control_csv(&text).unwrap();
        assert_eq!(back, u);
        assert_eq!(control_csv(&back, &g), text);
        assert!(parse_control_csv("x,y\n1,2\n").is_err());
    }

    #[test]
    fn solve_summary_and_exit_codes() {
        let (code, out, _) = run_args(&["solve", "--method", "dykstra", "--n", "200"]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(out.trim()).unwrap();
        for key in [
            "method",
            "order",
            "n",
            "eps",
            "params",
            "iterations",
            "converged",
            "final_residual",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["method"], "dykstra");
        assert_eq!(v["converged"], true);

        let (code, _, _) = run_args(&[
            "solve",
            "--method",
            "dykstra",
            "--n",
            "200",
            "--a",
            "2.4",
            "--max-iter",
            "100",
        ]);
        assert_eq!(code, EXIT_NOT_CONVERGED);
    }

    #[test]
    fn invalid_flags_exit_one() {
        let (code, _, err) = run_args(&["solve", "--method", "map", "--a", "0"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("positive"), "{err}");

        let (code, _, err) = run_args(&["solve", "--method", "dykstra", "--lambda", "0.5"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("--lambda"), "{err}");

        let (code, _, _) = run_args(&["solve", "--method", "nope"]);
        assert_eq!(code, EXIT_INVALID);

        let (code, _, _) = run_args(&["sweep", "--method", "dr", "--a-list", ""]);
        assert_eq!(code, EXIT_INVALID);

        let (code, _, err) = run_args(&["sweep", "--method", "dr", "--lambda-grid", "0.1:0.5"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("malformed"), "{err}");
    }

    #[test]
    fn emit_config_prints_resolved_settings() {
        let (code, out, _) = run_args(&[
            "solve",
            "--method",
            "aac",
            "--beta",
            "0.8617",
            "--emit-config",
            "--s0",
            "-1",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["params"]["alpha"], 1.0);
        assert_eq!(v["params"]["beta"], 0.8617);
        assert_eq!(v["spec"]["s0"], -1.0);
        assert_eq!(v["jacobian"], "paper-continuous");
    }
}
