//! Thin command-line front end. All computation lives in the library; this
//! binary parses flags/config files, runs the requested job and writes a
//! deterministic output document (timings go to stderr so identical configs
//! produce byte-identical documents).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ope::basis::{enumerate_basis, parse_op, CompositeOp, ModelParams, PointConfig};
use ope::deform::{
    self, coefficient, CoeffTable, CoeffValue, ComputeOptions, Method,
};
use ope::report::{csv_line, fmt_float, Report};
use ope::verify;

#[derive(Parser)]
#[command(name = "ope", about = "OPE coefficients of massive Euclidean phi^4 theory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute coefficients for one operator product
    Compute(ComputeArgs),
    /// Run a verification suite
    Verify(VerifyArgs),
    /// Sweep a grid of separations, CSV output
    Table(TableArgs),
}

#[derive(Args, Default)]
struct ComputeArgs {
    /// flat key-value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mass: Option<f64>,
    /// comma-separated operator specs, e.g. "phi,phi^3"
    #[arg(long)]
    ops: Option<String>,
    /// semicolon-separated 4-vectors, e.g. "0.5,0,0,0;-0.5,0,0,0"
    #[arg(long)]
    points: Option<String>,
    /// target operator spec, or "all<=D" for every basis target up to dimension D
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    /// symbolic | numeric | auto
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    rho_frac: Option<f64>,
    #[arg(long)]
    r_far: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// wick | bessel | integrals | examples | slopes | oracle | all
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    ops: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    method: Option<String>,
    /// comma-separated separations along the first axis
    #[arg(long)]
    separations: Option<String>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

struct JobConfig {
    mass: f64,
    ops: Vec<String>,
    points: Vec<[f64; 4]>,
    target: String,
    order: u32,
    method: Method,
    opts: ComputeOptions,
    separations: Vec<f64>,
    output: Option<PathBuf>,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            mass: 1.0,
            ops: Vec::new(),
            points: Vec::new(),
            target: String::new(),
            order: 0,
            method: Method::Auto,
            opts: ComputeOptions::default(),
            separations: Vec::new(),
            output: None,
        }
    }
}

enum Failure {
    Usage(String),
    Computation(String),
    Verification,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Compute(args) => run_compute(args),
        Cmd::Verify(args) => run_verify(args),
        Cmd::Table(args) => run_table(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Computation(msg)) => {
            eprintln!("computation failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}

fn load_config(path: &PathBuf) -> Result<JobConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = JobConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{}:{}: expected `key = value`", path.display(), lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            Failure::Usage(format!(
                "{}:{}: invalid {what} `{value}`",
                path.display(),
                lineno + 1
            ))
        };
        match key {
            "mass" => cfg.mass = value.parse().map_err(|_| bad("mass"))?,
            "ops" => cfg.ops = value.split(',').map(|s| s.trim().to_string()).collect(),
            "points" => cfg.points = parse_points(value).map_err(|_| bad("points"))?,
            "target" => cfg.target = value.to_string(),
            "order" => cfg.order = value.parse().map_err(|_| bad("order"))?,
            "method" => cfg.method = value.parse().map_err(|_| bad("method"))?,
            "rho_frac" => cfg.opts.rho_frac = Some(value.parse().map_err(|_| bad("rho_frac"))?),
            "r_far" => cfg.opts.r_far = Some(value.parse().map_err(|_| bad("r_far"))?),
            "rel_tol" => cfg.opts.rel_tol = value.parse().map_err(|_| bad("rel_tol"))?,
            "max_evals" => cfg.opts.max_evals = value.parse().map_err(|_| bad("max_evals"))?,
            "mc_samples" => cfg.opts.mc_samples = value.parse().map_err(|_| bad("mc_samples"))?,
            "seed" => cfg.opts.seed = value.parse().map_err(|_| bad("seed"))?,
            "separations" => {
                cfg.separations = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("separations"))?
            }
            "output" => cfg.output = Some(PathBuf::from(value)),
            other => {
                return Err(Failure::Usage(format!(
                    "{}:{}: unknown key `{other}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(cfg)
}

fn parse_points(text: &str) -> Result<Vec<[f64; 4]>, String> {
    text.split(';')
        .map(|chunk| {
            let comps: Vec<f64> = chunk
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad coordinate in `{chunk}`: {e}"))?;
            comps
                .try_into()
                .map_err(|_| format!("point `{chunk}` must have 4 coordinates"))
        })
        .collect()
}

fn apply_compute_flags(mut cfg: JobConfig, args: &ComputeArgs) -> Result<JobConfig, Failure> {
    if let Some(m) = args.mass {
        cfg.mass = m;
    }
    if let Some(ops) = &args.ops {
        cfg.ops = ops.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(points) = &args.points {
        cfg.points = parse_points(points).map_err(Failure::Usage)?;
    }
    if let Some(target) = &args.target {
        cfg.target = target.clone();
    }
    if let Some(order) = args.order {
        cfg.order = order;
    }
    if let Some(method) = &args.method {
        cfg.method = method.parse().map_err(Failure::Usage)?;
    }
    if let Some(v) = args.rho_frac {
        cfg.opts.rho_frac = Some(v);
    }
    if let Some(v) = args.r_far {
        cfg.opts.r_far = Some(v);
    }
    if let Some(v) = args.rel_tol {
        cfg.opts.rel_tol = v;
    }
    if let Some(v) = args.max_evals {
        cfg.opts.max_evals = v;
    }
    if let Some(v) = args.mc_samples {
        cfg.opts.mc_samples = v;
    }
    if let Some(v) = args.seed {
        cfg.opts.seed = v;
    }
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn parse_ops(specs: &[String]) -> Result<Vec<CompositeOp>, Failure> {
    specs
        .iter()
        .map(|s| {
            parse_op(s).map_err(|e| Failure::Usage(format!("operator `{s}`: {e}")))
        })
        .collect()
}

fn validate(cfg: &JobConfig) -> Result<(Vec<CompositeOp>, PointConfig, ModelParams), Failure> {
    if cfg.ops.is_empty() {
        return Err(Failure::Usage("no source operators given (use --ops)".into()));
    }
    if cfg.target.is_empty() {
        return Err(Failure::Usage("no target given (use --target)".into()));
    }
    if cfg.order > 2 {
        return Err(Failure::Usage(format!("order must be 0, 1 or 2, got {}", cfg.order)));
    }
    let ops = parse_ops(&cfg.ops)?;
    if cfg.points.len() != ops.len() {
        return Err(Failure::Usage(format!(
            "{} operators but {} points",
            ops.len(),
            cfg.points.len()
        )));
    }
    let points = PointConfig::new(cfg.points.clone())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let params = ModelParams::new(cfg.mass).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((ops, points, params))
}

fn targets_of(cfg: &JobConfig) -> Result<Vec<CompositeOp>, Failure> {
    if let Some(dim) = cfg.target.strip_prefix("all<=") {
        let dim: u32 = dim
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("bad dimension in `{}`", cfg.target)))?;
        Ok(enumerate_basis(dim))
    } else {
        Ok(vec![parse_op(&cfg.target)
            .map_err(|e| Failure::Usage(format!("target `{}`: {e}", cfg.target)))?])
    }
}

fn emit(cfg: &JobConfig, document: String) -> Result<(), Failure> {
    match &cfg.output {
        Some(path) => std::fs::write(path, document)
            .map_err(|e| Failure::Computation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{document}");
            Ok(())
        }
    }
}

fn run_compute(args: ComputeArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => load_config(path)?,
        None => JobConfig::default(),
    };
    let cfg = apply_compute_flags(base, &args)?;
    let (ops, points, params) = validate(&cfg)?;
    let targets = targets_of(&cfg)?;
    let started = Instant::now();

    let mut r = Report::new();
    r.field("tool", "ope compute");
    r.float("mass", cfg.mass);
    r.list("ops", cfg.ops.iter());
    r.list(
        "points",
        cfg.points.iter().map(|p| {
            format!("({})", p.iter().map(|c| fmt_float(*c)).collect::<Vec<_>>().join(", "))
        }),
    );
    r.field("order", cfg.order);
    r.field("method", cfg.method);
    r.open("results");

    let mut computed = 0usize;
    for target in &targets {
        if deform::vanishes_at_order(&ops, target, cfg.order) {
            continue;
        }
        let entry = coefficient(&ops, &points, target, &params, cfg.order, cfg.method, &cfg.opts)
            .map_err(|e| Failure::Computation(e.to_string()))?;
        let symbolic_zero = entry.value.is_symbolic()
            && matches!(entry.value.eval(&points, cfg.mass), Ok(v) if v == 0.0)
            && entry.value.serialize().is_empty();
        if targets.len() > 1 && symbolic_zero {
            continue;
        }
        computed += 1;
        r.open(&target.to_string());
        r.field("order", cfg.order);
        if entry.value.is_symbolic() {
            r.field("symbolic", entry.value.serialize());
        }
        match entry.value.eval(&points, cfg.mass) {
            Ok(v) => {
                r.float("value", v);
            }
            Err(e) => {
                r.field("value", format!("error: {e}"));
            }
        }
        r.float("abs_error_estimate", entry.value.abs_error());
        if let CoeffValue::Numeric(n) = &entry.value {
            r.open("breakdown");
            for (name, v) in &n.breakdown {
                r.float(name, *v);
            }
            r.close();
            r.field("converged", n.converged);
        }
        if entry.experimental {
            r.field("experimental", "true (nested Monte Carlo order-2 path)");
        }
        if !entry.audit.is_empty() {
            r.list("audit", entry.audit.iter());
        }
        // counter-term diagnostics for the first-order path
        if cfg.order == 1 {
            let mut table = CoeffTable::new();
            if let Ok(integrand) =
                deform::build_integrand(&ops, &points, target, 0, &params, &cfg.opts, &mut table)
            {
                if let Some(assembled) = integrand.assembled() {
                    if !assembled.is_zero() {
                        if let Ok(compiled) = assembled.compile(&points, cfg.mass) {
                            r.open("slopes");
                            for j in 0..points.len() {
                                if let Some(s) = deform::uv_slope(|p| compiled.eval(p), &points, j)
                                {
                                    r.float(&format!("uv_x{}", j + 1), s);
                                }
                            }
                            if let Some(s) = deform::ir_slope(|p| compiled.eval(p), &points) {
                                r.float("ir", s);
                            }
                            r.close();
                        }
                    }
                }
            }
        }
        r.close();
    }
    r.close();
    r.field("targets_computed", computed);
    eprintln!("compute finished in {:.3}s", started.elapsed().as_secs_f64());
    emit(&cfg, r.finish())
}

fn run_verify(args: VerifyArgs) -> Result<(), Failure> {
    let suites: Vec<&str> = if args.suite == "all" {
        verify::SUITES.to_vec()
    } else {
        vec![args.suite.as_str()]
    };
    let mut document = String::new();
    let mut all_pass = true;
    for suite in suites {
        let report = verify::run_suite(suite).map_err(|e| Failure::Usage(e.to_string()))?;
        all_pass &= report.passed();
        let _ = write!(document, "{}", report.render());
    }
    match &args.output {
        Some(path) => std::fs::write(path, &document)
            .map_err(|e| Failure::Computation(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{document}"),
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run_table(args: TableArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => JobConfig::default(),
    };
    if let Some(m) = args.mass {
        cfg.mass = m;
    }
    if let Some(ops) = &args.ops {
        cfg.ops = ops.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(t) = &args.target {
        cfg.target = t.clone();
    }
    if let Some(o) = args.order {
        cfg.order = o;
    }
    if let Some(m) = &args.method {
        cfg.method = m.parse().map_err(Failure::Usage)?;
    }
    if let Some(v) = args.rel_tol {
        cfg.opts.rel_tol = v;
    }
    if let Some(v) = args.seed {
        cfg.opts.seed = v;
    }
    if let Some(v) = args.mc_samples {
        cfg.opts.mc_samples = v;
    }
    if let Some(s) = &args.separations {
        cfg.separations = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Usage(format!("bad separation list: {e}")))?;
    }
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    if cfg.separations.is_empty() {
        return Err(Failure::Usage("no separations given (use --separations)".into()));
    }
    if cfg.ops.len() != 2 {
        return Err(Failure::Usage("table sweeps need exactly two source operators".into()));
    }
    let ops = parse_ops(&cfg.ops)?;
    let target = parse_op(&cfg.target)
        .map_err(|e| Failure::Usage(format!("target `{}`: {e}", cfg.target)))?;
    let params = ModelParams::new(cfg.mass).map_err(|e| Failure::Usage(e.to_string()))?;

    let mut lines = vec![csv_line(&[
        "separation".into(),
        "mass".into(),
        "target".into(),
        "order".into(),
        "value".into(),
        "err".into(),
    ])];
    for &sep in &cfg.separations {
        let points =
            PointConfig::new(vec![[0.5 * sep, 0.0, 0.0, 0.0], [-0.5 * sep, 0.0, 0.0, 0.0]])
                .map_err(|e| Failure::Usage(e.to_string()))?;
        let entry = coefficient(&ops, &points, &target, &params, cfg.order, cfg.method, &cfg.opts)
            .map_err(|e| Failure::Computation(e.to_string()))?;
        let value = entry
            .value
            .eval(&points, cfg.mass)
            .map_err(|e| Failure::Computation(e.to_string()))?;
        lines.push(csv_line(&[
            fmt_float(sep),
            fmt_float(cfg.mass),
            target.to_string(),
            cfg.order.to_string(),
            fmt_float(value),
            fmt_float(entry.value.abs_error()),
        ]));
    }
    let mut document = lines.join("\n");
    document.push('\n');
    emit(&cfg, document)
}
