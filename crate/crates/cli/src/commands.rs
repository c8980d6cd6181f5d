use std::path::Path;

use foldfinder::certify::ProbeRoot;
use foldfinder::continuation::{FoldPoint, StopReason};
use foldfinder::problems::ProblemSpec;
use foldfinder::solver::start_points;
use foldfinder::{
    certify_saddle_node, fold_from_branch, lambda_of, probe_no_solutions_above, solve_maxmin,
    start_from_seed, trace_branch, BranchF64, Certificate, Config, ContinuationConfig, Error,
    Probe, Solution, System,
};
use serde::Serialize;
use serde_json::Value;

use crate::output::{
    self, csv_with_schema, display, emit, load_problem, to_json, CliError, CliResult, Document,
    Recorder,
};
use crate::{
    CertifyArgs, Format, PipelineArgs, PointArgs, ProbeArgs, SolveArgs, SolveOpts, SweepArgs,
    TraceArgs, TraceOpts,
};

/// Roots closer than this (relative) are reported as one.
const ROOT_MERGE_TOL: f64 = 1e-6;

fn solve_config(opts: &SolveOpts) -> Config {
    let mut c = Config::default()
        .with_strategy(opts.strategy)
        .with_starts(opts.starts, opts.seed);
    if let Some(r) = opts.resolution {
        c.grid_resolution = r;
    }
    if let Some(m) = opts.max_iters {
        c.max_iters = m;
    }
    c.require_convergence = opts.require_convergence;
    c
}

fn continuation_config(opts: &TraceOpts) -> CliResult<ContinuationConfig<f64>> {
    if opts.direction != 1 && opts.direction != -1 {
        return Err(CliError::Usage("--direction must be 1 or -1".into()));
    }
    Ok(ContinuationConfig {
        step: opts.step,
        max_points: opts.max_points,
        direction: opts.direction,
        ..ContinuationConfig::default()
    })
}

fn warn_unbounded(s: &Solution) {
    if s.unbounded_suspected {
        eprintln!(
            "warning: lambda(x) keeps growing outside the sampling box; lambda* may be infinite"
        );
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    #[serde(flatten)]
    solution: &'a Solution,
    trace_path: Option<String>,
}

fn solver_trace_csv(s: &Solution) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Numerical(e.to_string());
    w.write_record([
        "iteration",
        "lambda",
        "step",
        "accepted",
        "mu",
        "smoothed_lambda",
    ])
    .map_err(fail)?;
    for (k, t) in s.trace.iter().enumerate() {
        let (mu, lm) = t.smoothed.map_or((String::new(), String::new()), |(m, l)| {
            (m.to_string(), l.to_string())
        });
        w.write_record([
            k.to_string(),
            t.lambda.to_string(),
            t.step.to_string(),
            t.accepted.to_string(),
            mu,
            lm,
        ])
        .map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(csv_with_schema(&String::from_utf8_lossy(&bytes)))
}

pub fn solve(args: &SolveArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let config = solve_config(&args.opts);
    rec.problem = Some(problem.info.clone());
    rec.seed = Some(config.seed);
    rec.config = output::to_value(&config)?;
    let solution = rec.time("solve", || solve_maxmin(&problem.system, &config))?;
    warn_unbounded(&solution);
    if let Some(path) = &args.trace {
        output::write_file(path, &solver_trace_csv(&solution)?)?;
    }
    let out = SolveOutput {
        solution: &solution,
        trace_path: display(&args.trace),
    };
    rec.record("solve", &out)?;
    emit(
        args.out.as_deref(),
        &to_json(&Document::new("solve", &problem.info, &config, &out))?,
    )?;
    Ok(0)
}

/// Pulls `x_star` and `lambda_star` out of a `solve` or `pipeline` document.
fn point_from_document(path: &Path) -> CliResult<(Vec<f64>, f64)> {
    let text = output::read_text(path)?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let candidates = [&doc["result"], &doc["result"]["solve"], &doc];
    for c in candidates {
        let x = c["x_star"]
            .as_array()
            .map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>());
        if let (Some(Some(x)), Some(l)) = (x, c["lambda_star"].as_f64()) {
            return Ok((x, l));
        }
    }
    Err(CliError::Usage(format!(
        "{} holds no x_star / lambda_star",
        path.display()
    )))
}

fn resolve_point(p: &PointArgs, system: &System) -> CliResult<Option<(Vec<f64>, f64)>> {
    let point = match (&p.from, &p.x, p.lambda) {
        (Some(path), _, _) => point_from_document(path)?,
        (None, Some(x), Some(l)) => (x.clone(), l),
        (None, Some(x), None) => {
            let l = lambda_of(system, x)
                .ok_or_else(|| CliError::Usage("lambda(x) is undefined at --x".into()))?;
            (x.clone(), l)
        }
        (None, None, Some(_)) => return Err(CliError::Usage("--lambda needs --x".into())),
        (None, None, None) => return Ok(None),
    };
    if point.0.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: point.0.len(),
        }
        .into());
    }
    Ok(Some(point))
}

#[derive(Serialize)]
struct CertifyOutput {
    #[serde(flatten)]
    certificate: Certificate,
    verdict_description: &'static str,
    report: String,
}

impl CertifyOutput {
    fn new(certificate: Certificate) -> Self {
        Self {
            verdict_description: certificate.verdict.describe(),
            report: certificate.report(),
            certificate,
        }
    }
}

pub fn certify(args: &CertifyArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let (x, lambda) = resolve_point(&args.point, &problem.system)?
        .ok_or_else(|| CliError::Usage("certify needs --from or --x [--lambda]".into()))?;
    rec.problem = Some(problem.info.clone());
    let cert = rec.time("certify", || {
        certify_saddle_node(&problem.system, &x, lambda)
    })?;
    let code = u8::from(!cert.is_certified());
    let out = CertifyOutput::new(cert);
    rec.record("certify", &out)?;
    match args.format {
        Format::Json => emit(
            args.out.as_deref(),
            &to_json(&Document::new("certify", &problem.info, (), &out))?,
        )?,
        Format::Text => emit(args.out.as_deref(), &out.report)?,
    }
    Ok(code)
}

#[derive(Serialize)]
struct BranchSummary {
    start_x: Vec<f64>,
    start_lambda: f64,
    points: usize,
    stop: StopReason,
    max_lambda: f64,
    fold_indices: Vec<usize>,
    folds: Vec<FoldPoint<f64>>,
    csv_path: Option<String>,
}

fn run_trace(
    system: &System,
    start: Option<(Vec<f64>, f64)>,
    config: &ContinuationConfig<f64>,
    rec: &mut Recorder,
) -> CliResult<(BranchF64, BranchSummary)> {
    let (x0, l0) = match start {
        Some(p) => p,
        None => {
            let seed = system.seed().ok_or_else(|| {
                CliError::Usage("the problem has no seed; pass --from or --x/--lambda".into())
            })?;
            rec.time("trace", || start_from_seed(system, seed))?
        }
    };
    let branch = rec.time("trace", || trace_branch(system, &x0, l0, config))?;
    let folds = rec.time("trace", || fold_from_branch(system, &branch));
    let summary = BranchSummary {
        start_x: x0,
        start_lambda: l0,
        points: branch.points.len(),
        stop: branch.stop,
        max_lambda: branch.max_lambda(),
        fold_indices: branch.fold_indices.clone(),
        folds,
        csv_path: None,
    };
    Ok((branch, summary))
}

pub fn trace(args: &TraceArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let config = continuation_config(&args.opts)?;
    rec.problem = Some(problem.info.clone());
    rec.config = output::to_value(&config)?;
    let start = resolve_point(&args.point, &problem.system)?;
    let (branch, mut summary) = run_trace(&problem.system, start, &config, rec)?;
    summary.csv_path = display(&args.out);
    rec.record("trace", &summary)?;
    let csv = csv_with_schema(&branch.to_csv_string());
    let doc = to_json(&Document::new("trace", &problem.info, &config, &summary))?;
    match &args.out {
        Some(path) => {
            output::write_file(path, &csv)?;
            emit(args.summary.as_deref(), &doc)?;
        }
        None => {
            emit(None, &csv)?;
            if let Some(path) = &args.summary {
                output::write_file(path, &doc)?;
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ProbeOutput {
    lambda: f64,
    attempts: usize,
    distinct_roots: usize,
    boundary_roots: usize,
    max_residual_drop: f64,
    converged_in_q: Vec<ProbeRoot<f64>>,
}

impl From<Probe> for ProbeOutput {
    fn from(p: Probe) -> Self {
        Self {
            distinct_roots: p.distinct_roots(ROOT_MERGE_TOL).len(),
            lambda: p.lambda,
            attempts: p.attempts,
            boundary_roots: p.boundary_roots,
            max_residual_drop: p.max_residual_drop,
            converged_in_q: p.converged_in_q,
        }
    }
}

fn run_probe(
    system: &System,
    lambda: f64,
    starts: usize,
    seed: u64,
    rec: &mut Recorder,
) -> CliResult<ProbeOutput> {
    let sbox = system.sampling_box().ok_or(Error::MissingSamplingBox)?;
    let points = start_points(system, sbox, starts, seed)?;
    Ok(rec
        .time("probe", || {
            probe_no_solutions_above(system, lambda, &points)
        })
        .into())
}

#[derive(Serialize)]
struct ProbeConfig {
    lambda: f64,
    starts: usize,
    seed: u64,
}

pub fn probe(args: &ProbeArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let config = ProbeConfig {
        lambda: args.lambda,
        starts: args.starts,
        seed: args.seed,
    };
    rec.problem = Some(problem.info.clone());
    rec.seed = Some(args.seed);
    rec.config = output::to_value(&config)?;
    let out = run_probe(&problem.system, args.lambda, args.starts, args.seed, rec)?;
    rec.record("probe", &out)?;
    emit(
        args.out.as_deref(),
        &to_json(&Document::new("probe", &problem.info, &config, &out))?,
    )?;
    Ok(0)
}

/// Integers stay integers so that keys such as `n` keep their type.
fn toml_value(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = text.parse::<f64>() {
        toml::Value::Float(f)
    } else {
        toml::Value::String(text.to_string())
    }
}

fn build_variant(table: &toml::Table, key: &str, value: &str) -> CliResult<System> {
    let mut t = table.clone();
    let v = toml_value(value);
    let retry = matches!(v, toml::Value::Integer(_));
    t.insert(key.to_string(), v);
    match ProblemSpec::from_table(t.clone()).and_then(|s| s.build()) {
        Ok(s) => Ok(s),
        Err(e) if retry => {
            let f: f64 = value.parse().map_err(|_| CliError::from(e))?;
            t.insert(key.to_string(), toml::Value::Float(f));
            Ok(ProblemSpec::from_table(t)?.build()?)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct SweepRow<'a> {
    value: &'a str,
    lambda_star: f64,
    termination: foldfinder::Termination,
    starts_converged: usize,
    stationarity_residual: f64,
    unbounded_suspected: bool,
}

pub fn sweep(args: &SweepArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let config = solve_config(&args.opts);
    rec.problem = Some(problem.info.clone());
    rec.seed = Some(config.seed);
    rec.config = output::to_value(&config)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Numerical(e.to_string());
    w.write_record([
        args.param.as_str(),
        "lambda_star",
        "termination",
        "starts_converged",
        "stationarity_residual",
        "unbounded_suspected",
    ])
    .map_err(fail)?;
    for value in &args.values {
        let system = build_variant(&problem.table, &args.param, value)?;
        let stage = format!("solve[{}={value}]", args.param);
        let s = rec.time(&stage, || solve_maxmin(&system, &config))?;
        warn_unbounded(&s);
        let row = SweepRow {
            value,
            lambda_star: s.lambda_star,
            termination: s.termination,
            starts_converged: s.starts_converged,
            stationarity_residual: s.stationarity_residual,
            unbounded_suspected: s.unbounded_suspected,
        };
        rec.record(&stage, &row)?;
        let termination = output::to_value(&s.termination)?;
        w.write_record([
            value.clone(),
            s.lambda_star.to_string(),
            termination.as_str().unwrap_or_default().to_string(),
            s.starts_converged.to_string(),
            s.stationarity_residual.to_string(),
            s.unbounded_suspected.to_string(),
        ])
        .map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    emit(
        args.out.as_deref(),
        &csv_with_schema(&String::from_utf8_lossy(&bytes)),
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct PipelineConfig<'a> {
    solve: &'a Config,
    continuation: &'a ContinuationConfig<f64>,
    probe_starts: usize,
    probe_offset: f64,
}

#[derive(Serialize)]
struct PipelineOutput<'a> {
    solve: &'a Solution,
    certificate: CertifyOutput,
    branch: Option<BranchSummary>,
    branch_error: Option<String>,
    probe: ProbeOutput,
}

pub fn pipeline(args: &PipelineArgs, rec: &mut Recorder) -> CliResult<u8> {
    let problem = load_problem(&args.problem)?;
    let system = &problem.system;
    let solve_cfg = solve_config(&args.solve);
    let cont_cfg = continuation_config(&args.trace)?;
    let config = PipelineConfig {
        solve: &solve_cfg,
        continuation: &cont_cfg,
        probe_starts: args.probe_starts,
        probe_offset: args.probe_offset,
    };
    rec.problem = Some(problem.info.clone());
    rec.seed = Some(solve_cfg.seed);
    rec.config = output::to_value(&config)?;

    let solution = rec.time("solve", || solve_maxmin(system, &solve_cfg))?;
    warn_unbounded(&solution);
    rec.record("solve", &solution)?;

    let cert = rec.time("certify", || {
        certify_saddle_node(system, &solution.x_star, solution.lambda_star)
    })?;
    let code = u8::from(!cert.is_certified());
    let certificate = CertifyOutput::new(cert);
    rec.record("certify", &certificate)?;

    let start = system
        .seed()
        .is_none()
        .then(|| (solution.x_star.clone(), solution.lambda_star));
    let (branch, branch_error) = match run_trace(system, start, &cont_cfg, rec) {
        Ok((b, mut summary)) => {
            if let Some(path) = &args.branch_csv {
                output::write_file(path, &csv_with_schema(&b.to_csv_string()))?;
                summary.csv_path = display(&args.branch_csv);
            }
            (Some(summary), None)
        }
        Err(CliError::Numerical(e)) => (None, Some(e)),
        Err(e) => return Err(e),
    };
    rec.record("trace", &branch)?;

    let lambda = solution.lambda_star + args.probe_offset * (1.0 + solution.lambda_star.abs());
    let probe = run_probe(system, lambda, args.probe_starts, solve_cfg.seed, rec)?;
    rec.record("probe", &probe)?;

    let out = PipelineOutput {
        solve: &solution,
        certificate,
        branch,
        branch_error,
        probe,
    };
    emit(
        args.out.as_deref(),
        &to_json(&Document::new("pipeline", &problem.info, &config, &out))?,
    )?;
    Ok(code)
}
