//! Command-line front end.
//!
//! Exit codes: 0 feasible, 2 infeasible, 3 time limit without a schedule,
//! 64 usage, 65 bad data, 66 unreadable input, 70 internal failure,
//! 73 unwritable output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::benchmark::{run_matrix, write_csv, Method};
use crate::decomposition::DecompositionError;
use crate::generate::{generate, GenerateError, GenerateParams};
use crate::instance::{Instance, InstanceError};
use crate::network::SensitivitySet;
use crate::pipeline::{run, PipelineError, RunMode, RunOutcome, RunSettings, RunStatus};
use crate::refine::RefineError;
use crate::schedule::{Schedule, ScheduleError};
use crate::separation::{SeparationConfig, SeparationMode, Workers};
use crate::validate::{check_schedule, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_INCUMBENT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_CANT_CREATE: i32 = 73;

#[derive(Parser, Debug)]
#[command(name = "scuc", version, about = "Security-constrained unit commitment solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an instance and write the schedule and a run report
    Solve(SolveArgs),
    /// Check a schedule against every constraint of an instance
    Validate(ValidateArgs),
    /// Run a method matrix over a directory of instances
    Benchmark(BenchmarkArgs),
    /// Write a synthetic instance
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Monolithic,
    Td,
    TdR,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Monolithic => RunMode::Monolithic,
            ModeArg::Td => RunMode::Td,
            ModeArg::TdR => RunMode::TdR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SeparationArg {
    Dynamic,
    Filtering,
    Enumerate,
}

impl From<SeparationArg> for SeparationMode {
    fn from(s: SeparationArg) -> Self {
        match s {
            SeparationArg::Dynamic => SeparationMode::Dynamic,
            SeparationArg::Filtering => SeparationMode::Filtering,
            SeparationArg::Enumerate => SeparationMode::Enumerate,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolverFlags {
    #[arg(long, value_enum, default_value = "dynamic")]
    separation: SeparationArg,
    /// integer window length
    #[arg(long = "sI", default_value_t = 6)]
    s_i: usize,
    /// relaxed window length (forced to 0 by --mode td)
    #[arg(long = "sR", default_value_t = 6)]
    s_r: usize,
    /// periods committed per subproblem
    #[arg(long, default_value_t = 6)]
    dt: usize,
    /// integer window growth per restart
    #[arg(long, default_value_t = 2)]
    ds: usize,
    #[arg(long = "gap-sub", default_value_t = 0.01)]
    gap_sub: f64,
    #[arg(long = "gap-final", default_value_t = 0.001)]
    gap_final: f64,
    /// seconds
    #[arg(long = "time-limit", default_value_t = 3600.0)]
    time_limit: f64,
    /// screening workers (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    rins: bool,
    #[arg(long = "rins-window", default_value_t = 12)]
    rins_window: usize,
    #[arg(long = "rins-stride", default_value_t = 9)]
    rins_stride: usize,
    /// recorded in the report; the solver itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// reference bus id (default: first bus)
    #[arg(long = "ref-bus")]
    ref_bus: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// schedule JSON
    #[arg(long)]
    output: PathBuf,
    /// run report JSON (default: <output>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "td-r")]
    mode: ModeArg,
    #[command(flatten)]
    flags: SolverFlags,
    /// base PTDF as CSV
    #[arg(long = "ptdf-csv")]
    ptdf_csv: Option<PathBuf>,
    /// monolithic cut pool as CSV
    #[arg(long = "cuts-csv")]
    cuts_csv: Option<PathBuf>,
    /// refinement trace as CSV
    #[arg(long = "rins-trace")]
    rins_trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// report JSON (default: stdout)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long = "ref-bus")]
    ref_bus: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BenchmarkArgs {
    /// directory of instance JSON files
    #[arg(long)]
    corpus: PathBuf,
    /// results CSV
    #[arg(long)]
    output: PathBuf,
    /// report JSON (default: <output>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
    /// comma-separated mode:separation pairs (default: all nine)
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    buses: usize,
    #[arg(long, default_value_t = 6)]
    generators: usize,
    #[arg(long, default_value_t = 14)]
    lines: usize,
    #[arg(long, default_value_t = 4)]
    contingencies: usize,
    #[arg(long = "horizon", short = 'T', default_value_t = 24)]
    horizon: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// report JSON (default: <output>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, &argv),
        Command::Validate(a) => cmd_validate(a, &argv),
        Command::Benchmark(a) => cmd_benchmark(a, &argv),
        Command::Generate(a) => cmd_generate(a, &argv),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("scuc: {}", f.message);
            f.code
        }
    }
}

fn header(command: &str, argv: &[String], flags: &impl Serialize, extra: Value) -> Value {
    let mut h = json!({
        "tool": "scuc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "argv": argv,
        "flags": flags,
    });
    if let (Value::Object(h), Value::Object(extra)) = (&mut h, extra) {
        h.extend(extra);
    }
    h
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_CANT_CREATE, format!("cannot write {}: {e}", path.display())))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::new(EXIT_SOFTWARE, e.to_string()))?;
    write_file(path, &buf)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::from_path(path).map_err(|e| match e {
        InstanceError::Io(io) => Failure::new(EXIT_NO_INPUT, format!("cannot read {}: {io}", path.display())),
        other => Failure::new(EXIT_DATA, format!("{}: {other}", path.display())),
    })
}

fn build_sensitivities(instance: &Instance, ref_bus: Option<&str>) -> Result<SensitivitySet, Failure> {
    let built = match ref_bus {
        Some(bus) => {
            if instance.bus_index(bus).is_none() {
                return Err(Failure::new(EXIT_USAGE, format!("--ref-bus `{bus}` is not a bus of the instance")));
            }
            SensitivitySet::build(instance, bus)
        }
        None => SensitivitySet::build_with_index(instance, 0),
    };
    built.map_err(|e| Failure::new(EXIT_DATA, e.to_string()))
}

fn settings(flags: &SolverFlags, mode: RunMode) -> Result<RunSettings, Failure> {
    let usage = |m: String| Err(Failure::new(EXIT_USAGE, m));
    if !(flags.time_limit > 0.0 && flags.time_limit.is_finite()) {
        return usage(format!("--time-limit must be positive, got {}", flags.time_limit));
    }
    if !(flags.gap_sub >= 0.0 && flags.gap_final >= 0.0) {
        return usage("gaps must be non-negative".into());
    }
    if flags.threads == Some(0) {
        return usage("--threads must be positive".into());
    }
    let workers = match flags.threads {
        Some(n) => Workers::new(n),
        None => Workers::available(),
    }
    .map_err(|e| Failure::new(EXIT_SOFTWARE, e.to_string()))?;
    Ok(RunSettings {
        mode,
        separation: flags.separation.into(),
        s_i: flags.s_i,
        s_r: flags.s_r,
        dt: flags.dt,
        ds: flags.ds,
        gap_sub: flags.gap_sub,
        gap_final: flags.gap_final,
        time_limit: Duration::from_secs_f64(flags.time_limit),
        rins: flags.rins.then_some((flags.rins_window, flags.rins_stride)),
        config: SeparationConfig {
            workers,
            ..SeparationConfig::default()
        },
    })
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Params(m)
        | PipelineError::Decomposition(DecompositionError::Params(m))
        | PipelineError::Refine(RefineError::Params(m)) => Failure::new(EXIT_USAGE, m),
        other => Failure::new(EXIT_SOFTWARE, other.to_string()),
    }
}

fn status_code(s: RunStatus) -> i32 {
    match s {
        RunStatus::Feasible => EXIT_OK,
        RunStatus::Infeasible => EXIT_INFEASIBLE,
        RunStatus::NoIncumbent => EXIT_NO_INCUMBENT,
    }
}

fn run_report(out: &RunOutcome, instance: &Instance, validation: Option<Value>) -> Value {
    let mut r = json!({
        "status": out.status,
        "objective": out.schedule.as_ref().map(|s| &s.objective),
        "wall_seconds": out.wall_seconds,
        "cuts": out.cuts,
        "subproblems": out.subproblems,
        "restarts": out.restarts,
        "validation": validation,
    });
    let obj = r.as_object_mut().expect("object");
    if let Some(m) = &out.monolithic {
        obj.insert(
            "monolithic".into(),
            json!({
                "status": m.status.to_string(),
                "best_bound": m.best_bound.is_finite().then_some(m.best_bound),
                "rounds": m.rounds,
                "nodes": m.nodes,
            }),
        );
    }
    if let Some(d) = &out.decomposition {
        obj.insert(
            "decomposition".into(),
            json!({
                "final_s_i": d.final_s_i,
                "log": d.log,
            }),
        );
    }
    if !out.failure_log.is_empty() {
        obj.insert("decomposition".into(), json!({ "log": out.failure_log }));
    }
    if let Some(rins) = &out.rins {
        obj.insert(
            "rins".into(),
            json!({
                "initial_objective": rins.initial_objective,
                "final_objective": rins.schedule.objective.total,
                "passes": rins.passes,
                "truncated": rins.truncated,
            }),
        );
    }
    obj.insert("instance".into(), json!(instance.name));
    r
}

fn cmd_solve(a: &SolveArgs, argv: &[String]) -> Outcome {
    let instance = load_instance(&a.instance)?;
    let mode = RunMode::from(a.mode);
    let settings = settings(&a.flags, mode)?;
    let sens = build_sensitivities(&instance, a.flags.ref_bus.as_deref())?;
    if let Some(path) = &a.ptdf_csv {
        write_with(path, |buf| sens.write_ptdf_csv(&instance, buf))?;
    }
    let out = run(&instance, &sens, &settings).map_err(pipeline_failure)?;

    let mut validation = None;
    if let Some(schedule) = &out.schedule {
        let text = schedule.to_json_pretty(&instance);
        write_file(&a.output, text.as_bytes())?;
        let reread = Schedule::from_json_str(&text, &instance).map_err(|e| Failure::new(EXIT_SOFTWARE, e.to_string()))?;
        let report = check_schedule(&instance, &sens, &reread, &Tolerances::default())
            .map_err(|e| Failure::new(EXIT_SOFTWARE, e.to_string()))?;
        if !report.feasible {
            log::error!("written schedule fails validation with {} findings", report.violation_count);
        }
        validation = Some(json!({
            "feasible": report.feasible,
            "violation_count": report.violation_count,
            "max_flow_ratio": report.max_flow_ratio,
        }));
    }
    if let (Some(path), Some(m)) = (&a.cuts_csv, &out.monolithic) {
        write_with(path, |buf| m.pool.write_csv(&instance, buf))?;
    }
    if let (Some(path), Some(r)) = (&a.rins_trace, &out.rins) {
        write_with(path, |buf| r.write_trace_csv(buf))?;
    }
    let extra = json!({
        "seed": a.flags.seed,
        "threads": settings.config.workers.threads(),
        "reference_bus": instance.buses[sens.reference_bus()].id,
        "effective_s_r": settings.decomposition_params().s_r,
    });
    let mut report = run_report(&out, &instance, validation.clone());
    report
        .as_object_mut()
        .expect("object")
        .insert("header".into(), header("solve", argv, a, extra));
    write_file(&a.report.clone().unwrap_or_else(|| sidecar(&a.output)), &pretty(&report))?;
    if validation.is_some_and(|v| v["feasible"] == json!(false)) {
        return Err(Failure::new(EXIT_SOFTWARE, "solver produced a schedule that fails validation"));
    }
    Ok(status_code(out.status))
}

fn cmd_validate(a: &ValidateArgs, argv: &[String]) -> Outcome {
    let instance = load_instance(&a.instance)?;
    let text = fs::read_to_string(&a.schedule)
        .map_err(|e| Failure::new(EXIT_NO_INPUT, format!("cannot read {}: {e}", a.schedule.display())))?;
    let schedule = Schedule::from_json_str(&text, &instance).map_err(|e| match e {
        ScheduleError::Dimension(m) => Failure::new(EXIT_DATA, format!("dimension mismatch: {m}")),
        ScheduleError::Parse(p) => Failure::new(EXIT_DATA, format!("{}: {p}", a.schedule.display())),
    })?;
    let sens = build_sensitivities(&instance, a.ref_bus.as_deref())?;
    let report = check_schedule(&instance, &sens, &schedule, &Tolerances::default())
        .map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v.as_object_mut()
        .expect("object")
        .insert("header".into(), header("validate", argv, a, json!({})));
    let bytes = pretty(&v);
    match &a.report {
        Some(path) => write_file(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn cmd_benchmark(a: &BenchmarkArgs, argv: &[String]) -> Outcome {
    let methods: Vec<Method> = if a.methods.is_empty() {
        Method::matrix()
    } else {
        a.methods
            .iter()
            .map(|m| m.trim().parse::<Method>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::new(EXIT_USAGE, e))?
    };
    let base = settings(&a.flags, RunMode::TdR)?;
    let entries = fs::read_dir(&a.corpus)
        .map_err(|e| Failure::new(EXIT_NO_INPUT, format!("cannot read corpus {}: {e}", a.corpus.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".report.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::new(EXIT_NO_INPUT, format!("no instance files in {}", a.corpus.display())));
    }
    let mut corpus = Vec::new();
    for p in &paths {
        let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        corpus.push((name, load_instance(p)?));
    }
    let rows = run_matrix(&corpus, &methods, &base);
    write_with(&a.output, |buf| write_csv(&rows, buf))?;
    let extra = json!({
        "seed": a.flags.seed,
        "threads": base.config.workers.threads(),
        "instances": corpus.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "methods": methods.iter().map(Method::name).collect::<Vec<_>>(),
    });
    let report = json!({ "header": header("benchmark", argv, a, extra), "rows": rows.len() });
    write_file(&a.report.clone().unwrap_or_else(|| sidecar(&a.output)), &pretty(&report))?;
    Ok(EXIT_OK)
}

fn cmd_generate(a: &GenerateArgs, argv: &[String]) -> Outcome {
    let params = GenerateParams {
        buses: a.buses,
        generators: a.generators,
        lines: a.lines,
        contingencies: a.contingencies,
        horizon: a.horizon,
        seed: a.seed,
        ..GenerateParams::default()
    };
    let generated = generate(&params).map_err(|e| match e {
        GenerateError::Params(_) | GenerateError::CannotConnect { .. } | GenerateError::TooManyContingencies { .. } => {
            Failure::new(EXIT_USAGE, e.to_string())
        }
        other => Failure::new(EXIT_SOFTWARE, other.to_string()),
    })?;
    for n in &generated.notices {
        eprintln!("notice: {n}");
    }
    let instance = Instance::from_document(generated.document).map_err(|e| Failure::new(EXIT_SOFTWARE, e.to_string()))?;
    let mut text = instance.to_json_pretty();
    text.push('\n');
    write_file(&a.output, text.as_bytes())?;
    let report = json!({
        "header": header("generate", argv, a, json!({ "seed": a.seed })),
        "notices": generated.notices,
    });
    write_file(&a.report.clone().unwrap_or_else(|| sidecar(&a.output)), &pretty(&report))?;
    Ok(EXIT_OK)
}
