//! The `bbv` command line: `run`, `matrix`, `bench` and `fuzz`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::bbv::{Config, ExecError, Limits, Mode, Vm};
use crate::ir::{dump, Module};
use crate::oracle::run_oracle;
use crate::stats::{build_report, write_runs_csv, ReportError, StatsReport, SCHEMA_VERSION};
use crate::{compile, corpus, fuzz, CompileError};

pub const EXIT_HALT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "bbv", version, about = "Basic block versioning VM for a small JavaScript subset")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one program under one mode.
    Run(RunArgs),
    /// Run programs under every mode and compare remaining tag tests.
    Matrix(MatrixArgs),
    /// Time repeated calls to the program's `benchmarkRun`.
    Bench(BenchArgs),
    /// Differential fuzzing against the reference interpreter.
    Fuzz(FuzzArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value = "entry+cont")]
    pub mode: Mode,
    #[arg(long, default_value_t = Limits::default().maxvers)]
    pub maxvers: usize,
    #[arg(long, default_value_t = Limits::default().maxentries)]
    pub maxentries: usize,
    /// Check context tags against runtime values at every specialized entry.
    #[arg(long)]
    pub validate: bool,
    /// Keep object shapes in entry-point contexts.
    #[arg(long)]
    pub entry_shapes: bool,
    /// Dynamic instruction budget.
    #[arg(long)]
    pub budget: Option<u64>,
}

impl EngineArgs {
    fn config(&self, mode: Mode) -> Config {
        let mut cfg = Config { validate: self.validate, entry_shapes: self.entry_shapes, ..Config::new(mode) };
        cfg.limits.maxvers = self.maxvers;
        cfg.limits.maxentries = self.maxentries;
        if let Some(b) = self.budget {
            cfg.limits.budget = b;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to a program, or the name of a bundled corpus program.
    pub program: String,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Also call `benchmarkRun()` once after the top-level code.
    #[arg(long)]
    pub with_benchmark: bool,
    /// Print every compiled block version with its entry context.
    #[arg(long)]
    pub dump_versions: bool,
    /// Print the lowered IR.
    #[arg(long)]
    pub dump_ir: bool,
    /// Print the shape transition tree after the run.
    #[arg(long)]
    pub dump_shapes: bool,
    /// Write the run's stats report as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Write the run's counters as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Programs to run; defaults to the whole bundled corpus.
    pub programs: Vec<String>,
    /// Comma-separated mode columns.
    #[arg(long, value_delimiter = ',', default_values_t = Mode::ALL.to_vec())]
    pub modes: Vec<Mode>,
    #[arg(long, default_value_t = Limits::default().maxvers)]
    pub maxvers: usize,
    #[arg(long, default_value_t = Limits::default().maxentries)]
    pub maxentries: usize,
    #[arg(long)]
    pub validate: bool,
    /// Proportion table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Full comparison report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Raw counters of every run as CSV.
    #[arg(long)]
    pub runs_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub program: String,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 10)]
    pub warmup: u32,
    #[arg(long, default_value_t = 10)]
    pub iters: u32,
    /// Write the timing report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Directory to write mismatching programs into.
    #[arg(long)]
    pub keep: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("{program}: {source}")]
    Exec { program: String, source: ExecError },
    #[error("corpus convention violated: `{0}` defines no benchmarkRun function")]
    NoBenchmark(String),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0} of {1} fuzz programs disagreed with the reference interpreter")]
    FuzzMismatch(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Exec { source: ExecError::Halt(_), .. } => EXIT_HALT,
            CliError::Exec { .. } | CliError::FuzzMismatch(..) => EXIT_INTERNAL,
            _ => EXIT_USAGE,
        }
    }
}

/// A program's display name and source text.
pub struct Program {
    pub name: String,
    pub source: String,
}

/// Reads `spec` from disk, falling back to the bundled corpus.
pub fn load_program(spec: &str) -> Result<Program, CliError> {
    let path = Path::new(spec);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| spec.to_string());
    match fs::read_to_string(path) {
        Ok(source) => Ok(Program { name, source }),
        Err(e) => {
            let bare = spec.strip_prefix("corpus/").unwrap_or(spec);
            let found = corpus::get(bare).or_else(|| corpus::get(&format!("{bare}.js")));
            match found {
                Some(src) => Ok(Program { name: if bare.ends_with(".js") { bare.into() } else { format!("{bare}.js") }, source: src.into() }),
                None => Err(CliError::Read { path: spec.to_string(), source: e }),
            }
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn exec<T>(program: &str, r: Result<T, ExecError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Exec { program: program.to_string(), source })
}

/// The standard workload: top-level code, then `benchmarkRun()` if asked.
fn drive(vm: &mut Vm<'_>, with_benchmark: bool) -> Result<(), ExecError> {
    vm.run_main()?;
    if with_benchmark {
        vm.call_global("benchmarkRun")?;
    }
    Ok(())
}

/// Runs one program under one mode, returning its output and stats.
pub fn run_once(module: &Module, program: &str, cfg: Config, with_benchmark: bool) -> (String, Result<StatsReport, ExecError>) {
    if cfg.mode == Mode::Oracle {
        return match run_oracle(module, &cfg, program, |vm| drive(vm, with_benchmark)) {
            Ok(run) => (run.output, Ok(run.report)),
            Err(e) => (String::new(), Err(e)),
        };
    }
    let mut vm = Vm::new(module, cfg);
    let r = drive(&mut vm, with_benchmark);
    let out = vm.take_output();
    (out, r.map(|()| vm.stats(program)))
}

fn summary(s: &StatsReport) -> String {
    let mut line = format!(
        "{} [{}] dynTagTests={} dynShapeTests={} staticTestsEliminated={} continuationsInvalidated={} dynInstructions={}",
        s.program,
        s.mode,
        s.dyn_tag_tests,
        s.dyn_shape_tests,
        s.static_tests_eliminated,
        s.continuations_invalidated,
        s.dyn_instructions
    );
    if let Some(r) = s.oracle_recorded_tag_tests {
        line.push_str(&format!(" recordedTagTests={r} removedSites={}", s.oracle_removed_sites.unwrap_or(0)));
    }
    line
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let p = load_program(&args.program)?;
    let module = compile(&p.name, &p.source)?;
    let mut stdout = std::io::stdout().lock();
    if args.dump_ir {
        let _ = writeln!(stdout, "{}", dump::dump_module(&module));
    }
    let cfg = args.engine.config(args.engine.mode);
    let (output, report) = if cfg.mode == Mode::Oracle || !(args.dump_versions || args.dump_shapes) {
        run_once(&module, &p.name, cfg, args.with_benchmark)
    } else {
        let mut vm = Vm::new(&module, cfg);
        let r = drive(&mut vm, args.with_benchmark);
        let out = vm.take_output();
        let _ = write!(stdout, "{out}");
        if args.dump_versions {
            let _ = write!(stdout, "{}", vm.dump_versions());
        }
        if args.dump_shapes {
            let _ = write!(stdout, "{}", vm.heap().shapes.dump());
        }
        (String::new(), r.map(|()| vm.stats(&p.name)))
    };
    let _ = write!(stdout, "{output}");
    let report = exec(&p.name, report)?;
    eprintln!("{}", summary(&report));
    if let Some(path) = &args.stats {
        write_file(path, report.to_json().as_bytes())?;
    }
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        write_runs_csv(std::slice::from_ref(&report), &mut buf).expect("csv into memory");
        write_file(path, &buf)?;
    }
    Ok(())
}

/// Runs every program under baseline plus `modes`, one thread per program.
pub fn matrix_runs(programs: &[Program], modes: &[Mode], template: &Config) -> Result<Vec<StatsReport>, CliError> {
    let mut all: Vec<Mode> = vec![Mode::Baseline];
    all.extend(modes.iter().copied().filter(|m| *m != Mode::Baseline));
    let results: Vec<Result<Vec<StatsReport>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = programs
            .iter()
            .map(|p| {
                let all = &all;
                s.spawn(move || {
                    let m = compile(&p.name, &p.source)?;
                    let bench = m.global_id("benchmarkRun").is_some();
                    all.iter()
                        .map(|mode| {
                            let cfg = Config { mode: *mode, ..template.clone() };
                            exec(&p.name, run_once(&m, &p.name, cfg, bench).1)
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("matrix worker panicked")).collect()
    });
    let mut runs = Vec::new();
    for r in results {
        runs.extend(r?);
    }
    Ok(runs)
}

pub fn cmd_matrix(args: &MatrixArgs) -> Result<(), CliError> {
    let programs = if args.programs.is_empty() {
        corpus::all().map(|(n, s)| Program { name: n.into(), source: s.into() }).collect()
    } else {
        args.programs.iter().map(|p| load_program(p)).collect::<Result<Vec<_>, _>>()?
    };
    let mut template = Config::new(Mode::Baseline);
    template.validate = args.validate;
    template.limits.maxvers = args.maxvers;
    template.limits.maxentries = args.maxentries;
    let runs = matrix_runs(&programs, &args.modes, &template)?;
    let names: Vec<&str> = args.modes.iter().map(|m| m.name()).collect();
    let report = build_report(&runs, &names)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf).expect("csv into memory");
        write_file(path, &buf)?;
    }
    if let Some(path) = &args.json {
        write_file(path, report.to_json().as_bytes())?;
    }
    if let Some(path) = &args.runs_csv {
        let mut buf = Vec::new();
        write_runs_csv(&runs, &mut buf).expect("csv into memory");
        write_file(path, &buf)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub schema_version: u32,
    pub program: String,
    pub mode: String,
    pub warmup_iters: u32,
    pub timing_iters: u32,
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
    pub total_ms: f64,
    /// Dynamic instructions per timed iteration.
    pub dyn_instructions: Vec<u64>,
    pub stats: StatsReport,
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn bench(p: &Program, cfg: Config, warmup: u32, iters: u32) -> Result<BenchReport, CliError> {
    let module = compile(&p.name, &p.source)?;
    if module.global_id("benchmarkRun").is_none() {
        return Err(CliError::NoBenchmark(p.name.clone()));
    }
    let mode = cfg.mode;
    let mut vm = Vm::new(&module, cfg);
    exec(&p.name, vm.run_main())?;
    let call = |vm: &mut Vm<'_>| match exec(&p.name, vm.call_global("benchmarkRun"))? {
        Some(_) => Ok(()),
        None => Err(CliError::NoBenchmark(p.name.clone())),
    };
    for _ in 0..warmup {
        call(&mut vm)?;
    }
    let mut samples = Vec::new();
    let mut instrs = Vec::new();
    for _ in 0..iters {
        let before = vm.stats(&p.name).dyn_instructions;
        let t = Instant::now();
        call(&mut vm)?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
        instrs.push(vm.stats(&p.name).dyn_instructions - before);
    }
    vm.take_output();
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        program: p.name.clone(),
        mode: mode.name().into(),
        warmup_iters: warmup,
        timing_iters: iters,
        median_ms: median(&samples),
        total_ms: samples.iter().sum(),
        samples_ms: samples,
        dyn_instructions: instrs,
        stats: vm.stats(&p.name),
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let p = load_program(&args.program)?;
    let r = bench(&p, args.engine.config(args.engine.mode), args.warmup, args.iters)?;
    println!(
        "{} [{}] {} warmup, {} timed: median {:.3} ms, total {:.3} ms, dyn instructions/iter {}",
        r.program,
        r.mode,
        r.warmup_iters,
        r.timing_iters,
        r.median_ms,
        r.total_ms,
        r.dyn_instructions.last().copied().unwrap_or(0)
    );
    if let Some(path) = &args.json {
        write_file(path, serde_json::to_string_pretty(&r).expect("bench serialize").as_bytes())?;
    }
    Ok(())
}

pub fn cmd_fuzz(args: &FuzzArgs) -> Result<(), CliError> {
    let report = fuzz::campaign(args.seed, args.count);
    println!(
        "fuzz seed {}: {} programs, {} halted, {} mismatches",
        args.seed,
        report.programs,
        report.halted,
        report.mismatches.len()
    );
    for m in &report.mismatches {
        let mode = m.mode.map(|m| m.name()).unwrap_or("reference");
        eprintln!("seed {} [{mode}]: {}", m.seed, m.detail);
        if let Some(dir) = &args.keep {
            fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.display().to_string(), source })?;
            write_file(&dir.join(format!("fuzz-{}.js", m.seed)), m.source.as_bytes())?;
        }
    }
    if report.mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::FuzzMismatch(report.mismatches.len(), report.programs))
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Fuzz(a) => cmd_fuzz(a),
    }
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
