//! Acceptance criteria, one PASS/FAIL line each.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bbv_core::bbv::{Config, ExecError, Mode, Vm};
use bbv_core::cli::{matrix_runs, Program};
use bbv_core::ir::{BlockId, Module};
use bbv_core::oracle::run_oracle;
use bbv_core::runtime::Clock;
use bbv_core::stats::{build_report, StatsReport};
use bbv_core::{compile, corpus, fuzz, refinterp};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn module(name: &str) -> Module {
    compile(name, corpus::get(name).expect("corpus program")).expect("corpus compiles")
}

fn config(mode: Mode) -> Config {
    Config { validate: true, clock: Clock::fixed(), ..Config::new(mode) }
}

fn main_only(vm: &mut Vm<'_>) -> Result<(), ExecError> {
    vm.run_main()
}

fn run_main(m: &Module, cfg: Config) -> Result<(String, StatsReport), String> {
    let mut vm = Vm::new(m, cfg);
    vm.run_main().map_err(|e| e.to_string())?;
    Ok((vm.output().to_string(), vm.stats(&m.path)))
}

fn tree_sum_all_modes() -> Outcome {
    let m = module("tree-sum.js");
    let mut slowest = Duration::ZERO;
    for mode in Mode::ALL {
        let start = Instant::now();
        let out = if mode == Mode::Oracle {
            run_oracle(&m, &config(mode), &m.path, main_only).map(|r| r.output).map_err(|e| e.to_string())
        } else {
            run_main(&m, config(mode)).map(|(o, _)| o)
        };
        ensure!(out.is_ok(), "{mode}: {}", out.unwrap_err());
        let mut vm = Vm::new(&m, config(mode));
        vm.run_main().map_err(|e| e.to_string())?;
        let sum = vm.call_global("benchmarkRun").map_err(|e| e.to_string())?;
        let shown = sum.map(|v| vm.heap().display(&v));
        ensure!(shown.as_deref() == Some("502"), "{mode}: benchmarkRun returned {shown:?}");
        slowest = slowest.max(start.elapsed());
    }
    ensure!(slowest < Duration::from_secs(1), "slowest mode took {slowest:?}");
    Ok(format!("sum 502 in all six modes, slowest {:.0} ms", slowest.as_secs_f64() * 1e3))
}

fn recursive_sum_counts() -> Outcome {
    const C: u64 = 1;
    let mut cont = Vec::new();
    for n in [10u64, 100, 1000] {
        let src = format!("function f(n) {{ if (n == 0) return 0; else return n + f(n-1); }}\nprint(f({n}));\n");
        let m = compile("f.js", &src).map_err(|e| e.to_string())?;
        let (out, intra) = run_main(&m, config(Mode::Intra))?;
        ensure!(out == format!("{}\n", n * (n + 1) / 2), "f({n}) printed {out:?}");
        ensure!(intra.dyn_tag_tests == 2 * n + C, "intra f({n}): {} tag tests, expected {}", intra.dyn_tag_tests, 2 * n + C);
        cont.push(run_main(&m, config(Mode::EntryCont))?.1.dyn_tag_tests);
    }
    ensure!(cont.windows(2).all(|w| w[0] == w[1]), "entry+cont counts vary with N: {cont:?}");
    Ok(format!("intra = 2N + {C}; entry+cont = {} for N in 10, 100, 1000", cont[0]))
}

fn tree_sum_entry_points() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_bbv"))
        .args(["run", "tree-sum.js", "--mode", "entry+cont", "--dump-versions"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "bbv exited with {}", out.status);
    let text = String::from_utf8_lossy(&out.stdout);
    let sum: Vec<&str> = text
        .lines()
        .skip_while(|l| !(l.starts_with("function ") && l.contains(" sum ")))
        .skip(1)
        .take_while(|l| !l.starts_with("function "))
        .filter(|l| l.trim_start().starts_with("entry "))
        .collect();
    ensure!(sum.len() == 2, "sum has {} entry points: {sum:?}", sum.len());
    let null = sum.iter().any(|l| l.contains("r1: null"));
    let object = sum.iter().find(|l| l.contains("r1: object"));
    ensure!(null && object.is_some(), "entries are not null and object: {sum:?}");
    let object = object.unwrap();
    ensure!(object.contains(": 0 tag tests, 2 shape-test sites"), "object entry: {object}");
    Ok("sum has a null and an object entry; the object entry has 0 tag tests and 2 shape-test sites".into())
}

fn workload_runs(modes: &[Mode]) -> Result<Vec<StatsReport>, String> {
    let programs: Vec<Program> = corpus::all().map(|(n, s)| Program { name: n.into(), source: s.into() }).collect();
    let template = Config { validate: true, clock: Clock::fixed(), ..Config::new(Mode::Baseline) };
    matrix_runs(&programs, modes, &template).map_err(|e| e.to_string())
}

fn ladder_monotonicity() -> Outcome {
    let runs = workload_runs(&Mode::LADDER)?;
    let count = |p: &str, m: Mode| runs.iter().find(|r| r.program == p && r.mode == m.name()).map(|r| r.dyn_tag_tests).unwrap();
    for (name, _) in corpus::all() {
        let col: Vec<u64> = Mode::LADDER.iter().map(|m| count(name, *m)).collect();
        ensure!(col.windows(2).all(|w| w[1] <= w[0]), "{name} increases along the ladder: {col:?}");
    }
    for name in ["tree-sum.js", "f.js"] {
        ensure!(count(name, Mode::Intra) < count(name, Mode::Baseline), "{name}: intra does not remove tests");
        ensure!(count(name, Mode::EntryCont) < count(name, Mode::Entry), "{name}: continuations do not remove tests");
    }
    Ok(format!("{} programs non-increasing; strict steps on tree-sum and f", corpus::all().count()))
}

fn oracle_comparison() -> Outcome {
    let m = module("tree-sum.js");
    let oracle = run_oracle(&m, &config(Mode::Oracle), &m.path, main_only).map_err(|e| e.to_string())?;
    let (_, cont) = run_main(&m, config(Mode::EntryCont))?;
    let r = &oracle.report;
    ensure!(cont.dyn_tag_tests < r.dyn_tag_tests, "entry+cont {} vs oracle {}", cont.dyn_tag_tests, r.dyn_tag_tests);
    let kept = r.tag_test_sites.iter().find(|s| s.taken_true > 0 && s.taken_false > 0 && s.executed >= 511);
    ensure!(kept.is_some(), "no polymorphic site with at least 511 tests in the oracle run");
    let kept = kept.unwrap();
    Ok(format!(
        "entry+cont {} < oracle {}; oracle keeps site {} ({} tests)",
        cont.dyn_tag_tests, r.dyn_tag_tests, kept.site, kept.executed
    ))
}

fn invalidation_protocol() -> Outcome {
    let name = "mixed-return.js";
    let m = module(name);
    let reference = refinterp::interpret(name, corpus::get(name).unwrap(), 1).map_err(|e| e.to_string())?;
    ensure!(reference.result.is_ok(), "reference halted: {:?}", reference.result);
    let mut vm = Vm::new(&m, config(Mode::EntryCont));
    vm.run_main().map_err(|e| e.to_string())?;
    vm.call_global("benchmarkRun").map_err(|e| e.to_string())?;
    ensure!(vm.output() == reference.output, "output {:?}, expected {:?}", vm.output(), reference.output);
    let s = vm.stats(name);
    ensure!(s.continuations_invalidated >= 1, "no continuation invalidated");
    ensure!(vm.validated_entries() > 0, "validation never ran");
    Ok(format!(
        "output matches, {} continuations invalidated, {} validated entries without mismatch",
        s.continuations_invalidated,
        vm.validated_entries()
    ))
}

fn version_cap() -> Outcome {
    let m = module("megamorphic.js");
    let cfg = config(Mode::EntryCont);
    let cap = cfg.limits.maxvers;
    let mut vm = Vm::new(&m, cfg);
    vm.run_main().map_err(|e| e.to_string())?;
    ensure!(vm.output() == "56\n", "output {:?}", vm.output());
    let f = m.function_named("classify").unwrap();
    let fir = m.function(f);
    let mut hit = None;
    for b in 0..fir.blocks.len() as u32 {
        let b = BlockId(b);
        if b != fir.entry && vm.distinct_contexts(f, b) >= 7 {
            let vs = vm.block_versions(f, b);
            let specialized = vs.iter().filter(|(_, g)| !g).count();
            let generic = vs.iter().filter(|(_, g)| *g).count();
            ensure!(specialized <= cap && generic == 1, "{b}: {specialized} specialized, {generic} generic");
            hit = Some((b, vm.distinct_contexts(f, b), specialized));
        }
    }
    let (b, n, s) = hit.ok_or("no block of classify saw 7 contexts")?;
    Ok(format!("{b} of classify saw {n} contexts, kept {s} specialized versions and 1 generic"))
}

fn differential_fuzz() -> Outcome {
    const COUNT: usize = 500;
    const SHARDS: usize = 8;
    let start = Instant::now();
    let failures: Vec<fuzz::Mismatch> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..SHARDS)
            .map(|k| {
                s.spawn(move || {
                    (k..COUNT)
                        .step_by(SHARDS)
                        .filter_map(|i| {
                            let seed = fuzz::program_seed(2024, i);
                            fuzz::check_program(seed, &fuzz::generate(seed)).err()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let took = start.elapsed();
    ensure!(failures.is_empty(), "{} mismatches, first: seed {} {:?} {}", failures.len(), failures[0].seed, failures[0].mode, failures[0].detail);
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!("{COUNT} programs agree in all five modes, baseline counts match, {:.1} s", took.as_secs_f64()))
}

fn matrix_averages() -> Outcome {
    let runs = workload_runs(&Mode::ALL)?;
    let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
    let report = build_report(&runs, &names).map_err(|e| e.to_string())?;
    for m in &names {
        ensure!(report.geomean_proportion.contains_key(*m), "no geomean for {m}");
    }
    let unit = |x: &f64| (0.0..=1.0).contains(x);
    ensure!(report.mean_known_callee_rate.values().all(unit), "known-callee rate outside [0, 1]");
    ensure!(report.mean_return_tag_known_rate.values().all(unit), "return-tag rate outside [0, 1]");
    let rt = report.mean_return_tag_known_rate.get("entry+cont").copied();
    ensure!(rt.is_some(), "no return-tag rate for entry+cont");
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| e.to_string())?;
    ensure!(String::from_utf8_lossy(&csv).lines().count() == corpus::all().count() + 2, "unexpected CSV rows");
    Ok(format!(
        "geomean entry+cont {:.4}, oracle {:.4}; known callee {:.3}; return tag known {:.3}",
        report.geomean_proportion["entry+cont"],
        report.geomean_proportion["oracle"],
        report.mean_known_callee_rate["entry+cont"],
        rt.unwrap()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("tree-sum completes with 502 in every mode", tree_sum_all_modes),
        ("recursive sum tag-test counts", recursive_sum_counts),
        ("tree-sum entry points", tree_sum_entry_points),
        ("mode ladder monotonicity", ladder_monotonicity),
        ("entry+cont beats the oracle on tree-sum", oracle_comparison),
        ("return-type invalidation", invalidation_protocol),
        ("version cap with generic fallback", version_cap),
        ("differential fuzzing", differential_fuzz),
        ("matrix averages reported", matrix_averages),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
