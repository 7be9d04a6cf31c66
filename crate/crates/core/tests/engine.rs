use bbv_core::bbv::{Config, Mode, ReturnState, Vm};
use bbv_core::ir::{BlockId, Module};
use bbv_core::runtime::Clock;
use bbv_core::stats::StatsReport;
use bbv_core::typesys::TypeTag;
use bbv_core::{compile, corpus};

fn module(name: &str) -> Module {
    compile(name, corpus::get(name).expect("corpus program")).unwrap()
}

fn config(mode: Mode) -> Config {
    Config { validate: true, clock: Clock::fixed(), ..Config::new(mode) }
}

fn run(m: &Module, mode: Mode) -> (String, StatsReport) {
    let mut vm = Vm::new(m, config(mode));
    vm.run_main().unwrap();
    vm.call_global("benchmarkRun").unwrap();
    (vm.output().to_string(), vm.stats(&m.path))
}

fn recursive_sum(n: i32) -> Module {
    let src = format!(
        "function f(n) {{ if (n == 0) return 0; else return n + f(n-1); }}\nprint(f({n}));\n"
    );
    compile("f.js", &src).unwrap()
}

#[test]
fn recursive_sum_tag_tests_per_mode() {
    let n = 100;
    let m = recursive_sum(n);
    let tests = |mode| {
        let (out, s) = run(&m, mode);
        assert_eq!(out, "5050\n");
        s.dyn_tag_tests
    };
    let n = n as u64;
    assert_eq!(tests(Mode::Baseline), 4 * n + 1);
    assert_eq!(tests(Mode::Intra), 2 * n + 1);
    assert!(tests(Mode::Entry) <= n + 1);
    assert_eq!(tests(Mode::EntryCont), 0);
}

#[test]
fn tree_sum_entry_points() {
    let m = module("tree-sum.js");
    let mut vm = Vm::new(&m, config(Mode::EntryCont));
    vm.run_main().unwrap();
    let sum = m.function_named("sum").unwrap();
    let entries = vm.entry_summaries(sum);
    let tags: Vec<TypeTag> = entries.iter().map(|e| e.ctx.tag(bbv_core::ir::Reg(1))).collect();
    assert_eq!(entries.len(), 2, "{}", vm.dump_versions());
    assert!(tags.contains(&TypeTag::Object) && tags.contains(&TypeTag::Null), "{tags:?}");
    let obj = entries.iter().find(|e| e.ctx.tag(bbv_core::ir::Reg(1)) == TypeTag::Object).unwrap();
    assert_eq!(obj.tag_tests, 0, "{}", vm.dump_versions());
    assert_eq!(obj.shape_test_sites.len(), 2, "{}", vm.dump_versions());
}

#[test]
fn make_tree_return_type_is_invalidated() {
    let m = module("tree-sum.js");
    let (_, s) = run(&m, Mode::EntryCont);
    assert!(s.continuations_invalidated >= 1);
    assert_eq!(s.functions_causing_invalidation, 1);
    let mut vm = Vm::new(&m, config(Mode::EntryCont));
    vm.run_main().unwrap();
    vm.call_global("benchmarkRun").unwrap();
    assert_eq!(vm.return_state(m.function_named("makeTree").unwrap()), ReturnState::Unknown);
    assert_eq!(vm.return_state(m.function_named("sum").unwrap()), ReturnState::Known(TypeTag::Int32));
}

#[test]
fn every_corpus_program_agrees_across_modes() {
    for (name, _) in corpus::all() {
        let m = module(name);
        let (expected, base) = run(&m, Mode::Baseline);
        for mode in Mode::LADDER {
            let (out, s) = run(&m, mode);
            assert_eq!(out, expected, "{name} in {mode}");
            assert!(s.dyn_tag_tests <= base.dyn_tag_tests, "{name} in {mode}");
            let per_site: u64 = s.tag_test_sites.iter().map(|t| t.executed).sum();
            assert_eq!(per_site, s.dyn_tag_tests);
        }
    }
}

#[test]
fn versions_respect_caps() {
    let m = module("megamorphic.js");
    let mut cfg = config(Mode::EntryCont);
    cfg.limits.maxvers = 2;
    let mut vm = Vm::new(&m, cfg);
    vm.run_main().unwrap();
    vm.call_global("benchmarkRun").unwrap();
    for f in &m.functions {
        for b in 0..f.blocks.len() {
            let vs = vm.block_versions(f.id, BlockId(b as u32));
            let specialized = vs.iter().filter(|(_, g)| !g).count();
            let cap = if BlockId(b as u32) == f.entry { 5 } else { 2 };
            assert!(specialized <= cap);
            assert!(vs.iter().filter(|(_, g)| *g).count() <= 1);
        }
    }
}

fn tag_tests_with_cap(m: &Module, mode: Mode, maxvers: usize) -> u64 {
    let mut cfg = config(mode);
    cfg.limits.maxvers = maxvers;
    let mut vm = Vm::new(m, cfg);
    vm.run_main().unwrap();
    vm.stats(&m.path).dyn_tag_tests
}

/// Bodies built from a mix of int and float literals get several shapes, so
/// shape-keyed loop headers run out of versions at the default cap.
#[test]
fn shape_polymorphism_exhausts_the_default_cap() {
    let m = compile("nbody-mixed.js", include_str!("programs/nbody-mixed.js")).unwrap();
    let intra = tag_tests_with_cap(&m, Mode::Intra, 5);
    assert!(tag_tests_with_cap(&m, Mode::Shapes, 5) > intra);
    assert!(tag_tests_with_cap(&m, Mode::Shapes, 8) < intra);
}
