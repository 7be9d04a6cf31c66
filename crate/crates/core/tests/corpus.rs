use bbv_core::bbv::{Config, Mode, Vm};
use bbv_core::runtime::Clock;
use bbv_core::{compile, corpus, refinterp};

#[test]
fn corpus_matches_reference_interpreter() {
    for (name, src) in corpus::all() {
        let m = compile(name, src).unwrap();
        let bench = m.global_id("benchmarkRun").is_some() as usize;
        let reference = refinterp::interpret(name, src, bench).unwrap();
        assert_eq!(reference.result, Ok(()), "{name}");
        for mode in Mode::LADDER {
            let mut vm = Vm::new(&m, Config { validate: true, clock: Clock::fixed(), ..Config::new(mode) });
            vm.run_main().unwrap();
            if bench == 1 {
                vm.call_global("benchmarkRun").unwrap();
            }
            assert_eq!(vm.output(), reference.output, "{name} in {mode}");
            if mode == Mode::Baseline {
                assert_eq!(vm.stats(name).dyn_tag_tests, reference.implicit_tests, "{name}");
            }
        }
    }
}

#[test]
fn every_program_but_f_and_accum_has_a_benchmark() {
    for (name, src) in corpus::all() {
        let m = compile(name, src).unwrap();
        let has = m.global_id("benchmarkRun").is_some();
        assert_eq!(has, !matches!(name, "f.js" | "accum.js"), "{name}");
    }
}
