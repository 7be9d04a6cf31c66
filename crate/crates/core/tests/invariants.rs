use bbv_core::bbv::{Config, Mode, Vm};
use bbv_core::ir::BlockId;
use bbv_core::oracle::run_oracle;
use bbv_core::runtime::Clock;
use bbv_core::stats::{build_report, geomean, GEOMEAN_FLOOR};
use bbv_core::{compile, fuzz};
use proptest::prelude::*;

fn config(mode: Mode) -> Config {
    Config { validate: true, clock: Clock::fixed(), ..Config::new(mode) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vm_agrees_with_reference(seed in any::<u64>()) {
        let src = fuzz::generate(seed);
        if let Err(m) = fuzz::check_program(seed, &src) {
            prop_assert!(false, "{:?}: {}\n{}", m.mode, m.detail, m.source);
        }
    }

    #[test]
    fn counters_are_consistent(seed in any::<u64>(), mode in prop::sample::select(Mode::LADDER.to_vec())) {
        let m = compile("p.js", &fuzz::generate(seed)).unwrap();
        let mut vm = Vm::new(&m, config(mode));
        vm.run_main().unwrap();
        let s = vm.stats("p.js");
        prop_assert!(s.known_callee_calls <= s.total_calls);
        prop_assert!(s.return_tag_known_dynamic <= s.total_returns);
        prop_assert_eq!(s.tag_test_sites.iter().map(|t| t.executed).sum::<u64>(), s.dyn_tag_tests);
        for t in &s.tag_test_sites {
            prop_assert_eq!(t.taken_true + t.taken_false, t.executed);
        }
        prop_assert!(s.compile_events - s.continuations_compiled <= vm.validated_entries());
    }

    #[test]
    fn version_caps_hold(seed in any::<u64>(), maxvers in 1usize..=5, maxentries in 1usize..=5) {
        let m = compile("p.js", &fuzz::generate(seed)).unwrap();
        let mut cfg = config(Mode::EntryCont);
        cfg.limits.maxvers = maxvers;
        cfg.limits.maxentries = maxentries;
        let mut vm = Vm::new(&m, cfg);
        vm.run_main().unwrap();
        for f in &m.functions {
            for b in 0..f.blocks.len() as u32 {
                let vs = vm.block_versions(f.id, BlockId(b));
                let cap = if BlockId(b) == f.entry { maxentries } else { maxvers };
                prop_assert!(vs.iter().filter(|(_, g)| !g).count() <= cap);
                prop_assert!(vs.iter().filter(|(_, g)| *g).count() <= 1);
            }
        }
    }

    #[test]
    fn oracle_never_adds_tests_or_changes_output(seed in any::<u64>()) {
        let m = compile("p.js", &fuzz::generate(seed)).unwrap();
        let mut base = Vm::new(&m, config(Mode::Baseline));
        base.run_main().unwrap();
        let run = run_oracle(&m, &config(Mode::Oracle), "p.js", |vm| vm.run_main()).unwrap();
        prop_assert_eq!(&run.output, base.output());
        prop_assert!(run.report.dyn_tag_tests <= base.stats("p.js").dyn_tag_tests);
        prop_assert_eq!(run.report.oracle_recorded_tag_tests, Some(base.stats("p.js").dyn_tag_tests));
    }

    #[test]
    fn geomean_lies_between_clamped_extremes(xs in prop::collection::vec(0.0f64..4.0, 1..20)) {
        let g = geomean(&xs);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min).max(GEOMEAN_FLOOR);
        let hi = xs.iter().cloned().fold(0.0, f64::max).max(GEOMEAN_FLOOR);
        prop_assert!(g >= lo * (1.0 - 1e-9) && g <= hi * (1.0 + 1e-9));
    }
}

#[test]
fn report_proportions_are_relative_to_baseline() {
    let m = compile("f.js", "function f(n) { if (n == 0) return 0; else return n + f(n-1); }\nprint(f(20));\n").unwrap();
    let runs: Vec<_> = Mode::LADDER
        .iter()
        .map(|mode| {
            let mut vm = Vm::new(&m, config(*mode));
            vm.run_main().unwrap();
            vm.stats("f.js")
        })
        .collect();
    let names: Vec<&str> = Mode::LADDER.iter().map(|m| m.name()).collect();
    let r = build_report(&runs, &names).unwrap();
    let row = &r.programs[0];
    assert_eq!(row.proportion["baseline"], 1.0);
    assert_eq!(row.proportion["intra"], runs[1].dyn_tag_tests as f64 / runs[0].dyn_tag_tests as f64);
    assert!(build_report(&runs[1..], &names).is_err());
}
