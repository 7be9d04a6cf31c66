//! Simulated perfect static analysis.
//!
//! A recording run in baseline mode notes every tag-test site's outcomes. The
//! replay runs the same workload again, still unspecialized, but every site
//! that only ever went one way is executed for free. Shape tests and overflow
//! checks are not touched.

use std::collections::{BTreeMap, HashMap};

use crate::bbv::{Config, ExecError, Mode, Vm};
use crate::ir::{Module, SiteId};
use crate::runtime::Clock;
use crate::stats::StatsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteOutcome {
    pub saw_true: bool,
    pub saw_false: bool,
    pub exec_count: u64,
}

impl SiteOutcome {
    /// The single outcome this site ever produced, if it was constant.
    pub fn constant(&self) -> Option<bool> {
        match (self.saw_true, self.saw_false) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

/// Outcomes of every tag-test site executed during a recording run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiteOutcomeTable {
    pub sites: BTreeMap<SiteId, SiteOutcome>,
}

impl SiteOutcomeTable {
    pub fn from_tallies(tallies: &BTreeMap<SiteId, (u64, u64)>) -> SiteOutcomeTable {
        let sites = tallies
            .iter()
            .filter(|(_, (t, f))| t + f > 0)
            .map(|(s, &(t, f))| (*s, SiteOutcome { saw_true: t > 0, saw_false: f > 0, exec_count: t + f }))
            .collect();
        SiteOutcomeTable { sites }
    }

    pub fn get(&self, site: SiteId) -> Option<&SiteOutcome> {
        self.sites.get(&site)
    }

    /// Sites the replay may skip, with their fixed outcome.
    pub fn constant_sites(&self) -> HashMap<SiteId, bool> {
        self.sites.iter().filter_map(|(s, o)| o.constant().map(|c| (*s, c))).collect()
    }

    pub fn recorded_tests(&self) -> u64 {
        self.sites.values().map(|o| o.exec_count).sum()
    }
}

/// Result of a record-then-replay pair.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub table: SiteOutcomeTable,
    /// Stats of the replay, in mode `oracle`, with the recorded count filled in.
    pub report: StatsReport,
    pub output: String,
    pub recorded_output: String,
}

/// Runs the recording pass in baseline mode.
pub fn record_outcomes<F>(module: &Module, template: &Config, clock: Clock, drive: F) -> Result<(SiteOutcomeTable, String), ExecError>
where
    F: FnOnce(&mut Vm<'_>) -> Result<(), ExecError>,
{
    let cfg = Config { mode: Mode::Baseline, clock, ..template.clone() };
    let mut vm = Vm::new(module, cfg);
    drive(&mut vm)?;
    Ok((SiteOutcomeTable::from_tallies(vm.site_outcomes()), vm.take_output()))
}

/// Replays the workload with constant sites removed.
pub fn rerun_removed<F>(
    module: &Module,
    template: &Config,
    clock: Clock,
    table: &SiteOutcomeTable,
    program: &str,
    drive: F,
) -> Result<(StatsReport, String), ExecError>
where
    F: FnOnce(&mut Vm<'_>) -> Result<(), ExecError>,
{
    let cfg = Config { mode: Mode::Oracle, clock, ..template.clone() };
    let mut vm = Vm::new(module, cfg);
    let free = table.constant_sites();
    let removed = free.len() as u64;
    vm.set_free_sites(free);
    drive(&mut vm)?;
    let mut report = vm.stats(program);
    report.oracle_recorded_tag_tests = Some(table.recorded_tests());
    report.oracle_removed_sites = Some(removed);
    Ok((report, vm.take_output()))
}

/// Record and replay under a deterministic clock.
pub fn run_oracle<F>(module: &Module, template: &Config, program: &str, drive: F) -> Result<OracleRun, ExecError>
where
    F: Fn(&mut Vm<'_>) -> Result<(), ExecError>,
{
    let (table, recorded_output) = record_outcomes(module, template, Clock::fixed(), &drive)?;
    let (report, output) = rerun_removed(module, template, Clock::fixed(), &table, program, &drive)?;
    Ok(OracleRun { table, report, output, recorded_output })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile;

    fn main_only(vm: &mut Vm<'_>) -> Result<(), ExecError> {
        vm.run_main()
    }

    #[test]
    fn monomorphic_program_has_nothing_left() {
        let m = compile("f.js", "function f(n) { if (n == 0) return 0; else return n + f(n-1); }\nprint(f(10));\n").unwrap();
        let run = run_oracle(&m, &Config::new(Mode::Oracle), "f.js", main_only).unwrap();
        assert_eq!(run.report.dyn_tag_tests, 0);
        assert_eq!(run.output, "55\n");
        assert_eq!(run.output, run.recorded_output);
        assert!(run.table.sites.values().all(|o| o.constant().is_some()));
        assert_eq!(run.report.oracle_recorded_tag_tests, Some(41));
    }

    #[test]
    fn unexecuted_sites_are_absent() {
        let m = compile("u.js", "var x = 1;\nif (x == 2) print(x + 1);\n").unwrap();
        let (table, _) = record_outcomes(&m, &Config::new(Mode::Baseline), Clock::fixed(), main_only).unwrap();
        let all = m.functions[0].tag_test_sites().len();
        assert!(table.sites.len() < all);
    }

    #[test]
    fn clock_dependent_branch_is_a_determinism_violation() {
        let src = "var t = clock();\nvar v = 1;\nif (t > 0.5) v = 1.5;\nprint(v + 1);\n";
        let m = compile("c.js", src).unwrap();
        let cfg = Config::new(Mode::Oracle);
        let (table, _) = record_outcomes(&m, &cfg, Clock::fixed(), main_only).unwrap();
        let late = Clock::Fixed { next: 1.0, step: 1.0 };
        let err = rerun_removed(&m, &cfg, late, &table, "c.js", main_only).unwrap_err();
        assert!(matches!(err, ExecError::DeterminismViolation { .. }), "{err}");
    }
}
