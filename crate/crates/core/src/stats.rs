//! Run statistics and the cross-mode comparison report.
//!
//! A [`StatsReport`] describes one run of one program in one mode. A
//! [`MatrixReport`] relates the runs of many programs to their baseline runs:
//! the remaining tag-test proportion per mode and geometric means over
//! programs.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Zero proportions are clamped to this before taking geometric means.
pub const GEOMEAN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiteTally {
    /// `function.sequence`, as in IR dumps.
    pub site: String,
    pub executed: u64,
    pub taken_true: u64,
    pub taken_false: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub schema_version: u32,
    pub program: String,
    pub mode: String,
    pub dyn_tag_tests: u64,
    pub dyn_shape_tests: u64,
    pub static_tests_eliminated: u64,
    pub overflow_checks: u64,
    /// Versions per executed block: version count → number of blocks.
    pub versions_per_block: BTreeMap<u32, u64>,
    /// Entry points per called function: entry count → number of functions.
    pub entry_points_per_function: BTreeMap<u32, u64>,
    pub continuations_compiled: u64,
    pub continuations_invalidated: u64,
    pub functions_causing_invalidation: u64,
    pub shape_invalidations: u64,
    pub known_callee_calls: u64,
    pub total_calls: u64,
    pub return_tag_known_dynamic: u64,
    pub total_returns: u64,
    pub emitted_instr_count: u64,
    pub compile_events: u64,
    pub dyn_instructions: u64,
    /// Continuations compiled before their callee had compiled any return.
    pub unseen_return_continuations: u64,
    /// Oracle runs only: tag tests of the recording run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_recorded_tag_tests: Option<u64>,
    /// Oracle runs only: sites whose tests were removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_removed_sites: Option<u64>,
    pub tag_test_sites: Vec<SiteTally>,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn known_callee_rate(&self) -> Option<f64> {
        ratio(self.known_callee_calls, self.total_calls)
    }

    pub fn return_tag_known_rate(&self) -> Option<f64> {
        ratio(self.return_tag_known_dynamic, self.total_returns)
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no baseline run for program `{0}`")]
    MissingBaseline(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgramRow {
    pub program: String,
    pub dyn_tag_tests: BTreeMap<String, u64>,
    /// Remaining tag tests relative to the baseline run.
    pub proportion: BTreeMap<String, f64>,
    pub known_callee_rate: BTreeMap<String, f64>,
    pub return_tag_known_rate: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixReport {
    pub schema_version: u32,
    pub modes: Vec<String>,
    pub programs: Vec<ProgramRow>,
    /// Geometric mean of proportions over programs, per mode.
    pub geomean_proportion: BTreeMap<String, f64>,
    /// Arithmetic means over programs that made any call / returned at all.
    pub mean_known_callee_rate: BTreeMap<String, f64>,
    pub mean_return_tag_known_rate: BTreeMap<String, f64>,
}

pub fn geomean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let s: f64 = xs.iter().map(|x| x.max(GEOMEAN_FLOOR).ln()).sum();
    (s / xs.len() as f64).exp()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Builds the comparison report. `modes` fixes the column order; programs
/// keep their first-appearance order.
pub fn build_report(runs: &[StatsReport], modes: &[&str]) -> Result<MatrixReport, ReportError> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.program.as_str()) {
            order.push(&r.program);
        }
    }
    if order.is_empty() {
        return Err(ReportError::MissingBaseline(String::new()));
    }
    let mut rows = Vec::new();
    for prog in order {
        let of = |m: &str| runs.iter().find(|r| r.program == prog && r.mode == m);
        let base = of("baseline").ok_or_else(|| ReportError::MissingBaseline(prog.to_string()))?;
        let mut row = ProgramRow {
            program: prog.to_string(),
            dyn_tag_tests: BTreeMap::new(),
            proportion: BTreeMap::new(),
            known_callee_rate: BTreeMap::new(),
            return_tag_known_rate: BTreeMap::new(),
        };
        for m in modes {
            let Some(r) = of(m) else { continue };
            row.dyn_tag_tests.insert(m.to_string(), r.dyn_tag_tests);
            let p = if base.dyn_tag_tests == 0 {
                if r.dyn_tag_tests == 0 { 1.0 } else { f64::INFINITY }
            } else {
                r.dyn_tag_tests as f64 / base.dyn_tag_tests as f64
            };
            row.proportion.insert(m.to_string(), p);
            if let Some(k) = r.known_callee_rate() {
                row.known_callee_rate.insert(m.to_string(), k);
            }
            if let Some(k) = r.return_tag_known_rate() {
                row.return_tag_known_rate.insert(m.to_string(), k);
            }
        }
        rows.push(row);
    }
    let column = |f: &dyn Fn(&ProgramRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let mut geo = BTreeMap::new();
    let mut kc = BTreeMap::new();
    let mut rt = BTreeMap::new();
    for m in modes {
        let m = m.to_string();
        let ps = column(&|r| r.proportion.get(&m).copied());
        if !ps.is_empty() {
            geo.insert(m.clone(), geomean(&ps));
        }
        if let Some(x) = mean(&column(&|r| r.known_callee_rate.get(&m).copied())) {
            kc.insert(m.clone(), x);
        }
        if let Some(x) = mean(&column(&|r| r.return_tag_known_rate.get(&m).copied())) {
            rt.insert(m.clone(), x);
        }
    }
    Ok(MatrixReport {
        schema_version: SCHEMA_VERSION,
        modes: modes.iter().map(|m| m.to_string()).collect(),
        programs: rows,
        geomean_proportion: geo,
        mean_known_callee_rate: kc,
        mean_return_tag_known_rate: rt,
    })
}

impl MatrixReport {
    /// One row per program plus a final geometric-mean row; one proportion
    /// column per mode.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["program".to_string()];
        header.extend(self.modes.iter().cloned());
        out.write_record(&header)?;
        let cell = |v: Option<&f64>| v.map(|p| format!("{p:.6}")).unwrap_or_default();
        for row in &self.programs {
            let mut rec = vec![row.program.clone()];
            rec.extend(self.modes.iter().map(|m| cell(row.proportion.get(m))));
            out.write_record(&rec)?;
        }
        let mut rec = vec!["geomean".to_string()];
        rec.extend(self.modes.iter().map(|m| cell(self.geomean_proportion.get(m))));
        out.write_record(&rec)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize")
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = write!(s, "{:<20}", "program");
        for m in &self.modes {
            let _ = write!(s, "{m:>12}");
        }
        s.push('\n');
        let mut line = |name: &str, vals: &BTreeMap<String, f64>| {
            let _ = write!(s, "{name:<20}");
            for m in &self.modes {
                match vals.get(m) {
                    Some(p) => {
                        let _ = write!(s, "{p:>12.4}");
                    }
                    None => {
                        let _ = write!(s, "{:>12}", "-");
                    }
                }
            }
            s.push('\n');
        };
        for row in &self.programs {
            line(&row.program, &row.proportion);
        }
        line("geomean", &self.geomean_proportion);
        line("known callee", &self.mean_known_callee_rate);
        line("return tag known", &self.mean_return_tag_known_rate);
        s
    }
}

/// CSV of raw per-run counters, one row per run.
pub fn write_runs_csv<W: io::Write>(runs: &[StatsReport], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "program",
        "mode",
        "dynTagTests",
        "dynShapeTests",
        "staticTestsEliminated",
        "overflowChecks",
        "continuationsCompiled",
        "continuationsInvalidated",
        "knownCalleeCalls",
        "totalCalls",
        "returnTagKnownDynamic",
        "totalReturns",
        "emittedInstrCount",
        "compileEvents",
    ])?;
    for r in runs {
        out.write_record([
            r.program.clone(),
            r.mode.clone(),
            r.dyn_tag_tests.to_string(),
            r.dyn_shape_tests.to_string(),
            r.static_tests_eliminated.to_string(),
            r.overflow_checks.to_string(),
            r.continuations_compiled.to_string(),
            r.continuations_invalidated.to_string(),
            r.known_callee_calls.to_string(),
            r.total_calls.to_string(),
            r.return_tag_known_dynamic.to_string(),
            r.total_returns.to_string(),
            r.emitted_instr_count.to_string(),
            r.compile_events.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(program: &str, mode: &str, tests: u64) -> StatsReport {
        StatsReport {
            schema_version: SCHEMA_VERSION,
            program: program.into(),
            mode: mode.into(),
            dyn_tag_tests: tests,
            ..Default::default()
        }
    }

    #[test]
    fn proportion_relative_to_baseline() {
        let runs = vec![run("p", "baseline", 1000), run("p", "entry+cont", 150)];
        let r = build_report(&runs, &["baseline", "entry+cont"]).unwrap();
        assert_eq!(r.programs[0].proportion["entry+cont"], 0.15);
        assert_eq!(r.programs[0].proportion["baseline"], 1.0);
    }

    #[test]
    fn missing_baseline() {
        assert!(matches!(build_report(&[], &["baseline"]), Err(ReportError::MissingBaseline(_))));
        let runs = vec![run("p", "intra", 3)];
        assert_eq!(build_report(&runs, &["intra"]), Err(ReportError::MissingBaseline("p".into())));
    }

    #[test]
    fn geomean_clamps_zero() {
        assert!((geomean(&[0.0, 1.0]) - GEOMEAN_FLOOR.sqrt()).abs() < 1e-12);
        assert!((geomean(&[0.25, 1.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_has_geomean_row() {
        let runs = vec![run("a", "baseline", 10), run("a", "intra", 5)];
        let r = build_report(&runs, &["baseline", "intra"]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "program,baseline,intra\na,1.000000,0.500000\ngeomean,1.000000,0.500000\n");
    }

    #[test]
    fn json_keys_are_camel_case() {
        let j = run("p", "baseline", 1).to_json();
        for key in ["schemaVersion", "dynTagTests", "versionsPerBlock", "knownCalleeCalls", "returnTagKnownDynamic"] {
            assert!(j.contains(key), "{key}");
        }
    }
}
