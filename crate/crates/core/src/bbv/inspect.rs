//! Read-only views of the compiled version graph.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::ir::{BlockId, FuncId, SiteId};
use crate::typesys::TypeContext;

use super::{ContState, Link, Term, Vm};

/// What one entry point's compiled code still checks at run time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntrySummary {
    pub ctx: TypeContext,
    pub generic: bool,
    /// Runtime tag tests left in code reachable from this entry.
    pub tag_tests: usize,
    /// Distinct shape-test sites left in that code.
    pub shape_test_sites: BTreeSet<SiteId>,
}

impl Vm<'_> {
    /// Versions of `block` in creation order, with their contexts.
    pub fn block_versions(&self, f: FuncId, block: BlockId) -> Vec<(TypeContext, bool)> {
        self.funcs[f.0 as usize].blocks[block.0 as usize]
            .versions
            .iter()
            .map(|&v| (self.versions[v].ctx.clone(), self.versions[v].generic))
            .collect()
    }

    /// Distinct non-empty contexts ever requested for `block`.
    pub fn distinct_contexts(&self, f: FuncId, block: BlockId) -> usize {
        self.funcs[f.0 as usize].blocks[block.0 as usize].distinct.len()
    }

    /// One summary per entry version of `f`, following resolved links and
    /// compiled continuations inside `f`.
    pub fn entry_summaries(&self, f: FuncId) -> Vec<EntrySummary> {
        let entry = self.module.function(f).entry;
        self.funcs[f.0 as usize].blocks[entry.0 as usize]
            .versions
            .iter()
            .map(|&root| {
                let mut seen = BTreeSet::new();
                let mut stack = vec![root];
                let mut tag_tests = 0;
                let mut shape_test_sites = BTreeSet::new();
                while let Some(v) = stack.pop() {
                    if !seen.insert(v) {
                        continue;
                    }
                    let Some(code) = &self.versions[v].code else { continue };
                    let mut follow = |l: &Link| stack.extend(l.target.get());
                    match &code.term {
                        Term::Goto(l) => follow(l),
                        Term::Branch { t, f, .. } => {
                            follow(t);
                            follow(f);
                        }
                        Term::TagTest { t, f, .. } => {
                            tag_tests += 1;
                            follow(t);
                            follow(f);
                        }
                        Term::ShapeTest { site, t, f, .. } => {
                            shape_test_sites.insert(*site);
                            follow(t);
                            follow(f);
                        }
                        Term::Overflow { ok, ovf, .. } => {
                            follow(ok);
                            follow(ovf);
                        }
                        Term::Call { cont, .. } => {
                            if let ContState::Compiled { version, .. } = self.conts[*cont].state {
                                stack.push(version);
                            }
                        }
                        Term::Return { .. } | Term::Throw { .. } | Term::Halt(_) => {}
                    }
                }
                EntrySummary {
                    ctx: self.versions[root].ctx.clone(),
                    generic: self.versions[root].generic,
                    tag_tests,
                    shape_test_sites,
                }
            })
            .collect()
    }

    /// Human-readable listing of every compiled block version.
    pub fn dump_versions(&self) -> String {
        let mut out = String::new();
        for (fi, fs) in self.funcs.iter().enumerate() {
            let ir = &self.module.functions[fi];
            if fs.blocks.iter().all(|b| b.versions.is_empty()) {
                continue;
            }
            let _ = writeln!(out, "function {} {} (return: {:?})", ir.id, ir.name, fs.ret);
            for s in self.entry_summaries(ir.id) {
                let _ = writeln!(
                    out,
                    "  entry {}{}: {} tag tests, {} shape-test sites",
                    s.ctx,
                    if s.generic { " generic" } else { "" },
                    s.tag_tests,
                    s.shape_test_sites.len()
                );
            }
            for (bi, b) in fs.blocks.iter().enumerate() {
                if b.versions.is_empty() {
                    continue;
                }
                let _ = writeln!(
                    out,
                    "  b{bi}: {} versions, {} distinct contexts requested",
                    b.versions.len(),
                    b.distinct.len()
                );
                for &v in &b.versions {
                    let ver = &self.versions[v];
                    let state = if ver.code.is_some() { "" } else { " (stub)" };
                    let _ = writeln!(out, "    v{v} {}{}{state}", ver.ctx, if ver.generic { " generic" } else { "" });
                }
            }
        }
        out
    }
}
