//! Backward liveness over the block graph.
//!
//! The `dst` of `Overflow` and `Call` is written on the edge into `ok` and
//! `cont` respectively, so it is killed only along that edge.

use std::collections::BTreeSet;

use super::{BlockId, FunctionIR, Inst, Reg};

#[derive(Debug, Clone)]
pub struct Liveness {
    live_in: Vec<Vec<Reg>>,
}

impl Liveness {
    pub fn compute(f: &FunctionIR) -> Liveness {
        let n = f.blocks.len();
        let mut sets: Vec<BTreeSet<Reg>> = vec![BTreeSet::new(); n];
        let mut changed = true;
        while changed {
            changed = false;
            for b in f.blocks.iter().rev() {
                let term = b.terminator();
                let mut live: BTreeSet<Reg> = BTreeSet::new();
                let edge_def = |succ: BlockId| match term {
                    Inst::Overflow { dst, ok, .. } if *ok == succ => Some(*dst),
                    Inst::Call { dst, cont, .. } if *cont == succ => Some(*dst),
                    _ => None,
                };
                for s in term.successors() {
                    let killed = edge_def(s);
                    live.extend(sets[s.0 as usize].iter().copied().filter(|r| Some(*r) != killed));
                }
                live.extend(term.uses());
                for inst in b.body().iter().rev() {
                    if let Some(d) = inst.def() {
                        live.remove(&d);
                    }
                    live.extend(inst.uses());
                }
                let slot = &mut sets[b.id.0 as usize];
                if *slot != live {
                    *slot = live;
                    changed = true;
                }
            }
        }
        Liveness { live_in: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    /// Registers live on entry to `b`, ascending.
    pub fn live_in(&self, b: BlockId) -> &[Reg] {
        &self.live_in[b.0 as usize]
    }

    pub fn is_live_in(&self, b: BlockId, r: Reg) -> bool {
        self.live_in(b).binary_search(&r).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::ir::{lower, FuncId};

    #[test]
    fn entry_needs_only_this_and_params() {
        let src = "function f(a, b) { var x = a + 1; var y; while (x < b) x = x + 1; return x; } f(1, 2);";
        let m = lower(&parse_program("l.js", src).unwrap()).unwrap();
        let f = m.function(FuncId(1));
        let l = Liveness::compute(f);
        assert!(l.live_in(f.entry).iter().all(|r| r.0 <= f.param_count));
    }

    #[test]
    fn call_result_is_live_into_continuation_only() {
        let src = "function g() { return 1; } function f() { var r = g(); return r + 1; } f();";
        let m = lower(&parse_program("l.js", src).unwrap()).unwrap();
        let f = m.function(FuncId(2));
        let l = Liveness::compute(f);
        for b in &f.blocks {
            if let Inst::Call { dst, cont, .. } = b.terminator() {
                assert!(l.is_live_in(*cont, *dst));
                assert!(!l.is_live_in(b.id, *dst));
            }
        }
    }
}
