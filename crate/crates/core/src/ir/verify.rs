//! Structural checks on lowered functions.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{BlockId, FunctionIR, Inst, Reg};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("{0}: block has no terminator")]
    MissingTerminator(BlockId),
    #[error("{0}: terminator at position {1} is not last")]
    EarlyTerminator(BlockId, usize),
    #[error("{0}: block id does not match its position")]
    MisnumberedBlock(BlockId),
    #[error("{0}: branch to nonexistent block {1}")]
    BadTarget(BlockId, BlockId),
    #[error("entry block {0} has predecessors")]
    EntryHasPredecessors(BlockId),
    #[error("{0}: register {1} out of range")]
    RegisterOutOfRange(BlockId, Reg),
    #[error("{0}: {1} may be read before it is written")]
    UseBeforeDef(BlockId, Reg),
}

/// Returns every violation found; empty means the function is well formed.
pub fn verify(f: &FunctionIR) -> Vec<VerifyError> {
    let mut errs = Vec::new();
    let n = f.blocks.len() as u32;
    for (i, b) in f.blocks.iter().enumerate() {
        if b.id.0 as usize != i {
            errs.push(VerifyError::MisnumberedBlock(b.id));
        }
        match b.insts.last() {
            Some(t) if t.is_terminator() => {}
            _ => errs.push(VerifyError::MissingTerminator(b.id)),
        }
        for (k, inst) in b.insts.iter().enumerate() {
            if inst.is_terminator() && k + 1 != b.insts.len() {
                errs.push(VerifyError::EarlyTerminator(b.id, k));
            }
            for r in inst.uses().into_iter().chain(inst.def()) {
                if r.0 >= f.reg_count {
                    errs.push(VerifyError::RegisterOutOfRange(b.id, r));
                }
            }
            if inst.is_terminator() {
                for s in inst.successors() {
                    if s.0 >= n {
                        errs.push(VerifyError::BadTarget(b.id, s));
                    }
                    if s == f.entry {
                        errs.push(VerifyError::EntryHasPredecessors(f.entry));
                    }
                }
            }
        }
    }
    if !errs.is_empty() {
        return errs;
    }
    errs.extend(definite_assignment(f));
    errs
}

/// Forward must-analysis: on entry only `this` and the parameters are defined.
fn definite_assignment(f: &FunctionIR) -> Vec<VerifyError> {
    let n = f.blocks.len();
    let mut defined_in: Vec<Option<BTreeSet<Reg>>> = vec![None; n];
    defined_in[f.entry.0 as usize] = Some((0..=f.param_count).map(Reg).collect());
    let mut changed = true;
    while changed {
        changed = false;
        for b in &f.blocks {
            let Some(mut cur) = defined_in[b.id.0 as usize].clone() else { continue };
            for inst in b.body() {
                cur.extend(inst.def());
            }
            let term = b.terminator();
            for s in term.successors() {
                let mut out = cur.clone();
                match term {
                    Inst::Overflow { dst, ok, .. } if *ok == s => {
                        out.insert(*dst);
                    }
                    Inst::Call { dst, .. } => {
                        out.insert(*dst);
                    }
                    _ => {}
                }
                let slot = &mut defined_in[s.0 as usize];
                let next = match slot {
                    None => out,
                    Some(old) => old.intersection(&out).copied().collect(),
                };
                if slot.as_ref() != Some(&next) {
                    *slot = Some(next);
                    changed = true;
                }
            }
        }
    }
    let mut errs = Vec::new();
    for b in &f.blocks {
        let Some(mut cur) = defined_in[b.id.0 as usize].clone() else { continue };
        for inst in &b.insts {
            for r in inst.uses() {
                if !cur.contains(&r) {
                    errs.push(VerifyError::UseBeforeDef(b.id, r));
                }
            }
            if !inst.is_terminator() {
                cur.extend(inst.def());
            }
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BasicBlock, ConstVal, FuncId};

    fn func(blocks: Vec<Vec<Inst>>, reg_count: u32) -> FunctionIR {
        FunctionIR {
            id: FuncId(1),
            name: "t".into(),
            param_count: 1,
            blocks: blocks.into_iter().enumerate().map(|(i, insts)| BasicBlock { id: BlockId(i as u32), insts }).collect(),
            entry: BlockId(0),
            reg_count,
            cache_count: 0,
        }
    }

    #[test]
    fn detects_malformed_blocks() {
        let f = func(vec![vec![Inst::Jump { target: BlockId(0) }]], 2);
        assert_eq!(verify(&f), vec![VerifyError::EntryHasPredecessors(BlockId(0))]);
        let f = func(vec![vec![Inst::Const { dst: Reg(1), val: ConstVal::Null }]], 2);
        assert_eq!(verify(&f), vec![VerifyError::MissingTerminator(BlockId(0))]);
        let f = func(vec![vec![Inst::Jump { target: BlockId(7) }]], 2);
        assert_eq!(verify(&f), vec![VerifyError::BadTarget(BlockId(0), BlockId(7))]);
    }

    #[test]
    fn detects_use_before_def_on_one_path() {
        let f = func(
            vec![
                vec![Inst::Branch { cond: Reg(1), if_true: BlockId(1), if_false: BlockId(2) }],
                vec![Inst::Const { dst: Reg(2), val: ConstVal::Int(1) }, Inst::Jump { target: BlockId(2) }],
                vec![Inst::Return { value: Reg(2) }],
            ],
            3,
        );
        assert_eq!(verify(&f), vec![VerifyError::UseBeforeDef(BlockId(2), Reg(2))]);
    }
}
