//! Specialization of one block version under its entry context.

use crate::ir::{FuncId, Inst, Reg};
use crate::shapes::ShapeId;
use crate::typesys::{TypeContext, TypeTag};

use super::{Code, ContRecord, ContState, ExecError, Link, Op, Term, VersionId, Vm};

/// Tags precise enough to put in a shape's property table.
fn exact(tag: TypeTag) -> bool {
    !matches!(tag, TypeTag::Unknown | TypeTag::ClosureUnknown)
}

impl Vm<'_> {
    pub(super) fn compile(&mut self, v: VersionId) -> Result<Code, ExecError> {
        let (f, b) = (self.versions[v].func, self.versions[v].block);
        let mut ctx = self.versions[v].ctx.clone();
        let block = self.module.function(f).block(b);
        let mut ops = Vec::with_capacity(block.insts.len());
        for inst in block.body() {
            self.compile_inst(inst, &mut ctx, &mut ops);
        }
        let term = self.compile_term(f, block.terminator(), ctx)?;
        self.n.emitted_instr_count += ops.len() as u64 + 1;
        self.n.compile_events += 1;
        Ok(Code { ops, term })
    }

    fn compile_inst(&mut self, inst: &Inst, ctx: &mut TypeContext, ops: &mut Vec<Op>) {
        use Inst::*;
        let mode = self.cfg.mode;
        if !mode.propagates() {
            ops.push(Op::Inst(inst.clone()));
            return;
        }
        let shapes = mode.shapes();
        match inst {
            ReadProp { dst, obj, name, .. } => {
                if let Some(s) = ctx.shape(*obj).filter(|_| shapes) {
                    match self.heap.shapes.lookup(s, name) {
                        Some((slot, tag)) => {
                            ops.push(Op::ReadSlot { dst: *dst, obj: *obj, slot });
                            ctx.set(*dst, tag, None);
                        }
                        None => {
                            let val = crate::ir::ConstVal::Undefined;
                            ops.push(Op::Inst(Const { dst: *dst, val }));
                            ctx.set(*dst, TypeTag::Const, None);
                        }
                    }
                    return;
                }
                ops.push(Op::Inst(inst.clone()));
                ctx.forget(*dst);
                return;
            }
            WriteProp { obj, name, val, .. } | InitProp { obj, name, val } => {
                self.compile_write(*obj, name, *val, ctx, ops, false);
                return;
            }
            SetPropGeneric { obj, name, val } => {
                self.compile_write(*obj, name, *val, ctx, ops, true);
                return;
            }
            _ => {}
        }
        ops.push(Op::Inst(inst.clone()));
        let Some(dst) = inst.def() else { return };
        let (tag, shape) = match inst {
            Const { val, .. } => (val.kind().tag(), None),
            MakeClosure { func, .. } => (TypeTag::ClosureKnown(*func), None),
            Move { src, .. } => match ctx.get(*src) {
                Some(k) => (k.tag, k.shape),
                None => (TypeTag::Unknown, None),
            },
            IntMod { .. } | ArrayLen { .. } | StrLen { .. } => (TypeTag::Int32, None),
            I32ToF64 { .. } | FloatArith { .. } | FloatNeg { .. } => (TypeTag::Float64, None),
            CmpI32 { .. }
            | CmpF64 { .. }
            | StrEq { .. }
            | RefEq { .. }
            | Not { .. }
            | ConstTruthy { .. }
            | IntTruthy { .. }
            | FloatTruthy { .. }
            | StrNonEmpty { .. } => (TypeTag::Const, None),
            StrConcat { .. } => (TypeTag::String, None),
            AllocObject { .. } => (TypeTag::Object, shapes.then(|| self.heap.shapes.root())),
            AllocArray { .. } => (TypeTag::Array, None),
            Builtin { which, .. } => (which.result_kind().tag(), None),
            GetGlobal { global, .. } => {
                let g = global.0 as usize;
                if shapes && self.module.globals[g].single_assign && self.global_init[g] {
                    (self.globals[g].tag(), None)
                } else {
                    (TypeTag::Unknown, None)
                }
            }
            _ => (TypeTag::Unknown, None),
        };
        ctx.set(dst, tag, shape);
    }

    fn compile_write(
        &mut self,
        obj: Reg,
        name: &std::rc::Rc<str>,
        val: Reg,
        ctx: &mut TypeContext,
        ops: &mut Vec<Op>,
        force_dyn: bool,
    ) {
        let known = ctx.shape(obj).filter(|_| self.cfg.mode.shapes() && !force_dyn);
        let vt = ctx.tag(val);
        if let Some(s) = known.filter(|_| exact(vt)) {
            let table = &mut self.heap.shapes;
            let (slot, to) = match table.lookup(s, name) {
                Some((slot, t)) if t == vt => (slot, s),
                Some((slot, _)) => (slot, table.update_property_type(s, name, vt).expect("property exists")),
                None => (table.count(s), table.define_property(s, name, vt).expect("property is new")),
            };
            ops.push(Op::WriteSlot { obj, slot, val, to });
            if to != s {
                ctx.drop_shapes_where(|r, sh| sh == s && r != obj);
                ctx.set(obj, TypeTag::Object, Some(to));
            }
            return;
        }
        ops.push(Op::WriteDyn { obj, name: name.clone(), val });
        let known = ctx.shape(obj);
        match known {
            Some(s) => ctx.drop_shapes_where(|_, sh| sh == s),
            None => ctx.drop_shapes_where(|_, _: ShapeId| true),
        }
    }

    fn compile_term(&mut self, f: FuncId, inst: &Inst, mut ctx: TypeContext) -> Result<Term, ExecError> {
        let mode = self.cfg.mode;
        let p = mode.propagates();
        let link = |b, ctx: &TypeContext| Link::new(b, ctx.clone());
        Ok(match inst {
            Inst::Jump { target } => Term::Goto(link(*target, &ctx)),
            Inst::Branch { cond, if_true, if_false } => {
                Term::Branch { cond: *cond, t: link(*if_true, &ctx), f: link(*if_false, &ctx) }
            }
            Inst::TagTest { site, value, kind, if_true, if_false } => {
                if let Some(k) = ctx.tag(*value).kind().filter(|_| p) {
                    self.n.static_tests_eliminated += 1;
                    return Ok(Term::Goto(link(if k == *kind { *if_true } else { *if_false }, &ctx)));
                }
                let fl = link(*if_false, &ctx);
                if p {
                    ctx.set(*value, kind.tag(), None);
                }
                Term::TagTest { site: *site, value: *value, kind: *kind, t: link(*if_true, &ctx), f: fl }
            }
            Inst::ShapeTest { site, value, cache, if_true, if_false } => {
                if let Some(s) = ctx.shape(*value).filter(|_| mode.shapes()) {
                    let slot = &mut self.funcs[f.0 as usize].caches[cache.0 as usize];
                    let hit = *slot.get_or_insert(s) == s;
                    return Ok(Term::Goto(link(if hit { *if_true } else { *if_false }, &ctx)));
                }
                Term::ShapeTest {
                    site: *site,
                    value: *value,
                    cache: *cache,
                    refine: mode.shapes(),
                    t: link(*if_true, &ctx),
                    f: link(*if_false, &ctx),
                }
            }
            Inst::Overflow { op, dst, a, b, ok, ovf } => {
                let ovf_link = link(*ovf, &ctx);
                if p {
                    ctx.set(*dst, TypeTag::Int32, None);
                }
                Term::Overflow { op: *op, dst: *dst, a: *a, b: *b, ok: link(*ok, &ctx), ovf: ovf_link }
            }
            Inst::Call { callee, this, args, dst, cont, .. } => {
                let known = match ctx.tag(*callee) {
                    TypeTag::ClosureKnown(g) if p => Some(g),
                    _ => None,
                };
                let entry = known.filter(|_| mode.entry_points()).map(|g| {
                    let ir = self.module.function(g);
                    let keep_shapes = self.cfg.entry_shapes && mode.shapes();
                    let mut e = TypeContext::new();
                    let put = |e: &mut TypeContext, to: Reg, from: Reg| {
                        if let Some(k) = ctx.get(from) {
                            e.set(to, k.tag, k.shape.filter(|_| keep_shapes));
                        }
                    };
                    put(&mut e, Reg(0), *this);
                    for i in 0..ir.param_count {
                        match args.get(i as usize) {
                            Some(a) => put(&mut e, Reg(i + 1), *a),
                            None => e.set(Reg(i + 1), TypeTag::Const, None),
                        }
                    }
                    Link::new(ir.entry, e)
                });
                let mut base = if p { ctx.clone() } else { TypeContext::new() };
                base.forget(*dst);
                let cid = self.conts.len();
                self.conts.push(ContRecord { func: f, block: *cont, base, dst: *dst, callee: known, state: ContState::Stub });
                Term::Call { callee: *callee, this: *this, args: args.clone(), cont: cid, known: known.is_some(), entry }
            }
            Inst::Return { value } => {
                if mode.continuations() && f.0 != 0 {
                    self.record_return_type(f, ctx.tag(*value));
                }
                Term::Return { value: *value }
            }
            Inst::Throw { value } => Term::Throw { value: *value },
            Inst::Halt { reason } => Term::Halt(reason.into()),
            other => return Err(ExecError::Internal(format!("not a terminator: {other}"))),
        })
    }
}
