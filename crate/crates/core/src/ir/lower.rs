//! AST to IR lowering.
//!
//! Every polymorphic operator expands to the tag-test cascade of its
//! [`dispatch`](super::dispatch) plan, every property access to a shape-test
//! cascade of [`SHAPE_CACHE_SLOTS`] cache slots followed by a by-name lookup.
//!
//! Register layout per function: `r0` is `this`, `r1..=rN` the parameters,
//! then hoisted `var` locals, then temporaries. Reading a local yields its
//! register directly, so a tag test on the expression refines the variable.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use super::dispatch::{self, Leaf, Operand, Plan, Truth};
use super::*;
use crate::frontend::analysis::{self, Builtin, GlobalTable};
use crate::frontend::ast::{self, BinOp, Expr, ExprKind, LogicalOp, Program, Span, Stmt, StmtKind, UnOp};
use crate::typesys::TagKind;

/// Cache slots per property access before falling back to a by-name lookup.
pub const SHAPE_CACHE_SLOTS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("{}:{}: unresolved identifier `{name}`", span.line, span.col)]
    Unresolved { name: String, span: Span },
    #[error("{}:{}: `this` outside a function", span.line, span.col)]
    ThisOutsideFunction { span: Span },
    #[error("{}:{}: nested function declaration `{name}` (use a function expression)", span.line, span.col)]
    NestedFunctionDecl { name: String, span: Span },
    #[error("{}:{}: function captures enclosing local `{name}`", span.line, span.col)]
    CapturedVariable { name: String, span: Span },
    #[error("{}:{}: builtin `{name}` can only be called directly", span.line, span.col)]
    BuiltinAsValue { name: String, span: Span },
    #[error("{}:{}: invalid assignment target", span.line, span.col)]
    InvalidTarget { span: Span },
}

type LResult<T> = Result<T, LowerError>;

/// Lowers a parsed program to a module.
pub fn lower(program: &Program) -> LResult<Module> {
    let globals = analysis::analyze_globals(program);
    let mut out: Vec<Option<FunctionIR>> = vec![None; program.functions.len() + 1];
    let shared = Shared { program, globals: &globals };

    let mut main = FnLower::new(&shared, FuncId(0), "main".into(), None, Vec::new(), &[], Vec::new());
    main.lower_main(&program.body, &mut out)?;
    out[0] = Some(main.finish());

    let functions = out
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.unwrap_or_else(|| panic!("function {i} was never lowered")))
        .collect();
    Ok(Module {
        path: program.path.clone(),
        functions,
        globals: globals
            .globals
            .iter()
            .map(|g| GlobalDecl { name: g.name.clone(), single_assign: g.single_assign })
            .collect(),
    })
}

struct Shared<'a> {
    program: &'a Program,
    globals: &'a GlobalTable,
}

enum Resolved {
    Local(Reg),
    SelfClosure(FuncId),
    ConstFunction(FuncId),
    Global(GlobalId),
    Builtin(Builtin),
}

struct FnLower<'a> {
    shared: &'a Shared<'a>,
    id: FuncId,
    name: String,
    self_name: Option<String>,
    params: u32,
    blocks: Vec<Vec<Inst>>,
    cur: Option<BlockId>,
    reg_count: u32,
    locals: HashMap<String, Reg>,
    local_names: Vec<String>,
    /// Locals of lexically enclosing functions, for capture detection.
    outer: Vec<String>,
    seq: u32,
    cache_count: u32,
}

fn assigns_local(e: &Expr, name: &str) -> bool {
    let mut hit = false;
    ast::walk_expr(e, &mut |x| {
        if let ExprKind::Assign { target, .. } = &x.kind {
            if matches!(&target.kind, ExprKind::Ident(n) if n == name) {
                hit = true;
            }
        }
    });
    hit
}

impl<'a> FnLower<'a> {
    fn new(
        shared: &'a Shared<'a>,
        id: FuncId,
        name: String,
        self_name: Option<String>,
        params: Vec<String>,
        body: &[Stmt],
        outer: Vec<String>,
    ) -> Self {
        let mut locals = HashMap::new();
        let mut local_names = Vec::new();
        let mut reg_count = 1;
        let is_main = id.0 == 0;
        if !is_main {
            for p in &params {
                locals.insert(p.clone(), Reg(reg_count));
                local_names.push(p.clone());
                reg_count += 1;
            }
            for v in analysis::var_names(body) {
                if !locals.contains_key(&v) {
                    locals.insert(v.clone(), Reg(reg_count));
                    local_names.push(v);
                    reg_count += 1;
                }
            }
        }
        FnLower {
            shared,
            id,
            name,
            self_name,
            params: params.len() as u32,
            blocks: Vec::new(),
            cur: None,
            reg_count,
            locals,
            local_names,
            outer,
            seq: 0,
            cache_count: 0,
        }
    }

    fn finish(mut self) -> FunctionIR {
        if self.cur.is_some() {
            let u = self.temp();
            self.emit(Inst::Const { dst: u, val: ConstVal::Undefined });
            self.terminate(Inst::Return { value: u });
        }
        thread_jumps(&mut self.blocks);
        let blocks = self
            .blocks
            .into_iter()
            .enumerate()
            .map(|(i, insts)| BasicBlock { id: BlockId(i as u32), insts })
            .collect();
        FunctionIR {
            id: self.id,
            name: self.name,
            param_count: self.params,
            blocks,
            entry: BlockId(0),
            reg_count: self.reg_count,
            cache_count: self.cache_count,
        }
    }

    // ----- block plumbing -------------------------------------------------

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(Vec::new());
        BlockId(self.blocks.len() as u32 - 1)
    }

    fn switch_to(&mut self, b: BlockId) {
        debug_assert!(self.cur.is_none(), "switching away from an open block");
        self.cur = Some(b);
    }

    /// Makes sure there is an open block, starting an unreachable one after
    /// a terminator.
    fn ensure_open(&mut self) -> BlockId {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.cur = Some(b);
                b
            }
        }
    }

    fn emit(&mut self, inst: Inst) {
        debug_assert!(!inst.is_terminator());
        let b = self.ensure_open();
        self.blocks[b.0 as usize].push(inst);
    }

    fn terminate(&mut self, inst: Inst) {
        debug_assert!(inst.is_terminator());
        let b = self.ensure_open();
        self.blocks[b.0 as usize].push(inst);
        self.cur = None;
    }

    fn jump_to(&mut self, target: BlockId) {
        if self.cur.is_some() {
            self.terminate(Inst::Jump { target });
        }
    }

    /// Ends the current block and continues in a fresh one, so that lazy
    /// compilation of what follows happens only after this point has run.
    fn split(&mut self) {
        let next = self.new_block();
        self.jump_to(next);
        self.switch_to(next);
    }

    fn temp(&mut self) -> Reg {
        let r = Reg(self.reg_count);
        self.reg_count += 1;
        r
    }

    fn site(&mut self) -> SiteId {
        let s = SiteId { func: self.id, seq: self.seq };
        self.seq += 1;
        s
    }

    fn is_local(&self, name: &str) -> bool {
        self.locals.contains_key(name)
    }

    fn static_kind(&self, e: &Expr) -> Option<TagKind> {
        let is_local = |n: &str| self.is_local(n);
        analysis::static_kind(e, &is_local, self.shared.globals)
    }

    fn resolve(&self, name: &str, span: Span) -> LResult<Resolved> {
        if let Some(r) = self.locals.get(name) {
            return Ok(Resolved::Local(*r));
        }
        if self.self_name.as_deref() == Some(name) {
            return Ok(Resolved::SelfClosure(self.id));
        }
        if self.outer.iter().any(|n| n == name) {
            return Err(LowerError::CapturedVariable { name: name.into(), span });
        }
        if let Some(g) = self.shared.globals.lookup(name) {
            if let Some(f) = self.shared.globals.globals[g as usize].const_function {
                return Ok(Resolved::ConstFunction(FuncId(f)));
            }
            return Ok(Resolved::Global(GlobalId(g)));
        }
        if let Some(b) = Builtin::from_name(name) {
            return Ok(Resolved::Builtin(b));
        }
        Err(LowerError::Unresolved { name: name.into(), span })
    }

    // ----- functions --------------------------------------------------------

    fn lower_main(&mut self, body: &[Stmt], out: &mut Vec<Option<FunctionIR>>) -> LResult<()> {
        let entry = self.new_block();
        self.switch_to(entry);
        for s in body {
            if let StmtKind::FunctionDecl(f) = &s.kind {
                let name = f.name.clone().expect("declarations are named");
                self.lower_nested(f, out)?;
                let g = GlobalId(self.shared.globals.lookup(&name).expect("declared global"));
                let t = self.temp();
                self.emit(Inst::MakeClosure { dst: t, func: FuncId(f.index) });
                self.emit(Inst::SetGlobal { global: g, src: t });
            }
        }
        self.split();
        for s in body {
            self.stmt(s, out)?;
        }
        Ok(())
    }

    fn lower_function_body(&mut self, f: &ast::Function, out: &mut Vec<Option<FunctionIR>>) -> LResult<()> {
        let entry = self.new_block();
        self.switch_to(entry);
        for i in self.params as usize..self.local_names.len() {
            let r = self.locals[&self.local_names[i]];
            self.emit(Inst::Const { dst: r, val: ConstVal::Undefined });
        }
        self.split();
        for s in &f.body {
            self.stmt(s, out)?;
        }
        Ok(())
    }

    fn lower_nested(&mut self, f: &Rc<ast::Function>, out: &mut Vec<Option<FunctionIR>>) -> LResult<()> {
        let mut outer = self.outer.clone();
        outer.extend(self.local_names.iter().cloned());
        let name = f.name.clone().unwrap_or_else(|| format!("anon{}", f.index));
        let mut sub = FnLower::new(
            self.shared,
            FuncId(f.index),
            name,
            f.name.clone(),
            f.params.clone(),
            &f.body,
            outer,
        );
        // Declarations are visible through their global, not a self binding.
        if self.id.0 == 0 && self.shared.program.body.iter().any(|s| matches!(&s.kind, StmtKind::FunctionDecl(d) if Rc::ptr_eq(d, f))) {
            sub.self_name = None;
        }
        sub.lower_function_body(f, out)?;
        out[f.index as usize] = Some(sub.finish());
        Ok(())
    }

    // ----- statements -------------------------------------------------------

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<Option<FunctionIR>>) -> LResult<()> {
        match &s.kind {
            StmtKind::FunctionDecl(f) => {
                if self.id.0 != 0 {
                    return Err(LowerError::NestedFunctionDecl {
                        name: f.name.clone().unwrap_or_default(),
                        span: s.span,
                    });
                }
                // Hoisted by the prologue.
            }
            StmtKind::Var(decls) => {
                for d in decls {
                    if let Some(init) = &d.init {
                        let target = Expr { kind: ExprKind::Ident(d.name.clone()), span: s.span };
                        self.assign(&target, None, init, out)?;
                    }
                }
            }
            StmtKind::If { cond, then, otherwise } => {
                let tb = self.new_block();
                let fb = self.new_block();
                let join = self.new_block();
                self.cond(cond, tb, fb, out)?;
                self.switch_to(tb);
                self.stmt(then, out)?;
                self.jump_to(join);
                self.switch_to(fb);
                if let Some(o) = otherwise {
                    self.stmt(o, out)?;
                }
                self.jump_to(join);
                self.switch_to(join);
            }
            StmtKind::While { cond, body } => {
                let header = self.new_block();
                let bodyb = self.new_block();
                let exit = self.new_block();
                self.jump_to(header);
                self.switch_to(header);
                self.cond(cond, bodyb, exit, out)?;
                self.switch_to(bodyb);
                self.stmt(body, out)?;
                self.jump_to(header);
                self.switch_to(exit);
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e, out)?,
                    None => self.constant(ConstVal::Undefined),
                };
                self.terminate(Inst::Return { value: v });
            }
            StmtKind::Throw(e) => {
                let v = self.expr(e, out)?;
                self.terminate(Inst::Throw { value: v });
            }
            StmtKind::Expr(e) => {
                self.expr(e, out)?;
            }
            StmtKind::Block(b) => {
                for s in b {
                    self.stmt(s, out)?;
                }
            }
            StmtKind::Empty => {}
        }
        Ok(())
    }

    // ----- dispatch plans ---------------------------------------------------

    /// Emits `plan` starting in the current block. Each leaf is handed to
    /// `leaf`; leaves left open jump to `join`, which becomes current.
    fn plan(
        &mut self,
        plan: &Plan,
        a: Reg,
        b: Option<Reg>,
        join: BlockId,
        leaf: &mut dyn FnMut(&mut Self, &Leaf) -> LResult<()>,
    ) -> LResult<()> {
        self.plan_rec(plan, a, b, join, leaf)?;
        self.switch_to(join);
        Ok(())
    }

    fn plan_rec(
        &mut self,
        plan: &Plan,
        a: Reg,
        b: Option<Reg>,
        join: BlockId,
        leaf: &mut dyn FnMut(&mut Self, &Leaf) -> LResult<()>,
    ) -> LResult<()> {
        match plan {
            Plan::Leaf(Leaf::Halt(reason)) => {
                self.terminate(Inst::Halt { reason: reason.clone() });
                Ok(())
            }
            Plan::Leaf(l) => {
                leaf(self, l)?;
                self.jump_to(join);
                Ok(())
            }
            Plan::Test { operand, kind, yes, no } => {
                let value = match operand {
                    Operand::A => a,
                    Operand::B => b.expect("binary plan"),
                };
                let yb = self.new_block();
                let nb = self.new_block();
                let site = self.site();
                self.terminate(Inst::TagTest { site, value, kind: *kind, if_true: yb, if_false: nb });
                self.switch_to(yb);
                self.plan_rec(yes, a, b, join, leaf)?;
                self.switch_to(nb);
                self.plan_rec(no, a, b, join, leaf)
            }
        }
    }

    fn float_reg(&mut self, r: Reg, conv: bool) -> Reg {
        if conv {
            let t = self.temp();
            self.emit(Inst::I32ToF64 { dst: t, src: r });
            t
        } else {
            r
        }
    }

    fn arith(&mut self, op: BinOp, a: Reg, b: Reg, ka: Option<TagKind>, kb: Option<TagKind>) -> LResult<Reg> {
        let aop = match op {
            BinOp::Add => ArithOp::Add,
            BinOp::Sub => ArithOp::Sub,
            BinOp::Mul => ArithOp::Mul,
            BinOp::Div => ArithOp::Div,
            BinOp::Mod => ArithOp::Mod,
            _ => unreachable!("not arithmetic"),
        };
        let dst = self.temp();
        let join = self.new_block();
        let p = dispatch::arith(op.symbol(), ka, kb);
        self.plan(&p, a, Some(b), join, &mut |s, l| {
            match l {
                Leaf::IntArith if aop == ArithOp::Mod => s.emit(Inst::IntMod { dst, a, b }),
                Leaf::IntArith => {
                    let ovf = s.new_block();
                    s.terminate(Inst::Overflow { op: aop, dst, a, b, ok: join, ovf });
                    s.switch_to(ovf);
                    let fa = s.float_reg(a, true);
                    let fb = s.float_reg(b, true);
                    s.emit(Inst::FloatArith { op: aop, dst, a: fa, b: fb });
                }
                Leaf::FloatArith { conv_a, conv_b } => {
                    let fa = s.float_reg(a, *conv_a);
                    let fb = s.float_reg(b, *conv_b);
                    s.emit(Inst::FloatArith { op: aop, dst, a: fa, b: fb });
                }
                Leaf::Concat => s.emit(Inst::StrConcat { dst, a, b }),
                other => unreachable!("arith leaf {other:?}"),
            }
            Ok(())
        })?;
        Ok(dst)
    }

    fn compare(&mut self, op: BinOp, a: Reg, b: Reg, ka: Option<TagKind>, kb: Option<TagKind>) -> LResult<Reg> {
        let cop = match op {
            BinOp::Lt => CmpOp::Lt,
            BinOp::Le => CmpOp::Le,
            BinOp::Gt => CmpOp::Gt,
            BinOp::Ge => CmpOp::Ge,
            _ => unreachable!("not a comparison"),
        };
        let dst = self.temp();
        let join = self.new_block();
        let p = dispatch::compare(op.symbol(), ka, kb);
        self.plan(&p, a, Some(b), join, &mut |s, l| {
            match l {
                Leaf::IntCmp => s.emit(Inst::CmpI32 { op: cop, dst, a, b }),
                Leaf::FloatCmp { conv_a, conv_b } => {
                    let fa = s.float_reg(a, *conv_a);
                    let fb = s.float_reg(b, *conv_b);
                    s.emit(Inst::CmpF64 { op: cop, dst, a: fa, b: fb });
                }
                other => unreachable!("compare leaf {other:?}"),
            }
            Ok(())
        })?;
        Ok(dst)
    }

    fn equality(&mut self, negate: bool, a: Reg, b: Reg, ka: Option<TagKind>, kb: Option<TagKind>) -> LResult<Reg> {
        let dst = self.temp();
        let join = self.new_block();
        let p = dispatch::equality(ka, kb);
        self.plan(&p, a, Some(b), join, &mut |s, l| {
            match l {
                Leaf::IntCmp => s.emit(Inst::CmpI32 { op: CmpOp::Eq, dst, a, b }),
                Leaf::FloatCmp { conv_a, conv_b } => {
                    let fa = s.float_reg(a, *conv_a);
                    let fb = s.float_reg(b, *conv_b);
                    s.emit(Inst::CmpF64 { op: CmpOp::Eq, dst, a: fa, b: fb });
                }
                Leaf::StrEq => s.emit(Inst::StrEq { dst, a, b }),
                Leaf::Known(v) => s.emit(Inst::Const { dst, val: ConstVal::Bool(*v) }),
                Leaf::RefEq => s.emit(Inst::RefEq { dst, a, b }),
                other => unreachable!("equality leaf {other:?}"),
            }
            Ok(())
        })?;
        if negate {
            let n = self.temp();
            self.emit(Inst::Not { dst: n, src: dst });
            Ok(n)
        } else {
            Ok(dst)
        }
    }

    /// Emits the truthiness plan of `v`, branching to `t` or `f`.
    fn branch_on(&mut self, v: Reg, kind: Option<TagKind>, t: BlockId, f: BlockId) -> LResult<()> {
        let p = dispatch::truthiness(kind);
        // All leaves terminate, so the join is never reached.
        let join = self.new_block();
        self.plan_rec(&p, v, None, join, &mut |s, l| {
            let truth = match l {
                Leaf::Truthy(t) => *t,
                other => unreachable!("truthiness leaf {other:?}"),
            };
            match truth {
                Truth::Const => s.terminate(Inst::Branch { cond: v, if_true: t, if_false: f }),
                Truth::Fixed(true) => s.terminate(Inst::Jump { target: t }),
                Truth::Fixed(false) => s.terminate(Inst::Jump { target: f }),
                Truth::Int | Truth::Float | Truth::Str => {
                    let c = s.temp();
                    s.emit(match truth {
                        Truth::Int => Inst::IntTruthy { dst: c, src: v },
                        Truth::Float => Inst::FloatTruthy { dst: c, src: v },
                        _ => Inst::StrNonEmpty { dst: c, src: v },
                    });
                    s.terminate(Inst::Branch { cond: c, if_true: t, if_false: f });
                }
            }
            Ok(())
        })?;
        // The unused join block stays empty; give it a terminator.
        self.cur = Some(join);
        self.terminate(Inst::Halt { reason: StaticHalt::UnsupportedOperands("truthiness") });
        Ok(())
    }

    /// Lowers `e` in condition position.
    fn cond(&mut self, e: &Expr, t: BlockId, f: BlockId, out: &mut Vec<Option<FunctionIR>>) -> LResult<()> {
        match &e.kind {
            ExprKind::Logical(LogicalOp::And, a, b) => {
                let mid = self.new_block();
                self.cond(a, mid, f, out)?;
                self.switch_to(mid);
                self.cond(b, t, f, out)
            }
            ExprKind::Logical(LogicalOp::Or, a, b) => {
                let mid = self.new_block();
                self.cond(a, t, mid, out)?;
                self.switch_to(mid);
                self.cond(b, t, f, out)
            }
            ExprKind::Unary(UnOp::Not, a) => self.cond(a, f, t, out),
            _ => {
                let v = self.expr(e, out)?;
                let k = self.static_kind(e);
                self.branch_on(v, k, t, f)
            }
        }
    }

    // ----- expressions ------------------------------------------------------

    fn constant(&mut self, val: ConstVal) -> Reg {
        let r = self.temp();
        self.emit(Inst::Const { dst: r, val });
        r
    }

    /// Evaluates a sequence of operands left to right. A local read whose
    /// variable a later operand assigns is copied first.
    fn operands(&mut self, es: &[&Expr], out: &mut Vec<Option<FunctionIR>>) -> LResult<Vec<Reg>> {
        let mut regs = Vec::with_capacity(es.len());
        for (i, e) in es.iter().enumerate() {
            let r = self.expr(e, out)?;
            let r = self.protect(r, e, &es[i + 1..]);
            regs.push(r);
        }
        Ok(regs)
    }

    /// Copies `r`, the value of `e`, if `e` reads a local that one of `later` assigns.
    fn protect(&mut self, r: Reg, e: &Expr, later: &[&Expr]) -> Reg {
        match &e.kind {
            ExprKind::Ident(n) if self.is_local(n) && later.iter().any(|l| assigns_local(l, n)) => {
                let t = self.temp();
                self.emit(Inst::Move { dst: t, src: r });
                t
            }
            _ => r,
        }
    }

    fn expr(&mut self, e: &Expr, out: &mut Vec<Option<FunctionIR>>) -> LResult<Reg> {
        self.ensure_open();
        match &e.kind {
            ExprKind::Int(n) => Ok(self.constant(ConstVal::Int(*n))),
            ExprKind::Float(x) => Ok(self.constant(ConstVal::Float(*x))),
            ExprKind::Str(s) => Ok(self.constant(ConstVal::Str(Rc::from(s.as_str())))),
            ExprKind::Bool(b) => Ok(self.constant(ConstVal::Bool(*b))),
            ExprKind::Null => Ok(self.constant(ConstVal::Null)),
            ExprKind::Undefined => Ok(self.constant(ConstVal::Undefined)),
            ExprKind::This => {
                if self.id.0 == 0 {
                    Err(LowerError::ThisOutsideFunction { span: e.span })
                } else {
                    Ok(Reg(0))
                }
            }
            ExprKind::Ident(name) => match self.resolve(name, e.span)? {
                Resolved::Local(r) => Ok(r),
                Resolved::SelfClosure(f) | Resolved::ConstFunction(f) => {
                    let r = self.temp();
                    self.emit(Inst::MakeClosure { dst: r, func: f });
                    Ok(r)
                }
                Resolved::Global(g) => {
                    let r = self.temp();
                    self.emit(Inst::GetGlobal { dst: r, global: g });
                    Ok(r)
                }
                Resolved::Builtin(b) => Err(LowerError::BuiltinAsValue { name: b.name().into(), span: e.span }),
            },
            ExprKind::Function(f) => {
                self.lower_nested(f, out)?;
                let r = self.temp();
                self.emit(Inst::MakeClosure { dst: r, func: FuncId(f.index) });
                Ok(r)
            }
            ExprKind::Object(fields) => {
                let vals: Vec<&Expr> = fields.iter().map(|(_, v)| v).collect();
                let regs = self.operands(&vals, out)?;
                let o = self.temp();
                self.emit(Inst::AllocObject { dst: o });
                for ((k, _), v) in fields.iter().zip(regs) {
                    self.emit(Inst::InitProp { obj: o, name: Rc::from(k.as_str()), val: v });
                }
                Ok(o)
            }
            ExprKind::Array(items) => {
                let refs: Vec<&Expr> = items.iter().collect();
                let elems = self.operands(&refs, out)?;
                let r = self.temp();
                self.emit(Inst::AllocArray { dst: r, elems });
                Ok(r)
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                let v = self.expr(a, out)?;
                let k = self.static_kind(a);
                let dst = self.temp();
                let join = self.new_block();
                self.plan(&dispatch::negate(k), v, None, join, &mut |s, l| {
                    match l {
                        Leaf::IntNeg => {
                            let z = s.constant(ConstVal::Int(0));
                            let ovf = s.new_block();
                            s.terminate(Inst::Overflow { op: ArithOp::Sub, dst, a: z, b: v, ok: join, ovf });
                            s.switch_to(ovf);
                            let fz = s.float_reg(z, true);
                            let fv = s.float_reg(v, true);
                            s.emit(Inst::FloatArith { op: ArithOp::Sub, dst, a: fz, b: fv });
                        }
                        Leaf::FloatNeg => s.emit(Inst::FloatNeg { dst, src: v }),
                        other => unreachable!("negate leaf {other:?}"),
                    }
                    Ok(())
                })?;
                Ok(dst)
            }
            ExprKind::Unary(UnOp::Not, a) => {
                let v = self.expr(a, out)?;
                let k = self.static_kind(a);
                let t = self.temp();
                let join = self.new_block();
                self.plan(&dispatch::truthiness(k), v, None, join, &mut |s, l| {
                    let inst = match l {
                        Leaf::Truthy(Truth::Const) => Inst::ConstTruthy { dst: t, src: v },
                        Leaf::Truthy(Truth::Int) => Inst::IntTruthy { dst: t, src: v },
                        Leaf::Truthy(Truth::Float) => Inst::FloatTruthy { dst: t, src: v },
                        Leaf::Truthy(Truth::Str) => Inst::StrNonEmpty { dst: t, src: v },
                        Leaf::Truthy(Truth::Fixed(b)) => Inst::Const { dst: t, val: ConstVal::Bool(*b) },
                        other => unreachable!("truthiness leaf {other:?}"),
                    };
                    s.emit(inst);
                    Ok(())
                })?;
                let dst = self.temp();
                self.emit(Inst::Not { dst, src: t });
                Ok(dst)
            }
            ExprKind::Binary(op, a, b) => {
                let regs = self.operands(&[a, b], out)?;
                let (ka, kb) = (self.static_kind(a), self.static_kind(b));
                match op {
                    _ if op.is_arith() => self.arith(*op, regs[0], regs[1], ka, kb),
                    BinOp::Eq | BinOp::Ne => self.equality(*op == BinOp::Ne, regs[0], regs[1], ka, kb),
                    _ => self.compare(*op, regs[0], regs[1], ka, kb),
                }
            }
            ExprKind::Logical(op, a, b) => {
                let va = self.expr(a, out)?;
                let dst = self.temp();
                self.emit(Inst::Move { dst, src: va });
                let rhs = self.new_block();
                let join = self.new_block();
                let k = self.static_kind(a);
                match op {
                    LogicalOp::And => self.branch_on(va, k, rhs, join)?,
                    LogicalOp::Or => self.branch_on(va, k, join, rhs)?,
                }
                self.switch_to(rhs);
                let vb = self.expr(b, out)?;
                self.emit(Inst::Move { dst, src: vb });
                self.jump_to(join);
                self.switch_to(join);
                Ok(dst)
            }
            ExprKind::Assign { target, op, value } => self.assign(target, *op, value, out),
            ExprKind::Member { object, prop } => {
                let o = self.expr(object, out)?;
                let k = self.static_kind(object);
                self.prop_read(o, k, prop)
            }
            ExprKind::Index { object, index } => {
                let regs = self.operands(&[object, index], out)?;
                let (ka, kb) = (self.static_kind(object), self.static_kind(index));
                self.index_read(regs[0], regs[1], ka, kb)
            }
            ExprKind::Call { callee, args } => self.call(e, callee, args, out),
            ExprKind::New { callee, args } => {
                if let ExprKind::Ident(n) = &callee.kind {
                    if let Resolved::Builtin(b) = self.resolve(n, callee.span)? {
                        return Err(LowerError::BuiltinAsValue { name: b.name().into(), span: callee.span });
                    }
                }
                let mut all: Vec<&Expr> = vec![callee];
                all.extend(args.iter());
                let regs = self.operands(&all, out)?;
                let c = regs[0];
                let k = self.static_kind(callee);
                let obj = self.temp();
                let scratch = self.temp();
                let join = self.new_block();
                let arg_regs = regs[1..].to_vec();
                self.plan(&dispatch::callable(k), c, None, join, &mut |s, l| {
                    assert_eq!(*l, Leaf::Proceed);
                    s.emit(Inst::AllocObject { dst: obj });
                    let site = s.site();
                    s.terminate(Inst::Call { site, callee: c, this: obj, args: arg_regs.clone(), dst: scratch, cont: join });
                    Ok(())
                })?;
                Ok(obj)
            }
        }
    }

    fn prop_read(&mut self, o: Reg, k: Option<TagKind>, prop: &str) -> LResult<Reg> {
        let name: Rc<str> = Rc::from(prop);
        let dst = self.temp();
        let join = self.new_block();
        self.plan(&dispatch::property_read(k, &name), o, None, join, &mut |s, l| {
            match l {
                Leaf::Proceed => s.shape_cascade(o, &name, join, &mut |s, cache| match cache {
                    Some(cache) => s.emit(Inst::ReadProp { dst, obj: o, name: name.clone(), cache }),
                    None => s.emit(Inst::GetPropGeneric { dst, obj: o, name: name.clone() }),
                }),
                Leaf::ArrayLen => s.emit(Inst::ArrayLen { dst, arr: o }),
                Leaf::StrLen => s.emit(Inst::StrLen { dst, src: o }),
                other => unreachable!("property leaf {other:?}"),
            }
            Ok(())
        })?;
        Ok(dst)
    }

    fn prop_write(&mut self, o: Reg, k: Option<TagKind>, prop: &str, v: Reg) -> LResult<()> {
        let name: Rc<str> = Rc::from(prop);
        let join = self.new_block();
        self.plan(&dispatch::property_write(k, &name), o, None, join, &mut |s, l| {
            assert_eq!(*l, Leaf::Proceed);
            s.shape_cascade(o, &name, join, &mut |s, cache| match cache {
                Some(cache) => s.emit(Inst::WriteProp { obj: o, name: name.clone(), val: v, cache }),
                None => s.emit(Inst::SetPropGeneric { obj: o, name: name.clone(), val: v }),
            });
            Ok(())
        })
    }

    /// Shape-test cascade over fresh cache slots; `access` emits the access
    /// for a hit on a slot, or the by-name fallback for `None`.
    fn shape_cascade(&mut self, o: Reg, _name: &Rc<str>, join: BlockId, access: &mut dyn FnMut(&mut Self, Option<CacheId>)) {
        for _ in 0..SHAPE_CACHE_SLOTS {
            let cache = CacheId(self.cache_count);
            self.cache_count += 1;
            let hit = self.new_block();
            let miss = self.new_block();
            let site = self.site();
            self.terminate(Inst::ShapeTest { site, value: o, cache, if_true: hit, if_false: miss });
            self.switch_to(hit);
            access(self, Some(cache));
            self.terminate(Inst::Jump { target: join });
            self.switch_to(miss);
        }
        access(self, None);
    }

    fn index_read(&mut self, a: Reg, i: Reg, ka: Option<TagKind>, ki: Option<TagKind>) -> LResult<Reg> {
        let dst = self.temp();
        let join = self.new_block();
        self.plan(&dispatch::index(ka, ki), a, Some(i), join, &mut |s, l| {
            assert_eq!(*l, Leaf::Proceed);
            s.emit(Inst::ArrayRead { dst, arr: a, idx: i });
            Ok(())
        })?;
        Ok(dst)
    }

    fn index_write(&mut self, a: Reg, i: Reg, v: Reg, ka: Option<TagKind>, ki: Option<TagKind>) -> LResult<()> {
        let join = self.new_block();
        self.plan(&dispatch::index(ka, ki), a, Some(i), join, &mut |s, l| {
            assert_eq!(*l, Leaf::Proceed);
            s.emit(Inst::ArrayWrite { arr: a, idx: i, val: v });
            Ok(())
        })
    }

    fn assign(&mut self, target: &Expr, op: Option<BinOp>, value: &Expr, out: &mut Vec<Option<FunctionIR>>) -> LResult<Reg> {
        match &target.kind {
            ExprKind::Ident(name) => {
                let resolved = self.resolve(name, target.span)?;
                let v = match op {
                    None => self.expr(value, out)?,
                    Some(op) => {
                        let regs = self.operands(&[target, value], out)?;
                        let (ka, kb) = (self.static_kind(target), self.static_kind(value));
                        self.arith(op, regs[0], regs[1], ka, kb)?
                    }
                };
                match resolved {
                    Resolved::Local(r) => {
                        if r != v {
                            self.emit(Inst::Move { dst: r, src: v });
                        }
                        Ok(r)
                    }
                    Resolved::Global(g) => {
                        self.emit(Inst::SetGlobal { global: g, src: v });
                        if self.shared.globals.globals[g.0 as usize].single_assign {
                            self.split();
                        }
                        Ok(v)
                    }
                    Resolved::ConstFunction(_) | Resolved::SelfClosure(_) | Resolved::Builtin(_) => {
                        Err(LowerError::InvalidTarget { span: target.span })
                    }
                }
            }
            ExprKind::Member { object, prop } => {
                let o = self.expr(object, out)?;
                let o = self.protect(o, object, &[value]);
                let k = self.static_kind(object);
                let v = match op {
                    None => self.expr(value, out)?,
                    Some(op) => {
                        let cur = self.prop_read(o, k, prop)?;
                        let rhs = self.expr(value, out)?;
                        let kb = self.static_kind(value);
                        self.arith(op, cur, rhs, None, kb)?
                    }
                };
                self.prop_write(o, k, prop, v)?;
                Ok(v)
            }
            ExprKind::Index { object, index } => {
                let regs = self.operands(&[object, index], out)?;
                let a = self.protect(regs[0], object, &[value]);
                let i = self.protect(regs[1], index, &[value]);
                let (ka, ki) = (self.static_kind(object), self.static_kind(index));
                let v = match op {
                    None => self.expr(value, out)?,
                    Some(op) => {
                        let cur = self.index_read(a, i, ka, ki)?;
                        let rhs = self.expr(value, out)?;
                        let kb = self.static_kind(value);
                        self.arith(op, cur, rhs, None, kb)?
                    }
                };
                self.index_write(a, i, v, ka, ki)?;
                Ok(v)
            }
            _ => Err(LowerError::InvalidTarget { span: target.span }),
        }
    }

    fn call(&mut self, e: &Expr, callee: &Expr, args: &[Expr], out: &mut Vec<Option<FunctionIR>>) -> LResult<Reg> {
        if let ExprKind::Ident(n) = &callee.kind {
            if let Resolved::Builtin(which) = self.resolve(n, callee.span)? {
                let refs: Vec<&Expr> = args.iter().collect();
                let regs = self.operands(&refs, out)?;
                let dst = self.temp();
                self.emit(Inst::Builtin { dst, which, args: regs });
                return Ok(dst);
            }
        }
        let _ = e;
        let (f, this, kf, arg_regs) = match &callee.kind {
            ExprKind::Member { object, prop } => {
                let mut all: Vec<&Expr> = vec![object];
                let o = self.operands(&all, out)?[0];
                let ko = self.static_kind(object);
                // Protect the receiver if an argument reassigns it.
                let later: Vec<&Expr> = args.iter().collect();
                let o = self.protect(o, object, &later);
                let f = self.prop_read(o, ko, prop)?;
                all.clear();
                all.extend(args.iter());
                let regs = self.operands(&all, out)?;
                (f, o, None, regs)
            }
            _ => {
                let mut all: Vec<&Expr> = vec![callee];
                all.extend(args.iter());
                let regs = self.operands(&all, out)?;
                let this = self.constant(ConstVal::Undefined);
                (regs[0], this, self.static_kind(callee), regs[1..].to_vec())
            }
        };
        let dst = self.temp();
        let join = self.new_block();
        self.plan(&dispatch::callable(kf), f, None, join, &mut |s, l| {
            assert_eq!(*l, Leaf::Proceed);
            let site = s.site();
            s.terminate(Inst::Call { site, callee: f, this, args: arg_regs.clone(), dst, cont: join });
            Ok(())
        })?;
        Ok(dst)
    }
}


/// Points every branch at the final target of any chain of blocks that hold
/// nothing but a jump.
fn thread_jumps(blocks: &mut [Vec<Inst>]) {
    let only_jump = |insts: &[Inst]| match insts {
        [Inst::Jump { target }] => Some(*target),
        _ => None,
    };
    let fwd: Vec<Option<BlockId>> = blocks.iter().map(|b| only_jump(b)).collect();
    let resolve = |mut b: BlockId| {
        for _ in 0..fwd.len() {
            match fwd[b.0 as usize] {
                Some(t) if t != b => b = t,
                _ => break,
            }
        }
        b
    };
    for insts in blocks.iter_mut() {
        let Some(term) = insts.last_mut() else { continue };
        match term {
            Inst::Jump { target } => *target = resolve(*target),
            Inst::Branch { if_true, if_false, .. }
            | Inst::TagTest { if_true, if_false, .. }
            | Inst::ShapeTest { if_true, if_false, .. } => {
                *if_true = resolve(*if_true);
                *if_false = resolve(*if_false);
            }
            Inst::Overflow { ok, ovf, .. } => {
                *ok = resolve(*ok);
                *ovf = resolve(*ovf);
            }
            Inst::Call { cont, .. } => *cont = resolve(*cont),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    pub(crate) fn lower_src(src: &str) -> Module {
        lower(&parse_program("t.js", src).unwrap()).unwrap()
    }

    #[test]
    fn return_zero_has_no_tag_tests() {
        let m = lower_src("function z() { return 0; } z();");
        let f = m.function(FuncId(1));
        assert!(f.tag_test_sites().is_empty());
        let insts: Vec<&Inst> = f.blocks.iter().flat_map(|b| &b.insts).collect();
        assert!(insts.iter().any(|i| matches!(i, Inst::Const { val: ConstVal::Int(0), .. })));
        assert!(insts.iter().any(|i| matches!(i, Inst::Return { .. })));
    }

    #[test]
    fn tree_null_test_is_one_tag_test() {
        let m = lower_src("function s(tree) { if (tree == null) return 0; return 1; } s(null);");
        let f = m.function(FuncId(1));
        let tests: Vec<&Inst> = f.blocks.iter().map(|b| b.terminator()).filter(|t| matches!(t, Inst::TagTest { .. })).collect();
        assert_eq!(tests.len(), 1);
        assert!(matches!(tests[0], Inst::TagTest { value: Reg(1), kind: TagKind::Null, .. }));
    }

    #[test]
    fn errors() {
        let err = |src: &str| lower(&parse_program("e.js", src).unwrap()).unwrap_err();
        assert!(matches!(err("x = y;"), LowerError::Unresolved { .. }));
        assert!(matches!(err("var x = this;"), LowerError::ThisOutsideFunction { .. }));
        assert!(matches!(err("function f() { function g() {} }"), LowerError::NestedFunctionDecl { .. }));
        assert!(matches!(err("function f(a) { return function () { return a; }; }"), LowerError::CapturedVariable { .. }));
        assert!(matches!(err("var p = print;"), LowerError::BuiltinAsValue { .. }));
        assert!(matches!(err("print = 1;"), LowerError::InvalidTarget { .. }));
    }

    #[test]
    fn const_function_reads_become_closures() {
        let m = lower_src("function f() { return 1; } f();");
        let main = m.function(FuncId(0));
        let calls = main.blocks.iter().filter(|b| matches!(b.terminator(), Inst::Call { .. })).count();
        assert_eq!(calls, 1);
        assert!(main.tag_test_sites().is_empty(), "callee identity is static");
    }

    #[test]
    fn every_function_verifies() {
        for (name, src) in crate::corpus::all() {
            let m = lower(&parse_program(name, src).unwrap()).unwrap();
            for f in &m.functions {
                let v = crate::ir::verify::verify(f);
                assert!(v.is_empty(), "{name} {}: {v:?}", f.name);
            }
        }
    }
}
