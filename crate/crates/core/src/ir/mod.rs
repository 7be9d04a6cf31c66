//! Control-flow-graph IR.
//!
//! Every function lowers to basic blocks whose last instruction is the only
//! terminator. Every implicit dynamic check of the source language is an
//! explicit [`Inst::TagTest`], [`Inst::ShapeTest`] or [`Inst::Overflow`]
//! terminator, so the specializer can count, keep or drop each one.

pub mod dispatch;
pub mod dump;
pub mod liveness;
pub mod lower;
pub mod verify;

use std::fmt;
use std::rc::Rc;

use crate::frontend::analysis::Builtin;
use crate::typesys::TagKind;

pub use lower::{lower, LowerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u32);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Function index; 0 is the top-level code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

impl fmt::Display for FuncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "id{}", self.0)
    }
}

/// Stable identity of a test or call site: function plus lowering sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteId {
    pub func: FuncId,
    pub seq: u32,
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.func.0, self.seq)
    }
}

/// Index of a shape cache slot within its function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub enum ConstVal {
    Int(i32),
    Float(f64),
    Str(Rc<str>),
    Bool(bool),
    Null,
    Undefined,
}

impl ConstVal {
    pub fn kind(&self) -> TagKind {
        match self {
            ConstVal::Int(_) => TagKind::Int32,
            ConstVal::Float(_) => TagKind::Float64,
            ConstVal::Str(_) => TagKind::String,
            ConstVal::Null => TagKind::Null,
            ConstVal::Bool(_) | ConstVal::Undefined => TagKind::Const,
        }
    }
}

impl fmt::Display for ConstVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstVal::Int(n) => write!(f, "{n}"),
            ConstVal::Float(x) => f.write_str(&crate::frontend::unparse::float_literal(*x)),
            ConstVal::Str(s) => write!(f, "{s:?}"),
            ConstVal::Bool(b) => write!(f, "{b}"),
            ConstVal::Null => f.write_str("null"),
            ConstVal::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
            ArithOp::Mod => "mod",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
            CmpOp::Eq => "eq",
        }
    }
}

/// Fatal conditions that lowering routes to a `Halt` terminator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StaticHalt {
    UnsupportedOperands(&'static str),
    NotAnObject(Rc<str>),
    NotAnArray,
    BadIndex,
    NotCallable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inst {
    Const { dst: Reg, val: ConstVal },
    MakeClosure { dst: Reg, func: FuncId },
    Move { dst: Reg, src: Reg },
    I32ToF64 { dst: Reg, src: Reg },
    /// int32 remainder; halts on a zero divisor.
    IntMod { dst: Reg, a: Reg, b: Reg },
    FloatArith { op: ArithOp, dst: Reg, a: Reg, b: Reg },
    FloatNeg { dst: Reg, src: Reg },
    CmpI32 { op: CmpOp, dst: Reg, a: Reg, b: Reg },
    CmpF64 { op: CmpOp, dst: Reg, a: Reg, b: Reg },
    StrConcat { dst: Reg, a: Reg, b: Reg },
    StrEq { dst: Reg, a: Reg, b: Reg },
    /// Strict equality of arbitrary values (identity for heap values).
    RefEq { dst: Reg, a: Reg, b: Reg },
    /// Boolean negation of a `const`-tagged boolean.
    Not { dst: Reg, src: Reg },
    ConstTruthy { dst: Reg, src: Reg },
    IntTruthy { dst: Reg, src: Reg },
    FloatTruthy { dst: Reg, src: Reg },
    StrNonEmpty { dst: Reg, src: Reg },
    AllocObject { dst: Reg },
    AllocArray { dst: Reg, elems: Vec<Reg> },
    /// Read behind a successful [`Inst::ShapeTest`] on `cache`.
    ReadProp { dst: Reg, obj: Reg, name: Rc<str>, cache: CacheId },
    /// Write behind a successful [`Inst::ShapeTest`] on `cache`.
    WriteProp { obj: Reg, name: Rc<str>, val: Reg, cache: CacheId },
    /// Property definition on a freshly allocated literal object.
    InitProp { obj: Reg, name: Rc<str>, val: Reg },
    GetPropGeneric { dst: Reg, obj: Reg, name: Rc<str> },
    SetPropGeneric { obj: Reg, name: Rc<str>, val: Reg },
    ArrayLen { dst: Reg, arr: Reg },
    StrLen { dst: Reg, src: Reg },
    ArrayRead { dst: Reg, arr: Reg, idx: Reg },
    ArrayWrite { arr: Reg, idx: Reg, val: Reg },
    GetGlobal { dst: Reg, global: GlobalId },
    SetGlobal { global: GlobalId, src: Reg },
    Builtin { dst: Reg, which: Builtin, args: Vec<Reg> },

    // Terminators.
    Jump { target: BlockId },
    /// Branches on a `const`-tagged value: taken only for `true`.
    Branch { cond: Reg, if_true: BlockId, if_false: BlockId },
    TagTest { site: SiteId, value: Reg, kind: TagKind, if_true: BlockId, if_false: BlockId },
    ShapeTest { site: SiteId, value: Reg, cache: CacheId, if_true: BlockId, if_false: BlockId },
    /// int32 arithmetic into `dst` on `ok`; `ovf` is taken without writing `dst`.
    Overflow { op: ArithOp, dst: Reg, a: Reg, b: Reg, ok: BlockId, ovf: BlockId },
    Call { site: SiteId, callee: Reg, this: Reg, args: Vec<Reg>, dst: Reg, cont: BlockId },
    Return { value: Reg },
    Throw { value: Reg },
    Halt { reason: StaticHalt },
}

impl Inst {
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Inst::Jump { .. }
                | Inst::Branch { .. }
                | Inst::TagTest { .. }
                | Inst::ShapeTest { .. }
                | Inst::Overflow { .. }
                | Inst::Call { .. }
                | Inst::Return { .. }
                | Inst::Throw { .. }
                | Inst::Halt { .. }
        )
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Inst::Jump { target } => vec![*target],
            Inst::Branch { if_true, if_false, .. }
            | Inst::TagTest { if_true, if_false, .. }
            | Inst::ShapeTest { if_true, if_false, .. } => vec![*if_true, *if_false],
            Inst::Overflow { ok, ovf, .. } => vec![*ok, *ovf],
            Inst::Call { cont, .. } => vec![*cont],
            _ => vec![],
        }
    }

    /// Registers read by this instruction.
    pub fn uses(&self) -> Vec<Reg> {
        use Inst::*;
        match self {
            Const { .. } | MakeClosure { .. } | AllocObject { .. } | GetGlobal { .. } => vec![],
            Jump { .. } | Halt { .. } => vec![],
            Move { src, .. }
            | I32ToF64 { src, .. }
            | FloatNeg { src, .. }
            | Not { src, .. }
            | ConstTruthy { src, .. }
            | IntTruthy { src, .. }
            | FloatTruthy { src, .. }
            | StrNonEmpty { src, .. }
            | StrLen { src, .. }
            | SetGlobal { src, .. } => vec![*src],
            IntMod { a, b, .. }
            | FloatArith { a, b, .. }
            | CmpI32 { a, b, .. }
            | CmpF64 { a, b, .. }
            | StrConcat { a, b, .. }
            | StrEq { a, b, .. }
            | RefEq { a, b, .. }
            | Overflow { a, b, .. } => vec![*a, *b],
            AllocArray { elems, .. } => elems.clone(),
            ReadProp { obj, .. } | GetPropGeneric { obj, .. } => vec![*obj],
            WriteProp { obj, val, .. } | InitProp { obj, val, .. } | SetPropGeneric { obj, val, .. } => {
                vec![*obj, *val]
            }
            ArrayLen { arr, .. } => vec![*arr],
            ArrayRead { arr, idx, .. } => vec![*arr, *idx],
            ArrayWrite { arr, idx, val } => vec![*arr, *idx, *val],
            Builtin { args, .. } => args.clone(),
            Branch { cond, .. } => vec![*cond],
            TagTest { value, .. } | ShapeTest { value, .. } | Return { value } | Throw { value } => vec![*value],
            Call { callee, this, args, .. } => {
                let mut v = vec![*callee, *this];
                v.extend(args.iter().copied());
                v
            }
        }
    }

    /// Register written by this instruction, if any. For `Overflow` and
    /// `Call` the write happens on the way into the successor.
    pub fn def(&self) -> Option<Reg> {
        use Inst::*;
        match self {
            Const { dst, .. }
            | MakeClosure { dst, .. }
            | Move { dst, .. }
            | I32ToF64 { dst, .. }
            | IntMod { dst, .. }
            | FloatArith { dst, .. }
            | FloatNeg { dst, .. }
            | CmpI32 { dst, .. }
            | CmpF64 { dst, .. }
            | StrConcat { dst, .. }
            | StrEq { dst, .. }
            | RefEq { dst, .. }
            | Not { dst, .. }
            | ConstTruthy { dst, .. }
            | IntTruthy { dst, .. }
            | FloatTruthy { dst, .. }
            | StrNonEmpty { dst, .. }
            | AllocObject { dst }
            | AllocArray { dst, .. }
            | ReadProp { dst, .. }
            | GetPropGeneric { dst, .. }
            | ArrayLen { dst, .. }
            | StrLen { dst, .. }
            | ArrayRead { dst, .. }
            | GetGlobal { dst, .. }
            | Builtin { dst, .. }
            | Overflow { dst, .. }
            | Call { dst, .. } => Some(*dst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub id: BlockId,
    /// Straight-line instructions followed by exactly one terminator.
    pub insts: Vec<Inst>,
}

impl BasicBlock {
    pub fn terminator(&self) -> &Inst {
        self.insts.last().expect("block has a terminator")
    }

    pub fn body(&self) -> &[Inst] {
        &self.insts[..self.insts.len().saturating_sub(1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionIR {
    pub id: FuncId,
    pub name: String,
    pub param_count: u32,
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
    /// Number of registers: `this`, parameters, locals, then temporaries.
    pub reg_count: u32,
    /// Number of shape cache slots.
    pub cache_count: u32,
}

impl FunctionIR {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.0 as usize]
    }

    pub fn tag_test_sites(&self) -> Vec<SiteId> {
        self.blocks
            .iter()
            .filter_map(|b| match b.insts.last() {
                Some(Inst::TagTest { site, .. }) => Some(*site),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub single_assign: bool,
}

/// A lowered program. `functions[0]` is the top-level code.
#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub path: String,
    pub functions: Vec<FunctionIR>,
    pub globals: Vec<GlobalDecl>,
}

impl Module {
    pub fn function(&self, f: FuncId) -> &FunctionIR {
        &self.functions[f.0 as usize]
    }

    pub fn global_id(&self, name: &str) -> Option<GlobalId> {
        self.globals.iter().position(|g| g.name == name).map(|i| GlobalId(i as u32))
    }

    pub fn function_named(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().find(|f| f.name == name).map(|f| f.id)
    }
}
