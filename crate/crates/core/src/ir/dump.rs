//! Text rendering of IR for `--dump-ir`.

use std::fmt::{self, Write as _};

use super::*;

fn regs(rs: &[Reg]) -> String {
    rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for StaticHalt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaticHalt::UnsupportedOperands(op) => write!(f, "unsupported operands for `{op}`"),
            StaticHalt::NotAnObject(p) => write!(f, "reading or writing `.{p}` of a non-object"),
            StaticHalt::NotAnArray => f.write_str("indexing a non-array"),
            StaticHalt::BadIndex => f.write_str("array index is not an int32"),
            StaticHalt::NotCallable => f.write_str("calling a non-function"),
        }
    }
}

impl fmt::Display for Inst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Inst::*;
        match self {
            Const { dst, val } => write!(f, "{dst} = const {val}"),
            MakeClosure { dst, func } => write!(f, "{dst} = closure {func}"),
            Move { dst, src } => write!(f, "{dst} = {src}"),
            I32ToF64 { dst, src } => write!(f, "{dst} = i32_to_f64 {src}"),
            IntMod { dst, a, b } => write!(f, "{dst} = mod_i32 {a}, {b}"),
            FloatArith { op, dst, a, b } => write!(f, "{dst} = {}_f64 {a}, {b}", op.symbol()),
            FloatNeg { dst, src } => write!(f, "{dst} = neg_f64 {src}"),
            CmpI32 { op, dst, a, b } => write!(f, "{dst} = {}_i32 {a}, {b}", op.symbol()),
            CmpF64 { op, dst, a, b } => write!(f, "{dst} = {}_f64 {a}, {b}", op.symbol()),
            StrConcat { dst, a, b } => write!(f, "{dst} = concat {a}, {b}"),
            StrEq { dst, a, b } => write!(f, "{dst} = eq_str {a}, {b}"),
            RefEq { dst, a, b } => write!(f, "{dst} = eq_ref {a}, {b}"),
            Not { dst, src } => write!(f, "{dst} = not {src}"),
            ConstTruthy { dst, src } => write!(f, "{dst} = truthy_const {src}"),
            IntTruthy { dst, src } => write!(f, "{dst} = truthy_i32 {src}"),
            FloatTruthy { dst, src } => write!(f, "{dst} = truthy_f64 {src}"),
            StrNonEmpty { dst, src } => write!(f, "{dst} = truthy_str {src}"),
            AllocObject { dst } => write!(f, "{dst} = new_object"),
            AllocArray { dst, elems } => write!(f, "{dst} = new_array [{}]", regs(elems)),
            ReadProp { dst, obj, name, cache } => write!(f, "{dst} = read_prop {obj}.{name} c{}", cache.0),
            WriteProp { obj, name, val, cache } => write!(f, "write_prop {obj}.{name} = {val} c{}", cache.0),
            InitProp { obj, name, val } => write!(f, "init_prop {obj}.{name} = {val}"),
            GetPropGeneric { dst, obj, name } => write!(f, "{dst} = get_prop {obj}.{name}"),
            SetPropGeneric { obj, name, val } => write!(f, "set_prop {obj}.{name} = {val}"),
            ArrayLen { dst, arr } => write!(f, "{dst} = array_len {arr}"),
            StrLen { dst, src } => write!(f, "{dst} = str_len {src}"),
            ArrayRead { dst, arr, idx } => write!(f, "{dst} = {arr}[{idx}]"),
            ArrayWrite { arr, idx, val } => write!(f, "{arr}[{idx}] = {val}"),
            GetGlobal { dst, global } => write!(f, "{dst} = global g{}", global.0),
            SetGlobal { global, src } => write!(f, "global g{} = {src}", global.0),
            Builtin { dst, which, args } => write!(f, "{dst} = {}({})", which.name(), regs(args)),
            Jump { target } => write!(f, "jump {target}"),
            Branch { cond, if_true, if_false } => write!(f, "branch {cond} ? {if_true} : {if_false}"),
            TagTest { site, value, kind, if_true, if_false } => {
                write!(f, "tag_test@{site} {value} is {} ? {if_true} : {if_false}", kind.name())
            }
            ShapeTest { site, value, cache, if_true, if_false } => {
                write!(f, "shape_test@{site} {value} c{} ? {if_true} : {if_false}", cache.0)
            }
            Overflow { op, dst, a, b, ok, ovf } => {
                write!(f, "{dst} = {}_i32_ovf {a}, {b} ? {ok} : {ovf}", op.symbol())
            }
            Call { site, callee, this, args, dst, cont } => {
                write!(f, "{dst} = call@{site} {callee}(this={this}; {}) -> {cont}", regs(args))
            }
            Return { value } => write!(f, "return {value}"),
            Throw { value } => write!(f, "throw {value}"),
            Halt { reason } => write!(f, "halt \"{reason}\""),
        }
    }
}

pub fn dump_function(f: &FunctionIR) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "function {} {} (params {}, regs {}, caches {})",
        f.id, f.name, f.param_count, f.reg_count, f.cache_count
    );
    for b in &f.blocks {
        let _ = writeln!(out, "  {}:", b.id);
        for i in &b.insts {
            let _ = writeln!(out, "    {i}");
        }
    }
    out
}

pub fn dump_module(m: &Module) -> String {
    let mut out = String::new();
    for (i, g) in m.globals.iter().enumerate() {
        let _ = writeln!(out, "global g{i} {}{}", g.name, if g.single_assign { " (single-assign)" } else { "" });
    }
    for f in &m.functions {
        out.push_str(&dump_function(f));
    }
    out
}
