//! Runtime values, the object heap and the operations both execution
//! engines share.
//!
//! Objects carry a shape from the [`ShapeTable`] plus a slot vector. A shape
//! becomes *unstable* the first time any object leaves it, either by gaining a
//! property or by a property changing tag.

use std::fmt::Write as _;
use std::rc::Rc;
use std::time::Instant;

use thiserror::Error;

use crate::frontend::analysis::Builtin;
use crate::ir::{ArithOp, CmpOp, ConstVal, FuncId, StaticHalt};
use crate::shapes::{ShapeId, ShapeTable};
use crate::typesys::{TagKind, TypeTag};

/// Writes past the end of an array may grow it by at most this many holes.
pub const MAX_ARRAY_GAP: i64 = 1_000_000;

/// Fatal conditions that stop a program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HaltKind {
    #[error("unsupported operands for `{0}`")]
    UnsupportedOperands(String),
    #[error("cannot access property `{0}` of a non-object")]
    NotAnObject(String),
    #[error("value is not callable")]
    NotCallable,
    #[error("value is not an array")]
    NotAnArray,
    #[error("bad array index")]
    BadIndex,
    #[error("integer division by zero")]
    DivideByZero,
    #[error("call stack overflow")]
    StackOverflow,
    #[error("instruction budget exceeded")]
    BudgetExceeded,
    #[error("uncaught exception: {0}")]
    Thrown(String),
}

impl From<&StaticHalt> for HaltKind {
    fn from(h: &StaticHalt) -> Self {
        match h {
            StaticHalt::UnsupportedOperands(op) => HaltKind::UnsupportedOperands(op.to_string()),
            StaticHalt::NotAnObject(p) => HaltKind::NotAnObject(p.to_string()),
            StaticHalt::NotAnArray => HaltKind::NotAnArray,
            StaticHalt::BadIndex => HaltKind::BadIndex,
            StaticHalt::NotCallable => HaltKind::NotCallable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Float(f64),
    Null,
    Bool(bool),
    Undefined,
    Str(Rc<str>),
    Array(u32),
    Closure(FuncId),
    Object(u32),
}

impl Value {
    pub fn kind(&self) -> TagKind {
        match self {
            Value::Int(_) => TagKind::Int32,
            Value::Float(_) => TagKind::Float64,
            Value::Null => TagKind::Null,
            Value::Bool(_) | Value::Undefined => TagKind::Const,
            Value::Str(_) => TagKind::String,
            Value::Array(_) => TagKind::Array,
            Value::Closure(_) => TagKind::Closure,
            Value::Object(_) => TagKind::Object,
        }
    }

    /// Most precise tag of this value.
    pub fn tag(&self) -> TypeTag {
        match self {
            Value::Closure(f) => TypeTag::ClosureKnown(*f),
            v => v.kind().tag(),
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(n) => *n != 0,
            Value::Float(x) => *x != 0.0 && !x.is_nan(),
            Value::Null | Value::Undefined => false,
            Value::Bool(b) => *b,
            Value::Str(s) => !s.is_empty(),
            Value::Array(_) | Value::Closure(_) | Value::Object(_) => true,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(n) => Some(*n as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }
}

/// Type-strict equality: numbers compare numerically, strings by content,
/// heap values by identity.
pub fn strict_equals(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => a.as_f64() == b.as_f64(),
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Null, Value::Null) | (Value::Undefined, Value::Undefined) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Array(x), Value::Array(y)) | (Value::Object(x), Value::Object(y)) => x == y,
        (Value::Closure(x), Value::Closure(y)) => x == y,
        _ => false,
    }
}

/// int32 arithmetic; `None` when the result is not an exact int32.
pub fn int_arith(op: ArithOp, a: i32, b: i32) -> Option<i32> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
        ArithOp::Div => {
            if b != 0 && a.checked_rem(b) == Some(0) {
                a.checked_div(b)
            } else {
                None
            }
        }
        ArithOp::Mod => a.checked_rem(b),
    }
}

pub fn int_mod(a: i32, b: i32) -> Result<i32, HaltKind> {
    if b == 0 {
        Err(HaltKind::DivideByZero)
    } else {
        Ok(a.wrapping_rem(b))
    }
}

pub fn float_arith(op: ArithOp, a: f64, b: f64) -> f64 {
    match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a / b,
        ArithOp::Mod => a % b,
    }
}

pub fn const_value(c: &ConstVal) -> Value {
    match c {
        ConstVal::Int(n) => Value::Int(*n),
        ConstVal::Float(x) => Value::Float(*x),
        ConstVal::Str(s) => Value::Str(s.clone()),
        ConstVal::Bool(b) => Value::Bool(*b),
        ConstVal::Null => Value::Null,
        ConstVal::Undefined => Value::Undefined,
    }
}

pub fn compare<T: PartialOrd>(op: CmpOp, a: T, b: T) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => a == b,
    }
}

/// String length in UTF-16 code units.
pub fn str_len(s: &str) -> i32 {
    s.encode_utf16().count() as i32
}

/// Runs a builtin; `print` appends one line to `out`.
pub fn call_builtin(which: Builtin, args: &[Value], heap: &Heap, clock: &mut Clock, out: &mut String) -> Value {
    match which {
        Builtin::Print => {
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&heap.display(a));
            }
            out.push('\n');
            Value::Undefined
        }
        Builtin::Clock => Value::Float(clock.now_ms()),
        Builtin::Error => Value::Str(args.first().map(|a| heap.display(a)).unwrap_or_default().into()),
    }
}

/// JavaScript-style rendering of a float64.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-6..1e21).contains(&a) {
        let s = format!("{x:e}");
        return match s.split_once('e') {
            Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
            _ => s,
        };
    }
    format!("{x}")
}

/// Source of `clock()` readings.
#[derive(Debug, Clone)]
pub enum Clock {
    Real(Instant),
    /// Deterministic readings `start, start + step, ...`.
    Fixed { next: f64, step: f64 },
}

impl Clock {
    pub fn real() -> Clock {
        Clock::Real(Instant::now())
    }

    pub fn fixed() -> Clock {
        Clock::Fixed { next: 0.0, step: 1.0 }
    }

    pub fn now_ms(&mut self) -> f64 {
        match self {
            Clock::Real(start) => start.elapsed().as_secs_f64() * 1000.0,
            Clock::Fixed { next, step } => {
                let v = *next;
                *next += *step;
                v
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Object {
    pub shape: ShapeId,
    pub slots: Vec<Value>,
}

/// Arena of objects and arrays, plus the shape table.
#[derive(Debug, Default)]
pub struct Heap {
    pub shapes: ShapeTable,
    objects: Vec<Object>,
    arrays: Vec<Vec<Value>>,
    unstable: Vec<bool>,
}

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    pub fn alloc_object(&mut self) -> Value {
        self.objects.push(Object { shape: self.shapes.root(), slots: Vec::new() });
        Value::Object(self.objects.len() as u32 - 1)
    }

    pub fn alloc_array(&mut self, elems: Vec<Value>) -> Value {
        self.arrays.push(elems);
        Value::Array(self.arrays.len() as u32 - 1)
    }

    pub fn object(&self, o: u32) -> &Object {
        &self.objects[o as usize]
    }

    pub fn shape_of(&self, o: u32) -> ShapeId {
        self.objects[o as usize].shape
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn is_unstable(&self, s: ShapeId) -> bool {
        self.unstable.get(s.0 as usize).copied().unwrap_or(false)
    }

    /// Marks `s` unstable; returns whether it was stable before.
    fn destabilize(&mut self, s: ShapeId) -> bool {
        let i = s.0 as usize;
        if self.unstable.len() <= i {
            self.unstable.resize(i + 1, false);
        }
        !std::mem::replace(&mut self.unstable[i], true)
    }

    /// Moves object `o` to shape `to`, returning `from` if it just became unstable.
    fn move_to(&mut self, o: u32, to: ShapeId) -> Option<ShapeId> {
        let from = self.objects[o as usize].shape;
        if from == to {
            return None;
        }
        self.objects[o as usize].shape = to;
        self.destabilize(from).then_some(from)
    }

    pub fn get_prop(&self, o: u32, name: &str) -> Value {
        let obj = &self.objects[o as usize];
        match self.shapes.lookup(obj.shape, name) {
            Some((slot, _)) => obj.slots[slot].clone(),
            None => Value::Undefined,
        }
    }

    /// By-name write that defines or retypes as needed. Returns a shape that
    /// just became unstable, if any.
    pub fn set_prop(&mut self, o: u32, name: &str, v: Value) -> Option<ShapeId> {
        let shape = self.objects[o as usize].shape;
        let tag = v.tag();
        match self.shapes.lookup(shape, name) {
            Some((slot, old)) => {
                self.objects[o as usize].slots[slot] = v;
                if old == tag {
                    return None;
                }
                let to = self.shapes.update_property_type(shape, name, tag).expect("property exists");
                self.move_to(o, to)
            }
            None => {
                let to = self.shapes.define_property(shape, name, tag).expect("property is new");
                self.objects[o as usize].slots.push(v);
                self.move_to(o, to)
            }
        }
    }

    pub fn read_slot(&self, o: u32, slot: usize) -> Value {
        self.objects[o as usize].slots[slot].clone()
    }

    /// Slot write whose shape transition, if any, was computed in advance.
    pub fn write_slot(&mut self, o: u32, slot: usize, v: Value, to: ShapeId) -> Option<ShapeId> {
        let obj = &mut self.objects[o as usize];
        if slot == obj.slots.len() {
            obj.slots.push(v);
        } else {
            obj.slots[slot] = v;
        }
        self.move_to(o, to)
    }

    pub fn array(&self, a: u32) -> &[Value] {
        &self.arrays[a as usize]
    }

    pub fn array_get(&self, a: u32, i: i32) -> Value {
        usize::try_from(i).ok().and_then(|i| self.arrays[a as usize].get(i).cloned()).unwrap_or(Value::Undefined)
    }

    pub fn array_set(&mut self, a: u32, i: i32, v: Value) -> Result<(), HaltKind> {
        let arr = &mut self.arrays[a as usize];
        let len = arr.len() as i64;
        let i = i as i64;
        if i < 0 || i > len + MAX_ARRAY_GAP {
            return Err(HaltKind::BadIndex);
        }
        let i = i as usize;
        if i >= arr.len() {
            arr.resize(i + 1, Value::Undefined);
        }
        arr[i] = v;
        Ok(())
    }

    /// Printable form of a value, as `print` shows it.
    pub fn display(&self, v: &Value) -> String {
        let mut out = String::new();
        self.display_into(v, &mut out, &mut Vec::new());
        out
    }

    fn display_into(&self, v: &Value, out: &mut String, open: &mut Vec<u32>) {
        match v {
            Value::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Value::Float(x) => out.push_str(&format_number(*x)),
            Value::Null => out.push_str("null"),
            Value::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Value::Undefined => out.push_str("undefined"),
            Value::Str(s) => out.push_str(s),
            Value::Closure(_) => out.push_str("function"),
            Value::Object(_) => out.push_str("[object Object]"),
            Value::Array(a) => {
                if open.contains(a) {
                    return;
                }
                open.push(*a);
                for (i, e) in self.arrays[*a as usize].iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    if !matches!(e, Value::Null | Value::Undefined) {
                        self.display_into(e, out, open);
                    }
                }
                open.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(500.0), "500");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_number(1e21), "1e+21");
        assert_eq!(format_number(1.5e-7), "1.5e-7");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(format_number(f64::NEG_INFINITY), "-Infinity");
        assert_eq!(format_number(123456789012.5), "123456789012.5");
    }

    #[test]
    fn int_arith_reports_inexact_results() {
        assert_eq!(int_arith(ArithOp::Add, i32::MAX, 1), None);
        assert_eq!(int_arith(ArithOp::Div, 7, 2), None);
        assert_eq!(int_arith(ArithOp::Div, 8, 2), Some(4));
        assert_eq!(int_arith(ArithOp::Div, i32::MIN, -1), None);
        assert_eq!(int_arith(ArithOp::Div, 1, 0), None);
        assert_eq!(int_mod(i32::MIN, -1), Ok(0));
        assert_eq!(int_mod(1, 0), Err(HaltKind::DivideByZero));
    }

    #[test]
    fn retyping_destabilizes_the_old_shape() {
        let mut h = Heap::new();
        let Value::Object(o) = h.alloc_object() else { unreachable!() };
        let root = h.shape_of(o);
        assert_eq!(h.set_prop(o, "x", Value::Int(1)), Some(root));
        let s1 = h.shape_of(o);
        assert!(!h.is_unstable(s1));
        assert_eq!(h.set_prop(o, "x", Value::Int(2)), None);
        assert_eq!(h.set_prop(o, "x", Value::Float(2.5)), Some(s1));
        assert!(h.is_unstable(s1));
        assert_eq!(h.get_prop(o, "x"), Value::Float(2.5));
        assert_eq!(h.get_prop(o, "y"), Value::Undefined);
    }

    #[test]
    fn arrays_display_and_grow() {
        let mut h = Heap::new();
        let Value::Array(a) = h.alloc_array(vec![Value::Int(1), Value::Null, Value::Float(2.5)]) else { unreachable!() };
        assert_eq!(h.display(&Value::Array(a)), "1,,2.5");
        h.array_set(a, 4, Value::Str("x".into())).unwrap();
        assert_eq!(h.display(&Value::Array(a)), "1,,2.5,,x");
        assert_eq!(h.array_set(a, -1, Value::Null), Err(HaltKind::BadIndex));
        assert_eq!(h.array_get(a, 99), Value::Undefined);
        let arr = Value::Array(a);
        h.array_set(a, 0, arr.clone()).unwrap();
        assert_eq!(h.display(&arr), ",,2.5,,x");
    }

    #[test]
    fn strict_equality() {
        assert!(strict_equals(&Value::Int(1), &Value::Float(1.0)));
        assert!(!strict_equals(&Value::Int(1), &Value::Str("1".into())));
        assert!(strict_equals(&Value::Null, &Value::Null));
        assert!(!strict_equals(&Value::Null, &Value::Undefined));
        assert!(!strict_equals(&Value::Float(f64::NAN), &Value::Float(f64::NAN)));
    }
}
