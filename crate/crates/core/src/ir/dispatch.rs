//! Tag-dispatch plans for polymorphic operators.
//!
//! A plan is a decision tree of tag tests over one or two operands. Tests
//! whose outcome follows from an operand's static kind are resolved while the
//! plan is built, so they never exist at run time. Lowering turns each
//! [`Plan::Test`] into a `TagTest` terminator; the reference interpreter walks
//! the same trees, which keeps both implicit-test counts in lock step.
//!
//! Operands are tested left first, then right.

use std::rc::Rc;

use super::StaticHalt;
use crate::typesys::TagKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    Const,
    Int,
    Float,
    Str,
    Fixed(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Leaf {
    /// Both operands int32.
    IntArith,
    FloatArith { conv_a: bool, conv_b: bool },
    Concat,
    IntCmp,
    FloatCmp { conv_a: bool, conv_b: bool },
    StrEq,
    /// Equality decided by the operand kinds alone.
    Known(bool),
    RefEq,
    IntNeg,
    FloatNeg,
    Truthy(Truth),
    /// The required kinds hold; perform the operation.
    Proceed,
    ArrayLen,
    StrLen,
    Halt(StaticHalt),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plan {
    Leaf(Leaf),
    Test { operand: Operand, kind: TagKind, yes: Box<Plan>, no: Box<Plan> },
}

/// Static kinds of the operands; `None` means only known at run time.
pub type Static = Option<TagKind>;

fn test(stat: Static, operand: Operand, kind: TagKind, yes: Plan, no: Plan) -> Plan {
    match stat {
        Some(k) if k == kind => yes,
        Some(_) => no,
        None => Plan::Test { operand, kind, yes: Box::new(yes), no: Box::new(no) },
    }
}

fn leaf(l: Leaf) -> Plan {
    Plan::Leaf(l)
}

fn unsupported(sym: &'static str) -> Plan {
    leaf(Leaf::Halt(StaticHalt::UnsupportedOperands(sym)))
}

/// `+ - * / %`. Only `+` accepts two strings.
pub fn arith(sym: &'static str, a: Static, b: Static) -> Plan {
    use Operand::*;
    use TagKind::*;
    let int_a = test(
        b,
        B,
        Int32,
        leaf(Leaf::IntArith),
        test(b, B, Float64, leaf(Leaf::FloatArith { conv_a: true, conv_b: false }), unsupported(sym)),
    );
    let float_a = test(
        b,
        B,
        Int32,
        leaf(Leaf::FloatArith { conv_a: false, conv_b: true }),
        test(b, B, Float64, leaf(Leaf::FloatArith { conv_a: false, conv_b: false }), unsupported(sym)),
    );
    let other = if sym == "+" {
        test(a, A, String, test(b, B, String, leaf(Leaf::Concat), unsupported(sym)), unsupported(sym))
    } else {
        unsupported(sym)
    };
    test(a, A, Int32, int_a, test(a, A, Float64, float_a, other))
}

/// `< <= > >=` on numbers.
pub fn compare(sym: &'static str, a: Static, b: Static) -> Plan {
    use Operand::*;
    use TagKind::*;
    let int_a = test(
        b,
        B,
        Int32,
        leaf(Leaf::IntCmp),
        test(b, B, Float64, leaf(Leaf::FloatCmp { conv_a: true, conv_b: false }), unsupported(sym)),
    );
    let float_a = test(
        b,
        B,
        Int32,
        leaf(Leaf::FloatCmp { conv_a: false, conv_b: true }),
        test(b, B, Float64, leaf(Leaf::FloatCmp { conv_a: false, conv_b: false }), unsupported(sym)),
    );
    test(a, A, Int32, int_a, test(a, A, Float64, float_a, unsupported(sym)))
}

/// Type-strict `==` (int32 and float64 compare numerically; `null == null`).
pub fn equality(a: Static, b: Static) -> Plan {
    match (a, b) {
        (Some(ka), None) => one_static(Operand::B, ka),
        (None, Some(kb)) => one_static(Operand::A, kb),
        _ => full_equality(a, b),
    }
}

/// Only operand `x` is unknown; the other has kind `k`.
fn one_static(x: Operand, k: TagKind) -> Plan {
    use TagKind::*;
    let num = |x_float: bool, k_float: bool| {
        if !x_float && !k_float {
            return leaf(Leaf::IntCmp);
        }
        let (conv_x, conv_k) = (!x_float, !k_float);
        let (conv_a, conv_b) = if x == Operand::A { (conv_x, conv_k) } else { (conv_k, conv_x) };
        leaf(Leaf::FloatCmp { conv_a, conv_b })
    };
    match k {
        Int32 | Float64 => {
            let kf = k == Float64;
            test(None, x, Int32, num(false, kf), test(None, x, Float64, num(true, kf), leaf(Leaf::Known(false))))
        }
        String => test(None, x, String, leaf(Leaf::StrEq), leaf(Leaf::Known(false))),
        Null => test(None, x, Null, leaf(Leaf::Known(true)), leaf(Leaf::Known(false))),
        Const | Array | Closure | Object => leaf(Leaf::RefEq),
    }
}

fn full_equality(a: Static, b: Static) -> Plan {
    use Operand::*;
    use TagKind::*;
    let f = || leaf(Leaf::Known(false));
    test(
        a,
        A,
        Int32,
        test(b, B, Int32, leaf(Leaf::IntCmp), test(b, B, Float64, leaf(Leaf::FloatCmp { conv_a: true, conv_b: false }), f())),
        test(
            a,
            A,
            Float64,
            test(
                b,
                B,
                Int32,
                leaf(Leaf::FloatCmp { conv_a: false, conv_b: true }),
                test(b, B, Float64, leaf(Leaf::FloatCmp { conv_a: false, conv_b: false }), f()),
            ),
            test(
                a,
                A,
                String,
                test(b, B, String, leaf(Leaf::StrEq), f()),
                test(a, A, Null, test(b, B, Null, leaf(Leaf::Known(true)), f()), leaf(Leaf::RefEq)),
            ),
        ),
    )
}

/// Truthiness for conditions, `!`, `&&` and `||`.
pub fn truthiness(a: Static) -> Plan {
    use Operand::A;
    use TagKind::*;
    test(
        a,
        A,
        Const,
        leaf(Leaf::Truthy(Truth::Const)),
        test(
            a,
            A,
            Int32,
            leaf(Leaf::Truthy(Truth::Int)),
            test(
                a,
                A,
                Null,
                leaf(Leaf::Truthy(Truth::Fixed(false))),
                test(
                    a,
                    A,
                    Float64,
                    leaf(Leaf::Truthy(Truth::Float)),
                    test(a, A, String, leaf(Leaf::Truthy(Truth::Str)), leaf(Leaf::Truthy(Truth::Fixed(true)))),
                ),
            ),
        ),
    )
}

/// Unary minus.
pub fn negate(a: Static) -> Plan {
    use Operand::A;
    use TagKind::*;
    test(a, A, Int32, leaf(Leaf::IntNeg), test(a, A, Float64, leaf(Leaf::FloatNeg), unsupported("-")))
}

/// `obj.name` read. `.length` also works on arrays and strings.
pub fn property_read(obj: Static, name: &Rc<str>) -> Plan {
    use Operand::A;
    use TagKind::*;
    let halt = leaf(Leaf::Halt(StaticHalt::NotAnObject(name.clone())));
    let other = if &**name == "length" {
        test(obj, A, Array, leaf(Leaf::ArrayLen), test(obj, A, String, leaf(Leaf::StrLen), halt))
    } else {
        halt
    };
    test(obj, A, Object, leaf(Leaf::Proceed), other)
}

/// `obj.name = v`.
pub fn property_write(obj: Static, name: &Rc<str>) -> Plan {
    test(
        obj,
        Operand::A,
        TagKind::Object,
        leaf(Leaf::Proceed),
        leaf(Leaf::Halt(StaticHalt::NotAnObject(name.clone()))),
    )
}

/// `arr[idx]`, read or write.
pub fn index(arr: Static, idx: Static) -> Plan {
    test(
        arr,
        Operand::A,
        TagKind::Array,
        test(idx, Operand::B, TagKind::Int32, leaf(Leaf::Proceed), leaf(Leaf::Halt(StaticHalt::BadIndex))),
        leaf(Leaf::Halt(StaticHalt::NotAnArray)),
    )
}

/// Callee check before a call or `new`.
pub fn callable(c: Static) -> Plan {
    test(c, Operand::A, TagKind::Closure, leaf(Leaf::Proceed), leaf(Leaf::Halt(StaticHalt::NotCallable)))
}

impl Plan {
    /// Walks the plan against run-time kinds, counting executed tests.
    pub fn eval(&self, a: TagKind, b: Option<TagKind>, tests: &mut u64) -> &Leaf {
        let mut p = self;
        loop {
            match p {
                Plan::Leaf(l) => return l,
                Plan::Test { operand, kind, yes, no } => {
                    *tests += 1;
                    let k = match operand {
                        Operand::A => a,
                        Operand::B => b.expect("binary plan needs a second operand"),
                    };
                    p = if k == *kind { yes } else { no };
                }
            }
        }
    }

    /// Number of test nodes in the tree.
    pub fn test_count(&self) -> usize {
        match self {
            Plan::Leaf(_) => 0,
            Plan::Test { yes, no, .. } => 1 + yes.test_count() + no.test_count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TagKind::*;

    fn count(p: &Plan, a: TagKind, b: Option<TagKind>) -> (u64, Leaf) {
        let mut n = 0;
        let l = p.eval(a, b, &mut n).clone();
        (n, l)
    }

    #[test]
    fn static_operands_need_no_tests() {
        assert_eq!(arith("+", Some(Int32), Some(Int32)), Plan::Leaf(Leaf::IntArith));
        assert_eq!(equality(Some(Null), Some(Null)), Plan::Leaf(Leaf::Known(true)));
        assert_eq!(truthiness(Some(Const)), Plan::Leaf(Leaf::Truthy(Truth::Const)));
        assert_eq!(callable(Some(Closure)), Plan::Leaf(Leaf::Proceed));
    }

    #[test]
    fn n_minus_one_tests_only_n() {
        let p = arith("-", None, Some(Int32));
        assert_eq!(count(&p, Int32, Some(Int32)), (1, Leaf::IntArith));
        assert_eq!(count(&p, Float64, Some(Int32)), (2, Leaf::FloatArith { conv_a: false, conv_b: true }));
        assert_eq!(count(&p, String, Some(Int32)).0, 2);
    }

    #[test]
    fn null_comparison_is_a_single_test() {
        let p = equality(None, Some(Null));
        assert_eq!(p.test_count(), 1);
        assert_eq!(count(&p, Object, Some(Null)), (1, Leaf::Known(false)));
        assert_eq!(count(&p, Null, Some(Null)), (1, Leaf::Known(true)));
    }

    #[test]
    fn equality_against_static_number_keeps_operand_order() {
        let p = equality(Some(Int32), None);
        assert_eq!(count(&p, Int32, Some(Float64)), (2, Leaf::FloatCmp { conv_a: true, conv_b: false }));
        let q = equality(None, Some(Float64));
        assert_eq!(count(&q, Int32, Some(Float64)), (1, Leaf::FloatCmp { conv_a: true, conv_b: false }));
    }

    #[test]
    fn full_cascade_ends_in_identity() {
        let p = equality(None, None);
        assert_eq!(count(&p, Object, Some(Object)), (4, Leaf::RefEq));
        assert_eq!(count(&p, Int32, Some(Int32)), (2, Leaf::IntCmp));
    }

    #[test]
    fn plus_accepts_strings_minus_does_not() {
        assert_eq!(count(&arith("+", None, None), String, Some(String)), (4, Leaf::Concat));
        assert!(matches!(count(&arith("-", None, None), String, Some(String)).1, Leaf::Halt(_)));
    }
}
