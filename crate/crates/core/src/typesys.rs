//! Type tags and the versioning contexts built from them.
//!
//! A [`TypeTag`] is the coarse, first-degree type of a runtime value. A
//! [`TypeContext`] maps live registers to what the compiler knows about them
//! at a block boundary; its canonical [`ContextKey`] is what block versions,
//! entry points and continuations are cached under.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ir::{FuncId, Reg};
use crate::shapes::ShapeId;

/// The runtime tag categories that a dynamic tag test can check for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TagKind {
    Int32,
    Float64,
    Null,
    Const,
    String,
    Array,
    Closure,
    Object,
}

impl TagKind {
    pub const ALL: [TagKind; 8] = [
        TagKind::Int32,
        TagKind::Float64,
        TagKind::Null,
        TagKind::Const,
        TagKind::String,
        TagKind::Array,
        TagKind::Closure,
        TagKind::Object,
    ];

    /// The least precise tag that still proves this kind.
    pub fn tag(self) -> TypeTag {
        match self {
            TagKind::Int32 => TypeTag::Int32,
            TagKind::Float64 => TypeTag::Float64,
            TagKind::Null => TypeTag::Null,
            TagKind::Const => TypeTag::Const,
            TagKind::String => TypeTag::String,
            TagKind::Array => TypeTag::Array,
            TagKind::Closure => TypeTag::ClosureUnknown,
            TagKind::Object => TypeTag::Object,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TagKind::Int32 => "int32",
            TagKind::Float64 => "float64",
            TagKind::Null => "null",
            TagKind::Const => "const",
            TagKind::String => "string",
            TagKind::Array => "array",
            TagKind::Closure => "closure",
            TagKind::Object => "object",
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Element of the tag lattice. `Unknown` is the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Int32,
    Float64,
    Null,
    Const,
    String,
    Array,
    ClosureKnown(FuncId),
    ClosureUnknown,
    Object,
    Unknown,
}

impl TypeTag {
    /// Tag kind this tag belongs to, `None` for `Unknown`.
    pub fn kind(self) -> Option<TagKind> {
        Some(match self {
            TypeTag::Int32 => TagKind::Int32,
            TypeTag::Float64 => TagKind::Float64,
            TypeTag::Null => TagKind::Null,
            TypeTag::Const => TagKind::Const,
            TypeTag::String => TagKind::String,
            TypeTag::Array => TagKind::Array,
            TypeTag::ClosureKnown(_) | TypeTag::ClosureUnknown => TagKind::Closure,
            TypeTag::Object => TagKind::Object,
            TypeTag::Unknown => return None,
        })
    }

    /// Whether a context entry with this tag may also carry a shape.
    pub fn may_have_shape(self) -> bool {
        matches!(
            self,
            TypeTag::Object | TypeTag::Array | TypeTag::ClosureKnown(_) | TypeTag::ClosureUnknown
        )
    }

    /// Lattice order: `self` is at least as precise as `other`.
    pub fn le(self, other: TypeTag) -> bool {
        self == other
            || other == TypeTag::Unknown
            || matches!((self, other), (TypeTag::ClosureKnown(_), TypeTag::ClosureUnknown))
    }

    /// Whether a runtime value carrying `runtime` satisfies this tag.
    pub fn admits(self, runtime: TypeTag) -> bool {
        runtime.le(self)
    }

    /// Stable textual name, as used in reports (`closure/idN` for known closures).
    pub fn name(self) -> String {
        match self {
            TypeTag::ClosureKnown(f) => format!("closure/id{}", f.0),
            TypeTag::ClosureUnknown => "closure".to_string(),
            TypeTag::Unknown => "unknown".to_string(),
            other => other.kind().map(|k| k.name().to_string()).unwrap_or_default(),
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for TypeTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

/// Least upper bound of two tags.
pub fn join(a: TypeTag, b: TypeTag) -> TypeTag {
    use TypeTag::*;
    match (a, b) {
        _ if a == b => a,
        (ClosureKnown(_), ClosureKnown(_))
        | (ClosureKnown(_), ClosureUnknown)
        | (ClosureUnknown, ClosureKnown(_)) => ClosureUnknown,
        _ => Unknown,
    }
}

/// Greatest lower bound, `None` when the tags are disjoint.
pub fn meet(a: TypeTag, b: TypeTag) -> Option<TypeTag> {
    if a.le(b) {
        Some(a)
    } else if b.le(a) {
        Some(b)
    } else {
        None
    }
}

/// What the compiler knows about one register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Known {
    pub tag: TypeTag,
    pub shape: Option<ShapeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("refine conflict on {reg}: context says {old}, refinement says {new}")]
pub struct RefineConflict {
    pub reg: Reg,
    pub old: TypeTag,
    pub new: TypeTag,
}

/// Map from live registers to known tags and shapes. Absent means unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TypeContext {
    entries: BTreeMap<Reg, Known>,
}

impl TypeContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, reg: Reg) -> Option<Known> {
        self.entries.get(&reg).copied()
    }

    pub fn tag(&self, reg: Reg) -> TypeTag {
        self.entries.get(&reg).map_or(TypeTag::Unknown, |k| k.tag)
    }

    pub fn shape(&self, reg: Reg) -> Option<ShapeId> {
        self.entries.get(&reg).and_then(|k| k.shape)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Reg, Known)> + '_ {
        self.entries.iter().map(|(r, k)| (*r, *k))
    }

    /// Overwrites whatever was known about `reg` (a fresh definition).
    pub fn set(&mut self, reg: Reg, tag: TypeTag, shape: Option<ShapeId>) {
        if tag == TypeTag::Unknown {
            self.entries.remove(&reg);
        } else {
            let shape = shape.filter(|_| tag.may_have_shape());
            self.entries.insert(reg, Known { tag, shape });
        }
    }

    pub fn forget(&mut self, reg: Reg) {
        self.entries.remove(&reg);
    }

    /// Drops the shape of every entry matching `pred`, keeping tags.
    pub fn drop_shapes_where(&mut self, mut pred: impl FnMut(Reg, ShapeId) -> bool) {
        for (reg, k) in self.entries.iter_mut() {
            if let Some(s) = k.shape {
                if pred(*reg, s) {
                    k.shape = None;
                }
            }
        }
    }

    /// Replaces every shape by `None`.
    pub fn without_shapes(&self) -> TypeContext {
        let mut out = self.clone();
        out.drop_shapes_where(|_, _| true);
        out
    }

    /// Keeps only the registers in `live` (sorted or not).
    pub fn restricted(&self, live: &[Reg]) -> TypeContext {
        let entries = live
            .iter()
            .filter_map(|r| self.entries.get(r).map(|k| (*r, *k)))
            .collect();
        TypeContext { entries }
    }

    /// Narrows what is known about `reg`. Never widens.
    pub fn refine(
        &self,
        reg: Reg,
        tag: TypeTag,
        shape: Option<ShapeId>,
    ) -> Result<TypeContext, RefineConflict> {
        let mut out = self.clone();
        let old = self.get(reg);
        let old_tag = old.map_or(TypeTag::Unknown, |k| k.tag);
        let new_tag = meet(old_tag, tag).ok_or(RefineConflict { reg, old: old_tag, new: tag })?;
        let new_shape = shape.or(old.and_then(|k| k.shape));
        out.set(reg, new_tag, new_shape);
        Ok(out)
    }

    pub fn key(&self) -> ContextKey {
        context_key(self)
    }
}

impl fmt::Display for TypeContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (reg, k)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{reg}: {}", k.tag)?;
            if let Some(s) = k.shape {
                write!(f, "@{s}")?;
            }
        }
        f.write_str("}")
    }
}

impl FromIterator<(Reg, TypeTag)> for TypeContext {
    fn from_iter<I: IntoIterator<Item = (Reg, TypeTag)>>(iter: I) -> Self {
        let mut ctx = TypeContext::new();
        for (r, t) in iter {
            ctx.set(r, t, None);
        }
        ctx
    }
}

/// Canonical byte encoding of a [`TypeContext`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey(Vec<u8>);

impl ContextKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

fn encode_tag(out: &mut Vec<u8>, tag: TypeTag) {
    let (code, payload) = match tag {
        TypeTag::Int32 => (0u8, None),
        TypeTag::Float64 => (1, None),
        TypeTag::Null => (2, None),
        TypeTag::Const => (3, None),
        TypeTag::String => (4, None),
        TypeTag::Array => (5, None),
        TypeTag::ClosureKnown(f) => (6, Some(f.0)),
        TypeTag::ClosureUnknown => (7, None),
        TypeTag::Object => (8, None),
        TypeTag::Unknown => (9, None),
    };
    out.push(code);
    if let Some(p) = payload {
        out.extend_from_slice(&p.to_be_bytes());
    }
}

pub fn context_key(ctx: &TypeContext) -> ContextKey {
    // BTreeMap iteration is ordered by register, so insertion order never leaks in.
    let mut out = Vec::with_capacity(ctx.len() * 10);
    for (reg, k) in &ctx.entries {
        out.extend_from_slice(&reg.0.to_be_bytes());
        encode_tag(&mut out, k.tag);
        match k.shape {
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.0.to_be_bytes());
            }
            None => out.push(0),
        }
    }
    ContextKey(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_tags() -> Vec<TypeTag> {
        vec![
            TypeTag::Int32,
            TypeTag::Float64,
            TypeTag::Null,
            TypeTag::Const,
            TypeTag::String,
            TypeTag::Array,
            TypeTag::ClosureKnown(FuncId(1)),
            TypeTag::ClosureKnown(FuncId(2)),
            TypeTag::ClosureUnknown,
            TypeTag::Object,
            TypeTag::Unknown,
        ]
    }

    #[test]
    fn join_examples() {
        assert_eq!(join(TypeTag::Int32, TypeTag::Int32), TypeTag::Int32);
        assert_eq!(
            join(TypeTag::ClosureKnown(FuncId(1)), TypeTag::ClosureKnown(FuncId(2))),
            TypeTag::ClosureUnknown
        );
        assert_eq!(join(TypeTag::Float64, TypeTag::String), TypeTag::Unknown);
    }

    #[test]
    fn lattice_laws_exhaustive() {
        let tags = all_tags();
        for &a in &tags {
            assert_eq!(join(a, a), a);
            assert!(a.le(TypeTag::Unknown));
            for &b in &tags {
                let j = join(a, b);
                assert_eq!(j, join(b, a), "commutative {a} {b}");
                assert!(a.le(j) && b.le(j), "upper bound {a} {b}");
                // least: any common upper bound is above the join
                for &c in &tags {
                    if a.le(c) && b.le(c) {
                        assert!(j.le(c), "least {a} {b} {c}");
                    }
                    assert_eq!(join(join(a, b), c), join(a, join(b, c)));
                }
            }
        }
    }

    #[test]
    fn refine_examples() {
        let n = Reg(1);
        let ctx = TypeContext::new().refine(n, TypeTag::Int32, None).unwrap();
        assert_eq!(ctx.tag(n), TypeTag::Int32);

        let tree = Reg(2);
        let obj = TypeContext::new().refine(tree, TypeTag::Object, None).unwrap();
        let s2 = ShapeId(7);
        let refined = obj.refine(tree, TypeTag::Object, Some(s2)).unwrap();
        assert_eq!(refined.get(tree), Some(Known { tag: TypeTag::Object, shape: Some(s2) }));

        let err = ctx.refine(n, TypeTag::String, None).unwrap_err();
        assert_eq!(err.old, TypeTag::Int32);
    }

    #[test]
    fn refine_closure_narrows_but_never_widens() {
        let r = Reg(0);
        let ctx = TypeContext::new().refine(r, TypeTag::ClosureUnknown, None).unwrap();
        let known = ctx.refine(r, TypeTag::ClosureKnown(FuncId(3)), None).unwrap();
        assert_eq!(known.tag(r), TypeTag::ClosureKnown(FuncId(3)));
        let again = known.refine(r, TypeTag::ClosureUnknown, None).unwrap();
        assert_eq!(again.tag(r), TypeTag::ClosureKnown(FuncId(3)));
    }

    #[test]
    fn refine_is_monotone_exhaustive() {
        let r = Reg(0);
        for &old in &all_tags() {
            for &new in &all_tags() {
                let base: TypeContext = [(r, old)].into_iter().collect();
                if let Ok(out) = base.refine(r, new, None) {
                    assert!(out.tag(r).le(old), "{old} refined by {new} widened");
                }
            }
        }
    }

    #[test]
    fn key_is_order_independent() {
        assert_eq!(TypeContext::new().key(), TypeContext::new().key());
        let a: TypeContext = [(Reg(1), TypeTag::Int32), (Reg(2), TypeTag::Float64)].into_iter().collect();
        let b: TypeContext = [(Reg(2), TypeTag::Float64), (Reg(1), TypeTag::Int32)].into_iter().collect();
        assert_eq!(a.key(), b.key());
    }

    #[test]
    fn shapes_only_on_heap_tags() {
        let mut ctx = TypeContext::new();
        ctx.set(Reg(0), TypeTag::Int32, Some(ShapeId(1)));
        assert_eq!(ctx.shape(Reg(0)), None);
        ctx.set(Reg(1), TypeTag::Object, Some(ShapeId(1)));
        assert_eq!(ctx.shape(Reg(1)), Some(ShapeId(1)));
    }

    fn arb_tag() -> impl Strategy<Value = TypeTag> {
        prop_oneof![
            Just(TypeTag::Int32),
            Just(TypeTag::Float64),
            Just(TypeTag::Null),
            Just(TypeTag::Const),
            Just(TypeTag::String),
            Just(TypeTag::Array),
            (0u32..4).prop_map(|f| TypeTag::ClosureKnown(FuncId(f))),
            Just(TypeTag::ClosureUnknown),
            Just(TypeTag::Object),
        ]
    }

    fn arb_ctx() -> impl Strategy<Value = TypeContext> {
        proptest::collection::vec((0u32..6, arb_tag(), proptest::option::of(0u32..3)), 0..6).prop_map(
            |items| {
                let mut ctx = TypeContext::new();
                for (r, t, s) in items {
                    ctx.set(Reg(r), t, s.map(ShapeId));
                }
                ctx
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn key_equality_iff_context_equality(a in arb_ctx(), b in arb_ctx()) {
            prop_assert_eq!(a == b, a.key() == b.key());
        }
    }
}
