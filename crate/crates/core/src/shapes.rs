//! Typed object shapes.
//!
//! A shape describes an object's layout (which property lives in which slot)
//! and also the type tag of every property. Method identity is carried by
//! `closure/idN` property tags. Shapes form a transition tree rooted at the
//! empty shape; transitions are keyed by `(name, tag)` so that writing a
//! differently-typed value reuses a sibling shape.
//!
//! ```text
//!   root ──(val:int32)──> S ──(left:null)───> S' ──(right:null)───> S1
//!                          └──(left:object)─> S''──(right:object)─> S2
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::rc::Rc;

use thiserror::Error;

use crate::typesys::TypeTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShapeId(pub u32);

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// Property attribute flags. Carried for layout fidelity; the corpus
/// language never changes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropFlags {
    pub writable: bool,
    pub enumerable: bool,
}

impl Default for PropFlags {
    fn default() -> Self {
        Self { writable: true, enumerable: true }
    }
}

#[derive(Debug, Clone)]
pub struct Property {
    pub name: Rc<str>,
    pub slot: usize,
    pub tag: TypeTag,
    pub flags: PropFlags,
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub id: ShapeId,
    pub parent: Option<ShapeId>,
    /// Absent only on the root.
    pub prop: Option<Property>,
    /// Number of properties on the root path, i.e. slots an object needs.
    pub count: usize,
    transitions: HashMap<(Rc<str>, TypeTag), ShapeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("property `{0}` already defined on shape")]
    DuplicateProperty(String),
    #[error("property `{0}` missing from shape")]
    MissingProperty(String),
}

/// All shapes of one VM instance.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    shapes: Vec<Shape>,
    /// Number of re-typing transitions performed, for churn reporting.
    pub retypes: u64,
}

impl Default for ShapeTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ShapeTable {
    pub fn new() -> Self {
        let root = Shape {
            id: ShapeId(0),
            parent: None,
            prop: None,
            count: 0,
            transitions: HashMap::new(),
        };
        Self { shapes: vec![root], retypes: 0 }
    }

    pub fn root(&self) -> ShapeId {
        ShapeId(0)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, id: ShapeId) -> &Shape {
        &self.shapes[id.0 as usize]
    }

    pub fn count(&self, id: ShapeId) -> usize {
        self.get(id).count
    }

    /// Child of `s` that adds `name` with `tag` in the next free slot.
    pub fn define_property(
        &mut self,
        s: ShapeId,
        name: &str,
        tag: TypeTag,
    ) -> Result<ShapeId, ShapeError> {
        if self.lookup(s, name).is_some() {
            return Err(ShapeError::DuplicateProperty(name.to_string()));
        }
        Ok(self.transition(s, name, tag))
    }

    fn transition(&mut self, s: ShapeId, name: &str, tag: TypeTag) -> ShapeId {
        let name: Rc<str> = Rc::from(name);
        if let Some(&child) = self.get(s).transitions.get(&(name.clone(), tag)) {
            return child;
        }
        let id = ShapeId(self.shapes.len() as u32);
        let slot = self.get(s).count;
        self.shapes.push(Shape {
            id,
            parent: Some(s),
            prop: Some(Property { name: name.clone(), slot, tag, flags: PropFlags::default() }),
            count: slot + 1,
            transitions: HashMap::new(),
        });
        self.shapes[s.0 as usize].transitions.insert((name, tag), id);
        id
    }

    /// Shape identical to `s` except that `name` has tag `tag`. Slots are preserved.
    pub fn update_property_type(
        &mut self,
        s: ShapeId,
        name: &str,
        tag: TypeTag,
    ) -> Result<ShapeId, ShapeError> {
        let (_, old) = self
            .lookup(s, name)
            .ok_or_else(|| ShapeError::MissingProperty(name.to_string()))?;
        if old == tag {
            return Ok(s);
        }
        self.retypes += 1;
        // Rebuild the root path with the one tag substituted; interning makes
        // structurally equal results share an id.
        let path: Vec<Property> = self.root_path(s).cloned().collect();
        let mut cur = self.root();
        for p in path.iter().rev() {
            let t = if &*p.name == name { tag } else { p.tag };
            cur = self.transition(cur, &p.name, t);
        }
        Ok(cur)
    }

    /// Slot and tag of `name`, walking the root path.
    pub fn lookup(&self, s: ShapeId, name: &str) -> Option<(usize, TypeTag)> {
        self.root_path(s).find(|p| &*p.name == name).map(|p| (p.slot, p.tag))
    }

    /// Properties from `s` up to (excluding) the root, newest first.
    pub fn root_path(&self, s: ShapeId) -> impl Iterator<Item = &Property> + '_ {
        let mut cur = Some(s);
        std::iter::from_fn(move || loop {
            let shape = self.get(cur?);
            cur = shape.parent;
            if let Some(p) = &shape.prop {
                return Some(p);
            }
        })
    }

    /// Properties in slot order.
    pub fn properties(&self, s: ShapeId) -> Vec<Property> {
        let mut props: Vec<Property> = self.root_path(s).cloned().collect();
        props.reverse();
        props
    }

    /// Deterministic dump of the transition tree.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_rec(self.root(), 0, &mut out);
        out
    }

    fn dump_rec(&self, s: ShapeId, depth: usize, out: &mut String) {
        let shape = self.get(s);
        let indent = "  ".repeat(depth);
        match &shape.prop {
            None => {
                let _ = writeln!(out, "{indent}{s} root");
            }
            Some(p) => {
                let _ = writeln!(out, "{indent}{s} {}:{} slot={}", p.name, p.tag, p.slot);
            }
        }
        let mut children: Vec<ShapeId> = shape.transitions.values().copied().collect();
        children.sort();
        for c in children {
            self.dump_rec(c, depth + 1, out);
        }
    }

    /// One-line description of a shape's full layout.
    pub fn describe(&self, s: ShapeId) -> String {
        let props = self
            .properties(s)
            .iter()
            .map(|p| format!("{}:{}", p.name, p.tag))
            .collect::<Vec<_>>()
            .join(", ");
        format!("{s}{{{props}}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::FuncId;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn accumulator_shape() {
        let mut t = ShapeTable::new();
        let s_n = t.define_property(t.root(), "n", TypeTag::Int32).unwrap();
        assert_eq!(t.lookup(s_n, "n"), Some((0, TypeTag::Int32)));
        let id1 = TypeTag::ClosureKnown(FuncId(1));
        let id2 = TypeTag::ClosureKnown(FuncId(2));
        let s_add = t.define_property(s_n, "add", id1).unwrap();
        let s3 = t.define_property(s_add, "sub", id2).unwrap();
        assert_eq!(t.count(s3), 3);
        assert_eq!(t.lookup(s3, "add"), Some((1, id1)));
        assert_eq!(t.lookup(s3, "sub"), Some((2, id2)));
        assert_eq!(t.lookup(t.root(), "x"), None);
        // interning
        assert_eq!(t.define_property(t.root(), "n", TypeTag::Int32).unwrap(), s_n);
        assert!(matches!(
            t.define_property(s3, "n", TypeTag::Float64),
            Err(ShapeError::DuplicateProperty(_))
        ));
    }

    #[test]
    fn retyping_keeps_layout() {
        let mut t = ShapeTable::new();
        let s = t.define_property(t.root(), "n", TypeTag::Int32).unwrap();
        let s_prime = t.update_property_type(s, "n", TypeTag::Float64).unwrap();
        assert_ne!(s, s_prime);
        assert_eq!(t.lookup(s_prime, "n"), Some((0, TypeTag::Float64)));
        assert_eq!(t.update_property_type(s, "n", TypeTag::Int32).unwrap(), s);
        assert!(matches!(
            t.update_property_type(s, "m", TypeTag::Int32),
            Err(ShapeError::MissingProperty(_))
        ));

        let id1 = TypeTag::ClosureKnown(FuncId(1));
        let id2 = TypeTag::ClosureKnown(FuncId(2));
        let a = t.define_property(s, "add", id1).unwrap();
        let b = t.define_property(a, "sub", id2).unwrap();
        let b2 = t.update_property_type(b, "add", id2).unwrap();
        assert_eq!(t.lookup(b2, "add"), Some((1, id2)));
        assert_eq!(t.lookup(b2, "sub"), Some((2, id2)));
        // back again returns the original interned shape
        assert_eq!(t.update_property_type(b2, "add", id1).unwrap(), b);
    }

    fn arb_tag() -> impl Strategy<Value = TypeTag> {
        prop_oneof![
            Just(TypeTag::Int32),
            Just(TypeTag::Float64),
            Just(TypeTag::String),
            Just(TypeTag::Null),
            Just(TypeTag::Object),
            (1u32..3).prop_map(|f| TypeTag::ClosureKnown(FuncId(f))),
        ]
    }

    proptest! {
        // Random write sequences: the shape agrees with a naive name -> (slot, tag) map.
        #[test]
        fn lookup_agrees_with_map_oracle(
            writes in proptest::collection::vec((0usize..5, arb_tag()), 1..30)
        ) {
            let names = ["a", "b", "c", "d", "e"];
            let mut t = ShapeTable::new();
            let mut s = t.root();
            let mut oracle: BTreeMap<&str, (usize, TypeTag)> = BTreeMap::new();
            for (n, tag) in writes {
                let name = names[n];
                let before: Vec<(String, usize)> =
                    t.properties(s).iter().map(|p| (p.name.to_string(), p.slot)).collect();
                match oracle.get(name).copied() {
                    None => {
                        let slot = oracle.len();
                        oracle.insert(name, (slot, tag));
                        s = t.define_property(s, name, tag).unwrap();
                    }
                    Some((slot, old)) => {
                        oracle.insert(name, (slot, tag));
                        s = t.update_property_type(s, name, tag).unwrap();
                        if old != tag {
                            let after: Vec<(String, usize)> =
                                t.properties(s).iter().map(|p| (p.name.to_string(), p.slot)).collect();
                            prop_assert_eq!(before, after);
                        }
                    }
                }
                for (n2, v) in &oracle {
                    prop_assert_eq!(t.lookup(s, n2), Some(*v));
                }
                prop_assert_eq!(t.count(s), oracle.len());
            }
        }

        // Any two construction orders that yield the same (name, tag) sequence share an id.
        #[test]
        fn interning_is_structural(
            seq in proptest::collection::vec((0usize..4, arb_tag()), 1..8)
        ) {
            let names = ["w", "x", "y", "z"];
            let mut t = ShapeTable::new();
            let build = |t: &mut ShapeTable| {
                let mut s = t.root();
                for (n, tag) in &seq {
                    s = match t.lookup(s, names[*n]) {
                        None => t.define_property(s, names[*n], *tag).unwrap(),
                        Some(_) => t.update_property_type(s, names[*n], *tag).unwrap(),
                    };
                }
                s
            };
            let first = build(&mut t);
            let second = build(&mut t);
            prop_assert_eq!(first, second);
        }
    }
}
