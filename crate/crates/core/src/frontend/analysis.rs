//! Name resolution facts shared by lowering and the reference interpreter.
//!
//! Both consumers must agree on which operand kinds are statically evident,
//! since that decides which implicit tag tests exist at all.

use std::collections::HashMap;

use super::ast::*;
use crate::typesys::TagKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Print,
    Clock,
    Error,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "print" => Some(Builtin::Print),
            "clock" => Some(Builtin::Clock),
            "Error" => Some(Builtin::Error),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Print => "print",
            Builtin::Clock => "clock",
            Builtin::Error => "Error",
        }
    }

    pub fn result_kind(self) -> TagKind {
        match self {
            Builtin::Print => TagKind::Const,
            Builtin::Clock => TagKind::Float64,
            Builtin::Error => TagKind::String,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalInfo {
    pub name: String,
    /// Assigned at exactly one site, in top-level code, outside any loop.
    pub single_assign: bool,
    /// Declared by a function declaration and never assigned elsewhere.
    pub const_function: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct GlobalTable {
    pub globals: Vec<GlobalInfo>,
    index: HashMap<String, u32>,
}

impl GlobalTable {
    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn const_function(&self, name: &str) -> Option<u32> {
        self.lookup(name).and_then(|g| self.globals[g as usize].const_function)
    }

    fn declare(&mut self, name: &str) -> u32 {
        if let Some(g) = self.lookup(name) {
            return g;
        }
        let g = self.globals.len() as u32;
        self.globals.push(GlobalInfo { name: name.to_string(), single_assign: false, const_function: None });
        self.index.insert(name.to_string(), g);
        g
    }
}

/// Names declared with `var` anywhere in `body`, in first-declaration order,
/// not descending into nested functions.
pub fn var_names(body: &[Stmt]) -> Vec<String> {
    fn visit(s: &Stmt, out: &mut Vec<String>) {
        match &s.kind {
            StmtKind::Var(decls) => {
                for d in decls {
                    if !out.contains(&d.name) {
                        out.push(d.name.clone());
                    }
                }
            }
            StmtKind::If { then, otherwise, .. } => {
                visit(then, out);
                if let Some(o) = otherwise {
                    visit(o, out);
                }
            }
            StmtKind::While { body, .. } => visit(body, out),
            StmtKind::Block(b) => b.iter().for_each(|s| visit(s, out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    body.iter().for_each(|s| visit(s, &mut out));
    out
}

/// Local names of a function: parameters first, then hoisted `var`s.
pub fn function_locals(f: &Function) -> Vec<String> {
    let mut out = f.params.clone();
    for v in var_names(&f.body) {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

#[derive(Default)]
struct Sites {
    count: u32,
    in_main_outside_loop: bool,
    function_decl: Option<u32>,
}

/// Collects every global and classifies its assignment sites.
pub fn analyze_globals(p: &Program) -> GlobalTable {
    let mut table = GlobalTable::default();
    let mut sites: HashMap<String, Sites> = HashMap::new();

    for s in &p.body {
        if let StmtKind::FunctionDecl(f) = &s.kind {
            if let Some(n) = &f.name {
                table.declare(n);
                let e = sites.entry(n.clone()).or_default();
                e.count += 1;
                e.in_main_outside_loop = true;
                e.function_decl = Some(f.index);
            }
        }
    }
    for v in var_names(&p.body) {
        table.declare(&v);
    }

    fn record(sites: &mut HashMap<String, Sites>, name: &str, main_outside_loop: bool) {
        let e = sites.entry(name.to_string()).or_default();
        e.count += 1;
        e.in_main_outside_loop = main_outside_loop;
        e.function_decl = None;
    }

    // Top-level statements.
    fn main_stmt(s: &Stmt, in_loop: bool, sites: &mut HashMap<String, Sites>) {
        match &s.kind {
            StmtKind::Var(decls) => {
                for d in decls {
                    if let Some(e) = &d.init {
                        main_expr(e, in_loop, sites);
                        record(sites, &d.name, !in_loop);
                    }
                }
            }
            StmtKind::If { cond, then, otherwise } => {
                main_expr(cond, in_loop, sites);
                main_stmt(then, in_loop, sites);
                if let Some(o) = otherwise {
                    main_stmt(o, in_loop, sites);
                }
            }
            StmtKind::While { cond, body } => {
                main_expr(cond, true, sites);
                main_stmt(body, true, sites);
            }
            StmtKind::Return(Some(e)) | StmtKind::Throw(e) | StmtKind::Expr(e) => main_expr(e, in_loop, sites),
            StmtKind::Block(b) => b.iter().for_each(|s| main_stmt(s, in_loop, sites)),
            StmtKind::Return(None) | StmtKind::FunctionDecl(_) | StmtKind::Empty => {}
        }
    }
    fn main_expr(e: &Expr, in_loop: bool, sites: &mut HashMap<String, Sites>) {
        walk_expr(e, &mut |x| {
            if let ExprKind::Assign { target, .. } = &x.kind {
                if let ExprKind::Ident(n) = &target.kind {
                    record(sites, n, !in_loop);
                }
            }
        });
    }
    for s in &p.body {
        main_stmt(s, false, &mut sites);
    }

    // Assignments from inside functions disqualify a global.
    for f in &p.functions {
        let locals = function_locals(f);
        walk_exprs(&f.body, &mut |x| {
            if let ExprKind::Assign { target, .. } = &x.kind {
                if let ExprKind::Ident(n) = &target.kind {
                    if !locals.contains(n) {
                        record(&mut sites, n, false);
                    }
                }
            }
        });
    }

    for g in table.globals.iter_mut() {
        if let Some(s) = sites.get(&g.name) {
            g.single_assign = s.count == 1 && s.in_main_outside_loop;
            g.const_function = if s.count == 1 { s.function_decl } else { None };
        }
    }
    table
}

/// Tag kind of `e` evident without running it, if any.
///
/// `is_local` reports whether a name is bound in the enclosing function.
pub fn static_kind(e: &Expr, is_local: &dyn Fn(&str) -> bool, globals: &GlobalTable) -> Option<TagKind> {
    match &e.kind {
        ExprKind::Int(_) => Some(TagKind::Int32),
        ExprKind::Float(_) => Some(TagKind::Float64),
        ExprKind::Str(_) => Some(TagKind::String),
        ExprKind::Bool(_) | ExprKind::Undefined => Some(TagKind::Const),
        ExprKind::Null => Some(TagKind::Null),
        ExprKind::Object(_) | ExprKind::New { .. } => Some(TagKind::Object),
        ExprKind::Array(_) => Some(TagKind::Array),
        ExprKind::Function(_) => Some(TagKind::Closure),
        ExprKind::Binary(op, _, _) if !op.is_arith() => Some(TagKind::Const),
        ExprKind::Unary(UnOp::Not, _) => Some(TagKind::Const),
        ExprKind::Ident(n) if !is_local(n) && globals.const_function(n).is_some() => Some(TagKind::Closure),
        ExprKind::Assign { op: None, value, .. } => static_kind(value, is_local, globals),
        ExprKind::Call { callee, .. } => match &callee.kind {
            ExprKind::Ident(n) if !is_local(n) && globals.lookup(n).is_none() => {
                Builtin::from_name(n).map(Builtin::result_kind)
            }
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    #[test]
    fn global_classification() {
        let p = parse_program(
            "g.js",
            "function f() { c = 1; return 0; } var a = 1; var b; b = 2; b = 3; var c = 0; \
             var d; while (d) { d = 1; } function f2() {} f2 = 1;",
        )
        .unwrap();
        let t = analyze_globals(&p);
        let info = |n: &str| t.globals[t.lookup(n).unwrap() as usize].clone();
        assert!(info("a").single_assign);
        assert!(!info("b").single_assign);
        assert!(!info("c").single_assign, "assigned inside a function");
        assert!(!info("d").single_assign, "assigned inside a loop");
        assert_eq!(info("f").const_function, Some(1));
        assert!(info("f").single_assign);
        assert_eq!(info("f2").const_function, None);
    }

    #[test]
    fn static_kinds() {
        let p = parse_program("s.js", "function f(x) { return x; } var y = f;").unwrap();
        let t = analyze_globals(&p);
        let no_locals = |_: &str| false;
        let kind = |src: &str| {
            let q = parse_program("e.js", &format!("{src};")).unwrap();
            let StmtKind::Expr(e) = &q.body[0].kind else { panic!() };
            static_kind(e, &no_locals, &t)
        };
        assert_eq!(kind("1"), Some(TagKind::Int32));
        assert_eq!(kind("1.5"), Some(TagKind::Float64));
        assert_eq!(kind("a < b"), Some(TagKind::Const));
        assert_eq!(kind("a + b"), None);
        assert_eq!(kind("f"), Some(TagKind::Closure));
        assert_eq!(kind("y"), None);
        assert_eq!(kind("clock()"), Some(TagKind::Float64));
        assert_eq!(kind("null"), Some(TagKind::Null));
        let shadowed = |n: &str| n == "f";
        let q = parse_program("e.js", "f;").unwrap();
        let StmtKind::Expr(e) = &q.body[0].kind else { panic!() };
        assert_eq!(static_kind(e, &shadowed, &t), None);
    }
}
