use std::fmt::Write as _;

use super::ast::*;

/// Prints a program back to source, fully parenthesizing operators so that
/// re-parsing yields a structurally equal tree.
pub fn unparse(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.body {
        stmt(&mut out, s, 0);
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::FunctionDecl(f) => {
            function(out, f, depth);
            out.push('\n');
        }
        StmtKind::Var(decls) => {
            out.push_str("var ");
            for (i, d) in decls.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&d.name);
                if let Some(e) = &d.init {
                    out.push_str(" = ");
                    expr(out, e);
                }
            }
            out.push_str(";\n");
        }
        StmtKind::If { cond, then, otherwise } => {
            out.push_str("if (");
            expr(out, cond);
            out.push_str(")\n");
            stmt(out, then, depth + 1);
            if let Some(o) = otherwise {
                indent(out, depth);
                out.push_str("else\n");
                stmt(out, o, depth + 1);
            }
        }
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            expr(out, cond);
            out.push_str(")\n");
            stmt(out, body, depth + 1);
        }
        StmtKind::Return(e) => {
            out.push_str("return");
            if let Some(e) = e {
                out.push(' ');
                expr(out, e);
            }
            out.push_str(";\n");
        }
        StmtKind::Throw(e) => {
            out.push_str("throw ");
            expr(out, e);
            out.push_str(";\n");
        }
        StmtKind::Expr(e) => {
            match &e.kind {
                ExprKind::Function(_) | ExprKind::Object(_) => {
                    out.push('(');
                    expr(out, e);
                    out.push(')');
                }
                ExprKind::Assign { target, op, value } => assign(out, target, *op, value),
                _ => expr(out, e),
            }
            out.push_str(";\n");
        }
        StmtKind::Block(body) => {
            out.push_str("{\n");
            for s in body {
                stmt(out, s, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Empty => out.push_str(";\n"),
    }
}

fn function(out: &mut String, f: &Function, depth: usize) {
    out.push_str("function");
    if let Some(n) = &f.name {
        out.push(' ');
        out.push_str(n);
    }
    out.push('(');
    out.push_str(&f.params.join(", "));
    out.push_str(") {\n");
    for s in &f.body {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn assign(out: &mut String, target: &Expr, op: Option<BinOp>, value: &Expr) {
    expr(out, target);
    match op {
        Some(op) => {
            let _ = write!(out, " {}= ", op.symbol());
        }
        None => out.push_str(" = "),
    }
    expr(out, value);
}

pub(crate) fn float_literal(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "1e999".into() } else { "-1e999".into() };
    }
    if x.is_nan() {
        return "(0.0 / 0.0)".into();
    }
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn string_literal(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn is_plain_key(k: &str) -> bool {
    let mut chars = k.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$');
    first_ok
        && k.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        && super::tokenize(k).is_ok_and(|t| matches!(t[0].tok, super::lexer::Tok::Ident(_)))
}

/// Operand of `.`, `[]`, `()` or `new`: parenthesized unless it is already postfix-shaped.
fn postfix_operand(out: &mut String, e: &Expr) {
    let bare = matches!(
        e.kind,
        ExprKind::Ident(_)
            | ExprKind::This
            | ExprKind::Member { .. }
            | ExprKind::Index { .. }
            | ExprKind::Call { .. }
            | ExprKind::Str(_)
            | ExprKind::Array(_)
            | ExprKind::Bool(_)
            | ExprKind::Null
            | ExprKind::Undefined
    );
    if bare {
        expr(out, e);
    } else {
        out.push('(');
        expr(out, e);
        out.push(')');
    }
}

fn new_callee(out: &mut String, e: &Expr) {
    fn simple(e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Ident(_) | ExprKind::This => true,
            ExprKind::Member { object, .. } => simple(object),
            _ => false,
        }
    }
    if simple(e) {
        expr(out, e);
    } else {
        out.push('(');
        expr(out, e);
        out.push(')');
    }
}

fn args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, a);
    }
    out.push(')');
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Float(x) => out.push_str(&float_literal(*x)),
        ExprKind::Str(s) => string_literal(out, s),
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Null => out.push_str("null"),
        ExprKind::Undefined => out.push_str("undefined"),
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::This => out.push_str("this"),
        ExprKind::Function(f) => function(out, f, 0),
        ExprKind::Object(fields) => {
            out.push('{');
            for (i, (k, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                if is_plain_key(k) {
                    out.push_str(k);
                } else {
                    string_literal(out, k);
                }
                out.push_str(": ");
                expr(out, v);
            }
            out.push('}');
        }
        ExprKind::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, v);
            }
            out.push(']');
        }
        ExprKind::Unary(op, a) => {
            out.push('(');
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            expr(out, a);
            out.push(')');
        }
        ExprKind::Binary(op, a, b) => {
            out.push('(');
            expr(out, a);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, b);
            out.push(')');
        }
        ExprKind::Logical(op, a, b) => {
            out.push('(');
            expr(out, a);
            out.push_str(match op {
                LogicalOp::And => " && ",
                LogicalOp::Or => " || ",
            });
            expr(out, b);
            out.push(')');
        }
        ExprKind::Assign { target, op, value } => {
            out.push('(');
            assign(out, target, *op, value);
            out.push(')');
        }
        ExprKind::Member { object, prop } => {
            postfix_operand(out, object);
            out.push('.');
            out.push_str(prop);
        }
        ExprKind::Index { object, index } => {
            postfix_operand(out, object);
            out.push('[');
            expr(out, index);
            out.push(']');
        }
        ExprKind::Call { callee, args: a } => {
            postfix_operand(out, callee);
            args(out, a);
        }
        ExprKind::New { callee, args: a } => {
            out.push_str("new ");
            new_callee(out, callee);
            args(out, a);
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::parse_program;

    fn round_trip(src: &str) {
        let p1 = parse_program("t.js", src).unwrap();
        let text = super::unparse(&p1);
        let p2 = parse_program("t.js", &text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(p1, p2, "\n{text}");
    }

    #[test]
    fn corpus_round_trips() {
        for (name, src) in crate::corpus::all() {
            let p1 = parse_program(name, src).unwrap();
            let p2 = parse_program(name, &super::unparse(&p1)).unwrap();
            assert_eq!(p1, p2, "{name}");
        }
    }

    #[test]
    fn awkward_shapes_round_trip() {
        round_trip("var o = {a: 1, \"b c\": [1, 2.5, \"x\\n\"]}; (function () { return 1; })();");
        round_trip("x = (1).y; z = new (f())(); w = new a.b.C(); q = -(1 + 2); r = !(!t);");
        round_trip("if (a) { if (b) x = 1; } else y = 2; ; while (0) {}");
        round_trip("var inf = 1e999; var m = -1e999; var t = 1.5e-7; var big = 3000000000;");
        round_trip("a.b[c].d(e)[f] += g.h = 3;");
    }
}
