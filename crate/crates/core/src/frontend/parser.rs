use std::rc::Rc;

use super::ast::*;
use super::lexer::{Keyword, Tok, Token};
use super::FrontendError;

/// Parses a token stream (from [`super::tokenize`]) into a [`Program`].
pub fn parse(path: &str, tokens: Vec<Token>) -> Result<Program, FrontendError> {
    let mut p = Parser { toks: tokens, pos: 0, functions: Vec::new() };
    let mut body = Vec::new();
    while !p.at_eof() {
        body.push(p.statement()?);
    }
    Ok(Program { path: path.to_string(), body, functions: p.functions })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    functions: Vec<Rc<Function>>,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> FrontendError {
        let span = self.span();
        FrontendError::Parse {
            line: span.line,
            col: span.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: Keyword) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&[p]))
        }
    }

    /// A statement ends at `;`, which may be left out right before `}`.
    fn end_statement(&mut self) -> PResult<()> {
        if self.is_punct("}") {
            Ok(())
        } else {
            self.expect_punct(";")
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.peek() {
            Tok::Kw(Keyword::Function) if matches!(self.peek_at(1), Tok::Ident(_)) => {
                StmtKind::FunctionDecl(self.function()?)
            }
            Tok::Kw(Keyword::Var) => {
                self.bump();
                let mut decls = Vec::new();
                loop {
                    let name = self.ident()?;
                    let init = if self.eat_punct("=") { Some(self.assignment()?) } else { None };
                    decls.push(Declarator { name, init });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.end_statement()?;
                StmtKind::Var(decls)
            }
            Tok::Kw(Keyword::If) => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expression()?;
                self.expect_punct(")")?;
                let then = Box::new(self.statement()?);
                let otherwise = if self.is_kw(Keyword::Else) {
                    self.bump();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, otherwise }
            }
            Tok::Kw(Keyword::While) => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expression()?;
                self.expect_punct(")")?;
                StmtKind::While { cond, body: Box::new(self.statement()?) }
            }
            Tok::Kw(Keyword::Return) => {
                self.bump();
                let value = if self.is_punct(";") || self.is_punct("}") { None } else { Some(self.expression()?) };
                self.end_statement()?;
                StmtKind::Return(value)
            }
            Tok::Kw(Keyword::Throw) => {
                self.bump();
                let e = self.expression()?;
                self.end_statement()?;
                StmtKind::Throw(e)
            }
            Tok::Punct("{") => {
                self.bump();
                let mut body = Vec::new();
                while !self.is_punct("}") {
                    if self.at_eof() {
                        return Err(self.error(&["}"]));
                    }
                    body.push(self.statement()?);
                }
                self.bump();
                StmtKind::Block(body)
            }
            Tok::Punct(";") => {
                self.bump();
                StmtKind::Empty
            }
            _ => {
                let e = self.expression()?;
                self.end_statement()?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { kind, span })
    }

    /// `function [name] (params) { body }`
    fn function(&mut self) -> PResult<Rc<Function>> {
        let span = self.span();
        self.bump(); // `function`
        let index = self.functions.len() as u32 + 1;
        // Reserve the index before the body so numbering is preorder.
        let placeholder = Rc::new(Function { index, name: None, params: vec![], body: vec![], span });
        self.functions.push(placeholder);
        let name = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return Err(self.error(&["}"]));
            }
            body.push(self.statement()?);
        }
        self.bump();
        let f = Rc::new(Function { index, name, params, body, span });
        self.functions[index as usize - 1] = f.clone();
        Ok(f)
    }

    fn expression(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.logical_or()?;
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinOp::Add),
            Tok::Punct("-=") => Some(BinOp::Sub),
            Tok::Punct("*=") => Some(BinOp::Mul),
            Tok::Punct("/=") => Some(BinOp::Div),
            Tok::Punct("%=") => Some(BinOp::Mod),
            _ => return Ok(lhs),
        };
        if !matches!(lhs.kind, ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::Index { .. }) {
            return Err(self.error(&[";"]));
        }
        self.bump();
        let value = self.assignment()?;
        let span = lhs.span;
        Ok(Expr {
            kind: ExprKind::Assign { target: Box::new(lhs), op, value: Box::new(value) },
            span,
        })
    }

    fn logical_or(&mut self) -> PResult<Expr> {
        let mut lhs = self.logical_and()?;
        while self.is_punct("||") {
            self.bump();
            let rhs = self.logical_and()?;
            let span = lhs.span;
            lhs = Expr { kind: ExprKind::Logical(LogicalOp::Or, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn logical_and(&mut self) -> PResult<Expr> {
        let mut lhs = self.equality()?;
        while self.is_punct("&&") {
            self.bump();
            let rhs = self.equality()?;
            let span = lhs.span;
            lhs = Expr { kind: ExprKind::Logical(LogicalOp::And, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.is_punct(sym) {
                    self.bump();
                    let rhs = next(self)?;
                    let span = lhs.span;
                    lhs = Expr { kind: ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)), span };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn equality(&mut self) -> PResult<Expr> {
        self.binary_level(&[("==", BinOp::Eq), ("!=", BinOp::Ne)], Self::comparison)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[("<=", BinOp::Le), (">=", BinOp::Ge), ("<", BinOp::Lt), (">", BinOp::Gt)],
            Self::additive,
        )
    }

    fn additive(&mut self) -> PResult<Expr> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        self.binary_level(&[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Mod)], Self::unary)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(e)), span });
        }
        if self.eat_punct("-") {
            let e = self.unary()?;
            // Fold negative numeric literals so `-1` is a literal, like in the source.
            let kind = match e.kind {
                ExprKind::Int(n) if n != 0 => ExprKind::Int(-n),
                ExprKind::Float(x) if !x.is_nan() && x != 0.0 => ExprKind::Float(-x),
                other => ExprKind::Unary(UnOp::Neg, Box::new(Expr { kind: other, span: e.span })),
            };
            return Ok(Expr { kind, span });
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.assignment()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = if self.is_kw(Keyword::New) {
            let span = self.span();
            self.bump();
            let mut callee = self.primary()?;
            while self.is_punct(".") {
                self.bump();
                let prop = self.ident()?;
                let s = callee.span;
                callee = Expr { kind: ExprKind::Member { object: Box::new(callee), prop }, span: s };
            }
            let args = if self.is_punct("(") { self.args()? } else { Vec::new() };
            Expr { kind: ExprKind::New { callee: Box::new(callee), args }, span }
        } else {
            self.primary()?
        };
        loop {
            let span = e.span;
            if self.eat_punct(".") {
                let prop = self.ident()?;
                e = Expr { kind: ExprKind::Member { object: Box::new(e), prop }, span };
            } else if self.eat_punct("[") {
                let index = self.expression()?;
                self.expect_punct("]")?;
                e = Expr { kind: ExprKind::Index { object: Box::new(e), index: Box::new(index) }, span };
            } else if self.is_punct("(") {
                let args = self.args()?;
                e = Expr { kind: ExprKind::Call { callee: Box::new(e), args }, span };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::Float(x) => {
                self.bump();
                ExprKind::Float(x)
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            Tok::Ident(s) => {
                self.bump();
                ExprKind::Ident(s)
            }
            Tok::Kw(Keyword::True) => {
                self.bump();
                ExprKind::Bool(true)
            }
            Tok::Kw(Keyword::False) => {
                self.bump();
                ExprKind::Bool(false)
            }
            Tok::Kw(Keyword::Null) => {
                self.bump();
                ExprKind::Null
            }
            Tok::Kw(Keyword::Undefined) => {
                self.bump();
                ExprKind::Undefined
            }
            Tok::Kw(Keyword::This) => {
                self.bump();
                ExprKind::This
            }
            Tok::Kw(Keyword::Function) => ExprKind::Function(self.function()?),
            Tok::Punct("(") => {
                self.bump();
                let e = self.expression()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Punct("{") => {
                self.bump();
                let mut fields = Vec::new();
                if !self.is_punct("}") {
                    loop {
                        let name = match self.peek().clone() {
                            Tok::Ident(s) | Tok::Str(s) => {
                                self.bump();
                                s
                            }
                            _ => return Err(self.error(&["property name"])),
                        };
                        self.expect_punct(":")?;
                        fields.push((name, self.assignment()?));
                        if !self.eat_punct(",") || self.is_punct("}") {
                            break;
                        }
                    }
                }
                self.expect_punct("}")?;
                ExprKind::Object(fields)
            }
            Tok::Punct("[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.is_punct("]") {
                    loop {
                        items.push(self.assignment()?);
                        if !self.eat_punct(",") || self.is_punct("]") {
                            break;
                        }
                    }
                }
                self.expect_punct("]")?;
                ExprKind::Array(items)
            }
            _ => return Err(self.error(&["expression"])),
        };
        Ok(Expr { kind, span })
    }
}
