use std::fmt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Int(i32),
    Float(f64),
    Str(String),
    Ident(String),
    Kw(Keyword),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Function,
    Var,
    If,
    Else,
    While,
    Return,
    Throw,
    New,
    This,
    True,
    False,
    Null,
    Undefined,
}

impl Keyword {
    fn from_str(s: &str) -> Option<Keyword> {
        Some(match s {
            "function" => Keyword::Function,
            "var" => Keyword::Var,
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "while" => Keyword::While,
            "return" => Keyword::Return,
            "throw" => Keyword::Throw,
            "new" => Keyword::New,
            "this" => Keyword::This,
            "true" => Keyword::True,
            "false" => Keyword::False,
            "null" => Keyword::Null,
            "undefined" => Keyword::Undefined,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Function => "function",
            Keyword::Var => "var",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::While => "while",
            Keyword::Return => "return",
            Keyword::Throw => "throw",
            Keyword::New => "new",
            Keyword::This => "this",
            Keyword::True => "true",
            Keyword::False => "false",
            Keyword::Null => "null",
            Keyword::Undefined => "undefined",
        }
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Float(x) => write!(f, "{x}"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Kw(k) => f.write_str(k.as_str()),
            Tok::Punct(p) => f.write_str(p),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first so that `<=` wins over `<`.
const PUNCTS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "(", ")", "{", "}", "[", "]",
    ";", ",", ".", ":", "=", "+", "-", "*", "/", "%", "<", ">", "!",
];

/// Splits source text into tokens. The result always ends with [`Tok::Eof`].
pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let src = src.replace("\r\n", "\n");
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1u32, 1u32);

    let err = |line, col, message: String| FrontendError::Lex { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            col += 2;
            loop {
                if i >= chars.len() {
                    return Err(err(span.line, span.col, "unterminated comment".into()));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    i += 2;
                    col += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    return Err(err(line, col + (i - start) as u32, "malformed exponent".into()));
                }
            }
            if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                return Err(err(line, col + (i - start) as u32, "identifier directly after number".into()));
            }
            let text: String = chars[start..i].iter().collect();
            let tok = match (is_float, text.parse::<i32>()) {
                (false, Ok(n)) => Tok::Int(n),
                _ => Tok::Float(text.parse::<f64>().map_err(|e| err(line, col, e.to_string()))?),
            };
            out.push(Token { tok, span });
            col += (i - start) as u32;
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let tok = match Keyword::from_str(&text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push(Token { tok, span });
            col += (i - start) as u32;
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(span.line, span.col, "unterminated string".into()));
                };
                i += 1;
                col += 1;
                if ch == quote {
                    break;
                }
                match ch {
                    '\n' => return Err(err(span.line, span.col, "unterminated string".into())),
                    '\\' => {
                        let Some(&esc) = chars.get(i) else {
                            return Err(err(span.line, span.col, "unterminated string".into()));
                        };
                        i += 1;
                        col += 1;
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '0' => '\0',
                            other => other,
                        });
                    }
                    other => s.push(other),
                }
            }
            out.push(Token { tok: Tok::Str(s), span });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), span });
                i += p.len();
                col += p.len() as u32;
            }
            None => return Err(err(line, col, format!("illegal character {c:?}"))),
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn smallest_statement() {
        assert_eq!(toks("return 0;"), vec![Tok::Kw(Keyword::Return), Tok::Int(0), Tok::Punct(";"), Tok::Eof]);
    }

    #[test]
    fn recursive_sum_tokens() {
        let src = "function f(n) {\n    if (n == 0)\n        return 0;\n    else\n        return n + f(n-1);\n}\n";
        let t = toks(src);
        let count = |x: &Tok| t.iter().filter(|y| *y == x).count();
        assert_eq!(count(&Tok::Ident("f".into())), 2);
        assert_eq!(count(&Tok::Ident("n".into())), 4);
        assert_eq!(count(&Tok::Punct("==")), 1);
    }

    #[test]
    fn huge_literal_is_float_infinity() {
        assert_eq!(toks("var x = 1e999;")[3], Tok::Float(f64::INFINITY));
        assert_eq!(toks("2147483648")[0], Tok::Float(2147483648.0));
        assert_eq!(toks("2147483647")[0], Tok::Int(i32::MAX));
        assert_eq!(toks("2.0")[0], Tok::Float(2.0));
    }

    #[test]
    fn comments_and_errors() {
        assert_eq!(toks("a /* x \n y */ // z\n b"), vec![Tok::Ident("a".into()), Tok::Ident("b".into()), Tok::Eof]);
        assert!(matches!(tokenize("\"abc"), Err(FrontendError::Lex { line: 1, col: 1, .. })));
        assert!(matches!(tokenize("a /* b"), Err(FrontendError::Lex { .. })));
        assert!(matches!(tokenize("x # y"), Err(FrontendError::Lex { line: 1, col: 3, .. })));
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!(t[1].span, Span { line: 2, col: 3 });
    }

    proptest! {
        // Generated integer literals lex exactly like the numeric grammar says.
        #[test]
        fn integer_literals_round_trip(n in 0u64..10_000_000_000u64) {
            let text = n.to_string();
            let t = toks(&text);
            if n <= i32::MAX as u64 {
                prop_assert_eq!(&t[0], &Tok::Int(n as i32));
            } else {
                prop_assert_eq!(&t[0], &Tok::Float(n as f64));
            }
        }

        #[test]
        fn float_literals_round_trip(
            mant in 0u32..100000, frac in 0u32..1000, exp in proptest::option::of(-400i32..400)
        ) {
            let mut text = format!("{mant}.{frac}");
            if let Some(e) = exp {
                text.push_str(&format!("e{e}"));
            }
            let want: f64 = text.parse().unwrap();
            prop_assert_eq!(&toks(&text)[0], &Tok::Float(want));
        }
    }
}
