//! Tokenizer and recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x1^2 = -(x1^2)` and `2^3^2 = 2^9`.

use super::{BinOp, ExprError, Func, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part: e.g. 1e-5, 2.5E+3
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax { pos: start, msg: format!("malformed number '{text}'") })?;
            out.push(Token { tok: Tok::Num(v), pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), pos: start });
            continue;
        }
        match c {
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' => {
                out.push(Token { tok: Tok::Sym(c), pos: i });
                i += 1;
            }
            _ => {
                return Err(ExprError::Syntax { pos: i, msg: format!("unexpected character '{c}'") });
            }
        }
    }
    out.push(Token { tok: Tok::End, pos: src.len() });
    Ok(out)
}

pub(super) struct Parser {
    toks: Vec<Token>,
    at: usize,
    pub(super) max_var: usize,
}

impl Parser {
    pub(super) fn new(src: &str) -> Result<Self, ExprError> {
        Ok(Parser { toks: tokenize(src)?, at: 0, max_var: 0 })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(super) fn parse_all(&mut self) -> Result<Node, ExprError> {
        let node = self.expr()?;
        let t = self.peek();
        if t.tok != Tok::End {
            return Err(ExprError::Syntax { pos: t.pos, msg: "unexpected trailing input".into() });
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                if !self.eat(')') {
                    let p = self.peek().pos;
                    return Err(ExprError::Syntax { pos: p, msg: "expected ')'".into() });
                }
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, t.pos),
            Tok::End => Err(ExprError::Syntax { pos: t.pos, msg: "expected expression".into() }),
            Tok::Sym(c) => Err(ExprError::Syntax { pos: t.pos, msg: format!("unexpected '{c}'") }),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Node, ExprError> {
        let is_call = self.peek().tok == Tok::Sym('(');
        if let Some(func) = Func::from_name(&name) {
            if !is_call {
                return Err(ExprError::Syntax { pos: self.peek().pos, msg: format!("expected '(' after function '{name}'") });
            }
            self.bump();
            let mut args = Vec::new();
            if self.peek().tok != Tok::Sym(')') {
                args.push(self.expr()?);
                while self.eat(',') {
                    args.push(self.expr()?);
                }
            }
            if !self.eat(')') {
                let p = self.peek().pos;
                return Err(ExprError::Syntax { pos: p, msg: "expected ')'".into() });
            }
            if args.len() != 1 {
                return Err(ExprError::Arity { name, pos, expected: 1, found: args.len() });
            }
            let arg = args.pop().expect("one argument");
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if is_call {
            return Err(ExprError::UnknownIdentifier { name, pos });
        }
        if let Some(idx) = variable_index(&name) {
            if idx == 0 {
                return Err(ExprError::UnknownIdentifier { name, pos });
            }
            self.max_var = self.max_var.max(idx);
            return Ok(Node::Var(idx - 1));
        }
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        Ok(Node::Param(name))
    }
}

/// `x<digits>` → the 1-based index.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}
