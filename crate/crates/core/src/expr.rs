//! A small arithmetic expression language for declaring distances, maps,
//! gauges and right-hand sides as data.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-2^2 = -4` and `2^3^2 = 512`. Functions: `sin cos exp ln abs sqrt`.
//! The name `pi` is a constant unless it is declared as a variable.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Abs, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Applies the function, rejecting `ln` of non-positive and `sqrt` of
    /// negative arguments.
    pub fn apply(self, x: f64) -> Result<f64> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Abs => Ok(x.abs()),
            Func::Ln if x > 0.0 => Ok(x.ln()),
            Func::Sqrt if x >= 0.0 => Ok(x.sqrt()),
            Func::Ln | Func::Sqrt => Err(Error::EvalDomain {
                func: self.name(),
                arg: x,
            }),
        }
    }
}

/// Expression tree. Variables are indices into the declared variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(e) | Expr::Call(_, e) => 1 + e.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn compile_into(&self, program: &mut Vec<Op>) {
        match self {
            Expr::Num(v) => program.push(Op::Push(*v)),
            Expr::Var(i) => program.push(Op::Load(*i)),
            Expr::Neg(e) => {
                e.compile_into(program);
                program.push(Op::Neg);
            }
            Expr::Binary(op, a, b) => {
                a.compile_into(program);
                b.compile_into(program);
                program.push(Op::Bin(*op));
            }
            Expr::Call(f, e) => {
                e.compile_into(program);
                program.push(Op::Call(*f));
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Push(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// A parsed expression together with its variable names and a postfix
/// program used for evaluation.
#[derive(Debug, Clone)]
pub struct Formula {
    source: String,
    vars: Vec<String>,
    ast: Expr,
    program: Vec<Op>,
    stack_depth: usize,
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.ast == other.ast
    }
}

impl Formula {
    pub fn from_ast(ast: Expr, vars: &[&str]) -> Result<Self> {
        let mut program = Vec::new();
        ast.compile_into(&mut program);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &program {
            match op {
                Op::Push(_) | Op::Load(_) => depth += 1,
                Op::Bin(_) => depth -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            if let Op::Load(i) = op {
                if *i >= vars.len() {
                    return Err(Error::UnknownVariable(format!("#{i}")));
                }
            }
            max_depth = max_depth.max(depth);
        }
        let vars: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        let mut formula = Formula {
            source: String::new(),
            vars,
            ast,
            program,
            stack_depth: max_depth,
        };
        formula.source = formula.to_string();
        Ok(formula)
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The text this formula was parsed from (or its printed form when
    /// built from an AST).
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `args[i]` bound to the i-th declared variable.
    pub fn eval(&self, args: &[f64]) -> Result<f64> {
        if args.len() != self.vars.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} arguments, got {}",
                self.vars.len(),
                args.len()
            )));
        }
        let mut stack: Vec<f64> = Vec::with_capacity(self.stack_depth);
        for op in &self.program {
            match *op {
                Op::Push(v) => stack.push(v),
                Op::Load(i) => stack.push(args[i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("operand");
                    *top = -*top;
                }
                Op::Bin(b) => {
                    let rhs = stack.pop().expect("operand");
                    let top = stack.last_mut().expect("operand");
                    *top = b.apply(*top, rhs);
                }
                Op::Call(f) => {
                    let top = stack.last_mut().expect("operand");
                    *top = f.apply(*top)?;
                }
            }
        }
        Ok(stack.pop().expect("result"))
    }
}

struct Printer<'a> {
    expr: &'a Expr,
    vars: &'a [String],
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| Printer {
            expr: e,
            vars: self.vars,
        };
        match self.expr {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => f.write_str(&self.vars[*i]),
            Expr::Neg(e) => write!(f, "(-{})", sub(e)),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), sub(e)),
        }
    }
}

/// Prints fully parenthesized so that parsing the output reproduces the
/// same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            expr: &self.ast,
            vars: &self.vars,
        }
        .fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>> {
        let mut lexer = Lexer {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        };
        let mut out = Vec::new();
        loop {
            let (tok, col) = lexer.next_token()?;
            let end = tok == Token::End;
            out.push((tok, col));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            column,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<(Token, usize)> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let col = self.pos + 1;
        let Some(c) = self.peek() else {
            return Ok((Token::End, col));
        };
        if c.is_ascii_digit() || c == '.' {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                self.pos += 1;
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                let save = self.pos;
                self.pos += 1;
                if matches!(self.peek(), Some('+' | '-')) {
                    self.pos += 1;
                }
                if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                } else {
                    self.pos = save;
                }
            }
            let text: String = self.chars[start..self.pos].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| self.error(col, format!("malformed number `{text}`")))?;
            return Ok((Token::Num(value), col));
        }
        if c.is_alphabetic() || c == '_' {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let text: String = self.chars[start..self.pos].iter().collect();
            return Ok((Token::Ident(text), col));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((Token::Sym(c), col));
        }
        Err(self.error(col, format!("unexpected character `{c}`")))
    }
}

struct Parser<'v> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    vars: &'v [&'v str],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if tok != Token::End {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            column: self.column(),
            message: message.into(),
        }
    }

    fn expect(&mut self, sym: char) -> Result<()> {
        if *self.peek() == Token::Sym(sym) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{sym}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Sym('+') => BinOp::Add,
                Token::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Sym('*') => BinOp::Mul,
                Token::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Token::Sym('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let col = self.column();
        match self.bump() {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                Err(Error::UnknownVariable(name))
            }
            Token::End => Err(Error::Parse {
                line: 1,
                column: col,
                message: "unexpected end of expression".into(),
            }),
            Token::Sym(c) => Err(Error::Parse {
                line: 1,
                column: col,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}

/// Parses `text` over the variable names in `vars`.
pub fn parse_expr(text: &str, vars: &[&str]) -> Result<Formula> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, vars };
    let ast = parser.expr()?;
    if *parser.peek() != Token::End {
        return Err(parser.error("trailing input"));
    }
    let mut formula = Formula::from_ast(ast, vars)?;
    formula.source = text.trim().to_string();
    Ok(formula)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, vars: &[&str], args: &[f64]) -> Result<f64> {
        parse_expr(text, vars)?.eval(args)
    }

    #[test]
    fn perturbed_distance_of_example_metric() {
        let v = eval("abs(x-y) + x^2*y^4", &["x", "y"], &[1.0, 2.0]).unwrap();
        assert_eq!(v, 17.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", &[], &[]).unwrap(), 512.0);
    }

    #[test]
    fn power_binds_tighter_than_negation() {
        assert_eq!(eval("-2^2", &[], &[]).unwrap(), -4.0);
        assert_eq!(eval("2^-1", &[], &[]).unwrap(), 0.5);
        assert_eq!(eval("--3", &[], &[]).unwrap(), 3.0);
    }

    #[test]
    fn multiplication_before_addition() {
        assert_eq!(eval("1 + 2*3 - 4/2", &[], &[]).unwrap(), 5.0);
        assert_eq!(eval("(1 + 2)*3", &[], &[]).unwrap(), 9.0);
        assert_eq!(eval("8/4/2", &[], &[]).unwrap(), 1.0);
    }

    #[test]
    fn ln_of_zero_is_a_domain_error() {
        let f = parse_expr("ln(0)", &[]).unwrap();
        assert!(matches!(f.eval(&[]), Err(Error::EvalDomain { func: "ln", .. })));
        assert!(matches!(
            eval("sqrt(x)", &["x"], &[-1.0]),
            Err(Error::EvalDomain { func: "sqrt", .. })
        ));
        assert_eq!(eval("sqrt(x)", &["x"], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn unknown_variable_is_rejected() {
        assert!(matches!(
            parse_expr("x + z", &["x", "y"]),
            Err(Error::UnknownVariable(name)) if name == "z"
        ));
    }

    #[test]
    fn parse_errors_carry_columns() {
        match parse_expr("1 + * 2", &[]) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match parse_expr("sin(1", &[]) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("1 2", &[]), Err(Error::Parse { .. })));
        assert!(matches!(parse_expr("2 # 3", &[]), Err(Error::Parse { .. })));
    }

    #[test]
    fn scientific_literals_and_pi() {
        assert_eq!(eval("1.5e-3 * 2E2", &[], &[]).unwrap(), 0.3);
        assert_eq!(eval("pi", &[], &[]).unwrap(), std::f64::consts::PI);
        assert_eq!(eval(".5", &[], &[]).unwrap(), 0.5);
    }

    #[test]
    fn printed_form_reparses_to_same_tree() {
        let f = parse_expr("((s+0.5)/2)*sin(u) - -u^2^0.5", &["s", "u"]).unwrap();
        let printed = f.to_string();
        let g = parse_expr(&printed, &["s", "u"]).unwrap();
        assert_eq!(f, g);
        assert_eq!(f.source(), "((s+0.5)/2)*sin(u) - -u^2^0.5");
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let f = parse_expr("x", &["x"]).unwrap();
        assert!(f.eval(&[]).is_err());
    }
}
