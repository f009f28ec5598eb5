//! Reader and printer for ECA-LP scripts.
//!
//! The surface syntax is a small ISO-Prolog-like language: clauses end in
//! `.`, queries in `?`, `%` starts a line comment. Supported infix
//! operators, by priority:
//!
//! | priority | type | operators |
//! |---|---|---|
//! | 1200 | xfx | `:-` |
//! | 1100 | xfy | `;` |
//! | 1000 | xfy | `,` |
//! | 700 | xfx | `=` `\=` `<` `<=` `=<` `>` `>=` `is` |
//! | 500 | yfx | `+` `-` |
//! | 400 | yfx | `*` `/` `//` `mod` |
//!
//! `datetime(Y,M,D,h,m,s)` and `timespan(d,h,m,s)` with integer arguments
//! are read as time literals.

mod format;
mod lexer;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::term::{Clause, Span, Term, Var};
use lexer::{Tok, Token};

pub use format::{format_clause, format_term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// A goal: ordered literals plus the names of its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub literals: Vec<Term>,
    pub variables: Vec<Var>,
    pub span: Span,
}

impl Query {
    pub fn new(literals: Vec<Term>) -> Query {
        let mut variables = Vec::new();
        for l in &literals {
            l.collect_vars(&mut variables);
        }
        Query {
            literals,
            variables,
            span: Span::default(),
        }
    }

    /// Named (non-anonymous) variables, the ones worth reporting in answers.
    pub fn named_variables(&self) -> impl Iterator<Item = &Var> {
        self.variables.iter().filter(|v| !v.name.starts_with('_'))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedProgram {
    /// Every clause in source order, including `eca` and `integrity` facts.
    pub clauses: Vec<Clause>,
    /// Normalized `eca/6` facts.
    pub eca_rules: Vec<Term>,
    /// Arguments of `integrity/1` facts.
    pub integrity_constraints: Vec<Term>,
    /// `:- Goal.` directives.
    pub directives: Vec<Query>,
    /// `Goal?` queries embedded in the script.
    pub queries: Vec<Query>,
}

pub fn parse_program(text: &str) -> Result<ParsedProgram, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(tokens);
    let mut program = ParsedProgram::default();
    while p.peek() != &Tok::Eof {
        match p.sentence()? {
            Sentence::Clause(c) => {
                if let Some(rule) = as_eca_fact(&c) {
                    program.eca_rules.push(rule.clone());
                }
                if let Some(ic) = as_integrity_fact(&c) {
                    program.integrity_constraints.push(ic.clone());
                }
                program.clauses.push(c);
            }
            Sentence::Directive(q) => program.directives.push(q),
            Sentence::Query(q) => program.queries.push(q),
        }
    }
    Ok(program)
}

/// Parses clause text only (update payloads); directives and queries are errors.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(tokens);
    let mut out = Vec::new();
    while p.peek() != &Tok::Eof {
        let token = p.tokens[p.pos].clone();
        match p.sentence()? {
            Sentence::Clause(c) => out.push(c),
            _ => return Err(p.error_at(&token, "expected a clause", vec!["clause".into()])),
        }
    }
    Ok(out)
}

/// Parses `G1, G2, ... ?` (or `.`, or no terminator) into its literals.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(tokens);
    let start = p.tokens[0].clone();
    let goal = p.expr(1200)?;
    match p.peek() {
        Tok::Query | Tok::End => {
            p.advance();
        }
        Tok::Eof => {}
        _ => return Err(p.unexpected(vec!["`?`".into(), "`.`".into()])),
    }
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected(vec!["end of input".into()]));
    }
    let mut q = Query::new(flatten_conjunction(goal));
    q.span = Span {
        line: start.line,
        column: start.column,
    };
    Ok(q)
}

/// Parses a single term (no terminator needed).
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let tokens = lexer::tokenize(text)?;
    let mut p = Parser::new(tokens);
    let t = p.expr(1200)?;
    if matches!(p.peek(), Tok::End | Tok::Query) {
        p.advance();
    }
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected(vec!["end of input".into()]));
    }
    Ok(t)
}

pub fn flatten_conjunction(t: Term) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Compound(ref f, ref args) if &**f == "," && args.len() == 2 => {
                out.extend(flatten_conjunction(args[0].clone()));
                cur = args[1].clone();
            }
            other => {
                out.push(other);
                return out;
            }
        }
    }
}

fn as_eca_fact(c: &Clause) -> Option<&Term> {
    (c.is_fact() && c.head.functor().is_some_and(|(f, n)| &*f == "eca" && n == 6)).then_some(&c.head)
}

fn as_integrity_fact(c: &Clause) -> Option<&Term> {
    match &c.head {
        Term::Compound(f, args) if c.is_fact() && &**f == "integrity" && args.len() == 1 => {
            Some(&args[0])
        }
        _ => None,
    }
}

/// Maps an `eca` fact of arity 2..=6 onto the six parts
/// (time, event, condition, action, postcondition, else).
fn normalize_eca(args: Vec<Term>) -> Option<Vec<Term>> {
    let b = Term::blank;
    let arity = args.len();
    let mut it = args.into_iter();
    let mut next = || it.next().expect("arity checked");
    let parts = match arity {
        2 => vec![b(), b(), next(), next(), b(), b()],
        3 => vec![b(), next(), next(), next(), b(), b()],
        4 => vec![b(), next(), next(), next(), next(), b()],
        5 => vec![next(), next(), next(), next(), next(), b()],
        6 => (0..6).map(|_| next()).collect(),
        _ => return None,
    };
    Some(parts)
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

pub(crate) fn infix_op(name: &str) -> Option<(u16, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "<" | "<=" | "=<" | ">" | ">=" | "is" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" | "//" | "mod" => (400, Assoc::Yfx),
        _ => return None,
    })
}

enum Sentence {
    Clause(Clause),
    Directive(Query),
    Query(Query),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: HashMap<String, u64>,
    next_var: u64,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Parser {
        Parser {
            tokens,
            pos: 0,
            vars: HashMap::new(),
            next_var: 0,
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn token(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, token: &Token, message: impl Into<String>, expected: Vec<String>) -> ParseError {
        ParseError {
            line: token.line,
            column: token.column,
            message: message.into(),
            expected,
        }
    }

    fn unexpected(&self, expected: Vec<String>) -> ParseError {
        let t = self.token();
        self.error_at(t, format!("unexpected {}", t.tok.describe()), expected)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(vec![tok.describe()]))
        }
    }

    fn variable(&mut self, name: String) -> Term {
        let id = if name == "_" {
            None
        } else {
            self.vars.get(&name).copied()
        };
        let id = id.unwrap_or_else(|| {
            let id = self.next_var;
            self.next_var += 1;
            if name != "_" {
                self.vars.insert(name.clone(), id);
            }
            id
        });
        Term::var(&name, id)
    }

    fn sentence(&mut self) -> Result<Sentence, ParseError> {
        self.vars.clear();
        self.next_var = 0;
        let start = self.token().clone();
        let span = Span {
            line: start.line,
            column: start.column,
        };
        if start.tok == Tok::Name(":-".into()) {
            self.advance();
            let goal = self.expr(1199)?;
            self.expect(Tok::End)?;
            let mut q = Query::new(flatten_conjunction(goal));
            q.span = span;
            return Ok(Sentence::Directive(q));
        }
        let t = self.expr(1200)?;
        match self.peek() {
            Tok::End => {
                self.advance();
            }
            Tok::Query => {
                self.advance();
                let mut q = Query::new(flatten_conjunction(t));
                q.span = span;
                return Ok(Sentence::Query(q));
            }
            _ => return Err(self.unexpected(vec!["`.`".into(), "`?`".into(), "operator".into()])),
        }
        let (head, body) = match t {
            Term::Compound(ref f, ref args) if &**f == ":-" && args.len() == 2 => {
                (args[0].clone(), flatten_conjunction(args[1].clone()))
            }
            other => (other, Vec::new()),
        };
        let head = self.check_head(head, body.is_empty(), &start)?;
        Ok(Sentence::Clause(Clause::new(head, body).with_span(span)))
    }

    fn check_head(&self, head: Term, is_fact: bool, start: &Token) -> Result<Term, ParseError> {
        match &head {
            Term::Atom(_) | Term::Compound(..) => {}
            _ => {
                return Err(self.error_at(
                    start,
                    "clause head must be an atom or compound term",
                    vec!["callable term".into()],
                ))
            }
        }
        let (name, arity) = head.functor().expect("callable");
        if &*name == "not" && arity == 1 {
            return Err(self.error_at(start, "default negation cannot appear in a clause head", vec![]));
        }
        if &*name != "eca" {
            return Ok(head);
        }
        if !is_fact {
            if arity != 6 {
                return Err(self.error_at(start, "eca rules must have six parts", vec![]));
            }
            return Ok(head);
        }
        let args: Vec<Term> = head
            .args()
            .iter()
            .map(|a| match a {
                Term::Var(v) if v.is_anonymous() => Term::blank(),
                other => other.clone(),
            })
            .collect();
        match normalize_eca(args) {
            Some(parts) => Ok(Term::compound("eca", parts)),
            None => Err(self.error_at(
                start,
                format!("eca fact has {arity} parts; expected between 2 and 6"),
                vec![],
            )),
        }
    }

    /// Operator-precedence parse of a term whose priority is at most `max`.
    fn expr(&mut self, max: u16) -> Result<Term, ParseError> {
        let mut left = self.primary()?;
        let mut left_prec = 0u16;
        loop {
            let name = match self.peek() {
                Tok::Name(n) => n.clone(),
                Tok::Comma => ",".into(),
                _ => break,
            };
            let Some((prec, assoc)) = infix_op(&name) else { break };
            let left_max = if assoc == Assoc::Yfx { prec } else { prec - 1 };
            if prec > max || left_prec > left_max {
                break;
            }
            self.advance();
            let right_max = if assoc == Assoc::Xfy { prec } else { prec - 1 };
            let right = self.expr(right_max)?;
            left = Term::compound(&name, vec![left, right]);
            left_prec = prec;
        }
        Ok(left)
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        let token = self.advance();
        match token.tok {
            Tok::Int(i) => Ok(Term::Int(i)),
            Tok::Str(s) => Ok(Term::string(&s)),
            Tok::Var(v) => Ok(self.variable(v)),
            Tok::Open => {
                let t = self.expr(1200)?;
                self.expect(Tok::Close)?;
                Ok(t)
            }
            Tok::LBracket => self.list(),
            Tok::Name(ref n) if n == "-" && !self.token().spaced => {
                if let Tok::Int(i) = self.peek().clone() {
                    self.advance();
                    return Ok(Term::Int(-i));
                }
                self.name_term(n.clone(), &token)
            }
            Tok::Name(ref n) | Tok::Quoted(ref n) => self.name_term(n.clone(), &token),
            _ => Err(self.error_at(
                &token,
                format!("unexpected {}", token.tok.describe()),
                vec!["term".into()],
            )),
        }
    }

    fn name_term(&mut self, name: String, token: &Token) -> Result<Term, ParseError> {
        if self.peek() != &Tok::Open {
            return Ok(Term::atom(&name));
        }
        self.advance();
        let mut args = Vec::new();
        if self.peek() == &Tok::Close {
            self.advance();
        } else {
            loop {
                args.push(self.expr(999)?);
                match self.peek() {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::Close => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.unexpected(vec!["`,`".into(), "`)`".into()])),
                }
            }
        }
        Term::compound(&name, args)
            .normalize_time_literal()
            .map_err(|e| self.error_at(token, e.to_string(), vec![]))
    }

    fn list(&mut self) -> Result<Term, ParseError> {
        if self.peek() == &Tok::RBracket {
            self.advance();
            return Ok(Term::nil());
        }
        let mut items = vec![self.expr(999)?];
        let mut tail = None;
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                    items.push(self.expr(999)?);
                }
                Tok::Bar => {
                    self.advance();
                    tail = Some(self.expr(999)?);
                    self.expect(Tok::RBracket)?;
                    break;
                }
                Tok::RBracket => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected(vec!["`,`".into(), "`|`".into(), "`]`".into()])),
            }
        }
        Ok(Term::list(items, tail))
    }
}

#[cfg(test)]
mod tests;
