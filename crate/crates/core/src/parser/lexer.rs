use num_bigint::BigInt;

use super::ParseError;

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

#[derive(Clone, Debug, PartialEq)]
pub(super) enum Tok {
    /// Unquoted name: identifier, symbolic operator, `!`, `[]` not included.
    Name(String),
    /// Quoted atom; never treated as an operator.
    Quoted(String),
    Var(String),
    Int(BigInt),
    Str(String),
    Open,
    Close,
    LBracket,
    RBracket,
    Bar,
    Comma,
    /// Clause terminator `.`
    End,
    /// Query terminator `?`
    Query,
    Eof,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Name(n) | Tok::Quoted(n) => format!("atom `{n}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Int(i) => format!("number `{i}`"),
            Tok::Str(_) => "string".into(),
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "`.`".into(),
            Tok::Query => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    /// Whitespace or a comment directly precedes this token.
    pub spaced: bool,
}

pub(super) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    }
    .run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    /// Skips whitespace and comments; reports whether anything was skipped.
    fn skip_layout(&mut self) -> Result<bool, ParseError> {
        let start = self.pos;
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some('*') if self.peek() == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => {
                                return Err(ParseError {
                                    line,
                                    column,
                                    message: "unterminated block comment".into(),
                                    expected: vec!["`*/`".into()],
                                })
                            }
                        }
                    }
                }
                _ => break,
            }
        }
        Ok(self.pos > start)
    }

    fn at_layout_or_eof(&self) -> bool {
        match self.peek() {
            None => true,
            // compact payload text such as `f(1).g(2).` also ends clauses
            Some(c) => c.is_whitespace() || c == '%' || c.is_alphanumeric() || c == '_',
        }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            let spaced = self.skip_layout()? || out.is_empty();
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    column,
                    spaced,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::Open
                }
                ')' => {
                    self.bump();
                    Tok::Close
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                '|' => {
                    self.bump();
                    Tok::Bar
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '!' => {
                    self.bump();
                    Tok::Name("!".into())
                }
                ';' => {
                    self.bump();
                    Tok::Name(";".into())
                }
                '"' => Tok::Str(self.quoted('"')?),
                '\'' => Tok::Quoted(self.quoted('\'')?),
                c if c.is_ascii_digit() => {
                    let mut digits = String::new();
                    while let Some(d) = self.peek().filter(char::is_ascii_digit) {
                        digits.push(d);
                        self.bump();
                    }
                    Tok::Int(digits.parse().expect("digits"))
                }
                c if c == '_' || c.is_uppercase() => Tok::Var(self.identifier()),
                c if c.is_alphabetic() => Tok::Name(self.identifier()),
                c if SYMBOL_CHARS.contains(c) => {
                    let mut sym = String::new();
                    while let Some(s) = self.peek().filter(|s| SYMBOL_CHARS.contains(*s)) {
                        sym.push(s);
                        self.bump();
                    }
                    match sym.as_str() {
                        "." if self.at_layout_or_eof() => Tok::End,
                        "?" => Tok::Query,
                        _ => Tok::Name(sym),
                    }
                }
                other => {
                    return Err(self.error(format!("unexpected character `{other}`")));
                }
            };
            out.push(Token {
                tok,
                line,
                column,
                spaced,
            });
        }
    }

    fn identifier(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
            s.push(c);
            self.bump();
        }
        s
    }

    fn quoted(&mut self, delim: char) -> Result<String, ParseError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(ParseError {
                        line,
                        column,
                        message: "unterminated quoted text".into(),
                        expected: vec![format!("`{delim}`")],
                    })
                }
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('\\') => s.push('\\'),
                    Some('"') => s.push('"'),
                    Some('\'') => s.push('\''),
                    Some(other) => {
                        return Err(self.error(format!("unknown escape `\\{other}`")));
                    }
                    None => return Err(self.error("unterminated escape")),
                },
                Some(c) if c == delim => {
                    // doubled delimiter stands for itself
                    if self.peek() == Some(delim) {
                        self.bump();
                        s.push(delim);
                    } else {
                        return Ok(s);
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }
}
