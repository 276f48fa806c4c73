//! Strict whitelist parser for candidate programs.
//!
//! The accepted surface is a sequence of call statements
//! `name(kw=int, ...)` separated by newlines, with arbitrary blank lines,
//! flexible whitespace, newlines permitted between tokens inside an open
//! parenthesis, and integer literals carrying at most one unary `+`/`-`.
//! Everything else is rejected with exactly one tag from a closed taxonomy.
//!
//! Rejections are reported with a fixed precedence so the error histogram is
//! deterministic: `empty_program`, then structural errors (`syntax_error`,
//! `disallowed_construct`, `unknown_function`, `positional_args`,
//! `non_integer_literal`) in line order, then keyword-set errors per call
//! (`duplicate_keyword`, then `unexpected_keyword`, then `missing_keyword`),
//! then range validation (`out_of_range`, `invalid_stroke`) on the first
//! offending shape.

use crate::dsl::{Scene, Shape, ShapeKind, ValidationError};
use serde::{Deserialize, Serialize};
use std::fmt;

/// The closed set of rejection tags. Every parse failure maps to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTag {
    EmptyProgram,
    SyntaxError,
    DisallowedConstruct,
    UnknownFunction,
    PositionalArgs,
    NonIntegerLiteral,
    DuplicateKeyword,
    UnexpectedKeyword,
    MissingKeyword,
    OutOfRange,
    InvalidStroke,
}

impl ErrorTag {
    pub const ALL: [ErrorTag; 11] = [
        ErrorTag::EmptyProgram,
        ErrorTag::SyntaxError,
        ErrorTag::DisallowedConstruct,
        ErrorTag::UnknownFunction,
        ErrorTag::PositionalArgs,
        ErrorTag::NonIntegerLiteral,
        ErrorTag::DuplicateKeyword,
        ErrorTag::UnexpectedKeyword,
        ErrorTag::MissingKeyword,
        ErrorTag::OutOfRange,
        ErrorTag::InvalidStroke,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTag::EmptyProgram => "empty_program",
            ErrorTag::SyntaxError => "syntax_error",
            ErrorTag::DisallowedConstruct => "disallowed_construct",
            ErrorTag::UnknownFunction => "unknown_function",
            ErrorTag::PositionalArgs => "positional_args",
            ErrorTag::NonIntegerLiteral => "non_integer_literal",
            ErrorTag::DuplicateKeyword => "duplicate_keyword",
            ErrorTag::UnexpectedKeyword => "unexpected_keyword",
            ErrorTag::MissingKeyword => "missing_keyword",
            ErrorTag::OutOfRange => "out_of_range",
            ErrorTag::InvalidStroke => "invalid_stroke",
        }
    }
}

impl fmt::Display for ErrorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parse rejection: the taxonomy tag, the 1-based line it was detected on
/// (absent for whole-program conditions such as `empty_program`), and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub tag: ErrorTag,
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    fn new(tag: ErrorTag, line: impl Into<Option<usize>>, message: impl Into<String>) -> ParseError {
        ParseError { tag, line: line.into(), message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {} [{}]", self.message, self.tag),
            None => write!(f, "{} [{}]", self.message, self.tag),
        }
    }
}

impl std::error::Error for ParseError {}

/// Returns the taxonomy tag for a rejection; the stable vocabulary consumed
/// by the evaluator and analysis layers.
pub fn classify_error(err: &ParseError) -> ErrorTag {
    err.tag
}

/// Parses program text into a nonempty, fully validated [`Scene`].
pub fn parse(text: &str) -> Result<Scene, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(ErrorTag::EmptyProgram, None, "program is empty"));
    }
    let tokens = tokenize(text);
    let calls = Parser { tokens: &tokens, pos: 0 }.parse_statements()?;
    if calls.is_empty() {
        return Err(ParseError::new(ErrorTag::EmptyProgram, None, "program is empty"));
    }
    check_keywords(&calls)?;
    build_scene(&calls)
}

/// Parses raw bytes; invalid UTF-8 is a `syntax_error` at the offending line.
pub fn parse_bytes(bytes: &[u8]) -> Result<Scene, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
            Err(ParseError::new(ErrorTag::SyntaxError, line, "input is not valid UTF-8"))
        }
    }
}

// --- tokenizer ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Int(String),
    Float,
    Str,
    LParen,
    RParen,
    Comma,
    Eq,
    Plus,
    Minus,
    Star,
    Dot,
    /// Statement separator; emitted only for newlines outside parentheses.
    Newline,
    /// Tokenization failure; the scan stops after emitting one of these.
    Bad(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

/// Scans the whole input. A character the grammar has no use for produces a
/// single `Bad` token and ends the scan; the parser reports it as
/// `syntax_error` unless an earlier line already fails structurally.
fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut depth = 0usize;
    let mut i = 0usize;

    let bad = |tokens: &mut Vec<Token>, line: usize, msg: &'static str| {
        tokens.push(Token { tok: Tok::Bad(msg), line });
    };

    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' | '\x0b' | '\x0c' => i += 1,
            '\n' => {
                if depth == 0 {
                    tokens.push(Token { tok: Tok::Newline, line });
                }
                line += 1;
                i += 1;
            }
            '(' => {
                tokens.push(Token { tok: Tok::LParen, line });
                depth += 1;
                i += 1;
            }
            ')' => {
                tokens.push(Token { tok: Tok::RParen, line });
                depth = depth.saturating_sub(1);
                i += 1;
            }
            ',' => {
                tokens.push(Token { tok: Tok::Comma, line });
                i += 1;
            }
            '=' => {
                tokens.push(Token { tok: Tok::Eq, line });
                i += 1;
            }
            '+' => {
                tokens.push(Token { tok: Tok::Plus, line });
                i += 1;
            }
            '-' => {
                tokens.push(Token { tok: Tok::Minus, line });
                i += 1;
            }
            '*' => {
                tokens.push(Token { tok: Tok::Star, line });
                i += 1;
            }
            '\'' | '"' => {
                let quote = c;
                let start_line = line;
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    let s = chars[i];
                    if s == '\n' {
                        line += 1;
                    }
                    i += 1;
                    if s == '\\' && i < chars.len() {
                        if chars[i] == '\n' {
                            line += 1;
                        }
                        i += 1;
                    } else if s == quote {
                        closed = true;
                        break;
                    }
                }
                if closed {
                    tokens.push(Token { tok: Tok::Str, line: start_line });
                } else {
                    bad(&mut tokens, start_line, "unterminated string literal");
                    break;
                }
            }
            '.' => {
                if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                    tokens.push(Token { tok: Tok::Float, line });
                } else {
                    tokens.push(Token { tok: Tok::Dot, line });
                    i += 1;
                }
            }
            '0'..='9' => {
                let start = i;
                while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                let mut float = false;
                if chars.get(i) == Some(&'.') {
                    float = true;
                    i += 1;
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                if chars.get(i).is_some_and(|&e| e == 'e' || e == 'E') {
                    let mut j = i + 1;
                    if chars.get(j).is_some_and(|&s| s == '+' || s == '-') {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        float = true;
                        i = j;
                        while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                            i += 1;
                        }
                    }
                }
                if chars.get(i).is_some_and(|&t| t.is_ascii_alphanumeric() || t == '_') {
                    bad(&mut tokens, line, "malformed number");
                    break;
                }
                if float {
                    tokens.push(Token { tok: Tok::Float, line });
                } else {
                    tokens.push(Token {
                        tok: Tok::Int(chars[start..i].iter().collect()),
                        line,
                    });
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while chars
                    .get(i)
                    .is_some_and(|&t| t.is_ascii_alphanumeric() || t == '_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    tok: Tok::Name(chars[start..i].iter().collect()),
                    line,
                });
            }
            '#' => {
                bad(&mut tokens, line, "comments are not part of the language");
                break;
            }
            _ => {
                bad(&mut tokens, line, "unexpected character");
                break;
            }
        }
    }
    tokens
}

// --- grammar -----------------------------------------------------------

/// Statement-level words that mark a recognizable host-language construct
/// rather than prose; they select `disallowed_construct` over `syntax_error`.
const RESERVED_WORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

/// A structurally accepted call, before keyword-set and range checks.
struct RawCall {
    kind: ShapeKind,
    line: usize,
    args: Vec<RawArg>,
}

struct RawArg {
    keyword: String,
    line: usize,
    value: i32,
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&'t Tok> {
        self.tokens.get(self.pos + 1).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn advance(&mut self) -> Option<&'t Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn err(&self, tag: ErrorTag, message: impl Into<String>) -> ParseError {
        ParseError::new(tag, self.line(), message)
    }

    /// First pass: split into statements and parse each structurally, in
    /// order, so the earliest structural failure by line wins.
    fn parse_statements(mut self) -> Result<Vec<RawCall>, ParseError> {
        let mut calls = Vec::new();
        loop {
            while matches!(self.peek(), Some(Tok::Newline)) {
                self.advance();
            }
            if self.peek().is_none() {
                return Ok(calls);
            }
            calls.push(self.parse_statement()?);
        }
    }

    fn parse_statement(&mut self) -> Result<RawCall, ParseError> {
        let line = self.line();
        let name = match self.peek() {
            Some(Tok::Name(name)) => name.clone(),
            Some(Tok::Bad(msg)) => return Err(self.err(ErrorTag::SyntaxError, *msg)),
            _ => {
                return Err(self.err(
                    ErrorTag::SyntaxError,
                    "expected a primitive call at the start of the statement",
                ))
            }
        };
        if RESERVED_WORDS.contains(&name.as_str()) {
            return Err(self.err(
                ErrorTag::DisallowedConstruct,
                format!("statement begins with the reserved word '{name}'"),
            ));
        }
        self.advance();
        match self.peek() {
            Some(Tok::LParen) => {}
            Some(Tok::Eq) => {
                return Err(self.err(
                    ErrorTag::DisallowedConstruct,
                    "assignment statements are not allowed",
                ))
            }
            Some(Tok::Dot) => {
                return Err(self.err(
                    ErrorTag::DisallowedConstruct,
                    "attribute access is not allowed",
                ))
            }
            Some(Tok::Bad(msg)) => return Err(self.err(ErrorTag::SyntaxError, *msg)),
            _ => {
                return Err(self.err(
                    ErrorTag::SyntaxError,
                    format!("expected '(' after '{name}'"),
                ))
            }
        }
        let kind = ShapeKind::from_name(&name).ok_or_else(|| {
            ParseError::new(
                ErrorTag::UnknownFunction,
                line,
                format!("'{name}' is not one of the four primitives"),
            )
        })?;
        self.advance(); // consume '('
        let args = self.parse_args()?;
        match self.peek() {
            None | Some(Tok::Newline) => {
                self.advance();
                Ok(RawCall { kind, line, args })
            }
            Some(Tok::Bad(msg)) => Err(self.err(ErrorTag::SyntaxError, *msg)),
            Some(_) => Err(self.err(
                ErrorTag::SyntaxError,
                "unexpected token after the closing parenthesis",
            )),
        }
    }

    /// Parses `kw=value, ...` up to and including the closing parenthesis.
    fn parse_args(&mut self) -> Result<Vec<RawArg>, ParseError> {
        let mut args = Vec::new();
        if matches!(self.peek(), Some(Tok::RParen)) {
            self.advance();
            return Ok(args);
        }
        loop {
            args.push(self.parse_arg()?);
            match self.peek() {
                Some(Tok::RParen) => {
                    self.advance();
                    return Ok(args);
                }
                Some(Tok::Comma) => {
                    self.advance();
                    if matches!(self.peek(), Some(Tok::RParen)) {
                        return Err(self.err(
                            ErrorTag::SyntaxError,
                            "trailing comma before closing parenthesis",
                        ));
                    }
                }
                Some(Tok::Bad(msg)) => return Err(self.err(ErrorTag::SyntaxError, *msg)),
                Some(_) => {
                    return Err(self.err(
                        ErrorTag::SyntaxError,
                        "expected ',' or ')' after an argument",
                    ))
                }
                None => {
                    return Err(self.err(
                        ErrorTag::SyntaxError,
                        "unexpected end of input inside a call",
                    ))
                }
            }
        }
    }

    fn parse_arg(&mut self) -> Result<RawArg, ParseError> {
        match self.peek() {
            Some(Tok::Star) => Err(self.err(
                ErrorTag::DisallowedConstruct,
                "starred arguments are not allowed",
            )),
            Some(Tok::Bad(msg)) => Err(self.err(ErrorTag::SyntaxError, *msg)),
            Some(Tok::Name(keyword)) if matches!(self.peek2(), Some(Tok::Eq)) => {
                let keyword = keyword.clone();
                let line = self.line();
                self.advance(); // keyword
                self.advance(); // '='
                let value = self.parse_value()?;
                Ok(RawArg { keyword, line, value })
            }
            Some(_) => Err(self.err(
                ErrorTag::PositionalArgs,
                "every argument must be passed as keyword=value",
            )),
            None => Err(self.err(
                ErrorTag::SyntaxError,
                "unexpected end of input inside a call",
            )),
        }
    }

    /// Parses an integer literal with at most one unary sign. Magnitudes
    /// beyond the machine range saturate, which range validation then
    /// rejects as `out_of_range`.
    fn parse_value(&mut self) -> Result<i32, ParseError> {
        let negative = match self.peek() {
            Some(Tok::Plus) => {
                self.advance();
                false
            }
            Some(Tok::Minus) => {
                self.advance();
                true
            }
            _ => false,
        };
        let magnitude = match self.peek() {
            Some(Tok::Int(text)) => text.parse::<i64>().unwrap_or(i64::MAX),
            Some(Tok::Float) => {
                return Err(self.err(
                    ErrorTag::NonIntegerLiteral,
                    "argument values must be integer literals, not floats",
                ))
            }
            Some(Tok::Str) => {
                return Err(self.err(
                    ErrorTag::NonIntegerLiteral,
                    "argument values must be integer literals, not strings",
                ))
            }
            Some(Tok::Name(name)) => {
                if matches!(self.peek2(), Some(Tok::LParen)) {
                    return Err(self.err(
                        ErrorTag::DisallowedConstruct,
                        "nested calls are not allowed",
                    ));
                }
                return Err(self.err(
                    ErrorTag::NonIntegerLiteral,
                    format!("argument values must be integer literals, not names ('{name}')"),
                ));
            }
            Some(Tok::Plus | Tok::Minus | Tok::LParen) => {
                return Err(self.err(
                    ErrorTag::NonIntegerLiteral,
                    "argument values must be plain integer literals with at most one unary sign",
                ))
            }
            Some(Tok::Star) => {
                return Err(self.err(
                    ErrorTag::DisallowedConstruct,
                    "starred expressions are not allowed",
                ))
            }
            Some(Tok::Bad(msg)) => return Err(self.err(ErrorTag::SyntaxError, *msg)),
            Some(_) => return Err(self.err(ErrorTag::SyntaxError, "expected an argument value")),
            None => {
                return Err(self.err(
                    ErrorTag::SyntaxError,
                    "unexpected end of input inside a call",
                ))
            }
        };
        self.advance();
        if matches!(
            self.peek(),
            Some(Tok::Plus | Tok::Minus | Tok::Star | Tok::Dot)
        ) {
            return Err(self.err(
                ErrorTag::NonIntegerLiteral,
                "arithmetic expressions are not allowed as argument values",
            ));
        }
        let signed = if negative { magnitude.saturating_neg() } else { magnitude };
        Ok(signed.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32)
    }
}

// --- keyword and range phases ------------------------------------------

fn signature(kind: ShapeKind) -> Vec<&'static str> {
    let mut keywords = vec!["cx", "cy", kind.extent_keyword()];
    if kind.is_hollow() {
        keywords.push("stroke");
    }
    keywords
}

/// Second pass: the keyword multiset of every call must exactly match its
/// primitive's signature. Within one call, duplicates are reported before
/// unexpected keywords, which are reported before missing ones.
fn check_keywords(calls: &[RawCall]) -> Result<(), ParseError> {
    for call in calls {
        let expected = signature(call.kind);
        let mut seen: Vec<&str> = Vec::new();
        for arg in &call.args {
            if seen.contains(&arg.keyword.as_str()) {
                return Err(ParseError::new(
                    ErrorTag::DuplicateKeyword,
                    arg.line,
                    format!("keyword '{}' given more than once", arg.keyword),
                ));
            }
            seen.push(&arg.keyword);
        }
        for arg in &call.args {
            if !expected.contains(&arg.keyword.as_str()) {
                return Err(ParseError::new(
                    ErrorTag::UnexpectedKeyword,
                    arg.line,
                    format!("'{}' does not take a keyword '{}'", call.kind.name(), arg.keyword),
                ));
            }
        }
        for keyword in &expected {
            if !seen.contains(keyword) {
                return Err(ParseError::new(
                    ErrorTag::MissingKeyword,
                    call.line,
                    format!("'{}' requires the keyword '{}'", call.kind.name(), keyword),
                ));
            }
        }
    }
    Ok(())
}

/// Final pass: build shapes and apply range validation; the first offending
/// shape in program order is reported.
fn build_scene(calls: &[RawCall]) -> Result<Scene, ParseError> {
    let mut shapes = Vec::with_capacity(calls.len());
    for call in calls {
        let get = |keyword: &str| {
            call.args
                .iter()
                .find(|a| a.keyword == keyword)
                .map(|a| a.value)
        };
        let shape = Shape {
            kind: call.kind,
            cx: get("cx").unwrap_or(0),
            cy: get("cy").unwrap_or(0),
            extent: get(call.kind.extent_keyword()).unwrap_or(0),
            stroke: if call.kind.is_hollow() { get("stroke") } else { None },
        };
        if let Err(e) = shape.validate() {
            let tag = match e {
                ValidationError::OutOfRange { .. } => ErrorTag::OutOfRange,
                _ => ErrorTag::InvalidStroke,
            };
            return Err(ParseError::new(tag, call.line, e.to_string()));
        }
        shapes.push(shape);
    }
    Ok(Scene::new(shapes))
}
