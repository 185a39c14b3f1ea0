//! Boolean filter expressions over parsed CHAT headers.
//!
//! Grammar (lowercase keywords, `and` binds tighter than `or`):
//!
//! ```text
//! expr   := or ; or := and { "or" and } ; and := atom { "and" atom }
//! atom   := "not" atom | "(" expr ")" | pred
//! pred   := "exists(" CODE ")" | "nonempty(" CODE "." FIELD ")"
//!         | "equals(" CODE "." FIELD "," STRING ")"
//!         | "in(" CODE "." FIELD "," STRING {"," STRING} ")"
//!         | "age_in(" CODE "," NUMBER "," NUMBER ")"
//! ```
//!
//! Evaluation is total: an absent participant or field makes the atom
//! false, never an error.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat_header::{get_field, Field, HeaderMetadata};

/// AST of a boolean filter over header metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FilterExpr {
    /// Conjunction; always has at least two children.
    And(Vec<FilterExpr>),
    /// Disjunction; always has at least two children.
    Or(Vec<FilterExpr>),
    Not(Box<FilterExpr>),
    /// True iff the speaker code is declared in the header.
    Exists(String),
    /// True iff the field is present with non-blank content.
    NonEmpty(String, Field),
    /// Case-sensitive comparison after trimming surrounding whitespace.
    Equals(String, Field, String),
    /// True iff the field equals any of the listed values.
    InSet(String, Field, Vec<String>),
    /// True iff the participant's age is present and within the inclusive
    /// range in months.
    AgeInRange(String, f64, f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {col}: {reason}")]
    Syntax { line: usize, col: usize, reason: String },
    #[error("unknown predicate `{name}` at line {line}, column {col}")]
    UnknownPredicate { name: String, line: usize, col: usize },
    #[error("unknown field `{name}` at line {line}, column {col}")]
    UnknownFieldName { name: String, line: usize, col: usize },
    #[error("malformed age range at line {line}, column {col}: {reason}")]
    MalformedRange { line: usize, col: usize, reason: String },
}

/// Evaluate a filter against one header. Total over well-formed ASTs.
pub fn eval_expr(expr: &FilterExpr, header: &HeaderMetadata) -> bool {
    match expr {
        FilterExpr::And(children) => children.iter().all(|c| eval_expr(c, header)),
        FilterExpr::Or(children) => children.iter().any(|c| eval_expr(c, header)),
        FilterExpr::Not(child) => !eval_expr(child, header),
        FilterExpr::Exists(code) => header.participants.contains_key(code),
        FilterExpr::NonEmpty(code, field) => get_field(header, code, *field).is_some(),
        FilterExpr::Equals(code, field, value) => {
            get_field(header, code, *field).is_some_and(|v| v == value.trim())
        }
        FilterExpr::InSet(code, field, values) => get_field(header, code, *field)
            .is_some_and(|v| values.iter().any(|w| v == w.trim())),
        FilterExpr::AgeInRange(code, lo, hi) => header
            .participants
            .get(code)
            .and_then(|rec| rec.age_months)
            .is_some_and(|a| *lo <= a && a <= *hi),
    }
}

/// Parse filter source text into an AST.
pub fn parse_expr(src: &str) -> Result<FilterExpr, ExprError> {
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        Token::Eof { .. } => Ok(expr),
        tok => Err(syntax(tok.line(), tok.col(), format!("unexpected `{}`", tok.text()))),
    }
}

// --- lexer -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident { text: String, line: usize, col: usize },
    Str { text: String, line: usize, col: usize },
    Num { value: f64, line: usize, col: usize },
    LParen { line: usize, col: usize },
    RParen { line: usize, col: usize },
    Comma { line: usize, col: usize },
    Dot { line: usize, col: usize },
    Eof { line: usize, col: usize },
}

impl Token {
    fn line(&self) -> usize {
        match self {
            Token::Ident { line, .. }
            | Token::Str { line, .. }
            | Token::Num { line, .. }
            | Token::LParen { line, .. }
            | Token::RParen { line, .. }
            | Token::Comma { line, .. }
            | Token::Dot { line, .. }
            | Token::Eof { line, .. } => *line,
        }
    }

    fn col(&self) -> usize {
        match self {
            Token::Ident { col, .. }
            | Token::Str { col, .. }
            | Token::Num { col, .. }
            | Token::LParen { col, .. }
            | Token::RParen { col, .. }
            | Token::Comma { col, .. }
            | Token::Dot { col, .. }
            | Token::Eof { col, .. } => *col,
        }
    }

    fn text(&self) -> String {
        match self {
            Token::Ident { text, .. } => text.clone(),
            Token::Str { text, .. } => format!("\"{text}\""),
            Token::Num { value, .. } => value.to_string(),
            Token::LParen { .. } => "(".into(),
            Token::RParen { .. } => ")".into(),
            Token::Comma { .. } => ",".into(),
            Token::Dot { .. } => ".".into(),
            Token::Eof { .. } => "end of input".into(),
        }
    }
}

fn syntax(line: usize, col: usize, reason: impl Into<String>) -> ExprError {
    ExprError::Syntax { line, col, reason: reason.into() }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '(' => {
                chars.next();
                bump(c, &mut line, &mut col);
                tokens.push(Token::LParen { line: tl, col: tc });
            }
            ')' => {
                chars.next();
                bump(c, &mut line, &mut col);
                tokens.push(Token::RParen { line: tl, col: tc });
            }
            ',' => {
                chars.next();
                bump(c, &mut line, &mut col);
                tokens.push(Token::Comma { line: tl, col: tc });
            }
            '.' => {
                chars.next();
                bump(c, &mut line, &mut col);
                tokens.push(Token::Dot { line: tl, col: tc });
            }
            '"' => {
                chars.next();
                bump(c, &mut line, &mut col);
                let mut text = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            bump('"', &mut line, &mut col);
                            break;
                        }
                        Some('\\') => {
                            bump('\\', &mut line, &mut col);
                            match chars.next() {
                                Some(e @ ('"' | '\\')) => {
                                    bump(e, &mut line, &mut col);
                                    text.push(e);
                                }
                                Some(other) => {
                                    return Err(syntax(
                                        line,
                                        col,
                                        format!("invalid escape `\\{other}`"),
                                    ))
                                }
                                None => return Err(syntax(line, col, "unterminated string")),
                            }
                        }
                        Some(other) => {
                            bump(other, &mut line, &mut col);
                            text.push(other);
                        }
                        None => return Err(syntax(tl, tc, "unterminated string")),
                    }
                }
                tokens.push(Token::Str { text, line: tl, col: tc });
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        // A digit followed by `.` could also be a dot token,
                        // but dots only follow identifiers in this grammar.
                        text.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(tl, tc, format!("invalid number `{text}`")))?;
                tokens.push(Token::Num { value, line: tl, col: tc });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        text.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                if text == "inf" {
                    tokens.push(Token::Num { value: f64::INFINITY, line: tl, col: tc });
                } else {
                    tokens.push(Token::Ident { text, line: tl, col: tc });
                }
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    tokens.push(Token::Eof { line, col });
    Ok(tokens)
}

// --- parser ----------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect_lparen(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Token::LParen { .. } => Ok(()),
            tok => Err(syntax(tok.line(), tok.col(), format!("expected `(`, found `{}`", tok.text()))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Token::RParen { .. } => Ok(()),
            tok => Err(syntax(tok.line(), tok.col(), format!("expected `)`, found `{}`", tok.text()))),
        }
    }

    fn expect_comma(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Token::Comma { .. } => Ok(()),
            tok => Err(syntax(tok.line(), tok.col(), format!("expected `,`, found `{}`", tok.text()))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ExprError> {
        match self.next() {
            Token::Ident { text, line, col } => Ok((text, line, col)),
            tok => Err(syntax(
                tok.line(),
                tok.col(),
                format!("expected {what}, found `{}`", tok.text()),
            )),
        }
    }

    fn expr(&mut self) -> Result<FilterExpr, ExprError> {
        let first = self.and_expr()?;
        let mut children = vec![first];
        while matches!(self.peek(), Token::Ident { text, .. } if text == "or") {
            self.next();
            children.push(self.and_expr()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            FilterExpr::Or(children)
        })
    }

    fn and_expr(&mut self) -> Result<FilterExpr, ExprError> {
        let first = self.atom()?;
        let mut children = vec![first];
        while matches!(self.peek(), Token::Ident { text, .. } if text == "and") {
            self.next();
            children.push(self.atom()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            FilterExpr::And(children)
        })
    }

    fn atom(&mut self) -> Result<FilterExpr, ExprError> {
        match self.peek().clone() {
            Token::Ident { text, .. } if text == "not" => {
                self.next();
                Ok(FilterExpr::Not(Box::new(self.atom()?)))
            }
            Token::LParen { .. } => {
                self.next();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident { .. } => self.pred(),
            tok => Err(syntax(
                tok.line(),
                tok.col(),
                format!("expected predicate, found `{}`", tok.text()),
            )),
        }
    }

    fn field(&mut self) -> Result<Field, ExprError> {
        let (name, line, col) = self.ident("field name")?;
        name.parse()
            .map_err(|_| ExprError::UnknownFieldName { name, line, col })
    }

    fn string(&mut self) -> Result<String, ExprError> {
        match self.next() {
            Token::Str { text, .. } => Ok(text),
            tok => Err(syntax(
                tok.line(),
                tok.col(),
                format!("expected string literal, found `{}`", tok.text()),
            )),
        }
    }

    fn number(&mut self) -> Result<(f64, usize, usize), ExprError> {
        match self.next() {
            Token::Num { value, line, col } => Ok((value, line, col)),
            tok => Err(syntax(
                tok.line(),
                tok.col(),
                format!("expected number, found `{}`", tok.text()),
            )),
        }
    }

    fn pred(&mut self) -> Result<FilterExpr, ExprError> {
        let (name, line, col) = self.ident("predicate")?;
        match name.as_str() {
            "exists" => {
                self.expect_lparen()?;
                let (code, _, _) = self.ident("speaker code")?;
                self.expect_rparen()?;
                Ok(FilterExpr::Exists(code))
            }
            "nonempty" => {
                self.expect_lparen()?;
                let (code, field) = self.code_dot_field()?;
                self.expect_rparen()?;
                Ok(FilterExpr::NonEmpty(code, field))
            }
            "equals" => {
                self.expect_lparen()?;
                let (code, field) = self.code_dot_field()?;
                self.expect_comma()?;
                let value = self.string()?;
                self.expect_rparen()?;
                Ok(FilterExpr::Equals(code, field, value))
            }
            "in" => {
                self.expect_lparen()?;
                let (code, field) = self.code_dot_field()?;
                self.expect_comma()?;
                let mut values = vec![self.string()?];
                while matches!(self.peek(), Token::Comma { .. }) {
                    self.next();
                    values.push(self.string()?);
                }
                self.expect_rparen()?;
                Ok(FilterExpr::InSet(code, field, values))
            }
            "age_in" => {
                self.expect_lparen()?;
                let (code, _, _) = self.ident("speaker code")?;
                self.expect_comma()?;
                let (lo, lo_line, lo_col) = self.number()?;
                self.expect_comma()?;
                let (hi, _, _) = self.number()?;
                self.expect_rparen()?;
                if lo < 0.0 || hi < lo {
                    return Err(ExprError::MalformedRange {
                        line: lo_line,
                        col: lo_col,
                        reason: format!("need 0 <= lo <= hi, got {lo}..{hi}"),
                    });
                }
                Ok(FilterExpr::AgeInRange(code, lo, hi))
            }
            _ => Err(ExprError::UnknownPredicate { name, line, col }),
        }
    }

    fn code_dot_field(&mut self) -> Result<(String, Field), ExprError> {
        let (code, _, _) = self.ident("speaker code")?;
        match self.next() {
            Token::Dot { .. } => {}
            tok => {
                return Err(syntax(
                    tok.line(),
                    tok.col(),
                    format!("expected `.`, found `{}`", tok.text()),
                ))
            }
        }
        let field = self.field()?;
        Ok((code, field))
    }
}

// --- pretty printer --------------------------------------------------------

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn quoted(s: &str) -> String {
            let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
            format!("\"{escaped}\"")
        }
        fn number(n: f64) -> String {
            if n == f64::INFINITY {
                "inf".to_string()
            } else {
                format!("{n}")
            }
        }
        // Children of a junction are wrapped whenever precedence could
        // re-associate them on re-parse.
        fn child(expr: &FilterExpr, wrap_or_only: bool, out: &mut fmt::Formatter<'_>) -> fmt::Result {
            let needs_parens = match expr {
                FilterExpr::Or(_) => true,
                FilterExpr::And(_) => !wrap_or_only,
                _ => false,
            };
            if needs_parens {
                write!(out, "({expr})")
            } else {
                write!(out, "{expr}")
            }
        }
        match self {
            FilterExpr::And(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " and ")?;
                    }
                    child(c, false, f)?;
                }
                Ok(())
            }
            FilterExpr::Or(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " or ")?;
                    }
                    child(c, true, f)?;
                }
                Ok(())
            }
            FilterExpr::Not(inner) => match inner.as_ref() {
                FilterExpr::And(_) | FilterExpr::Or(_) => write!(f, "not ({inner})"),
                _ => write!(f, "not {inner}"),
            },
            FilterExpr::Exists(code) => write!(f, "exists({code})"),
            FilterExpr::NonEmpty(code, field) => write!(f, "nonempty({code}.{field})"),
            FilterExpr::Equals(code, field, value) => {
                write!(f, "equals({code}.{field}, {})", quoted(value))
            }
            FilterExpr::InSet(code, field, values) => {
                write!(f, "in({code}.{field}")?;
                for v in values {
                    write!(f, ", {}", quoted(v))?;
                }
                write!(f, ")")
            }
            FilterExpr::AgeInRange(code, lo, hi) => {
                write!(f, "age_in({code}, {}, {})", number(*lo), number(*hi))
            }
        }
    }
}

/// The screening expression used throughout the examples: a child
/// participant with SES info on the child, or SES or education info on
/// the mother.
pub const CHILD_SES_SCREEN: &str = "exists(CHI) and (nonempty(CHI.ses) \
or (exists(MOT) and nonempty(MOT.ses)) \
or (exists(MOT) and nonempty(MOT.education)))";
