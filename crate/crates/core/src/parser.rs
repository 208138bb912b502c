//! Recursion-formula DSL.
//!
//! ```text
//! statement := "X[" idx "]" "=" expr | "X[0]" "=" "input"
//! expr      := ["+"|"-"] term (("+"|"-") term)*
//! term      := factor ("*" factor)*
//! factor    := integer | "W[" idx "]" | "X[" idx "]" | "(" expr ")"
//! idx       := identifier (("+"|"-") integer)? | integer
//! ```
//!
//! Statements are separated by newlines or `;`, `#` starts a comment. `−` is
//! accepted for `-` and `·`/`⋅` for `*`. Exactly one statement must have a
//! variable left-hand side (the rule); the others are base cases.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::poly::{PathPolynomial, Word};
use crate::spec::{
    ArchitectureSpec, BaseCase, CoefficientExpr, RecursionRule, RelativeWord, Source,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: Position,
        expected: String,
        found: String,
    },
    #[error("non-affine term at {pos}: {reason}")]
    NonAffine { pos: Position, reason: String },
    #[error("non-causal reference at {pos}: {detail}")]
    NonCausal { pos: Position, detail: String },
    #[error("index out of range at {pos}: {detail}")]
    Range { pos: Position, detail: String },
    #[error("missing base case for X[{index}] at {pos}: the rule first applies at X[{first}]")]
    MissingBase {
        pos: Position,
        index: u32,
        first: u32,
    },
    #[error("duplicate definition of X[{index}] at {pos}")]
    Duplicate { pos: Position, index: String },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::NonAffine { pos, .. }
            | ParseError::NonCausal { pos, .. }
            | ParseError::Range { pos, .. }
            | ParseError::MissingBase { pos, .. }
            | ParseError::Duplicate { pos, .. } => *pos,
        }
    }
}

/// Parses DSL text into a validated spec with an empty name.
pub fn parse(text: &str) -> Result<ArchitectureSpec, ParseError> {
    Parser::new(text)?.parse_program()
}

pub fn parse_named(name: &str, text: &str) -> Result<ArchitectureSpec, ParseError> {
    parse(text).map(|s| s.with_name(name))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Equals,
    Sep,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Equals => f.write_str("`=`"),
            Tok::Sep => f.write_str("end of statement"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut line_start = 0;
    let mut chars = text.char_indices().peekable();
    let pos_of = |offset: usize, line: usize, line_start: usize| Position {
        offset,
        line,
        column: text[line_start..offset].chars().count() + 1,
    };
    while let Some(&(off, ch)) = chars.peek() {
        let pos = pos_of(off, line, line_start);
        match ch {
            '\n' => {
                chars.next();
                out.push((Tok::Sep, pos));
                line += 1;
                line_start = off + 1;
            }
            ';' => {
                chars.next();
                out.push((Tok::Sep, pos));
            }
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '[' | ']' | '(' | ')' | '+' | '-' | '−' | '*' | '·' | '⋅' | '=' => {
                chars.next();
                let tok = match ch {
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '+' => Tok::Plus,
                    '-' | '−' => Tok::Minus,
                    '=' => Tok::Equals,
                    _ => Tok::Star,
                };
                out.push((tok, pos));
            }
            c if c.is_ascii_digit() => {
                let mut end = off;
                while let Some(&(o, c)) = chars.peek() {
                    if !c.is_ascii_digit() {
                        break;
                    }
                    end = o + c.len_utf8();
                    chars.next();
                }
                let n = text[off..end]
                    .parse::<u64>()
                    .map_err(|_| ParseError::Syntax {
                        pos,
                        expected: "an integer that fits in 64 bits".into(),
                        found: format!("`{}`", &text[off..end]),
                    })?;
                out.push((Tok::Int(n), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut end = off;
                while let Some(&(o, c)) = chars.peek() {
                    if !(c.is_alphanumeric() || c == '_') {
                        break;
                    }
                    end = o + c.len_utf8();
                    chars.next();
                }
                out.push((Tok::Ident(text[off..end].to_string()), pos));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "a formula token".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    let end = text.len();
    out.push((Tok::Eof, pos_of(end, line, line_start)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Idx {
    /// `var + offset`
    Rel {
        var: String,
        offset: i64,
    },
    Abs(u64),
}

impl fmt::Display for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Idx::Rel { var, offset: 0 } => f.write_str(var),
            Idx::Rel { var, offset } if *offset > 0 => write!(f, "{var}+{offset}"),
            Idx::Rel { var, offset } => write!(f, "{var}{offset}"),
            Idx::Abs(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    W,
    X,
}

#[derive(Debug, Clone)]
struct Atom {
    sym: Sym,
    idx: Idx,
    pos: Position,
}

/// One additive term after distribution: `coeff * atoms[0] * atoms[1] * ...`.
#[derive(Debug, Clone)]
struct Mono {
    coeff: i64,
    atoms: Vec<Atom>,
    pos: Position,
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
}

enum Lhs {
    Rule { var: String },
    Base { index: u32 },
    Input,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Position {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Position) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Position, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn parse_program(&mut self) -> Result<ArchitectureSpec, ParseError> {
        let mut rule: Option<(RecursionRule, Position)> = None;
        let mut bases: BTreeMap<u32, BaseCase> = BTreeMap::new();
        let mut input_seen = false;
        loop {
            while *self.peek() == Tok::Sep {
                self.bump();
            }
            if *self.peek() == Tok::Eof {
                break;
            }
            let start = self.pos();
            let lhs = self.parse_lhs()?;
            match lhs {
                Lhs::Input => {
                    if input_seen {
                        return Err(ParseError::Duplicate {
                            pos: start,
                            index: "0".into(),
                        });
                    }
                    input_seen = true;
                }
                Lhs::Rule { var } => {
                    if rule.is_some() {
                        return Err(ParseError::Duplicate {
                            pos: start,
                            index: var,
                        });
                    }
                    let monos = self.parse_expr()?;
                    rule = Some((build_rule(var, monos, start)?, start));
                }
                Lhs::Base { index } => {
                    if bases.contains_key(&index) {
                        return Err(ParseError::Duplicate {
                            pos: start,
                            index: index.to_string(),
                        });
                    }
                    let monos = self.parse_expr()?;
                    bases.insert(index, build_base(index, monos, start)?);
                }
            }
            match self.peek() {
                Tok::Sep | Tok::Eof => {}
                _ => return Err(self.unexpected("`+`, `-`, `*` or end of statement")),
            }
        }
        let Some((rule, rule_pos)) = rule else {
            return Err(ParseError::Syntax {
                pos: self.pos(),
                expected: "a recursion rule `X[i] = ...`".into(),
                found: "end of input".into(),
            });
        };
        let first = rule.first_index();
        if let Some(index) = (1..first).find(|j| !bases.contains_key(j)) {
            return Err(ParseError::MissingBase {
                pos: rule_pos,
                index,
                first,
            });
        }
        Ok(ArchitectureSpec {
            name: String::new(),
            rule,
            base_cases: bases,
        })
    }

    fn parse_lhs(&mut self) -> Result<Lhs, ParseError> {
        let (sym, idx, pos) = match self.peek() {
            Tok::Ident(s) if s == "X" => {
                let a = self.parse_symbol()?;
                (a.sym, a.idx, a.pos)
            }
            _ => return Err(self.unexpected("`X[...]` on the left-hand side")),
        };
        debug_assert_eq!(sym, Sym::X);
        self.expect(Tok::Equals, "`=`")?;
        match idx {
            Idx::Abs(0) => match self.peek() {
                Tok::Ident(s) if s == "input" => {
                    self.bump();
                    Ok(Lhs::Input)
                }
                _ => Err(self.unexpected("`input` (X[0] is the free network input)")),
            },
            Idx::Abs(n) => {
                let index = u32::try_from(n).map_err(|_| ParseError::Range {
                    pos,
                    detail: format!("state index {n} is too large"),
                })?;
                Ok(Lhs::Base { index })
            }
            Idx::Rel { var, offset: 0 } => Ok(Lhs::Rule { var }),
            Idx::Rel { .. } => Err(ParseError::Syntax {
                pos,
                expected: "a bare index variable such as `X[i]`".into(),
                found: format!("`X[{idx}]`"),
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Vec<Mono>, ParseError> {
        let mut sign = 1;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = -1;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        let mut out = Vec::new();
        loop {
            let term = self.parse_term()?;
            out.extend(term.into_iter().map(|mut m| {
                m.coeff *= sign;
                m
            }));
            match self.peek() {
                Tok::Plus => sign = 1,
                Tok::Minus => sign = -1,
                _ => break,
            }
            self.bump();
        }
        Ok(out)
    }

    fn parse_term(&mut self) -> Result<Vec<Mono>, ParseError> {
        let mut acc = self.parse_factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.parse_factor()?;
            let mut prod = Vec::with_capacity(acc.len() * rhs.len());
            for a in &acc {
                for b in &rhs {
                    let mut atoms = a.atoms.clone();
                    atoms.extend(b.atoms.iter().cloned());
                    prod.push(Mono {
                        coeff: a.coeff * b.coeff,
                        atoms,
                        pos: a.pos,
                    });
                }
            }
            acc = prod;
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<Vec<Mono>, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let coeff = i64::try_from(n).map_err(|_| ParseError::Range {
                    pos,
                    detail: format!("coefficient {n} is too large"),
                })?;
                Ok(vec![Mono {
                    coeff,
                    atoms: Vec::new(),
                    pos,
                }])
            }
            Tok::Ident(s) if s == "W" || s == "X" => {
                let atom = self.parse_symbol()?;
                Ok(vec![Mono {
                    coeff: 1,
                    atoms: vec![atom],
                    pos,
                }])
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("`1`, `W[...]`, `X[...]` or `(`")),
        }
    }

    fn parse_symbol(&mut self) -> Result<Atom, ParseError> {
        let (tok, pos) = self.bump();
        let sym = match tok {
            Tok::Ident(s) if s == "W" => Sym::W,
            Tok::Ident(s) if s == "X" => Sym::X,
            _ => unreachable!("caller checked for W or X"),
        };
        self.expect(Tok::LBracket, "`[`")?;
        let idx = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Idx::Abs(n)
            }
            Tok::Ident(var) => {
                self.bump();
                let offset = match self.peek() {
                    Tok::Plus | Tok::Minus => {
                        let sign = if *self.peek() == Tok::Plus { 1 } else { -1 };
                        self.bump();
                        let ipos = self.pos();
                        match self.bump().0 {
                            Tok::Int(n) => {
                                let n = i64::try_from(n).map_err(|_| ParseError::Range {
                                    pos: ipos,
                                    detail: format!("offset {n} is too large"),
                                })?;
                                sign * n
                            }
                            found => {
                                return Err(ParseError::Syntax {
                                    pos: ipos,
                                    expected: "an integer offset".into(),
                                    found: found.to_string(),
                                })
                            }
                        }
                    }
                    _ => 0,
                };
                Idx::Rel { var, offset }
            }
            _ => return Err(self.unexpected("an index such as `i`, `i-1` or `0`")),
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Atom { sym, idx, pos })
    }
}

/// Splits a monomial into its block factors and its single trailing state.
fn split_affine(m: &Mono) -> Result<(&[Atom], &Atom), ParseError> {
    let xs: Vec<&Atom> = m.atoms.iter().filter(|a| a.sym == Sym::X).collect();
    match xs.as_slice() {
        [] => Err(ParseError::NonAffine {
            pos: m.pos,
            reason: "term has no state factor X[...]".into(),
        }),
        [_] => {
            let (last, blocks) = m.atoms.split_last().expect("non-empty");
            if last.sym != Sym::X {
                let x = xs[0];
                return Err(ParseError::NonAffine {
                    pos: x.pos,
                    reason: format!("state X[{}] must be the rightmost factor", x.idx),
                });
            }
            Ok((blocks, last))
        }
        [_, second, ..] => Err(ParseError::NonAffine {
            pos: second.pos,
            reason: format!(
                "term multiplies {} state factors; coefficients must not depend on X",
                xs.len()
            ),
        }),
    }
}

fn check_var(var: &str, atom: &Atom) -> Result<(), ParseError> {
    match &atom.idx {
        Idx::Rel { var: v, .. } if v != var => Err(ParseError::Syntax {
            pos: atom.pos,
            expected: format!("index variable `{var}`"),
            found: format!("`{v}`"),
        }),
        _ => Ok(()),
    }
}

fn build_rule(
    var: String,
    monos: Vec<Mono>,
    lhs_pos: Position,
) -> Result<RecursionRule, ParseError> {
    let mut terms: BTreeMap<Source, CoefficientExpr> = BTreeMap::new();
    for m in &monos {
        let (blocks, state) = split_affine(m)?;
        check_var(&var, state)?;
        let source = match state.idx {
            Idx::Rel { offset, .. } if offset >= 0 => {
                return Err(ParseError::NonCausal {
                    pos: state.pos,
                    detail: format!("X[{}] is not earlier than X[{var}]", state.idx),
                })
            }
            Idx::Rel { offset, .. } => Source::Lag(to_u32(-offset, state.pos)?),
            Idx::Abs(j) => Source::Absolute(to_u32(j as i64, state.pos)?),
        };
        let mut offsets = Vec::with_capacity(blocks.len());
        for b in blocks {
            check_var(&var, b)?;
            match b.idx {
                Idx::Rel { offset, .. } if offset > 0 => {
                    return Err(ParseError::Range {
                        pos: b.pos,
                        detail: format!("W[{}] lies outside [1, {var}]", b.idx),
                    })
                }
                Idx::Rel { offset, .. } => offsets.push(to_u32(-offset, b.pos)?),
                Idx::Abs(_) => {
                    return Err(ParseError::Range {
                        pos: b.pos,
                        detail: format!("W[{}] must be relative to `{var}` inside the rule", b.idx),
                    })
                }
            }
        }
        terms
            .entry(source)
            .or_default()
            .add_term(m.coeff, RelativeWord::new(offsets));
    }
    terms.retain(|_, c| !c.is_zero());
    if terms.is_empty() {
        return Err(ParseError::NonAffine {
            pos: lhs_pos,
            reason: "rule has no state terms after collecting coefficients".into(),
        });
    }
    Ok(RecursionRule { var, terms })
}

fn build_base(index: u32, monos: Vec<Mono>, lhs_pos: Position) -> Result<BaseCase, ParseError> {
    let mut terms: BTreeMap<u32, PathPolynomial> = BTreeMap::new();
    for m in &monos {
        let (blocks, state) = split_affine(m)?;
        let source = match &state.idx {
            Idx::Abs(j) if *j < index as u64 => *j as u32,
            Idx::Abs(_) => {
                return Err(ParseError::NonCausal {
                    pos: state.pos,
                    detail: format!("X[{}] is not earlier than X[{index}]", state.idx),
                })
            }
            Idx::Rel { .. } => return Err(no_variable(state)),
        };
        let mut factors = Vec::with_capacity(blocks.len());
        for b in blocks {
            match &b.idx {
                Idx::Abs(k) if (1..=index as u64).contains(k) => factors.push(*k as u32),
                Idx::Abs(_) => {
                    return Err(ParseError::Range {
                        pos: b.pos,
                        detail: format!("W[{}] lies outside [1, {index}]", b.idx),
                    })
                }
                Idx::Rel { .. } => return Err(no_variable(b)),
            }
        }
        let word = Word::new(factors).expect("indices checked >= 1");
        terms.entry(source).or_default().add_term(m.coeff, word);
    }
    terms.retain(|_, p| !p.is_zero());
    if terms.is_empty() {
        return Err(ParseError::NonAffine {
            pos: lhs_pos,
            reason: format!("X[{index}] has no state terms after collecting coefficients"),
        });
    }
    Ok(BaseCase { index, terms })
}

fn no_variable(atom: &Atom) -> ParseError {
    ParseError::Syntax {
        pos: atom.pos,
        expected: "an absolute index in a base case".into(),
        found: format!("`{}`", atom.idx),
    }
}

fn to_u32(v: i64, pos: Position) -> Result<u32, ParseError> {
    u32::try_from(v).map_err(|_| ParseError::Range {
        pos,
        detail: format!("index {v} is too large"),
    })
}
