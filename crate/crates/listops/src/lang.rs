//! The ListOps token language: surface tokens, the n-ary expression tree,
//! operator semantics, and two independent evaluators.
//!
//! [`eval_ast`] is the recursive interpreter over a parsed [`Expr`];
//! [`eval_stack`] evaluates the raw token stream in one pass with a stack of
//! per-list accumulators and never builds a tree. The two are expected to
//! agree on every well-formed input, which makes each an oracle for the other.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of distinct surface tokens: four operators, ten digits, `]`.
pub const VOCAB_SIZE: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("unknown token {text:?} at position {position}")]
    UnknownToken { position: usize, text: String },
    #[error("empty token sequence")]
    EmptyInput,
    #[error("unbalanced brackets at position {position}")]
    UnbalancedBrackets { position: usize },
    #[error("list opened at position {position} has no elements")]
    EmptyList { position: usize },
    #[error("trailing tokens starting at position {position}")]
    TrailingTokens { position: usize },
    #[error("operator applied to an empty list of values")]
    EmptyValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Max,
    Min,
    Med,
    SumMod,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Max, Op::Min, Op::Med, Op::SumMod];

    pub fn index(self) -> usize {
        match self {
            Op::Max => 0,
            Op::Min => 1,
            Op::Med => 2,
            Op::SumMod => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Max => "MAX",
            Op::Min => "MIN",
            Op::Med => "MED",
            Op::SumMod => "SM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Open(Op),
    Digit(u8),
    Close,
}

impl Token {
    /// Dense vocabulary id in `0..VOCAB_SIZE`.
    pub fn index(self) -> usize {
        match self {
            Token::Open(op) => op.index(),
            Token::Digit(d) => 4 + d as usize,
            Token::Close => 14,
        }
    }

    pub fn from_index(index: usize) -> Option<Token> {
        match index {
            0..=3 => Some(Token::Open(Op::ALL[index])),
            4..=13 => Some(Token::Digit((index - 4) as u8)),
            14 => Some(Token::Close),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open(op) => write!(f, "[{}", op.name()),
            Token::Digit(d) => write!(f, "{d}"),
            Token::Close => f.write_str("]"),
        }
    }
}

impl FromStr for Token {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "[MAX" => Token::Open(Op::Max),
            "[MIN" => Token::Open(Op::Min),
            "[MED" => Token::Open(Op::Med),
            "[SM" => Token::Open(Op::SumMod),
            "]" => Token::Close,
            _ => {
                let b = s.as_bytes();
                if b.len() == 1 && b[0].is_ascii_digit() {
                    Token::Digit(b[0] - b'0')
                } else {
                    return Err(());
                }
            }
        })
    }
}

/// Splits on whitespace and maps every unit to a token.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LangError> {
    text.split_whitespace()
        .enumerate()
        .map(|(position, unit)| {
            unit.parse().map_err(|_| LangError::UnknownToken {
                position,
                text: unit.to_string(),
            })
        })
        .collect()
}

/// Exact surface forms joined by single spaces.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::with_capacity(tokens.len() * 3);
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        use fmt::Write;
        write!(out, "{tok}").expect("writing to a String cannot fail");
    }
    out
}

/// A ListOps expression: a bare digit or an operator applied to a list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Digit(u8),
    List(ListAst),
}

/// An operator over an ordered, nonempty list of children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListAst {
    pub op: Op,
    pub children: Vec<Expr>,
}

impl Expr {
    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.token_len());
        self.push_tokens(&mut out);
        out
    }

    pub fn push_tokens(&self, out: &mut Vec<Token>) {
        match self {
            Expr::Digit(d) => out.push(Token::Digit(*d)),
            Expr::List(list) => {
                out.push(Token::Open(list.op));
                for child in &list.children {
                    child.push_tokens(out);
                }
                out.push(Token::Close);
            }
        }
    }

    pub fn token_len(&self) -> usize {
        match self {
            Expr::Digit(_) => 1,
            Expr::List(list) => 2 + list.children.iter().map(Expr::token_len).sum::<usize>(),
        }
    }

    /// Maximum number of nested lists on any root-to-leaf path (a digit is 0).
    pub fn nesting_depth(&self) -> usize {
        match self {
            Expr::Digit(_) => 0,
            Expr::List(list) => {
                1 + list.children.iter().map(Expr::nesting_depth).max().unwrap_or(0)
            }
        }
    }
}

/// Recursive-descent parse of a complete prefix expression.
pub fn parse_prefix(tokens: &[Token]) -> Result<Expr, LangError> {
    if tokens.is_empty() {
        return Err(LangError::EmptyInput);
    }
    let mut pos = 0;
    let expr = parse_expr(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(LangError::TrailingTokens { position: pos });
    }
    Ok(expr)
}

fn parse_expr(tokens: &[Token], pos: &mut usize) -> Result<Expr, LangError> {
    let start = *pos;
    match tokens.get(start) {
        None => Err(LangError::UnbalancedBrackets { position: start }),
        Some(Token::Close) => Err(LangError::UnbalancedBrackets { position: start }),
        Some(Token::Digit(d)) => {
            *pos += 1;
            Ok(Expr::Digit(*d))
        }
        Some(Token::Open(op)) => {
            *pos += 1;
            let mut children = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(LangError::UnbalancedBrackets { position: *pos }),
                    Some(Token::Close) => {
                        if children.is_empty() {
                            return Err(LangError::EmptyList { position: start });
                        }
                        *pos += 1;
                        return Ok(Expr::List(ListAst { op: *op, children }));
                    }
                    Some(_) => children.push(parse_expr(tokens, pos)?),
                }
            }
        }
    }
}

/// Applies one operator to a list of values.
///
/// MAX and MIN return an element of `values`; MED returns the middle element
/// of the sorted list, or the floor of the mean of the two middle elements for
/// even lengths; SM returns the sum modulo 10.
pub fn eval_op(op: Op, values: &[u32]) -> Result<u32, LangError> {
    if values.is_empty() {
        return Err(LangError::EmptyValues);
    }
    Ok(match op {
        Op::Max => *values.iter().max().unwrap(),
        Op::Min => *values.iter().min().unwrap(),
        Op::Med => {
            let mut sorted = values.to_vec();
            sorted.sort_unstable();
            median_of_sorted(&sorted)
        }
        Op::SumMod => (values.iter().map(|&v| u64::from(v)).sum::<u64>() % 10) as u32,
    })
}

fn median_of_sorted(sorted: &[u32]) -> u32 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        ((u64::from(sorted[n / 2 - 1]) + u64::from(sorted[n / 2])) / 2) as u32
    }
}

/// Bottom-up recursive interpreter.
pub fn eval_ast(expr: &Expr) -> u8 {
    match expr {
        Expr::Digit(d) => *d,
        Expr::List(list) => {
            let values: Vec<u32> = list.children.iter().map(|c| u32::from(eval_ast(c))).collect();
            // children are digits or lists over digits, so every result is in 0..=9
            eval_op(list.op, &values).expect("ListAst has at least one child") as u8
        }
    }
}

/// Running summary of one open list.
struct Accumulator {
    op: Op,
    open_position: usize,
    count: usize,
    max: u8,
    min: u8,
    sum_mod: u8,
    // only populated for MED
    values: Vec<u32>,
}

impl Accumulator {
    fn new(op: Op, open_position: usize) -> Self {
        Accumulator { op, open_position, count: 0, max: 0, min: 9, sum_mod: 0, values: Vec::new() }
    }

    fn push(&mut self, v: u8) {
        self.count += 1;
        match self.op {
            Op::Max => self.max = self.max.max(v),
            Op::Min => self.min = self.min.min(v),
            Op::SumMod => self.sum_mod = (self.sum_mod + v) % 10,
            Op::Med => self.values.push(u32::from(v)),
        }
    }

    fn finish(mut self) -> u8 {
        match self.op {
            Op::Max => self.max,
            Op::Min => self.min,
            Op::SumMod => self.sum_mod,
            Op::Med => {
                self.values.sort_unstable();
                median_of_sorted(&self.values) as u8
            }
        }
    }
}

/// Single left-to-right pass over the tokens with a stack of open-list
/// accumulators; a closed list folds its value into its parent.
pub fn eval_stack(tokens: &[Token]) -> Result<u8, LangError> {
    let mut stack: Vec<Accumulator> = Vec::new();
    let mut result = None;
    for (position, &tok) in tokens.iter().enumerate() {
        if result.is_some() {
            return Err(LangError::TrailingTokens { position });
        }
        match tok {
            Token::Open(op) => stack.push(Accumulator::new(op, position)),
            Token::Digit(d) => match stack.last_mut() {
                Some(acc) => acc.push(d),
                None => result = Some(d),
            },
            Token::Close => {
                let acc = stack.pop().ok_or(LangError::UnbalancedBrackets { position })?;
                if acc.count == 0 {
                    return Err(LangError::EmptyList { position: acc.open_position });
                }
                let v = acc.finish();
                match stack.last_mut() {
                    Some(parent) => parent.push(v),
                    None => result = Some(v),
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(LangError::UnbalancedBrackets { position: tokens.len() });
    }
    result.ok_or(LangError::EmptyInput)
}
