//! Binary bracketings over token sequences, their shift-reduce encoding, and
//! the reference and baseline tree constructors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::lang::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid transition sequence at index {index}")]
    InvalidTransitionSeq { index: usize },
    #[error("a tree needs at least one leaf")]
    Empty,
    #[error("malformed tree at byte {position}: {message}")]
    Parse { position: usize, message: &'static str },
    #[error("unknown transition symbol {0:?}")]
    UnknownTransition(char),
}

/// A projective binary tree; leaves carry token indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinaryTree {
    Leaf(usize),
    Node(Box<BinaryTree>, Box<BinaryTree>),
}

/// Inclusive token range covered by one internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl BinaryTree {
    pub fn node(left: BinaryTree, right: BinaryTree) -> BinaryTree {
        BinaryTree::Node(Box::new(left), Box::new(right))
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 1,
            BinaryTree::Node(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    /// Leaf indices in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            BinaryTree::Leaf(i) => out.push(*i),
            BinaryTree::Node(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// True when the leaves read `0..n` in order.
    pub fn is_complete_over(&self, n: usize) -> bool {
        self.leaves().into_iter().eq(0..n)
    }

    /// One span per internal node, root included, in post-order.
    pub fn spans(&self) -> Vec<Span> {
        let mut out = Vec::new();
        self.collect_spans(&mut out);
        out
    }

    fn collect_spans(&self, out: &mut Vec<Span>) -> (usize, usize) {
        match self {
            BinaryTree::Leaf(i) => (*i, *i),
            BinaryTree::Node(l, r) => {
                let (start, _) = l.collect_spans(out);
                let (_, end) = r.collect_spans(out);
                out.push(Span { start, end });
                (start, end)
            }
        }
    }

    /// Sum over leaves of their depth, with the root at depth 0.
    pub fn depth_sum(&self) -> usize {
        fn walk(t: &BinaryTree, depth: usize) -> usize {
            match t {
                BinaryTree::Leaf(_) => depth,
                BinaryTree::Node(l, r) => walk(l, depth + 1) + walk(r, depth + 1),
            }
        }
        walk(self, 0)
    }

    pub fn avg_token_depth(&self) -> f64 {
        self.depth_sum() as f64 / self.leaf_count() as f64
    }

    /// Parenthesized rendering with each leaf replaced by `labels[index]`.
    pub fn to_bracketed<L: fmt::Display>(&self, labels: &[L]) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out, &|i| labels[i].to_string());
        out
    }

    fn write_bracketed(&self, out: &mut String, label: &dyn Fn(usize) -> String) {
        match self {
            BinaryTree::Leaf(i) => out.push_str(&label(*i)),
            BinaryTree::Node(l, r) => {
                out.push('(');
                l.write_bracketed(out, label);
                out.push(' ');
                r.write_bracketed(out, label);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for BinaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write_bracketed(&mut out, &|i| i.to_string());
        f.write_str(&out)
    }
}

/// Parses a bracketed tree; leaves are numbered left to right and their
/// surface labels are returned alongside.
pub fn parse_bracketed(text: &str) -> Result<(BinaryTree, Vec<String>), TreeError> {
    struct Parser<'a> {
        bytes: &'a [u8],
        text: &'a str,
        pos: usize,
        labels: Vec<String>,
    }
    impl Parser<'_> {
        fn skip_ws(&mut self) {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }
        fn tree(&mut self) -> Result<BinaryTree, TreeError> {
            self.skip_ws();
            match self.bytes.get(self.pos) {
                None => Err(TreeError::Parse { position: self.pos, message: "unexpected end of input" }),
                Some(b')') => Err(TreeError::Parse { position: self.pos, message: "unexpected ')'" }),
                Some(b'(') => {
                    self.pos += 1;
                    let left = self.tree()?;
                    let right = self.tree()?;
                    self.skip_ws();
                    if self.bytes.get(self.pos) != Some(&b')') {
                        return Err(TreeError::Parse { position: self.pos, message: "expected ')' after two children" });
                    }
                    self.pos += 1;
                    Ok(BinaryTree::node(left, right))
                }
                Some(_) => {
                    let start = self.pos;
                    while self.pos < self.bytes.len()
                        && !matches!(self.bytes[self.pos], b'(' | b')')
                        && !self.bytes[self.pos].is_ascii_whitespace()
                    {
                        self.pos += 1;
                    }
                    self.labels.push(self.text[start..self.pos].to_string());
                    Ok(BinaryTree::Leaf(self.labels.len() - 1))
                }
            }
        }
    }

    let mut p = Parser { bytes: text.as_bytes(), text, pos: 0, labels: Vec::new() };
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(TreeError::Parse { position: p.pos, message: "trailing input" });
    }
    Ok((tree, p.labels))
}

/// The reference bracketing: left-branching within each list, with every
/// closed sub-list folded together with its `]` before joining its parent.
pub fn reference_parse(expr: &Expr) -> BinaryTree {
    fn build(expr: &Expr, next: &mut usize) -> BinaryTree {
        let mut leaf = || {
            *next += 1;
            BinaryTree::Leaf(*next - 1)
        };
        match expr {
            Expr::Digit(_) => leaf(),
            Expr::List(list) => {
                let mut partial = leaf();
                for child in &list.children {
                    let c = build(child, next);
                    partial = BinaryTree::node(partial, c);
                }
                let close = BinaryTree::Leaf(*next);
                *next += 1;
                BinaryTree::node(partial, close)
            }
        }
    }
    let mut next = 0;
    build(expr, &mut next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    Reduce,
}

/// Shift-reduce linearization of a binary tree: `n` shifts, `n - 1` reduces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TransitionSeq(pub Vec<Transition>);

impl TransitionSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn shift_count(&self) -> usize {
        self.0.iter().filter(|&&a| a == Transition::Shift).count()
    }

    /// Token count implied by a complete sequence of length `2n - 1`.
    pub fn token_count(&self) -> usize {
        (self.0.len() + 1) / 2
    }
}

impl fmt::Display for TransitionSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            f.write_str(match a {
                Transition::Shift => "S",
                Transition::Reduce => "R",
            })?;
        }
        Ok(())
    }
}

impl FromStr for TransitionSeq {
    type Err = TreeError;

    /// Accepts `S`/`R` symbols; whitespace between them is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'S' => Ok(Transition::Shift),
                'R' => Ok(Transition::Reduce),
                other => Err(TreeError::UnknownTransition(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TransitionSeq)
    }
}

/// Post-order linearization: a leaf shifts, an internal node reduces after
/// both children.
pub fn tree_to_transitions(tree: &BinaryTree) -> TransitionSeq {
    fn walk(t: &BinaryTree, out: &mut Vec<Transition>) {
        match t {
            BinaryTree::Leaf(_) => out.push(Transition::Shift),
            BinaryTree::Node(l, r) => {
                walk(l, out);
                walk(r, out);
                out.push(Transition::Reduce);
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, &mut out);
    TransitionSeq(out)
}

/// Replays the transitions on a stack machine over `n` tokens.
pub fn transitions_to_tree(actions: &TransitionSeq, n: usize) -> Result<BinaryTree, TreeError> {
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let mut stack: Vec<BinaryTree> = Vec::with_capacity(n);
    let mut shifted = 0;
    for (index, action) in actions.0.iter().enumerate() {
        match action {
            Transition::Shift => {
                if shifted == n {
                    return Err(TreeError::InvalidTransitionSeq { index });
                }
                stack.push(BinaryTree::Leaf(shifted));
                shifted += 1;
            }
            Transition::Reduce => {
                if stack.len() < 2 {
                    return Err(TreeError::InvalidTransitionSeq { index });
                }
                let right = stack.pop().unwrap();
                let left = stack.pop().unwrap();
                stack.push(BinaryTree::node(left, right));
            }
        }
    }
    if shifted != n || stack.len() != 1 {
        return Err(TreeError::InvalidTransitionSeq { index: actions.len() });
    }
    Ok(stack.pop().unwrap())
}

/// `((0 1) 2) ...`
pub fn left_branching(n: usize) -> BinaryTree {
    assert!(n >= 1, "a tree needs at least one leaf");
    (1..n).fold(BinaryTree::Leaf(0), |acc, i| BinaryTree::node(acc, BinaryTree::Leaf(i)))
}

/// `0 (1 (2 ...))`
pub fn right_branching(n: usize) -> BinaryTree {
    assert!(n >= 1, "a tree needs at least one leaf");
    (0..n - 1).rev().fold(BinaryTree::Leaf(n - 1), |acc, i| BinaryTree::node(BinaryTree::Leaf(i), acc))
}

/// Samples a tree by choosing uniformly among the legal shift-reduce actions
/// at every step. This is not uniform over trees.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BinaryTree {
    assert!(n >= 1, "a tree needs at least one leaf");
    let mut stack: Vec<BinaryTree> = Vec::with_capacity(n);
    let mut shifted = 0;
    while shifted < n || stack.len() > 1 {
        let can_shift = shifted < n;
        let can_reduce = stack.len() >= 2;
        let shift = match (can_shift, can_reduce) {
            (true, true) => rng.random_bool(0.5),
            (s, _) => s,
        };
        if shift {
            stack.push(BinaryTree::Leaf(shifted));
            shifted += 1;
        } else {
            let right = stack.pop().unwrap();
            let left = stack.pop().unwrap();
            stack.push(BinaryTree::node(left, right));
        }
    }
    stack.pop().unwrap()
}
