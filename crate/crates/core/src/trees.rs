//! Colored rooted trees for stochastic B-series of exponential integrators.
//!
//! A tree is stored in the normal form `[τ̂]_A^q`: a chain of `q` unary
//! A-colored nodes (`a_height`) on top of either the empty tree or a node of
//! color `m ∈ {0, …, M}` with an unordered multiset of non-empty subtrees.
//! Color 0 is the drift (`dt`) color, colors `1..=M` are the Wiener channels.
//!
//! Children are kept sorted by `(ρ, canonical_key)`, so derived equality is
//! tree isomorphism.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

use crate::grade::HalfInt;
use crate::Rational;

/// Node colors as they appear in the tree definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    /// `0` is the drift/time color, `m >= 1` a Wiener channel.
    Noise(u32),
    A,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tree {
    a_height: u32,
    root: Option<Root>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Root {
    color: u32,
    children: Vec<Tree>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty subtree among {0} children; only a single empty child is allowed")]
    EmptyChild(usize),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

impl Tree {
    /// The empty tree `∅`.
    pub fn empty() -> Self {
        Tree { a_height: 0, root: None }
    }

    /// `[∅]_A^q`; `a_power(1)` is the single A-node `•_A`.
    pub fn a_power(q: u32) -> Self {
        Tree { a_height: q, root: None }
    }

    /// The single vertex `•_m`.
    pub fn leaf(color: u32) -> Self {
        Tree {
            a_height: 0,
            root: Some(Root { color, children: Vec::new() }),
        }
    }

    /// `[τ_1, …, τ_κ]_m`, canonicalized. A single empty child collapses to the
    /// leaf `•_m`; empty children next to other children are rejected.
    pub fn node(color: u32, children: Vec<Tree>) -> Result<Self, TreeError> {
        let n = children.len();
        let mut kept: Vec<Tree> = Vec::with_capacity(n);
        for c in children {
            if c.is_empty() {
                if n > 1 {
                    return Err(TreeError::EmptyChild(n));
                }
            } else {
                kept.push(c);
            }
        }
        kept.sort_by_cached_key(|c| (c.rho(), c.canonical_key()));
        Ok(Tree {
            a_height: 0,
            root: Some(Root { color, children: kept }),
        })
    }

    /// `[self]_A^q`.
    pub fn grafted(mut self, q: u32) -> Self {
        self.a_height += q;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.a_height == 0 && self.root.is_none()
    }

    pub fn a_height(&self) -> u32 {
        self.a_height
    }

    /// Color of the node below the A-chain, `None` when that part is `∅`.
    pub fn base_color(&self) -> Option<u32> {
        self.root.as_ref().map(|r| r.color)
    }

    /// Subtrees of the node below the A-chain (empty for leaves and A-powers).
    pub fn children(&self) -> &[Tree] {
        self.root.as_ref().map(|r| r.children.as_slice()).unwrap_or(&[])
    }

    /// Color of the outermost node.
    pub fn root_color(&self) -> Option<Color> {
        if self.a_height > 0 {
            Some(Color::A)
        } else {
            self.root.as_ref().map(|r| Color::Noise(r.color))
        }
    }

    /// The tree with its A-chain stripped: `τ̂` in `τ = [τ̂]_A^q`.
    pub fn without_a_chain(&self) -> Tree {
        Tree { a_height: 0, root: self.root.clone() }
    }

    /// Largest noise color used anywhere in the tree (0 for trees without nodes).
    pub fn max_color(&self) -> u32 {
        match &self.root {
            None => 0,
            Some(r) => r
                .children
                .iter()
                .map(Tree::max_color)
                .fold(r.color, u32::max),
        }
    }

    /// Largest A-chain length anywhere in the tree.
    pub fn max_a_height(&self) -> u32 {
        let below = self.children().iter().map(Tree::max_a_height).max().unwrap_or(0);
        below.max(self.a_height)
    }

    /// Order ρ(τ): one per A-node and per drift node, one half per Wiener node.
    pub fn rho(&self) -> HalfInt {
        let base = match &self.root {
            None => HalfInt::ZERO,
            Some(r) => {
                let own = if r.color == 0 { HalfInt::ONE } else { HalfInt::HALF };
                own + r.children.iter().map(Tree::rho).sum()
            }
        };
        base + HalfInt::from_int(self.a_height as i64)
    }

    /// Symmetry coefficient α(τ) = ∏ α(τ_k) / ∏ r_i!, where r_i count equal subtrees.
    pub fn alpha(&self) -> Rational {
        let Some(r) = &self.root else {
            return Rational::one();
        };
        let mut numer = Rational::one();
        for c in &r.children {
            numer *= c.alpha();
        }
        let mut denom = BigInt::one();
        let mut run = 1u64;
        for w in r.children.windows(2) {
            if w[0] == w[1] {
                run += 1;
                denom *= BigInt::from(run);
            } else {
                run = 1;
            }
        }
        numer / Rational::from_integer(denom)
    }

    /// Deterministic key; equal keys iff isomorphic trees. Lexicographic byte
    /// order on keys is the canonical total order among trees of equal order.
    pub fn canonical_key(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_key(&mut out);
        out
    }

    fn write_key(&self, out: &mut Vec<u8>) {
        match &self.root {
            None => out.extend_from_slice(&0u32.to_be_bytes()),
            Some(r) => out.extend_from_slice(&(r.color + 1).to_be_bytes()),
        }
        out.extend_from_slice(&self.a_height.to_be_bytes());
        let kids = self.children();
        out.extend_from_slice(&(kids.len() as u32).to_be_bytes());
        for c in kids {
            c.write_key(out);
        }
    }

    /// Human-readable elementary differential `F(τ)(x0)`.
    pub fn elementary_differential_text(&self) -> String {
        match &self.root {
            None => match self.a_height {
                0 => "x0".to_string(),
                q => format!("{} x0", a_prefix(q)),
            },
            Some(_) => {
                let inner = self.without_a_chain().ed_inner();
                match self.a_height {
                    0 => format!("{inner}(x0)"),
                    q => format!("{} {inner}(x0)", a_prefix(q)),
                }
            }
        }
    }

    fn ed_inner(&self) -> String {
        let body = match &self.root {
            None => return self.elementary_differential_text(),
            Some(r) => {
                let k = r.children.len();
                let name = format!("g_{}{}", r.color, derivative_marks(k));
                if k == 0 {
                    name
                } else {
                    let args: Vec<String> = r.children.iter().map(Tree::ed_inner).collect();
                    format!("{name}({})", args.join(", "))
                }
            }
        };
        match self.a_height {
            0 => body,
            q => format!("{} {body}", a_prefix(q)),
        }
    }
}

fn a_prefix(q: u32) -> String {
    if q == 1 {
        "A".to_string()
    } else {
        format!("A^{q}")
    }
}

fn derivative_marks(k: usize) -> String {
    if k <= 3 {
        "'".repeat(k)
    } else {
        format!("^({k})")
    }
}

/// Every non-empty tree with ρ(τ) ≤ `max_order` over colors `0..=noises` plus
/// A, each exactly once, sorted by `(ρ, canonical_key)`.
pub fn enumerate_trees(max_order: HalfInt, noises: u32) -> Vec<Tree> {
    let top = max_order.halves();
    if top < 1 {
        return Vec::new();
    }
    let top = top as usize;
    // by_order[n] holds the trees of order n/2, sorted by key.
    let mut by_order: Vec<Vec<Tree>> = vec![Vec::new(); top + 1];
    for n in 1..=top {
        let mut layer = Vec::new();
        if n == 2 {
            layer.push(Tree::a_power(1));
        } else if n > 2 {
            layer.extend(by_order[n - 2].iter().map(|t| t.clone().grafted(1)));
        }
        let pool: Vec<(usize, &Tree)> = (1..n)
            .flat_map(|k| by_order[k].iter().map(move |t| (k, t)))
            .collect();
        for color in 0..=noises {
            let cost = if color == 0 { 2 } else { 1 };
            if n < cost {
                continue;
            }
            let mut picked = Vec::new();
            multisets(&pool, 0, n - cost, &mut picked, &mut |kids| {
                layer.push(Tree {
                    a_height: 0,
                    root: Some(Root { color, children: kids.to_vec() }),
                });
            });
        }
        layer.sort_by_cached_key(Tree::canonical_key);
        by_order[n] = layer;
    }
    by_order.into_iter().flatten().collect()
}

/// Calls `emit` with every non-decreasing selection from `pool[start..]` whose
/// orders sum to `remaining`. Since `pool` is in canonical order, so is each
/// selection.
fn multisets<'a>(
    pool: &[(usize, &'a Tree)],
    start: usize,
    remaining: usize,
    picked: &mut Vec<Tree>,
    emit: &mut dyn FnMut(&[Tree]),
) {
    if remaining == 0 {
        emit(picked);
        return;
    }
    for idx in start..pool.len() {
        let (ord, t) = pool[idx];
        if ord > remaining {
            // pool is sorted by order
            break;
        }
        picked.push(t.clone());
        multisets(pool, idx, remaining - ord, picked, emit);
        picked.pop();
    }
}

impl fmt::Display for Tree {
    /// Bracket notation, e.g. `0[1, 1[0, A]]`; `A^q[τ]` is an A-chain over τ.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match &self.root {
            None => None,
            Some(r) => {
                let mut s = r.color.to_string();
                if !r.children.is_empty() {
                    let kids: Vec<String> = r.children.iter().map(|c| c.to_string()).collect();
                    s.push('[');
                    s.push_str(&kids.join(", "));
                    s.push(']');
                }
                Some(s)
            }
        };
        match (self.a_height, base) {
            (0, None) => write!(f, "()"),
            (0, Some(b)) => write!(f, "{b}"),
            (q, None) => write!(f, "{}", a_prefix(q)),
            (q, Some(b)) => write!(f, "{}[{b}]", a_prefix(q)),
        }
    }
}

impl FromStr for Tree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TreeParser { src: s.as_bytes(), pos: 0 };
        let t = p.tree()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

struct TreeParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl TreeParser<'_> {
    fn error(&self, msg: &str) -> TreeError {
        TreeError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<u32, TreeError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.error("number too large"))
    }

    fn tree(&mut self) -> Result<Tree, TreeError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(Tree::empty())
            }
            Some(b'A') => {
                self.pos += 1;
                let q = if self.eat(b'^') { self.number()? } else { 1 };
                if q == 0 {
                    return Err(self.error("A-power must be positive"));
                }
                if self.eat(b'[') {
                    let inner = self.tree()?;
                    if !self.eat(b']') {
                        return Err(self.error("A-nodes take exactly one subtree"));
                    }
                    Ok(inner.grafted(q))
                } else {
                    Ok(Tree::a_power(q))
                }
            }
            Some(b) if b.is_ascii_digit() => {
                let color = self.number()?;
                let mut kids = Vec::new();
                if self.eat(b'[') {
                    loop {
                        kids.push(self.tree()?);
                        if self.eat(b']') {
                            break;
                        }
                        if !self.eat(b',') {
                            return Err(self.error("expected ',' or ']'"));
                        }
                    }
                }
                Tree::node(color, kids).map_err(|e| match e {
                    TreeError::EmptyChild(_) => self.error(&e.to_string()),
                    other => other,
                })
            }
            Some(b'\xE2') if self.src[self.pos..].starts_with("∅".as_bytes()) => {
                self.pos += "∅".len();
                Ok(Tree::empty())
            }
            _ => Err(self.error("expected a tree")),
        }
    }
}
