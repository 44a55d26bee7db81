//! Brownian paths on a fine grid and their iterated integrals.
//!
//! Iterated integrals are read off the signature of the piecewise-linear
//! interpolation of the path, accumulated cell by cell with Chen's identity.
//! Over one linear cell with increments `x_0 = dt, x_m = ΔW_m` the signature
//! of a word `w` is `∏ x_{w_i} / |w|!`, so
//!
//! ```text
//! S_w ← S_w + Σ_{j=1}^{|w|} S_{w[..|w|-j]} · ∏_{i>|w|-j} x_{w_i} / j!
//! ```
//!
//! This is the Stratonovich reading. Itô integrals are obtained by rewriting
//! them exactly in Stratonovich words first. The words `(m)` and `(m, m)` are
//! overwritten by their closed forms in the coarse increment.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::NumError;
use crate::stochalg::{Interp, Word, WordPoly};

/// Longest word the sampler accepts. Six letters cover `I_(1,1,0,0,0,0)`,
/// which the built-in method needs for four powers of `A`.
pub const DEFAULT_MAX_WORD_LEN: usize = 6;

/// Fine cells per coarse step used when nothing else is requested.
pub const DEFAULT_N_SUB: usize = 64;

const INV_FACT: [f64; 17] = {
    let mut out = [1.0; 17];
    let mut i = 1;
    while i < 17 {
        out[i] = out[i - 1] / i as f64;
        i += 1;
    }
    out
};

/// Independent `N(0, dt)` increments for each noise on a uniform fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    noises: usize,
    inc: Vec<f64>,
}

impl BrownianPath {
    /// Draws `cells` fine cells from the ChaCha stream `stream` of `seed`.
    /// Each path owns its stream, so paths can be generated in any order.
    pub fn sample(seed: u64, stream: u64, noises: usize, cells: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let sd = dt.sqrt();
        let inc = (0..cells * noises)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        BrownianPath { dt, noises, inc }
    }

    /// Cell-major increments: `inc[cell * noises + m - 1]`.
    pub fn from_increments(dt: f64, noises: usize, inc: Vec<f64>) -> Self {
        assert!(noises == 0 || inc.len() % noises == 0, "increment count not a multiple of noises");
        BrownianPath { dt, noises, inc }
    }

    /// A path without noise, `cells` cells long.
    pub fn deterministic(dt: f64, cells: usize) -> Self {
        BrownianPath { dt, noises: 0, inc: vec![0.0; cells] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn noises(&self) -> usize {
        self.noises
    }

    pub fn cells(&self) -> usize {
        if self.noises == 0 {
            self.inc.len()
        } else {
            self.inc.len() / self.noises
        }
    }

    /// `ΔW_m` over fine cell `cell`; `m` is 1-based.
    pub fn increment(&self, cell: usize, m: usize) -> f64 {
        self.inc[cell * self.noises + m - 1]
    }

    /// `W_m(cells · dt)` for each noise, summed left to right.
    pub fn w_at(&self, cells: usize) -> Vec<f64> {
        (1..=self.noises).map(|m| self.total(0, cells, m)).collect()
    }

    /// Sum of the increments of noise `m` over `[first, first + n)`.
    pub fn total(&self, first: usize, n: usize, m: usize) -> f64 {
        (first..first + n).map(|c| self.increment(c, m)).sum()
    }

    /// The path on a grid `factor` times coarser: increments are sums of
    /// consecutive fine increments.
    pub fn coarsened(&self, factor: usize) -> BrownianPath {
        let cells = self.cells() / factor;
        let mut inc = Vec::with_capacity(cells * self.noises);
        for c in 0..cells {
            for m in 1..=self.noises {
                inc.push(self.total(c * factor, factor, m));
            }
        }
        BrownianPath { dt: self.dt * factor as f64, noises: self.noises, inc }
    }
}

/// A path seen through coarse steps of `n_sub` fine cells each.
#[derive(Debug, Clone, Copy)]
pub struct BrownianGrid<'a> {
    pub path: &'a BrownianPath,
    pub n_sub: usize,
}

impl<'a> BrownianGrid<'a> {
    pub fn new(path: &'a BrownianPath, n_sub: usize) -> Result<Self, NumError> {
        if n_sub == 0 {
            return Err(NumError::Grid("n_sub must be positive".into()));
        }
        Ok(BrownianGrid { path, n_sub })
    }

    pub fn h(&self) -> f64 {
        self.path.dt * self.n_sub as f64
    }

    pub fn steps(&self) -> usize {
        self.path.cells() / self.n_sub
    }
}

/// Words whose signature values are accumulated together, closed under
/// prefixes.
#[derive(Debug, Clone)]
pub struct WordTable {
    max_len: usize,
    words: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    // index of the prefix of each length 1..len-1; slot 0 stands for the empty word
    prefixes: Vec<Vec<usize>>,
    // longest words first, so prefixes still hold their previous values
    order: Vec<usize>,
}

impl WordTable {
    pub fn new(max_len: usize) -> Self {
        WordTable { max_len, words: Vec::new(), index: HashMap::new(), prefixes: Vec::new(), order: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index of `w` (nonempty), inserting it and its prefixes as needed.
    pub fn insert(&mut self, w: &[u8]) -> Result<usize, NumError> {
        assert!(!w.is_empty(), "the empty word has no slot");
        if w.len() > self.max_len {
            return Err(NumError::WordTooLong { len: w.len(), max: self.max_len });
        }
        if let Some(&i) = self.index.get(w) {
            return Ok(i);
        }
        let mut prefixes = vec![usize::MAX];
        for l in 1..w.len() {
            prefixes.push(self.insert(&w[..l])?);
        }
        let i = self.words.len();
        self.words.push(w.to_vec());
        self.index.insert(w.to_vec(), i);
        self.prefixes.push(prefixes);
        self.order.push(i);
        let words = &self.words;
        self.order.sort_by_key(|&k| std::cmp::Reverse(words[k].len()));
        Ok(i)
    }

    pub fn index_of(&self, w: &[u8]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Stratonovich values of every word over fine cells
    /// `[first, first + n_cells)`, accumulating `group` cells per linear piece.
    pub fn sample(&self, path: &BrownianPath, first: usize, n_cells: usize, group: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.words.len(), 0.0);
        let mut x = vec![0.0; path.noises + 1];
        let mut c = first;
        let end = first + n_cells;
        while c < end {
            let span = group.min(end - c);
            x[0] = path.dt * span as f64;
            for (m, xm) in x.iter_mut().enumerate().skip(1) {
                *xm = path.total(c, span, m);
            }
            for &k in &self.order {
                let w = &self.words[k];
                let n = w.len();
                let mut prod = 1.0;
                let mut delta = 0.0;
                for j in 1..=n {
                    prod *= x[w[n - j] as usize];
                    let base = if j == n { 1.0 } else { out[self.prefixes[k][n - j]] };
                    delta += base * prod * INV_FACT[j];
                }
                out[k] += delta;
            }
            c += span;
        }
        let h = path.dt * n_cells as f64;
        for (k, w) in self.words.iter().enumerate() {
            match w.as_slice() {
                [0] => out[k] = h,
                [m] => out[k] = path.total(first, n_cells, *m as usize),
                [0, 0] => out[k] = h * h / 2.0,
                [a, b] if a == b => {
                    let d = path.total(first, n_cells, *a as usize);
                    out[k] = d * d / 2.0;
                }
                _ => {}
            }
        }
    }
}

/// A word polynomial rewritten in Stratonovich words and evaluated at a
/// fixed step size: `Σ c_w J_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl CompiledPoly {
    pub fn new(poly: &WordPoly, h: f64, table: &mut WordTable) -> Result<Self, NumError> {
        let strat = poly.to_interp(Interp::Stratonovich);
        let mut constant = 0.0;
        let mut terms = Vec::new();
        for (w, p) in strat.terms() {
            let c = p.eval(h);
            if w.is_empty() {
                constant += c;
            } else if c != 0.0 {
                terms.push((table.insert(w.letters())?, c));
            }
        }
        if !constant.is_finite() || terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(NumError::NonFinite("coefficient polynomial"));
        }
        Ok(CompiledPoly { constant, terms })
    }

    /// `Some(c)` when the polynomial has no random part.
    pub fn as_constant(&self) -> Option<f64> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(k, c)| c * values[k]).sum::<f64>()
    }
}

/// `I_w` (or `J_w`) on every coarse step of `grid`.
pub fn sample_iterated(grid: &BrownianGrid<'_>, w: &Word, interp: Interp) -> Result<Vec<f64>, NumError> {
    sample_iterated_grouped(grid, w, interp, 1)
}

/// As [`sample_iterated`], with linear pieces spanning `group` fine cells.
pub fn sample_iterated_grouped(
    grid: &BrownianGrid<'_>,
    w: &Word,
    interp: Interp,
    group: usize,
) -> Result<Vec<f64>, NumError> {
    if w.len() > DEFAULT_MAX_WORD_LEN {
        return Err(NumError::WordTooLong { len: w.len(), max: DEFAULT_MAX_WORD_LEN });
    }
    if w.max_letter() as usize > grid.path.noises {
        return Err(NumError::Grid(format!("word {w} uses a noise the path does not have")));
    }
    let mut table = WordTable::new(DEFAULT_MAX_WORD_LEN);
    let poly = CompiledPoly::new(&WordPoly::word(interp, w.letters()), grid.h(), &mut table)?;
    let mut buf = Vec::new();
    Ok((0..grid.steps())
        .map(|s| {
            table.sample(grid.path, s * grid.n_sub, grid.n_sub, group.max(1), &mut buf);
            poly.eval(&buf)
        })
        .collect())
}
