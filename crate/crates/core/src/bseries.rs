//! B-series coefficients of the exact solution and of ν-stage stochastic
//! exponential integrators
//!
//! ```text
//! H_i     = e^{c_i h A} Y_n + Σ_m Σ_j Z_ij^(m)(A) g_m(H_j)
//! Y_{n+1} = e^{h A} Y_n     + Σ_m Σ_i z_i^(m)(A)  g_m(H_i)
//! ```
//!
//! where `Z_ij^(m)(A) = Σ_q Z_ij^(m,q) A^q` and likewise for `z`. All
//! coefficients are [`WordPoly`] values.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stochalg::{factorial, parse_expr, HPoly, Interp, StochError, WordPoly};
use crate::trees::Tree;
use crate::Rational;

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{field} index out of range ({detail})")]
    IndexOutOfRange { field: String, detail: String },
    #[error("duplicate entry {0}")]
    Duplicate(String),
    #[error("{field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: StochError,
    },
    #[error("{0}: coefficient does not vanish at h = 0")]
    NotVanishing(String),
    #[error("{field}: interpretation {got} does not match method interpretation {expected}")]
    InterpMismatch { field: String, expected: Interp, got: Interp },
    #[error("stage coefficient Z[{m},{q},{i},{j}] makes the method implicit (needs j < i)")]
    Implicit { m: u32, q: u32, i: usize, j: usize },
    #[error("tree needs A-power {q} but the coefficient series are truncated at {limit}")]
    TruncationExceeded { q: u32, limit: u32 },
}

/// Key of a stage coefficient `Z_ij^(m,q)`; stage indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StageKey {
    pub m: u32,
    pub q: u32,
    pub i: usize,
    pub j: usize,
}

/// Key of a weight coefficient `z_i^(m,q)`; stage index is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightKey {
    pub m: u32,
    pub q: u32,
    pub i: usize,
}

/// A method given by its power-series coefficients in `A`. Missing entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub nu: usize,
    pub noises: u32,
    pub c: Vec<Rational>,
    pub interp: Interp,
    pub stage: BTreeMap<StageKey, WordPoly>,
    pub weights: BTreeMap<WeightKey, WordPoly>,
    /// Highest `q` stored for every series; `None` means the maps are exact
    /// (absent entries are genuinely zero for all `q`).
    pub truncation: Option<u32>,
}

impl MethodSpec {
    pub fn validate(&self) -> Result<(), MethodError> {
        if self.nu == 0 {
            return Err(MethodError::Schema("nu must be at least 1".into()));
        }
        if self.c.len() != self.nu {
            return Err(MethodError::Schema(format!(
                "c has {} entries, expected nu = {}",
                self.c.len(),
                self.nu
            )));
        }
        for (k, p) in &self.stage {
            let field = format!("Z[{},{},{},{}]", k.m, k.q, k.i, k.j);
            if k.m > self.noises || k.i == 0 || k.j == 0 || k.i > self.nu || k.j > self.nu {
                return Err(MethodError::IndexOutOfRange {
                    field,
                    detail: format!("M = {}, nu = {}", self.noises, self.nu),
                });
            }
            if k.j >= k.i {
                return Err(MethodError::Implicit { m: k.m, q: k.q, i: k.i, j: k.j });
            }
            self.check_value(&field, p)?;
        }
        for (k, p) in &self.weights {
            let field = format!("z[{},{},{}]", k.m, k.q, k.i);
            if k.m > self.noises || k.i == 0 || k.i > self.nu {
                return Err(MethodError::IndexOutOfRange {
                    field,
                    detail: format!("M = {}, nu = {}", self.noises, self.nu),
                });
            }
            self.check_value(&field, p)?;
        }
        Ok(())
    }

    fn check_value(&self, field: &str, p: &WordPoly) -> Result<(), MethodError> {
        if p.interp() != self.interp {
            return Err(MethodError::InterpMismatch {
                field: field.to_string(),
                expected: self.interp,
                got: p.interp(),
            });
        }
        p.check_letters(self.noises)
            .map_err(|source| MethodError::Expr { field: field.to_string(), source })?;
        if !p.vanishes_at_zero() {
            return Err(MethodError::NotVanishing(field.to_string()));
        }
        Ok(())
    }

    /// The same method with its random coefficients rewritten under `target`.
    pub fn with_interp(&self, target: Interp) -> MethodSpec {
        if target == self.interp {
            return self.clone();
        }
        MethodSpec {
            interp: target,
            stage: self.stage.iter().map(|(k, p)| (*k, p.to_interp(target))).collect(),
            weights: self.weights.iter().map(|(k, p)| (*k, p.to_interp(target))).collect(),
            ..self.clone()
        }
    }

    pub fn renamed(mut self, name: &str) -> MethodSpec {
        self.name = name.to_string();
        self
    }

    pub fn stage_coeff(&self, m: u32, q: u32, i: usize, j: usize) -> Option<&WordPoly> {
        self.stage.get(&StageKey { m, q, i, j })
    }

    pub fn weight(&self, m: u32, q: u32, i: usize) -> Option<&WordPoly> {
        self.weights.get(&WeightKey { m, q, i })
    }

    /// Largest `q` present in any coefficient map.
    pub fn max_q(&self) -> u32 {
        let s = self.stage.keys().map(|k| k.q);
        let w = self.weights.keys().map(|k| k.q);
        s.chain(w).max().unwrap_or(0)
    }

    fn check_truncation(&self, q: u32) -> Result<(), MethodError> {
        match self.truncation {
            Some(limit) if q > limit => Err(MethodError::TruncationExceeded { q, limit }),
            _ => Ok(()),
        }
    }

    pub fn from_json(doc: &str) -> Result<MethodSpec, MethodError> {
        let raw: MethodDoc =
            serde_json::from_str(doc).map_err(|e| MethodError::Schema(e.to_string()))?;
        raw.into_spec()
    }

    pub fn to_json(&self) -> String {
        let doc = MethodDoc {
            name: self.name.clone(),
            nu: self.nu,
            noises: self.noises,
            c: self.c.iter().map(|c| c.to_string()).collect(),
            interpretation: self.interp,
            truncation: self.truncation,
            stage: self
                .stage
                .iter()
                .map(|(k, p)| StageRecord { m: k.m, q: k.q, i: k.i, j: k.j, expr: p.to_string() })
                .collect(),
            weights: self
                .weights
                .iter()
                .map(|(k, p)| WeightRecord { m: k.m, q: k.q, i: k.i, expr: p.to_string() })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("method documents serialize")
    }
}

/// Parses a method document (JSON) into a validated [`MethodSpec`].
pub fn parse_method(doc: &str) -> Result<MethodSpec, MethodError> {
    MethodSpec::from_json(doc)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MethodDoc {
    name: String,
    nu: usize,
    #[serde(rename = "M")]
    noises: u32,
    c: Vec<String>,
    interpretation: Interp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<u32>,
    #[serde(rename = "Z", default)]
    stage: Vec<StageRecord>,
    #[serde(rename = "z", default)]
    weights: Vec<WeightRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord {
    m: u32,
    q: u32,
    i: usize,
    j: usize,
    expr: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRecord {
    m: u32,
    q: u32,
    i: usize,
    expr: String,
}

impl MethodDoc {
    fn into_spec(self) -> Result<MethodSpec, MethodError> {
        let mut c = Vec::with_capacity(self.c.len());
        for (idx, s) in self.c.iter().enumerate() {
            let v = s
                .trim()
                .parse::<Rational>()
                .map_err(|_| MethodError::Schema(format!("c[{idx}]: {s:?} is not a rational number")))?;
            c.push(v);
        }
        let interp = self.interpretation;
        let expr = |field: &str, src: &str| {
            parse_expr(src, interp).map_err(|source| MethodError::Expr { field: field.to_string(), source })
        };
        let mut stage = BTreeMap::new();
        for r in &self.stage {
            let field = format!("Z[{},{},{},{}]", r.m, r.q, r.i, r.j);
            let p = expr(&field, &r.expr)?;
            if stage.insert(StageKey { m: r.m, q: r.q, i: r.i, j: r.j }, p).is_some() {
                return Err(MethodError::Duplicate(field));
            }
        }
        let mut weights = BTreeMap::new();
        for r in &self.weights {
            let field = format!("z[{},{},{}]", r.m, r.q, r.i);
            let p = expr(&field, &r.expr)?;
            if weights.insert(WeightKey { m: r.m, q: r.q, i: r.i }, p).is_some() {
                return Err(MethodError::Duplicate(field));
            }
        }
        stage.retain(|_, p: &mut WordPoly| !p.is_zero());
        weights.retain(|_, p: &mut WordPoly| !p.is_zero());
        let spec = MethodSpec {
            name: self.name,
            nu: self.nu,
            noises: self.noises,
            c,
            interp,
            stage,
            weights,
            truncation: self.truncation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The two-stage stochastic exponential time-differencing Runge–Kutta method
/// (SETDRK) for one Wiener process, with its coefficient series kept up to
/// `A^truncation`:
///
/// ```text
/// H_1 = Y_n,  H_2 = Y_n + √h g_1(H_1)
/// Y_{n+1} = e^{hA} Y_n + ∫ e^{(h-s)A} ds g_0(H_1) + ∫ e^{(h-s)A} ⋆dW_1 g_1(H_1)
///         + h^{-1/2} ∫ e^{(h-s)A} W_1(s) ⋆dW_1(s) (g_1(H_2) - g_1(H_1))
/// ```
pub fn builtin_setdrk(truncation: u32, interp: Interp) -> MethodSpec {
    let mut stage = BTreeMap::new();
    stage.insert(
        StageKey { m: 1, q: 0, i: 2, j: 1 },
        WordPoly::scalar(interp, HPoly::monomial(Rational::one(), 1)),
    );
    let inv_sqrt_h = HPoly::monomial(Rational::one(), -1);
    let mut weights = BTreeMap::new();
    for q in 0..=truncation {
        let zeros = vec![0u8; q as usize];
        let single: Vec<u8> = [&[1u8][..], &zeros].concat();
        let double: Vec<u8> = [&[1u8, 1][..], &zeros].concat();
        let i_single = WordPoly::word(interp, &single);
        let i_double = WordPoly::word(interp, &double).mul_hpoly(&inv_sqrt_h);
        weights.insert(
            WeightKey { m: 0, q, i: 1 },
            WordPoly::h_power_over_factorial(interp, q as usize + 1),
        );
        weights.insert(WeightKey { m: 1, q, i: 1 }, i_single.try_sub(&i_double).expect("same tag"));
        weights.insert(WeightKey { m: 1, q, i: 2 }, i_double);
    }
    MethodSpec {
        name: "setdrk".to_string(),
        nu: 2,
        noises: 1,
        c: vec![Rational::zero(), Rational::zero()],
        interp,
        stage,
        weights,
        truncation: Some(truncation),
    }
}

/// `Y_{n+1} = e^{hA} Y_n` with `noises` Wiener channels that are ignored.
pub fn trivial_method(noises: u32, interp: Interp) -> MethodSpec {
    MethodSpec {
        name: "trivial".to_string(),
        nu: 1,
        noises,
        c: vec![Rational::zero()],
        interp,
        stage: BTreeMap::new(),
        weights: BTreeMap::new(),
        truncation: None,
    }
}

/// Coefficients `φ(τ)` of the exact solution, memoized by canonical key.
pub struct ExactSeries {
    interp: Interp,
    memo: HashMap<Vec<u8>, WordPoly>,
}

impl ExactSeries {
    pub fn new(interp: Interp) -> Self {
        ExactSeries { interp, memo: HashMap::new() }
    }

    pub fn phi(&mut self, t: &Tree) -> WordPoly {
        let key = t.canonical_key();
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let q = t.a_height();
        let value = match t.base_color() {
            None => WordPoly::h_power_over_factorial(self.interp, q as usize),
            Some(m) => {
                let mut prod = WordPoly::one(self.interp);
                for child in t.children() {
                    prod = prod.product(&self.phi(child)).expect("same tag");
                }
                prod.append_letter(m as u8)
                    .and_then(|p| p.time_integrate(q))
                    .expect("exact coefficients only carry integral powers of h")
            }
        };
        self.memo.insert(key, value.clone());
        value
    }
}

/// `φ(τ)(h)` of the exact solution.
pub fn phi_exact(t: &Tree, interp: Interp) -> WordPoly {
    ExactSeries::new(interp).phi(t)
}

/// Coefficients `Φ_i(τ)` and `Φ(τ)` of a method, memoized per tree.
pub struct MethodSeries<'a> {
    spec: &'a MethodSpec,
    stage_memo: HashMap<(usize, Vec<u8>), WordPoly>,
    memo: HashMap<Vec<u8>, WordPoly>,
}

impl<'a> MethodSeries<'a> {
    pub fn new(spec: &'a MethodSpec) -> Self {
        MethodSeries { spec, stage_memo: HashMap::new(), memo: HashMap::new() }
    }

    fn a_power_value(&self, scale: &Rational, q: u32) -> WordPoly {
        // (scale · h)^q / q!
        let c = Pow::pow(scale, q) / Rational::from_integer(factorial(q as usize));
        WordPoly::scalar(self.spec.interp, HPoly::monomial(c, 2 * q as i64))
    }

    fn children_product(&mut self, j: usize, t: &Tree) -> Result<WordPoly, MethodError> {
        let mut prod = WordPoly::one(self.spec.interp);
        for child in t.children() {
            prod = prod.product(&self.stage(j, child)?).expect("same tag");
        }
        Ok(prod)
    }

    /// `Φ_i(τ)`, stage index `i` 1-based.
    pub fn stage(&mut self, i: usize, t: &Tree) -> Result<WordPoly, MethodError> {
        let key = (i, t.canonical_key());
        if let Some(v) = self.stage_memo.get(&key) {
            return Ok(v.clone());
        }
        let spec = self.spec;
        let q = t.a_height();
        let value = match t.base_color() {
            None => self.a_power_value(&spec.c[i - 1], q),
            Some(m) => {
                spec.check_truncation(q)?;
                let mut acc = WordPoly::zero(spec.interp);
                for j in 1..=spec.nu {
                    if let Some(zij) = spec.stage_coeff(m, q, i, j) {
                        let prod = self.children_product(j, t)?;
                        acc = acc.try_add(&zij.product(&prod).expect("same tag")).expect("same tag");
                    }
                }
                acc
            }
        };
        self.stage_memo.insert(key, value.clone());
        Ok(value)
    }

    /// `Φ(τ)` of the output `Y_{n+1}`.
    pub fn output(&mut self, t: &Tree) -> Result<WordPoly, MethodError> {
        let key = t.canonical_key();
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let spec = self.spec;
        let q = t.a_height();
        let value = match t.base_color() {
            None => self.a_power_value(&Rational::one(), q),
            Some(m) => {
                spec.check_truncation(q)?;
                let mut acc = WordPoly::zero(spec.interp);
                for i in 1..=spec.nu {
                    if let Some(zi) = spec.weight(m, q, i) {
                        let prod = self.children_product(i, t)?;
                        acc = acc.try_add(&zi.product(&prod).expect("same tag")).expect("same tag");
                    }
                }
                acc
            }
        };
        self.memo.insert(key, value.clone());
        Ok(value)
    }
}

/// `Φ_i(τ)` for one stage.
pub fn phi_stage(spec: &MethodSpec, i: usize, t: &Tree) -> Result<WordPoly, MethodError> {
    MethodSeries::new(spec).stage(i, t)
}

/// `Φ(τ)` of the numerical solution.
pub fn phi_method(spec: &MethodSpec, t: &Tree) -> Result<WordPoly, MethodError> {
    MethodSeries::new(spec).output(t)
}

/// Coefficients for a list of trees.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    pub trees: Vec<Tree>,
    values: HashMap<Vec<u8>, WordPoly>,
}

impl CoeffTable {
    pub fn exact(trees: &[Tree], interp: Interp) -> Self {
        let mut series = ExactSeries::new(interp);
        let values = trees.iter().map(|t| (t.canonical_key(), series.phi(t))).collect();
        CoeffTable { trees: trees.to_vec(), values }
    }

    pub fn method(spec: &MethodSpec, trees: &[Tree]) -> Result<Self, MethodError> {
        let mut series = MethodSeries::new(spec);
        let mut values = HashMap::new();
        for t in trees {
            values.insert(t.canonical_key(), series.output(t)?);
        }
        Ok(CoeffTable { trees: trees.to_vec(), values })
    }

    pub fn get(&self, t: &Tree) -> Option<&WordPoly> {
        self.values.get(&t.canonical_key())
    }
}
