//! Exact algebra of iterated stochastic integrals over one step `[0, h]`.
//!
//! A [`Word`] `(m_1, …, m_n)` denotes `I_(m_1…m_n) = ∫_0^h ∫_0^{s_1} … dW_{m_1}(s_n) … dW_{m_n}(s_1)`,
//! innermost integrator first; letter 0 stands for `dt`. A [`WordPoly`] is a
//! finite sum `Σ c_{w,k} h^{k/2} I_w` whose words are read either in the Itô
//! or in the Stratonovich sense.
//!
//! Representation is normalized eagerly:
//! - an all-zero word `0^n` is the scalar `h^n / n!` on the empty word;
//! - a word containing a nonzero letter carries only exponents `k <= 1`
//!   (`h^n I_w` with `n >= 1` is expanded into `n! · (0^n ⧢ w)`).
//!
//! With nonnegative exponents this is a canonical form, so equality checks
//! reduce to syntactic comparison after clearing negative powers of `h`.

mod expr;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grade::{HalfInt, Order};
use crate::Rational;

pub use expr::parse_expr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StochError {
    #[error("interpretation mismatch: {0} vs {1}")]
    InterpMismatch(Interp, Interp),
    #[error("expected a {expected} polynomial, got {got}")]
    WrongInterp { expected: Interp, got: Interp },
    #[error("cannot integrate h^({k}/2) against a running time variable; only nonnegative integer powers are allowed")]
    NonIntegralPower { k: i64 },
    #[error("letter {letter} out of range 0..={max}")]
    LetterOutOfRange { letter: u32, max: u32 },
    #[error("division by a non-monomial or zero expression")]
    BadDivisor,
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// How the words of a [`WordPoly`] are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Ito,
    Stratonovich,
}

impl fmt::Display for Interp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interp::Ito => "ito",
            Interp::Stratonovich => "stratonovich",
        })
    }
}

impl FromStr for Interp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ito" | "itô" => Ok(Interp::Ito),
            "stratonovich" | "strat" => Ok(Interp::Stratonovich),
            other => Err(format!("unknown interpretation {other:?} (expected ito or stratonovich)")),
        }
    }
}

/// Letters of an iterated integral, innermost first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: impl Into<Vec<u8>>) -> Self {
        Word(letters.into())
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&l| l == 0)
    }

    /// Scaling grade: `I_w` is of size `h^{grade}` (1 per zero, 1/2 per nonzero letter).
    pub fn grade(&self) -> HalfInt {
        HalfInt(self.0.iter().map(|&l| if l == 0 { 2 } else { 1 }).sum())
    }

    pub fn max_letter(&self) -> u8 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// `Σ_k c_k h^{k/2}` with exact rational coefficients; keys count powers of √h.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HPoly(BTreeMap<i64, Rational>);

impl HPoly {
    pub fn zero() -> Self {
        HPoly(BTreeMap::new())
    }

    pub fn one() -> Self {
        HPoly::monomial(Rational::one(), 0)
    }

    /// `c · h^{k/2}`.
    pub fn monomial(c: Rational, k: i64) -> Self {
        let mut p = HPoly::zero();
        p.add_term(k, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Rational)> {
        self.0.iter().map(|(k, c)| (*k, c))
    }

    pub fn coeff(&self, k: i64) -> Rational {
        self.0.get(&k).cloned().unwrap_or_else(Rational::zero)
    }

    fn add_term(&mut self, k: i64, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.0.entry(k).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.0.remove(&k);
        }
    }

    /// Smallest exponent (in powers of √h) with a nonzero coefficient.
    pub fn lowest_exponent(&self) -> Option<i64> {
        self.0.keys().next().copied()
    }

    /// Leading power of `h` as a half-integer order, `Infinite` for the zero polynomial.
    pub fn leading_order(&self) -> Order {
        match self.lowest_exponent() {
            None => Order::Infinite,
            Some(k) => Order::Finite(HalfInt(k)),
        }
    }

    pub fn eval(&self, h: f64) -> f64 {
        let sqrt_h = h.sqrt();
        self.0
            .iter()
            .map(|(k, c)| rational_to_f64(c) * sqrt_h.powi(*k as i32))
            .sum()
    }

    /// `Some((c, k))` when the polynomial is the single monomial `c h^{k/2}`.
    pub fn as_monomial(&self) -> Option<(Rational, i64)> {
        if self.0.len() == 1 {
            let (k, c) = self.0.iter().next().unwrap();
            Some((c.clone(), *k))
        } else {
            None
        }
    }
}

impl Add for &HPoly {
    type Output = HPoly;
    fn add(self, rhs: &HPoly) -> HPoly {
        let mut out = self.clone();
        for (k, c) in &rhs.0 {
            out.add_term(*k, c.clone());
        }
        out
    }
}

impl Neg for &HPoly {
    type Output = HPoly;
    fn neg(self) -> HPoly {
        HPoly(self.0.iter().map(|(k, c)| (*k, -c)).collect())
    }
}

impl Sub for &HPoly {
    type Output = HPoly;
    fn sub(self, rhs: &HPoly) -> HPoly {
        self + &(-rhs)
    }
}

impl Mul for &HPoly {
    type Output = HPoly;
    fn mul(self, rhs: &HPoly) -> HPoly {
        let mut out = HPoly::zero();
        for (k1, c1) in &self.0 {
            for (k2, c2) in &rhs.0 {
                out.add_term(k1 + k2, c1 * c2);
            }
        }
        out
    }
}

impl fmt::Display for HPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let poly = WordPoly::scalar(Interp::Ito, self.clone());
        expr::write_terms(f, &poly, "I")
    }
}

pub(crate) fn rational_to_f64(c: &Rational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn rat_int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

/// Shuffle (`contract == false`) or quasi-shuffle (`contract == true`) of two
/// raw words, as a multiset of raw words. Words are combined at their outer
/// (last) letters; equal nonzero outer letters contract into a single `0`.
fn word_product(u: &[u8], v: &[u8], contract: bool) -> BTreeMap<Vec<u8>, i64> {
    let mut out = BTreeMap::new();
    word_product_into(u, v, contract, &mut Vec::new(), &mut out);
    out
}

// Builds words from the outside in: `suffix` collects outer letters in reverse.
fn word_product_into(
    u: &[u8],
    v: &[u8],
    contract: bool,
    suffix: &mut Vec<u8>,
    out: &mut BTreeMap<Vec<u8>, i64>,
) {
    if u.is_empty() || v.is_empty() {
        let rest = if u.is_empty() { v } else { u };
        let mut w = rest.to_vec();
        w.extend(suffix.iter().rev());
        *out.entry(w).or_insert(0) += 1;
        return;
    }
    let (a, u0) = u.split_last().unwrap();
    let (b, v0) = v.split_last().unwrap();
    suffix.push(*a);
    word_product_into(u0, v, contract, suffix, out);
    suffix.pop();
    suffix.push(*b);
    word_product_into(u, v0, contract, suffix, out);
    suffix.pop();
    if contract && a == b && *a != 0 {
        suffix.push(0);
        word_product_into(u0, v0, contract, suffix, out);
        suffix.pop();
    }
}

/// Finite linear combination of iterated integrals with coefficients in `Q[h^{±1/2}]`.
#[derive(Clone, Debug)]
pub struct WordPoly {
    interp: Interp,
    terms: BTreeMap<Word, HPoly>,
}

impl WordPoly {
    pub fn zero(interp: Interp) -> Self {
        WordPoly { interp, terms: BTreeMap::new() }
    }

    pub fn one(interp: Interp) -> Self {
        WordPoly::scalar(interp, HPoly::one())
    }

    pub fn scalar(interp: Interp, p: HPoly) -> Self {
        let mut out = WordPoly::zero(interp);
        if !p.is_zero() {
            out.terms.insert(Word::empty(), p);
        }
        out
    }

    /// `h^n / n!`, the value of `n` nested time integrals.
    pub fn h_power_over_factorial(interp: Interp, n: usize) -> Self {
        WordPoly::scalar(
            interp,
            HPoly::monomial(Rational::new(BigInt::one(), factorial(n)), 2 * n as i64),
        )
    }

    /// The single iterated integral over `letters` (innermost first).
    pub fn word(interp: Interp, letters: &[u8]) -> Self {
        WordPoly::monomial(interp, Rational::one(), 0, letters)
    }

    /// `c · h^{k/2} · I_w`.
    pub fn monomial(interp: Interp, c: Rational, k: i64, letters: &[u8]) -> Self {
        let mut out = WordPoly::zero(interp);
        out.push_raw(letters.to_vec(), c, k);
        out
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &HPoly)> {
        self.terms.iter()
    }

    /// Nonempty words appearing in the polynomial.
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.terms.keys().filter(|w| !w.is_empty())
    }

    /// Coefficient of the empty word.
    pub fn scalar_part(&self) -> HPoly {
        self.terms.get(&Word::empty()).cloned().unwrap_or_default()
    }

    pub fn max_letter(&self) -> u8 {
        self.words().map(Word::max_letter).max().unwrap_or(0)
    }

    pub fn check_letters(&self, max: u32) -> Result<(), StochError> {
        match self.words().map(Word::max_letter).max() {
            Some(l) if l as u32 > max => Err(StochError::LetterOutOfRange { letter: l as u32, max }),
            _ => Ok(()),
        }
    }

    fn add_normalized(&mut self, w: Word, k: i64, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(w.clone()).or_default();
        slot.add_term(k, c);
        if slot.is_zero() {
            self.terms.remove(&w);
        }
    }

    /// Adds `c · h^{k/2} · I_raw`, bringing the term into normal form.
    fn push_raw(&mut self, raw: Vec<u8>, c: Rational, k: i64) {
        if c.is_zero() {
            return;
        }
        if raw.iter().all(|&l| l == 0) {
            let n = raw.len();
            let c = c / rat_int(factorial(n));
            self.add_normalized(Word::empty(), k + 2 * n as i64, c);
        } else if k >= 2 {
            let n = k.div_euclid(2) as usize;
            let rest = k - 2 * n as i64;
            let scale = rat_int(factorial(n));
            for (w, count) in word_product(&vec![0; n], &raw, false) {
                self.push_raw(w, &c * &scale * rat_int(count), rest);
            }
        } else {
            self.add_normalized(Word(raw), k, c);
        }
    }

    fn same_interp(&self, other: &WordPoly) -> Result<(), StochError> {
        if self.interp == other.interp {
            Ok(())
        } else {
            Err(StochError::InterpMismatch(self.interp, other.interp))
        }
    }

    pub fn try_add(&self, other: &WordPoly) -> Result<WordPoly, StochError> {
        self.same_interp(other)?;
        let mut out = self.clone();
        for (w, p) in &other.terms {
            for (k, c) in p.terms() {
                out.add_normalized(w.clone(), k, c.clone());
            }
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &WordPoly) -> Result<WordPoly, StochError> {
        self.try_add(&-other)
    }

    pub fn scale(&self, c: &Rational) -> WordPoly {
        let mut out = WordPoly::zero(self.interp);
        if c.is_zero() {
            return out;
        }
        for (w, p) in &self.terms {
            for (k, v) in p.terms() {
                out.add_normalized(w.clone(), k, v * c);
            }
        }
        out
    }

    /// Multiplication by a polynomial in `√h` (the step size, not the running time).
    pub fn mul_hpoly(&self, p: &HPoly) -> WordPoly {
        let mut out = WordPoly::zero(self.interp);
        for (w, q) in &self.terms {
            for (k1, c1) in q.terms() {
                for (k2, c2) in p.terms() {
                    out.push_raw(w.0.clone(), c1 * c2, k1 + k2);
                }
            }
        }
        out
    }

    /// Product of two polynomials: shuffle for Stratonovich, quasi-shuffle for Itô.
    pub fn product(&self, other: &WordPoly) -> Result<WordPoly, StochError> {
        self.same_interp(other)?;
        let contract = self.interp == Interp::Ito;
        let mut out = WordPoly::zero(self.interp);
        for (w1, p1) in &self.terms {
            for (w2, p2) in &other.terms {
                let coeff = p1 * p2;
                if coeff.is_zero() {
                    continue;
                }
                for (w, count) in word_product(&w1.0, &w2.0, contract) {
                    let count = rat_int(count);
                    for (k, c) in coeff.terms() {
                        out.push_raw(w.clone(), c * &count, k);
                    }
                }
            }
        }
        Ok(out)
    }

    /// `∫_0^h p(s) ⋆ dW_m(s)`: the step size inside `p` becomes the running time.
    pub fn append_letter(&self, m: u8) -> Result<WordPoly, StochError> {
        let mut out = WordPoly::zero(self.interp);
        for (w, p) in &self.terms {
            for (k, c) in p.terms() {
                if k < 0 || k % 2 != 0 {
                    return Err(StochError::NonIntegralPower { k });
                }
                // s^n I_w(s) = n! (0^n ⧢ w)(s)
                let n = (k / 2) as usize;
                let scale = rat_int(factorial(n));
                for (mut raw, count) in word_product(&vec![0; n], &w.0, false) {
                    raw.push(m);
                    out.push_raw(raw, c * &scale * rat_int(count), 0);
                }
            }
        }
        Ok(out)
    }

    /// `∫_0^h (h-s)^q/q! ⋆ dX(s)` kernel: appends `q` zero letters.
    pub fn time_integrate(&self, q: u32) -> Result<WordPoly, StochError> {
        let mut out = self.clone();
        for _ in 0..q {
            out = out.append_letter(0)?;
        }
        Ok(out)
    }

    /// Rewrites a Stratonovich polynomial in terms of Itô integrals.
    pub fn strat_to_ito(&self) -> Result<WordPoly, StochError> {
        if self.interp != Interp::Stratonovich {
            return Err(StochError::WrongInterp { expected: Interp::Stratonovich, got: self.interp });
        }
        Ok(self.convert(Interp::Ito, Rational::new(BigInt::one(), BigInt::from(2))))
    }

    /// Rewrites an Itô polynomial in terms of Stratonovich integrals.
    pub fn ito_to_strat(&self) -> Result<WordPoly, StochError> {
        if self.interp != Interp::Ito {
            return Err(StochError::WrongInterp { expected: Interp::Ito, got: self.interp });
        }
        Ok(self.convert(Interp::Stratonovich, Rational::new(-BigInt::one(), BigInt::from(2))))
    }

    /// The same random variable expressed under `target`.
    pub fn to_interp(&self, target: Interp) -> WordPoly {
        match (self.interp, target) {
            (a, b) if a == b => self.clone(),
            (Interp::Stratonovich, _) => self.strat_to_ito().expect("tag checked"),
            (Interp::Ito, _) => self.ito_to_strat().expect("tag checked"),
        }
    }

    // X_{w a} = ∫ X_w ⋆ dW_a; switching readings adds ±½ d<X_w, W_a> = ±½ 1{last(w)=a≠0} X_{w⁻} dt.
    fn convert(&self, target: Interp, half: Rational) -> WordPoly {
        let mut memo: HashMap<Vec<u8>, WordPoly> = HashMap::new();
        let mut out = WordPoly::zero(target);
        for (w, p) in &self.terms {
            let converted = convert_word(&w.0, target, &half, &mut memo);
            out = out.try_add(&converted.mul_hpoly(p)).expect("same tag");
        }
        out
    }

    /// Exact mean in `√h`; only the scalar part of the Itô reading survives.
    pub fn expectation(&self) -> HPoly {
        self.to_interp(Interp::Ito).scalar_part()
    }

    /// `E[p^2]`, exact.
    pub fn second_moment(&self) -> HPoly {
        let ito = self.to_interp(Interp::Ito);
        ito.product(&ito).expect("same tag").expectation()
    }

    /// Exact L² order in `h`: half the leading exponent of `E[p^2]`.
    pub fn ms_leading_order(&self) -> Order {
        match self.second_moment().lowest_exponent() {
            None => Order::Infinite,
            Some(k) => {
                // E[p^2] leads with h^{k/2}; k is even because the leading part is a square.
                debug_assert!(k % 2 == 0, "odd leading exponent {k} in a second moment");
                Order::Finite(HalfInt(k.div_euclid(2)))
            }
        }
    }

    /// Leading exponent of `E[p]`.
    pub fn mean_leading_order(&self) -> Order {
        self.expectation().leading_order()
    }

    /// Numerical value given the step size and realized iterated integrals.
    pub fn eval(&self, h: f64, word_value: impl Fn(&Word) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(w, p)| {
                let c = p.eval(h);
                if w.is_empty() {
                    c
                } else {
                    c * word_value(w)
                }
            })
            .sum()
    }

    /// `true` when `p(h) = 0` for all `h > 0`. Negative powers are cleared by
    /// multiplying with a power of `h`, after which the normal form is canonical.
    pub fn is_zero_semantic(&self) -> bool {
        let min_k = self
            .terms
            .iter()
            .filter(|(w, _)| !w.is_empty())
            .filter_map(|(_, p)| p.lowest_exponent())
            .min();
        match min_k {
            None => self.is_zero(),
            Some(k) if k >= 0 => self.is_zero(),
            Some(k) => {
                let n = (-k + 1) / 2;
                self.mul_hpoly(&HPoly::monomial(Rational::one(), 2 * n)).is_zero()
            }
        }
    }

    /// Every term vanishes as `h → 0` in L²: `grade(w) + k/2 > 0`.
    pub fn vanishes_at_zero(&self) -> bool {
        self.terms.iter().all(|(w, p)| p.terms().all(|(k, _)| w.grade().halves() + k > 0))
    }
}

fn convert_word(
    w: &[u8],
    target: Interp,
    half: &Rational,
    memo: &mut HashMap<Vec<u8>, WordPoly>,
) -> WordPoly {
    if let Some(p) = memo.get(w) {
        return p.clone();
    }
    let result = match w.split_last() {
        None => WordPoly::one(target),
        Some((&a, prefix)) => {
            let inner = convert_word(prefix, target, half, memo);
            let mut p = inner.append_letter(a).expect("converted words carry integral powers");
            if a != 0 && prefix.last() == Some(&a) {
                let shorter = convert_word(&prefix[..prefix.len() - 1], target, half, memo);
                let corr = shorter.time_integrate(1).expect("integral powers").scale(half);
                p = p.try_add(&corr).expect("same tag");
            }
            p
        }
    };
    memo.insert(w.to_vec(), result.clone());
    result
}

impl PartialEq for WordPoly {
    fn eq(&self, other: &Self) -> bool {
        self.interp == other.interp
            && (self.terms == other.terms || self.try_sub(other).map(|d| d.is_zero_semantic()).unwrap_or(false))
    }
}

impl Eq for WordPoly {}

impl Neg for &WordPoly {
    type Output = WordPoly;
    fn neg(self) -> WordPoly {
        WordPoly {
            interp: self.interp,
            terms: self.terms.iter().map(|(w, p)| (w.clone(), -p)).collect(),
        }
    }
}

impl fmt::Display for WordPoly {
    /// `3/2 * h^(1/2) * I[1,1,0] - h`; Stratonovich words print as `J[...]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = match self.interp {
            Interp::Ito => "I",
            Interp::Stratonovich => "J",
        };
        expr::write_terms(f, self, sym)
    }
}

/// Sign-aware absolute value helper for display.
pub(crate) fn split_sign(c: &Rational) -> (bool, Rational) {
    (c.is_negative(), c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ITO: Interp = Interp::Ito;
    const STRAT: Interp = Interp::Stratonovich;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn w(interp: Interp, letters: &[u8]) -> WordPoly {
        WordPoly::word(interp, letters)
    }

    fn h_pow(interp: Interp, k: i64) -> WordPoly {
        WordPoly::scalar(interp, HPoly::monomial(Rational::one(), k))
    }

    fn sum(parts: &[WordPoly]) -> WordPoly {
        parts.iter().skip(1).fold(parts[0].clone(), |acc, p| acc.try_add(p).unwrap())
    }

    #[test]
    fn all_zero_words_collapse() {
        assert_eq!(w(ITO, &[0, 0, 0]), WordPoly::h_power_over_factorial(ITO, 3));
        assert_eq!(w(ITO, &[]), WordPoly::one(ITO));
        assert!(w(ITO, &[0, 0]).words().next().is_none());
    }

    #[test]
    fn append_letter_examples() {
        assert_eq!(WordPoly::one(ITO).append_letter(1).unwrap(), w(ITO, &[1]));
        assert_eq!(h_pow(ITO, 2).append_letter(1).unwrap(), w(ITO, &[0, 1]));
        assert!(WordPoly::zero(ITO).append_letter(2).unwrap().is_zero());
        assert_eq!(
            h_pow(ITO, 1).append_letter(1),
            Err(StochError::NonIntegralPower { k: 1 })
        );
    }

    #[test]
    fn time_integrate_examples() {
        assert_eq!(w(ITO, &[1]).time_integrate(1).unwrap(), w(ITO, &[1, 0]));
        assert_eq!(
            WordPoly::one(ITO).time_integrate(3).unwrap(),
            WordPoly::h_power_over_factorial(ITO, 3)
        );
        assert_eq!(w(ITO, &[1, 1]).time_integrate(1).unwrap(), w(ITO, &[1, 1, 0]));
    }

    #[test]
    fn convention_anchor() {
        // ∫_0^h (h - s) dW_1(s) = h I_(1) - I_(01) = I_(10)
        let lhs = w(ITO, &[1]).time_integrate(1).unwrap();
        let rhs = h_pow(ITO, 2).product(&w(ITO, &[1])).unwrap().try_sub(&w(ITO, &[0, 1])).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(rhs.to_string(), "I[1,0]");
    }

    #[test]
    fn product_examples() {
        let i1 = w(ITO, &[1]);
        assert_eq!(
            i1.product(&i1).unwrap(),
            w(ITO, &[1, 1]).scale(&r(2, 1)).try_add(&h_pow(ITO, 2)).unwrap()
        );
        let j1 = w(STRAT, &[1]);
        assert_eq!(j1.product(&j1).unwrap(), w(STRAT, &[1, 1]).scale(&r(2, 1)));
        assert_eq!(i1.product(&WordPoly::one(ITO)).unwrap(), i1);
        assert_eq!(
            i1.product(&h_pow(ITO, 2)).unwrap(),
            w(ITO, &[0, 1]).try_add(&w(ITO, &[1, 0])).unwrap()
        );
        assert!(i1.product(&j1).is_err());
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(
            w(STRAT, &[1, 1]).strat_to_ito().unwrap(),
            w(ITO, &[1, 1]).try_add(&h_pow(ITO, 2).scale(&r(1, 2))).unwrap()
        );
        assert_eq!(w(STRAT, &[1, 0]).strat_to_ito().unwrap(), w(ITO, &[1, 0]));
        assert_eq!(w(STRAT, &[1]).strat_to_ito().unwrap(), w(ITO, &[1]));
        assert!(w(ITO, &[1]).strat_to_ito().is_err());
        // round trip
        let p = w(STRAT, &[1, 1, 2, 2]).try_add(&w(STRAT, &[2, 1, 1])).unwrap();
        assert_eq!(p.strat_to_ito().unwrap().ito_to_strat().unwrap(), p);
    }

    #[test]
    fn expectation_examples() {
        assert!(w(ITO, &[1]).expectation().is_zero());
        assert_eq!(w(STRAT, &[1, 1]).expectation(), HPoly::monomial(r(1, 2), 2));
        assert_eq!(
            WordPoly::h_power_over_factorial(ITO, 2).expectation(),
            HPoly::monomial(r(1, 2), 4)
        );
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(w(ITO, &[1]).second_moment(), HPoly::monomial(r(1, 1), 2));
        assert!(WordPoly::zero(ITO).second_moment().is_zero());
        let scaled = w(ITO, &[1]).mul_hpoly(&HPoly::monomial(r(1, 1), 1));
        assert_eq!(scaled.second_moment(), HPoly::monomial(r(1, 1), 4));
        assert_eq!(w(ITO, &[1, 0]).second_moment(), HPoly::monomial(r(1, 3), 6));
    }

    #[test]
    fn ms_order_examples() {
        assert_eq!(w(ITO, &[1]).ms_leading_order(), Order::Finite(HalfInt(1)));
        assert_eq!(w(ITO, &[1, 0]).ms_leading_order(), Order::Finite(HalfInt(3)));
        assert_eq!(WordPoly::zero(ITO).ms_leading_order(), Order::Infinite);
        // h^{-1/2} I_(11) has size h^{1/2}
        let p = w(ITO, &[1, 1]).mul_hpoly(&HPoly::monomial(r(1, 1), -1));
        assert_eq!(p.ms_leading_order(), Order::Finite(HalfInt(1)));
    }

    #[test]
    fn semantic_zero_with_negative_powers() {
        // h^{-1} (I_(01) + I_(10)) - I_(1) = 0
        let p = sum(&[w(ITO, &[0, 1]), w(ITO, &[1, 0])]).mul_hpoly(&HPoly::monomial(r(1, 1), -2));
        assert_eq!(p, w(ITO, &[1]));
        assert!(!p.try_sub(&w(ITO, &[1])).unwrap().is_zero());
        assert!(p.try_sub(&w(ITO, &[1])).unwrap().is_zero_semantic());
    }

    #[test]
    fn vanishing_at_zero() {
        let z = w(ITO, &[1]).try_sub(&w(ITO, &[1, 1]).mul_hpoly(&HPoly::monomial(r(1, 1), -1))).unwrap();
        assert!(z.vanishes_at_zero());
        assert!(!WordPoly::one(ITO).vanishes_at_zero());
        assert!(!w(ITO, &[1]).mul_hpoly(&HPoly::monomial(r(1, 1), -1)).vanishes_at_zero());
    }
}
