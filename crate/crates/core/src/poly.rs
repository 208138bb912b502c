//! Noncommutative path polynomials over block symbols.
//!
//! A [`PathPolynomial`] is an integer combination of words in the block
//! symbols `W[1]`, `W[2]`, ... Each word is one propagation path. Words are
//! stored with the leftmost factor being the block applied last (closest to
//! the output), which is the order the matrix chain rule produces.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// A block mapping symbol `W[i]`, `i >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockSymbol(u32);

impl BlockSymbol {
    pub fn new(index: u32) -> Option<Self> {
        (index >= 1).then_some(BlockSymbol(index))
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for BlockSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W[{}]", self.0)
    }
}

/// An ordered product of block symbols. The empty word is the identity `1`.
///
/// Ordering is the canonical rendering order: shorter words first, and among
/// words of equal length, lexicographically larger factor sequences first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from block indices. Returns `None` if any index is 0.
    pub fn new(factors: Vec<u32>) -> Option<Self> {
        factors.iter().all(|&i| i >= 1).then_some(Word(factors))
    }

    pub fn single(index: u32) -> Option<Self> {
        Word::new(vec![index])
    }

    pub fn factors(&self) -> &[u32] {
        &self.0
    }

    // the empty word is the identity, hence `is_identity` rather than `is_empty`
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation; `self` is the later stage.
    pub fn concat(&self, right: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + right.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&right.0);
        Word(v)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.0.iter().copied().max()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str("*")?;
            }
            write!(f, "W[{i}]")?;
        }
        Ok(())
    }
}

/// One signed term `coeff * word`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathTerm {
    pub coeff: i64,
    pub word: Word,
}

impl PathTerm {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.word.len()
    }
}

/// Normalized integer combination of words. Zero coefficients are never
/// stored, so structural equality is polynomial equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PathPolynomial {
    terms: BTreeMap<Word, i64>,
}

impl PathPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(1, Word::identity())
    }

    /// `W[index]`. Panics if `index == 0`.
    pub fn block(index: u32) -> Self {
        let word = Word::single(index).expect("block index must be >= 1");
        Self::monomial(1, word)
    }

    pub fn monomial(coeff: i64, word: Word) -> Self {
        let mut p = Self::zero();
        p.add_term(coeff, word);
        p
    }

    /// Builds a polynomial from raw `(coeff, word)` pairs, collecting like terms.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, Word)>,
    {
        let mut p = Self::zero();
        for (c, w) in terms {
            p.add_term(c, w);
        }
        p
    }

    /// Adds `coeff * word` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, coeff: i64, word: Word) {
        if coeff == 0 {
            return;
        }
        match self.terms.entry(word) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if *e.get() == 0 {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&Word::identity()) == Some(&1)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, word: &Word) -> i64 {
        self.terms.get(word).copied().unwrap_or(0)
    }

    /// Terms in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&Word, i64)> + '_ {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn terms(&self) -> Vec<PathTerm> {
        self.iter()
            .map(|(w, c)| PathTerm {
                coeff: c,
                word: w.clone(),
            })
            .collect()
    }

    /// Longest word length, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::len).max()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.terms.keys().filter_map(Word::max_index).max()
    }

    pub fn add(&self, other: &PathPolynomial) -> PathPolynomial {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &PathPolynomial) {
        for (w, c) in other.iter() {
            self.add_term(c, w.clone());
        }
    }

    pub fn neg(&self) -> PathPolynomial {
        self.scale(-1)
    }

    pub fn sub(&self, other: &PathPolynomial) -> PathPolynomial {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: i64) -> PathPolynomial {
        if k == 0 {
            return Self::zero();
        }
        PathPolynomial {
            terms: self
                .terms
                .iter()
                .map(|(w, &c)| (w.clone(), c * k))
                .collect(),
        }
    }

    /// Noncommutative product: words of `self` precede words of `right`, so
    /// `self` is the later (deeper) stage.
    pub fn mul(&self, right: &PathPolynomial) -> PathPolynomial {
        let mut out = Self::zero();
        for (wa, ca) in self.iter() {
            for (wb, cb) in right.iter() {
                out.add_term(ca * cb, wa.concat(wb));
            }
        }
        out
    }

    /// Rewrites every factor index through `f`.
    pub fn map_indices<F>(&self, mut f: F) -> PathPolynomial
    where
        F: FnMut(u32) -> u32,
    {
        PathPolynomial::from_terms(self.iter().map(|(w, c)| {
            let factors = w.factors().iter().map(|&i| f(i)).collect();
            (c, Word::new(factors).expect("mapped index must stay >= 1"))
        }))
    }

    /// Path histogram keyed by word length.
    pub fn census(&self) -> BTreeMap<usize, CensusEntry> {
        let mut out: BTreeMap<usize, CensusEntry> = BTreeMap::new();
        for (w, c) in self.iter() {
            let e = out.entry(w.len()).or_default();
            e.count += 1;
            e.weight += c.unsigned_abs();
        }
        out
    }
}

/// `X_L = sum_j P_j * X_j` over the free input states `X_j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateExpansion {
    pub components: BTreeMap<u32, PathPolynomial>,
}

impl StateExpansion {
    pub fn component(&self, state: u32) -> PathPolynomial {
        self.components.get(&state).cloned().unwrap_or_default()
    }
}

/// Number of distinct paths of one length, and their total `|coeff|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CensusEntry {
    pub count: u64,
    pub weight: u64,
}

impl fmt::Display for PathPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, (w, c)) in self.iter().enumerate() {
            let mag = c.unsigned_abs();
            match (n, c < 0) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if w.is_identity() {
                write!(f, "{mag}")?;
            } else if mag == 1 {
                write!(f, "{w}")?;
            } else {
                write!(f, "{mag}*{w}")?;
            }
        }
        Ok(())
    }
}
