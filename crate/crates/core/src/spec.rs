//! Architecture specifications: one uniform recursion rule plus base cases.
//!
//! Every state `X[i]` is an affine combination of earlier states whose
//! coefficients are path polynomials in the block symbols. `X[0]` is always
//! the free network input.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::poly::{PathPolynomial, Word};

/// Where a rule term reads its state from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    /// `X[i - lag]`, `lag >= 1`.
    Lag(u32),
    /// A fixed state `X[j]` shared by every application of the rule.
    Absolute(u32),
}

impl Source {
    /// Absolute state index when the rule is applied at `i`.
    pub fn resolve(self, i: u32) -> u32 {
        match self {
            Source::Lag(l) => i - l,
            Source::Absolute(j) => j,
        }
    }
}

/// Product of block symbols given as offsets from the rule index:
/// offset `c` stands for `W[i - c]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RelativeWord(Vec<u32>);

impl RelativeWord {
    pub fn new(offsets: Vec<u32>) -> Self {
        RelativeWord(offsets)
    }

    pub fn offsets(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

// Same order as `Word` once instantiated: larger offset means smaller index.
impl Ord for RelativeWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for RelativeWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rule coefficient: an integer polynomial in relative block symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoefficientExpr {
    terms: BTreeMap<RelativeWord, i64>,
}

impl CoefficientExpr {
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, RelativeWord)>,
    {
        let mut out = CoefficientExpr::default();
        for (c, w) in terms {
            out.add_term(c, w);
        }
        out
    }

    pub fn add_term(&mut self, coeff: i64, word: RelativeWord) {
        if coeff == 0 {
            return;
        }
        let e = self.terms.entry(word.clone()).or_insert(0);
        *e += coeff;
        if *e == 0 {
            self.terms.remove(&word);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RelativeWord, i64)> + '_ {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn max_offset(&self) -> Option<u32> {
        self.terms.keys().flat_map(|w| w.0.iter().copied()).max()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(RelativeWord::len).max().unwrap_or(0)
    }

    /// Absolute coefficient polynomial at rule index `i`.
    /// Requires `i > max_offset()`.
    pub fn instantiate(&self, i: u32) -> PathPolynomial {
        PathPolynomial::from_terms(self.iter().map(|(w, c)| {
            let factors = w.0.iter().map(|&off| i - off).collect();
            (c, Word::new(factors).expect("rule offset exceeds index"))
        }))
    }
}

/// `X[var] = sum_t coeff_t * X[source_t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursionRule {
    pub var: String,
    pub terms: BTreeMap<Source, CoefficientExpr>,
}

impl RecursionRule {
    /// Smallest index at which every reference of the rule is in range:
    /// states `>= 0`, blocks `>= 1`, absolute sources strictly earlier.
    pub fn first_index(&self) -> u32 {
        self.terms
            .iter()
            .map(|(src, coeff)| {
                let by_source = match *src {
                    Source::Lag(l) => l,
                    Source::Absolute(j) => j + 1,
                };
                by_source.max(coeff.max_offset().map_or(1, |c| c + 1))
            })
            .max()
            .unwrap_or(1)
            .max(1)
    }

    pub fn max_lag(&self) -> u32 {
        self.terms
            .keys()
            .filter_map(|s| match s {
                Source::Lag(l) => Some(*l),
                Source::Absolute(_) => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// `X[index] = sum_s coeff_s * X[s]` with absolute indices, `s < index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseCase {
    pub index: u32,
    pub terms: BTreeMap<u32, PathPolynomial>,
}

/// A parsed and validated recursion formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub name: String,
    pub rule: RecursionRule,
    pub base_cases: BTreeMap<u32, BaseCase>,
}

/// Affine definition of one state: source state index to coefficient.
pub type StateTerms = BTreeMap<u32, PathPolynomial>;

impl ArchitectureSpec {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Coefficients of `X[i]`, `i >= 1`. Base cases take precedence over the
    /// rule. Lag and absolute sources landing on the same state are summed.
    pub fn state_terms(&self, i: u32) -> StateTerms {
        assert!(i >= 1, "X[0] is the free input");
        if let Some(base) = self.base_cases.get(&i) {
            return base.terms.clone();
        }
        assert!(
            i >= self.rule.first_index(),
            "X[{i}] is below the rule's range and has no base case"
        );
        let mut out = StateTerms::new();
        for (src, coeff) in &self.rule.terms {
            let p = coeff.instantiate(i);
            let slot = out.entry(src.resolve(i)).or_default();
            slot.add_assign(&p);
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Canonical DSL text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let var = &self.rule.var;
        let terms: Vec<AffineText> = self
            .rule
            .terms
            .iter()
            .map(|(src, coeff)| {
                let state = match *src {
                    Source::Lag(l) => format!("X[{var}-{l}]"),
                    Source::Absolute(j) => format!("X[{j}]"),
                };
                let monos = coeff
                    .iter()
                    .map(|(w, c)| {
                        let factors = w
                            .offsets()
                            .iter()
                            .map(|&off| match off {
                                0 => format!("W[{var}]"),
                                o => format!("W[{var}-{o}]"),
                            })
                            .collect();
                        (c, factors)
                    })
                    .collect();
                (state, monos)
            })
            .collect();
        let _ = writeln!(out, "X[{var}] = {}", render_affine(&terms));
        for base in self.base_cases.values().rev() {
            let terms: Vec<_> = base
                .terms
                .iter()
                .rev()
                .map(|(s, p)| {
                    let monos = p
                        .iter()
                        .map(|(w, c)| (c, w.factors().iter().map(|i| format!("W[{i}]")).collect()))
                        .collect();
                    (format!("X[{s}]"), monos)
                })
                .collect();
            let _ = writeln!(out, "X[{}] = {}", base.index, render_affine(&terms));
        }
        out.push_str("X[0] = input\n");
        out
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A state reference with its coefficient monomials `(coeff, factor names)`.
type AffineText = (String, Vec<(i64, Vec<String>)>);

fn render_monomial(mag: u64, factors: &[String]) -> String {
    match (factors.is_empty(), mag) {
        (true, m) => m.to_string(),
        (false, 1) => factors.join("*"),
        (false, m) => format!("{m}*{}", factors.join("*")),
    }
}

fn render_affine(terms: &[AffineText]) -> String {
    let mut out = String::new();
    for (n, (state, monos)) in terms.iter().enumerate() {
        if let [(c, factors)] = monos.as_slice() {
            let neg = *c < 0;
            match (n, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let mag = c.unsigned_abs();
            if factors.is_empty() && mag == 1 {
                out.push_str(state);
            } else {
                let _ = write!(out, "{}*{state}", render_monomial(mag, factors));
            }
            continue;
        }
        if n > 0 {
            out.push_str(" + ");
        }
        out.push('(');
        for (m, (c, factors)) in monos.iter().enumerate() {
            match (m, *c < 0) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            out.push_str(&render_monomial(c.unsigned_abs(), factors));
        }
        let _ = write!(out, ")*{state}");
    }
    out
}
