//! Unrolling and derivative expansion of recursion formulas.
//!
//! Block symbols are constants with respect to the states, so the derivative
//! of an affine recursion is itself a path polynomial. [`Engine::derivative`]
//! runs the backward recurrence `f_L = 1`, `f_s = sum f_i * C_{i,s}`;
//! [`Engine::derivative_bruteforce`] propagates forward from a free `X[j]`.
//! The two share nothing but the per-state coefficients.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::poly::{PathPolynomial, StateExpansion, Word};
use crate::spec::ArchitectureSpec;

pub const DEFAULT_DEPTH_CAP: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("depth {depth} exceeds the expansion cap {cap}")]
    Depth { depth: u32, cap: u32 },
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("derivative source X[{wrt}] is past the output X[{depth}]")]
    Wrt { wrt: u32, depth: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Engine {
    depth_cap: u32,
}

impl Default for Engine {
    fn default() -> Self {
        Engine {
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

impl Engine {
    pub fn new(depth_cap: u32) -> Self {
        Engine { depth_cap }
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    fn check_depth(&self, depth: u32) -> Result<(), ExpandError> {
        if depth == 0 {
            return Err(ExpandError::ZeroDepth);
        }
        if depth > self.depth_cap {
            return Err(ExpandError::Depth {
                depth,
                cap: self.depth_cap,
            });
        }
        Ok(())
    }

    fn check_query(&self, depth: u32, wrt: u32) -> Result<(), ExpandError> {
        self.check_depth(depth)?;
        if wrt > depth {
            return Err(ExpandError::Wrt { wrt, depth });
        }
        Ok(())
    }

    /// `X[depth]` over the free input `X[0]`, with every base case substituted.
    pub fn unroll(
        &self,
        spec: &ArchitectureSpec,
        depth: u32,
    ) -> Result<StateExpansion, ExpandError> {
        self.check_depth(depth)?;
        let x_l = forward(spec, depth, 0);
        let mut components = BTreeMap::new();
        if !x_l.is_zero() {
            components.insert(0, x_l);
        }
        Ok(StateExpansion { components })
    }

    /// `dX[depth]/dX[wrt]` by the backward recurrence.
    pub fn derivative(
        &self,
        spec: &ArchitectureSpec,
        depth: u32,
        wrt: u32,
    ) -> Result<PathPolynomial, ExpandError> {
        self.check_query(depth, wrt)?;
        let mut adjoint: Vec<PathPolynomial> = vec![PathPolynomial::zero(); depth as usize + 1];
        adjoint[depth as usize] = PathPolynomial::one();
        for i in (wrt + 1..=depth).rev() {
            let f_i = std::mem::take(&mut adjoint[i as usize]);
            if f_i.is_zero() {
                continue;
            }
            for (src, coeff) in spec.state_terms(i) {
                if src >= wrt {
                    adjoint[src as usize].add_assign(&f_i.mul(&coeff));
                }
            }
        }
        Ok(std::mem::take(&mut adjoint[wrt as usize]))
    }

    /// `dX[depth]/dX[wrt]` by forward substitution with `X[wrt]` held free and
    /// every earlier state held constant.
    pub fn derivative_bruteforce(
        &self,
        spec: &ArchitectureSpec,
        depth: u32,
        wrt: u32,
    ) -> Result<PathPolynomial, ExpandError> {
        self.check_query(depth, wrt)?;
        Ok(forward(spec, depth, wrt))
    }

    pub fn value_equivalence(
        &self,
        a: &ArchitectureSpec,
        b: &ArchitectureSpec,
        depth: u32,
    ) -> Result<bool, ExpandError> {
        Ok(self.unroll(a, depth)? == self.unroll(b, depth)?)
    }

    /// Term-level comparison of two unrolled specs as a report.
    pub fn equivalence_report(
        &self,
        a: &ArchitectureSpec,
        b: &ArchitectureSpec,
        depth: u32,
    ) -> Result<CheckReport, ExpandError> {
        let ua = self.unroll(a, depth)?.component(0);
        let ub = self.unroll(b, depth)?.component(0);
        let diff = ua.sub(&ub);
        let violations = diff
            .iter()
            .map(|(w, _)| Violation {
                length: w.len(),
                expected: Observed::Term(term_string(ua.coeff(w), w)),
                actual: Observed::Term(term_string(ub.coeff(w), w)),
            })
            .collect::<Vec<_>>();
        Ok(CheckReport {
            spec: format!("{} vs {}", a.name, b.name),
            depth,
            wrt: 0,
            check: "value-equivalence".into(),
            pass: violations.is_empty(),
            violations,
        })
    }

    /// `dX[m]/dX[m-2] == dX[m]/dX[m-1] * (1 + W[m-1]) - W[m-1]`.
    pub fn verify_chain_identity(
        &self,
        spec: &ArchitectureSpec,
        m: u32,
    ) -> Result<ChainIdentity, ExpandError> {
        if m < 2 {
            return Err(ExpandError::Wrt { wrt: 2, depth: m });
        }
        let lhs = self.derivative(spec, m, m - 2)?;
        let step = self.derivative(spec, m, m - 1)?;
        let w = PathPolynomial::block(m - 1);
        let rhs = step.mul(&PathPolynomial::one().add(&w)).sub(&w);
        Ok(ChainIdentity {
            m,
            holds: lhs == rhs,
            lhs,
            rhs,
        })
    }
}

/// `dX[depth]/dX[free]`: states below `free` are constants, `X[free]` is 1.
fn forward(spec: &ArchitectureSpec, depth: u32, free: u32) -> PathPolynomial {
    let mut states: Vec<PathPolynomial> = vec![PathPolynomial::zero(); depth as usize + 1];
    states[free as usize] = PathPolynomial::one();
    for i in free + 1..=depth {
        let mut acc = PathPolynomial::zero();
        for (src, coeff) in spec.state_terms(i) {
            let s = &states[src as usize];
            if !s.is_zero() {
                acc.add_assign(&coeff.mul(s));
            }
        }
        states[i as usize] = acc;
    }
    std::mem::take(&mut states[depth as usize])
}

fn term_string(coeff: i64, w: &Word) -> String {
    PathPolynomial::monomial(coeff, w.clone()).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainIdentity {
    pub m: u32,
    pub lhs: PathPolynomial,
    pub rhs: PathPolynomial,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    Binomial,
    SinglePath,
    Widest,
}

impl StructureKind {
    pub fn name(self) -> &'static str {
        match self {
            StructureKind::Binomial => "binomial",
            StructureKind::SinglePath => "single-path",
            StructureKind::Widest => "widest",
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StructureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binomial" => Ok(StructureKind::Binomial),
            "single-path" => Ok(StructureKind::SinglePath),
            "widest" => Ok(StructureKind::Widest),
            _ => Err(format!(
                "unknown check `{s}` (expected binomial, single-path or widest)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Observed {
    Count(u64),
    Term(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub length: usize,
    pub expected: Observed,
    pub actual: Observed,
}

/// Result of a structural or equivalence check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub spec: String,
    pub depth: u32,
    pub wrt: u32,
    pub check: String,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// `C(n, k)`; exact for every `n` the depth cap admits.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, t| acc * (n - t) / (t + 1))
}

/// Checks a derivative polynomial `dX[depth]/dX[wrt]` against one of the
/// path-structure laws, with `i = depth - wrt` blocks in between.
pub fn check_structure(
    spec_name: &str,
    poly: &PathPolynomial,
    kind: StructureKind,
    depth: u32,
    wrt: u32,
) -> CheckReport {
    let span = depth.saturating_sub(wrt) as usize;
    let census = poly.census();
    let count_at = |k: usize| census.get(&k).map_or(0, |e| e.count);
    let mut violations = Vec::new();
    // lengths past the span can never be legal paths
    for (&k, e) in census.range(span + 1..) {
        violations.push(Violation {
            length: k,
            expected: Observed::Count(0),
            actual: Observed::Count(e.count),
        });
    }
    for k in 0..=span {
        let actual = count_at(k);
        match kind {
            StructureKind::Binomial => {
                let expected = binomial(span as u64, k as u64);
                if actual != expected {
                    violations.push(Violation {
                        length: k,
                        expected: Observed::Count(expected),
                        actual: Observed::Count(actual),
                    });
                }
            }
            StructureKind::SinglePath => {
                if actual != 1 {
                    violations.push(Violation {
                        length: k,
                        expected: Observed::Count(1),
                        actual: Observed::Count(actual),
                    });
                }
            }
            StructureKind::Widest => {
                let widest = Word::new((0..k as u32).map(|t| depth - t).collect())
                    .expect("k <= depth - wrt keeps indices >= 1");
                let expected = Observed::Term(widest.to_string());
                let at_k: Vec<_> = poly.iter().filter(|(w, _)| w.len() == k).collect();
                match at_k.as_slice() {
                    [(w, _)] if **w == widest => {}
                    [(w, c)] => violations.push(Violation {
                        length: k,
                        expected,
                        actual: Observed::Term(term_string(*c, w)),
                    }),
                    many => violations.push(Violation {
                        length: k,
                        expected,
                        actual: Observed::Term(format!("{} terms", many.len())),
                    }),
                }
            }
        }
    }
    violations.sort_by_key(|v| v.length);
    CheckReport {
        spec: spec_name.to_string(),
        depth,
        wrt,
        check: kind.name().to_string(),
        pass: violations.is_empty(),
        violations,
    }
}
