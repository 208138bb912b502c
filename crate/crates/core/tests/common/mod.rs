#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use recur_core::poly::{PathPolynomial, Word};
use recur_core::spec::{
    ArchitectureSpec, BaseCase, CoefficientExpr, RecursionRule, RelativeWord, Source,
};

/// Options for [`random_spec`].
#[derive(Clone, Copy)]
pub struct SpecShape {
    pub max_lag: u32,
    pub max_offset: u32,
    pub max_degree: usize,
    pub max_coeff: i64,
    /// Allow `X[0]` as an absolute source in the rule.
    pub absolute: bool,
}

impl Default for SpecShape {
    fn default() -> Self {
        SpecShape {
            max_lag: 3,
            max_offset: 2,
            max_degree: 2,
            max_coeff: 2,
            absolute: true,
        }
    }
}

fn nonzero<R: Rng>(rng: &mut R, max: i64) -> i64 {
    let mag = rng.random_range(1..=max);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// A random valid affine spec: one rule with 1 to 3 state terms and base
/// cases for every index below the rule's first index.
pub fn random_spec<R: Rng>(rng: &mut R, shape: SpecShape) -> ArchitectureSpec {
    loop {
        let mut terms: BTreeMap<Source, CoefficientExpr> = BTreeMap::new();
        for _ in 0..rng.random_range(1..=3) {
            let src = if shape.absolute && rng.random_bool(0.15) {
                Source::Absolute(0)
            } else {
                Source::Lag(rng.random_range(1..=shape.max_lag))
            };
            let mut coeff = CoefficientExpr::default();
            for _ in 0..rng.random_range(1..=3) {
                let len = rng.random_range(0..=shape.max_degree);
                let offsets = (0..len)
                    .map(|_| rng.random_range(0..=shape.max_offset))
                    .collect();
                coeff.add_term(nonzero(rng, shape.max_coeff), RelativeWord::new(offsets));
            }
            let slot = terms.entry(src).or_default();
            for (w, c) in coeff.iter() {
                slot.add_term(c, w.clone());
            }
        }
        terms.retain(|_, c| !c.is_zero());
        if terms.is_empty() {
            continue;
        }
        let rule = RecursionRule {
            var: "i".into(),
            terms,
        };
        let mut base_cases = BTreeMap::new();
        for j in 1..rule.first_index() {
            let mut bterms: BTreeMap<u32, PathPolynomial> = BTreeMap::new();
            for _ in 0..rng.random_range(1..=2) {
                let src = rng.random_range(0..j);
                let len = rng.random_range(0..=shape.max_degree.min(1));
                let factors = (0..len).map(|_| rng.random_range(1..=j)).collect();
                bterms
                    .entry(src)
                    .or_default()
                    .add_term(nonzero(rng, shape.max_coeff), Word::new(factors).unwrap());
            }
            bterms.retain(|_, p| !p.is_zero());
            if bterms.is_empty() {
                bterms.insert(j - 1, PathPolynomial::one());
            }
            base_cases.insert(
                j,
                BaseCase {
                    index: j,
                    terms: bterms,
                },
            );
        }
        return ArchitectureSpec {
            name: "random".into(),
            rule,
            base_cases,
        };
    }
}
