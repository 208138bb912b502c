mod common;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_spec, SpecShape};
use recur_core::graph::{build_graph, GraphError};
use recur_core::numeric::{
    eval_polynomial, instantiate, jacobian_exact, relative_error, Activation,
};
use recur_core::parser::parse_named;
use recur_core::poly::{PathPolynomial, Word};
use recur_core::stats::{friedman, rank, AccuracyTable, StatsError};
use recur_core::{Builtin, Engine};

fn poly_strategy() -> impl Strategy<Value = PathPolynomial> {
    prop::collection::vec((-3i64..=3, prop::collection::vec(1u32..=4, 0..=3)), 0..6).prop_map(
        |terms| {
            PathPolynomial::from_terms(terms.into_iter().map(|(c, f)| (c, Word::new(f).unwrap())))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn addition_is_commutative_and_associative(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
    }

    #[test]
    fn multiplication_is_associative_and_distributive(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.add(&b).mul(&c), a.mul(&c).add(&b.mul(&c)));
    }

    #[test]
    fn product_degree_adds(a in poly_strategy(), b in poly_strategy()) {
        let p = a.mul(&b);
        if let (Some(da), Some(db)) = (a.degree(), b.degree()) {
            // a nonzero product of integer polynomials keeps its top words
            prop_assert_eq!(p.census().keys().max().copied(), Some(da + db));
        } else {
            prop_assert!(p.is_zero());
        }
    }

    #[test]
    fn normalization_is_idempotent(a in poly_strategy()) {
        let again = PathPolynomial::from_terms(a.iter().map(|(w, c)| (c, w.clone())));
        prop_assert_eq!(&again, &a);
        prop_assert!(a.iter().all(|(_, c)| c != 0));
    }

    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, SpecShape::default());
        let text = spec.render();
        let back = parse_named(&spec.name, &text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn backward_derivative_matches_forward_oracle(seed in any::<u64>(), depth in 1u32..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, SpecShape::default());
        let engine = Engine::default();
        for wrt in 0..=depth {
            prop_assert_eq!(
                engine.derivative(&spec, depth, wrt).unwrap(),
                engine.derivative_bruteforce(&spec, depth, wrt).unwrap()
            );
        }
    }

    #[test]
    fn symbolic_derivative_matches_numeric_jacobian(seed in any::<u64>(), depth in 1u32..=5, dim in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, SpecShape { max_coeff: 1, ..SpecShape::default() });
        let net = instantiate(&spec, depth, dim, seed, Activation::None).unwrap();
        let engine = Engine::default();
        for wrt in 0..=depth {
            let p = engine.derivative(&spec, depth, wrt).unwrap();
            let err = relative_error(&eval_polynomial(&p, &net).unwrap(), &jacobian_exact(&net, wrt).unwrap());
            prop_assert!(err <= 1e-10, "j={} err={}", wrt, err);
        }
    }

    #[test]
    fn graph_wiring_reproduces_the_recursion(seed in any::<u64>(), depth in 1u32..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, SpecShape { max_degree: 1, ..SpecShape::default() });
        match build_graph(&spec, depth) {
            Ok(g) => {
                g.validate().unwrap();
                let rec = g.recover_states().unwrap();
                for i in 1..=depth {
                    prop_assert_eq!(&rec[&i], &spec.state_terms(i));
                }
            }
            Err(GraphError::Unrealizable { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn reversed_factor_order_breaks_the_jacobian() {
    let engine = Engine::default();
    for b in [Builtin::ResNet, Builtin::NewArch, Builtin::AppendixEx2] {
        let spec = b.spec();
        let p = engine.derivative(&spec, 4, 0).unwrap();
        let reversed = PathPolynomial::from_terms(p.iter().map(|(w, c)| {
            let mut f = w.factors().to_vec();
            f.reverse();
            (c, Word::new(f).unwrap())
        }));
        for seed in 0..20 {
            let net = instantiate(&spec, 4, 3, seed, Activation::None).unwrap();
            let exact = jacobian_exact(&net, 0).unwrap();
            assert!(relative_error(&eval_polynomial(&p, &net).unwrap(), &exact) <= 1e-10);
            assert!(
                relative_error(&eval_polynomial(&reversed, &net).unwrap(), &exact) > 1e-6,
                "{b} seed {seed}"
            );
        }
    }
}

// Ranking and the Friedman statistic recomputed with exact rationals:
// rank = 1 + #better + (#tied - 1)/2, no sorting involved.
fn exact_tau(values: &[Vec<i64>]) -> (Ratio<i128>, Option<Ratio<i128>>) {
    let k = values.len() as i128;
    let n = values[0].len() as i128;
    let mut sums = vec![Ratio::from_integer(0i128); values.len()];
    for d in 0..values[0].len() {
        for (m, row) in values.iter().enumerate() {
            let better = values.iter().filter(|r| r[d] > row[d]).count() as i128;
            let tied = values.iter().filter(|r| r[d] == row[d]).count() as i128;
            sums[m] += Ratio::from_integer(1 + better) + Ratio::new(tied - 1, 2);
        }
    }
    let sum_sq: Ratio<i128> = sums.iter().map(|s| (s / n) * (s / n)).sum();
    let tau_chi2 =
        Ratio::new(12 * n, k * (k + 1)) * (sum_sq - Ratio::new(k * (k + 1) * (k + 1), 4));
    let denom = Ratio::from_integer(n * (k - 1)) - tau_chi2;
    let tau_f =
        (denom != Ratio::from_integer(0)).then(|| Ratio::from_integer(n - 1) * tau_chi2 / denom);
    (tau_chi2, tau_f)
}

fn to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn table_strategy() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (2usize..=6, 1usize..=5)
        .prop_flat_map(|(k, n)| prop::collection::vec(prop::collection::vec(0i64..5, n), k))
}

fn as_table(values: &[Vec<i64>]) -> AccuracyTable {
    AccuracyTable::new(
        (0..values.len()).map(|m| format!("m{m}")).collect(),
        (0..values[0].len()).map(|d| format!("d{d}")).collect(),
        values
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn friedman_matches_exact_rational_oracle(values in table_strategy()) {
        let (tau_chi2, tau_f) = exact_tau(&values);
        let got = friedman(&rank(&as_table(&values)));
        match (got, tau_f) {
            (Ok(f), Some(tau_f)) => {
                prop_assert!((f.tau_chi2 - to_f64(tau_chi2)).abs() <= 1e-12 * to_f64(tau_chi2).abs().max(1.0));
                prop_assert!((f.tau_f - to_f64(tau_f)).abs() <= 1e-12 * to_f64(tau_f).abs().max(1.0));
            }
            (Err(StatsError::Degenerate { .. }), None) => {}
            (other, expected) => prop_assert!(false, "{:?} vs exact tau_F {:?}", other, expected),
        }
    }

    #[test]
    fn rank_columns_sum_to_triangular(values in table_strategy()) {
        let r = rank(&as_table(&values));
        let k = values.len() as f64;
        for d in 0..values[0].len() {
            let s: f64 = r.ranks.iter().map(|row| row[d]).sum();
            prop_assert_eq!(s, k * (k + 1.0) / 2.0);
        }
    }

    #[test]
    fn raising_accuracy_never_worsens_rank(values in table_strategy(), m in 0usize..6, d in 0usize..5, bump in 1i64..4) {
        let m = m % values.len();
        let d = d % values[0].len();
        let before = rank(&as_table(&values)).mean_ranks[m];
        let mut raised = values.clone();
        raised[m][d] += bump;
        let after = rank(&as_table(&raised)).mean_ranks[m];
        prop_assert!(after <= before);
    }

    #[test]
    fn permuting_methods_permutes_ranks(values in table_strategy(), rot in 0usize..6) {
        let k = values.len();
        let rot = rot % k;
        let mut permuted = values.clone();
        permuted.rotate_left(rot);
        let a = rank(&as_table(&values));
        let b = rank(&as_table(&permuted));
        for m in 0..k {
            prop_assert_eq!(&b.ranks[m], &a.ranks[(m + rot) % k]);
        }
        match (friedman(&a), friedman(&b)) {
            (Ok(fa), Ok(fb)) => prop_assert!((fa.tau_chi2 - fb.tau_chi2).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }
}
