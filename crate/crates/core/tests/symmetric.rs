use proptest::prelude::*;
use subslope::symmetric::{binomial, sigma, sigma_all, DhymBranch, OperatorSpec};

/// σ_k by brute force over all k-subsets.
fn sigma_brute(k: usize, lambda: &[f64]) -> f64 {
    let n = lambda.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| lambda[i]).product::<f64>())
        .sum()
}

fn vec_n(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sigma_matches_subset_sums(lambda in (1usize..=5).prop_flat_map(vec_n)) {
        for k in 0..=lambda.len() {
            let s = sigma(k, &lambda).unwrap();
            let b = sigma_brute(k, &lambda);
            prop_assert!((s - b).abs() <= 1e-12 * (1.0 + b.abs()) * binomial(lambda.len(), k));
        }
        prop_assert!(sigma(lambda.len() + 1, &lambda).is_err());
    }

    #[test]
    fn sigma_is_symmetric(lambda in vec_n(4), perm in Just([2usize, 0, 3, 1])) {
        let p: Vec<f64> = perm.iter().map(|&i| lambda[i]).collect();
        for (a, b) in sigma_all(&lambda).iter().zip(sigma_all(&p)) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn quotient_gradient_ordering(lambda in positive_vec(3)) {
        let op = OperatorSpec::quotient(3, 3, 1).unwrap();
        let mut l = lambda.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        let g = op.f_grad(&l).unwrap();
        prop_assert!(g.iter().all(|&x| x > 0.0));
        prop_assert!(g.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn quotient_is_midpoint_concave(a in positive_vec(3), b in positive_vec(3)) {
        for (k, l) in [(2, 1), (3, 1), (3, 0), (2, 0)] {
            let op = OperatorSpec::quotient(3, k, l).unwrap();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let lhs = op.f_eval(&mid).unwrap();
            let rhs = 0.5 * (op.f_eval(&a).unwrap() + op.f_eval(&b).unwrap());
            prop_assert!(lhs >= rhs - 1e-10, "q({k},{l}): {lhs} < {rhs}");
        }
    }

    #[test]
    fn cones_are_star_shaped(lambda in vec_n(3), t in 1.0f64..50.0) {
        for k in 1..=3 {
            let op = OperatorSpec::quotient(3, k, 0).unwrap();
            if op.cone.contains(&lambda) {
                let scaled: Vec<f64> = lambda.iter().map(|x| t * x).collect();
                prop_assert!(op.cone.contains(&scaled));
                // adding a positive vector stays inside
                let shifted: Vec<f64> = lambda.iter().map(|x| x + t).collect();
                prop_assert!(op.cone.contains(&shifted));
            }
        }
    }

    #[test]
    fn dhym_is_permutation_invariant(lambda in vec_n(3)) {
        let op = OperatorSpec::dhym(3, DhymBranch::Full).unwrap();
        let rev: Vec<f64> = lambda.iter().rev().copied().collect();
        prop_assert!((op.f_eval(&lambda).unwrap() - op.f_eval(&rev).unwrap()).abs() < 1e-14);
        prop_assert!((op.f_infinity(&lambda).unwrap() - op.f_infinity(&rev).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn f_infinity_dominates_f(lambda in positive_vec(3)) {
        for op in [OperatorSpec::quotient(3, 2, 1).unwrap(), OperatorSpec::dhym(3, DhymBranch::Full).unwrap()] {
            prop_assert!(op.f_infinity(&lambda).unwrap() > op.f_eval(&lambda).unwrap());
        }
    }
}
