mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use opdyn::analysis::{
    classify_p_dependence, degroot_verdict, fj_stability_and_final, french_social_power, influence_centrality,
    pagerank, prejudiced_from_gamma, prejudiced_from_lambda, taylor_stability_and_final, PageRankMode,
};
use opdyn::dynamics::{FjModel, TaylorModel};
use opdyn::graph::DiGraph;
use opdyn::matrix::{laplacian_of, matrix_exponential, NonnegativeMatrix, StochasticMatrix};

fn stoch(w: DMatrix<f64>) -> StochasticMatrix {
    StochasticMatrix::new(w).unwrap()
}

/// Susceptibilities: each agent fully susceptible with probability 1/2,
/// otherwise anchored with lambda in [0, 0.95).
fn susceptibilities(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![Just(1.0), 0.0f64..0.95], n)
}

fn with_lambda(max_n: usize) -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    common::stochastic(max_n, false).prop_flat_map(|w| {
        let n = w.nrows();
        (Just(w), susceptibilities(n))
    })
}

fn with_gamma(max_n: usize) -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    common::nonnegative(max_n, true).prop_flat_map(|a| {
        let n = a.nrows();
        (Just(a), proptest::collection::vec(prop_oneof![2 => Just(0.0), 1 => 0.2f64..2.0], n))
    })
}

fn stochastic_within(m: &DMatrix<f64>, tol: f64) -> bool {
    m.iter().all(|&v| v >= -tol) && m.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn verdict_matches_power_sequence(
        w in prop_oneof![common::stochastic(8, false), common::stochastic(8, true)]
    ) {
        let v = degroot_verdict(&stoch(w.clone()));
        // W^(2^k) for growing k; convergence is Cauchy convergence of the powers
        let p = common::repeated_square(&w, 40);
        let next = &p * &w;
        let convergent = (&next - &p).amax() < 1e-9;
        let first = p.row(0).into_owned();
        let consensus = convergent && p.row_iter().all(|r| (r - &first).amax() < 1e-7);
        prop_assert_eq!(v.convergent, convergent);
        prop_assert_eq!(v.consensus, consensus);
    }
}

proptest! {
    #[test]
    fn positive_diagonal_converges(w in common::stochastic(10, false)) {
        let n = w.nrows();
        let mut w = w;
        for i in 0..n {
            w[(i, i)] += 0.1;
        }
        let w = common::normalize_rows(w);
        prop_assert!(degroot_verdict(&stoch(w)).convergent);
    }

    #[test]
    fn fj_stability_iff_all_dependent((w, lambda) in with_lambda(8)) {
        let n = w.nrows();
        let g = DiGraph::from_matrix(&w).unwrap();
        let verdict = classify_p_dependence(&g, &prejudiced_from_lambda(&lambda)).all_dependent();
        let lw = DMatrix::from_fn(n, n, |i, j| lambda[i] * w[(i, j)]);
        let spectral = common::inf_norm(&common::repeated_square(&lw, 40)) < 0.5;
        prop_assert_eq!(verdict, spectral);
        if verdict {
            let v = fj_stability_and_final(&FjModel::scalar(stoch(w), lambda, &vec![0.0; n]).unwrap(), None)
                .unwrap()
                .control
                .unwrap();
            prop_assert!(stochastic_within(&v, 1e-9));
        }
    }

    #[test]
    fn taylor_stability_iff_all_dependent((a, gamma) in with_gamma(8)) {
        let n = a.nrows();
        let a = NonnegativeMatrix::new(a).unwrap();
        let g = DiGraph::from_matrix(a.as_matrix()).unwrap();
        let verdict = classify_p_dependence(&g, &prejudiced_from_gamma(&gamma)).all_dependent();
        let mut gen = laplacian_of(&a).as_matrix().clone();
        for i in 0..n {
            gen[(i, i)] += gamma[i];
        }
        let e = matrix_exponential(&(-gen), 1.0).unwrap();
        let spectral = common::inf_norm(&common::repeated_square(&e, 40)) < 0.5;
        prop_assert_eq!(verdict, spectral);
        let model = TaylorModel::new(a, gamma, DMatrix::zeros(n, 1)).unwrap();
        let out = taylor_stability_and_final(&model, None).unwrap();
        prop_assert_eq!(out.stable, verdict);
        if let Some(m) = out.mixing {
            prop_assert!(stochastic_within(&m, 1e-9));
        }
    }

    #[test]
    fn pagerank_is_influence_centrality(w in common::stochastic(10, false), m in 0.05f64..0.95) {
        let n = w.nrows();
        let w = stoch(w);
        let pr = pagerank(&w, m, PageRankMode::ClosedForm).unwrap();
        let ic = influence_centrality(&w, &vec![1.0 - m; n]).unwrap();
        for (a, b) in pr.values.iter().zip(&ic.values) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert!((pr.values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(pr.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn influence_approaches_social_power(w in common::stochastic(8, false)) {
        let n = w.nrows();
        let w = stoch(w);
        prop_assume!(degroot_verdict(&w).consensus);
        let p = french_social_power(&w).unwrap().values;
        let gaps: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&alpha| {
                let c = influence_centrality(&w, &vec![alpha; n]).unwrap().values;
                c.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum()
            })
            .collect();
        prop_assert!(gaps[1] <= gaps[0] + 1e-12 && gaps[2] <= gaps[1] + 1e-12, "{gaps:?}");
    }

    #[test]
    fn final_opinions_scale_with_prejudices(
        (w, lambda) in with_lambda(8),
        u in proptest::collection::vec(-1.0f64..1.0, 8),
        scale in 0.1f64..10.0,
    ) {
        let n = w.nrows();
        let u = &u[..n];
        let w = stoch(w);
        let g = DiGraph::from_matrix(w.as_matrix()).unwrap();
        prop_assume!(classify_p_dependence(&g, &prejudiced_from_lambda(&lambda)).all_dependent());
        let scaled: Vec<f64> = u.iter().map(|v| v * scale).collect();
        let base = fj_stability_and_final(&FjModel::scalar(w.clone(), lambda.clone(), u).unwrap(), None).unwrap();
        let big = fj_stability_and_final(&FjModel::scalar(w.clone(), lambda.clone(), &scaled).unwrap(), None).unwrap();
        let (x, y) = (base.final_opinions.unwrap(), big.final_opinions.unwrap());
        prop_assert!((x * scale - y).amax() <= 1e-12 * scale.max(1.0) * 10.0);
        prop_assert_eq!(base.stable, big.stable);
        prop_assert_eq!(base.control, big.control);
        let c = influence_centrality(&w, &lambda).unwrap();
        prop_assert!((c.values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
