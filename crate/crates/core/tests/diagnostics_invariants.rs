use cavity::diagnostics::{
    cavity_consistency, factorization_statistic, local_census, nonreconstruction_statistic, over_graph_seeds,
};
use cavity::random::{preset_ising, preset_ksat, sample_factor_graph};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn statistics_are_non_negative(seed in any::<u64>(), n in 2usize..=10, ell in 0usize..=3) {
        let g = sample_factor_graph(&preset_ksat(3, 1.0, 1.2).unwrap(), n, seed).unwrap();
        prop_assert!(factorization_statistic(&g, 2, 10, seed).unwrap().statistic >= 0.0);
        prop_assert!(nonreconstruction_statistic(&g, 0, ell, 20, seed).unwrap().statistic >= 0.0);
        prop_assert!(cavity_consistency(&g).unwrap().statistic >= 0.0);
    }

    #[test]
    fn census_counts_every_variable_once(seed in any::<u64>(), n in 1usize..=200, ell in 0usize..=3) {
        let g = sample_factor_graph(&preset_ising(0.5, 1.0).unwrap(), n, seed).unwrap();
        let c = local_census(&g, ell).unwrap();
        prop_assert_eq!(c.counts.values().sum::<usize>(), n);
        prop_assert!((c.frequencies().values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cavity_formula_is_exact_on_forests(seed in any::<u64>(), n in 2usize..=11) {
        let g = sample_factor_graph(&preset_ksat(3, 1.3, 0.4).unwrap(), n, seed).unwrap();
        prop_assume!(g.is_forest());
        prop_assert!(cavity_consistency(&g).unwrap().statistic < 1e-10);
    }

    #[test]
    fn zero_coupling_factorizes(seed in any::<u64>(), n in 2usize..=9, k in 1usize..=3) {
        let g = sample_factor_graph(&preset_ising(0.0, 1.5).unwrap(), n, seed).unwrap();
        prop_assume!(k <= n);
        prop_assert!(factorization_statistic(&g, k, 10, seed).unwrap().statistic < 1e-12);
    }
}

#[test]
fn nonreconstruction_decreases_with_depth_on_average() {
    let spec = preset_ising(0.3, 0.8).unwrap();
    let runs: Vec<_> = (1..=3)
        .map(|ell| over_graph_seeds(&spec, 12, 60, 5, |g, s| nonreconstruction_statistic(g, 0, ell, 100, s)).unwrap())
        .collect();
    for w in runs.windows(2) {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        assert!(w[1].statistic <= w[0].statistic + 3.0 * se, "{} then {}", w[0].statistic, w[1].statistic);
    }
}
