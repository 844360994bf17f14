use cavity::bp::{bp_run, tv, BpConfig};
use cavity::exact::{gibbs_marginal, partition_function, GibbsTable};
use cavity::model::FactorGraph;
use cavity::random::{preset_ising, preset_ksat, sample_factor_graph};
use cavity::tree::{canonical_code, neighborhood, sample_gw_tree, Neighborhood};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gibbs_table_is_a_probability(seed in any::<u64>(), n in 1usize..=10, beta in -1.5f64..1.5) {
        let g = sample_factor_graph(&preset_ising(beta, 0.8).unwrap(), n, seed).unwrap();
        let t = GibbsTable::new(&g).unwrap();
        prop_assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for m in t.all_marginals() {
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!((partition_function(&g).unwrap().log_z - t.log_z).abs() < 1e-12);
    }

    #[test]
    fn bp_is_exact_on_random_forests(seed in any::<u64>(), n in 2usize..=12) {
        let g = sample_factor_graph(&preset_ksat(2, 1.5, 0.6).unwrap(), n, seed).unwrap();
        prop_assume!(g.is_forest());
        let bp = bp_run(&g, &BpConfig { tol: 1e-14, ..Default::default() }).unwrap();
        prop_assert!(bp.converged);
        for (x, m) in bp.marginals.iter().enumerate() {
            prop_assert!(tv(&m.0, &gibbs_marginal(&g, &[x]).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn graphs_round_trip_through_json(seed in any::<u64>(), n in 1usize..=30) {
        let g = sample_factor_graph(&preset_ksat(3, 0.7, 1.5).unwrap(), n, seed).unwrap();
        let back = FactorGraph::from_json(&g.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn tree_neighbourhoods_recover_the_tree(seed in any::<u64>(), ell in 0usize..=3) {
        // the depth-ℓ ball around the root of a depth-ℓ tree is the tree itself
        let spec = preset_ising(0.3, 0.6).unwrap();
        let t = sample_gw_tree(&spec, ell, seed);
        prop_assume!(t.variable_count() <= 200);
        let g = t.to_factor_graph(&spec.alphabet, &spec.weight_functions()).unwrap();
        match neighborhood(&g, 0, ell).unwrap() {
            Neighborhood::Tree(u) => prop_assert_eq!(canonical_code(&u), canonical_code(&t)),
            Neighborhood::Cyclic => prop_assert!(false, "a tree has no cycles"),
        }
    }
}
