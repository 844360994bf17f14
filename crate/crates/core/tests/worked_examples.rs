//! The two standard examples of the cut metric: the uniform cube against the
//! constant-½ step function, and the two-block mixture against its two-atom limit.

use cavity::bp::SimplexPoint;
use cavity::cut::{
    constant_measure, embed, empirical_uniform_cube, strong_cut_distance, strong_cut_distance_heuristic,
    two_block_limit, two_block_measure, weak_cut_distance, DistanceMode, EmbeddedMeasure, HeuristicOptions,
};
use cavity::model::{Assignment, DiscreteMeasure};
use cavity::regularity::{
    check_regularity, regularity_decomposition, step_bound, ConfigPartition, CoordinatePartition, DEFAULT_BUDGET,
};

fn halves(n: usize) -> CoordinatePartition {
    CoordinatePartition::new(vec![(0..n / 2).collect(), (n / 2..n).collect()], n).unwrap()
}

/// Configurations grouped by the mixture component that makes them more likely.
fn by_component(m: &DiscreteMeasure) -> ConfigPartition {
    let half = m.n() / 2;
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (i, (s, _)) in m.support().iter().enumerate() {
        let zeros = |xs: &[usize]| xs.iter().filter(|&&x| x == 0).count();
        if zeros(&s.0[..half]) >= zeros(&s.0[half..]) {
            first.push(i);
        } else {
            second.push(i);
        }
    }
    ConfigPartition::new(vec![first, second], m.len()).unwrap()
}

#[test]
fn uniform_cube_is_close_to_the_constant_half() {
    let half = SimplexPoint(vec![0.5, 0.5]);
    // the full cube is enumerable at small n, where exact mode applies
    for n in [2usize, 4, 6] {
        let cube = DiscreteMeasure::product_of(2, &vec![vec![0.5, 0.5]; n]).unwrap();
        let d = strong_cut_distance(&embed(&cube), &constant_measure(n, &half), DistanceMode::Exact).unwrap();
        assert!(d.value <= 2.0 / (n as f64).sqrt(), "n = {n}: {}", d.value);
    }
    // larger n use a 4096-atom empirical surrogate of the cube
    for n in [16usize, 64, 256] {
        let mu = embed(&empirical_uniform_cube(n, 4096, 7).unwrap());
        let d = strong_cut_distance_heuristic(&mu, &constant_measure(n, &half), &HeuristicOptions::default()).unwrap();
        assert!(d.value <= 2.0 / (n as f64).sqrt(), "n = {n}: {}", d.value);
        assert!(d.certificate.upper_bound >= d.value);
    }
}

#[test]
fn distinct_point_masses_on_one_cell_are_at_distance_one() {
    for q in 2..=4 {
        let a = embed(&DiscreteMeasure::point_mass(q, Assignment(vec![0])).unwrap());
        let b = embed(&DiscreteMeasure::point_mass(q, Assignment(vec![q - 1])).unwrap());
        assert!((strong_cut_distance(&a, &b, DistanceMode::Exact).unwrap().value - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_block_mixture_is_close_to_its_limit() {
    for n in [2usize, 4, 6] {
        let mu = embed(&two_block_measure(n).unwrap());
        let nu = two_block_limit(n).unwrap();
        let weak = weak_cut_distance(&mu, &nu, DistanceMode::Exact).unwrap().value;
        assert!(weak <= 2.0 / (n as f64).sqrt(), "n = {n}: {weak}");
        let heuristic = weak_cut_distance(&mu, &nu, DistanceMode::Heuristic).unwrap().value;
        assert!(heuristic >= weak - 1e-12);
    }
    // the distance shrinks with n
    let d = |n| weak_cut_distance(&embed(&two_block_measure(n).unwrap()), &two_block_limit(n).unwrap(), DistanceMode::Exact).unwrap().value;
    assert!(d(6) < d(4) && d(4) < d(2));
}

#[test]
fn two_block_limit_atoms_are_reflections() {
    let nu: EmbeddedMeasure = two_block_limit(6).unwrap();
    assert_eq!(nu.len(), 2);
    for x in 0..6 {
        assert_eq!(nu.step(0, x), nu.step(1, 5 - x));
    }
}

#[test]
fn two_block_mixture_regularity() {
    for n in [4usize, 6, 8] {
        let m = two_block_measure(n).unwrap();
        let trivial = check_regularity(&m, &CoordinatePartition::trivial(n), &ConfigPartition::trivial(m.len()), 0.05, DEFAULT_BUDGET, 0).unwrap();
        assert!(!trivial.regular && !trivial.witnesses.is_empty());

        // at these sizes single configurations still differ a lot from their
        // block average, so the split partitions fail REG3 and are not regular
        let split = check_regularity(&m, &halves(n), &by_component(&m), 0.1, DEFAULT_BUDGET, 0).unwrap();
        assert!(!split.regular);

        let d = regularity_decomposition(&m, 0.1, &CoordinatePartition::trivial(n), &ConfigPartition::trivial(m.len()), DEFAULT_BUDGET, 0).unwrap();
        assert!(d.report.regular);
        assert!(d.steps >= 1 && d.steps <= step_bound(0.1, 2));
        assert!(d.v.refines(&halves(n), n));
        assert!(d.s.refines(&by_component(&m), m.len()));
    }
}
