mod common;

use cavity::cut::{
    sample_ah_array, strong_cut_distance, strong_cut_distance_heuristic, two_block_limit, weak_cut_distance,
    DistanceMode, HeuristicOptions,
};
use common::{lp_strong_distance, random_embedded};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn exact(mu: &cavity::cut::EmbeddedMeasure, nu: &cavity::cut::EmbeddedMeasure) -> f64 {
    strong_cut_distance(mu, nu, DistanceMode::Exact).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strong_distance_is_a_pseudometric(seed in any::<u64>(), n in 1usize..=4, a in 1usize..=3, b in 1usize..=3, c in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_embedded(&mut rng, n, 2, a, seed % 2 == 0);
        let nu = random_embedded(&mut rng, n, 2, b, seed % 3 == 0);
        let rho = random_embedded(&mut rng, n, 2, c, false);
        let (d_mn, d_nm) = (exact(&mu, &nu), exact(&nu, &mu));
        prop_assert!((d_mn - d_nm).abs() < TOL);
        prop_assert!(exact(&mu, &mu).abs() < TOL);
        prop_assert!((0.0..=1.0 + TOL).contains(&d_mn));
        prop_assert!(exact(&mu, &rho) <= d_mn + exact(&nu, &rho) + TOL);
    }

    #[test]
    fn exact_matches_the_full_lp(seed in any::<u64>(), n in 1usize..=5, a in 1usize..=3, b in 1usize..=3, q in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_embedded(&mut rng, n, q, a, seed % 2 == 1);
        let nu = random_embedded(&mut rng, n, q, b, false);
        prop_assert!((exact(&mu, &nu) - lp_strong_distance(&mu, &nu)).abs() < TOL);
    }

    #[test]
    fn weak_is_below_strong(seed in any::<u64>(), n in 1usize..=4, a in 1usize..=3, b in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_embedded(&mut rng, n, 2, a, true);
        let nu = random_embedded(&mut rng, n, 2, b, true);
        let weak = weak_cut_distance(&mu, &nu, DistanceMode::Exact).unwrap();
        prop_assert!(weak.certificate.all_permutations);
        prop_assert!(weak.value <= exact(&mu, &nu) + TOL);
        // a coordinate relabelling of the same measure is at weak distance 0
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1);
        let moved = mu.permuted(&perm).unwrap();
        prop_assert!(weak_cut_distance(&mu, &moved, DistanceMode::Exact).unwrap().value < TOL);
    }
}

#[test]
fn heuristic_is_an_upper_bound_and_usually_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut tight, total) = (0, 100);
    for k in 0..total {
        let n = 2 + k % 5;
        let mu = random_embedded(&mut rng, n, 2, 1 + k % 4, k % 2 == 0);
        let nu = random_embedded(&mut rng, n, 2, 1 + (k / 4) % 4, false);
        let e = exact(&mu, &nu);
        let opts = HeuristicOptions { seed: k as u64, ..Default::default() };
        let h = strong_cut_distance_heuristic(&mu, &nu, &opts).unwrap();
        assert!(h.value >= e - TOL, "instance {k}: heuristic {} below exact {e}", h.value);
        assert!(h.certificate.lower_bound <= e + TOL);
        if h.value - e < 1e-6 {
            tight += 1;
        }
    }
    assert!(tight * 10 >= total * 9, "only {tight}/{total} heuristic values match the exact distance");
}

#[test]
fn aldous_hoover_array_of_the_two_block_limit() {
    // rows share an atom, columns share a cell; P(A11 = A12 = 1) = E_σ[(∫σ(x)(1)dx)²] = 1/4
    let mu = two_block_limit(8).unwrap();
    let draws = 40_000;
    let (mut both, mut row_10, mut row_01) = (0usize, 0usize, 0usize);
    for s in 0..draws {
        let a = sample_ah_array(&mu, 2, s).unwrap();
        both += usize::from(a[0][0] == 1 && a[0][1] == 1);
        row_10 += usize::from(a[0][0] == 1 && a[1][0] == 0);
        row_01 += usize::from(a[0][0] == 0 && a[1][0] == 1);
    }
    let p = both as f64 / draws as f64;
    let se = (0.25f64 * 0.75 / draws as f64).sqrt();
    assert!((p - 0.25).abs() < 4.0 * se, "P(A11 = A12 = 1) = {p}");
    // exchangeable rows: swapping the two rows leaves the law unchanged
    let (x, y) = (row_10 as f64 / draws as f64, row_01 as f64 / draws as f64);
    assert!((x - y).abs() < 4.0 * (2.0 * 0.25 / draws as f64).sqrt(), "{x} vs {y}");
}
