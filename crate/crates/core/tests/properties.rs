//! Randomized invariants. Each case draws its data from a seeded ChaCha
//! stream so failures shrink to a single reproducible seed.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use coarsekit::embeddings::{compression_bounds, embedding_from_negative_type, HilbertEmbedding};
use coarsekit::groupoid::{alpha_star, beta_star};
use coarsekit::kernels::{
    check_negative_type, check_positive_definite, properness_profile, schoenberg_transform, Kernel,
};
use coarsekit::random::{point_cloud, random_tree, random_unit_pd_kernel, rng, squared_distance_kernel};
use coarsekit::spaces::{cayley_ball, GroupSpec, MetricSpace};
use coarsekit::C64;

fn discrete_space(n: usize) -> Arc<MetricSpace> {
    Arc::new(MetricSpace::new(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })).unwrap())
}

/// Smallest `z* A z` over `samples` random unit vectors.
fn sampled_min_form(a: &DMatrix<C64>, seed: u64, samples: usize) -> f64 {
    let mut r = rng(seed);
    let n = a.nrows();
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let z: Vec<C64> = (0..n)
            .map(|_| C64::new(r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)))
            .collect();
        let norm_sq: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let mut form = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                form += z[i].conj() * a[(i, j)] * z[j];
            }
        }
        best = best.min(form.re / norm_sq);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schoenberg_transforms_of_squared_distances_are_positive(seed in any::<u64>(), n in 2usize..=10, dim in 1usize..=4, t in 0.01f64..20.0) {
        let mut r = rng(seed);
        let h = squared_distance_kernel(&point_cloud(&mut r, n, dim)).unwrap();
        prop_assert!(check_negative_type(&h, 1e-9).unwrap().verdict);
        let phi = schoenberg_transform(&h, t).unwrap();
        prop_assert!(check_positive_definite(&phi, 1e-9).unwrap().verdict);
    }

    #[test]
    fn one_minus_unit_positive_kernel_is_negative_type(seed in any::<u64>(), n in 2usize..=10, rank in 1usize..=4) {
        let u = random_unit_pd_kernel(&mut rng(seed), discrete_space(n), rank);
        let h = Kernel::from_fn(u.space().clone(), |i, j| 1.0 - u.get(i, j).re);
        prop_assert!(check_negative_type(&h, 1e-9).unwrap().verdict);
    }

    #[test]
    fn positivity_verdict_matches_sampling_oracle(seed in any::<u64>(), n in 1usize..=6, shift in 0.0f64..1.5) {
        let mut r = rng(seed);
        let b = DMatrix::from_fn(n, n, |_, _| C64::new(r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)));
        let a = &b * b.adjoint() - DMatrix::from_diagonal_element(n, n, C64::new(shift, 0.0));
        let k = Kernel::new(discrete_space(n), a.clone()).unwrap();
        let report = check_positive_definite(&k, 1e-9).unwrap();
        let sampled = sampled_min_form(&a, seed ^ 1, 10_000);
        if report.verdict {
            prop_assert!(sampled >= -report.threshold - 1e-12, "sampled {sampled} below threshold {}", report.threshold);
        } else {
            let witness = report.witness.as_ref().expect("failing reports carry a witness");
            prop_assert!(witness.reevaluate(&a) < -report.threshold);
        }
    }

    #[test]
    fn properness_envelopes_are_monotone(seed in any::<u64>(), n in 2usize..=12, dim in 1usize..=3) {
        let mut r = rng(seed);
        let h = squared_distance_kernel(&point_cloud(&mut r, n, dim)).unwrap();
        prop_assert!(properness_profile(&h).is_monotone());
        let f = embedding_from_negative_type(&h, 0).unwrap();
        let profile = compression_bounds(&f);
        prop_assert!(profile.is_monotone());
        prop_assert!(profile.violations(&f).is_empty());
    }

    #[test]
    fn compression_envelopes_bracket_arbitrary_maps(seed in any::<u64>(), n in 2usize..=12) {
        let mut r = rng(seed);
        let space = Arc::new(squared_distance_kernel(&point_cloud(&mut r, n, 2)).unwrap().space().as_ref().clone());
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random_range(-2.0..=2.0)).collect()).collect();
        let f = HilbertEmbedding::from_rows(space, &rows).unwrap();
        let profile = compression_bounds(&f);
        prop_assert!(profile.is_monotone());
        prop_assert!(profile.violations(&f).is_empty());
    }

    #[test]
    fn tree_metrics_embed_as_square_roots(seed in any::<u64>(), n in 2usize..=40) {
        let tree = random_tree(&mut rng(seed), n);
        let space = Arc::new(tree.metric().unwrap());
        let h = Kernel::metric(space.clone());
        prop_assert!(check_negative_type(&h, 1e-9).unwrap().verdict);
        let f = embedding_from_negative_type(&h, n / 2).unwrap();
        for x in 0..n {
            for y in 0..n {
                prop_assert!((f.distance(x, y) - space.distance(x, y).sqrt()).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn alpha_and_beta_invert_each_other(seed in any::<u64>(), radius in 0u32..=2, free in any::<bool>()) {
        let group = if free { GroupSpec::Free { rank: 2 } } else { GroupSpec::Lattice { dim: 2 } };
        let ball = Arc::new(cayley_ball(group, radius).unwrap());
        let mut r = rng(seed);
        let n = ball.interior_len();
        let values = DMatrix::from_fn(n, n, |_, _| C64::new(r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)));
        let f = Kernel::new(ball.space().clone(), values).unwrap();
        prop_assert_eq!(beta_star(&alpha_star(&f, &ball).unwrap()).unwrap(), f);
    }
}
