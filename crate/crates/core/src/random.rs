//! Seeded generators for test inputs.
//!
//! Every generator takes a `ChaCha8Rng`, so a seed fixes the output on all
//! platforms.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernels::Kernel;
use crate::spaces::{Graph, MetricSpace, SpaceError};
use crate::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points uniform in `[-1, 1]^dim`.
pub fn point_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// Euclidean metric on a point cloud. Coincident points are rejected.
pub fn euclidean_space(points: &[Vec<f64>]) -> Result<MetricSpace, SpaceError> {
    let n = points.len();
    let dist = DMatrix::from_fn(n, n, |i, j| {
        points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    });
    MetricSpace::new(dist)
}

/// Squared Euclidean distance of a point cloud, hosted on its Euclidean
/// metric. Always of negative type.
pub fn squared_distance_kernel(points: &[Vec<f64>]) -> Result<Kernel, SpaceError> {
    let space = Arc::new(euclidean_space(points)?);
    let d = space.distances().clone();
    Ok(Kernel::from_real(space, d.map(|x| x * x)).expect("finite squared distances"))
}

/// Random tree on `n` vertices: vertex `v > 0` attaches to a uniform parent in `0..v`.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    Graph::new(n, &edges).expect("attachment edges are distinct")
}

/// Uniform-ish connected `degree`-regular simple graph from the pairing
/// model, resampling on loops, repeated edges, or disconnection.
pub fn random_regular_graph(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> Option<Graph> {
    if n == 0 || degree >= n || !(n * degree).is_multiple_of(2) {
        return None;
    }
    const ATTEMPTS: usize = 10_000;
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    'attempt: for _ in 0..ATTEMPTS {
        stubs.shuffle(rng);
        let mut seen = std::collections::HashSet::with_capacity(stubs.len() / 2);
        let mut edges = Vec::with_capacity(stubs.len() / 2);
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        let g = Graph::new(n, &edges).expect("checked simple");
        if g.is_connected() {
            return Some(g);
        }
    }
    None
}

/// Positive-definite kernel with unit diagonal: the normalized Gram matrix
/// of `n` random complex vectors in `ℂ^rank`.
pub fn random_unit_pd_kernel(rng: &mut ChaCha8Rng, space: Arc<MetricSpace>, rank: usize) -> Kernel {
    let n = space.len();
    let rank = rank.max(1);
    let vectors: Vec<Vec<C64>> = (0..n)
        .map(|_| {
            let v: Vec<C64> = (0..rank)
                .map(|_| C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect();
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b.conj()).sum()
        }
    });
    Kernel::new(space, values).expect("finite Gram")
}

/// `k` distinct indices from `0..n`, in draw order.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k.min(n)).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{check_negative_type, check_positive_definite};

    #[test]
    fn same_seed_same_output() {
        assert_eq!(point_cloud(&mut rng(7), 5, 3), point_cloud(&mut rng(7), 5, 3));
        let a = random_tree(&mut rng(3), 20);
        let b = random_tree(&mut rng(3), 20);
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn regular_graphs_are_regular_and_connected() {
        let g = random_regular_graph(&mut rng(1), 20, 3).unwrap();
        assert_eq!(g.regular_degree(), Some(3));
        assert!(g.is_connected());
        assert!(random_regular_graph(&mut rng(1), 7, 3).is_none());
        assert!(random_regular_graph(&mut rng(1), 4, 4).is_none());
    }

    #[test]
    fn generated_kernels_have_their_type() {
        let pts = point_cloud(&mut rng(11), 8, 2);
        let h = squared_distance_kernel(&pts).unwrap();
        assert!(check_negative_type(&h, 1e-9).unwrap().verdict);
        let u = random_unit_pd_kernel(&mut rng(5), h.space().clone(), 3);
        assert!(check_positive_definite(&u, 1e-9).unwrap().verdict);
        assert!((0..8).all(|i| u.get(i, i) == C64::new(1.0, 0.0)));
    }

    #[test]
    fn samples_are_distinct() {
        let mut s = sample_indices(&mut rng(2), 30, 5);
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 5);
    }
}
