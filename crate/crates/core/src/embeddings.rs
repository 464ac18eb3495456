//! Hilbert-space embeddings and their compression envelopes.
//!
//! A negative-type kernel `h` is realized as `‖f(x) − f(y)‖² = h(x, y)` by
//! factoring the Gram matrix `G(i,j) = ½(h(xᵢ,x₀) + h(xⱼ,x₀) − h(xᵢ,xⱼ))`.
//! Going back is just squared distances. [`compression_bounds`] measures
//! the `ρ₋` / `ρ₊` envelopes of any embedding, and [`expander_obstruction`]
//! checks the spectral Poincaré inequality that makes expander families
//! resist uniform embedding.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{check_negative_type, ClassificationReport, Kernel, KernelError, DEFAULT_TOL};
use crate::linalg::symmetric_eigen;
use crate::spaces::{Graph, MetricSpace, SpaceError};

/// Relative width of the window `[−w, 0)` of Gram eigenvalues clamped to zero.
pub const GRAM_CLAMP_RTOL: f64 = 1e-9;

/// Relative slack on the Poincaré inequality.
pub const POINCARE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum EmbeddingError {
    #[error("basepoint {0} is outside a {1}-point space")]
    BasepointOutOfRange(usize, usize),
    #[error("kernel is not of negative type (extremal eigenvalue {})", .0.extremal_eigenvalue)]
    NotNegativeType(Box<ClassificationReport>),
    #[error("Gram matrix has eigenvalue {eigenvalue} below the clamp window −{window}")]
    IndefiniteGram {
        eigenvalue: f64,
        window: f64,
        report: Box<ClassificationReport>,
    },
    #[error("coordinates: expected {expected} rows of equal finite length")]
    BadCoordinates { expected: usize },
    #[error("embedding has {embedded} points but the graph has {vertices} vertices")]
    SizeMismatch { embedded: usize, vertices: usize },
    #[error("graph is disconnected (spectral gap {0})")]
    Disconnected(f64),
    #[error("Poincaré inequality violated: lhs {lhs} > rhs {rhs}")]
    PoincareViolated { lhs: f64, rhs: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

/// Map from the points of a space to `ℝ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertEmbedding {
    space: Arc<MetricSpace>,
    /// One row per point.
    coords: DMatrix<f64>,
    /// Frobenius norm of the Gram spectrum discarded by top-k truncation.
    truncation_error: f64,
}

impl HilbertEmbedding {
    pub fn new(space: Arc<MetricSpace>, coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() != space.len() || coords.ncols() == 0 || coords.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::BadCoordinates { expected: space.len() });
        }
        Ok(Self {
            space,
            coords,
            truncation_error: 0.0,
        })
    }

    pub fn from_rows(space: Arc<MetricSpace>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != n || rows.iter().any(|r| r.len() != dim) {
            return Err(EmbeddingError::BadCoordinates { expected: n });
        }
        Self::new(space, DMatrix::from_fn(n, dim, |i, k| rows[i][k]))
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        (0..self.dim()).map(|k| (self.coords[(i, k)] - self.coords[(j, k)]).powi(2)).sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.squared_distance(i, j).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingOptions {
    /// Keep only the `k` largest Gram eigenvalues.
    pub top_k: Option<usize>,
}

/// Realizes a negative-type kernel in `ℝ^dim` with `f(basepoint) = 0`.
pub fn embedding_from_negative_type(h: &Kernel, basepoint: usize) -> Result<HilbertEmbedding> {
    embedding_from_negative_type_with(h, basepoint, EmbeddingOptions::default())
}

pub fn embedding_from_negative_type_with(
    h: &Kernel,
    basepoint: usize,
    options: EmbeddingOptions,
) -> Result<HilbertEmbedding> {
    let n = h.len();
    if basepoint >= n {
        return Err(EmbeddingError::BasepointOutOfRange(basepoint, n));
    }
    let report = check_negative_type(h, DEFAULT_TOL)?;
    if !report.verdict {
        return Err(EmbeddingError::NotNegativeType(Box::new(report)));
    }
    let real = h.real_part();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (real[(i, j)] + real[(j, i)]));
    let scale = sym.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let window = GRAM_CLAMP_RTOL * n as f64 * scale;

    // Gram matrix on the points other than the basepoint; the basepoint row
    // is identically zero and is left out of the factorization.
    let others: Vec<usize> = (0..n).filter(|&i| i != basepoint).collect();
    let m = others.len();
    let gram = DMatrix::from_fn(m, m, |a, b| {
        let (i, j) = (others[a], others[b]);
        0.5 * (sym[(i, basepoint)] + sym[(j, basepoint)] - sym[(i, j)])
    });
    let eig = symmetric_eigen(&gram);
    if let Some(&lowest) = eig.values.first() {
        if lowest < -window {
            return Err(EmbeddingError::IndefiniteGram {
                eigenvalue: lowest,
                window,
                report: Box::new(report),
            });
        }
    }
    let mut retained: Vec<usize> = (0..m).rev().filter(|&k| eig.values[k] > window).collect();
    let mut truncation_error = 0.0;
    if let Some(k) = options.top_k {
        if retained.len() > k {
            truncation_error = retained[k..].iter().map(|&i| eig.values[i].powi(2)).sum::<f64>().sqrt();
            retained.truncate(k);
        }
    }
    let dim = retained.len().max(1);
    let mut coords = DMatrix::<f64>::zeros(n, dim);
    for (col, &k) in retained.iter().enumerate() {
        let scale = eig.values[k].sqrt();
        for (a, &i) in others.iter().enumerate() {
            coords[(i, col)] = scale * eig.vectors[(a, k)];
        }
    }
    Ok(HilbertEmbedding {
        space: h.space().clone(),
        coords,
        truncation_error,
    })
}

/// `h(x, y) = ‖f(x) − f(y)‖²`.
pub fn negative_type_from_embedding(f: &HilbertEmbedding) -> Kernel {
    let n = f.space.len();
    let mut values = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = f.squared_distance(i, j);
            values[(i, j)] = d2;
            values[(j, i)] = d2;
        }
    }
    Kernel::from_real(f.space.clone(), values).expect("squared distances are finite")
}

/// Envelopes `ρ₋(r) = min{‖f(x)−f(y)‖ : d ≥ r}` and
/// `ρ₊(r) = max{‖f(x)−f(y)‖ : d ≤ r}` over realized distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionProfile {
    pub radii: Vec<f64>,
    pub rho_minus: Vec<f64>,
    pub rho_plus: Vec<f64>,
}

impl CompressionProfile {
    fn slot(&self, r: f64) -> Option<usize> {
        self.radii.iter().position(|&x| x == r)
    }

    pub fn rho_minus_at(&self, r: f64) -> Option<f64> {
        self.slot(r).map(|s| self.rho_minus[s])
    }

    pub fn rho_plus_at(&self, r: f64) -> Option<f64> {
        self.slot(r).map(|s| self.rho_plus[s])
    }

    pub fn is_monotone(&self) -> bool {
        self.rho_minus.windows(2).all(|w| w[0] <= w[1]) && self.rho_plus.windows(2).all(|w| w[0] <= w[1])
    }

    /// Pairs where `ρ₋(d) ≤ ‖f(x)−f(y)‖ ≤ ρ₊(d)` fails. Empty by construction.
    pub fn violations(&self, f: &HilbertEmbedding) -> Vec<(usize, usize)> {
        let n = f.space.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f.space.distance(i, j);
                let norm = f.distance(i, j);
                let ok = self
                    .slot(d)
                    .is_some_and(|s| self.rho_minus[s] <= norm && norm <= self.rho_plus[s]);
                if !ok {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// CSV with header `r,rho_minus,rho_plus`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,rho_minus,rho_plus\n");
        for ((r, lo), hi) in self.radii.iter().zip(&self.rho_minus).zip(&self.rho_plus) {
            let _ = writeln!(out, "{r},{lo},{hi}");
        }
        out
    }
}

pub fn compression_bounds(f: &HilbertEmbedding) -> CompressionProfile {
    let space = &f.space;
    let n = space.len();
    let radii = space.realized_distances();
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((space.distance(i, j), f.distance(i, j)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rho_plus = Vec::with_capacity(radii.len());
    let mut running = 0.0f64;
    let mut cursor = 0;
    for &r in &radii {
        while cursor < pairs.len() && pairs[cursor].0 <= r {
            running = running.max(pairs[cursor].1);
            cursor += 1;
        }
        rho_plus.push(running);
    }
    let mut rho_minus = vec![0.0; radii.len()];
    let mut running = f64::INFINITY;
    let mut cursor = pairs.len();
    for (slot, &r) in radii.iter().enumerate().rev() {
        while cursor > 0 && pairs[cursor - 1].0 >= r {
            running = running.min(pairs[cursor - 1].1);
            cursor -= 1;
        }
        rho_minus[slot] = running;
    }
    let profile = CompressionProfile {
        radii,
        rho_minus,
        rho_plus,
    };
    debug_assert!(profile.violations(f).is_empty());
    profile
}

/// Outcome of the spectral Poincaré test on one graph and one embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpanderCertificate {
    pub vertices: usize,
    pub edges: usize,
    /// Maximum degree (the degree, for regular graphs).
    pub degree: usize,
    pub regular: bool,
    /// Second-smallest eigenvalue of `L = D − A`.
    pub lambda1: f64,
    /// `(1/n²) Σ_{x,y} ‖f(x) − f(y)‖²`.
    pub lhs: f64,
    /// `(2/(n λ₁)) Σ_{edges} ‖f(u) − f(v)‖²`.
    pub rhs: f64,
    /// `degree · ρ₊(1)² / λ₁`.
    pub bound: f64,
    pub rho_plus_one: f64,
    pub median_distance: f64,
    pub rho_minus_median: f64,
    /// `bound · n² / #{(x,y) : d(x,y) ≥ median}`, which `ρ₋(median)²` cannot exceed.
    pub rho_minus_median_sq_limit: f64,
    /// `median · √(λ₁ / degree)`: typical graph distance measured against
    /// the separation the Poincaré budget allows a 1-Lipschitz map.
    pub obstruction_strength: f64,
    pub verdict: String,
}

/// Lower median of the distances over unordered pairs of distinct points.
fn median_distance(space: &MetricSpace) -> f64 {
    let n = space.len();
    let mut all: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| space.distance(i, j))
        .collect();
    if all.is_empty() {
        return 0.0;
    }
    all.sort_by(f64::total_cmp);
    all[(all.len() - 1) / 2]
}

pub fn expander_obstruction(g: &Graph, f: &HilbertEmbedding) -> Result<ExpanderCertificate> {
    let n = g.vertex_count();
    if f.space.len() != n {
        return Err(EmbeddingError::SizeMismatch {
            embedded: f.space.len(),
            vertices: n,
        });
    }
    let metric = g.metric()?;
    let eig = symmetric_eigen(&g.laplacian());
    let lambda1 = eig.values.get(1).copied().unwrap_or(0.0);
    let gap_floor = 1e-10 * n as f64;
    if n > 1 && lambda1 <= gap_floor {
        return Err(EmbeddingError::Disconnected(lambda1));
    }

    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..n {
            spread += f.squared_distance(i, j);
        }
    }
    let lhs = spread / (n * n) as f64;
    let edge_energy: f64 = g.edges().iter().map(|&(u, v)| f.squared_distance(u, v)).sum();
    let rhs = if n > 1 { 2.0 / (n as f64 * lambda1) * edge_energy } else { 0.0 };
    if lhs > rhs * (1.0 + POINCARE_RTOL) + f64::MIN_POSITIVE {
        return Err(EmbeddingError::PoincareViolated { lhs, rhs });
    }

    let degree = g.max_degree();
    let rho_plus_one = g.edges().iter().map(|&(u, v)| f.distance(u, v)).fold(0.0, f64::max);
    let bound = if n > 1 { degree as f64 * rho_plus_one.powi(2) / lambda1 } else { 0.0 };
    let median = median_distance(&metric);
    let mut rho_minus_median = f64::INFINITY;
    let mut far_pairs = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && metric.distance(i, j) >= median {
                far_pairs += 1;
                rho_minus_median = rho_minus_median.min(f.distance(i, j));
            }
        }
    }
    if far_pairs == 0 {
        rho_minus_median = 0.0;
    }
    let rho_minus_median_sq_limit = if far_pairs > 0 {
        bound * (n * n) as f64 / far_pairs as f64
    } else {
        0.0
    };
    debug_assert!(rho_minus_median.powi(2) <= rho_minus_median_sq_limit * (1.0 + POINCARE_RTOL) + f64::MIN_POSITIVE);
    let obstruction_strength = if n > 1 { median * (lambda1 / degree as f64).sqrt() } else { 0.0 };
    let verdict = if obstruction_strength > 1.0 {
        "obstruction: median distance exceeds the Poincaré separation budget".to_string()
    } else {
        "no obstruction: the Poincaré bound is loose at this scale".to_string()
    };
    Ok(ExpanderCertificate {
        vertices: n,
        edges: g.edges().len(),
        degree,
        regular: g.regular_degree().is_some(),
        lambda1,
        lhs,
        rhs,
        bound,
        rho_plus_one,
        median_distance: median,
        rho_minus_median,
        rho_minus_median_sq_limit,
        obstruction_strength,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::graph_metric;

    fn path_space(n: usize) -> Arc<MetricSpace> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Arc::new(graph_metric(n, &edges).unwrap())
    }

    #[test]
    fn path_metric_embeds_with_unit_steps() {
        let h = Kernel::metric(path_space(3));
        let f = embedding_from_negative_type(&h, 0).unwrap();
        assert!(f.point(0).iter().all(|&x| x == 0.0));
        assert!((f.squared_distance(0, 1) - 1.0).abs() < 1e-12);
        assert!((f.squared_distance(0, 2) - 2.0).abs() < 1e-12);
        assert!((f.squared_distance(1, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_kernel_embeds_at_origin() {
        let h = Kernel::from_fn(path_space(4), |_, _| 0.0);
        let f = embedding_from_negative_type(&h, 2).unwrap();
        assert_eq!(f.dim(), 1);
        assert!(f.coords().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_negative_type_is_rejected() {
        let h = Kernel::from_fn(path_space(3), |i, j| -((i as f64) - (j as f64)).abs());
        assert!(matches!(
            embedding_from_negative_type(&h, 0),
            Err(EmbeddingError::NotNegativeType(_))
        ));
        let h = Kernel::metric(path_space(3));
        assert!(matches!(
            embedding_from_negative_type(&h, 3),
            Err(EmbeddingError::BasepointOutOfRange(3, 3))
        ));
    }

    #[test]
    fn round_trip_through_squared_distances() {
        let h = Kernel::metric(path_space(6));
        let f = embedding_from_negative_type(&h, 3).unwrap();
        let back = negative_type_from_embedding(&f);
        for i in 0..6 {
            assert_eq!(back.get(i, i).re, 0.0);
            for j in 0..6 {
                assert!((back.get(i, j).re - h.get(i, j).re).abs() < 1e-8 * 5.0);
            }
        }
    }

    #[test]
    fn identity_embedding_gives_squared_differences() {
        let space = path_space(3);
        let f = HilbertEmbedding::from_rows(space, &[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let h = negative_type_from_embedding(&f);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j).re, ((i as f64) - (j as f64)).powi(2));
            }
        }
        let profile = compression_bounds(&f);
        assert_eq!(profile.rho_minus, vec![1.0, 2.0]);
        assert_eq!(profile.rho_plus, vec![1.0, 2.0]);
    }

    #[test]
    fn constant_map_has_zero_upper_envelope() {
        let f = HilbertEmbedding::from_rows(path_space(4), &vec![vec![1.5, -2.0]; 4]).unwrap();
        let p = compression_bounds(&f);
        assert!(p.rho_plus.iter().all(|&x| x == 0.0));
        assert!(p.violations(&f).is_empty());
    }

    #[test]
    fn top_k_truncation_records_error() {
        let h = Kernel::metric(path_space(5));
        let full = embedding_from_negative_type(&h, 0).unwrap();
        let cut = embedding_from_negative_type_with(&h, 0, EmbeddingOptions { top_k: Some(1) }).unwrap();
        assert_eq!(cut.dim(), 1);
        assert!(full.dim() > 1);
        assert!(cut.truncation_error() > 0.0);
        assert_eq!(full.truncation_error(), 0.0);
    }

    #[test]
    fn complete_graph_simplex_attains_equality() {
        let n = 4;
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let g = Graph::new(n, &edges).unwrap();
        let space = Arc::new(g.metric().unwrap());
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
        let f = HilbertEmbedding::from_rows(space, &rows).unwrap();
        let c = expander_obstruction(&g, &f).unwrap();
        assert!((c.lhs - 1.5).abs() < 1e-12);
        assert!((c.lambda1 - 4.0).abs() < 1e-12);
        assert!((c.rhs - 1.5).abs() < 1e-12);
    }

    #[test]
    fn path_reports_no_obstruction() {
        let n = 10;
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let g = Graph::new(n, &edges).unwrap();
        let space = Arc::new(g.metric().unwrap());
        let f = embedding_from_negative_type(&Kernel::metric(space), 0).unwrap();
        let c = expander_obstruction(&g, &f).unwrap();
        let expected_gap = 2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos();
        assert!((c.lambda1 - expected_gap).abs() < 1e-10);
        assert!(c.lhs <= c.rhs);
        assert_eq!(c.median_distance, 3.0);
        assert!(c.obstruction_strength < 1.0);
        assert!(c.verdict.starts_with("no obstruction"));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let f = HilbertEmbedding::from_rows(path_space(2), &[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(expander_obstruction(&g, &f), Err(EmbeddingError::SizeMismatch { .. })));
    }
}
