//! Finite-width operators on word-metric balls.
//!
//! A [`BandOperator`] is the compression of an operator on `ℓ²(Γ)` to a
//! prefix `B(E)` of a [`GroupBall`]; its width and bound are always
//! recomputed from the stored entries. Completely positive maps are given
//! by a [`CpMap`], and [`induced_kernel`] realizes
//! `u(s,t) = ⟨δ_s, T(λ_{st⁻¹}) δ_t⟩` on the interior `B(N)`.
//!
//! Composition shrinks the region on which a truncated product agrees with
//! the true product: if `A` has width `w`, `(AB)(s,t)` only sums over `r`
//! with `l(r) ≤ l(s) + w`. Products are therefore returned on `B(E − w)`
//! for the smaller of the two widths, and refused once that region no
//! longer covers the interior.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{
    check_positive_definite, near_diagonal_deviation, properness_profile, psd_report, ApproximateUnit, CheckKind,
    ClassificationReport, Kernel, KernelError, PropernessProfile, DEFAULT_TOL,
};
use crate::linalg::spectral_norm;
use crate::spaces::{Element, GroupBall, SpaceError};
use crate::C64;

/// Relative slack for the dominance checks of properties (ii) and (iii).
pub const DOMINANCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Error)]
pub enum RoeError {
    #[error("operators live on different balls")]
    BallMismatch,
    #[error("operators are enumerated to different radii ({0} and {1})")]
    ExtentMismatch(u32, u32),
    #[error("radius {radius} exceeds the enumerated extent {extent}")]
    RadiusBeyondExtent { radius: u32, extent: u32 },
    #[error("product is exact only out to radius {exact}; the shell at radius {shell} lies inside the interior B({interior})")]
    Truncation { exact: u32, shell: u32, interior: u32 },
    #[error("entry ({0}, {1}) is outside the {2}-element operator")]
    EntryOutOfRange(usize, usize, usize),
    #[error("entry ({0}, {1}) is given twice")]
    DuplicateEntry(usize, usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("operator is enumerated to radius {radius}, short of the interior B({interior})")]
    OperatorTooSmall { radius: u32, interior: u32 },
    #[error("functional references ball index {0}, outside the {1} enumerated elements")]
    FunctionalOutOfRange(usize, usize),
    #[error("finite-rank map needs at least one term")]
    EmptyFiniteRank,
    #[error("Schur multiplier kernel must live on the interior of the ball")]
    KernelSpaceMismatch,
    #[error("Schur multiplier kernel has diagonal {value} at point {point}, not 1")]
    NotUnital { point: usize, value: C64 },
    #[error("Schur multiplier kernel is not positive definite (extremal eigenvalue {})", .0.extremal_eigenvalue)]
    NotPositiveDefinite(Box<ClassificationReport>),
    #[error("block positivity applies to unital completely positive maps (identity or Schur)")]
    NotUcp,
    #[error("property (ii) applies to finite-rank maps")]
    NotFiniteRank,
    #[error("sample index {0} is not an interior element")]
    SampleOutOfRange(usize),
    #[error("schedule is empty")]
    EmptySchedule,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T, E = RoeError> = std::result::Result<T, E>;

/// Finite-width operator stored as sparse rows over the prefix `B(radius)`.
#[derive(Debug, Clone)]
pub struct BandOperator {
    ball: Arc<GroupBall>,
    radius: u32,
    /// Nonzero entries per row, sorted by column.
    rows: Vec<Vec<(usize, C64)>>,
    width: u32,
    bound: f64,
}

impl PartialEq for BandOperator {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ball, &other.ball) && self.radius == other.radius && self.rows == other.rows
    }
}

impl BandOperator {
    /// Builds from `(s, t, value)` triplets on `B(radius)`; zeros are dropped.
    pub fn from_entries(
        ball: Arc<GroupBall>,
        radius: u32,
        entries: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        if radius > ball.extent() {
            return Err(RoeError::RadiusBeyondExtent {
                radius,
                extent: ball.extent(),
            });
        }
        let size = ball.count_within(radius);
        let mut map = BTreeMap::new();
        for (s, t, z) in entries {
            if s >= size || t >= size {
                return Err(RoeError::EntryOutOfRange(s, t, size));
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(RoeError::NonFinite(s, t));
            }
            if map.insert((s, t), z).is_some() {
                return Err(RoeError::DuplicateEntry(s, t));
            }
        }
        let mut rows = vec![Vec::new(); size];
        for ((s, t), z) in map {
            if z != C64::new(0.0, 0.0) {
                rows[s].push((t, z));
            }
        }
        Ok(Self::assemble(ball, radius, rows))
    }

    /// Recomputes width and bound from the rows.
    fn assemble(ball: Arc<GroupBall>, radius: u32, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut width = 0;
        let mut bound = 0.0f64;
        for (s, row) in rows.iter().enumerate() {
            for &(t, z) in row {
                width = width.max(ball.distance(s, t));
                bound = bound.max(z.norm());
            }
        }
        Self {
            ball,
            radius,
            rows,
            width,
            bound,
        }
    }

    pub fn identity(ball: Arc<GroupBall>, radius: u32) -> Result<Self> {
        let size = ball.count_within(radius.min(ball.extent()));
        Self::from_entries(ball, radius, (0..size).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    pub fn zero(ball: Arc<GroupBall>, radius: u32) -> Result<Self> {
        Self::from_entries(ball, radius, std::iter::empty())
    }

    pub fn ball(&self) -> &Arc<GroupBall> {
        &self.ball
    }

    /// Radius of the prefix `B(radius)` the operator is stored on.
    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Number of basis vectors.
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// `max d(s,t)` over nonzero entries.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// `max |A(s,t)|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, s: usize, t: usize) -> C64 {
        self.rows
            .get(s)
            .and_then(|row| row.binary_search_by_key(&t, |e| e.0).ok().map(|k| row[k].1))
            .unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(t, z)| (s, t, z)))
    }

    /// Width and bound agree with the entries, and the two band
    /// inequalities hold under recomputation.
    pub fn check_invariants(&self) -> bool {
        let fresh = Self::assemble(self.ball.clone(), self.radius, self.rows.clone());
        fresh.width == self.width
            && fresh.bound == self.bound
            && self
                .entries()
                .all(|(s, t, z)| z.norm() <= self.bound && self.ball.distance(s, t) <= self.width)
    }

    /// Compression to `B(radius)`.
    pub fn compress(&self, radius: u32) -> Result<Self> {
        if radius > self.radius {
            return Err(RoeError::RadiusBeyondExtent {
                radius,
                extent: self.radius,
            });
        }
        let size = self.ball.count_within(radius);
        let rows = self.rows[..size]
            .iter()
            .map(|row| row.iter().copied().filter(|&(t, _)| t < size).collect())
            .collect();
        Ok(Self::assemble(self.ball.clone(), radius, rows))
    }

    /// Dense block on the interior `B(N)`.
    pub fn interior_block(&self) -> DMatrix<C64> {
        let n = self.ball.interior_len().min(self.size());
        let mut m = DMatrix::zeros(n, n);
        for (s, row) in self.rows[..n].iter().enumerate() {
            for &(t, z) in row.iter().take_while(|e| e.0 < n) {
                m[(s, t)] = z;
            }
        }
        m
    }
}

/// Translation `λ_g` on the full enumerated ball: `λ_g(s, r) = 1` iff `s = g r`.
pub fn left_regular(g: &Element, ball: &Arc<GroupBall>) -> Result<BandOperator> {
    ball.locate(g)?;
    let group = ball.group();
    let entries = (0..ball.len()).filter_map(|r| {
        ball.index_of(&group.multiply(g, ball.element(r)))
            .map(|s| (s, r, C64::new(1.0, 0.0)))
    });
    BandOperator::from_entries(ball.clone(), ball.extent(), entries)
}

/// `λ_g` compressed to the interior.
fn interior_translation(g: &Element, ball: &GroupBall) -> Vec<(usize, usize)> {
    let n = ball.interior_len();
    let group = ball.group();
    (0..n)
        .filter_map(|r| {
            ball.index_of(&group.multiply(g, ball.element(r)))
                .filter(|&s| s < n)
                .map(|s| (s, r))
        })
        .collect()
}

pub fn band_compose(a: &BandOperator, b: &BandOperator) -> Result<BandOperator> {
    if !Arc::ptr_eq(&a.ball, &b.ball) {
        return Err(RoeError::BallMismatch);
    }
    if a.radius != b.radius {
        return Err(RoeError::ExtentMismatch(a.radius, b.radius));
    }
    let ball = &a.ball;
    let exact = a.radius - a.width.min(b.width).min(a.radius);
    if exact < ball.radius() {
        return Err(RoeError::Truncation {
            exact,
            shell: exact + 1,
            interior: ball.radius(),
        });
    }
    let size = ball.count_within(exact);
    let rows = a.rows[..size]
        .iter()
        .map(|row| {
            let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
            for &(r, x) in row {
                for &(t, y) in b.rows[r].iter().take_while(|e| e.0 < size) {
                    *acc.entry(t).or_default() += x * y;
                }
            }
            acc.into_iter().filter(|(_, z)| *z != C64::new(0.0, 0.0)).collect()
        })
        .collect();
    Ok(BandOperator::assemble(ball.clone(), exact, rows))
}

/// Conjugate transpose.
pub fn band_adjoint(a: &BandOperator) -> BandOperator {
    let mut rows = vec![Vec::new(); a.size()];
    for (s, t, z) in a.entries() {
        rows[t].push((s, z.conj()));
    }
    // Entries were visited in row order, so each new row is already sorted.
    BandOperator::assemble(a.ball.clone(), a.radius, rows)
}

/// `a ↦ Σ weight · ⟨δ_x, a δ_y⟩` over ball indices `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub terms: Vec<(usize, usize, C64)>,
}

impl Functional {
    pub fn new(terms: Vec<(usize, usize, C64)>) -> Self {
        Self { terms }
    }

    /// `Σ |weight|`, an upper bound for the functional norm.
    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.2.norm()).sum()
    }

    pub fn evaluate(&self, a: &BandOperator) -> C64 {
        self.terms.iter().map(|&(x, y, w)| w * a.get(x, y)).sum()
    }

    /// Value on `λ_g` without building it.
    pub fn evaluate_translation(&self, g: &Element, ball: &GroupBall) -> C64 {
        let group = ball.group();
        self.terms
            .iter()
            .filter(|&&(x, y, _)| group.multiply(g, ball.element(y)) == *ball.element(x))
            .map(|t| t.2)
            .sum()
    }
}

/// One term `f ⊗ S` of a finite-rank map `a ↦ Σ f_i(a) S_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTerm {
    pub functional: Functional,
    pub operator: BandOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CpMap {
    Identity,
    /// Entrywise multiplication by a positive-definite kernel with unit diagonal.
    Schur(Kernel),
    FiniteRank(Vec<RankOneTerm>),
}

impl CpMap {
    pub fn schur(kernel: Kernel, ball: &GroupBall) -> Result<Self> {
        if kernel.space().as_ref() != ball.space().as_ref() {
            return Err(RoeError::KernelSpaceMismatch);
        }
        for i in 0..kernel.len() {
            let value = kernel.get(i, i);
            if (value - C64::new(1.0, 0.0)).norm() > DEFAULT_TOL {
                return Err(RoeError::NotUnital { point: i, value });
            }
        }
        let report = check_positive_definite(&kernel, DEFAULT_TOL)?;
        if !report.verdict {
            return Err(RoeError::NotPositiveDefinite(Box::new(report)));
        }
        Ok(CpMap::Schur(kernel))
    }

    pub fn finite_rank(terms: Vec<RankOneTerm>, ball: &Arc<GroupBall>) -> Result<Self> {
        if terms.is_empty() {
            return Err(RoeError::EmptyFiniteRank);
        }
        for term in &terms {
            if !Arc::ptr_eq(&term.operator.ball, ball) {
                return Err(RoeError::BallMismatch);
            }
            if term.operator.radius < ball.radius() {
                return Err(RoeError::OperatorTooSmall {
                    radius: term.operator.radius,
                    interior: ball.radius(),
                });
            }
            for &(x, y, _) in &term.functional.terms {
                if let Some(&bad) = [x, y].iter().find(|&&i| i >= ball.len()) {
                    return Err(RoeError::FunctionalOutOfRange(bad, ball.len()));
                }
            }
        }
        Ok(CpMap::FiniteRank(terms))
    }

    pub fn is_ucp(&self) -> bool {
        matches!(self, CpMap::Identity | CpMap::Schur(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CpMap::Identity => "identity",
            CpMap::Schur(_) => "schur",
            CpMap::FiniteRank(_) => "finite_rank",
        }
    }
}

/// `T(λ_g)` compressed to the interior `B(N)`.
pub fn apply_cp_map(map: &CpMap, g: &Element, ball: &Arc<GroupBall>) -> Result<BandOperator> {
    ball.locate(g)?;
    let radius = ball.radius();
    let one = C64::new(1.0, 0.0);
    match map {
        CpMap::Identity => {
            let entries = interior_translation(g, ball).into_iter().map(|(s, r)| (s, r, one));
            BandOperator::from_entries(ball.clone(), radius, entries)
        }
        CpMap::Schur(k) => {
            let entries = interior_translation(g, ball)
                .into_iter()
                .map(|(s, r)| (s, r, k.get(s, r)));
            BandOperator::from_entries(ball.clone(), radius, entries)
        }
        CpMap::FiniteRank(terms) => {
            let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
            for term in terms {
                let c = term.functional.evaluate_translation(g, ball);
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (s, t, z) in term.operator.compress(radius)?.entries() {
                    *acc.entry((s, t)).or_default() += c * z;
                }
            }
            BandOperator::from_entries(ball.clone(), radius, acc.into_iter().map(|((s, t), z)| (s, t, z)))
        }
    }
}

/// `u(s,t) = ⟨δ_s, T(λ_{st⁻¹}) δ_t⟩` for interior `s`, `t`.
fn induced_value(map: &CpMap, ball: &GroupBall, s: usize, t: usize) -> Result<C64> {
    let g = ball.quotient_element(s, t);
    ball.locate(&g)?;
    Ok(match map {
        // λ_{st⁻¹} δ_t = δ_s
        CpMap::Identity => C64::new(1.0, 0.0),
        CpMap::Schur(k) => k.get(s, t),
        CpMap::FiniteRank(terms) => terms
            .iter()
            .map(|term| term.functional.evaluate_translation(&g, ball) * term.operator.get(s, t))
            .sum(),
    })
}

/// Kernel induced by a completely positive map, with the map it came from.
#[derive(Debug, Clone)]
pub struct InducedKernel {
    pub kernel: Kernel,
    pub map: CpMap,
}

pub fn induced_kernel(map: &CpMap, ball: &Arc<GroupBall>) -> Result<InducedKernel> {
    let n = ball.interior_len();
    let mut values = DMatrix::zeros(n, n);
    for t in 0..n {
        for s in 0..n {
            values[(s, t)] = induced_value(map, ball, s, t)?;
        }
    }
    Ok(InducedKernel {
        kernel: Kernel::new(ball.space().clone(), values)?,
        map: map.clone(),
    })
}

/// Block positivity of `[T(λ_{s_i s_j⁻¹})]` next to positivity of `u` on the sample.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyIReport {
    pub sample: Vec<usize>,
    pub block: ClassificationReport,
    pub scalar: ClassificationReport,
    pub agree: bool,
}

/// With `ξ_i = z_i δ_{s_i}`, the block form `Σ ⟨ξ_i, A_ij ξ_j⟩` is
/// `Σ z̄_i u(s_i, s_j) z_j`, so the two verdicts must coincide on
/// positive kernels.
pub fn verify_property_i(map: &CpMap, ball: &Arc<GroupBall>, sample: &[usize], tol: f64) -> Result<PropertyIReport> {
    if !map.is_ucp() {
        return Err(RoeError::NotUcp);
    }
    let n = ball.interior_len();
    if let Some(&bad) = sample.iter().find(|&&s| s >= n) {
        return Err(RoeError::SampleOutOfRange(bad));
    }
    let m = sample.len();
    let mut block = DMatrix::zeros(m * n, m * n);
    let mut scalar = DMatrix::zeros(m, m);
    for (i, &si) in sample.iter().enumerate() {
        for (j, &sj) in sample.iter().enumerate() {
            let g = ball.quotient_element(si, sj);
            let op = apply_cp_map(map, &g, ball)?;
            for (s, t, z) in op.entries() {
                block[(i * n + s, j * n + t)] = z;
            }
            scalar[(i, j)] = induced_value(map, ball, si, sj)?;
        }
    }
    let block = psd_report(&block, tol, CheckKind::BlockPositivity);
    let sub = Kernel::new(Arc::new(ball.space().subspace(sample)), scalar)?;
    let scalar = check_positive_definite(&sub, tol)?;
    Ok(PropertyIReport {
        sample: sample.to_vec(),
        agree: block.verdict == scalar.verdict,
        block,
        scalar,
    })
}

/// Decay of `|u|` for a finite-rank map against `Σ ‖f_i‖ ε_i(r)`.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyIIReport {
    /// `upper` is `M(r) = max{|u(s,t)| : d(s,t) ≥ r}`.
    pub profile: PropernessProfile,
    /// `Σ ‖f_i‖ ε_i(r)` with `ε_i(r) = max{|S_i(s,t)| : d(s,t) ≥ r}` on the interior.
    pub bound: Vec<f64>,
    pub max_width: u32,
    pub eps_grid: Vec<f64>,
    pub decay_radii: Vec<Option<f64>>,
    pub dominated: bool,
    /// `M(r) = 0` exactly for every `r > max_width`.
    pub vanishes_beyond_width: bool,
}

pub fn verify_property_ii(map: &CpMap, ball: &Arc<GroupBall>, eps_grid: &[f64]) -> Result<PropertyIIReport> {
    let CpMap::FiniteRank(terms) = map else {
        return Err(RoeError::NotFiniteRank);
    };
    let u = induced_kernel(map, ball)?.kernel;
    let profile = properness_profile(&u);
    let n = ball.interior_len();

    let mut bound = vec![0.0; profile.radii.len()];
    let mut max_width = 0;
    for term in terms {
        let s_op = term.operator.compress(ball.radius())?;
        max_width = max_width.max(s_op.width());
        let norm = term.functional.norm();
        for (slot, &r) in profile.radii.iter().enumerate() {
            let eps = s_op
                .entries()
                .filter(|&(s, t, _)| s < n && t < n && f64::from(ball.distance(s, t)) >= r)
                .map(|e| e.2.norm())
                .fold(0.0, f64::max);
            bound[slot] += norm * eps;
        }
    }
    let dominated = profile
        .upper
        .iter()
        .zip(&bound)
        .all(|(&m, &b)| m <= b * (1.0 + DOMINANCE_RTOL));
    let vanishes_beyond_width = profile
        .radii
        .iter()
        .zip(&profile.upper)
        .filter(|(r, _)| **r > f64::from(max_width))
        .all(|(_, &m)| m == 0.0);
    let decay_radii = eps_grid.iter().map(|&eps| profile.decay_radius(eps)).collect();
    Ok(PropertyIIReport {
        profile,
        bound,
        max_width,
        eps_grid: eps_grid.to_vec(),
        decay_radii,
        dominated,
        vanishes_beyond_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// 1-based schedule index.
    pub k: usize,
    #[serde(rename = "R")]
    pub radius: u32,
    /// `sup_{d(s,t) < R} |u_k(s,t) − 1|`.
    pub sup_dev: f64,
    /// `max_{l(g) < R} ‖T_k(λ_g) − λ_g‖` on the interior.
    pub op_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `sup_dev ≤ op_dev` in every row.
    pub dominated: bool,
    /// `sup_dev` is non-increasing in `k` for each `R`.
    pub monotone: bool,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,R,sup_dev,op_dev\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", row.k, row.radius, row.sup_dev, row.op_dev);
        }
        out
    }
}

/// Spectral norm, short-circuited for matrices with at most one nonzero
/// per row and column, whose norm is their largest entry.
fn operator_norm(m: &DMatrix<C64>) -> f64 {
    let zero = C64::new(0.0, 0.0);
    let sparse_rows = m.row_iter().all(|r| r.iter().filter(|&&z| z != zero).count() <= 1);
    let sparse_cols = m.column_iter().all(|c| c.iter().filter(|&&z| z != zero).count() <= 1);
    if sparse_rows && sparse_cols {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        spectral_norm(m)
    }
}

fn convergence_rows(map: &CpMap, k: usize, ball: &Arc<GroupBall>, radii: &[u32]) -> Result<Vec<ConvergenceRow>> {
    let u = induced_kernel(map, ball)?.kernel;
    let max_radius = radii.iter().copied().max().unwrap_or(0);
    // deviation[i] = ‖T(λ_g) − λ_g‖ for the i-th element, up to length max_radius − 1
    let count = if max_radius == 0 {
        0
    } else {
        ball.count_within(max_radius - 1).min(ball.interior_len())
    };
    let mut deviation = Vec::with_capacity(count);
    for idx in 0..count {
        let g = ball.element(idx);
        let image = apply_cp_map(map, g, ball)?.interior_block();
        let translation = apply_cp_map(&CpMap::Identity, g, ball)?.interior_block();
        deviation.push(operator_norm(&(image - translation)));
    }
    Ok(radii
        .iter()
        .map(|&radius| {
            let within = if radius == 0 { 0 } else { ball.count_within(radius - 1).min(count) };
            ConvergenceRow {
                k,
                radius,
                sup_dev: near_diagonal_deviation(&u, f64::from(radius)),
                op_dev: deviation[..within].iter().copied().fold(0.0, f64::max),
            }
        })
        .collect())
}

/// Convergence of `u_k → 1` near the diagonal, schedule indices in parallel.
pub fn verify_property_iii(schedule: &[CpMap], ball: &Arc<GroupBall>, radii: &[u32]) -> Result<ConvergenceTable> {
    if schedule.is_empty() {
        return Err(RoeError::EmptySchedule);
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(schedule.len());
    let chunk = schedule.len().div_ceil(workers);
    let per_map: Vec<Result<Vec<ConvergenceRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = schedule
            .chunks(chunk)
            .enumerate()
            .map(|(c, maps)| {
                scope.spawn(move || {
                    maps.iter()
                        .enumerate()
                        .map(|(i, m)| convergence_rows(m, c * chunk + i + 1, ball, radii))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("convergence worker panicked"))
            .collect()
    });
    let mut rows = Vec::with_capacity(schedule.len() * radii.len());
    for r in per_map {
        rows.extend(r?);
    }
    let dominated = rows
        .iter()
        .all(|row| row.sup_dev <= row.op_dev * (1.0 + DOMINANCE_RTOL));
    let monotone = radii.iter().enumerate().all(|(ri, _)| {
        let column: Vec<f64> = rows.iter().skip(ri).step_by(radii.len()).map(|r| r.sup_dev).collect();
        column.windows(2).all(|w| w[1] <= w[0])
    });
    Ok(ConvergenceTable {
        rows,
        dominated,
        monotone,
    })
}

/// Induced kernels of a schedule of maps, packaged as an approximate unit.
pub fn approximate_unit_from_maps(
    schedule: &[CpMap],
    parameters: Vec<f64>,
    ball: &Arc<GroupBall>,
    eps_grid: &[f64],
) -> Result<ApproximateUnit> {
    let members = schedule
        .iter()
        .map(|m| induced_kernel(m, ball).map(|u| u.kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(ApproximateUnit::from_family(members, parameters, eps_grid)?)
}
