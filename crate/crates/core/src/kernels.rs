//! Kernels on `X × X` and the positive-definite / negative-type calculus.
//!
//! A [`Kernel`] is a dense complex matrix attached to a [`MetricSpace`].
//! Positive definiteness is decided by the smallest eigenvalue of the
//! Hermitian part; negative type by the largest eigenvalue of `P·H·P`,
//! where `P` projects onto mean-zero coefficient vectors. Both checks
//! return a [`ClassificationReport`] whose witness reproduces any failure.
//!
//! On top of the checks sit the two directions of the equivalence between
//! proper negative-type kernels and approximate units of positive-definite
//! kernels: [`approximate_unit_from_proper`] (`h ↦ {e^{-t h}}`) and
//! [`akemann_walter_synthesize`] (`{u_λ} ↦ Σ 2ⁿ Re(1 − u_{λ_n})`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_eigen, hermitian_part, max_abs, quadratic_form, symmetric_eigen};
use crate::spaces::{Graph, MetricSpace, SpaceError};
use crate::C64;

/// Default relative tolerance for the eigenvalue tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default `ε` grid for decay radii of approximate units.
pub const DEFAULT_EPS_GRID: [f64; 4] = [0.5, 1e-1, 1e-2, 1e-3];

/// Diagonal entries below this cannot be renormalized to 1.
pub const MIN_DIAGONAL: f64 = 1e-12;

#[derive(Debug, Clone, Error)]
pub enum KernelError {
    #[error("kernel values are {rows} x {cols} but the space has {points} points")]
    Shape { rows: usize, cols: usize, points: usize },
    #[error("non-finite kernel value at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("negative-type checks need a real kernel; entry ({0}, {1}) has imaginary part {2}")]
    ComplexInput(usize, usize, f64),
    #[error("parameter t must be positive and finite, got {0}")]
    NonPositiveParameter(f64),
    #[error("kernel is not of negative type (extremal eigenvalue {})", .0.extremal_eigenvalue)]
    NotNegativeType(Box<ClassificationReport>),
    #[error("member {member} is not positive definite (extremal eigenvalue {})", .report.extremal_eigenvalue)]
    NotPositiveDefinite {
        member: usize,
        report: Box<ClassificationReport>,
    },
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("schedule must be strictly decreasing positive reals; entry {0} is {1}")]
    BadSchedule(usize, f64),
    #[error("member {member} has diagonal value {value} at point {point}, below the renormalization floor")]
    DegenerateDiagonal { member: usize, point: usize, value: f64 },
    #[error("selection failed at n = {n}: no later member has sup over B_Δ({n}) of |1 − u| ≤ 4^-{n}")]
    SelectionFailed { n: usize },
    #[error("kernels live on different spaces")]
    SpaceMismatch,
    #[error("synthesized kernel failed its negative-type postcondition")]
    Postcondition(Box<ClassificationReport>),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

/// Complex-valued function on `X × X`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    space: Arc<MetricSpace>,
    values: DMatrix<C64>,
}

impl Kernel {
    pub fn new(space: Arc<MetricSpace>, values: DMatrix<C64>) -> Result<Self> {
        let points = space.len();
        if values.nrows() != points || values.ncols() != points {
            return Err(KernelError::Shape {
                rows: values.nrows(),
                cols: values.ncols(),
                points,
            });
        }
        for j in 0..points {
            for i in 0..points {
                let z = values[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(KernelError::NonFinite(i, j));
                }
            }
        }
        Ok(Self { space, values })
    }

    pub fn from_real(space: Arc<MetricSpace>, values: DMatrix<f64>) -> Result<Self> {
        Self::new(space, values.map(|x| C64::new(x, 0.0)))
    }

    /// Real kernel `(i, j) ↦ f(i, j)`. Panics if `f` produces a non-finite value.
    pub fn from_fn(space: Arc<MetricSpace>, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = space.len();
        let values = DMatrix::from_fn(n, n, |i, j| C64::new(f(i, j), 0.0));
        Self::new(space, values).expect("kernel function must be finite")
    }

    /// The metric itself as a kernel, `h = d`.
    pub fn metric(space: Arc<MetricSpace>) -> Self {
        let d = space.distances().clone();
        Self::from_real(space, d).expect("metrics are finite")
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[(i, j)]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.values.map(|z| z.re)
    }

    /// Entrywise map, keeping the host space.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Result<Self> {
        Self::new(self.space.clone(), self.values.map(f))
    }

    /// Restriction to the listed points, in the given order.
    pub fn restrict(&self, points: &[usize]) -> Self {
        let m = points.len();
        Self {
            space: Arc::new(self.space.subspace(points)),
            values: DMatrix::from_fn(m, m, |a, b| self.values[(points[a], points[b])]),
        }
    }

    pub fn same_space(&self, other: &Kernel) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || self.space == other.space
    }

    fn require_real(&self) -> Result<DMatrix<f64>> {
        for j in 0..self.len() {
            for i in 0..self.len() {
                let im = self.values[(i, j)].im;
                if im != 0.0 {
                    return Err(KernelError::ComplexInput(i, j, im));
                }
            }
        }
        Ok(self.real_part())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    PositiveDefinite,
    NegativeType,
    GroupoidPositiveDefinite,
    GroupoidNegativeType,
    BlockPositivity,
}

/// Which condition failed, with indices into the witness' `points`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NotHermitian { i: usize, j: usize, deviation: f64 },
    NonzeroDiagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, deviation: f64 },
    /// `vector` holds `[re, im]` pairs; `value` is the quadratic form it attains.
    QuadraticForm { vector: Vec<[f64; 2]>, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Points (in the caller's indexing) spanning the checked matrix.
    pub points: Vec<usize>,
    /// Failing base point, for groupoid checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<usize>,
    pub violation: Violation,
}

impl Witness {
    /// Recomputes the violated quantity on `m`, the matrix the check ran on.
    ///
    /// Quadratic forms use the Hermitian (or symmetric) part of `m`.
    pub fn reevaluate(&self, m: &DMatrix<C64>) -> f64 {
        match &self.violation {
            Violation::NotHermitian { i, j, .. } => (m[(*i, *j)] - m[(*j, *i)].conj()).norm(),
            Violation::Asymmetric { i, j, .. } => (m[(*i, *j)] - m[(*j, *i)]).norm(),
            Violation::NonzeroDiagonal { i, .. } => m[(*i, *i)].re,
            Violation::QuadraticForm { vector, .. } => {
                let z = DVector::from_iterator(vector.len(), vector.iter().map(|p| C64::new(p[0], p[1])));
                quadratic_form(&hermitian_part(m), &z)
            }
        }
    }

    pub fn vector(&self) -> Option<DVector<C64>> {
        match &self.violation {
            Violation::QuadraticForm { vector, .. } => Some(DVector::from_iterator(
                vector.len(),
                vector.iter().map(|p| C64::new(p[0], p[1])),
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub check: CheckKind,
    pub verdict: bool,
    /// Smallest eigenvalue (PD checks) or largest eigenvalue of `PHP` (NT checks).
    pub extremal_eigenvalue: f64,
    /// Relative tolerance supplied by the caller.
    pub tolerance: f64,
    /// Absolute eigenvalue threshold derived from the tolerance.
    pub threshold: f64,
    pub witness: Option<Witness>,
}

fn to_pairs(v: &DVector<C64>) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Positive semidefiniteness of a square complex matrix.
///
/// The threshold is `tol · n · maxdiag`; when the diagonal vanishes the
/// largest entry modulus stands in for `maxdiag`.
pub(crate) fn psd_report(m: &DMatrix<C64>, tol: f64, check: CheckKind) -> ClassificationReport {
    let n = m.nrows();
    let entry_scale = max_abs(m);
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in i..n {
            let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
            if dev > worst.2 {
                worst = (i, j, dev);
            }
        }
    }
    let h = hermitian_part(m);
    let eig = hermitian_eigen(&h);
    let max_diag = (0..n).map(|i| h[(i, i)].re).fold(0.0, f64::max);
    let scale = if max_diag > 0.0 { max_diag } else { entry_scale };
    let threshold = tol * n as f64 * scale;
    let min_eig = eig.values.first().copied().unwrap_or(0.0);

    let points: Vec<usize> = (0..n).collect();
    let witness = if worst.2 > tol * entry_scale {
        Some(Witness {
            points,
            base: None,
            violation: Violation::NotHermitian {
                i: worst.0,
                j: worst.1,
                deviation: worst.2,
            },
        })
    } else if min_eig < -threshold {
        let z = eig.vector(0);
        Some(Witness {
            points,
            base: None,
            violation: Violation::QuadraticForm {
                value: quadratic_form(&h, &z),
                vector: to_pairs(&z),
            },
        })
    } else {
        None
    };
    ClassificationReport {
        check,
        verdict: witness.is_none(),
        extremal_eigenvalue: min_eig,
        tolerance: tol,
        threshold,
        witness,
    }
}

/// Conditional negativity of a real square matrix: zero diagonal,
/// symmetry, and `max eig(P S P) ≤ tol · n · max|H|`.
pub(crate) fn nt_report(m: &DMatrix<f64>, tol: f64, check: CheckKind) -> ClassificationReport {
    let n = m.nrows();
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let entry_tol = tol * scale;
    let points: Vec<usize> = (0..n).collect();

    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let centering = if n == 0 {
        DMatrix::zeros(0, 0)
    } else {
        DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
    };
    let projected = &centering * &sym * &centering;
    let projected = DMatrix::from_fn(n, n, |i, j| 0.5 * (projected[(i, j)] + projected[(j, i)]));
    let eig = symmetric_eigen(&projected);
    let max_eig = eig.values.last().copied().unwrap_or(0.0);
    let threshold = tol * n as f64 * scale;

    // First index attaining the largest |diagonal|.
    let diag = (0..n)
        .map(|i| (i, m[(i, i)]))
        .fold(None::<(usize, f64)>, |best, cur| match best {
            Some(b) if b.1.abs() >= cur.1.abs() => Some(b),
            _ => Some(cur),
        })
        .filter(|(_, v)| v.abs() > entry_tol);
    let mut asym = (0, 0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let dev = (m[(i, j)] - m[(j, i)]).abs();
            if dev > asym.2 {
                asym = (i, j, dev);
            }
        }
    }

    let violation = if let Some((i, value)) = diag {
        Some(Violation::NonzeroDiagonal { i, value })
    } else if asym.2 > entry_tol {
        Some(Violation::Asymmetric {
            i: asym.0,
            j: asym.1,
            deviation: asym.2,
        })
    } else if max_eig > threshold {
        let a = &centering * eig.vector(n - 1);
        let a = a.normalize();
        let value = (a.transpose() * &sym * &a)[(0, 0)];
        Some(Violation::QuadraticForm {
            vector: a.iter().map(|&x| [x, 0.0]).collect(),
            value,
        })
    } else {
        None
    };
    ClassificationReport {
        check,
        verdict: violation.is_none(),
        extremal_eigenvalue: max_eig,
        tolerance: tol,
        threshold,
        witness: violation.map(|violation| Witness {
            points,
            base: None,
            violation,
        }),
    }
}

/// `Σ z̄ᵢ k(xᵢ, xⱼ) zⱼ ≥ 0` over the whole point set, by eigenvalues.
pub fn check_positive_definite(k: &Kernel, tol: f64) -> Result<ClassificationReport> {
    Ok(psd_report(&k.values, tol, CheckKind::PositiveDefinite))
}

/// Zero diagonal, symmetry, and `Σ aᵢ h(xᵢ, xⱼ) aⱼ ≤ 0` for `Σ aⱼ = 0`.
pub fn check_negative_type(h: &Kernel, tol: f64) -> Result<ClassificationReport> {
    let real = h.require_real()?;
    Ok(nt_report(&real, tol, CheckKind::NegativeType))
}

/// `Φ_t = e^{−t h}`; the diagonal is set to exactly 1.
pub fn schoenberg_transform(h: &Kernel, t: f64) -> Result<Kernel> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(KernelError::NonPositiveParameter(t));
    }
    let report = check_negative_type(h, DEFAULT_TOL)?;
    if !report.verdict {
        return Err(KernelError::NotNegativeType(Box::new(report)));
    }
    Ok(exp_kernel(h, t))
}

fn exp_kernel(h: &Kernel, t: f64) -> Kernel {
    let n = h.len();
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new((-t * h.values[(i, j)].re).exp(), 0.0)
        }
    });
    Kernel {
        space: h.space.clone(),
        values,
    }
}

/// Lower and upper envelopes of `|k|` off the diagonal.
///
/// For each realized distance `r`: `lower(r) = min{|k(x,y)| : d(x,y) ≥ r}`
/// and `upper(r) = max{|k(x,y)| : d(x,y) ≥ r}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropernessProfile {
    pub radii: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PropernessProfile {
    /// Builds envelopes from `(distance, value)` samples on the given grid.
    pub(crate) fn from_samples(mut samples: Vec<(f64, f64)>, radii: Vec<f64>) -> Self {
        samples.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut lower = vec![f64::INFINITY; radii.len()];
        let mut upper = vec![0.0; radii.len()];
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut cursor = 0;
        for (slot, &r) in radii.iter().enumerate().rev() {
            while cursor < samples.len() && samples[cursor].0 >= r {
                lo = lo.min(samples[cursor].1);
                hi = hi.max(samples[cursor].1);
                cursor += 1;
            }
            lower[slot] = lo;
            upper[slot] = hi;
        }
        Self { radii, lower, upper }
    }

    fn slot(&self, r: f64) -> Option<usize> {
        self.radii.iter().position(|&x| x == r)
    }

    pub fn lower_at(&self, r: f64) -> Option<f64> {
        self.slot(r).map(|s| self.lower[s])
    }

    pub fn upper_at(&self, r: f64) -> Option<f64> {
        self.slot(r).map(|s| self.upper[s])
    }

    pub fn is_monotone(&self) -> bool {
        self.lower.windows(2).all(|w| w[0] <= w[1]) && self.upper.windows(2).all(|w| w[0] >= w[1])
    }

    /// `lower(r) > 0` for every grid radius `r ≥ from`.
    pub fn lower_positive_from(&self, from: f64) -> bool {
        self.radii
            .iter()
            .zip(&self.lower)
            .filter(|(r, _)| **r >= from)
            .all(|(_, &m)| m > 0.0)
    }

    /// Smallest grid radius with `upper(r) ≤ eps`.
    pub fn decay_radius(&self, eps: f64) -> Option<f64> {
        self.radii.iter().zip(&self.upper).find(|(_, &m)| m <= eps).map(|(r, _)| *r)
    }
}

pub fn properness_profile(k: &Kernel) -> PropernessProfile {
    let n = k.len();
    let samples = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| (k.space.distance(i, j), k.values[(i, j)].norm()))
        .collect();
    PropernessProfile::from_samples(samples, k.space.realized_distances())
}

/// `sup_{d(x,y) < R} |1 − u(x,y)|`.
pub fn near_diagonal_deviation(u: &Kernel, radius: f64) -> f64 {
    deviation_within(&u.values, &u.space, radius)
}

fn deviation_within(values: &DMatrix<C64>, space: &MetricSpace, radius: f64) -> f64 {
    let n = space.len();
    let mut sup = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if space.distance(i, j) < radius {
                sup = sup.max((C64::new(1.0, 0.0) - values[(i, j)]).norm());
            }
        }
    }
    sup
}

/// Indexed family of positive-definite kernels with its envelope tables.
#[derive(Debug, Clone)]
pub struct ApproximateUnit {
    members: Vec<Kernel>,
    parameters: Vec<f64>,
    eps_grid: Vec<f64>,
    radii: Vec<f64>,
    near_diagonal: Vec<Vec<f64>>,
    decay_radii: Vec<Vec<Option<f64>>>,
}

impl ApproximateUnit {
    /// Records the tables for an arbitrary family on one space.
    ///
    /// `parameters` labels the members (the Schoenberg `t`, or a schedule
    /// index); it is informational only.
    pub fn from_family(members: Vec<Kernel>, parameters: Vec<f64>, eps_grid: &[f64]) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(KernelError::EmptySchedule);
        };
        if members.iter().any(|m| !m.same_space(first)) {
            return Err(KernelError::SpaceMismatch);
        }
        debug_assert_eq!(members.len(), parameters.len());
        let radii = first.space.realized_distances();
        let near_diagonal = members
            .iter()
            .map(|u| radii.iter().map(|&r| near_diagonal_deviation(u, r)).collect())
            .collect();
        let decay_radii = members
            .iter()
            .map(|u| {
                let profile = properness_profile(u);
                eps_grid.iter().map(|&eps| profile.decay_radius(eps)).collect()
            })
            .collect();
        Ok(Self {
            members,
            parameters,
            eps_grid: eps_grid.to_vec(),
            radii,
            near_diagonal,
            decay_radii,
        })
    }

    pub fn members(&self) -> &[Kernel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn eps_grid(&self) -> &[f64] {
        &self.eps_grid
    }

    /// Grid of `R` values for [`Self::near_diagonal`].
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// `sup_{B_Δ(R)} |1 − u_λ|` for each grid radius `R`.
    pub fn near_diagonal(&self, member: usize) -> &[f64] {
        &self.near_diagonal[member]
    }

    /// `R(λ, ε)` for each `ε` in the grid; `None` where `|u_λ|` never drops
    /// below `ε` at realized distances.
    pub fn decay_radii(&self, member: usize) -> &[Option<f64>] {
        &self.decay_radii[member]
    }

    /// Whether every decay radius of `member` is realized on this space.
    /// `false` flags a member that does not visibly vanish off the diagonal.
    pub fn decays(&self, member: usize) -> bool {
        self.decay_radii[member].iter().all(Option::is_some)
    }
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(KernelError::EmptySchedule);
    }
    for (i, &t) in schedule.iter().enumerate() {
        let decreasing = i == 0 || t < schedule[i - 1];
        if !(t > 0.0 && t.is_finite() && decreasing) {
            return Err(KernelError::BadSchedule(i, t));
        }
    }
    Ok(())
}

/// `{Φ_t = e^{−t h}}` along a strictly decreasing schedule of `t`.
pub fn approximate_unit_from_proper(h: &Kernel, schedule: &[f64]) -> Result<ApproximateUnit> {
    approximate_unit_from_proper_with(h, schedule, &DEFAULT_EPS_GRID)
}

pub fn approximate_unit_from_proper_with(h: &Kernel, schedule: &[f64], eps_grid: &[f64]) -> Result<ApproximateUnit> {
    validate_schedule(schedule)?;
    let report = check_negative_type(h, DEFAULT_TOL)?;
    if !report.verdict {
        return Err(KernelError::NotNegativeType(Box::new(report)));
    }
    let members = schedule.iter().map(|&t| exp_kernel(h, t)).collect();
    ApproximateUnit::from_family(members, schedule.to_vec(), eps_grid)
}

/// Output of [`akemann_walter_synthesize`].
#[derive(Debug, Clone)]
pub struct Synthesis {
    /// `h_N = Σ_{n=1}^{N} 2ⁿ Re(1 − u_{λ_n})`.
    pub kernel: Kernel,
    /// Selected member indices `λ_1 < … < λ_N`.
    pub selected: Vec<usize>,
    pub report: ClassificationReport,
}

/// `u(x,y) / √(u(x,x) u(y,y))`, with the diagonal set to exactly 1.
fn renormalize(u: &Kernel, member: usize) -> Result<DMatrix<C64>> {
    let n = u.len();
    let diag: Vec<f64> = (0..n).map(|i| u.values[(i, i)].re).collect();
    if let Some((point, &value)) = diag.iter().enumerate().find(|(_, &v)| v < MIN_DIAGONAL) {
        return Err(KernelError::DegenerateDiagonal { member, point, value });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            u.values[(i, j)] / (diag[i] * diag[j]).sqrt()
        }
    }))
}

/// Builds a negative-type kernel from an approximate unit.
///
/// Members are renormalized to unit diagonal. `λ_n` is the first member
/// after `λ_{n−1}` with `sup_{B_Δ(n)} |1 − u_λ| ≤ 4^{−n}`, so the series
/// `Σ 2ⁿ Re(1 − u_{λ_n})` has tail at most `Σ 2^{−n}` on every `B_Δ(R)`.
pub fn akemann_walter_synthesize(au: &ApproximateUnit, terms: usize) -> Result<Synthesis> {
    let mut normalized = Vec::with_capacity(au.len());
    for (idx, u) in au.members.iter().enumerate() {
        let report = check_positive_definite(u, DEFAULT_TOL)?;
        if !report.verdict {
            return Err(KernelError::NotPositiveDefinite { member: idx, report: Box::new(report) });
        }
        normalized.push(renormalize(u, idx)?);
    }
    let space = au.members[0].space.clone();
    let n_points = space.len();

    let mut selected = Vec::with_capacity(terms);
    let mut start = 0;
    for n in 1..=terms {
        let rate = 4f64.powi(-(n as i32));
        let pick = (start..normalized.len())
            .find(|&idx| deviation_within(&normalized[idx], &space, n as f64) <= rate)
            .ok_or(KernelError::SelectionFailed { n })?;
        selected.push(pick);
        start = pick + 1;
    }

    let mut h = DMatrix::<f64>::zeros(n_points, n_points);
    for (n, &idx) in selected.iter().enumerate() {
        let weight = 2f64.powi(n as i32 + 1);
        let u = &normalized[idx];
        for j in 0..n_points {
            for i in 0..n_points {
                h[(i, j)] += weight * (1.0 - u[(i, j)].re);
            }
        }
    }
    let h = DMatrix::from_fn(n_points, n_points, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (h[(i, j)] + h[(j, i)])
        }
    });
    let kernel = Kernel::from_real(space, h)?;
    let report = check_negative_type(&kernel, DEFAULT_TOL)?;
    if !report.verdict {
        return Err(KernelError::Postcondition(Box::new(report)));
    }
    Ok(Synthesis {
        kernel,
        selected,
        report,
    })
}

/// Effective-resistance kernel `R(x,y) = (e_x − e_y)ᵀ L⁺ (e_x − e_y)` of a
/// connected graph, hosted on its shortest-path metric.
///
/// It is a squared Euclidean distance, hence of negative type.
pub fn resistance_kernel(graph: &Graph) -> Result<Kernel> {
    let space = Arc::new(graph.metric()?);
    let n = graph.vertex_count();
    let eig = symmetric_eigen(&graph.laplacian());
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    let floor = 1e-9 * eig.values.last().copied().unwrap_or(0.0).max(1.0);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda > floor {
            let v = eig.vector(k);
            pinv += (&v * v.transpose()) / lambda;
        }
    }
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
        }
    });
    let values = DMatrix::from_fn(n, n, |i, j| 0.5 * (values[(i, j)] + values[(j, i)]));
    Kernel::from_real(space, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::graph_metric;

    fn path(n: usize) -> Arc<MetricSpace> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Arc::new(graph_metric(n, &edges).unwrap())
    }

    fn discrete(n: usize) -> Arc<MetricSpace> {
        Arc::new(MetricSpace::new(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 })).unwrap())
    }

    #[test]
    fn constant_and_identity_kernels_are_pd() {
        let s = discrete(3);
        let ones = Kernel::from_fn(s.clone(), |_, _| 1.0);
        let r = check_positive_definite(&ones, DEFAULT_TOL).unwrap();
        assert!(r.verdict);
        assert!(r.extremal_eigenvalue.abs() < 1e-12);
        let id = Kernel::from_fn(s, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(check_positive_definite(&id, DEFAULT_TOL).unwrap().verdict);
    }

    #[test]
    fn off_diagonal_ones_fail_with_eigenvalue_minus_one() {
        let k = Kernel::from_fn(discrete(3), |i, j| if i == j { 0.0 } else { 1.0 });
        let r = check_positive_definite(&k, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        assert!((r.extremal_eigenvalue + 1.0).abs() < 1e-12);
        let w = r.witness.as_ref().unwrap();
        assert!((w.reevaluate(k.values()) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_kernel_fails() {
        let s = discrete(2);
        let k = Kernel::new(
            s,
            DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.5), C64::new(0.0, 0.5), C64::new(1.0, 0.0)]),
        )
        .unwrap();
        let r = check_positive_definite(&k, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        assert!(matches!(r.witness.unwrap().violation, Violation::NotHermitian { .. }));
    }

    #[test]
    fn negative_type_examples() {
        let zero = Kernel::from_fn(path(3), |_, _| 0.0);
        assert!(check_negative_type(&zero, DEFAULT_TOL).unwrap().verdict);

        let p3 = Kernel::metric(path(3));
        assert!(check_negative_type(&p3, DEFAULT_TOL).unwrap().verdict);

        let minus_id = Kernel::from_fn(path(3), |i, j| if i == j { -1.0 } else { 0.0 });
        let r = check_negative_type(&minus_id, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        assert!(matches!(r.witness.unwrap().violation, Violation::NonzeroDiagonal { i: 0, value } if value == -1.0));
    }

    #[test]
    fn negative_type_rejects_complex_input() {
        let k = Kernel::new(path(2), DMatrix::from_element(2, 2, C64::new(0.0, 1.0))).unwrap();
        assert!(matches!(check_negative_type(&k, DEFAULT_TOL), Err(KernelError::ComplexInput(0, 0, _))));
    }

    #[test]
    fn quadratic_form_witness_is_mean_zero_and_reproduces() {
        // -d on a path is not of negative type
        let k = Kernel::from_fn(path(4), |i, j| -((i as f64) - (j as f64)).abs());
        let r = check_negative_type(&k, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        let w = r.witness.unwrap();
        let a = w.vector().unwrap();
        assert!(a.iter().map(|z| z.re).sum::<f64>().abs() < 1e-12);
        let value = w.reevaluate(k.values());
        assert!(value > r.threshold);
        assert!((value - r.extremal_eigenvalue).abs() < 1e-9);
    }

    #[test]
    fn schoenberg_on_path() {
        let h = Kernel::metric(path(3));
        let phi = schoenberg_transform(&h, 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        let expected = [[1.0, e1, e2], [e1, 1.0, e1], [e2, e1, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                assert_eq!(phi.get(i, j).re, value);
            }
        }
        assert!(check_positive_definite(&phi, DEFAULT_TOL).unwrap().verdict);

        let zero = Kernel::from_fn(path(3), |_, _| 0.0);
        let ones = schoenberg_transform(&zero, 3.5).unwrap();
        assert!(ones.values().iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn schoenberg_errors() {
        let h = Kernel::metric(path(3));
        assert!(matches!(schoenberg_transform(&h, 0.0), Err(KernelError::NonPositiveParameter(_))));
        assert!(matches!(schoenberg_transform(&h, -1.0), Err(KernelError::NonPositiveParameter(_))));
        let bad = Kernel::from_fn(path(3), |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(matches!(schoenberg_transform(&bad, 1.0), Err(KernelError::NotNegativeType(_))));
    }

    #[test]
    fn properness_profile_examples() {
        let d = Kernel::metric(path(3));
        let p = properness_profile(&d);
        assert_eq!(p.radii, vec![1.0, 2.0]);
        assert_eq!(p.lower_at(1.0), Some(1.0));
        assert_eq!(p.lower_at(2.0), Some(2.0));

        let ones = Kernel::from_fn(path(4), |_, _| 1.0);
        let p = properness_profile(&ones);
        assert!(p.lower.iter().chain(&p.upper).all(|&v| v == 1.0));
        assert!(p.is_monotone());
    }

    #[test]
    fn approximate_unit_schedule_validation() {
        let h = Kernel::metric(path(3));
        assert!(matches!(approximate_unit_from_proper(&h, &[]), Err(KernelError::EmptySchedule)));
        assert!(matches!(approximate_unit_from_proper(&h, &[1.0, 2.0]), Err(KernelError::BadSchedule(1, _))));
        assert!(matches!(approximate_unit_from_proper(&h, &[-1.0]), Err(KernelError::BadSchedule(0, _))));
    }

    #[test]
    fn zero_kernel_family_is_flagged_as_not_decaying() {
        let zero = Kernel::from_fn(path(4), |_, _| 0.0);
        let au = approximate_unit_from_proper(&zero, &[1.0, 0.5]).unwrap();
        for m in 0..au.len() {
            assert!(au.members()[m].values().iter().all(|z| *z == C64::new(1.0, 0.0)));
            assert!(au.decay_radii(m).iter().all(Option::is_none));
            assert!(!au.decays(m));
        }
    }

    #[test]
    fn synthesis_of_constant_family_is_zero() {
        let s = path(4);
        let ones = Kernel::from_fn(s, |_, _| 1.0);
        let au = ApproximateUnit::from_family(vec![ones; 5], vec![0.0; 5], &DEFAULT_EPS_GRID).unwrap();
        let syn = akemann_walter_synthesize(&au, 3).unwrap();
        assert_eq!(syn.selected, vec![0, 1, 2]);
        assert!(syn.kernel.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn synthesis_reports_unsatisfiable_selection() {
        let h = Kernel::metric(path(4));
        let au = approximate_unit_from_proper(&h, &[1.0, 0.5]).unwrap();
        assert!(matches!(akemann_walter_synthesize(&au, 3), Err(KernelError::SelectionFailed { n: 2 })));
    }

    #[test]
    fn synthesis_rejects_non_pd_members() {
        let bad = Kernel::from_fn(path(3), |i, j| if i == j { 0.0 } else { 1.0 });
        let au = ApproximateUnit::from_family(vec![bad], vec![1.0], &DEFAULT_EPS_GRID).unwrap();
        assert!(matches!(akemann_walter_synthesize(&au, 1), Err(KernelError::NotPositiveDefinite { member: 0, .. })));
    }

    #[test]
    fn renormalization_rejects_vanishing_diagonal() {
        let k = Kernel::from_fn(path(2), |i, j| if i == j && i == 1 { 0.0 } else if i == j { 1.0 } else { 0.0 });
        let au = ApproximateUnit::from_family(vec![k], vec![1.0], &DEFAULT_EPS_GRID).unwrap();
        assert!(matches!(
            akemann_walter_synthesize(&au, 1),
            Err(KernelError::DegenerateDiagonal { member: 0, point: 1, .. })
        ));
    }

    #[test]
    fn resistance_of_path_is_the_path_metric() {
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let r = resistance_kernel(&g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((r.get(i, j).re - (i as f64 - j as f64).abs()).abs() < 1e-10);
            }
        }
        assert!(check_negative_type(&r, DEFAULT_TOL).unwrap().verdict);
    }
}
