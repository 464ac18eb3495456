//! Kernels on `Γ × Γ` as functions on the transformation groupoid.
//!
//! An arrow of `βΓ ⋊ Γ` is a pair `(x, t)` of a base point and a group
//! element, joining `x · t` to `x`. Only the dense orbit `Γ` is sampled,
//! so a [`GroupoidKernel`] stores `φ(x, t)` for base points `x` in a ball
//! and arrows `t` with `x · t` in the same ball.
//!
//! `α*(f)(x, t) = f(x, x t)` and `β*(g)(s, t) = g(s, s⁻¹ t)` are mutually
//! inverse. For `φ = α*(f)` and the admissible arrows `{x⁻¹ y}` at a base
//! `x`, the per-base matrix `φ(x s_i, s_i⁻¹ s_j)` is the Gram matrix of
//! `f` with rows permuted, which is why groupoid verdicts track kernel
//! verdicts exactly.
//!
//! The arrow length `l(t)` of `(x, t)` is the left-invariant distance
//! `l(x⁻¹ · x t)` between its endpoints; envelopes in `l(t)` therefore
//! match kernel envelopes taken over the left-invariant word metric.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{
    check_negative_type, nt_report, psd_report, CheckKind, ClassificationReport, Kernel, KernelError, PropernessProfile,
    Violation, Witness, DEFAULT_TOL,
};
use crate::spaces::{GroupBall, SpaceError};
use crate::C64;

#[derive(Debug, Clone, Error)]
pub enum GroupoidError {
    #[error("kernel has {kernel} points but the ball interior has {interior}")]
    SizeMismatch { kernel: usize, interior: usize },
    #[error("index {0} is outside the {1} enumerated elements")]
    OutOfRange(usize, usize),
    #[error("arrow ({base}, {arrow}) lands outside the enumerated ball")]
    EndpointOutsideBall { base: usize, arrow: usize },
    #[error("φ is not defined at base {base}, arrow {arrow}")]
    Undefined { base: usize, arrow: usize },
    #[error("negative-type checks need real values; entry ({base}, {arrow}) has imaginary part {im}")]
    ComplexInput { base: usize, arrow: usize, im: f64 },
    #[error("no base points sampled")]
    EmptySample,
    #[error("input kernel is not of negative type (extremal eigenvalue {})", .0.extremal_eigenvalue)]
    NotNegativeType(Box<ClassificationReport>),
    #[error("α* of a negative-type kernel failed the groupoid check; this is an internal consistency failure")]
    Inconsistent(Box<ClassificationReport>),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T, E = GroupoidError> = std::result::Result<T, E>;

/// `φ(x, t)` on sampled arrows, keyed by ball indices `(x, t)`.
#[derive(Debug, Clone)]
pub struct GroupoidKernel {
    ball: Arc<GroupBall>,
    values: BTreeMap<(usize, usize), C64>,
}

impl PartialEq for GroupoidKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ball, &other.ball) && self.values == other.values
    }
}

impl GroupoidKernel {
    /// Every `(x, t)` must have `x`, `t` and `x · t` in the ball.
    pub fn new(ball: Arc<GroupBall>, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (x, t, z) in entries {
            for i in [x, t] {
                if i >= ball.len() {
                    return Err(GroupoidError::OutOfRange(i, ball.len()));
                }
            }
            if ball.product(x, t).is_err() {
                return Err(GroupoidError::EndpointOutsideBall { base: x, arrow: t });
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(GroupoidError::Kernel(KernelError::NonFinite(x, t)));
            }
            values.insert((x, t), z);
        }
        Ok(Self { ball, values })
    }

    pub fn ball(&self) -> &Arc<GroupBall> {
        &self.ball
    }

    pub fn get(&self, base: usize, arrow: usize) -> Option<C64> {
        self.values.get(&(base, arrow)).copied()
    }

    fn require(&self, base: usize, arrow: usize) -> Result<C64> {
        self.get(base, arrow).ok_or(GroupoidError::Undefined { base, arrow })
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.values.iter().map(|(&(x, t), &z)| (x, t, z))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Base points that carry at least one value.
    pub fn bases(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.values.keys().map(|k| k.0).collect();
        out.dedup();
        out
    }
}

/// `α*(f)(x, t) = f(x, x t)` for interior `x` and `x t`.
pub fn alpha_star(f: &Kernel, ball: &Arc<GroupBall>) -> Result<GroupoidKernel> {
    let n = ball.interior_len();
    if f.len() != n {
        return Err(GroupoidError::SizeMismatch {
            kernel: f.len(),
            interior: n,
        });
    }
    let group = ball.group();
    let mut values = BTreeMap::new();
    for x in 0..n {
        let x_inv = group.inverse(ball.element(x));
        for y in 0..n {
            let t = ball.locate(&group.multiply(&x_inv, ball.element(y)))?;
            values.insert((x, t), f.get(x, y));
        }
    }
    Ok(GroupoidKernel {
        ball: ball.clone(),
        values,
    })
}

/// `β*(g)(s, t) = g(s, s⁻¹ t)` on the interior, hosted on the ball's metric.
pub fn beta_star(g: &GroupoidKernel) -> Result<Kernel> {
    let ball = &g.ball;
    let group = ball.group();
    let n = ball.interior_len();
    let mut values = DMatrix::zeros(n, n);
    for s in 0..n {
        let s_inv = group.inverse(ball.element(s));
        for t in 0..n {
            let arrow = ball.locate(&group.multiply(&s_inv, ball.element(t)))?;
            values[(s, t)] = g.require(s, arrow)?;
        }
    }
    Ok(Kernel::new(ball.space().clone(), values)?)
}

/// Arrows `s_1, …, s_m` used at each sampled base point.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrowSample {
    /// At base `x`, the arrows `x⁻¹ y` for every interior `y`.
    Admissible,
    Explicit(Vec<usize>),
}

/// Arrow indices at base `x`.
fn arrows_at(ball: &GroupBall, x: usize, sample: &ArrowSample) -> Result<Vec<usize>> {
    match sample {
        ArrowSample::Admissible => {
            let group = ball.group();
            let x_inv = group.inverse(ball.element(x));
            (0..ball.interior_len())
                .map(|y| Ok(ball.locate(&group.multiply(&x_inv, ball.element(y)))?))
                .collect()
        }
        ArrowSample::Explicit(list) => {
            if let Some(&bad) = list.iter().find(|&&i| i >= ball.len()) {
                return Err(GroupoidError::OutOfRange(bad, ball.len()));
            }
            Ok(list.clone())
        }
    }
}

/// `[φ(x s_i, s_i⁻¹ s_j)]` at one base point.
fn base_matrix(phi: &GroupoidKernel, x: usize, arrows: &[usize]) -> Result<DMatrix<C64>> {
    let ball = &phi.ball;
    let m = arrows.len();
    let bases: Vec<usize> = arrows.iter().map(|&s| ball.product(x, s)).collect::<Result<_, _>>()?;
    let mut out = DMatrix::zeros(m, m);
    for (i, &si) in arrows.iter().enumerate() {
        let si_inv = ball.inverse(si);
        for (j, &sj) in arrows.iter().enumerate() {
            let arrow = ball.product(si_inv, sj)?;
            out[(i, j)] = phi.require(bases[i], arrow)?;
        }
    }
    Ok(out)
}

/// Runs `check` at every base point in parallel and keeps the first
/// failure, or else the base with the most extreme eigenvalue.
fn per_base(
    phi: &GroupoidKernel,
    bases: &[usize],
    arrows: &ArrowSample,
    worst_is_low: bool,
    check: impl Fn(usize, &[usize], DMatrix<C64>) -> Result<ClassificationReport> + Sync,
) -> Result<ClassificationReport> {
    if bases.is_empty() {
        return Err(GroupoidError::EmptySample);
    }
    if let Some(&bad) = bases.iter().find(|&&x| x >= phi.ball.len()) {
        return Err(GroupoidError::OutOfRange(bad, phi.ball.len()));
    }
    let run = |x: usize| -> Result<ClassificationReport> {
        let list = arrows_at(&phi.ball, x, arrows)?;
        let matrix = base_matrix(phi, x, &list)?;
        let mut report = check(x, &list, matrix)?;
        if let Some(w) = report.witness.as_mut() {
            w.base = Some(x);
            w.points = list;
        }
        Ok(report)
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(bases.len());
    let chunk = bases.len().div_ceil(workers);
    let reports: Vec<Result<ClassificationReport>> = std::thread::scope(|scope| {
        let run = &run;
        let handles: Vec<_> = bases
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&x| run(x)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("groupoid worker panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(failed) = reports.iter().find(|r| !r.verdict) {
        return Ok(failed.clone());
    }
    let pick = |a: &&ClassificationReport, b: &&ClassificationReport| {
        let (x, y) = (a.extremal_eigenvalue, b.extremal_eigenvalue);
        if worst_is_low {
            y.total_cmp(&x)
        } else {
            x.total_cmp(&y)
        }
    };
    Ok(reports.iter().max_by(pick).expect("non-empty").clone())
}

/// Positivity of `[φ(x s_i, s_i⁻¹ s_j)]` at every sampled base `x`.
pub fn check_groupoid_pd(
    phi: &GroupoidKernel,
    bases: &[usize],
    arrows: &ArrowSample,
    tol: f64,
) -> Result<ClassificationReport> {
    per_base(phi, bases, arrows, true, |_, _, m| {
        Ok(psd_report(&m, tol, CheckKind::GroupoidPositiveDefinite))
    })
}

/// `ψ(x, e) = 0`, `ψ(x s, s⁻¹ t) = ψ(x t, t⁻¹ s)`, and conditional
/// negativity of `[ψ(x s_i, s_i⁻¹ s_j)]` at every sampled base `x`.
///
/// The per-base matrix has `ψ(x s_i, e)` on its diagonal and its
/// symmetry is exactly the second condition; `ψ(x, e)` itself is checked
/// separately in case `e` is not among the arrows.
pub fn check_groupoid_nt(
    psi: &GroupoidKernel,
    bases: &[usize],
    arrows: &ArrowSample,
    tol: f64,
) -> Result<ClassificationReport> {
    if let Some((x, t, z)) = psi.entries().find(|e| e.2.im != 0.0) {
        return Err(GroupoidError::ComplexInput {
            base: x,
            arrow: t,
            im: z.im,
        });
    }
    let identity = psi.ball.identity_index();
    per_base(psi, bases, arrows, false, |x, _, m| {
        let real = m.map(|z| z.re);
        let mut report = nt_report(&real, tol, CheckKind::GroupoidNegativeType);
        let own = psi.require(x, identity)?.re;
        let scale = real.iter().map(|v| v.abs()).fold(own.abs(), f64::max);
        if report.verdict && own.abs() > tol * scale {
            report.verdict = false;
            report.witness = Some(Witness {
                points: Vec::new(),
                base: Some(x),
                violation: Violation::NonzeroDiagonal { i: identity, value: own },
            });
        }
        Ok(report)
    })
}

/// Envelopes of `|φ(x, t)|` in the arrow length `l(t)` over the given
/// bases, excluding the identity arrow. Radii are the realized lengths.
pub fn arrow_profile(phi: &GroupoidKernel, bases: &[usize]) -> PropernessProfile {
    let ball = &phi.ball;
    let samples: Vec<(f64, f64)> = bases
        .iter()
        .flat_map(|&x| phi.values.range((x, 0)..(x + 1, 0)))
        .filter(|((_, t), _)| *t != ball.identity_index())
        .map(|(&(_, t), z)| (f64::from(ball.length(t)), z.norm()))
        .collect();
    let mut radii: Vec<f64> = samples.iter().map(|s| s.0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    PropernessProfile::from_samples(samples, radii)
}

/// `sup{|1 − φ(x, t)| : l(t) < R}` over the given bases.
pub fn arrow_near_diagonal_deviation(phi: &GroupoidKernel, bases: &[usize], radius: f64) -> f64 {
    let one = C64::new(1.0, 0.0);
    bases
        .iter()
        .flat_map(|&x| phi.values.range((x, 0)..(x + 1, 0)))
        .filter(|((_, t), _)| f64::from(phi.ball.length(*t)) < radius)
        .map(|(_, z)| (one - z).norm())
        .fold(0.0, f64::max)
}

/// Negative-type verdict on the groupoid plus growth of `ψ = α*(h)` in `l(t)`.
#[derive(Debug, Clone, Serialize)]
pub struct HaagerupCertificate {
    pub nt_verdict: bool,
    pub nt_report: ClassificationReport,
    /// `lower[l] = m(l) = min{|ψ(x,t)| : x sampled, l(t) ≥ l}`.
    pub properness_profile: PropernessProfile,
    pub sampled_bases: Vec<usize>,
    /// `m(l) > 0` for every realized length and `m` grows from the first
    /// length to the last: the finite-scale form of properness.
    pub proper_growth: bool,
}

/// `bases = None` samples every interior point.
pub fn haagerup_certificate(h: &Kernel, ball: &Arc<GroupBall>, bases: Option<&[usize]>) -> Result<HaagerupCertificate> {
    let report = check_negative_type(h, DEFAULT_TOL)?;
    if !report.verdict {
        return Err(GroupoidError::NotNegativeType(Box::new(report)));
    }
    let psi = alpha_star(h, ball)?;
    let all: Vec<usize> = (0..ball.interior_len()).collect();
    let bases = bases.unwrap_or(&all);
    let nt = check_groupoid_nt(&psi, bases, &ArrowSample::Admissible, DEFAULT_TOL)?;
    if !nt.verdict {
        return Err(GroupoidError::Inconsistent(Box::new(nt)));
    }
    let profile = arrow_profile(&psi, bases);
    let positive = profile.lower.iter().all(|&m| m > 0.0);
    let grows = match (profile.lower.first(), profile.lower.last()) {
        (Some(a), Some(b)) if profile.lower.len() > 1 => b > a,
        _ => true,
    };
    Ok(HaagerupCertificate {
        nt_verdict: nt.verdict,
        nt_report: nt,
        proper_growth: positive && grows && profile.is_monotone(),
        properness_profile: profile,
        sampled_bases: bases.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{check_positive_definite, properness_profile, schoenberg_transform};
    use crate::spaces::{cayley_ball, Element, GroupSpec};

    fn z_ball(radius: u32) -> Arc<GroupBall> {
        Arc::new(cayley_ball(GroupSpec::Lattice { dim: 1 }, radius).unwrap())
    }

    fn f2_ball(radius: u32) -> Arc<GroupBall> {
        Arc::new(cayley_ball(GroupSpec::Free { rank: 2 }, radius).unwrap())
    }

    fn interior(ball: &GroupBall) -> Vec<usize> {
        (0..ball.interior_len()).collect()
    }

    #[test]
    fn alpha_star_of_the_integer_metric_is_arrow_length() {
        let ball = z_ball(3);
        let g = alpha_star(&Kernel::metric(ball.space().clone()), &ball).unwrap();
        for (x, t, z) in g.entries() {
            assert!(x < ball.interior_len());
            assert_eq!(z, C64::new(f64::from(ball.length(t)), 0.0));
        }
        assert_eq!(g.len(), 49);
    }

    #[test]
    fn constants_pass_through() {
        let ball = f2_ball(1);
        let ones = alpha_star(&Kernel::from_fn(ball.space().clone(), |_, _| 1.0), &ball).unwrap();
        assert!(ones.entries().all(|e| e.2 == C64::new(1.0, 0.0)));
        let zero = GroupoidKernel::new(ball.clone(), ones.entries().map(|(x, t, _)| (x, t, C64::new(0.0, 0.0)))).unwrap();
        assert!(beta_star(&zero).unwrap().values().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn alpha_and_beta_are_inverse() {
        let ball = f2_ball(2);
        let f = Kernel::from_fn(ball.space().clone(), |i, j| (i * 31 + j * 7) as f64);
        let g = alpha_star(&f, &ball).unwrap();
        assert_eq!(beta_star(&g).unwrap(), f);
        assert_eq!(alpha_star(&beta_star(&g).unwrap(), &ball).unwrap(), g);
    }

    #[test]
    fn arrow_length_kernel_pulls_back_to_the_left_metric() {
        let ball = f2_ball(2);
        let entries: Vec<_> = alpha_star(&Kernel::from_fn(ball.space().clone(), |_, _| 0.0), &ball)
            .unwrap()
            .entries()
            .map(|(x, t, _)| (x, t, C64::new(f64::from(ball.length(t)), 0.0)))
            .collect();
        let g = GroupoidKernel::new(ball.clone(), entries).unwrap();
        let f = beta_star(&g).unwrap();
        let n = ball.interior_len();
        for s in 0..n {
            for t in 0..n {
                assert_eq!(f.get(s, t).re, f64::from(ball.left_distance(s, t)));
            }
        }
    }

    #[test]
    fn entries_must_stay_in_the_ball() {
        let ball = Arc::new(GroupBall::new(GroupSpec::Lattice { dim: 1 }, 1, 1, 100).unwrap());
        let two = ball.index_of(&Element::Lattice(vec![2])).unwrap();
        assert!(matches!(
            GroupoidKernel::new(ball.clone(), [(two, two, C64::new(0.0, 0.0))]),
            Err(GroupoidError::EndpointOutsideBall { .. })
        ));
    }

    #[test]
    fn positive_definite_examples() {
        let ball = f2_ball(2);
        let bases = interior(&ball);
        let ones = alpha_star(&Kernel::from_fn(ball.space().clone(), |_, _| 1.0), &ball).unwrap();
        assert!(check_groupoid_pd(&ones, &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap().verdict);

        let phi = schoenberg_transform(&Kernel::metric(ball.space().clone()), 1.0).unwrap();
        let g = alpha_star(&phi, &ball).unwrap();
        assert!(check_groupoid_pd(&g, &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap().verdict);

        let bad = Kernel::from_fn(ball.space().clone(), |i, j| if i == j { 0.0 } else { 1.0 });
        assert!(!check_positive_definite(&bad, DEFAULT_TOL).unwrap().verdict);
        let r = check_groupoid_pd(&alpha_star(&bad, &ball).unwrap(), &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        assert!(r.witness.unwrap().base.is_some());
    }

    #[test]
    fn negative_type_examples() {
        let ball = z_ball(3);
        let bases = interior(&ball);
        let zero = alpha_star(&Kernel::from_fn(ball.space().clone(), |_, _| 0.0), &ball).unwrap();
        assert!(check_groupoid_nt(&zero, &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap().verdict);
        let d = alpha_star(&Kernel::metric(ball.space().clone()), &ball).unwrap();
        assert!(check_groupoid_nt(&d, &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap().verdict);

        let shifted = GroupoidKernel::new(ball.clone(), d.entries().map(|(x, t, z)| (x, t, z + 1.0))).unwrap();
        let r = check_groupoid_nt(&shifted, &bases, &ArrowSample::Admissible, DEFAULT_TOL).unwrap();
        assert!(!r.verdict);
        assert!(matches!(r.witness.unwrap().violation, Violation::NonzeroDiagonal { .. }));
    }

    #[test]
    fn explicit_arrows_need_defined_values() {
        let ball = z_ball(2);
        let d = alpha_star(&Kernel::metric(ball.space().clone()), &ball).unwrap();
        let far = ball.index_of(&Element::Lattice(vec![4])).unwrap();
        let e = ball.identity_index();
        let r = check_groupoid_nt(&d, &[e], &ArrowSample::Explicit(vec![e, far]), DEFAULT_TOL);
        assert!(matches!(r, Err(GroupoidError::Undefined { .. }) | Err(GroupoidError::Space(_))));
        let one = ball.index_of(&Element::Lattice(vec![1])).unwrap();
        let r = check_groupoid_nt(&d, &[e], &ArrowSample::Explicit(vec![e, one]), DEFAULT_TOL).unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn arrow_profile_matches_the_left_invariant_kernel_profile() {
        for ball in [z_ball(3), f2_ball(2)] {
            let n = ball.interior_len();
            let f = Kernel::from_fn(ball.space().clone(), |i, j| if i == j { 0.0 } else { 1.0 + ((i * 5 + j * 3) % 7) as f64 });
            let left = Kernel::new(Arc::new(ball.left_invariant_space()), f.values().clone()).unwrap();
            let g = alpha_star(&f, &ball).unwrap();
            assert_eq!(arrow_profile(&g, &interior(&ball)), properness_profile(&left));
            let left_metric = Kernel::metric(left.space().clone());
            let u = schoenberg_transform(&left_metric, 0.3).unwrap();
            for r in 1..4 {
                let gu = alpha_star(&u, &ball).unwrap();
                assert_eq!(
                    arrow_near_diagonal_deviation(&gu, &(0..n).collect::<Vec<_>>(), f64::from(r)),
                    crate::kernels::near_diagonal_deviation(&u, f64::from(r))
                );
            }
        }
    }

    #[test]
    fn haagerup_certificates() {
        let ball = z_ball(4);
        let c = haagerup_certificate(&Kernel::metric(ball.space().clone()), &ball, None).unwrap();
        assert!(c.nt_verdict && c.proper_growth);
        for (l, m) in c.properness_profile.radii.iter().zip(&c.properness_profile.lower) {
            assert_eq!(l, m);
        }
        let zero = haagerup_certificate(&Kernel::from_fn(ball.space().clone(), |_, _| 0.0), &ball, None).unwrap();
        assert!(zero.nt_verdict && !zero.proper_growth);
        assert!(zero.properness_profile.lower.iter().all(|&m| m == 0.0));

        let not_nt = Kernel::from_fn(ball.space().clone(), |i, j| if i == j { 0.0 } else { -1.0 });
        assert!(matches!(
            haagerup_certificate(&not_nt, &ball, None),
            Err(GroupoidError::NotNegativeType(_))
        ));
    }
}
