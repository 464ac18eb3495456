//! The end-to-end chain on one space.
//!
//! Stages, each checked before the next one runs:
//!
//! 1. `proper-nt`: a proper negative-type kernel `h` (the metric itself, or
//!    the effective resistance of a graph), with a strictly positive lower
//!    envelope off the diagonal;
//! 2. `schoenberg`: `Φ_k = e^{−t_k h}` for `t_k = 2^{−k}`, each member
//!    positive definite;
//! 3. `akemann-walter`: `h_N` synthesized from that family, of negative type
//!    with a non-decreasing, strictly positive lower envelope;
//! 4. `embedding`: `h_N = ‖f(x) − f(y)‖²` with `f(basepoint) = 0`;
//! 5. `compression`: the `ρ₋` / `ρ₊` envelopes of `f`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::embeddings::{
    compression_bounds, embedding_from_negative_type, negative_type_from_embedding, CompressionProfile,
    HilbertEmbedding,
};
use crate::kernels::{
    akemann_walter_synthesize, approximate_unit_from_proper_with, check_negative_type, check_positive_definite,
    properness_profile, resistance_kernel, ApproximateUnit, Kernel, PropernessProfile, Synthesis, DEFAULT_EPS_GRID,
    DEFAULT_TOL,
};
use crate::spaces::{Graph, MetricSpace};

pub const DEFAULT_TERMS: usize = 4;
pub const DEFAULT_SCHEDULE_LEN: usize = 24;

/// Relative tolerance on `‖f(x) − f(y)‖² = h_N(x, y)`.
pub const ROUND_TRIP_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKernel {
    /// `h = d`.
    Metric,
    /// Effective resistance of a graph.
    Resistance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub base: BaseKernel,
    pub terms: usize,
    pub schedule_len: usize,
    pub basepoint: usize,
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            base: BaseKernel::Metric,
            terms: DEFAULT_TERMS,
            schedule_len: DEFAULT_SCHEDULE_LEN,
            basepoint: 0,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Error)]
#[error("stage {stage} failed: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

fn fail(stage: &'static str, message: impl std::fmt::Display) -> PipelineError {
    PipelineError {
        stage,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub stages: Vec<StageRecord>,
    pub base_kernel: Kernel,
    pub base_profile: PropernessProfile,
    pub schedule: Vec<f64>,
    pub unit: ApproximateUnit,
    pub synthesis: Synthesis,
    pub synthesized_profile: PropernessProfile,
    pub embedding: HilbertEmbedding,
    /// `max |‖f(x) − f(y)‖² − h_N(x, y)| / max |h_N|`.
    pub round_trip_error: f64,
    pub compression: CompressionProfile,
}

/// `t_k = 2^{−k}` for `k = 0..len`.
pub fn dyadic_schedule(len: usize) -> Vec<f64> {
    (0..len).map(|k| 2f64.powi(-(k as i32))).collect()
}

/// Runs every stage. `graph` is required for [`BaseKernel::Resistance`].
pub fn run_pipeline(
    space: &Arc<MetricSpace>,
    graph: Option<&Graph>,
    config: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let mut stages = Vec::new();

    let stage = "proper-nt";
    let h = match config.base {
        BaseKernel::Metric => Kernel::metric(space.clone()),
        BaseKernel::Resistance => {
            let g = graph.ok_or_else(|| fail(stage, "resistance kernels need a graph space"))?;
            resistance_kernel(g).map_err(|e| fail(stage, e))?
        }
    };
    let report = check_negative_type(&h, config.tol).map_err(|e| fail(stage, e))?;
    if !report.verdict {
        return Err(fail(stage, format!("base kernel is not of negative type (extremal eigenvalue {})", report.extremal_eigenvalue)));
    }
    let base_profile = properness_profile(&h);
    if !base_profile.lower.iter().all(|&m| m > 0.0) {
        return Err(fail(stage, "base kernel vanishes off the diagonal"));
    }
    stages.push(StageRecord {
        stage,
        passed: true,
        detail: format!("negative type, lower envelope positive on {} radii", base_profile.radii.len()),
    });

    let stage = "schoenberg";
    let schedule = dyadic_schedule(config.schedule_len);
    let unit = approximate_unit_from_proper_with(&h, &schedule, &DEFAULT_EPS_GRID).map_err(|e| fail(stage, e))?;
    for (k, member) in unit.members().iter().enumerate() {
        let r = check_positive_definite(member, config.tol).map_err(|e| fail(stage, e))?;
        if !r.verdict {
            return Err(fail(stage, format!("member {k} is not positive definite (extremal eigenvalue {})", r.extremal_eigenvalue)));
        }
    }
    stages.push(StageRecord {
        stage,
        passed: true,
        detail: format!("{} members, all positive definite", unit.len()),
    });

    let stage = "akemann-walter";
    let synthesis = akemann_walter_synthesize(&unit, config.terms).map_err(|e| fail(stage, e))?;
    let synthesized_profile = properness_profile(&synthesis.kernel);
    if !synthesized_profile.lower.windows(2).all(|w| w[0] <= w[1]) {
        return Err(fail(stage, "lower envelope decreases"));
    }
    if !synthesized_profile.lower.iter().all(|&m| m > 0.0) {
        return Err(fail(stage, "lower envelope is not strictly positive"));
    }
    stages.push(StageRecord {
        stage,
        passed: true,
        detail: format!("selected members {:?}", synthesis.selected),
    });

    let stage = "embedding";
    let embedding = embedding_from_negative_type(&synthesis.kernel, config.basepoint).map_err(|e| fail(stage, e))?;
    if embedding.point(config.basepoint).iter().any(|&x| x != 0.0) {
        return Err(fail(stage, "basepoint is not mapped to the origin"));
    }
    let back = negative_type_from_embedding(&embedding);
    let scale = synthesis.kernel.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst = (back.values() - synthesis.kernel.values())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let round_trip_error = if scale > 0.0 { worst / scale } else { worst };
    if round_trip_error > ROUND_TRIP_RTOL {
        return Err(fail(stage, format!("round-trip error {round_trip_error} exceeds {ROUND_TRIP_RTOL}")));
    }
    stages.push(StageRecord {
        stage,
        passed: true,
        detail: format!("dimension {}, relative round-trip error {round_trip_error:e}", embedding.dim()),
    });

    let stage = "compression";
    let compression = compression_bounds(&embedding);
    if !compression.is_monotone() || !compression.violations(&embedding).is_empty() {
        return Err(fail(stage, "envelopes are not monotone or do not bracket the embedding"));
    }
    stages.push(StageRecord {
        stage,
        passed: true,
        detail: format!("{} radii", compression.radii.len()),
    });

    Ok(PipelineOutcome {
        stages,
        base_kernel: h,
        base_profile,
        schedule,
        unit,
        synthesis,
        synthesized_profile,
        embedding,
        round_trip_error,
        compression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{cayley_ball, graph_metric, GroupSpec};

    #[test]
    fn integer_ball_runs_end_to_end() {
        let ball = cayley_ball(GroupSpec::Lattice { dim: 1 }, 6).unwrap();
        let out = run_pipeline(ball.space(), None, &PipelineConfig::default()).unwrap();
        assert_eq!(out.stages.len(), 5);
        assert!(out.stages.iter().all(|s| s.passed));
        assert_eq!(out.synthesis.selected.len(), DEFAULT_TERMS);
        assert!(out.round_trip_error <= ROUND_TRIP_RTOL);
        assert_eq!(out.compression.radii.len(), 12);
    }

    #[test]
    fn single_point_is_degenerate_success() {
        let ball = cayley_ball(GroupSpec::Free { rank: 2 }, 0).unwrap();
        let out = run_pipeline(ball.space(), None, &PipelineConfig::default()).unwrap();
        assert!(out.compression.radii.is_empty());
        assert!(out.synthesized_profile.radii.is_empty());
    }

    #[test]
    fn resistance_needs_a_graph() {
        let space = Arc::new(graph_metric(3, &[(0, 1), (1, 2)]).unwrap());
        let config = PipelineConfig {
            base: BaseKernel::Resistance,
            ..Default::default()
        };
        let err = run_pipeline(&space, None, &config).unwrap_err();
        assert_eq!(err.stage, "proper-nt");
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(run_pipeline(&space, Some(&g), &config).is_ok());
    }

    #[test]
    fn short_schedule_fails_in_synthesis() {
        let ball = cayley_ball(GroupSpec::Lattice { dim: 1 }, 4).unwrap();
        let config = PipelineConfig {
            schedule_len: 3,
            ..Default::default()
        };
        assert_eq!(run_pipeline(ball.space(), None, &config).unwrap_err().stage, "akemann-walter");
    }
}
