//! JSON file formats for spaces, kernels, operators, maps and embeddings.
//!
//! A space is either given inline or as a path to a space file, resolved
//! relative to the file that references it:
//!
//! ```json
//! {"kind": "explicit", "points": ["a", "b"], "d": [[0, 1], [1, 0]]}
//! {"kind": "graph", "n": 3, "edges": [[0, 1], [1, 2]]}
//! {"kind": "free", "rank": 2, "radius": 3}
//! {"kind": "zn", "n": 1, "radius": 10}
//! {"kind": "table", "elements": ["e", "r"], "mul": [[0, 1], [1, 0]], "generators": [1], "radius": 2}
//! ```
//!
//! Kernel values are numbers or `[re, im]` pairs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::HilbertEmbedding;
use crate::groupoid::GroupoidKernel;
use crate::kernels::Kernel;
use crate::roe::{BandOperator, CpMap, Functional, RankOneTerm};
use crate::spaces::{FiniteGroup, Graph, GroupBall, GroupSpec, MetricSpace, DEFAULT_ELEMENT_CAP};
use crate::C64;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn invalid(e: impl std::fmt::Display) -> FormatError {
    FormatError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    Explicit {
        #[serde(default)]
        points: Vec<serde_json::Value>,
        d: Vec<Vec<f64>>,
    },
    Graph {
        n: usize,
        edges: Vec<[usize; 2]>,
    },
    Free {
        rank: usize,
        radius: u32,
    },
    Zn {
        n: usize,
        radius: u32,
    },
    Table {
        elements: Vec<String>,
        mul: Vec<Vec<usize>>,
        generators: Vec<usize>,
        radius: u32,
    },
}

/// Inline space or path to a space file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(String),
    Inline(SpaceSpec),
}

/// Ball enumeration settings shared by every loader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceOptions {
    /// Margin `W`; defaults to the radius.
    pub margin: Option<u32>,
    pub max_elements: usize,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        Self {
            margin: None,
            max_elements: DEFAULT_ELEMENT_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub enum LoadedSpace {
    Metric(Arc<MetricSpace>),
    Graph { graph: Graph, space: Arc<MetricSpace> },
    Ball(Arc<GroupBall>),
}

impl LoadedSpace {
    pub fn space(&self) -> &Arc<MetricSpace> {
        match self {
            LoadedSpace::Metric(s) | LoadedSpace::Graph { space: s, .. } => s,
            LoadedSpace::Ball(b) => b.space(),
        }
    }

    pub fn ball(&self) -> Option<&Arc<GroupBall>> {
        match self {
            LoadedSpace::Ball(b) => Some(b),
            _ => None,
        }
    }

    pub fn graph(&self) -> Option<&Graph> {
        match self {
            LoadedSpace::Graph { graph, .. } => Some(graph),
            _ => None,
        }
    }

    fn require_ball(&self) -> Result<&Arc<GroupBall>> {
        self.ball()
            .ok_or_else(|| invalid("this input needs a group ball (free, zn or table space)"))
    }
}

impl SpaceSpec {
    pub fn build(&self, options: SpaceOptions) -> Result<LoadedSpace> {
        let ball = |group: GroupSpec, radius: u32| -> Result<LoadedSpace> {
            let margin = options.margin.unwrap_or(radius);
            let b = GroupBall::new(group, radius, margin, options.max_elements).map_err(invalid)?;
            Ok(LoadedSpace::Ball(Arc::new(b)))
        };
        match self {
            SpaceSpec::Explicit { points, d } => {
                let n = d.len();
                if d.iter().any(|row| row.len() != n) {
                    return Err(invalid("distance matrix rows must all have length n"));
                }
                let matrix = DMatrix::from_fn(n, n, |i, j| d[i][j]);
                let space = if points.is_empty() {
                    MetricSpace::new(matrix)
                } else {
                    let labels = points
                        .iter()
                        .map(|p| p.as_str().map_or_else(|| p.to_string(), str::to_owned))
                        .collect();
                    MetricSpace::with_labels(labels, matrix)
                };
                Ok(LoadedSpace::Metric(Arc::new(space.map_err(invalid)?)))
            }
            SpaceSpec::Graph { n, edges } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                let graph = Graph::new(*n, &edges).map_err(invalid)?;
                let space = Arc::new(graph.metric().map_err(invalid)?);
                Ok(LoadedSpace::Graph { graph, space })
            }
            SpaceSpec::Free { rank, radius } => ball(GroupSpec::Free { rank: *rank }, *radius),
            SpaceSpec::Zn { n, radius } => ball(GroupSpec::Lattice { dim: *n }, *radius),
            SpaceSpec::Table {
                elements,
                mul,
                generators,
                radius,
            } => {
                let group = FiniteGroup::new(elements.clone(), mul.clone(), generators).map_err(invalid)?;
                ball(GroupSpec::Table(group), *radius)
            }
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_json(&text, path)
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|source| FormatError::Json {
        path: path.to_owned(),
        source,
    })
}

impl SpaceRef {
    /// Resolves to a spec; paths are relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<SpaceSpec> {
        match self {
            SpaceRef::Inline(spec) => Ok(spec.clone()),
            SpaceRef::Path(p) => read_json(&base_dir.join(p)),
        }
    }
}

/// Number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Complex([f64; 2]),
}

impl Value {
    pub fn to_c64(self) -> C64 {
        match self {
            Value::Real(x) => C64::new(x, 0.0),
            Value::Complex([re, im]) => C64::new(re, im),
        }
    }

    /// Real values are written as plain numbers.
    pub fn from_c64(z: C64) -> Self {
        if z.im == 0.0 {
            Value::Real(z.re)
        } else {
            Value::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub space: SpaceRef,
    pub values: Vec<Vec<Value>>,
}

fn dense_values(values: &[Vec<Value>], n: usize) -> Result<DMatrix<C64>> {
    if values.len() != n || values.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("kernel values must be {n} x {n} to match the space")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| values[i][j].to_c64()))
}

impl KernelFile {
    pub fn from_kernel(space: SpaceRef, k: &Kernel) -> Self {
        let n = k.len();
        Self {
            space,
            values: (0..n).map(|i| (0..n).map(|j| Value::from_c64(k.get(i, j))).collect()).collect(),
        }
    }

    pub fn kernel_on(&self, space: &LoadedSpace) -> Result<Kernel> {
        let s = space.space().clone();
        let values = dense_values(&self.values, s.len())?;
        Kernel::new(s, values).map_err(invalid)
    }
}

/// Reads a kernel file and builds its space.
pub fn load_kernel(path: &Path, options: SpaceOptions) -> Result<(Kernel, LoadedSpace, SpaceSpec)> {
    let file: KernelFile = read_json(path)?;
    let spec = file.space.resolve(parent(path))?;
    let space = spec.build(options)?;
    let kernel = file.kernel_on(&space)?;
    Ok((kernel, space, spec))
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandOperatorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<SpaceRef>,
    /// Prefix radius; defaults to the enumerated extent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    pub entries: Vec<(usize, usize, Value)>,
}

impl BandOperatorFile {
    pub fn from_operator(ball: Option<SpaceRef>, op: &BandOperator) -> Self {
        Self {
            ball,
            radius: Some(op.radius()),
            entries: op.entries().map(|(s, t, z)| (s, t, Value::from_c64(z))).collect(),
        }
    }

    pub fn operator_on(&self, ball: &Arc<GroupBall>) -> Result<BandOperator> {
        let radius = self.radius.unwrap_or(ball.extent());
        let entries = self.entries.iter().map(|&(s, t, v)| (s, t, v.to_c64()));
        BandOperator::from_entries(ball.clone(), radius, entries).map_err(invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOneFile {
    /// `(x, y, weight)` matrix-coefficient terms.
    pub functional: Vec<(usize, usize, Value)>,
    pub operator: BandOperatorFile,
}

/// CP map on the ball given alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CpMapFile {
    Identity,
    /// Kernel values on the ball interior.
    Schur { values: Vec<Vec<Value>> },
    FiniteRank { terms: Vec<RankOneFile> },
}

impl CpMapFile {
    pub fn build(&self, ball: &Arc<GroupBall>) -> Result<CpMap> {
        match self {
            CpMapFile::Identity => Ok(CpMap::Identity),
            CpMapFile::Schur { values } => {
                let values = dense_values(values, ball.interior_len())?;
                let kernel = Kernel::new(ball.space().clone(), values).map_err(invalid)?;
                CpMap::schur(kernel, ball).map_err(invalid)
            }
            CpMapFile::FiniteRank { terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok(RankOneTerm {
                            functional: Functional::new(
                                t.functional.iter().map(|&(x, y, w)| (x, y, w.to_c64())).collect(),
                            ),
                            operator: t.operator.operator_on(ball)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                CpMap::finite_rank(terms, ball).map_err(invalid)
            }
        }
    }
}

pub fn load_cp_map(path: &Path, ball: &Arc<GroupBall>) -> Result<CpMap> {
    read_json::<CpMapFile>(path)?.build(ball)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupoidKernelFile {
    pub space: SpaceRef,
    /// `(base, arrow, value)` over ball indices.
    pub entries: Vec<(usize, usize, Value)>,
}

impl GroupoidKernelFile {
    pub fn from_kernel(space: SpaceRef, g: &GroupoidKernel) -> Self {
        Self {
            space,
            entries: g.entries().map(|(x, t, z)| (x, t, Value::from_c64(z))).collect(),
        }
    }
}

pub fn load_groupoid_kernel(path: &Path, options: SpaceOptions) -> Result<(GroupoidKernel, Arc<GroupBall>, SpaceSpec)> {
    let file: GroupoidKernelFile = read_json(path)?;
    let spec = file.space.resolve(parent(path))?;
    let loaded = spec.build(options)?;
    let ball = loaded.require_ball()?.clone();
    let entries = file.entries.iter().map(|&(x, t, v)| (x, t, v.to_c64()));
    let g = GroupoidKernel::new(ball.clone(), entries).map_err(invalid)?;
    Ok((g, ball, spec))
}

/// Loads a space file that must describe a group ball.
pub fn load_ball(path: &Path, options: SpaceOptions) -> Result<(Arc<GroupBall>, SpaceSpec)> {
    let spec: SpaceSpec = read_json(path)?;
    let ball = spec.build(options)?.require_ball()?.clone();
    Ok((ball, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFile {
    pub space: SpaceRef,
    pub dim: usize,
    pub coords: Vec<Vec<f64>>,
}

impl EmbeddingFile {
    pub fn from_embedding(space: SpaceRef, f: &HilbertEmbedding) -> Self {
        Self {
            space,
            dim: f.dim(),
            coords: (0..f.space().len()).map(|i| f.point(i)).collect(),
        }
    }

    pub fn embedding_on(&self, space: &LoadedSpace) -> Result<HilbertEmbedding> {
        if self.coords.iter().any(|r| r.len() != self.dim) {
            return Err(invalid(format!("every coordinate row must have length {}", self.dim)));
        }
        HilbertEmbedding::from_rows(space.space().clone(), &self.coords).map_err(invalid)
    }
}
