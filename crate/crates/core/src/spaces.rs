//! Finite discrete metric spaces.
//!
//! Three sources are supported: an explicit distance matrix (validated
//! axiom by axiom), the shortest-path metric of a connected graph, and
//! word-metric balls `B(N)` in a free group, in `ℤⁿ`, or in a finite group
//! given by its multiplication table.
//!
//! A [`GroupBall`] of radius `N` is enumerated out to `N + W`, where `W` is
//! the margin. The interior `B(N)` is the metric space everything else
//! runs on; the shell between `N` and `N + W` only exists so that products
//! of interior elements can be looked up. Products that land outside the
//! enumerated ball are rejected with [`SpaceError::OutsideMargin`].

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

/// Default cap on the number of enumerated group elements.
pub const DEFAULT_ELEMENT_CAP: usize = 200_000;

/// Relative slack allowed in the triangle inequality for real-valued metrics.
const TRIANGLE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("space has no points")]
    Empty,
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{labels} labels supplied for a {size}-point matrix")]
    LabelMismatch { labels: usize, size: usize },
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("nonzero diagonal entry d({0}, {0}) = {1}")]
    NonzeroDiagonal(usize, f64),
    #[error("negative entry at ({0}, {1})")]
    Negative(usize, usize),
    #[error("asymmetry at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distinct points ({0}, {1}) at distance zero")]
    ZeroDistance(usize, usize),
    #[error("triangle violation ({0}, {1}, {2}): d({0},{2}) > d({0},{1}) + d({1},{2})")]
    Triangle(usize, usize, usize),
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: vertex {0} is unreachable from vertex 0")]
    Disconnected(usize),
    #[error("ball enumeration exceeds the element cap of {cap}")]
    ElementCap { cap: usize },
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("product of length {length} leaves the enumerated ball of radius {limit}")]
    OutsideMargin { length: u32, limit: u32 },
}

pub type Result<T, E = SpaceError> = std::result::Result<T, E>;

/// Finite point set with a validated metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    dist: DMatrix<f64>,
}

impl MetricSpace {
    /// Validates `matrix` and attaches labels `"0"`, `"1"`, ...
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let labels = (0..matrix.nrows()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, matrix)
    }

    pub fn with_labels(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        check_metric_axioms(&matrix)?;
        if labels.len() != matrix.nrows() {
            return Err(SpaceError::LabelMismatch {
                labels: labels.len(),
                size: matrix.nrows(),
            });
        }
        Ok(Self {
            labels,
            dist: matrix,
        })
    }

    /// Constructor for metrics that are correct by construction (graph
    /// and word metrics). Tests re-validate these.
    fn trusted(labels: Vec<String>, dist: DMatrix<f64>) -> Self {
        debug_assert_eq!(labels.len(), dist.nrows());
        Self { labels, dist }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted distinct off-diagonal distances.
    pub fn realized_distances(&self) -> Vec<f64> {
        let n = self.len();
        let mut out: Vec<f64> = Vec::with_capacity(n * n / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.dist[(i, j)]);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Restriction to the listed points, in the given order. Indices must be distinct.
    pub fn subspace(&self, points: &[usize]) -> Self {
        let labels = points.iter().map(|&i| self.labels[i].clone()).collect();
        let m = points.len();
        Self::trusted(labels, DMatrix::from_fn(m, m, |a, b| self.dist[(points[a], points[b])]))
    }

    /// `B_Δ(R) = {(x, y) : d(x, y) < R}`.
    pub fn diagonal_neighborhood(&self, radius: f64) -> DiagonalNeighborhood<'_> {
        let n = self.len();
        let pairs = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.dist[(i, j)] < radius)
            .collect();
        DiagonalNeighborhood {
            space: self,
            radius,
            pairs,
        }
    }
}

/// Checks the metric axioms and returns the first violation found.
///
/// Order of checks: shape, finiteness, diagonal, sign, symmetry,
/// separation, triangle inequality.
pub fn validate_metric(matrix: DMatrix<f64>) -> Result<MetricSpace> {
    MetricSpace::new(matrix)
}

fn check_metric_axioms(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(SpaceError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Err(SpaceError::Empty);
    }
    for i in 0..n {
        for j in 0..n {
            if !m[(i, j)].is_finite() {
                return Err(SpaceError::NonFinite(i, j));
            }
        }
    }
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return Err(SpaceError::NonzeroDiagonal(i, m[(i, i)]));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] < 0.0 {
                return Err(SpaceError::Negative(i, j));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(SpaceError::Asymmetric(i, j));
            }
            if m[(i, j)] == 0.0 {
                return Err(SpaceError::ZeroDistance(i, j));
            }
        }
    }
    let slack = TRIANGLE_RTOL * m.iter().copied().fold(0.0, f64::max);
    for x in 0..n {
        for y in 0..n {
            let dxy = m[(x, y)];
            for z in 0..n {
                if m[(x, z)] > dxy + m[(y, z)] + slack {
                    return Err(SpaceError::Triangle(x, y, z));
                }
            }
        }
    }
    Ok(())
}

/// The pair set `B_Δ(R)` of a space.
#[derive(Debug, Clone)]
pub struct DiagonalNeighborhood<'a> {
    pub space: &'a MetricSpace,
    pub radius: f64,
    pub pairs: Vec<(usize, usize)>,
}

impl DiagonalNeighborhood<'_> {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.space.distance(i, j) < self.radius
    }
}

/// Simple undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Edges are normalized to `(min, max)`; self-loops and repeated
    /// edges are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(SpaceError::VertexOutOfRange(u, v, n));
            }
            if u == v {
                return Err(SpaceError::SelfLoop(u));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(SpaceError::DuplicateEdge(e.0, e.1));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
            normalized.push(e);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n,
            edges: normalized,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Common degree if every vertex has the same degree.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree(0);
        self.adjacency.iter().all(|a| a.len() == d).then_some(d)
    }

    /// Breadth-first distances from `source`; `None` for unreachable vertices.
    pub fn bfs(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    /// Shortest-path metric with unit edge weights.
    pub fn metric(&self) -> Result<MetricSpace> {
        if let Some(v) = self.bfs(0).iter().position(Option::is_none) {
            return Err(SpaceError::Disconnected(v));
        }
        let mut dist = DMatrix::zeros(self.n, self.n);
        for s in 0..self.n {
            for (t, d) in self.bfs(s).into_iter().enumerate() {
                dist[(s, t)] = f64::from(d.expect("connected"));
            }
        }
        let labels = (0..self.n).map(|i| i.to_string()).collect();
        Ok(MetricSpace::trusted(labels, dist))
    }

    /// Combinatorial Laplacian `L = D − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            l[(u, v)] -= 1.0;
            l[(v, u)] -= 1.0;
            l[(u, u)] += 1.0;
            l[(v, v)] += 1.0;
        }
        l
    }
}

/// Shortest-path metric of a connected simple graph on `n` vertices.
pub fn graph_metric(n: usize, edges: &[(usize, usize)]) -> Result<MetricSpace> {
    Graph::new(n, edges)?.metric()
}

/// Normal form of a group element.
///
/// Free-group words use letters `±(i + 1)` for generator `i` and are kept
/// freely reduced; lattice points are coordinate vectors; table elements
/// are row indices into the multiplication table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Word(Vec<i32>),
    Lattice(Vec<i64>),
    Table(usize),
}

/// Finite group given by a multiplication table and a generating set.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    labels: Vec<String>,
    mul: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
    lengths: Vec<u32>,
}

impl FiniteGroup {
    /// Validates the table (closure, Latin square, identity, associativity)
    /// and computes word lengths for the symmetrized generating set.
    pub fn new(labels: Vec<String>, mul: Vec<Vec<usize>>, generators: &[usize]) -> Result<Self> {
        let n = labels.len();
        let invalid = |msg: String| Err(SpaceError::InvalidGroup(msg));
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        if mul.len() != n || mul.iter().any(|row| row.len() != n) {
            return invalid(format!("multiplication table must be {n} x {n}"));
        }
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != n {
            return invalid("element labels are not distinct".into());
        }
        for (i, row) in mul.iter().enumerate() {
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return invalid(format!("entry {bad} in row {i} is not an element index"));
            }
            let mut seen = vec![false; n];
            for &x in row {
                if std::mem::replace(&mut seen[x], true) {
                    return invalid(format!("row {i} repeats element {x}"));
                }
            }
        }
        for j in 0..n {
            let mut seen = vec![false; n];
            for row in &mul {
                if std::mem::replace(&mut seen[row[j]], true) {
                    return invalid(format!("column {j} repeats element {}", row[j]));
                }
            }
        }
        let Some(identity) = (0..n).find(|&e| (0..n).all(|x| mul[e][x] == x && mul[x][e] == x))
        else {
            return invalid("no identity element".into());
        };
        for a in 0..n {
            for b in 0..n {
                let ab = mul[a][b];
                for c in 0..n {
                    if mul[ab][c] != mul[a][mul[b][c]] {
                        return invalid(format!("not associative at ({a}, {b}, {c})"));
                    }
                }
            }
        }
        let inverse: Vec<usize> = (0..n)
            .map(|a| (0..n).find(|&b| mul[a][b] == identity).expect("Latin square"))
            .collect();
        if let Some(&g) = generators.iter().find(|&&g| g >= n) {
            return invalid(format!("generator {g} is not an element index"));
        }
        let mut gens: Vec<usize> = generators
            .iter()
            .flat_map(|&g| [g, inverse[g]])
            .filter(|&g| g != identity)
            .collect();
        gens.sort_unstable();
        gens.dedup();

        let mut lengths = vec![u32::MAX; n];
        lengths[identity] = 0;
        let mut queue = VecDeque::from([identity]);
        while let Some(x) = queue.pop_front() {
            for &g in &gens {
                let y = mul[x][g];
                if lengths[y] == u32::MAX {
                    lengths[y] = lengths[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        if let Some(x) = lengths.iter().position(|&l| l == u32::MAX) {
            return invalid(format!(
                "generators do not generate the group (element {} unreachable)",
                labels[x]
            ));
        }
        Ok(Self {
            labels,
            mul,
            identity,
            inverse,
            generators: gens,
            lengths,
        })
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Group with solvable word problem and a fixed symmetric generating set.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupSpec {
    /// Free group on `rank` standard generators.
    Free { rank: usize },
    /// `ℤⁿ` with the standard basis as generators (ℓ¹ word metric).
    Lattice { dim: usize },
    /// Finite group from a multiplication table.
    Table(FiniteGroup),
}

impl GroupSpec {
    fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Free { rank: 0 } => Err(SpaceError::InvalidGroup("free group of rank 0".into())),
            GroupSpec::Lattice { dim: 0 } => Err(SpaceError::InvalidGroup("lattice of dimension 0".into())),
            _ => Ok(()),
        }
    }

    pub fn identity(&self) -> Element {
        match self {
            GroupSpec::Free { .. } => Element::Word(Vec::new()),
            GroupSpec::Lattice { dim } => Element::Lattice(vec![0; *dim]),
            GroupSpec::Table(t) => Element::Table(t.identity),
        }
    }

    /// Symmetric generating set (closed under inverses, identity excluded).
    pub fn generators(&self) -> Vec<Element> {
        match self {
            GroupSpec::Free { rank } => (1..=*rank as i32)
                .flat_map(|g| [Element::Word(vec![g]), Element::Word(vec![-g])])
                .collect(),
            GroupSpec::Lattice { dim } => (0..*dim)
                .flat_map(|axis| {
                    [1, -1].map(|sign| {
                        let mut v = vec![0; *dim];
                        v[axis] = sign;
                        Element::Lattice(v)
                    })
                })
                .collect(),
            GroupSpec::Table(t) => t.generators.iter().map(|&g| Element::Table(g)).collect(),
        }
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        match (self, a, b) {
            (GroupSpec::Free { .. }, Element::Word(x), Element::Word(y)) => {
                let mut w = x.clone();
                for &letter in y {
                    if w.last() == Some(&-letter) {
                        w.pop();
                    } else {
                        w.push(letter);
                    }
                }
                Element::Word(w)
            }
            (GroupSpec::Lattice { .. }, Element::Lattice(x), Element::Lattice(y)) => {
                Element::Lattice(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (GroupSpec::Table(t), Element::Table(x), Element::Table(y)) => Element::Table(t.mul[*x][*y]),
            _ => panic!("element does not belong to this group"),
        }
    }

    pub fn inverse(&self, a: &Element) -> Element {
        match (self, a) {
            (GroupSpec::Free { .. }, Element::Word(x)) => Element::Word(x.iter().rev().map(|l| -l).collect()),
            (GroupSpec::Lattice { .. }, Element::Lattice(x)) => Element::Lattice(x.iter().map(|p| -p).collect()),
            (GroupSpec::Table(t), Element::Table(x)) => Element::Table(t.inverse[*x]),
            _ => panic!("element does not belong to this group"),
        }
    }

    /// Word length with respect to the generating set.
    pub fn length(&self, a: &Element) -> u32 {
        match (self, a) {
            (GroupSpec::Free { .. }, Element::Word(x)) => x.len() as u32,
            (GroupSpec::Lattice { .. }, Element::Lattice(x)) => x.iter().map(|p| p.unsigned_abs() as u32).sum(),
            (GroupSpec::Table(t), Element::Table(x)) => t.lengths[*x],
            _ => panic!("element does not belong to this group"),
        }
    }

    pub fn label(&self, a: &Element) -> String {
        match (self, a) {
            (GroupSpec::Free { rank }, Element::Word(x)) => {
                if x.is_empty() {
                    return "e".into();
                }
                if *rank <= 26 {
                    x.iter()
                        .map(|&l| {
                            let c = (b'a' + (l.unsigned_abs() - 1) as u8) as char;
                            if l < 0 { c.to_ascii_uppercase() } else { c }
                        })
                        .collect()
                } else {
                    let parts: Vec<String> = x
                        .iter()
                        .map(|&l| if l < 0 { format!("G{}", -l) } else { format!("g{l}") })
                        .collect();
                    parts.join(".")
                }
            }
            (GroupSpec::Lattice { .. }, Element::Lattice(x)) => {
                if x.len() == 1 {
                    x[0].to_string()
                } else {
                    let parts: Vec<String> = x.iter().map(i64::to_string).collect();
                    format!("({})", parts.join(","))
                }
            }
            (GroupSpec::Table(t), Element::Table(x)) => t.labels[*x].clone(),
            _ => panic!("element does not belong to this group"),
        }
    }
}

/// Word-metric ball `B(N)` enumerated out to `N + W`.
///
/// Elements are sorted by `(length, normal form)`, so the interior `B(N)`
/// is the prefix `0..interior_len()` and every `B(r)` is a prefix too.
#[derive(Debug, Clone)]
pub struct GroupBall {
    group: GroupSpec,
    radius: u32,
    margin: u32,
    elements: Vec<Element>,
    lengths: Vec<u32>,
    index: HashMap<Element, usize>,
    interior: usize,
    space: Arc<MetricSpace>,
}

impl GroupBall {
    pub fn new(group: GroupSpec, radius: u32, margin: u32, cap: usize) -> Result<Self> {
        group.validate()?;
        let extent = radius
            .checked_add(margin)
            .ok_or_else(|| SpaceError::InvalidGroup("radius + margin overflows".into()))?;
        let generators = group.generators();
        let identity = group.identity();
        let mut found: HashMap<Element, u32> = HashMap::from([(identity.clone(), 0)]);
        let mut frontier = vec![identity];
        for k in 1..=extent {
            let mut next = Vec::new();
            for s in &frontier {
                for g in &generators {
                    let sg = group.multiply(s, g);
                    if !found.contains_key(&sg) {
                        found.insert(sg.clone(), k);
                        next.push(sg);
                        if found.len() > cap {
                            return Err(SpaceError::ElementCap { cap });
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let mut entries: Vec<(u32, Element)> = found.into_iter().map(|(e, l)| (l, e)).collect();
        entries.sort();
        let interior = entries.partition_point(|(l, _)| *l <= radius);
        let (lengths, elements): (Vec<u32>, Vec<Element>) = entries.into_iter().unzip();
        let index = elements.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();

        let labels = elements[..interior].iter().map(|e| group.label(e)).collect();
        let mut dist = DMatrix::zeros(interior, interior);
        for i in 0..interior {
            for j in (i + 1)..interior {
                let st_inv = group.multiply(&elements[i], &group.inverse(&elements[j]));
                let d = f64::from(group.length(&st_inv));
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        let space = Arc::new(MetricSpace::trusted(labels, dist));
        Ok(Self {
            group,
            radius,
            margin,
            elements,
            lengths,
            index,
            interior,
            space,
        })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn margin(&self) -> u32 {
        self.margin
    }

    /// Radius out to which elements were enumerated (`N + W`).
    pub fn extent(&self) -> u32 {
        self.radius + self.margin
    }

    /// Number of enumerated elements, margin shell included.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn interior_len(&self) -> usize {
        self.interior
    }

    /// Number of enumerated elements of length at most `r`.
    pub fn count_within(&self, r: u32) -> usize {
        self.lengths.partition_point(|&l| l <= r)
    }

    pub fn element(&self, i: usize) -> &Element {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn length(&self, i: usize) -> u32 {
        self.lengths[i]
    }

    pub fn index_of(&self, e: &Element) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    /// Index of an arbitrary element, or the margin error naming its length.
    pub fn locate(&self, e: &Element) -> Result<usize> {
        self.index_of(e).ok_or_else(|| SpaceError::OutsideMargin {
            length: self.group.length(e),
            limit: self.extent(),
        })
    }

    pub fn product(&self, i: usize, j: usize) -> Result<usize> {
        self.locate(&self.group.multiply(&self.elements[i], &self.elements[j]))
    }

    /// Index of `s⁻¹`; the ball is closed under inversion.
    pub fn inverse(&self, i: usize) -> usize {
        self.index[&self.group.inverse(&self.elements[i])]
    }

    /// `s · t⁻¹` as a normal form (never fails; the result may lie outside the ball).
    pub fn quotient_element(&self, s: usize, t: usize) -> Element {
        self.group.multiply(&self.elements[s], &self.group.inverse(&self.elements[t]))
    }

    /// Right-invariant word metric `d(s, t) = l(s t⁻¹)`.
    pub fn distance(&self, s: usize, t: usize) -> u32 {
        self.group.length(&self.quotient_element(s, t))
    }

    /// Left-invariant word metric `l(s⁻¹ t)`.
    pub fn left_distance(&self, s: usize, t: usize) -> u32 {
        let g = self.group.multiply(&self.group.inverse(&self.elements[s]), &self.elements[t]);
        self.group.length(&g)
    }

    /// The interior `B(N)` with the right-invariant word metric.
    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    /// The interior `B(N)` with the left-invariant word metric `l(s⁻¹t)`.
    pub fn left_invariant_space(&self) -> MetricSpace {
        let n = self.interior;
        let dist = DMatrix::from_fn(n, n, |i, j| f64::from(self.left_distance(i, j)));
        MetricSpace::trusted(self.space.labels.clone(), dist)
    }

    /// Number of interior elements of each length `0..=N`.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.radius as usize + 1];
        for &l in &self.lengths[..self.interior] {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Ball of radius `radius` with margin equal to the radius, so that every
/// product `s t⁻¹` of interior elements is enumerated.
pub fn cayley_ball(group: GroupSpec, radius: u32) -> Result<GroupBall> {
    GroupBall::new(group, radius, radius, DEFAULT_ELEMENT_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn two_point_metric_is_valid() {
        let s = validate_metric(m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.distance(0, 1), 1.0);
    }

    #[test]
    fn asymmetry_is_reported_with_witness() {
        let err = validate_metric(m(&[&[0.0, 1.0], &[2.0, 0.0]])).unwrap_err();
        assert_eq!(err, SpaceError::Asymmetric(0, 1));
    }

    #[test]
    fn triangle_violation_is_reported_with_triple() {
        let err = validate_metric(m(&[&[0.0, 1.0, 3.0], &[1.0, 0.0, 1.0], &[3.0, 1.0, 0.0]])).unwrap_err();
        assert_eq!(err, SpaceError::Triangle(0, 1, 2));
    }

    #[test]
    fn other_axiom_violations() {
        assert_eq!(
            validate_metric(m(&[&[1.0, 1.0], &[1.0, 0.0]])).unwrap_err(),
            SpaceError::NonzeroDiagonal(0, 1.0)
        );
        assert_eq!(
            validate_metric(m(&[&[0.0, -1.0], &[-1.0, 0.0]])).unwrap_err(),
            SpaceError::Negative(0, 1)
        );
        assert_eq!(
            validate_metric(m(&[&[0.0, 0.0], &[0.0, 0.0]])).unwrap_err(),
            SpaceError::ZeroDistance(0, 1)
        );
        assert_eq!(
            validate_metric(m(&[&[0.0, f64::NAN], &[1.0, 0.0]])).unwrap_err(),
            SpaceError::NonFinite(0, 1)
        );
        assert_eq!(
            validate_metric(DMatrix::zeros(2, 3)).unwrap_err(),
            SpaceError::NotSquare { rows: 2, cols: 3 }
        );
    }

    #[test]
    fn graph_metrics() {
        let path = graph_metric(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.distance(0, 2), 2.0);

        let cycle = graph_metric(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(cycle.distance(0, 2), 2.0);
        assert_eq!(cycle.distance(0, 1), 1.0);

        let k4 = graph_metric(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k4.distance(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn disconnected_graph_names_stranded_vertex() {
        assert_eq!(graph_metric(3, &[(0, 1)]).unwrap_err(), SpaceError::Disconnected(2));
        assert_eq!(Graph::new(2, &[(0, 0)]).unwrap_err(), SpaceError::SelfLoop(0));
        assert_eq!(Graph::new(2, &[(0, 1), (1, 0)]).unwrap_err(), SpaceError::DuplicateEdge(0, 1));
    }

    #[test]
    fn free_group_ball_counts() {
        let ball = cayley_ball(GroupSpec::Free { rank: 2 }, 2).unwrap();
        assert_eq!(ball.interior_len(), 17);
        assert_eq!(ball.sphere_sizes(), vec![1, 4, 12]);
        // enumerated to radius 4: 1 + 4 + 12 + 36 + 108
        assert_eq!(ball.len(), 161);
    }

    #[test]
    fn integer_line_ball() {
        let ball = cayley_ball(GroupSpec::Lattice { dim: 1 }, 3).unwrap();
        assert_eq!(ball.interior_len(), 7);
        let mut values: Vec<i64> = ball.elements()[..7]
            .iter()
            .map(|e| match e {
                Element::Lattice(v) => v[0],
                _ => unreachable!(),
            })
            .collect();
        for (i, v) in values.iter().enumerate() {
            assert_eq!(ball.length(i), v.unsigned_abs() as u32);
        }
        values.sort();
        assert_eq!(values, (-3..=3).collect::<Vec<_>>());
    }

    fn cyclic(n: usize) -> FiniteGroup {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mul = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        FiniteGroup::new(labels, mul, &[1]).unwrap()
    }

    #[test]
    fn finite_group_ball_saturates() {
        let ball = cayley_ball(GroupSpec::Table(cyclic(4)), 10).unwrap();
        assert_eq!(ball.interior_len(), 4);
        assert_eq!(ball.len(), 4);
        let lengths: Vec<u32> = (0..4).map(|i| ball.length(i)).collect();
        assert_eq!(lengths, vec![0, 1, 1, 2]);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        assert!(FiniteGroup::new(labels.clone(), vec![vec![0, 1], vec![0, 1]], &[1]).is_err());
        let z4 = cyclic(4);
        // generator 2 only reaches {0, 2}
        assert!(FiniteGroup::new(z4.labels.clone(), z4.mul.clone(), &[2]).is_err());
    }

    #[test]
    fn element_cap_is_enforced() {
        let err = GroupBall::new(GroupSpec::Free { rank: 2 }, 6, 6, 10_000).unwrap_err();
        assert_eq!(err, SpaceError::ElementCap { cap: 10_000 });
    }

    #[test]
    fn products_outside_the_margin_are_rejected() {
        let ball = GroupBall::new(GroupSpec::Lattice { dim: 1 }, 2, 1, DEFAULT_ELEMENT_CAP).unwrap();
        let two = ball.index_of(&Element::Lattice(vec![2])).unwrap();
        let three = ball.product(two, ball.index_of(&Element::Lattice(vec![1])).unwrap()).unwrap();
        assert_eq!(ball.length(three), 3);
        assert_eq!(
            ball.product(two, two).unwrap_err(),
            SpaceError::OutsideMargin { length: 4, limit: 3 }
        );
    }

    #[test]
    fn group_ball_spaces_validate() {
        for group in [GroupSpec::Free { rank: 2 }, GroupSpec::Lattice { dim: 2 }] {
            let ball = cayley_ball(group, 2).unwrap();
            let again = validate_metric(ball.space().distances().clone());
            assert!(again.is_ok());
        }
    }

    #[test]
    fn diagonal_neighborhood_contains_diagonal_and_grows() {
        let s = graph_metric(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let small = s.diagonal_neighborhood(0.5);
        assert_eq!(small.pairs, (0..4).map(|i| (i, i)).collect::<Vec<_>>());
        let big = s.diagonal_neighborhood(2.0);
        assert!(big.pairs.len() > small.pairs.len());
        assert!(small.pairs.iter().all(|&(i, j)| big.contains(i, j)));
    }
}
