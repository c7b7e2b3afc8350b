//! The port graph data structure.
//!
//! A port graph is an undirected graph whose edge endpoints carry per-vertex
//! port labels: every present port of a vertex holds at most one edge, or is
//! open (a dangling connection point). Each vertex additionally partitions its
//! present ports into pairs plus at most one singleton; this pairing routes
//! the linear paths used by all the matching machinery.
//!
//! Graphs are immutable once built. Use [`GraphBuilder`] to construct them;
//! the linear path decomposition is computed at build time.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::path::{self, GraphMetrics, LinearPath};

/// First label value reserved for internal use (fragment connectors, splice
/// roots). User-facing construction rejects labels in this range.
pub const INTERNAL_LABEL_BASE: u32 = 0x8000_0000;

/// A port label. Labels are totally ordered by their integer value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortLabel(pub u32);

impl PortLabel {
    /// Connector ports introduced when a vertex is split into fragments.
    pub(crate) const CONN_OUT: PortLabel = PortLabel(INTERNAL_LABEL_BASE);
    pub(crate) const CONN_IN: PortLabel = PortLabel(INTERNAL_LABEL_BASE + 1);
    /// Ports of a synthetic root vertex spliced into an edge.
    pub(crate) const ROOT_A: PortLabel = PortLabel(INTERNAL_LABEL_BASE + 2);
    pub(crate) const ROOT_B: PortLabel = PortLabel(INTERNAL_LABEL_BASE + 3);

    pub fn is_internal(self) -> bool {
        self.0 >= INTERNAL_LABEL_BASE
    }
}

impl fmt::Debug for PortLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PortLabel::CONN_OUT => write!(f, "p#out"),
            PortLabel::CONN_IN => write!(f, "p#in"),
            PortLabel::ROOT_A => write!(f, "p#ra"),
            PortLabel::ROOT_B => write!(f, "p#rb"),
            PortLabel(x) => write!(f, "p{x}"),
        }
    }
}

/// Dense handle of a vertex, assigned in insertion order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Dense handle of an edge, assigned in insertion order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Index of a linear path within a graph's decomposition.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(pub usize);

impl fmt::Debug for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// A vertex weight. Embeddings must preserve weights exactly.
///
/// `Frag` weights are derived when a vertex is split into fragments by
/// [`normalize_two_paths`](crate::normalize::normalize_two_paths); `Root`
/// marks the synthetic vertex spliced into an edge to serve as a traversal
/// root. Neither is constructible from user input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weight {
    Unlabelled,
    Atom(String),
    Frag(Box<Weight>, u32),
    Root,
}

impl Weight {
    pub fn atom(s: impl Into<String>) -> Self {
        Weight::Atom(s.into())
    }
}

/// State of a present port.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortState {
    /// Dangling connection point (the symbol omega).
    Open,
    /// Attached to an edge.
    Linked(EdgeId),
}

/// A pairing class: a pair of ports, or a singleton.
pub type PairClass = (PortLabel, Option<PortLabel>);

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct VertexData {
    pub weight: Weight,
    pub ports: BTreeMap<PortLabel, PortState>,
    /// Pairing classes, sorted by their smaller port label.
    pub classes: Vec<PairClass>,
    pub class_of: BTreeMap<PortLabel, usize>,
}

impl VertexData {
    /// The paired partner of `p`, if any.
    pub fn partner(&self, p: PortLabel) -> Option<PortLabel> {
        let (a, b) = self.classes[*self.class_of.get(&p)?];
        if a == p {
            b
        } else {
            Some(a)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub ends: [(VertexId, PortLabel); 2],
}

impl Edge {
    /// The endpoint opposite to `(v, p)`.
    pub fn other_end(&self, v: VertexId, p: PortLabel) -> (VertexId, PortLabel) {
        if self.ends[0] == (v, p) {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }
}

/// Errors raised during graph construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(VertexId),
    #[error("port {1:?} is absent at vertex {0:?}")]
    AbsentPort(VertexId, PortLabel),
    #[error("port {1:?} at vertex {0:?} already carries an edge")]
    PortOccupied(VertexId, PortLabel),
    #[error("duplicate port label {1:?} at vertex {0:?}")]
    DuplicatePort(VertexId, PortLabel),
    #[error("port label {0:?} is reserved for internal use")]
    ReservedLabel(PortLabel),
    #[error("pairing of vertex {0:?} is not a partition of its ports")]
    BadPairing(VertexId),
    #[error("pairing of vertex {0:?} has a singleton but even port count (or vice versa)")]
    BadSingleton(VertexId),
    #[error("edge endpoints {0:?} and {1:?} coincide")]
    SelfPort(VertexId, PortLabel),
}

/// An immutable port graph with a cached linear path decomposition.
#[derive(Clone, PartialEq)]
pub struct PortGraph {
    pub(crate) vertices: Vec<VertexData>,
    pub(crate) edges: Vec<Edge>,
    pub(crate) paths: Vec<LinearPath>,
    /// Per vertex, per pairing class: the path that class's edges lie on.
    pub(crate) class_paths: Vec<Vec<Option<PathId>>>,
    pub(crate) edge_paths: Vec<PathId>,
    pub(crate) metrics: GraphMetrics,
}

impl fmt::Debug for PortGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PortGraph {{")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(
                f,
                "  v{i}: {:?} ports {:?} classes {:?}",
                v.weight, v.ports, v.classes
            )?;
        }
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(f, "  e{i}: {:?}", e.ends)?;
        }
        write!(f, "}}")
    }
}

impl PortGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v.0 < self.vertices.len()
    }

    pub fn weight(&self, v: VertexId) -> &Weight {
        &self.vertices[v.0].weight
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    /// Present port labels of `v`, in ascending order.
    pub fn port_labels(&self, v: VertexId) -> impl Iterator<Item = PortLabel> + '_ {
        self.vertices[v.0].ports.keys().copied()
    }

    /// State of port `p` at `v`, or `None` if the port is absent.
    pub fn port_state(&self, v: VertexId, p: PortLabel) -> Option<PortState> {
        self.vertices[v.0].ports.get(&p).copied()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.vertices[v.0].ports.len()
    }

    /// Pairing classes of `v`, sorted by their smaller port.
    pub fn classes(&self, v: VertexId) -> &[PairClass] {
        &self.vertices[v.0].classes
    }

    /// The pairing partner of `(v, p)`; `None` for singletons or absent ports.
    pub fn partner(&self, v: VertexId, p: PortLabel) -> Option<PortLabel> {
        self.vertices[v.0].partner(p)
    }

    pub fn class_index(&self, v: VertexId, p: PortLabel) -> Option<usize> {
        self.vertices[v.0].class_of.get(&p).copied()
    }

    /// The linear path decomposition, in canonical order.
    pub fn linear_paths(&self) -> &[LinearPath] {
        &self.paths
    }

    pub fn path(&self, id: PathId) -> &LinearPath {
        &self.paths[id.0]
    }

    /// The path that the edges of pairing class `class_idx` of `v` lie on.
    pub fn class_path(&self, v: VertexId, class_idx: usize) -> Option<PathId> {
        self.class_paths[v.0][class_idx]
    }

    /// The linear path an edge belongs to.
    pub fn edge_path(&self, e: EdgeId) -> PathId {
        self.edge_paths[e.0]
    }

    /// Index of the (first) pairing class of `v` lying on `path`.
    pub(crate) fn class_paths_at(&self, v: VertexId, path: PathId) -> Option<usize> {
        self.class_paths[v.0].iter().position(|&p| p == Some(path))
    }

    /// Per-class path assignment of `v`, without allocation.
    pub(crate) fn class_path_ids(&self, v: VertexId) -> &[Option<PathId>] {
        &self.class_paths[v.0]
    }

    /// Distinct linear paths through `v`, ascending.
    pub fn paths_through(&self, v: VertexId) -> Vec<PathId> {
        let mut ids: Vec<PathId> = self.class_paths[v.0].iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn metrics(&self) -> &GraphMetrics {
        &self.metrics
    }

    pub fn width(&self) -> usize {
        self.paths.len()
    }

    pub fn is_flat(&self) -> bool {
        self.metrics.is_flat
    }

    /// Whether every pairing class of every vertex carries at least one edge.
    ///
    /// Patterns with fully-open classes fall outside the prefix-tree pipeline's
    /// completeness domain and are matched by the fallback lane instead.
    pub fn is_edge_saturated(&self) -> bool {
        self.vertex_ids().all(|v| {
            self.class_paths[v.0]
                .iter()
                .all(|path| path.is_some())
        })
    }

    /// Whether the graph is connected (via edges). Graphs with at most one
    /// vertex count as connected.
    pub fn is_connected(&self) -> bool {
        if self.vertices.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([VertexId(0)]);
        seen[0] = true;
        let mut found = 1;
        while let Some(v) = queue.pop_front() {
            for state in self.vertices[v.0].ports.values() {
                if let PortState::Linked(e) = state {
                    for &(u, _) in &self.edges[e.0].ends {
                        if !seen[u.0] {
                            seen[u.0] = true;
                            found += 1;
                            queue.push_back(u);
                        }
                    }
                }
            }
        }
        found == self.vertices.len()
    }

    /// Materialize the subgraph induced by an edge subset.
    ///
    /// Vertices incident to a kept edge are retained with their full port set
    /// and pairing; ports whose edges are dropped become open. Returns the
    /// subgraph together with maps from its vertex and edge handles back to
    /// the originals.
    pub fn edge_subgraph(&self, keep: &BTreeSet<EdgeId>) -> (PortGraph, Vec<VertexId>, Vec<EdgeId>) {
        let touched: BTreeSet<VertexId> = keep
            .iter()
            .flat_map(|&e| self.edges[e.0].ends.iter().map(|&(v, _)| v))
            .collect();
        let vertex_map: Vec<VertexId> = touched.into_iter().collect();
        let to_new: BTreeMap<VertexId, VertexId> = vertex_map
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, VertexId(i)))
            .collect();

        let mut b = GraphBuilder::internal();
        for &v in &vertex_map {
            let data = &self.vertices[v.0];
            let nv = b
                .add_vertex(data.weight.clone(), data.ports.keys().copied())
                .expect("ports are distinct");
            b.set_pairing(nv, data.classes.iter().copied())
                .expect("pairing copied verbatim");
        }
        let mut edge_map = Vec::with_capacity(keep.len());
        for &e in keep {
            let [(v0, p0), (v1, p1)] = self.edges[e.0].ends;
            b.connect((to_new[&v0], p0), (to_new[&v1], p1))
                .expect("subgraph edges are valid");
            edge_map.push(e);
        }
        (
            b.build().expect("subgraph builds"),
            vertex_map,
            edge_map,
        )
    }

    /// Walk edges from `(v, p)`, following the port pairing at each vertex.
    /// Yields `(vertex, entry port)` for every vertex reached, at most `fuel`
    /// steps. Starts with the edge at `(v, p)`; an open port yields nothing.
    pub fn walk_from(
        &self,
        v: VertexId,
        p: Option<PortLabel>,
        fuel: usize,
    ) -> impl Iterator<Item = (VertexId, PortLabel)> + '_ {
        let mut cur = p.map(|p| (v, p));
        let mut remaining = fuel;
        std::iter::from_fn(move || {
            let (cv, cp) = cur?;
            if remaining == 0 {
                return None;
            }
            match self.port_state(cv, cp)? {
                PortState::Open => None,
                PortState::Linked(e) => {
                    let (u, q) = self.edges[e.0].other_end(cv, cp);
                    remaining -= 1;
                    cur = self.partner(u, q).map(|next| (u, next));
                    Some((u, q))
                }
            }
        })
    }

    /// The two traversal queues of `path` split at `v`, each starting at `v`
    /// and truncated to `max_vertices` entries, together with the port of `v`
    /// the half leaves through. Halves are ordered by that port, `None`
    /// (singleton side) last.
    ///
    /// If the path visits `v` through several classes, the class with the
    /// smallest port is used.
    pub(crate) fn split_at(
        &self,
        path_id: PathId,
        v: VertexId,
        max_vertices: usize,
    ) -> [(Option<PortLabel>, VecDeque<VertexId>); 2] {
        let class_idx = self.class_paths[v.0]
            .iter()
            .position(|&p| p == Some(path_id))
            .expect("vertex not on path");
        let (a, b) = self.vertices[v.0].classes[class_idx];
        let mut halves = [(Some(a), VecDeque::new()), (b, VecDeque::new())];
        for (port, queue) in halves.iter_mut() {
            if max_vertices == 0 {
                continue;
            }
            queue.push_back(v);
            for (u, _) in self.walk_from(v, *port, max_vertices - 1) {
                queue.push_back(u);
            }
        }
        // Singleton side sorts last; otherwise ascending port order.
        if let (Some(pa), Some(pb)) = (halves[0].0, halves[1].0) {
            if pb < pa {
                halves.swap(0, 1);
            }
        }
        halves
    }
}

/// Builder for [`PortGraph`].
///
/// Vertices declare their present ports up front (all open); `connect` then
/// attaches edges to unoccupied ports. The default pairing pairs consecutive
/// ports in ascending label order; `set_pairing` overrides it per vertex.
#[derive(Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<(Weight, Vec<PortLabel>)>,
    pairings: BTreeMap<usize, Vec<PairClass>>,
    edges: Vec<[(VertexId, PortLabel); 2]>,
    allow_internal: bool,
}

impl GraphBuilder {
    /// Permit reserved port labels and weights; used by the normalization
    /// and splicing passes.
    pub(crate) fn internal() -> Self {
        GraphBuilder {
            allow_internal: true,
            ..Default::default()
        }
    }

    pub fn add_vertex(
        &mut self,
        weight: Weight,
        ports: impl IntoIterator<Item = PortLabel>,
    ) -> Result<VertexId, GraphError> {
        let id = VertexId(self.vertices.len());
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for p in ports {
            if p.is_internal() && !self.allow_internal {
                return Err(GraphError::ReservedLabel(p));
            }
            if !seen.insert(p) {
                return Err(GraphError::DuplicatePort(id, p));
            }
            list.push(p);
        }
        list.sort_unstable();
        self.vertices.push((weight, list));
        Ok(id)
    }

    /// Override the port pairing of `v` with explicit classes.
    pub fn set_pairing(
        &mut self,
        v: VertexId,
        classes: impl IntoIterator<Item = PairClass>,
    ) -> Result<(), GraphError> {
        if v.0 >= self.vertices.len() {
            return Err(GraphError::UnknownVertex(v));
        }
        self.pairings.insert(v.0, classes.into_iter().collect());
        Ok(())
    }

    pub fn connect(
        &mut self,
        a: (VertexId, PortLabel),
        b: (VertexId, PortLabel),
    ) -> Result<EdgeId, GraphError> {
        for &(v, p) in [&a, &b] {
            let Some((_, ports)) = self.vertices.get(v.0) else {
                return Err(GraphError::UnknownVertex(v));
            };
            if !ports.contains(&p) {
                return Err(GraphError::AbsentPort(v, p));
            }
        }
        if a == b {
            return Err(GraphError::SelfPort(a.0, a.1));
        }
        for edge in &self.edges {
            for &end in edge {
                if end == a || end == b {
                    let (v, p) = end;
                    return Err(GraphError::PortOccupied(v, p));
                }
            }
        }
        let id = EdgeId(self.edges.len());
        self.edges.push([a, b]);
        Ok(id)
    }

    pub fn build(self) -> Result<PortGraph, GraphError> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (idx, (weight, ports)) in self.vertices.into_iter().enumerate() {
            let v = VertexId(idx);
            let mut data = VertexData {
                weight,
                ports: ports.iter().map(|&p| (p, PortState::Open)).collect(),
                classes: Vec::new(),
                class_of: BTreeMap::new(),
            };
            let classes = match self.pairings.get(&idx) {
                Some(explicit) => validate_pairing(v, &ports, explicit)?,
                None => default_pairing(&ports),
            };
            for (ci, &(a, b)) in classes.iter().enumerate() {
                data.class_of.insert(a, ci);
                if let Some(b) = b {
                    data.class_of.insert(b, ci);
                }
            }
            data.classes = classes;
            vertices.push(data);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (idx, ends) in self.edges.into_iter().enumerate() {
            let e = EdgeId(idx);
            for &(v, p) in &ends {
                match vertices[v.0].ports.insert(p, PortState::Linked(e)) {
                    Some(PortState::Open) => {}
                    _ => return Err(GraphError::PortOccupied(v, p)),
                }
            }
            edges.push(Edge { ends });
        }
        Ok(path::assemble(vertices, edges))
    }
}

fn default_pairing(ports: &[PortLabel]) -> Vec<PairClass> {
    let mut classes = Vec::with_capacity(ports.len().div_ceil(2));
    let mut it = ports.iter();
    while let Some(&a) = it.next() {
        classes.push((a, it.next().copied()));
    }
    classes
}

fn validate_pairing(
    v: VertexId,
    ports: &[PortLabel],
    classes: &[PairClass],
) -> Result<Vec<PairClass>, GraphError> {
    let mut covered = BTreeSet::new();
    let mut singletons = 0usize;
    let mut normalized = Vec::with_capacity(classes.len());
    for &(a, b) in classes {
        let (a, b) = match b {
            Some(b) if b < a => (b, Some(a)),
            other => (a, other),
        };
        for p in [Some(a), b].into_iter().flatten() {
            if !ports.contains(&p) {
                return Err(GraphError::AbsentPort(v, p));
            }
            if !covered.insert(p) {
                return Err(GraphError::BadPairing(v));
            }
        }
        if b.is_none() {
            singletons += 1;
        }
        normalized.push((a, b));
    }
    if covered.len() != ports.len() {
        return Err(GraphError::BadPairing(v));
    }
    if singletons != ports.len() % 2 {
        return Err(GraphError::BadSingleton(v));
    }
    normalized.sort_unstable();
    Ok(normalized)
}
