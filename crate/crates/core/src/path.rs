//! Linear path decomposition and graph metrics.
//!
//! A linear path is a maximal edge path that enters and leaves every interior
//! vertex through paired ports. Every edge lies on exactly one linear path;
//! the number of paths is the graph width. Paths terminate where the partner
//! port is open, where the port is a pairing singleton, or close into a cycle.

use crate::graph::{Edge, EdgeId, PathId, PortGraph, PortLabel, PortState, VertexData, VertexId};

/// One linear path of the decomposition.
///
/// For non-cycles, `vertices` lists the `edges.len() + 1` vertices in
/// traversal order (with repeats if the path revisits a vertex). For cycles,
/// the initial vertex is not repeated at the end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearPath {
    pub id: PathId,
    pub edges: Vec<EdgeId>,
    pub vertices: Vec<VertexId>,
    pub is_cycle: bool,
}

impl LinearPath {
    /// Number of vertices on the path, counting revisits.
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
}

/// Width, depth and degree statistics of a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphMetrics {
    /// Size of the linear path decomposition.
    pub width: usize,
    /// Maximum number of vertices on any linear path.
    pub depth: usize,
    /// True iff no linear path is a cycle.
    pub is_flat: bool,
    /// Number of odd-degree vertices.
    pub n_odd: usize,
    /// Number of open ports.
    pub n_open: usize,
    /// Maximum vertex degree.
    pub max_degree: usize,
}

/// Key used to orient and order paths: the smallest `(vertex, port)`
/// incidence at a path end (or anywhere on a cycle).
type EndKey = (VertexId, PortLabel);

struct RawPath {
    edges: Vec<EdgeId>,
    vertices: Vec<VertexId>,
    is_cycle: bool,
    key: EndKey,
}

/// Compute the decomposition and assemble the final graph value.
pub(crate) fn assemble(vertices: Vec<VertexData>, edges: Vec<Edge>) -> PortGraph {
    let mut visited = vec![false; edges.len()];
    let mut raw: Vec<RawPath> = Vec::new();

    for start in 0..edges.len() {
        if visited[start] {
            continue;
        }
        raw.push(trace_path(&vertices, &edges, EdgeId(start), &mut visited));
    }
    raw.sort_by_key(|p| p.key);

    let mut paths = Vec::with_capacity(raw.len());
    let mut edge_paths = vec![PathId(0); edges.len()];
    let mut class_paths: Vec<Vec<Option<PathId>>> =
        vertices.iter().map(|v| vec![None; v.classes.len()]).collect();
    for (idx, p) in raw.into_iter().enumerate() {
        let id = PathId(idx);
        for &e in &p.edges {
            edge_paths[e.0] = id;
            for &(v, port) in &edges[e.0].ends {
                let ci = vertices[v.0].class_of[&port];
                class_paths[v.0][ci] = Some(id);
            }
        }
        paths.push(LinearPath {
            id,
            edges: p.edges,
            vertices: p.vertices,
            is_cycle: p.is_cycle,
        });
    }

    let is_flat = paths.iter().all(|p| !p.is_cycle);
    let depth = paths.iter().map(|p| p.num_vertices()).max().unwrap_or(0);
    let n_odd = vertices.iter().filter(|v| v.ports.len() % 2 == 1).count();
    let n_open = vertices
        .iter()
        .flat_map(|v| v.ports.values())
        .filter(|s| matches!(s, PortState::Open))
        .count();
    let max_degree = vertices.iter().map(|v| v.ports.len()).max().unwrap_or(0);
    let metrics = GraphMetrics {
        width: paths.len(),
        depth,
        is_flat,
        n_odd,
        n_open,
        max_degree,
    };

    PortGraph {
        vertices,
        edges,
        paths,
        class_paths,
        edge_paths,
        metrics,
    }
}

/// Follow the path through `start` to both ends (or around the cycle),
/// marking edges visited, and orient it canonically.
fn trace_path(
    vertices: &[VertexData],
    edges: &[Edge],
    start: EdgeId,
    visited: &mut [bool],
) -> RawPath {
    visited[start.0] = true;
    let [end_a, end_b] = edges[start.0].ends;

    // Walk one direction until the path terminates or closes on `start`.
    let extend = |mut at: (VertexId, PortLabel), visited: &mut [bool]| {
        let mut out: Vec<EdgeId> = Vec::new();
        let mut verts: Vec<VertexId> = Vec::new();
        loop {
            let (v, p) = at;
            let Some(q) = vertices[v.0].partner(p) else {
                return (out, verts, false);
            };
            match vertices[v.0].ports[&q] {
                PortState::Open => return (out, verts, false),
                PortState::Linked(e) if e == start => return (out, verts, true),
                PortState::Linked(e) => {
                    visited[e.0] = true;
                    let next = edges[e.0].other_end(v, q);
                    out.push(e);
                    verts.push(next.0);
                    at = next;
                }
            }
        }
    };

    let (fwd_edges, fwd_verts, closed) = extend(end_b, visited);
    if closed {
        let mut cycle_edges = vec![start];
        cycle_edges.extend(fwd_edges);
        let mut cycle_verts = vec![end_b.0];
        cycle_verts.extend(fwd_verts);
        return orient_cycle(edges, cycle_edges, cycle_verts);
    }
    let (bwd_edges, bwd_verts, _) = extend(end_a, visited);

    // Assemble from the backward end to the forward end.
    let mut all_edges: Vec<EdgeId> = bwd_edges.into_iter().rev().collect();
    all_edges.push(start);
    all_edges.extend(fwd_edges);
    let mut all_verts: Vec<VertexId> = bwd_verts.into_iter().rev().collect();
    all_verts.push(end_a.0);
    all_verts.push(end_b.0);
    all_verts.extend(fwd_verts);

    let key_front = incidence(edges, all_edges[0], all_verts[0]);
    let key_back = incidence(
        edges,
        *all_edges.last().unwrap(),
        *all_verts.last().unwrap(),
    );
    let key = if key_back < key_front {
        all_edges.reverse();
        all_verts.reverse();
        key_back
    } else {
        key_front
    };
    RawPath {
        edges: all_edges,
        vertices: all_verts,
        is_cycle: false,
        key,
    }
}

/// The `(vertex, port)` incidence of edge `e` at vertex `v`.
fn incidence(edges: &[Edge], e: EdgeId, v: VertexId) -> EndKey {
    let ends = edges[e.0].ends;
    if ends[0].0 == v {
        ends[0]
    } else {
        ends[1]
    }
}

/// Rotate and orient a cycle so it starts at its smallest incidence.
/// Edge `i` of the input runs from `verts[i]` to `verts[(i + 1) % n]`.
fn orient_cycle(edges: &[Edge], cycle_edges: Vec<EdgeId>, cycle_verts: Vec<VertexId>) -> RawPath {
    let n = cycle_edges.len();
    let mut best: Option<(EndKey, usize, bool)> = None;
    for i in 0..n {
        let ends = edges[cycle_edges[i].0].ends;
        for &(v, p) in &ends {
            let fwd = v == cycle_verts[i];
            let cand = ((v, p), i, fwd);
            if best.is_none() || cand.0 < best.unwrap().0 {
                best = Some(cand);
            }
        }
    }
    let (key, pos, fwd) = best.expect("cycle with no edges");
    let (e_rot, v_rot) = if fwd {
        (
            (0..n).map(|j| cycle_edges[(pos + j) % n]).collect(),
            (0..n).map(|j| cycle_verts[(pos + j) % n]).collect(),
        )
    } else {
        (
            (0..n).map(|j| cycle_edges[(pos + n - j) % n]).collect(),
            (0..n).map(|j| cycle_verts[(pos + 1 + n - j) % n]).collect(),
        )
    };
    RawPath {
        edges: e_rot,
        vertices: v_rot,
        is_cycle: true,
        key,
    }
}
