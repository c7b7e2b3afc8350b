//! Split graphs, canonical anchors, the canonical tree representation and
//! the string-tuple encoding of trees.
//!
//! Marking a set `X` of anchor vertices and splitting every other vertex into
//! one copy per pairing class yields the X-split graph. When `X` is computed
//! by [`canonical_anchors`], the split graph of a flat connected graph is a
//! tree; together with merge labels that record which split copies share an
//! origin, the tree determines the original graph up to isomorphism.
//! [`as_strings`] encodes such a tree as `2w` strings, two per linear path,
//! walking from each path's anchor to its two ends. Tree inclusion then turns
//! into componentwise string prefix inclusion, which prefix trees answer in
//! time independent of the number of stored patterns.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::graph::{
    GraphBuilder, PathId, PortGraph, PortLabel, PortState, VertexId, Weight,
};
use crate::OpError;

/// The X-split graph of a port graph.
#[derive(Clone, Debug)]
pub struct SplitGraph {
    pub graph: PortGraph,
    /// For every split vertex, the original vertex it is a copy of.
    pub origin: Vec<VertexId>,
    /// The anchor set, in the order it was supplied.
    pub anchors: Vec<VertexId>,
    /// Split-vertex handles of the anchors, parallel to `anchors`.
    pub anchor_vertices: Vec<VertexId>,
}

/// Compute the X-split graph: anchors keep all their ports, every other
/// vertex becomes one split vertex per pairing class. Edges map one to one.
pub fn split_graph(g: &PortGraph, x: &[VertexId]) -> Result<SplitGraph, OpError> {
    for &v in x {
        if !g.contains_vertex(v) {
            return Err(OpError::BadVertex(v));
        }
    }
    let xset: BTreeSet<VertexId> = x.iter().copied().collect();
    let mut b = GraphBuilder::internal();
    let mut origin = Vec::new();
    // (vertex, class) -> split vertex
    let mut split_of: BTreeMap<(VertexId, usize), VertexId> = BTreeMap::new();
    let mut anchor_split: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for v in g.vertex_ids() {
        if xset.contains(&v) {
            let sv = b
                .add_vertex(g.weight(v).clone(), g.port_labels(v))
                .expect("copied ports distinct");
            b.set_pairing(sv, g.classes(v).iter().copied())
                .expect("copied pairing");
            origin.push(v);
            anchor_split.insert(v, sv);
            for ci in 0..g.classes(v).len() {
                split_of.insert((v, ci), sv);
            }
        } else {
            for (ci, &(a, bp)) in g.classes(v).iter().enumerate() {
                let ports = [Some(a), bp].into_iter().flatten();
                let sv = b
                    .add_vertex(g.weight(v).clone(), ports)
                    .expect("class ports distinct");
                b.set_pairing(sv, [(a, bp)]).expect("single class");
                origin.push(v);
                split_of.insert((v, ci), sv);
            }
        }
    }
    for e in g.edge_ids() {
        let [(v0, p0), (v1, p1)] = g.edge(e).ends;
        let s0 = split_of[&(v0, g.class_index(v0, p0).unwrap())];
        let s1 = split_of[&(v1, g.class_index(v1, p1).unwrap())];
        b.connect((s0, p0), (s1, p1)).expect("split edges valid");
    }
    let graph = b.build().expect("split graph builds");
    let anchor_vertices = x.iter().map(|&v| anchor_split[&v]).collect();
    Ok(SplitGraph {
        graph,
        origin,
        anchors: x.to_vec(),
        anchor_vertices,
    })
}

/// Record of one consumed path during an anchor traversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathOwner {
    /// Index into the anchor list of the anchor that consumed the path.
    pub anchor_index: usize,
    pub path: PathId,
}

/// Result of [`canonical_anchors_full`]: the anchors plus consumption records
/// and an operation counter for complexity regressions.
#[derive(Clone, Debug)]
pub struct AnchorTraversal {
    pub anchors: Vec<VertexId>,
    /// Consumed paths in discovery order.
    pub owners: Vec<PathOwner>,
    /// Queue pops plus walked path vertices; a machine-independent cost proxy.
    pub steps: u64,
}

/// Deterministic anchor set of at most `width(g)` vertices whose split graph
/// is connected, found by traversing linear paths outward from `root`.
pub fn canonical_anchors(g: &PortGraph, root: VertexId) -> Result<Vec<VertexId>, OpError> {
    Ok(canonical_anchors_full(g, root)?.anchors)
}

/// As [`canonical_anchors`], also reporting path ownership and step counts.
pub fn canonical_anchors_full(g: &PortGraph, root: VertexId) -> Result<AnchorTraversal, OpError> {
    if !g.contains_vertex(root) {
        return Err(OpError::BadVertex(root));
    }
    if !g.is_flat() {
        return Err(OpError::NotFlat);
    }
    if !g.is_connected() {
        return Err(OpError::NotConnected);
    }
    let mut tr = AnchorTraversal {
        anchors: Vec::new(),
        owners: Vec::new(),
        steps: 0,
    };
    let mut seen: Vec<bool> = vec![false; g.width()];
    consume_path(g, VecDeque::from([root]), &mut seen, &mut tr);
    Ok(tr)
}

/// One recursive round of the anchor traversal: pop queue vertices until one
/// lies on unseen paths, anchor it, consume all its unseen paths, and recurse
/// on the remaining queue plus the two halves of every consumed path.
fn consume_path(
    g: &PortGraph,
    mut queue: VecDeque<VertexId>,
    seen: &mut Vec<bool>,
    tr: &mut AnchorTraversal,
) {
    while let Some(v) = queue.pop_front() {
        tr.steps += 1;
        let unseen: Vec<PathId> = g
            .paths_through(v)
            .into_iter()
            .filter(|p| !seen[p.0])
            .collect();
        if unseen.is_empty() {
            continue;
        }
        let anchor_index = tr.anchors.len();
        tr.anchors.push(v);
        for &p in &unseen {
            seen[p.0] = true;
        }
        let mut subqueues = vec![std::mem::take(&mut queue)];
        for &p in &unseen {
            tr.owners.push(PathOwner {
                anchor_index,
                path: p,
            });
            let halves = g.split_at(p, v, usize::MAX);
            for (_, q) in halves {
                tr.steps += q.len() as u64;
                subqueues.push(q);
            }
        }
        for q in subqueues {
            consume_path(g, q, seen, tr);
        }
        return;
    }
}

/// Merge label of a split vertex: the representative split copy of its
/// origin, chosen as the copy with the smallest port-label address from the
/// root (ties cannot occur in a tree).
pub type MergeLabels = Vec<VertexId>;

/// The canonical tree representation: the split graph over the canonical
/// anchors, rooted, with merge labels inverting the split.
#[derive(Clone, Debug)]
pub struct CanonicalTree {
    pub split: SplitGraph,
    /// Split-vertex handle of the root.
    pub root: VertexId,
    /// For every split vertex, the representative split copy of its origin.
    pub merge: MergeLabels,
    /// Consumed paths of the underlying graph, in discovery order.
    pub path_table: Vec<PathOwner>,
}

/// Compute the canonical tree representation of `g` rooted at `root`.
///
/// Requires a flat, connected graph with at least one edge.
pub fn ct_representation(g: &PortGraph, root: VertexId) -> Result<CanonicalTree, OpError> {
    if g.num_edges() == 0 {
        return Err(OpError::NoEdges);
    }
    let tr = canonical_anchors_full(g, root)?;
    let split = split_graph(g, &tr.anchors)?;
    let root_sv = split.anchor_vertices[0];

    let addresses = tree_addresses(&split.graph, root_sv)?;

    // Representative per origin: the copy with the smallest address.
    let mut rep_of_origin: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for sv in split.graph.vertex_ids() {
        let o = split.origin[sv.0];
        match rep_of_origin.get(&o) {
            Some(&r) if addresses[r.0] <= addresses[sv.0] => {}
            _ => {
                rep_of_origin.insert(o, sv);
            }
        }
    }
    let merge = split
        .graph
        .vertex_ids()
        .map(|sv| rep_of_origin[&split.origin[sv.0]])
        .collect();
    Ok(CanonicalTree {
        split,
        root: root_sv,
        merge,
        path_table: tr.owners,
    })
}

/// Port-label addresses of every vertex of a tree, from `root`. Errors if the
/// graph is not connected and acyclic.
fn tree_addresses(t: &PortGraph, root: VertexId) -> Result<Vec<Vec<PortLabel>>, OpError> {
    let mut addr: Vec<Option<Vec<PortLabel>>> = vec![None; t.num_vertices()];
    addr[root.0] = Some(Vec::new());
    let mut stack = vec![(root, None::<crate::graph::EdgeId>)];
    while let Some((v, via)) = stack.pop() {
        for p in t.port_labels(v).collect::<Vec<_>>() {
            if let Some(PortState::Linked(e)) = t.port_state(v, p) {
                if Some(e) == via {
                    continue;
                }
                let (u, _) = t.edge(e).other_end(v, p);
                if addr[u.0].is_some() {
                    return Err(OpError::BadAnchors("split graph has a cycle".into()));
                }
                let mut a = addr[v.0].clone().unwrap();
                a.push(p);
                addr[u.0] = Some(a);
                stack.push((u, Some(e)));
            }
        }
    }
    addr.into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(OpError::NotConnected)
}

/// Invert a canonical tree back into a port graph (isomorphic to the graph
/// the tree was computed from). Merge labels that assign the same port twice
/// or merge vertices with differing weights are an error.
pub fn reconstruct(ct: &CanonicalTree) -> Result<PortGraph, OpError> {
    let t = &ct.split.graph;
    // Group split vertices by representative, in representative order.
    let mut groups: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for sv in t.vertex_ids() {
        let rep = *ct
            .merge
            .get(sv.0)
            .ok_or_else(|| OpError::BadMerge("label missing".into()))?;
        if !t.contains_vertex(rep) {
            return Err(OpError::BadMerge(format!("label {rep:?} out of range")));
        }
        groups.entry(rep).or_default().push(sv);
    }
    let mut new_of: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut b = GraphBuilder::internal();
    for (rep, members) in &groups {
        let weight = t.weight(*rep).clone();
        let mut ports = Vec::new();
        let mut classes = Vec::new();
        for &m in members {
            if t.weight(m) != &weight {
                return Err(OpError::BadMerge("merged vertices differ in weight".into()));
            }
            for p in t.port_labels(m) {
                if ports.contains(&p) {
                    return Err(OpError::BadMerge(format!(
                        "port {p:?} assigned twice after merging"
                    )));
                }
                ports.push(p);
            }
            classes.extend(t.classes(m).iter().copied());
        }
        let nv = b
            .add_vertex(weight, ports)
            .map_err(|e| OpError::BadMerge(e.to_string()))?;
        b.set_pairing(nv, classes)
            .map_err(|e| OpError::BadMerge(e.to_string()))?;
        for &m in members {
            new_of.insert(m, nv);
        }
    }
    for e in t.edge_ids() {
        let [(v0, p0), (v1, p1)] = t.edge(e).ends;
        b.connect((new_of[&v0], p0), (new_of[&v1], p1))
            .map_err(|e| OpError::BadMerge(e.to_string()))?;
    }
    b.build().map_err(|e| OpError::BadMerge(e.to_string()))
}

/// Rooted isomorphism check: whether the unique port-respecting map sending
/// `r1` to `r2` is a weight- and structure-preserving bijection.
pub fn rooted_isomorphic(g1: &PortGraph, r1: VertexId, g2: &PortGraph, r2: VertexId) -> bool {
    if g1.num_vertices() != g2.num_vertices() || g1.num_edges() != g2.num_edges() {
        return false;
    }
    if g1.num_vertices() == 0 {
        return true;
    }
    let mut map: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut rev: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut queue = VecDeque::from([(r1, r2)]);
    map.insert(r1, r2);
    rev.insert(r2, r1);
    while let Some((v, u)) = queue.pop_front() {
        if g1.weight(v) != g2.weight(u) || !g1.port_labels(v).eq(g2.port_labels(u)) {
            return false;
        }
        if g1.classes(v) != g2.classes(u) {
            return false;
        }
        for p in g1.port_labels(v).collect::<Vec<_>>() {
            match (g1.port_state(v, p), g2.port_state(u, p)) {
                (Some(PortState::Open), Some(PortState::Open)) => {}
                (Some(PortState::Linked(e1)), Some(PortState::Linked(e2))) => {
                    let (v2, q1) = g1.edge(e1).other_end(v, p);
                    let (u2, q2) = g2.edge(e2).other_end(u, p);
                    if q1 != q2 {
                        return false;
                    }
                    match (map.get(&v2), rev.get(&u2)) {
                        (None, None) => {
                            map.insert(v2, u2);
                            rev.insert(u2, v2);
                            queue.push_back((v2, u2));
                        }
                        (Some(&mu), Some(&mv)) if mu == u2 && mv == v2 => {}
                        _ => return false,
                    }
                }
                _ => return false,
            }
        }
    }
    map.len() == g1.num_vertices()
}

/// One character of the string encoding: the structural record of a vertex
/// as seen when entering it along a path. The leading character of each
/// string describes the anchor itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum StringChar {
    Anchor {
        ports: Vec<PortLabel>,
        weight: Weight,
    },
    Step {
        entry: PortLabel,
        ports: Vec<PortLabel>,
        weight: Weight,
    },
}

impl StringChar {
    pub(crate) fn anchor_of(g: &PortGraph, v: VertexId) -> StringChar {
        StringChar::Anchor {
            ports: g.port_labels(v).collect(),
            weight: g.weight(v).clone(),
        }
    }

    pub(crate) fn step_of(g: &PortGraph, v: VertexId, entry: PortLabel) -> StringChar {
        StringChar::Step {
            entry,
            ports: g.port_labels(v).collect(),
            weight: g.weight(v).clone(),
        }
    }

    /// Canonical byte encoding (length-prefixed fields, little-endian).
    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            StringChar::Anchor { ports, weight } => {
                out.push(1);
                encode_ports(ports, out);
                crate::format::encode_weight(weight, out);
            }
            StringChar::Step {
                entry,
                ports,
                weight,
            } => {
                out.push(2);
                out.extend_from_slice(&entry.0.to_le_bytes());
                encode_ports(ports, out);
                crate::format::encode_weight(weight, out);
            }
        }
    }

    pub fn encoded(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16);
        self.encode(&mut out);
        out
    }
}

fn encode_ports(ports: &[PortLabel], out: &mut Vec<u8>) {
    out.extend_from_slice(&(ports.len() as u16).to_le_bytes());
    for p in ports {
        out.extend_from_slice(&p.0.to_le_bytes());
    }
}

/// Append the encoding of the anchor character of `v` directly, bypassing
/// the intermediate [`StringChar`] (query hot path).
pub(crate) fn encode_anchor_into(g: &PortGraph, v: VertexId, out: &mut Vec<u8>) {
    out.push(1);
    let start = out.len();
    out.extend_from_slice(&0u16.to_le_bytes());
    let mut n = 0u16;
    for p in g.port_labels(v) {
        out.extend_from_slice(&p.0.to_le_bytes());
        n += 1;
    }
    out[start..start + 2].copy_from_slice(&n.to_le_bytes());
    crate::format::encode_weight(g.weight(v), out);
}

/// As [`encode_anchor_into`] for step characters.
pub(crate) fn encode_step_into(g: &PortGraph, v: VertexId, entry: PortLabel, out: &mut Vec<u8>) {
    out.push(2);
    out.extend_from_slice(&entry.0.to_le_bytes());
    let start = out.len();
    out.extend_from_slice(&0u16.to_le_bytes());
    let mut n = 0u16;
    for p in g.port_labels(v) {
        out.extend_from_slice(&p.0.to_le_bytes());
        n += 1;
    }
    out[start..start + 2].copy_from_slice(&n.to_le_bytes());
    crate::format::encode_weight(g.weight(v), out);
}

/// A `2w`-dimensional string tuple encoding a canonical tree: two strings per
/// linear path, in anchor discovery order, halves ordered by the anchor-side
/// port (singleton/absent side last). A string is empty when the anchor ends
/// its path in that direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StringTuple {
    pub strings: Vec<Vec<StringChar>>,
    pub width: usize,
}

impl StringTuple {
    pub fn arity(&self) -> usize {
        self.strings.len()
    }

    pub fn max_len(&self) -> usize {
        self.strings.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Componentwise prefix test: does every string of `self` prefix the
    /// corresponding string of `other`?
    pub fn is_prefix_of(&self, other: &StringTuple) -> bool {
        self.arity() == other.arity()
            && self
                .strings
                .iter()
                .zip(&other.strings)
                .all(|(s, t)| s.len() <= t.len() && s.iter().zip(t).all(|(a, b)| a == b))
    }

    /// Canonical byte serialization.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.strings.len() as u32).to_le_bytes());
        for s in &self.strings {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            for c in s {
                let bytes = c.encoded();
                out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
                out.extend_from_slice(&bytes);
            }
        }
        out
    }
}

/// The two anchor-side ports of `path` at `v`, ordered (singleton side last).
pub(crate) fn half_ports(g: &PortGraph, path: PathId, v: VertexId) -> [Option<PortLabel>; 2] {
    let ci = g.class_paths_at(v, path).expect("vertex on path");
    let (a, bp) = g.classes(v)[ci];
    match bp {
        Some(b) => [Some(a.min(b)), Some(a.max(b))],
        None => [Some(a), None],
    }
}

/// Build one string: the anchor character followed by the walk from
/// `(anchor, port)`, truncated to `limit` characters in total. Returns the
/// empty string when there is no edge on that side.
pub(crate) fn walk_string(
    g: &PortGraph,
    anchor: VertexId,
    port: Option<PortLabel>,
    limit: usize,
) -> Vec<StringChar> {
    let has_edge = port
        .map(|p| matches!(g.port_state(anchor, p), Some(PortState::Linked(_))))
        .unwrap_or(false);
    if !has_edge || limit == 0 {
        return Vec::new();
    }
    let mut s = Vec::with_capacity(limit.min(16));
    s.push(StringChar::anchor_of(g, anchor));
    for (v, entry) in g.walk_from(anchor, port, limit - 1) {
        s.push(StringChar::step_of(g, v, entry));
    }
    s
}

/// Encode `g` as a string tuple over the ordered anchor list `x` rooted at
/// `x[0]`, each string at most `depth_limit` characters.
///
/// `x` must be an ordered anchor sequence: replaying the canonical traversal
/// from the root must discover exactly the anchors of `x`, in order, each
/// consuming exactly one new linear path (so the tuple has `2 * len(x)`
/// strings). Anchor lists produced by [`canonical_anchors`] on graphs whose
/// vertices lie on at most two linear paths satisfy this.
pub fn as_strings(
    g: &PortGraph,
    x: &[VertexId],
    root: VertexId,
    depth_limit: Option<usize>,
) -> Result<StringTuple, OpError> {
    if x.is_empty() || x[0] != root {
        return Err(OpError::BadAnchors("root must be the first anchor".into()));
    }
    let tr = canonical_anchors_full(g, root)?;
    if tr.anchors != x {
        return Err(OpError::BadAnchors(format!(
            "expected discovery order {:?}, got {:?}",
            tr.anchors, x
        )));
    }
    if tr.owners.len() != x.len() {
        return Err(OpError::BadAnchors(
            "every anchor must consume exactly one path".into(),
        ));
    }
    let limit = depth_limit.unwrap_or(usize::MAX);
    if limit == 0 {
        return Err(OpError::BadDepth);
    }
    let mut strings = Vec::with_capacity(2 * x.len());
    for owner in &tr.owners {
        let anchor = tr.anchors[owner.anchor_index];
        for port in half_ports(g, owner.path, anchor) {
            strings.push(walk_string(g, anchor, port, limit));
        }
    }
    Ok(StringTuple {
        strings,
        width: x.len(),
    })
}
