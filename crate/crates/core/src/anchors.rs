//! Exhaustive enumeration of candidate anchor sets, the maximal subgraph for
//! a fixed candidate, and subject-side string extraction.
//!
//! The enumeration mirrors the canonical-anchor traversal, but where the
//! canonical traversal recurses once per sub-queue, the enumeration iterates
//! over every split of the remaining width budget across the three sub-queues
//! (the remaining queue plus the two halves of the newly consumed path). The
//! number of candidates is bounded by the Fuss-Catalan number
//! `binom(3w, w) / (2w + 1)`, independent of the subject size.
//!
//! Besides vertex roots, the enumerator supports a synthetic root placed in
//! the middle of an edge (used by the matcher so that roots always lie on
//! exactly one linear path). Split-path walks and their encoded characters
//! are memoized in a [`WalkArena`] shared across all roots of a query.

use std::collections::BTreeSet;

use smallvec::SmallVec;

use crate::canon;
use crate::graph::{EdgeId, PathId, PortGraph, PortLabel, PortState, VertexId, Weight};
use crate::OpError;

/// A traversal node: a real vertex, or the synthetic mid-edge root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Node {
    Root,
    V(VertexId),
}

/// How the traversal root is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RootSpec {
    Vertex(VertexId),
    /// A synthetic two-port vertex spliced into `edge`; `flip` selects which
    /// endpoint sits on the first-half side.
    EdgeMid { edge: EdgeId, flip: bool },
}

/// One candidate anchor set over vertex roots: `anchors[0]` is the root, and
/// `consumed[i]` is the linear path anchor `i` consumed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorCandidate {
    pub anchors: Vec<VertexId>,
    pub consumed: Vec<PathId>,
}

impl AnchorCandidate {
    /// The paths consumed during enumeration, ascending. Always exactly one
    /// per anchor.
    pub fn seen_paths(&self) -> Vec<PathId> {
        let mut s = self.consumed.clone();
        s.sort_unstable();
        s
    }
}

type NodeList = SmallVec<[Node; 8]>;
type PathList = SmallVec<[PathId; 8]>;
type HalfList = SmallVec<[[u32; 2]; 8]>;

/// Internal candidate over traversal nodes (used by the matcher with
/// synthetic roots). `halves[i]` are the arena walks of `consumed[i]` split
/// at `anchors[i]`.
#[derive(Clone, Debug)]
pub(crate) struct RawCandidate {
    pub anchors: NodeList,
    pub consumed: PathList,
    pub halves: HalfList,
}

/// Upper bound on the number of candidates for width `w`:
/// `binom(3w, w) / (2w + 1)`.
pub fn candidate_bound(w: usize) -> u128 {
    let mut binom: u128 = 1;
    for i in 0..w as u128 {
        binom = binom * (3 * w as u128 - i) / (i + 1);
    }
    binom / (2 * w as u128 + 1)
}

/// All anchor candidates of width `w` rooted at `root`, traversing at most
/// `d` vertices from any anchor along a path.
///
/// Requires a flat graph whose vertices lie on at most two linear paths and a
/// root on exactly one path. The output is deduplicated and deterministic.
pub fn all_anchors(
    g: &PortGraph,
    root: VertexId,
    w: usize,
    d: usize,
) -> Result<Vec<AnchorCandidate>, OpError> {
    all_anchors_counted(g, root, w, d).map(|(c, _)| c)
}

/// As [`all_anchors`], also reporting the step counter (queue pops plus
/// walked vertices), a machine-independent cost proxy.
pub fn all_anchors_counted(
    g: &PortGraph,
    root: VertexId,
    w: usize,
    d: usize,
) -> Result<(Vec<AnchorCandidate>, u64), OpError> {
    if !g.contains_vertex(root) {
        return Err(OpError::BadVertex(root));
    }
    check_normalized(g)?;
    if d == 0 {
        return Err(OpError::BadDepth);
    }
    let mut arena = WalkArena::new(g, d);
    let (raw, steps) = enumerate_in(&mut arena, RootSpec::Vertex(root), w)?;
    let out = raw
        .into_iter()
        .map(|c| AnchorCandidate {
            anchors: c
                .anchors
                .into_iter()
                .map(|n| match n {
                    Node::V(v) => v,
                    Node::Root => unreachable!("vertex-rooted runs have no synthetic node"),
                })
                .collect(),
            consumed: c.consumed.to_vec(),
        })
        .collect();
    Ok((out, steps))
}

/// Arena of split-path walks for one subject graph, shared across all roots
/// and width buckets of a query. Vertex-anchored halves are memoized per
/// `(vertex, pairing class)`; synthetic-root halves are appended per splice.
/// Every walk eagerly carries its encoded character string (the anchor
/// character followed by one step character per walked vertex), so querying a
/// candidate never re-encodes subject data.
pub(crate) struct WalkArena<'g> {
    g: &'g PortGraph,
    d: usize,
    walks: Vec<WalkData>,
    /// Flat index of `(vertex, class)` into `cache`.
    class_offset: Vec<usize>,
    cache: Vec<Option<[u32; 2]>>,
    root_char: Vec<u8>,
}

/// One stored walk: the vertices from the anchor outward, the entry port of
/// every step, and the encoded characters.
pub(crate) struct WalkData {
    pub nodes: Vec<Node>,
    /// Entry ports of `nodes[1..]`.
    pub entries: Vec<PortLabel>,
    char_bytes: Vec<u8>,
    char_ends: Vec<usize>,
}

impl WalkData {
    pub fn num_chars(&self) -> usize {
        self.char_ends.len()
    }

    pub fn char_at(&self, i: usize) -> &[u8] {
        let start = if i == 0 { 0 } else { self.char_ends[i - 1] };
        &self.char_bytes[start..self.char_ends[i]]
    }
}

impl<'g> WalkArena<'g> {
    pub(crate) fn new(g: &'g PortGraph, d: usize) -> Self {
        let mut class_offset = Vec::with_capacity(g.num_vertices() + 1);
        let mut total = 0;
        for v in g.vertex_ids() {
            class_offset.push(total);
            total += g.classes(v).len();
        }
        class_offset.push(total);
        WalkArena {
            g,
            d,
            walks: Vec::new(),
            class_offset,
            cache: vec![None; total],
            root_char: root_char().encoded(),
        }
    }

    pub(crate) fn walk(&self, id: u32) -> &WalkData {
        &self.walks[id as usize]
    }

    fn push_walk(&mut self, data: WalkData) -> u32 {
        self.walks.push(data);
        self.walks.len() as u32 - 1
    }

    /// Build a walk from `(v, port)`: nodes, entries and characters. An open
    /// or absent `port` yields a single-node walk with an empty character
    /// string (the encoding of a path side with no edge).
    fn build_walk(&mut self, v: VertexId, port: Option<PortLabel>) -> u32 {
        let mut data = WalkData {
            nodes: vec![Node::V(v)],
            entries: Vec::new(),
            char_bytes: Vec::new(),
            char_ends: Vec::new(),
        };
        let has_edge = port
            .map(|p| matches!(self.g.port_state(v, p), Some(PortState::Linked(_))))
            .unwrap_or(false);
        if has_edge {
            canon::encode_anchor_into(self.g, v, &mut data.char_bytes);
            data.char_ends.push(data.char_bytes.len());
            for (u, entry) in self.g.walk_from(v, port, self.d.saturating_sub(1)) {
                data.nodes.push(Node::V(u));
                data.entries.push(entry);
                canon::encode_step_into(self.g, u, entry, &mut data.char_bytes);
                data.char_ends.push(data.char_bytes.len());
            }
        }
        self.push_walk(data)
    }

    /// The two memoized halves of `path` split at `v` (ordered by port).
    fn vertex_halves(&mut self, path: PathId, v: VertexId, steps: &mut u64) -> [u32; 2] {
        let ci = self
            .g
            .class_paths_at(v, path)
            .expect("anchor lies on its consumed path");
        let slot = self.class_offset[v.0] + ci;
        if let Some(ids) = self.cache[slot] {
            return ids;
        }
        let ports = canon::half_ports(self.g, path, v);
        let ids = ports.map(|port| {
            let id = self.build_walk(v, port);
            *steps += self.walk(id).nodes.len() as u64;
            id
        });
        self.cache[slot] = Some(ids);
        ids
    }

    /// Fresh halves for a synthetic mid-edge root. Each walk continues from
    /// one edge endpoint: its first step enters the endpoint through the
    /// spliced edge's port.
    pub(crate) fn root_halves(&mut self, root: RootSpec, steps: &mut u64) -> [u32; 2] {
        let RootSpec::EdgeMid { edge, flip } = root else {
            unreachable!("synthetic node only with mid-edge roots");
        };
        let mut ends = self.g.edge(edge).ends;
        ends.sort_unstable();
        let [first, second] = if flip {
            [ends[1], ends[0]]
        } else {
            [ends[0], ends[1]]
        };
        [first, second].map(|(v, p)| {
            let mut data = WalkData {
                nodes: vec![Node::Root],
                entries: Vec::new(),
                char_bytes: Vec::new(),
                char_ends: Vec::new(),
            };
            data.char_bytes.extend_from_slice(&self.root_char);
            data.char_ends.push(data.char_bytes.len());
            if self.d > 1 {
                data.nodes.push(Node::V(v));
                data.entries.push(p);
                canon::encode_step_into(self.g, v, p, &mut data.char_bytes);
                data.char_ends.push(data.char_bytes.len());
                let partner = self.g.partner(v, p);
                for (u, entry) in self.g.walk_from(v, partner, self.d - 2) {
                    data.nodes.push(Node::V(u));
                    data.entries.push(entry);
                    canon::encode_step_into(self.g, u, entry, &mut data.char_bytes);
                    data.char_ends.push(data.char_bytes.len());
                }
            }
            *steps += data.nodes.len() as u64;
            self.push_walk(data)
        })
    }
}

/// Enumeration entry point shared by vertex and mid-edge roots.
pub(crate) fn enumerate_in(
    arena: &mut WalkArena<'_>,
    root: RootSpec,
    w: usize,
) -> Result<(Vec<RawCandidate>, u64), OpError> {
    enumerate_with_root_halves(arena, root, w, None)
}

/// As [`enumerate_in`], reusing precomputed root halves when available (the
/// matcher shares them across width buckets of one splice).
pub(crate) fn enumerate_with_root_halves(
    arena: &mut WalkArena<'_>,
    root: RootSpec,
    w: usize,
    root_halves: Option<[u32; 2]>,
) -> Result<(Vec<RawCandidate>, u64), OpError> {
    let g = arena.g;
    if w == 0 {
        return Err(OpError::BadWidth);
    }
    if arena.d == 0 {
        return Err(OpError::BadDepth);
    }
    if !g.is_flat() {
        return Err(OpError::NotFlat);
    }
    if let RootSpec::Vertex(v) = root {
        if g.paths_through(v).len() != 1 {
            return Err(OpError::RootNotOnOnePath);
        }
    }
    let root_path = match root {
        RootSpec::Vertex(v) => g.paths_through(v)[0],
        RootSpec::EdgeMid { edge, .. } => g.edge_path(edge),
    };
    let root_node = match root {
        RootSpec::Vertex(v) => Node::V(v),
        RootSpec::EdgeMid { .. } => Node::Root,
    };
    let start_walk = arena.push_walk(WalkData {
        nodes: vec![root_node],
        entries: Vec::new(),
        char_bytes: Vec::new(),
        char_ends: Vec::new(),
    });
    let mut e = Enumerator {
        g,
        root_path,
        root_halves,
        steps: 0,
        arena,
        root_spec: root,
    };
    let results = e.consume(
        w,
        QueueRef {
            walk: start_walk,
            pos: 0,
        },
        SeenSet::new(),
    );
    let steps = e.steps;
    let mut out: Vec<RawCandidate> = results
        .into_iter()
        .map(|(anchors, consumed, halves, _)| RawCandidate {
            anchors,
            consumed,
            halves,
        })
        .collect();
    out.sort_by(|a, b| (&a.anchors, &a.consumed).cmp(&(&b.anchors, &b.consumed)));
    out.dedup_by(|a, b| a.anchors == b.anchors && a.consumed == b.consumed);
    debug_assert!(
        out.len() as u128 <= candidate_bound(w),
        "candidate count {} exceeds the width-{w} bound {}",
        out.len(),
        candidate_bound(w)
    );
    Ok((out, steps))
}

/// Seen-path set: a persistent cons list. Candidates consume at most `w`
/// paths, so membership scans are short; clones are reference bumps.
#[derive(Clone, Debug, Default)]
struct SeenSet(Option<std::rc::Rc<SeenNode>>);

#[derive(Debug)]
struct SeenNode {
    path: PathId,
    rest: SeenSet,
}

impl SeenSet {
    fn new() -> Self {
        SeenSet(None)
    }

    fn contains(&self, p: PathId) -> bool {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.path == p {
                return true;
            }
            cur = &node.rest.0;
        }
        false
    }

    fn with(&self, p: PathId) -> SeenSet {
        SeenSet(Some(std::rc::Rc::new(SeenNode {
            path: p,
            rest: self.clone(),
        })))
    }
}

/// A traversal queue: a suffix of an arena-stored walk. Copyable, so the
/// branch enumeration never clones vertex sequences.
#[derive(Clone, Copy, Debug)]
struct QueueRef {
    walk: u32,
    pos: u32,
}

struct Enumerator<'g, 'a> {
    g: &'g PortGraph,
    root_spec: RootSpec,
    root_path: PathId,
    /// Precomputed root halves, if the caller already built them.
    root_halves: Option<[u32; 2]>,
    steps: u64,
    arena: &'a mut WalkArena<'g>,
}

type Partial = (NodeList, PathList, HalfList, SeenSet);

impl Enumerator<'_, '_> {
    /// All ways to place `w` anchors starting from `queue` with `seen`
    /// already-consumed paths.
    fn consume(&mut self, w: usize, queue: QueueRef, seen: SeenSet) -> Vec<Partial> {
        if w == 0 {
            return vec![(NodeList::new(), PathList::new(), HalfList::new(), seen)];
        }
        let mut pos = queue.pos as usize;
        let (anchor, new_path) = loop {
            let Some(&n) = self.arena.walks[queue.walk as usize].nodes.get(pos) else {
                return Vec::new();
            };
            pos += 1;
            self.steps += 1;
            // Allocation-free scan for the unique unseen path through `n`.
            let mut unseen: Option<PathId> = None;
            match n {
                Node::Root => {
                    if !seen.contains(self.root_path) {
                        unseen = Some(self.root_path);
                    }
                }
                Node::V(v) => {
                    for p in self.g.class_path_ids(v).iter().flatten() {
                        if seen.contains(*p) || unseen == Some(*p) {
                            continue;
                        }
                        // Ruled out by the normalization precondition: a
                        // queued vertex lies on its queue's (seen) path plus
                        // at most one other path.
                        assert!(unseen.is_none(), "vertex on more than one unseen path");
                        unseen = Some(*p);
                    }
                }
            }
            match unseen {
                None => continue,
                Some(p) => break (n, p),
            }
        };
        let seen0 = seen.with(new_path);
        let halves = match anchor {
            Node::V(v) => self.arena.vertex_halves(new_path, v, &mut self.steps),
            Node::Root => match self.root_halves {
                Some(h) => h,
                None => self.arena.root_halves(self.root_spec, &mut self.steps),
            },
        };
        let queues = [
            QueueRef {
                walk: queue.walk,
                pos: pos as u32,
            },
            QueueRef {
                walk: halves[0],
                pos: 0,
            },
            QueueRef {
                walk: halves[1],
                pos: 0,
            },
        ];

        let mut results = Vec::new();
        for w1 in 0..w {
            for w2 in 0..w - w1 {
                let w3 = w - 1 - w1 - w2;
                for (a1, c1, h1, s1) in self.consume(w1, queues[0], seen0.clone()) {
                    for (a2, c2, h2, s2) in self.consume(w2, queues[1], s1) {
                        for (a3, c3, h3, s3) in self.consume(w3, queues[2], s2) {
                            let mut anchors = NodeList::with_capacity(w);
                            anchors.push(anchor);
                            anchors.extend(a1.iter().copied());
                            anchors.extend(a2.iter().copied());
                            anchors.extend(a3.iter().copied());
                            let mut consumed = PathList::with_capacity(w);
                            consumed.push(new_path);
                            consumed.extend(c1.iter().copied());
                            consumed.extend(c2.iter().copied());
                            consumed.extend(c3.iter().copied());
                            let mut hs = HalfList::with_capacity(w);
                            hs.push(halves);
                            hs.extend(h1.iter().copied());
                            hs.extend(h2.iter().copied());
                            hs.extend(h3.iter().copied());
                            results.push((anchors, consumed, hs, s3));
                        }
                    }
                }
            }
        }
        results
    }
}

/// Check the normalization precondition: every vertex on at most two paths.
pub(crate) fn check_normalized(g: &PortGraph) -> Result<(), OpError> {
    for v in g.vertex_ids() {
        if g.paths_through(v).len() > 2 {
            return Err(OpError::BadAnchors(format!(
                "vertex {v:?} lies on more than two linear paths; normalize first"
            )));
        }
    }
    Ok(())
}

/// The maximal subgraph of `g` whose canonical anchors can equal the
/// candidate: the union of the consumed paths, truncated to `d` vertices from
/// the owning anchor in each direction. Returns the subgraph with vertex and
/// edge back-maps.
pub fn g_max(
    g: &PortGraph,
    cand: &AnchorCandidate,
    d: usize,
) -> Result<(PortGraph, Vec<VertexId>, Vec<EdgeId>), OpError> {
    if d == 0 {
        return Err(OpError::BadDepth);
    }
    let mut keep: BTreeSet<EdgeId> = BTreeSet::new();
    for (&anchor, &path) in cand.anchors.iter().zip(&cand.consumed) {
        if !g.contains_vertex(anchor) {
            return Err(OpError::BadVertex(anchor));
        }
        for port in canon::half_ports(g, path, anchor) {
            let mut cur = (anchor, port);
            for _ in 0..d.saturating_sub(1) {
                let Some(p) = cur.1 else { break };
                match g.port_state(cur.0, p) {
                    Some(PortState::Linked(e)) => {
                        keep.insert(e);
                        let (u, q) = g.edge(e).other_end(cur.0, p);
                        cur = (u, g.partner(u, q));
                    }
                    _ => break,
                }
            }
        }
    }
    let (sub, vmap, emap) = g.edge_subgraph(&keep);
    Ok((sub, vmap, emap))
}

/// The string tuple a candidate presents to the prefix trees: two strings per
/// consumed path, walked outward from the owning anchor, at most `d`
/// characters each.
pub fn subject_strings(
    g: &PortGraph,
    cand: &AnchorCandidate,
    d: usize,
) -> Result<canon::StringTuple, OpError> {
    if d == 0 {
        return Err(OpError::BadDepth);
    }
    let mut strings = Vec::with_capacity(2 * cand.anchors.len());
    for (&anchor, &path) in cand.anchors.iter().zip(&cand.consumed) {
        if !g.contains_vertex(anchor) {
            return Err(OpError::BadVertex(anchor));
        }
        for port in canon::half_ports(g, path, anchor) {
            strings.push(canon::walk_string(g, anchor, port, d));
        }
    }
    Ok(canon::StringTuple {
        strings,
        width: cand.anchors.len(),
    })
}

/// Anchor character of the synthetic mid-edge root: fixed ports and weight,
/// identical on the pattern and subject side.
pub(crate) fn root_char() -> canon::StringChar {
    canon::StringChar::Anchor {
        ports: vec![PortLabel::ROOT_A, PortLabel::ROOT_B],
        weight: Weight::Root,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateSet;
    use crate::sample;

    #[test]
    fn width_one_yields_exactly_the_root() {
        let gs = GateSet::t_h_cx();
        for seed in 0..30 {
            let g = sample::random_flat_connected_graph(seed, 3, 8, &gs, false);
            let Some(root) = g.vertex_ids().find(|&v| g.paths_through(v).len() == 1) else {
                continue;
            };
            let cands = all_anchors(&g, root, 1, 16).unwrap();
            assert_eq!(cands.len(), 1);
            assert_eq!(cands[0].anchors, vec![root]);
        }
    }

    #[test]
    fn bound_values_match_fuss_catalan() {
        assert_eq!(candidate_bound(1), 1);
        assert_eq!(candidate_bound(2), 3);
        assert_eq!(candidate_bound(3), 12);
        assert_eq!(candidate_bound(4), 55);
    }

    #[test]
    fn candidate_counts_within_bound() {
        let gs = GateSet::t_h_cx();
        for seed in 0..60 {
            let g = sample::random_flat_connected_graph(seed, 4, 12, &gs, false);
            check_normalized(&g).unwrap();
            let Some(root) = g.vertex_ids().find(|&v| g.paths_through(v).len() == 1) else {
                continue;
            };
            for w in 1..=4 {
                let cands = all_anchors(&g, root, w, 8).unwrap();
                assert!(
                    cands.len() as u128 <= candidate_bound(w),
                    "seed {seed} w {w}: {} candidates",
                    cands.len()
                );
                for c in &cands {
                    assert_eq!(c.anchors.len(), w);
                    assert_eq!(c.seen_paths().len(), w);
                    let distinct: BTreeSet<_> = c.anchors.iter().collect();
                    assert_eq!(distinct.len(), w, "anchors must be pairwise distinct");
                }
            }
        }
    }

    #[test]
    fn bad_roots_and_budgets_rejected() {
        let gs = GateSet::t_h_cx();
        let g = sample::random_flat_connected_graph(3, 2, 6, &gs, false);
        let two_path_vertex = g.vertex_ids().find(|&v| g.paths_through(v).len() == 2);
        if let Some(v) = two_path_vertex {
            assert_eq!(all_anchors(&g, v, 2, 8), Err(OpError::RootNotOnOnePath));
        }
        let root = g
            .vertex_ids()
            .find(|&v| g.paths_through(v).len() == 1)
            .unwrap();
        assert_eq!(all_anchors(&g, root, 0, 8), Err(OpError::BadWidth));
        assert_eq!(all_anchors(&g, root, 2, 0), Err(OpError::BadDepth));
    }

    #[test]
    fn enumeration_cost_tracks_width_scaling() {
        // Step counts normalized by c^w * d / sqrt(w) stay within a constant
        // factor across a width sweep.
        let gs = GateSet::t_h_cx();
        let g = sample::random_flat_connected_graph(7, 6, 36, &gs, false);
        let root = g
            .vertex_ids()
            .find(|&v| g.paths_through(v).len() == 1)
            .unwrap();
        let d = 8usize;
        let mut ratios = Vec::new();
        for w in 1..=4 {
            let (_, steps) = all_anchors_counted(&g, root, w, d).unwrap();
            let model = 6.75f64.powi(w as i32) * d as f64 / (w as f64).sqrt();
            ratios.push(steps as f64 / model);
        }
        let max = ratios.iter().cloned().fold(0.0f64, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min < 50.0,
            "cost growth inconsistent with the width model: {ratios:?}"
        );
    }

    #[test]
    fn g_max_covers_single_path() {
        let mut b = crate::graph::PortGraph::builder();
        let vs: Vec<_> = (0..4)
            .map(|_| {
                b.add_vertex(Weight::atom("T"), [PortLabel(0), PortLabel(1)])
                    .unwrap()
            })
            .collect();
        for w in vs.windows(2) {
            b.connect((w[0], PortLabel(1)), (w[1], PortLabel(0))).unwrap();
        }
        let g = b.build().unwrap();
        let cand = AnchorCandidate {
            anchors: vec![vs[0]],
            consumed: vec![crate::graph::PathId(0)],
        };
        // Large budget: whole path. Budget 2: one edge around the anchor.
        let (sub, _, emap) = g_max(&g, &cand, 16).unwrap();
        assert_eq!(sub.num_edges(), 3);
        assert_eq!(emap.len(), 3);
        let (sub2, _, _) = g_max(&g, &cand, 2).unwrap();
        assert_eq!(sub2.num_edges(), 1);
        // Mid-path anchor with budget 2: a window of up to 3 vertices.
        let cand_mid = AnchorCandidate {
            anchors: vec![vs[1]],
            consumed: vec![crate::graph::PathId(0)],
        };
        let (sub3, vmap3, _) = g_max(&g, &cand_mid, 2).unwrap();
        assert_eq!(sub3.num_vertices(), 3);
        assert!(vmap3.contains(&vs[0]) && vmap3.contains(&vs[1]) && vmap3.contains(&vs[2]));
    }

    #[test]
    fn subject_strings_have_bounded_length_and_arity() {
        let gs = GateSet::t_h_cx();
        for seed in 0..40 {
            let g = sample::random_flat_connected_graph(seed, 3, 10, &gs, false);
            let Some(root) = g.vertex_ids().find(|&v| g.paths_through(v).len() == 1) else {
                continue;
            };
            for w in 1..=3 {
                let d = 4;
                for cand in all_anchors(&g, root, w, d).unwrap() {
                    let t = subject_strings(&g, &cand, d).unwrap();
                    assert_eq!(t.arity(), 2 * w);
                    for s in &t.strings {
                        assert!(s.len() <= d);
                    }
                }
            }
        }
    }

    #[test]
    fn arena_chars_match_subject_strings() {
        // The memoized per-walk characters must agree with the reference
        // string extraction.
        let gs = GateSet::t_h_cx();
        for seed in 0..25 {
            let g = sample::random_flat_connected_graph(seed, 3, 10, &gs, false);
            let Some(root) = g.vertex_ids().find(|&v| g.paths_through(v).len() == 1) else {
                continue;
            };
            let d = 5;
            for w in 1..=2 {
                let mut arena = WalkArena::new(&g, d);
                let (cands, _) = enumerate_in(&mut arena, RootSpec::Vertex(root), w).unwrap();
                for cand in cands {
                    let public = AnchorCandidate {
                        anchors: cand
                            .anchors
                            .iter()
                            .map(|n| match n {
                                Node::V(v) => *v,
                                Node::Root => unreachable!(),
                            })
                            .collect(),
                        consumed: cand.consumed.to_vec(),
                    };
                    let reference = subject_strings(&g, &public, d).unwrap();
                    for (dim, s) in reference.strings.iter().enumerate() {
                        let walk = arena.walk(cand.halves[dim / 2][dim % 2]);
                        assert_eq!(
                            walk.num_chars().min(d),
                            s.len(),
                            "seed {seed} w {w} dim {dim}"
                        );
                        for (i, ch) in s.iter().enumerate() {
                            assert_eq!(walk.char_at(i), ch.encoded().as_slice());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn g_max_contains_all_subgraphs_with_matching_candidate() {
        // Brute force: every connected convex edge subset whose canonical
        // anchors replay one of the candidates is inside that candidate's
        // g_max window (with an unbounded budget).
        let gs = GateSet::t_h_cx();
        for seed in 0..25 {
            let g = sample::random_flat_connected_graph(seed, 3, 6, &gs, false);
            if g.num_edges() > 10 {
                continue;
            }
            let Some(root) = g.vertex_ids().find(|&v| g.paths_through(v).len() == 1) else {
                continue;
            };
            let cands_by_w: Vec<Vec<AnchorCandidate>> = (1..=3)
                .map(|w| all_anchors(&g, root, w, 64).unwrap())
                .collect();
            for subset in sample::connected_edge_subsets(&g, 10) {
                let (h, hv, _) = g.edge_subgraph(&subset);
                let Some(hr) = hv.iter().position(|&v| v == root) else {
                    continue;
                };
                let anchors_h = match crate::canon::canonical_anchors(&h, VertexId(hr)) {
                    Ok(a) => a,
                    Err(_) => continue,
                };
                let w = h.width();
                if !(1..=3).contains(&w) || anchors_h.len() != w {
                    continue;
                }
                let mapped: Vec<VertexId> = anchors_h.iter().map(|&a| hv[a.0]).collect();
                for cand in &cands_by_w[w - 1] {
                    if cand.anchors == mapped {
                        let (_, _, emap) = g_max(&g, cand, 64).unwrap();
                        let covered: BTreeSet<EdgeId> = emap.into_iter().collect();
                        for e in &subset {
                            assert!(
                                covered.contains(e),
                                "seed {seed}: subgraph edge escapes g_max"
                            );
                        }
                    }
                }
            }
        }
    }
}
