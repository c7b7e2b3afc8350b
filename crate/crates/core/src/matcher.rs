//! The compiled multi-pattern matcher and the naive baseline.
//!
//! Compilation routes every pattern into one of three lanes:
//!
//! * single-vertex patterns are indexed by their (port set, weight) key and
//!   matched by a direct scan of subject vertices;
//! * patterns whose every pairing class carries an edge (the domain where the
//!   anchor enumeration is complete for convex embeddings) are normalized,
//!   spliced with a synthetic mid-edge root, encoded as string tuples and
//!   inserted into a per-width prefix tree;
//! * the remaining patterns (some pairing class fully open) fall back to the
//!   naive per-pattern matcher at query time. This keeps the result set exact
//!   at the cost of per-pattern work for that lane only.
//!
//! Every prefix-tree hit is reconstructed into an explicit vertex map and
//! fully verified against the original graphs before being reported, so
//! reported matches are sound by construction.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::anchors::{self, Node, RawCandidate, RootSpec};
use crate::canon::{self, StringTuple};
use crate::embed::{is_convex, verify_embedding, Embedding};
use crate::format::{self, LoadError, Reader};
use crate::graph::{EdgeId, GraphBuilder, PortGraph, PortLabel, PortState, VertexId, Weight};
use crate::normalize::{normalize_two_paths, Normalized};
use crate::trie::{PrefixTree, TupleSource};

/// Identifier of a pattern within a matcher: its index in the compile input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternId(pub u32);

/// Query options.
#[derive(Clone, Copy, Debug)]
pub struct MatchOptions {
    /// Report only convex embeddings (the default). With `false`, all
    /// verified embeddings found are reported; for patterns in the fallback
    /// lane this is complete, for prefix-tree patterns it is a verified
    /// superset of the convex results, not a completeness guarantee.
    pub convex_only: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { convex_only: true }
    }
}

/// One reported match.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub pattern: PatternId,
    pub embedding: Embedding,
    /// The subject edge that hosted the synthetic root, when the match was
    /// found through the prefix-tree lane.
    pub root_edge: Option<EdgeId>,
    /// Subject vertices used as anchors (back-mapped; the synthetic root is
    /// not a subject vertex and is omitted).
    pub anchors: Vec<VertexId>,
    pub convex: bool,
}

/// Internal match record: canonical pattern index plus the subject images of
/// the pattern vertices in handle order (which fully determine the map).
#[derive(Clone, Debug)]
struct FoundRow {
    idx: usize,
    images: Vec<VertexId>,
    root_edge: Option<EdgeId>,
    anchors: Vec<VertexId>,
    convex: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("pattern {index}: {problem}")]
    Pattern { index: usize, problem: PatternProblem },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternProblem {
    #[error("pattern is empty")]
    Empty,
    #[error("pattern is not flat")]
    NotFlat,
    #[error("pattern is not connected")]
    NotConnected,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("subject graph is not flat")]
    NotFlat,
}

/// How a pattern is matched.
#[derive(Clone, Debug)]
enum Lane {
    /// Exact duplicate of an earlier pattern; see `ids_of`.
    Alias,
    /// Single-vertex pattern, matched by key lookup.
    Width0,
    /// Prefix-tree lane.
    Fast(Box<FastData>),
    /// Naive fallback lane (pattern has a fully open pairing class).
    Fallback,
}

/// One walk direction of a pattern path: the vertices after the anchor, with
/// their entry ports.
#[derive(Clone, Debug)]
struct HalfWalk {
    steps: Vec<(VertexId, PortLabel)>,
}

/// Compiled form of a prefix-tree-lane pattern.
#[derive(Clone, Debug)]
struct FastData {
    /// Normalized pattern with the synthetic root spliced in.
    rooted: PortGraph,
    /// Rooted-pattern vertex to original-pattern vertex (`None` for the root).
    back: Vec<Option<VertexId>>,
    /// Anchors of the rooted pattern in discovery order; `anchors[0]` is the
    /// synthetic root.
    anchors: Vec<VertexId>,
    /// Two walks per anchor, aligned with the tuple strings.
    halves: Vec<HalfWalk>,
    /// Full-depth string tuple.
    tuple: StringTuple,
}

/// Compiled pattern record.
#[derive(Clone, Debug)]
pub struct CompiledPattern {
    original: PortGraph,
    lane: Lane,
    /// Width and depth of the original pattern.
    width: usize,
    depth: usize,
}

impl CompiledPattern {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn original(&self) -> &PortGraph {
        &self.original
    }
}

#[derive(Clone, Debug)]
struct Bucket {
    trie: PrefixTree,
    /// Canonical pattern index per trie entry id.
    entries: Vec<usize>,
    /// Maximum pattern string length in this bucket: the per-query traversal
    /// and truncation budget.
    d_chars: usize,
}

/// A compiled, serializable multi-pattern matcher.
#[derive(Clone, Debug)]
pub struct Matcher {
    patterns: Vec<CompiledPattern>,
    /// (ports, weight) key -> canonical indices of single-vertex patterns.
    width0: BTreeMap<Vec<u8>, Vec<usize>>,
    /// Canonical indices matched by the naive fallback.
    fallback: Vec<usize>,
    buckets: BTreeMap<usize, Bucket>,
    /// Alias ids per canonical index (includes the canonical id itself).
    ids_of: BTreeMap<usize, Vec<PatternId>>,
    convex_default: bool,
}

/// Splice a synthetic two-port root vertex into edge `e`: the edge is removed
/// and replaced by two edges through the root. The smaller endpoint attaches
/// to `ROOT_A`. Returns the new graph, the root handle and a vertex back-map.
fn splice_root(g: &PortGraph, e: EdgeId) -> (PortGraph, VertexId, Vec<Option<VertexId>>) {
    let mut b = GraphBuilder::internal();
    let mut back = Vec::with_capacity(g.num_vertices() + 1);
    for v in g.vertex_ids() {
        let nv = b
            .add_vertex(g.weight(v).clone(), g.port_labels(v))
            .expect("copied ports");
        b.set_pairing(nv, g.classes(v).iter().copied())
            .expect("copied pairing");
        back.push(Some(v));
    }
    let root = b
        .add_vertex(Weight::Root, [PortLabel::ROOT_A, PortLabel::ROOT_B])
        .expect("fresh root ports");
    back.push(None);
    let mut ends = g.edge(e).ends;
    ends.sort_unstable();
    for other in g.edge_ids() {
        if other != e {
            let [a, c] = g.edge(other).ends;
            b.connect(a, c).expect("copied edge");
        }
    }
    b.connect(ends[0], (root, PortLabel::ROOT_A))
        .expect("root edge a");
    b.connect((root, PortLabel::ROOT_B), ends[1])
        .expect("root edge b");
    (b.build().expect("spliced graph builds"), root, back)
}

impl Matcher {
    /// Compile a set of patterns. Every pattern must be flat, connected and
    /// nonempty; errors carry the offending pattern index. Exact duplicates
    /// are stored once and report all their ids.
    pub fn compile(patterns: &[PortGraph]) -> Result<Matcher, CompileError> {
        Self::compile_with_default(patterns, true)
    }

    /// As [`Matcher::compile`], choosing the stored default for
    /// [`MatchOptions::convex_only`].
    pub fn compile_with_default(
        patterns: &[PortGraph],
        convex_default: bool,
    ) -> Result<Matcher, CompileError> {
        let mut m = Matcher {
            patterns: Vec::with_capacity(patterns.len()),
            width0: BTreeMap::new(),
            fallback: Vec::new(),
            buckets: BTreeMap::new(),
            ids_of: BTreeMap::new(),
            convex_default,
        };
        let mut seen: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        for (index, p) in patterns.iter().enumerate() {
            let problem = if p.num_vertices() == 0 {
                Some(PatternProblem::Empty)
            } else if !p.is_flat() {
                Some(PatternProblem::NotFlat)
            } else if !p.is_connected() {
                Some(PatternProblem::NotConnected)
            } else {
                None
            };
            if let Some(problem) = problem {
                return Err(CompileError::Pattern { index, problem });
            }

            let mut key = Vec::new();
            format::encode_graph(p, &mut key);
            if let Some(&canonical) = seen.get(&key) {
                m.patterns.push(CompiledPattern {
                    original: p.clone(),
                    lane: Lane::Alias,
                    width: p.width(),
                    depth: p.metrics().depth,
                });
                m.ids_of
                    .get_mut(&canonical)
                    .expect("canonical registered")
                    .push(PatternId(index as u32));
                continue;
            }
            seen.insert(key, index);
            m.ids_of.insert(index, vec![PatternId(index as u32)]);

            let lane = if p.num_edges() == 0 {
                m.width0
                    .entry(width0_key(p, VertexId(0)))
                    .or_default()
                    .push(index);
                Lane::Width0
            } else if p.is_edge_saturated() {
                Lane::Fast(Box::new(m.compile_fast(index, p)))
            } else {
                m.fallback.push(index);
                Lane::Fallback
            };
            m.patterns.push(CompiledPattern {
                original: p.clone(),
                lane,
                width: p.width(),
                depth: p.metrics().depth,
            });
        }
        Ok(m)
    }

    fn compile_fast(&mut self, index: usize, p: &PortGraph) -> FastData {
        let norm = normalize_two_paths(p).expect("pattern checked flat");
        let (rooted, root, splice_back) = splice_root(&norm.graph, EdgeId(0));
        // Compose back maps: rooted -> normalized -> original.
        let back: Vec<Option<VertexId>> = splice_back
            .iter()
            .map(|nv| nv.map(|nv| norm.back_map[nv.0]))
            .collect();
        let tr = canon::canonical_anchors_full(&rooted, root).expect("rooted pattern traverses");
        debug_assert_eq!(tr.anchors[0], root);
        debug_assert_eq!(tr.owners.len(), tr.anchors.len());
        let tuple = canon::as_strings(&rooted, &tr.anchors, root, None)
            .expect("canonical anchors encode");
        let mut halves = Vec::with_capacity(tuple.arity());
        for owner in &tr.owners {
            let anchor = tr.anchors[owner.anchor_index];
            for port in canon::half_ports(&rooted, owner.path, anchor) {
                let steps = match port {
                    Some(p0) if matches!(rooted.port_state(anchor, p0), Some(PortState::Linked(_))) => {
                        rooted.walk_from(anchor, Some(p0), usize::MAX).collect()
                    }
                    _ => Vec::new(),
                };
                halves.push(HalfWalk { steps });
            }
        }
        let width = rooted.width();
        debug_assert_eq!(width, p.width());
        let bucket = self.buckets.entry(width).or_insert_with(|| Bucket {
            trie: PrefixTree::new(2 * width),
            entries: Vec::new(),
            d_chars: 1,
        });
        let entry_id = bucket.entries.len() as u32;
        bucket
            .trie
            .insert(&tuple, entry_id)
            .expect("entry ids are fresh");
        bucket.entries.push(index);
        bucket.d_chars = bucket.d_chars.max(tuple.max_len());
        FastData {
            rooted,
            back,
            anchors: tr.anchors,
            halves,
            tuple,
        }
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Number of patterns matched by the naive fallback lane.
    pub fn fallback_count(&self) -> usize {
        self.fallback.len()
    }

    /// Per-width prefix tree statistics: `(width, nodes, entries)`.
    pub fn bucket_stats(&self) -> Vec<(usize, usize, usize)> {
        self.buckets
            .iter()
            .map(|(&w, b)| (w, b.trie.stats().nodes, b.entries.len()))
            .collect()
    }

    /// Compiled pattern records, one per input pattern.
    pub fn patterns(&self) -> impl ExactSizeIterator<Item = &CompiledPattern> {
        self.patterns.iter()
    }

    /// The full-depth string tuple of a prefix-tree-lane pattern.
    pub fn pattern_tuple(&self, idx: usize) -> Option<&StringTuple> {
        match &self.patterns[idx].lane {
            Lane::Fast(f) => Some(&f.tuple),
            _ => None,
        }
    }

    /// Per-bucket `(width, traversal budget in characters)` pairs.
    pub fn bucket_budgets(&self) -> Vec<(usize, usize)> {
        self.buckets.iter().map(|(&w, b)| (w, b.d_chars)).collect()
    }

    /// Find pattern embeddings into `g`.
    ///
    /// With `convex_only` set, the result is exactly the set of convex
    /// embeddings of every pattern. Output is deduplicated and sorted by
    /// `(pattern id, vertex map)`.
    pub fn find_matches(&self, g: &PortGraph, opts: MatchOptions) -> Result<Vec<Match>, MatchError> {
        if !g.is_flat() {
            return Err(MatchError::NotFlat);
        }
        let mut found: Vec<FoundRow> = Vec::new();

        // Single-vertex patterns: direct scan.
        if !self.width0.is_empty() {
            for u in g.vertex_ids() {
                if let Some(idxs) = self.width0.get(&width0_key(g, u)) {
                    for &idx in idxs {
                        found.push(FoundRow {
                            idx,
                            images: vec![u],
                            root_edge: None,
                            anchors: Vec::new(),
                            convex: true,
                        });
                    }
                }
            }
        }

        // Prefix-tree lane.
        if !self.buckets.is_empty() {
            let norm = normalize_two_paths(g).map_err(|_| MatchError::NotFlat)?;
            let d_max = self.buckets.values().map(|b| b.d_chars).max().unwrap_or(1);
            let mut arena = anchors::WalkArena::new(&norm.graph, d_max);
            let mut hits = std::collections::BTreeSet::new();
            for e in norm.graph.edge_ids() {
                for flip in [false, true] {
                    let root = RootSpec::EdgeMid { edge: e, flip };
                    // The first two tuple dimensions are the root-edge halves,
                    // shared by every candidate of this splice. Traverse them
                    // once per bucket; if no stored pattern survives, the
                    // whole splice is dead for that bucket and enumeration is
                    // skipped entirely.
                    let mut steps = 0u64;
                    let root_halves = arena.root_halves(root, &mut steps);
                    for (&w, bucket) in &self.buckets {
                        let mut shared = RootDimsSource {
                            arena: &arena,
                            halves: root_halves,
                            d: bucket.d_chars,
                        };
                        let (w1_hits, entries) = bucket.trie.query_prefix_dims(2, &mut shared);
                        debug_assert!(w == 1 || w1_hits.is_empty());
                        if w == 1 {
                            // Width-1 tuples have exactly the two root
                            // dimensions: hits are complete already, for the
                            // unique candidate [root].
                            if !w1_hits.is_empty() {
                                let cand = RawCandidate {
                                    anchors: smallvec::smallvec![Node::Root],
                                    consumed: smallvec::smallvec![norm.graph.edge_path(e)],
                                    halves: smallvec::smallvec![root_halves],
                                };
                                for entry in w1_hits {
                                    let idx = bucket.entries[entry as usize];
                                    if let Some(row) =
                                        self.try_candidate(idx, g, &norm, &arena, root, &cand)
                                    {
                                        found.push(row);
                                    }
                                }
                            }
                            continue;
                        }
                        if entries.is_empty() {
                            continue;
                        }
                        let (cands, _) = anchors::enumerate_with_root_halves(
                            &mut arena,
                            root,
                            w,
                            Some(root_halves),
                        )
                        .expect("normalized subject with mid-edge root");
                        for cand in cands {
                            let mut source = WalkSource {
                                arena: &arena,
                                cand: &cand,
                                d: bucket.d_chars,
                            };
                            hits.clear();
                            for &entry_node in &entries {
                                bucket
                                    .trie
                                    .resume_query(entry_node, 2, &mut source, &mut hits);
                            }
                            for &entry in &hits {
                                let idx = bucket.entries[entry as usize];
                                if let Some(row) =
                                    self.try_candidate(idx, g, &norm, &arena, root, &cand)
                                {
                                    found.push(row);
                                }
                            }
                        }
                    }
                }
            }
        }

        // Fallback lane: naive matching per pattern.
        for &idx in &self.fallback {
            for m in naive_match(&self.patterns[idx].original, g) {
                found.push(FoundRow {
                    idx,
                    images: m.embedding.vertex_map.into_values().collect(),
                    root_edge: None,
                    anchors: Vec::new(),
                    convex: m.convex,
                });
            }
        }

        // Deduplicate on (canonical pattern, image vector), expand alias ids,
        // and emit in canonical order.
        found.retain(|r| !opts.convex_only || r.convex);
        found.sort_unstable_by(|a, b| {
            (a.idx, &a.images, a.root_edge, &a.anchors)
                .cmp(&(b.idx, &b.images, b.root_edge, &b.anchors))
        });
        found.dedup_by(|a, b| a.idx == b.idx && a.images == b.images);
        let mut expanded: Vec<(PatternId, FoundRow)> = Vec::with_capacity(found.len());
        for row in found {
            for &id in &self.ids_of[&row.idx] {
                expanded.push((id, row.clone()));
            }
        }
        expanded.sort_by(|a, b| (a.0, &a.1.images).cmp(&(b.0, &b.1.images)));
        let out = expanded
            .into_iter()
            .map(|(id, row)| {
                let pattern_vertices = self.patterns[row.idx].original.vertex_ids();
                Match {
                    pattern: id,
                    embedding: Embedding::new(pattern_vertices.zip(row.images).collect()),
                    root_edge: row.root_edge,
                    anchors: row.anchors,
                    convex: row.convex,
                }
            })
            .collect();
        Ok(out)
    }

    /// Reconstruct a prefix-tree hit into an explicit embedding and verify
    /// it; `None` if any check fails.
    fn try_candidate(
        &self,
        idx: usize,
        g: &PortGraph,
        norm: &Normalized,
        arena: &anchors::WalkArena<'_>,
        root: RootSpec,
        cand: &RawCandidate,
    ) -> Option<FoundRow> {
        let Lane::Fast(fast) = &self.patterns[idx].lane else {
            unreachable!("trie entries point at fast-lane patterns");
        };
        let binding = bind_candidate(fast, &norm.graph, arena, cand)?;
        // Back-map both sides to the original graphs.
        let mut vertex_map: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        let mut reverse: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        for (pv, snode) in &binding {
            match (fast.back[pv.0], snode) {
                (None, Node::Root) => {}
                (Some(opv), Node::V(sv)) => {
                    let osv = norm.back_map[sv.0];
                    match vertex_map.get(&opv) {
                        None => {
                            if reverse.insert(osv, opv).is_some() {
                                return None; // injectivity on originals
                            }
                            vertex_map.insert(opv, osv);
                        }
                        Some(&prev) if prev == osv => {}
                        Some(_) => return None, // fragments disagree on the merge
                    }
                }
                _ => return None, // synthetic root misaligned
            }
        }
        let embedding = Embedding::new(vertex_map);
        if verify_embedding(&self.patterns[idx].original, g, &embedding) != Ok(true) {
            return None;
        }
        let convex = is_convex(&self.patterns[idx].original, g, &embedding) == Ok(true);
        let root_edge = match root {
            RootSpec::EdgeMid { edge, .. } => norm_edge_to_original(norm, edge),
            RootSpec::Vertex(_) => None,
        };
        let mut anchors: Vec<VertexId> = Vec::new();
        for n in &cand.anchors {
            if let Node::V(sv) = n {
                let ov = norm.back_map[sv.0];
                if !anchors.contains(&ov) {
                    anchors.push(ov);
                }
            }
        }
        Some(FoundRow {
            idx,
            images: embedding.vertex_map.into_values().collect(),
            root_edge,
            anchors,
            convex,
        })
    }

    pub fn convex_default(&self) -> bool {
        self.convex_default
    }
}

/// Key identifying single-vertex patterns: encoded ports plus weight.
fn width0_key(g: &PortGraph, v: VertexId) -> Vec<u8> {
    let mut key = Vec::new();
    let ports: Vec<PortLabel> = g.port_labels(v).collect();
    key.extend_from_slice(&(ports.len() as u16).to_le_bytes());
    for p in ports {
        key.extend_from_slice(&p.0.to_le_bytes());
    }
    format::encode_weight(g.weight(v), &mut key);
    key
}

/// The original edge behind a normalized-subject edge, if any (connector
/// edges introduced by the normalization have none).
fn norm_edge_to_original(norm: &Normalized, e: EdgeId) -> Option<EdgeId> {
    norm.edge_back.get(e.0).copied().flatten()
}

/// Walk the pattern's stored halves and the subject side in lockstep,
/// binding rooted-pattern vertices to subject nodes. Returns `None` on any
/// mismatch (ports, weights, injectivity, or merge disagreement at the
/// normalized level).
fn bind_candidate(
    fast: &FastData,
    gn: &PortGraph,
    arena: &anchors::WalkArena<'_>,
    cand: &RawCandidate,
) -> Option<BTreeMap<VertexId, Node>> {
    if cand.anchors.len() != fast.anchors.len() {
        return None;
    }
    let mut map: BTreeMap<VertexId, Node> = BTreeMap::new();
    let mut rev: BTreeMap<Node, VertexId> = BTreeMap::new();
    let mut bind = |pv: VertexId, sn: Node| -> bool {
        match (map.get(&pv), rev.get(&sn)) {
            (None, None) => {
                map.insert(pv, sn);
                rev.insert(sn, pv);
                true
            }
            (Some(&prev), Some(&rprev)) => prev == sn && rprev == pv,
            _ => false,
        }
    };
    // Anchors bind positionally.
    for (&pa, &sn) in fast.anchors.iter().zip(&cand.anchors) {
        if !compatible(&fast.rooted, pa, gn, sn) {
            return None;
        }
        if !bind(pa, sn) {
            return None;
        }
    }
    // Walk each half in lockstep with the recorded subject walk.
    for (dim, half) in fast.halves.iter().enumerate() {
        if half.steps.is_empty() {
            continue;
        }
        let walk = arena.walk(cand.halves[dim / 2][dim % 2]);
        if walk.nodes.len() - 1 < half.steps.len() {
            debug_assert!(false, "trie hit but subject walk shorter than pattern");
            return None;
        }
        for (&(pv, pentry), (&sv, &sentry)) in half
            .steps
            .iter()
            .zip(walk.nodes[1..].iter().zip(&walk.entries))
        {
            if pentry != sentry || !compatible(&fast.rooted, pv, gn, sv) {
                return None;
            }
            if !bind(pv, sv) {
                return None;
            }
        }
    }
    debug_assert_eq!(map.len(), fast.rooted.num_vertices());
    Some(map)
}

/// Pointwise compatibility of a rooted-pattern vertex and a subject node:
/// equal port sets and equal weights.
fn compatible(p: &PortGraph, pv: VertexId, g: &PortGraph, sn: Node) -> bool {
    match sn {
        Node::Root => p.weight(pv) == &Weight::Root,
        Node::V(sv) => {
            p.weight(pv) == g.weight(sv) && p.port_labels(pv).eq(g.port_labels(sv))
        }
    }
}

/// Character source over the two root-half dimensions of a splice, shared by
/// all candidates.
struct RootDimsSource<'a> {
    arena: &'a anchors::WalkArena<'a>,
    halves: [u32; 2],
    d: usize,
}

impl TupleSource for RootDimsSource<'_> {
    fn arity(&self) -> usize {
        2
    }

    fn char_bytes(&mut self, dim: usize, pos: usize) -> Option<&[u8]> {
        if pos >= self.d {
            return None;
        }
        let walk = self.arena.walk(self.halves[dim]);
        if pos < walk.num_chars() {
            Some(walk.char_at(pos))
        } else {
            None
        }
    }
}

/// Character source for one candidate: a budget-capped view of the arena
/// walks recorded on the candidate.
struct WalkSource<'a> {
    arena: &'a anchors::WalkArena<'a>,
    cand: &'a RawCandidate,
    d: usize,
}

impl TupleSource for WalkSource<'_> {
    fn arity(&self) -> usize {
        2 * self.cand.anchors.len()
    }

    fn char_bytes(&mut self, dim: usize, pos: usize) -> Option<&[u8]> {
        if pos >= self.d {
            return None;
        }
        let walk = self.arena.walk(self.cand.halves[dim / 2][dim % 2]);
        if pos < walk.num_chars() {
            Some(walk.char_at(pos))
        } else {
            None
        }
    }
}

/// Find all embeddings of `p` into `g` by fixing the lowest-handle pattern
/// vertex as root and extending the unique port-respecting map from every
/// subject vertex. Serves as the baseline matcher and the test oracle.
///
/// The pattern must be flat and connected; reported matches carry pattern
/// id 0 and their convexity verdict (false on non-flat subjects).
pub fn naive_match(p: &PortGraph, g: &PortGraph) -> Vec<Match> {
    let mut out = Vec::new();
    if p.num_vertices() == 0 {
        return out;
    }
    let root = VertexId(0);
    for rg in g.vertex_ids() {
        let Some(embedding) = extend_unique(p, g, root, rg) else {
            continue;
        };
        let convex = g.is_flat() && is_convex(p, g, &embedding) == Ok(true);
        out.push(Match {
            pattern: PatternId(0),
            embedding,
            root_edge: None,
            anchors: Vec::new(),
            convex,
        });
    }
    out
}

/// The unique candidate embedding sending `r` to `rg`, or `None`.
fn extend_unique(p: &PortGraph, g: &PortGraph, r: VertexId, rg: VertexId) -> Option<Embedding> {
    if !vertex_compatible(p, r, g, rg) {
        return None;
    }
    let mut map: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut rev: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    map.insert(r, rg);
    rev.insert(rg, r);
    let mut queue = std::collections::VecDeque::from([r]);
    while let Some(v) = queue.pop_front() {
        let gv = map[&v];
        for port in p.port_labels(v).collect::<Vec<_>>() {
            let Some(PortState::Linked(pe)) = p.port_state(v, port) else {
                continue;
            };
            let (u, q) = p.edge(pe).other_end(v, port);
            let Some(PortState::Linked(ge)) = g.port_state(gv, port) else {
                return None;
            };
            let (gu, gq) = g.edge(ge).other_end(gv, port);
            if gq != q {
                return None;
            }
            match map.get(&u) {
                Some(&prev) => {
                    if prev != gu {
                        return None;
                    }
                }
                None => {
                    if rev.contains_key(&gu) || !vertex_compatible(p, u, g, gu) {
                        return None;
                    }
                    map.insert(u, gu);
                    rev.insert(gu, u);
                    queue.push_back(u);
                }
            }
        }
    }
    Some(Embedding::new(map))
}

fn vertex_compatible(p: &PortGraph, v: VertexId, g: &PortGraph, u: VertexId) -> bool {
    p.weight(v) == g.weight(u) && p.port_labels(v).eq(g.port_labels(u))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"PGPM";
const VERSION: u32 = 1;

impl Matcher {
    /// Serialize to the matcher file format: magic, version, pattern table,
    /// per-width tree payloads, trailing 64-bit checksum. Deterministic:
    /// recompiling the same inputs yields identical bytes.
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.convex_default as u8);
        out.extend_from_slice(&(self.patterns.len() as u32).to_le_bytes());
        for p in &self.patterns {
            format::encode_graph(&p.original, &mut out);
        }
        out.extend_from_slice(&(self.buckets.len() as u32).to_le_bytes());
        for (&w, bucket) in &self.buckets {
            out.extend_from_slice(&(w as u32).to_le_bytes());
            out.extend_from_slice(&(bucket.d_chars as u32).to_le_bytes());
            out.extend_from_slice(&(bucket.entries.len() as u32).to_le_bytes());
            for &idx in &bucket.entries {
                out.extend_from_slice(&(idx as u32).to_le_bytes());
            }
            let trie_bytes = bucket.trie.to_bytes();
            out.extend_from_slice(&(trie_bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&trie_bytes);
        }
        let checksum = format::fnv1a64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    /// Load a matcher file. Magic, version, truncation and checksum problems
    /// are reported as distinct errors.
    pub fn load(bytes: &[u8]) -> Result<Matcher, LoadError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(LoadError::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(LoadError::Truncated);
        }
        let body = &bytes[..bytes.len() - 8];
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        let computed = format::fnv1a64(body);
        if stored != computed {
            return Err(LoadError::Checksum { stored, computed });
        }
        let mut r = Reader::new(&body[4..]);
        let version = r.u32()?;
        if version != VERSION {
            return Err(LoadError::UnsupportedVersion(version));
        }
        let convex_default = r.u8()? != 0;
        let n_patterns = r.u32()? as usize;
        let mut originals = Vec::with_capacity(n_patterns);
        for _ in 0..n_patterns {
            originals.push(format::decode_graph(&mut r)?);
        }
        // Rebuild the derived data deterministically, then swap in the
        // stored tree payloads.
        let mut m = Matcher::compile_with_default(&originals, convex_default)
            .map_err(|e| LoadError::Malformed(e.to_string()))?;
        let n_buckets = r.u32()? as usize;
        if n_buckets != m.buckets.len() {
            return Err(LoadError::Malformed(format!(
                "bucket count {} does not match patterns ({} expected)",
                n_buckets,
                m.buckets.len()
            )));
        }
        for _ in 0..n_buckets {
            let w = r.u32()? as usize;
            let d_chars = r.u32()? as usize;
            let n_entries = r.u32()? as usize;
            let mut entries = Vec::with_capacity(n_entries);
            for _ in 0..n_entries {
                entries.push(r.u32()? as usize);
            }
            let trie_len = r.u64()? as usize;
            let trie_bytes = r.take(trie_len)?;
            let trie = PrefixTree::from_reader(&mut Reader::new(trie_bytes))?;
            let Some(bucket) = m.buckets.get_mut(&w) else {
                return Err(LoadError::Malformed(format!("unexpected width bucket {w}")));
            };
            if bucket.entries != entries || bucket.d_chars != d_chars {
                return Err(LoadError::Malformed(format!(
                    "stored bucket {w} disagrees with recompiled patterns"
                )));
            }
            bucket.trie = trie;
        }
        if !r.is_empty() {
            return Err(LoadError::Malformed("trailing bytes".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_to_portgraph, random_circuit, Circuit, Gate, GateSet};
    use crate::sample;
    use std::collections::BTreeSet;

    fn graph_of(gates: &[Gate], q: usize) -> PortGraph {
        let c = Circuit {
            num_qubits: q,
            gates: gates.to_vec(),
        };
        circuit_to_portgraph(&c, &GateSet::standard()).unwrap()
    }

    fn chain2() -> PortGraph {
        graph_of(&[Gate::new("T", [0]), Gate::new("H", [0])], 1)
    }

    #[test]
    fn empty_matcher_finds_nothing() {
        let m = Matcher::compile(&[]).unwrap();
        let g = chain2();
        assert!(m.find_matches(&g, MatchOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn single_edge_pattern_gets_width1_bucket() {
        let m = Matcher::compile(&[chain2()]).unwrap();
        assert_eq!(m.bucket_stats().len(), 1);
        assert_eq!(m.bucket_stats()[0].0, 1);
        assert_eq!(m.fallback_count(), 0);
    }

    #[test]
    fn patterns_bucket_by_width() {
        let w2a = graph_of(
            &[Gate::new("CX", [0, 1]), Gate::new("CX", [0, 1])],
            2,
        );
        let w2b = graph_of(
            &[Gate::new("CX", [0, 1]), Gate::new("CX", [1, 0])],
            2,
        );
        let w3 = graph_of(
            &[
                Gate::new("CX", [0, 1]),
                Gate::new("CX", [1, 2]),
                Gate::new("CX", [0, 2]),
            ],
            3,
        );
        let m = Matcher::compile(&[w2a, w2b, w3]).unwrap();
        let stats = m.bucket_stats();
        assert_eq!(stats.len(), 2);
        assert_eq!((stats[0].0, stats[0].2), (2, 2));
        assert_eq!((stats[1].0, stats[1].2), (3, 1));
    }

    #[test]
    fn compile_errors_carry_pattern_index() {
        let empty = PortGraph::builder().build().unwrap();
        let err = Matcher::compile(&[chain2(), empty]).unwrap_err();
        assert_eq!(
            err,
            CompileError::Pattern {
                index: 1,
                problem: PatternProblem::Empty
            }
        );
        let disconnected = graph_of(&[Gate::new("T", [0]), Gate::new("T", [1])], 2);
        let err = Matcher::compile(&[disconnected]).unwrap_err();
        assert!(matches!(
            err,
            CompileError::Pattern {
                index: 0,
                problem: PatternProblem::NotConnected
            }
        ));
    }

    #[test]
    fn duplicate_patterns_alias_and_both_report() {
        let p = chain2();
        let m = Matcher::compile(&[p.clone(), p.clone()]).unwrap();
        let matches = m.find_matches(&p, MatchOptions::default()).unwrap();
        let ids: BTreeSet<PatternId> = matches.iter().map(|m| m.pattern).collect();
        assert_eq!(ids, BTreeSet::from([PatternId(0), PatternId(1)]));
        // One tree entry, not two.
        assert_eq!(m.bucket_stats()[0].2, 1);
    }

    #[test]
    fn pattern_matches_itself_exactly_once() {
        // Asymmetric weights: the only self-embedding is the identity.
        let p = graph_of(
            &[
                Gate::new("T", [0]),
                Gate::new("CX", [0, 1]),
                Gate::new("H", [1]),
            ],
            2,
        );
        let m = Matcher::compile(&[p.clone()]).unwrap();
        let matches = m.find_matches(&p, MatchOptions::default()).unwrap();
        assert_eq!(matches.len(), 1);
        let identity: BTreeMap<_, _> = p.vertex_ids().map(|v| (v, v)).collect();
        assert_eq!(matches[0].embedding.vertex_map, identity);
        assert!(matches[0].convex);
    }

    #[test]
    fn width0_patterns_match_by_scan() {
        let single = graph_of(&[Gate::new("H", [0])], 1);
        let m = Matcher::compile(&[single]).unwrap();
        let g = graph_of(
            &[
                Gate::new("H", [0]),
                Gate::new("T", [0]),
                Gate::new("H", [0]),
                Gate::new("H", [1]),
            ],
            2,
        );
        let matches = m.find_matches(&g, MatchOptions::default()).unwrap();
        // Every H vertex of matching port shape: handles 0, 2, 3.
        assert_eq!(matches.len(), 3);
        assert!(matches.iter().all(|m| m.convex));
    }

    #[test]
    fn planted_pattern_is_recovered() {
        let gs = GateSet::t_h_cx();
        for seed in 0..40u64 {
            let pat_circ = random_circuit(2, 5, &gs, seed).unwrap();
            let p = circuit_to_portgraph(&pat_circ, &gs).unwrap();
            if !p.is_connected() || p.num_edges() == 0 {
                continue;
            }
            // Subject: the pattern circuit followed by more gates.
            let extra = random_circuit(3, 8, &gs, seed ^ 0xabcd).unwrap();
            let mut subj_circ = Circuit {
                num_qubits: 3,
                gates: pat_circ.gates.clone(),
            };
            subj_circ.gates.extend(extra.gates);
            let g = circuit_to_portgraph(&subj_circ, &gs).unwrap();
            let m = Matcher::compile(std::slice::from_ref(&p)).unwrap();
            let matches = m.find_matches(&g, MatchOptions::default()).unwrap();
            let identity: BTreeMap<_, _> = p.vertex_ids().map(|v| (v, v)).collect();
            assert!(
                matches.iter().any(|m| m.embedding.vertex_map == identity),
                "seed {seed}: planted occurrence not recovered"
            );
        }
    }

    #[test]
    fn tree_sizes_stay_within_compile_bound() {
        // Node count of each width bucket within (l * d + 1)^(2w) for l
        // patterns of depth at most d.
        let patterns: Vec<PortGraph> = (0..60u64)
            .map(|s| sample::random_circuit_pattern(s, 3, 6, true))
            .collect();
        let m = Matcher::compile(&patterns).unwrap();
        let d = patterns.iter().map(|p| p.metrics().depth).max().unwrap() as f64;
        for (w, nodes, entries) in m.bucket_stats() {
            let bound = (entries as f64 * d + 1.0).powi(2 * w as i32);
            assert!(
                (nodes as f64) <= bound,
                "width {w}: {nodes} nodes exceed ({entries} * {d} + 1)^{}",
                2 * w
            );
        }
    }

    #[test]
    fn naive_counts_single_vertex_patterns() {
        let single = graph_of(&[Gate::new("H", [0])], 1);
        let g = graph_of(
            &[
                Gate::new("H", [0]),
                Gate::new("T", [0]),
                Gate::new("H", [1]),
            ],
            2,
        );
        // All three subject vertices have the same port shape; the weight
        // narrows it to the two H gates.
        let found = naive_match(&single, &g);
        assert_eq!(found.len(), 2);
    }

    #[test]
    fn fragmented_patterns_match_through_the_pipeline() {
        // Patterns and subjects with three-class vertices: normalization
        // splits both sides into fragment chains, and the planted occurrence
        // must come back exactly.
        let gs = GateSet::new()
            .with_gate("A", 1, 0, false)
            .with_gate("C", 2, 0, false)
            .with_gate("D", 3, 0, false);
        let mut planted = 0usize;
        let mut split_cases = 0usize;
        for seed in 0..120u64 {
            let pat_circ = match random_circuit(3, 5 + (seed % 4) as usize, &gs, seed) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let p = circuit_to_portgraph(&pat_circ, &gs).unwrap();
            if !p.is_connected() || p.num_edges() == 0 || !p.is_edge_saturated() {
                continue;
            }
            let mut subj = Circuit {
                num_qubits: 4,
                gates: pat_circ.gates.clone(),
            };
            subj.gates
                .extend(random_circuit(4, 10, &gs, seed ^ 0xc0ffee).unwrap().gates);
            let g = circuit_to_portgraph(&subj, &gs).unwrap();
            if p.vertex_ids().any(|v| p.classes(v).len() > 2) {
                split_cases += 1;
            }
            let m = Matcher::compile(std::slice::from_ref(&p)).unwrap();
            assert_eq!(m.fallback_count(), 0, "seed {seed}: expected the fast lane");
            let got: BTreeSet<Embedding> = m
                .find_matches(&g, MatchOptions { convex_only: true })
                .unwrap()
                .into_iter()
                .map(|mm| mm.embedding)
                .collect();
            let want: BTreeSet<Embedding> = naive_match(&p, &g)
                .into_iter()
                .filter(|mm| mm.convex)
                .map(|mm| mm.embedding)
                .collect();
            assert_eq!(got, want, "seed {seed}");
            let identity: BTreeMap<_, _> = p.vertex_ids().map(|v| (v, v)).collect();
            if want.iter().any(|e| e.vertex_map == identity) {
                planted += 1;
            }
        }
        assert!(planted > 40, "too few planted recoveries: {planted}");
        assert!(split_cases > 20, "corpus did not exercise splitting: {split_cases}");
    }

    #[test]
    fn naive_agrees_with_exhaustive_injective_maps() {
        let gs = sample::mixed_gate_set();
        for seed in 0..40u64 {
            let p = sample::random_circuit_pattern(seed, 2, 2, false);
            if p.num_vertices() > 4 {
                continue;
            }
            let g = sample::random_flat_graph(seed ^ 0x55, 3, 5, &gs, false);
            if g.num_vertices() > 7 {
                continue;
            }
            let naive: BTreeSet<Embedding> =
                naive_match(&p, &g).into_iter().map(|m| m.embedding).collect();
            let brute = exhaustive_embeddings(&p, &g);
            assert_eq!(naive, brute, "seed {seed}");
        }
    }

    /// All injective vertex maps that verify, by definition chasing.
    fn exhaustive_embeddings(p: &PortGraph, g: &PortGraph) -> BTreeSet<Embedding> {
        let pv: Vec<VertexId> = p.vertex_ids().collect();
        let gv: Vec<VertexId> = g.vertex_ids().collect();
        let mut out = BTreeSet::new();
        let mut choice = vec![0usize; pv.len()];
        'outer: loop {
            let map: BTreeMap<VertexId, VertexId> = pv
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, gv[choice[i]]))
                .collect();
            let distinct: BTreeSet<_> = map.values().collect();
            if distinct.len() == pv.len() {
                let emb = Embedding::new(map);
                if verify_embedding(p, g, &emb) == Ok(true) {
                    out.insert(emb);
                }
            }
            // Advance the odometer.
            for i in 0..choice.len() {
                choice[i] += 1;
                if choice[i] < gv.len() {
                    continue 'outer;
                }
                choice[i] = 0;
            }
            break;
        }
        out
    }

    #[test]
    fn matches_equal_naive_filtered_by_convexity() {
        let gs = GateSet::t_h_cx();
        let patterns: Vec<PortGraph> = (0..25u64)
            .map(|s| sample::random_circuit_pattern(s, 3, 4, false))
            .collect();
        let m = Matcher::compile(&patterns).unwrap();
        for seed in 100..140u64 {
            let subj_circ = random_circuit(4, 25, &gs, seed).unwrap();
            let g = circuit_to_portgraph(&subj_circ, &gs).unwrap();
            let got: BTreeSet<(u32, Embedding)> = m
                .find_matches(&g, MatchOptions { convex_only: true })
                .unwrap()
                .into_iter()
                .map(|mm| (mm.pattern.0, mm.embedding))
                .collect();
            let mut want = BTreeSet::new();
            for (i, p) in patterns.iter().enumerate() {
                for mm in naive_match(p, &g) {
                    if mm.convex {
                        want.insert((i as u32, mm.embedding));
                    }
                }
            }
            assert_eq!(got, want, "seed {seed}: convex match sets differ");
        }
    }

    #[test]
    fn nonconvex_mode_is_verified_superset() {
        let gs = GateSet::t_h_cx();
        let patterns: Vec<PortGraph> = (200..215u64)
            .map(|s| sample::random_circuit_pattern(s, 3, 3, false))
            .collect();
        let m = Matcher::compile(&patterns).unwrap();
        for seed in 300..315u64 {
            let subj = circuit_to_portgraph(&random_circuit(3, 18, &gs, seed).unwrap(), &gs).unwrap();
            let relaxed = m
                .find_matches(&subj, MatchOptions { convex_only: false })
                .unwrap();
            let convex_only = m
                .find_matches(&subj, MatchOptions { convex_only: true })
                .unwrap();
            // Every reported match verifies; the relaxed set contains the
            // convex set.
            for mm in &relaxed {
                let p = &patterns[mm.pattern.0 as usize];
                assert_eq!(verify_embedding(p, &subj, &mm.embedding), Ok(true));
            }
            let relaxed_set: BTreeSet<_> =
                relaxed.iter().map(|m| (m.pattern, m.embedding.clone())).collect();
            for mm in &convex_only {
                assert!(relaxed_set.contains(&(mm.pattern, mm.embedding.clone())));
            }
        }
    }

    #[test]
    fn non_flat_subject_rejected() {
        let m = Matcher::compile(&[chain2()]).unwrap();
        let mut b = PortGraph::builder();
        let v0 = b
            .add_vertex(Weight::atom("x"), [PortLabel(0), PortLabel(1)])
            .unwrap();
        let v1 = b
            .add_vertex(Weight::atom("x"), [PortLabel(0), PortLabel(1)])
            .unwrap();
        b.connect((v0, PortLabel(1)), (v1, PortLabel(0))).unwrap();
        b.connect((v1, PortLabel(1)), (v0, PortLabel(0))).unwrap();
        let g = b.build().unwrap();
        assert_eq!(
            m.find_matches(&g, MatchOptions::default()),
            Err(MatchError::NotFlat)
        );
    }

    #[test]
    fn save_load_round_trip() {
        let patterns: Vec<PortGraph> = (0..12u64)
            .map(|s| sample::random_circuit_pattern(s, 3, 3, false))
            .collect();
        let m = Matcher::compile(&patterns).unwrap();
        let bytes = m.save();
        assert_eq!(bytes, m.save(), "save must be deterministic");
        let loaded = Matcher::load(&bytes).unwrap();
        assert_eq!(loaded.save(), bytes, "reload must reserialize identically");
        let gs = GateSet::t_h_cx();
        for seed in 0..10u64 {
            let g = circuit_to_portgraph(&random_circuit(3, 15, &gs, seed).unwrap(), &gs).unwrap();
            assert_eq!(
                m.find_matches(&g, MatchOptions::default()).unwrap(),
                loaded.find_matches(&g, MatchOptions::default()).unwrap()
            );
        }
    }

    #[test]
    fn load_rejects_corruption() {
        let m = Matcher::compile(&[chain2()]).unwrap();
        let good = m.save();
        assert!(matches!(Matcher::load(b"nope"), Err(LoadError::BadMagic)));
        let mut bad_version = good.clone();
        bad_version[4] = 99;
        // Checksum now fails before the version is read; flip both.
        let body_len = bad_version.len() - 8;
        let sum = format::fnv1a64(&bad_version[..body_len]);
        bad_version[body_len..].copy_from_slice(&sum.to_le_bytes());
        assert!(matches!(
            Matcher::load(&bad_version),
            Err(LoadError::UnsupportedVersion(99))
        ));
        let mut corrupt = good.clone();
        let mid = corrupt.len() / 2;
        corrupt[mid] ^= 0xff;
        assert!(matches!(
            Matcher::load(&corrupt),
            Err(LoadError::Checksum { .. })
        ));
        let truncated = &good[..good.len() - 10];
        assert!(matches!(
            Matcher::load(truncated),
            Err(LoadError::Checksum { .. }) | Err(LoadError::Truncated)
        ));
    }

    #[test]
    fn deterministic_output_order() {
        let patterns: Vec<PortGraph> = (40..55u64)
            .map(|s| sample::random_circuit_pattern(s, 2, 3, false))
            .collect();
        let m = Matcher::compile(&patterns).unwrap();
        let gs = GateSet::t_h_cx();
        let g = circuit_to_portgraph(&random_circuit(3, 20, &gs, 7).unwrap(), &gs).unwrap();
        let a = m.find_matches(&g, MatchOptions::default()).unwrap();
        let b = m.find_matches(&g, MatchOptions::default()).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(a, sorted, "output must be in canonical order");
        let keys: BTreeSet<_> = a.iter().map(|m| (m.pattern, m.embedding.clone())).collect();
        assert_eq!(keys.len(), a.len(), "(pattern, map) pairs must be unique");
    }
}
