//! Pattern embeddings: verification and convexity.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{PortGraph, PortState, VertexId};

/// An injective map from the vertices of a pattern into a subject graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Embedding {
    pub vertex_map: BTreeMap<VertexId, VertexId>,
}

impl Embedding {
    pub fn new(vertex_map: BTreeMap<VertexId, VertexId>) -> Self {
        Embedding { vertex_map }
    }

    pub fn image(&self, v: VertexId) -> Option<VertexId> {
        self.vertex_map.get(&v).copied()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbedError {
    #[error("vertex map does not cover pattern vertex {0:?}")]
    MissingVertex(VertexId),
    #[error("vertex map references nonexistent handle {0:?}")]
    BadHandle(VertexId),
    #[error("embedding does not satisfy the embedding conditions")]
    NotAnEmbedding,
    #[error("subject graph is not flat")]
    SubjectNotFlat,
}

/// Check whether `e` is a valid embedding of `p` into `g`.
///
/// Validates port presence pointwise, weight preservation, injectivity of the
/// vertex map, and that the induced edge map is well-defined and injective.
/// A map that references nonexistent handles is an error, distinct from a
/// well-formed map that simply fails the conditions.
pub fn verify_embedding(p: &PortGraph, g: &PortGraph, e: &Embedding) -> Result<bool, EmbedError> {
    for (&pv, &gv) in &e.vertex_map {
        if !p.contains_vertex(pv) || !g.contains_vertex(gv) {
            return Err(EmbedError::BadHandle(if !p.contains_vertex(pv) {
                pv
            } else {
                gv
            }));
        }
    }
    for pv in p.vertex_ids() {
        if !e.vertex_map.contains_key(&pv) {
            return Err(EmbedError::MissingVertex(pv));
        }
    }

    // Injectivity of the vertex map.
    let images: BTreeSet<_> = e.vertex_map.values().collect();
    if images.len() != e.vertex_map.len() {
        return Ok(false);
    }

    for (&pv, &gv) in &e.vertex_map {
        // Port presence agrees pointwise, hence degrees are preserved.
        if !p.port_labels(pv).eq(g.port_labels(gv)) {
            return Ok(false);
        }
        if p.weight(pv) != g.weight(gv) {
            return Ok(false);
        }
    }

    // Induced edge map: well-defined and injective.
    let mut edge_images = BTreeSet::new();
    for pe in p.edge_ids() {
        let [(v0, p0), (v1, p1)] = p.edge(pe).ends;
        let (g0, g1) = (e.vertex_map[&v0], e.vertex_map[&v1]);
        let (Some(PortState::Linked(ge0)), Some(PortState::Linked(ge1))) =
            (g.port_state(g0, p0), g.port_state(g1, p1))
        else {
            return Ok(false);
        };
        if ge0 != ge1 {
            return Ok(false);
        }
        if !edge_images.insert(ge0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Check whether a verified embedding is convex.
///
/// An embedding is convex iff every subject subgraph containing its image has
/// width at least the pattern's width. The minimum over such subgraphs equals
/// the number of distinct subject linear paths touched by the image, so the
/// check reduces to comparing that count with the pattern width.
pub fn is_convex(p: &PortGraph, g: &PortGraph, e: &Embedding) -> Result<bool, EmbedError> {
    if !g.is_flat() {
        return Err(EmbedError::SubjectNotFlat);
    }
    if !verify_embedding(p, g, e)? {
        return Err(EmbedError::NotAnEmbedding);
    }
    let mut touched = BTreeSet::new();
    for pe in p.edge_ids() {
        let (v0, p0) = p.edge(pe).ends[0];
        let gv = e.vertex_map[&v0];
        let Some(PortState::Linked(ge)) = g.port_state(gv, p0) else {
            unreachable!("verified embedding maps edges to edges");
        };
        touched.insert(g.edge_path(ge));
    }
    Ok(p.width() <= touched.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{PortLabel, Weight};

    fn chain(n: usize, weight: &str) -> PortGraph {
        let mut b = PortGraph::builder();
        let vs: Vec<_> = (0..n)
            .map(|_| {
                b.add_vertex(Weight::atom(weight), [PortLabel(0), PortLabel(1)])
                    .unwrap()
            })
            .collect();
        for w in vs.windows(2) {
            b.connect((w[0], PortLabel(1)), (w[1], PortLabel(0))).unwrap();
        }
        b.build().unwrap()
    }

    fn identity(g: &PortGraph) -> Embedding {
        Embedding::new(g.vertex_ids().map(|v| (v, v)).collect())
    }

    #[test]
    fn identity_map_is_embedding() {
        let g = chain(3, "a");
        assert_eq!(verify_embedding(&g, &g, &identity(&g)), Ok(true));
        assert_eq!(is_convex(&g, &g, &identity(&g)), Ok(true));
    }

    #[test]
    fn degree_mismatch_fails() {
        let mut b = PortGraph::builder();
        let v0 = b.add_vertex(Weight::atom("a"), [PortLabel(0)]).unwrap();
        let v1 = b.add_vertex(Weight::atom("a"), [PortLabel(0)]).unwrap();
        b.connect((v0, PortLabel(0)), (v1, PortLabel(0))).unwrap();
        let p = b.build().unwrap();
        // Subject vertex has an extra port p2.
        let mut b = PortGraph::builder();
        let u0 = b
            .add_vertex(Weight::atom("a"), [PortLabel(0), PortLabel(2)])
            .unwrap();
        let u1 = b.add_vertex(Weight::atom("a"), [PortLabel(0)]).unwrap();
        b.connect((u0, PortLabel(0)), (u1, PortLabel(0))).unwrap();
        let g = b.build().unwrap();
        let e = Embedding::new([(v0, u0), (v1, u1)].into());
        assert_eq!(verify_embedding(&p, &g, &e), Ok(false));
    }

    #[test]
    fn bad_handle_is_error_not_false() {
        let g = chain(2, "a");
        let e = Embedding::new([(VertexId(0), VertexId(7)), (VertexId(1), VertexId(1))].into());
        assert_eq!(
            verify_embedding(&g, &g, &e),
            Err(EmbedError::BadHandle(VertexId(7)))
        );
    }

    #[test]
    fn weight_mismatch_fails() {
        let p = chain(2, "a");
        let g = chain(2, "b");
        assert_eq!(verify_embedding(&p, &g, &identity(&p)), Ok(false));
    }

    /// Independent definition-chasing check, used as the oracle for
    /// `verify_embedding`.
    fn definition_check(p: &PortGraph, g: &PortGraph, map: &BTreeMap<VertexId, VertexId>) -> bool {
        use crate::graph::PortState;
        let mut seen_images = BTreeSet::new();
        for (&pv, &gv) in map {
            if !seen_images.insert(gv) {
                return false;
            }
            let p_ports: Vec<_> = p.port_labels(pv).collect();
            let g_ports: Vec<_> = g.port_labels(gv).collect();
            if p_ports != g_ports || p.weight(pv) != g.weight(gv) {
                return false;
            }
        }
        let mut edge_images = BTreeSet::new();
        for pe in p.edge_ids() {
            let [(v0, p0), (v1, p1)] = p.edge(pe).ends;
            let e0 = match g.port_state(map[&v0], p0) {
                Some(PortState::Linked(e)) => e,
                _ => return false,
            };
            let e1 = match g.port_state(map[&v1], p1) {
                Some(PortState::Linked(e)) => e,
                _ => return false,
            };
            if e0 != e1 || !edge_images.insert(e0) {
                return false;
            }
        }
        true
    }

    #[test]
    fn verify_agrees_with_definition_on_all_injective_maps() {
        use crate::sample;
        let gs = sample::mixed_gate_set();
        for seed in 0..30u64 {
            let p = sample::random_flat_connected_graph(seed, 3, 3, &gs, false);
            let g = sample::random_flat_graph(seed ^ 0xa5, 3, 4, &gs, false);
            if p.num_vertices() > 4 || g.num_vertices() > 6 {
                continue;
            }
            let pv: Vec<_> = p.vertex_ids().collect();
            let gv: Vec<_> = g.vertex_ids().collect();
            let mut choice = vec![0usize; pv.len()];
            'maps: loop {
                let map: BTreeMap<VertexId, VertexId> =
                    pv.iter().enumerate().map(|(i, &v)| (v, gv[choice[i]])).collect();
                let distinct: BTreeSet<_> = map.values().collect();
                if distinct.len() == pv.len() {
                    let emb = Embedding::new(map.clone());
                    assert_eq!(
                        verify_embedding(&p, &g, &emb),
                        Ok(definition_check(&p, &g, &map)),
                        "seed {seed}: verdicts differ for {map:?}"
                    );
                }
                for i in 0..choice.len() {
                    choice[i] += 1;
                    if choice[i] < gv.len() {
                        continue 'maps;
                    }
                    choice[i] = 0;
                }
                break;
            }
        }
    }

    #[test]
    fn convexity_agrees_with_supergraph_minimum() {
        use crate::matcher::naive_match;
        use crate::sample;
        let mut checked = 0;
        for seed in 0..200u64 {
            let p = sample::random_circuit_pattern(seed, 2, 3, false);
            let g = {
                let gs = crate::circuit::GateSet::t_h_cx();
                let c = crate::circuit::random_circuit(3, 5, &gs, seed ^ 0x77).unwrap();
                crate::circuit::circuit_to_portgraph(&c, &gs).unwrap()
            };
            if g.num_edges() > 8 {
                continue;
            }
            for m in naive_match(&p, &g) {
                let fast = is_convex(&p, &g, &m.embedding).unwrap();
                // Brute force: minimum width over all edge supersets of the
                // image (within g) containing the image.
                let image: BTreeSet<crate::graph::EdgeId> = p
                    .edge_ids()
                    .map(|pe| {
                        let (v0, p0) = p.edge(pe).ends[0];
                        match g.port_state(m.embedding.vertex_map[&v0], p0) {
                            Some(PortState::Linked(e)) => e,
                            _ => unreachable!("verified embedding"),
                        }
                    })
                    .collect();
                let rest: Vec<crate::graph::EdgeId> = g
                    .edge_ids()
                    .filter(|e| !image.contains(e))
                    .collect();
                let mut min_width = usize::MAX;
                for mask in 0u64..(1 << rest.len()) {
                    let mut edges = image.clone();
                    for (i, &e) in rest.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            edges.insert(e);
                        }
                    }
                    if edges.is_empty() {
                        min_width = 0;
                        break;
                    }
                    let (sub, _, _) = g.edge_subgraph(&edges);
                    min_width = min_width.min(sub.width());
                }
                let brute = p.width() <= min_width;
                assert_eq!(fast, brute, "seed {seed}");
                checked += 1;
            }
        }
        assert!(checked > 30, "too few embeddings exercised: {checked}");
    }

    #[test]
    fn open_ports_may_map_to_edges() {
        let p = chain(2, "a");
        let g = chain(4, "a");
        // Map the 2-chain onto the middle of the 4-chain.
        let e = Embedding::new([(VertexId(0), VertexId(1)), (VertexId(1), VertexId(2))].into());
        assert_eq!(verify_embedding(&p, &g, &e), Ok(true));
        assert_eq!(is_convex(&p, &g, &e), Ok(true));
    }
}
