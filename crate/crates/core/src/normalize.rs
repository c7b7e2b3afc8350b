//! Normalization to at most two linear paths per vertex.
//!
//! Vertices with three or more pairing classes are broken into a chain of
//! fragments, threading each class through the chain: fragment `j` carries
//! the exit side of class `j` and the entry side of class `j+1`, joined by
//! internal connector edges. The first and last fragments keep their extreme
//! classes whole. Width is unchanged when every threaded class carries an
//! edge; the transformation is applied identically to patterns and subjects,
//! so matches are preserved.
//!
//! The split is triggered by the pairing-class count (which embeddings
//! preserve pointwise), not by the path count, so a pattern vertex and its
//! image always fragment in lockstep.

use thiserror::Error;

use crate::graph::{EdgeId, GraphBuilder, PortGraph, PortLabel, VertexId, Weight};

/// A normalized graph plus the map from its vertices back to the original's.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub graph: PortGraph,
    /// For every vertex of `graph`, the original vertex it came from.
    pub back_map: Vec<VertexId>,
    /// For every edge of `graph`, the original edge it came from (`None` for
    /// fragment connector edges).
    pub edge_back: Vec<Option<EdgeId>>,
}

impl Normalized {
    /// Whether the transformation was the identity.
    pub fn is_identity(&self) -> bool {
        self.back_map.iter().enumerate().all(|(i, v)| v.0 == i)
            && self.graph.num_vertices() == self.back_map.len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("graph is not flat")]
    NotFlat,
}

/// Break every vertex with more than two pairing classes into a fragment
/// chain so that all vertices of the result lie on at most two linear paths.
///
/// Fragments carry derived weights `(original weight, fragment index)` and
/// connector edges use reserved internal port labels, so normalized pattern
/// and subject graphs still embed exactly like the originals.
pub fn normalize_two_paths(g: &PortGraph) -> Result<Normalized, NormalizeError> {
    if !g.is_flat() {
        return Err(NormalizeError::NotFlat);
    }
    let needs_split: Vec<bool> = g.vertex_ids().map(|v| g.classes(v).len() > 2).collect();
    if needs_split.iter().all(|&x| !x) {
        return Ok(Normalized {
            graph: g.clone(),
            back_map: g.vertex_ids().collect(),
            edge_back: g.edge_ids().map(Some).collect(),
        });
    }

    let mut b = GraphBuilder::internal();
    let mut back_map: Vec<VertexId> = Vec::new();
    let mut edge_back: Vec<Option<EdgeId>> = Vec::new();
    // For every original (vertex, port): the fragment vertex now carrying it.
    let mut port_home: std::collections::BTreeMap<(VertexId, PortLabel), VertexId> =
        std::collections::BTreeMap::new();

    for v in g.vertex_ids() {
        let classes = g.classes(v);
        if !needs_split[v.0] {
            let nv = b
                .add_vertex(g.weight(v).clone(), g.port_labels(v))
                .expect("copied ports are distinct");
            b.set_pairing(nv, classes.iter().copied()).expect("copied pairing");
            back_map.push(v);
            for p in g.port_labels(v) {
                port_home.insert((v, p), nv);
            }
            continue;
        }

        // Chain of k-1 fragments for k classes. Fragment j (0-based) carries:
        //   j == 0:    class 0 whole, entry of class 1, CONN_OUT
        //   middle:    CONN_IN + exit of class j, entry of class j+1, CONN_OUT
        //   j == k-2:  CONN_IN + exit of class k-2, class k-1 whole
        // "Entry" is the smaller port of a class, "exit" the partner.
        let k = classes.len();
        let mut fragments = Vec::with_capacity(k - 1);
        for j in 0..k - 1 {
            let mut ports: Vec<PortLabel> = Vec::new();
            let mut pairing: Vec<(PortLabel, Option<PortLabel>)> = Vec::new();
            if j == 0 {
                let (a, bp) = classes[0];
                ports.push(a);
                ports.extend(bp);
                pairing.push((a, bp));
            } else {
                let (_, exit) = classes[j];
                ports.push(PortLabel::CONN_IN);
                ports.extend(exit);
                pairing.push((PortLabel::CONN_IN, exit));
            }
            if j == k - 2 {
                let (a, bp) = classes[k - 1];
                ports.push(a);
                ports.extend(bp);
                pairing.push((a, bp));
            } else {
                let (entry, _) = classes[j + 1];
                ports.push(entry);
                ports.push(PortLabel::CONN_OUT);
                pairing.push((entry, Some(PortLabel::CONN_OUT)));
            }
            let weight = Weight::Frag(Box::new(g.weight(v).clone()), j as u32);
            let nv = b.add_vertex(weight, ports).expect("fragment ports distinct");
            b.set_pairing(nv, pairing).expect("fragment pairing valid");
            back_map.push(v);
            fragments.push(nv);
        }
        // Record which fragment now holds each original port.
        for (j, &(a, bp)) in classes.iter().enumerate() {
            let (entry_home, exit_home) = match j {
                0 => (fragments[0], fragments[0]),
                j if j == k - 1 => (fragments[k - 2], fragments[k - 2]),
                j => (fragments[j - 1], fragments[j]),
            };
            port_home.insert((v, a), entry_home);
            if let Some(bp) = bp {
                port_home.insert((v, bp), exit_home);
            }
        }
        for w in fragments.windows(2) {
            b.connect((w[0], PortLabel::CONN_OUT), (w[1], PortLabel::CONN_IN))
                .expect("connector ports are fresh");
            edge_back.push(None);
        }
    }

    for e in g.edge_ids() {
        let [(v0, p0), (v1, p1)] = g.edge(e).ends;
        b.connect((port_home[&(v0, p0)], p0), (port_home[&(v1, p1)], p1))
            .expect("original edges stay valid");
        edge_back.push(Some(e));
    }

    Ok(Normalized {
        graph: b.build().expect("normalized graph builds"),
        back_map,
        edge_back,
    })
}
