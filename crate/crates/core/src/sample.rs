//! Seeded random graph generators, shared by the test suites and the
//! benchmark harness.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{circuit_to_portgraph, random_circuit, GateSet};
use crate::graph::{GraphBuilder, PortGraph, PortState};

/// A gate set with arities 1..3, used to generate flat port graphs whose
/// vertices can sit on up to three linear paths.
pub fn mixed_gate_set() -> GateSet {
    GateSet::new()
        .with_gate("A", 1, 0, false)
        .with_gate("B", 1, 0, false)
        .with_gate("C", 2, 0, false)
        .with_gate("D", 3, 0, false)
}

/// A random flat port graph: a random circuit over `gs`, optionally with some
/// open ports removed (which introduces odd-degree vertices and pairing
/// singletons without changing the path structure).
pub fn random_flat_graph(
    seed: u64,
    q: usize,
    n_gates: usize,
    gs: &GateSet,
    drop_open_ports: bool,
) -> PortGraph {
    let c = random_circuit(q, n_gates, gs, seed).expect("valid generator inputs");
    let g = circuit_to_portgraph(&c, gs).expect("generated circuits are valid");
    if !drop_open_ports {
        return g;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    drop_some_open_ports(&g, &mut rng)
}

fn drop_some_open_ports(g: &PortGraph, rng: &mut ChaCha8Rng) -> PortGraph {
    let mut b = GraphBuilder::default();
    for v in g.vertex_ids() {
        let mut dropped: Vec<_> = Vec::new();
        // Entire open-open classes may go; besides that, at most one single
        // open port per vertex, keeping the singleton parity rule intact.
        let mut odd_dropped = false;
        for &(a, bp) in g.classes(v) {
            let a_open = g.port_state(v, a) == Some(PortState::Open);
            let b_open = bp.map(|x| g.port_state(v, x) == Some(PortState::Open));
            if a_open && b_open == Some(true) && rng.next_u64().is_multiple_of(6) {
                dropped.push(a);
                dropped.push(bp.unwrap());
            } else if !odd_dropped && rng.next_u64().is_multiple_of(4) {
                // Drop a single open port only when its partner keeps an
                // edge, so no edgeless singleton classes appear.
                if a_open && b_open == Some(false) {
                    dropped.push(a);
                    odd_dropped = true;
                } else if b_open == Some(true) && !a_open {
                    dropped.push(bp.unwrap());
                    odd_dropped = true;
                }
            }
        }
        let keep: Vec<_> = g.port_labels(v).filter(|p| !dropped.contains(p)).collect();
        let nv = b
            .add_vertex(g.weight(v).clone(), keep.iter().copied())
            .unwrap();
        let classes: Vec<_> = g
            .classes(v)
            .iter()
            .filter_map(|&(a, bp)| {
                let a_kept = keep.contains(&a);
                let b_kept = bp.map(|x| keep.contains(&x)).unwrap_or(false);
                match (a_kept, b_kept) {
                    (true, true) => Some((a, bp)),
                    (true, false) => Some((a, None)),
                    (false, true) => Some((bp.unwrap(), None)),
                    (false, false) => None,
                }
            })
            .collect();
        b.set_pairing(nv, classes).unwrap();
    }
    for e in g.edge_ids() {
        let [a, bx] = g.edge(e).ends;
        b.connect(a, bx).unwrap();
    }
    b.build().expect("port drop preserves validity")
}

/// A random flat *connected* graph; resamples with derived seeds until
/// connected (and nonempty).
pub fn random_flat_connected_graph(
    seed: u64,
    q: usize,
    n_gates: usize,
    gs: &GateSet,
    drop_open_ports: bool,
) -> PortGraph {
    for attempt in 0..1000u64 {
        let g = random_flat_graph(
            seed.wrapping_add(attempt.wrapping_mul(0x5851_f42d_4c95_7f2d)),
            q,
            n_gates,
            gs,
            drop_open_ports,
        );
        if g.num_vertices() > 0 && g.is_connected() {
            return g;
        }
    }
    panic!("could not sample a connected graph for seed {seed}");
}

/// A random connected pattern over the T/H/CX set: width at most `max_q`,
/// at most `per_qubit` gates per qubit. When `edge_saturated` is set, every
/// used qubit carries at least two gates, so every pairing class of the
/// result has an edge.
pub fn random_circuit_pattern(
    seed: u64,
    max_q: usize,
    per_qubit: usize,
    edge_saturated: bool,
) -> PortGraph {
    let one_qubit = GateSet::new()
        .with_gate("T", 1, 0, false)
        .with_gate("H", 1, 0, false);
    let full = GateSet::t_h_cx();
    for attempt in 0..4000u64 {
        let s = seed.wrapping_add(attempt.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let q = 1 + (rng.next_u64() % max_q as u64) as usize;
        let gs = if q == 1 { &one_qubit } else { &full };
        let max_gates = (q * per_qubit).max(1);
        let n = 1 + (rng.next_u64() % max_gates as u64) as usize;
        let c = match random_circuit(q, n, gs, s) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let g = match circuit_to_portgraph(&c, gs) {
            Ok(g) => g,
            Err(_) => continue,
        };
        if g.num_vertices() == 0 || !g.is_connected() {
            continue;
        }
        if g.metrics().depth > per_qubit {
            continue;
        }
        if edge_saturated && !g.is_edge_saturated() {
            continue;
        }
        return g;
    }
    panic!("could not sample a pattern for seed {seed}");
}

/// A random flat connected graph in which every pairing class carries an
/// edge (no fully open classes); resamples until one is found.
pub fn random_saturated_connected_graph(
    seed: u64,
    q: usize,
    n_gates: usize,
    gs: &GateSet,
    drop_open_ports: bool,
) -> PortGraph {
    for attempt in 0..4000u64 {
        let g = random_flat_graph(
            seed.wrapping_add(attempt.wrapping_mul(0x94d0_49bb_1331_11eb)),
            q,
            n_gates,
            gs,
            drop_open_ports,
        );
        if g.num_vertices() > 0 && g.is_connected() && g.is_edge_saturated() {
            return g;
        }
    }
    panic!("could not sample a saturated connected graph for seed {seed}");
}

/// All nonempty connected edge subsets of `g`, for brute-force oracles.
/// Returns nothing if the graph has more than `max_edges` edges.
pub fn connected_edge_subsets(
    g: &PortGraph,
    max_edges: usize,
) -> Vec<std::collections::BTreeSet<crate::graph::EdgeId>> {
    use crate::graph::EdgeId;
    let n = g.num_edges();
    if n == 0 || n > max_edges {
        return Vec::new();
    }
    let mut out = Vec::new();
    'mask: for mask in 1u64..(1u64 << n) {
        let edges: Vec<EdgeId> = (0..n).filter(|i| mask & (1 << i) != 0).map(EdgeId).collect();
        // Union-find over the endpoints.
        let mut parent: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        fn find(parent: &mut std::collections::BTreeMap<usize, usize>, x: usize) -> usize {
            let p = parent[&x];
            if p == x {
                x
            } else {
                let r = find(parent, p);
                parent.insert(x, r);
                r
            }
        }
        for &e in &edges {
            for (v, _) in g.edge(e).ends {
                parent.entry(v.0).or_insert(v.0);
            }
            let [a, b] = g.edge(e).ends.map(|(v, _)| v.0);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent.insert(ra, rb);
        }
        let mut root = None;
        for &v in parent.keys().cloned().collect::<Vec<_>>().iter() {
            let r = find(&mut parent, v);
            match root {
                None => root = Some(r),
                Some(r0) if r0 == r => {}
                _ => continue 'mask,
            }
        }
        out.push(edges.into_iter().collect());
    }
    out
}

/// Whether the subgraph given by an edge subset is convex in `g`: its width
/// equals the number of distinct linear paths of `g` its edges touch.
pub fn edge_subset_convex(
    g: &PortGraph,
    subset: &std::collections::BTreeSet<crate::graph::EdgeId>,
) -> bool {
    let (sub, _, _) = g.edge_subgraph(subset);
    let touched: std::collections::BTreeSet<_> =
        subset.iter().map(|&e| g.edge_path(e)).collect();
    sub.width() == touched.len()
}
