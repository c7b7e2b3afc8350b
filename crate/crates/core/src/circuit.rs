//! Quantum-circuit frontend: gate lists, their port-graph encoding, a JSON
//! interchange format, a seeded random generator and gate-symmetry expansion.
//!
//! A gate of arity `n` becomes a vertex with ports `i_1..i_n, o_1..o_n`
//! (labels `2k-2` / `2k-1` for position `k`), paired `i_k ~ o_k`, so linear
//! paths of the resulting graph are exactly the qubit wires. Edges run from
//! the `o` port of a qubit's previous gate to the `i` port of the next one;
//! circuit inputs and outputs stay open.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{PortGraph, PortLabel, PortState, VertexId, Weight};

/// Description of one gate type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateSpec {
    pub arity: usize,
    pub n_params: usize,
    /// Whether swapping the two operands leaves the gate unchanged.
    /// Only meaningful for arity 2.
    pub symmetric: bool,
}

/// The gate set of a computation: gate name to arity, parameter count and
/// symmetry flag.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GateSet {
    gates: BTreeMap<String, GateSpec>,
}

impl GateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_gate(mut self, name: &str, arity: usize, n_params: usize, symmetric: bool) -> Self {
        assert!(arity >= 1, "gate arity must be at least 1");
        self.gates.insert(
            name.to_owned(),
            GateSpec {
                arity,
                n_params,
                symmetric,
            },
        );
        self
    }

    pub fn get(&self, name: &str) -> Option<GateSpec> {
        self.gates.get(name).copied()
    }

    /// Gate names in deterministic (lexicographic) order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.gates.keys().map(String::as_str)
    }

    pub fn max_arity(&self) -> usize {
        self.gates.values().map(|s| s.arity).max().unwrap_or(0)
    }

    /// The T, H, CX set used throughout the benchmarks.
    pub fn t_h_cx() -> Self {
        GateSet::new()
            .with_gate("T", 1, 0, false)
            .with_gate("H", 1, 0, false)
            .with_gate("CX", 2, 0, false)
    }

    /// A broader default set for file inputs.
    pub fn standard() -> Self {
        GateSet::t_h_cx()
            .with_gate("Tdg", 1, 0, false)
            .with_gate("S", 1, 0, false)
            .with_gate("Sdg", 1, 0, false)
            .with_gate("X", 1, 0, false)
            .with_gate("Y", 1, 0, false)
            .with_gate("Z", 1, 0, false)
            .with_gate("CZ", 2, 0, true)
            .with_gate("SWAP", 2, 0, true)
            .with_gate("CCX", 3, 0, false)
            .with_gate("Rx", 1, 1, false)
            .with_gate("Ry", 1, 1, false)
            .with_gate("Rz", 1, 1, false)
    }
}

/// One gate application: name, operand qubits, optional parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub op: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl Gate {
    pub fn new(op: &str, qubits: impl Into<Vec<usize>>) -> Self {
        Gate {
            op: op.to_owned(),
            qubits: qubits.into(),
            params: vec![],
        }
    }
}

/// A circuit: qubit count plus gates in program order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {index}: unknown gate {name:?}")]
    UnknownGate { index: usize, name: String },
    #[error("gate {index}: expected {expected} qubits, got {got}")]
    BadArity {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("gate {index}: qubit {qubit} out of range (num_qubits = {num_qubits})")]
    QubitOutOfRange {
        index: usize,
        qubit: usize,
        num_qubits: usize,
    },
    #[error("gate {index}: duplicate qubit {qubit}")]
    DuplicateQubit { index: usize, qubit: usize },
    #[error("gate {index}: expected {expected} parameters, got {got}")]
    BadParamCount {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid circuit JSON: {0}")]
    Json(String),
    #[error("vertex {0:?} does not have circuit-shaped ports or weight")]
    NotACircuitVertex(VertexId),
    #[error("edge orientation cycle: graph is not a circuit")]
    OrientationCycle,
    #[error("edge does not run from an output port to an input port")]
    BadOrientation,
    #[error("num_qubits {num_qubits} below maximum gate arity {max_arity}")]
    TooFewQubits { num_qubits: usize, max_arity: usize },
}

fn validate(c: &Circuit, gs: &GateSet) -> Result<(), CircuitError> {
    for (index, gate) in c.gates.iter().enumerate() {
        let spec = gs.get(&gate.op).ok_or_else(|| CircuitError::UnknownGate {
            index,
            name: gate.op.clone(),
        })?;
        if gate.qubits.len() != spec.arity {
            return Err(CircuitError::BadArity {
                index,
                expected: spec.arity,
                got: gate.qubits.len(),
            });
        }
        if gate.params.len() != spec.n_params {
            return Err(CircuitError::BadParamCount {
                index,
                expected: spec.n_params,
                got: gate.params.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &q in &gate.qubits {
            if q >= c.num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    index,
                    qubit: q,
                    num_qubits: c.num_qubits,
                });
            }
            if !seen.insert(q) {
                return Err(CircuitError::DuplicateQubit { index, qubit: q });
            }
        }
    }
    Ok(())
}

/// Vertex weight of a gate: the name, plus a fixed-precision parameter
/// fingerprint so weight equality is exact.
pub fn gate_weight(gate: &Gate) -> Weight {
    if gate.params.is_empty() {
        Weight::atom(&gate.op)
    } else {
        let params: Vec<String> = gate.params.iter().map(|p| format!("{p:.9}")).collect();
        Weight::atom(format!("{}({})", gate.op, params.join(",")))
    }
}

fn in_port(k: usize) -> PortLabel {
    PortLabel(2 * k as u32)
}

fn out_port(k: usize) -> PortLabel {
    PortLabel(2 * k as u32 + 1)
}

/// Convert a circuit to its port graph. Qubits that carry no gates contribute
/// no vertices (and no width).
pub fn circuit_to_portgraph(c: &Circuit, gs: &GateSet) -> Result<PortGraph, CircuitError> {
    validate(c, gs)?;
    let mut b = PortGraph::builder();
    let mut last_out: Vec<Option<(VertexId, PortLabel)>> = vec![None; c.num_qubits];
    for gate in &c.gates {
        let arity = gate.qubits.len();
        let ports = (0..arity).flat_map(|k| [in_port(k), out_port(k)]);
        let v = b
            .add_vertex(gate_weight(gate), ports)
            .expect("gate ports are distinct");
        for (k, &q) in gate.qubits.iter().enumerate() {
            if let Some(prev) = last_out[q] {
                b.connect(prev, (v, in_port(k)))
                    .expect("output port used once per qubit");
            }
            last_out[q] = Some((v, out_port(k)));
        }
    }
    Ok(b.build().expect("circuit graphs validate"))
}

/// Recover a circuit from a port graph built with the circuit conventions.
///
/// Gate order is a deterministic topological order of the `o -> i`
/// orientation, and qubit indices are assigned in order of line discovery, so
/// the result equals the original up to commuting-gate reordering and qubit
/// relabelling (exact as a labelled DAG).
pub fn portgraph_to_circuit(g: &PortGraph, gs: &GateSet) -> Result<Circuit, CircuitError> {
    let mut gates: Vec<Gate> = Vec::with_capacity(g.num_vertices());
    for v in g.vertex_ids() {
        let Weight::Atom(w) = g.weight(v) else {
            return Err(CircuitError::NotACircuitVertex(v));
        };
        let (name, params) = parse_weight(w).ok_or(CircuitError::NotACircuitVertex(v))?;
        let spec = gs.get(&name).ok_or_else(|| CircuitError::UnknownGate {
            index: v.0,
            name: name.clone(),
        })?;
        let mut want: Vec<PortLabel> = (0..spec.arity)
            .flat_map(|k| [in_port(k), out_port(k)])
            .collect();
        want.sort_unstable();
        let have: Vec<PortLabel> = g.port_labels(v).collect();
        if have != want || params.len() != spec.n_params {
            return Err(CircuitError::NotACircuitVertex(v));
        }
        gates.push(Gate {
            op: name,
            qubits: vec![usize::MAX; spec.arity],
            params,
        });
    }

    // Every edge must run from an output port to an input port.
    for e in g.edge_ids() {
        let ends = g.edge(e).ends;
        let outs = ends.iter().filter(|(_, p)| p.0 % 2 == 1).count();
        if outs != 1 {
            return Err(CircuitError::BadOrientation);
        }
    }

    // Assign qubit lines by following wires from each open input port.
    let mut line = 0usize;
    for v in g.vertex_ids() {
        for p in g.port_labels(v).collect::<Vec<_>>() {
            if p.0 % 2 != 0 || g.port_state(v, p) != Some(PortState::Open) {
                continue;
            }
            let (mut cv, mut cp) = (v, p);
            loop {
                let k = (cp.0 / 2) as usize;
                gates[cv.0].qubits[k] = line;
                match g.port_state(cv, out_port(k)) {
                    Some(PortState::Linked(e)) => {
                        (cv, cp) = g.edge(e).other_end(cv, out_port(k));
                    }
                    _ => break,
                }
            }
            line += 1;
        }
    }
    if gates.iter().any(|gate| gate.qubits.contains(&usize::MAX)) {
        // Some position was never reached from an open input: a cycle.
        return Err(CircuitError::OrientationCycle);
    }

    // Deterministic topological order (Kahn, smallest handle first).
    let mut indegree: Vec<usize> = g
        .vertex_ids()
        .map(|v| {
            g.port_labels(v)
                .filter(|p| {
                    p.0 % 2 == 0 && matches!(g.port_state(v, *p), Some(PortState::Linked(_)))
                })
                .count()
        })
        .collect();
    let mut ready: std::collections::BTreeSet<VertexId> =
        g.vertex_ids().filter(|v| indegree[v.0] == 0).collect();
    let mut order = Vec::with_capacity(g.num_vertices());
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for p in g.port_labels(v).collect::<Vec<_>>() {
            if p.0 % 2 == 1 {
                if let Some(PortState::Linked(e)) = g.port_state(v, p) {
                    let (u, _) = g.edge(e).other_end(v, p);
                    indegree[u.0] -= 1;
                    if indegree[u.0] == 0 {
                        ready.insert(u);
                    }
                }
            }
        }
    }
    if order.len() != g.num_vertices() {
        return Err(CircuitError::OrientationCycle);
    }

    Ok(Circuit {
        num_qubits: line,
        gates: order.into_iter().map(|v| gates[v.0].clone()).collect(),
    })
}

fn parse_weight(w: &str) -> Option<(String, Vec<f64>)> {
    match w.split_once('(') {
        None => Some((w.to_owned(), Vec::new())),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')')?;
            let params = inner
                .split(',')
                .map(|s| s.parse::<f64>().ok())
                .collect::<Option<Vec<_>>>()?;
            Some((name.to_owned(), params))
        }
    }
}

/// Parse the JSON circuit format and validate it against `gs`.
pub fn parse_circuit(text: &str, gs: &GateSet) -> Result<Circuit, CircuitError> {
    let c: Circuit = serde_json::from_str(text).map_err(|e| CircuitError::Json(e.to_string()))?;
    validate(&c, gs)?;
    Ok(c)
}

/// Emit the JSON circuit format. `parse_circuit` of the result is identity.
pub fn emit_circuit(c: &Circuit) -> String {
    serde_json::to_string(c).expect("circuit serialization cannot fail")
}

/// Generate a seeded random circuit: uniform gate-name choice, uniform choice
/// of distinct qubits, parameters uniform in `[0, 1)`.
///
/// The generator is a ChaCha8 stream with 64-bit modulo reduction for the
/// discrete choices, so identical `(q, n_gates, gate set, seed)` inputs yield
/// identical circuits on every platform.
pub fn random_circuit(
    q: usize,
    n_gates: usize,
    gs: &GateSet,
    seed: u64,
) -> Result<Circuit, CircuitError> {
    if q < gs.max_arity() {
        return Err(CircuitError::TooFewQubits {
            num_qubits: q,
            max_arity: gs.max_arity(),
        });
    }
    let names: Vec<&str> = gs.names().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates = Vec::with_capacity(n_gates);
    for _ in 0..n_gates {
        let name = names[(rng.next_u64() % names.len() as u64) as usize];
        let spec = gs.get(name).unwrap();
        // Partial Fisher-Yates over 0..q for distinct qubits.
        let mut pool: Vec<usize> = (0..q).collect();
        let mut qubits = Vec::with_capacity(spec.arity);
        for _ in 0..spec.arity {
            let i = (rng.next_u64() % pool.len() as u64) as usize;
            qubits.push(pool.swap_remove(i));
        }
        let params = (0..spec.n_params)
            .map(|_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
            .collect();
        gates.push(Gate {
            op: name.to_owned(),
            qubits,
            params,
        });
    }
    Ok(Circuit {
        num_qubits: q,
        gates,
    })
}

/// Enumerate all variants of `c` obtained by swapping the operands of
/// symmetric two-qubit gates, in deterministic order, duplicates removed.
pub fn expand_symmetries(c: &Circuit, gs: &GateSet) -> Vec<Circuit> {
    let sym_positions: Vec<usize> = c
        .gates
        .iter()
        .enumerate()
        .filter(|(_, g)| g.qubits.len() == 2 && gs.get(&g.op).map(|s| s.symmetric).unwrap_or(false))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::with_capacity(1 << sym_positions.len());
    for mask in 0u64..(1u64 << sym_positions.len()) {
        let mut variant = c.clone();
        for (bit, &pos) in sym_positions.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                variant.gates[pos].qubits.swap(0, 1);
            }
        }
        if !out.contains(&variant) {
            out.push(variant);
        }
    }
    out
}
