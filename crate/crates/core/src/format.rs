//! Binary encoding primitives shared by the matcher file format.
//!
//! All integers are little-endian; variable-length fields carry a length
//! prefix. Encodings are canonical: equal values produce identical bytes.

use thiserror::Error;

use crate::graph::{GraphBuilder, PortGraph, PortLabel, VertexId, Weight};

/// Errors raised when decoding a matcher file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("bad magic bytes (not a matcher file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("malformed payload: {0}")]
    Malformed(String),
}

/// FNV-1a, 64 bit. Used as the trailing integrity checksum.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn encode_weight(w: &Weight, out: &mut Vec<u8>) {
    match w {
        Weight::Unlabelled => out.push(0),
        Weight::Atom(s) => {
            out.push(1);
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        Weight::Frag(inner, idx) => {
            out.push(2);
            encode_weight(inner, out);
            out.extend_from_slice(&idx.to_le_bytes());
        }
        Weight::Root => out.push(3),
    }
}

/// Sequential reader over a byte buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], LoadError> {
        if self.pos + n > self.buf.len() {
            return Err(LoadError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, LoadError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, LoadError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, LoadError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, LoadError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn weight(&mut self) -> Result<Weight, LoadError> {
        match self.u8()? {
            0 => Ok(Weight::Unlabelled),
            1 => {
                let len = self.u32()? as usize;
                let bytes = self.take(len)?;
                String::from_utf8(bytes.to_vec())
                    .map(Weight::Atom)
                    .map_err(|_| LoadError::Malformed("weight is not UTF-8".into()))
            }
            2 => {
                let inner = self.weight()?;
                let idx = self.u32()?;
                Ok(Weight::Frag(Box::new(inner), idx))
            }
            3 => Ok(Weight::Root),
            t => Err(LoadError::Malformed(format!("unknown weight tag {t}"))),
        }
    }
}

/// Canonical graph encoding: vertices (weight, ports, pairing), then edges.
pub fn encode_graph(g: &PortGraph, out: &mut Vec<u8>) {
    out.extend_from_slice(&(g.num_vertices() as u32).to_le_bytes());
    for v in g.vertex_ids() {
        encode_weight(g.weight(v), out);
        let ports: Vec<PortLabel> = g.port_labels(v).collect();
        out.extend_from_slice(&(ports.len() as u16).to_le_bytes());
        for p in &ports {
            out.extend_from_slice(&p.0.to_le_bytes());
        }
        let classes = g.classes(v);
        out.extend_from_slice(&(classes.len() as u16).to_le_bytes());
        for &(a, bp) in classes {
            out.extend_from_slice(&a.0.to_le_bytes());
            match bp {
                Some(b) => {
                    out.push(1);
                    out.extend_from_slice(&b.0.to_le_bytes());
                }
                None => out.push(0),
            }
        }
    }
    out.extend_from_slice(&(g.num_edges() as u32).to_le_bytes());
    for e in g.edge_ids() {
        for &(v, p) in &g.edge(e).ends {
            out.extend_from_slice(&(v.0 as u32).to_le_bytes());
            out.extend_from_slice(&p.0.to_le_bytes());
        }
    }
}

pub fn decode_graph(r: &mut Reader) -> Result<PortGraph, LoadError> {
    let mut b = GraphBuilder::internal();
    let n_vertices = r.u32()? as usize;
    for _ in 0..n_vertices {
        let weight = r.weight()?;
        let n_ports = r.u16()? as usize;
        let mut ports = Vec::with_capacity(n_ports);
        for _ in 0..n_ports {
            ports.push(PortLabel(r.u32()?));
        }
        let v = b
            .add_vertex(weight, ports)
            .map_err(|e| LoadError::Malformed(e.to_string()))?;
        let n_classes = r.u16()? as usize;
        let mut classes = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let a = PortLabel(r.u32()?);
            let bp = match r.u8()? {
                0 => None,
                1 => Some(PortLabel(r.u32()?)),
                t => return Err(LoadError::Malformed(format!("bad class tag {t}"))),
            };
            classes.push((a, bp));
        }
        b.set_pairing(v, classes)
            .map_err(|e| LoadError::Malformed(e.to_string()))?;
    }
    let n_edges = r.u32()? as usize;
    for _ in 0..n_edges {
        let v0 = VertexId(r.u32()? as usize);
        let p0 = PortLabel(r.u32()?);
        let v1 = VertexId(r.u32()? as usize);
        let p1 = PortLabel(r.u32()?);
        b.connect((v0, p0), (v1, p1))
            .map_err(|e| LoadError::Malformed(e.to_string()))?;
    }
    b.build().map_err(|e| LoadError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    #[test]
    fn graph_encoding_round_trips() {
        let gs = sample::mixed_gate_set();
        for seed in 0..30 {
            let g = sample::random_flat_graph(seed, 3, 8, &gs, true);
            let mut bytes = Vec::new();
            encode_graph(&g, &mut bytes);
            let back = decode_graph(&mut Reader::new(&bytes)).unwrap();
            assert_eq!(g, back);
            let mut again = Vec::new();
            encode_graph(&back, &mut again);
            assert_eq!(bytes, again);
        }
    }

    #[test]
    fn truncation_detected() {
        let g = sample::random_flat_graph(7, 3, 6, &sample::mixed_gate_set(), false);
        let mut bytes = Vec::new();
        encode_graph(&g, &mut bytes);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            decode_graph(&mut Reader::new(&bytes)),
            Err(LoadError::Truncated) | Err(LoadError::Malformed(_))
        ));
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
