//! Multidimensional prefix tree over string tuples.
//!
//! A `d`-dimensional tree is a prefix tree over the first string whose nodes
//! each hold a `(d-1)`-dimensional tree for the remaining strings. Inserting
//! a tuple stores its id at the node chain spelling all of its strings;
//! querying a subject tuple reports every stored tuple that is a
//! componentwise prefix of it. Children are keyed by the canonical byte
//! encoding of characters, so serialization is deterministic.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::canon::{StringChar, StringTuple};
use crate::format::{LoadError, Reader};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrieError {
    #[error("tuple arity {got} does not match tree dimension {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("id {0} already inserted")]
    DuplicateId(u32),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Node {
    children: BTreeMap<Box<[u8]>, usize>,
    /// Root of the next-dimension subtree attached to this node.
    sub: Option<usize>,
    /// Ids of tuples ending exactly here (last dimension only).
    ids: Vec<u32>,
}

/// Counts reported by [`PrefixTree::stats`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeStats {
    pub nodes: usize,
    pub depth: usize,
    pub ids: usize,
}

/// A prefix tree of fixed dimension (tuple arity).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixTree {
    dims: usize,
    nodes: Vec<Node>,
    inserted: BTreeSet<u32>,
}

/// Character supply for queries. Implementations may generate characters on
/// demand; positions within one dimension are requested in increasing order,
/// possibly several times (once per chain entered in that dimension).
pub trait TupleSource {
    fn arity(&self) -> usize;
    /// Encoded character `pos` of dimension `dim`, or `None` past the end.
    fn char_bytes(&mut self, dim: usize, pos: usize) -> Option<&[u8]>;
}

/// A [`TupleSource`] over a materialized [`StringTuple`].
pub struct EncodedTuple {
    encoded: Vec<Vec<Vec<u8>>>,
}

impl EncodedTuple {
    pub fn new(t: &StringTuple) -> Self {
        EncodedTuple {
            encoded: t
                .strings
                .iter()
                .map(|s| s.iter().map(StringChar::encoded).collect())
                .collect(),
        }
    }
}

impl TupleSource for EncodedTuple {
    fn arity(&self) -> usize {
        self.encoded.len()
    }

    fn char_bytes(&mut self, dim: usize, pos: usize) -> Option<&[u8]> {
        self.encoded[dim].get(pos).map(Vec::as_slice)
    }
}

impl PrefixTree {
    pub fn new(dims: usize) -> Self {
        assert!(dims >= 1, "dimension must be at least 1");
        PrefixTree {
            dims,
            nodes: vec![Node::default()],
            inserted: BTreeSet::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    fn alloc(&mut self) -> usize {
        self.nodes.push(Node::default());
        self.nodes.len() - 1
    }

    /// Insert a tuple under `id`. Ids are unique per tree.
    pub fn insert(&mut self, tuple: &StringTuple, id: u32) -> Result<(), TrieError> {
        if tuple.arity() != self.dims {
            return Err(TrieError::ArityMismatch {
                expected: self.dims,
                got: tuple.arity(),
            });
        }
        if !self.inserted.insert(id) {
            return Err(TrieError::DuplicateId(id));
        }
        let mut cur = 0usize;
        for (dim, s) in tuple.strings.iter().enumerate() {
            for ch in s {
                let key: Box<[u8]> = ch.encoded().into();
                cur = match self.nodes[cur].children.get(&key) {
                    Some(&n) => n,
                    None => {
                        let n = self.alloc();
                        self.nodes[cur].children.insert(key, n);
                        n
                    }
                };
            }
            if dim + 1 < self.dims {
                cur = match self.nodes[cur].sub {
                    Some(n) => n,
                    None => {
                        let n = self.alloc();
                        self.nodes[cur].sub = Some(n);
                        n
                    }
                };
            }
        }
        self.nodes[cur].ids.push(id);
        Ok(())
    }

    /// All ids whose tuples are componentwise prefixes of `subject`.
    pub fn query(&self, subject: &StringTuple) -> Result<BTreeSet<u32>, TrieError> {
        self.query_source(&mut EncodedTuple::new(subject))
            .map(|(ids, _)| ids)
    }

    /// Query from a lazy character source. Also returns the number of
    /// character lookups per dimension chain entered (instrumentation).
    pub fn query_source(
        &self,
        source: &mut dyn TupleSource,
    ) -> Result<(BTreeSet<u32>, Vec<usize>), TrieError> {
        if source.arity() != self.dims {
            return Err(TrieError::ArityMismatch {
                expected: self.dims,
                got: source.arity(),
            });
        }
        let mut out = BTreeSet::new();
        let mut chain_visits = Vec::new();
        self.run_chain(0, 0, source, &mut out, &mut chain_visits);
        Ok((out, chain_visits))
    }

    /// Traverse dimension `dim` from `node`, reporting ids and recursing into
    /// next-dimension subtrees at every visited node.
    fn run_chain(
        &self,
        node: usize,
        dim: usize,
        source: &mut dyn TupleSource,
        out: &mut BTreeSet<u32>,
        chain_visits: &mut Vec<usize>,
    ) {
        let chain_idx = chain_visits.len();
        chain_visits.push(0);
        let mut cur = node;
        let mut pos = 0usize;
        loop {
            out.extend(self.nodes[cur].ids.iter().copied());
            if let Some(sub) = self.nodes[cur].sub {
                self.run_chain(sub, dim + 1, source, out, chain_visits);
            }
            let Some(next) = source
                .char_bytes(dim, pos)
                .and_then(|key| self.nodes[cur].children.get(key))
            else {
                break;
            };
            chain_visits[chain_idx] += 1;
            cur = *next;
            pos += 1;
        }
    }

    /// Stage one of a two-stage query: traverse dimensions `0..stop_dim`
    /// from the root, collecting ids reported on the way and the roots of
    /// the `stop_dim` subtrees reached. A later stage resumes from those
    /// roots with [`PrefixTree::resume_query`], typically with a different
    /// (per-candidate) source for the remaining dimensions.
    pub(crate) fn query_prefix_dims(
        &self,
        stop_dim: usize,
        source: &mut dyn TupleSource,
    ) -> (BTreeSet<u32>, Vec<usize>) {
        let mut ids = BTreeSet::new();
        let mut entries = Vec::new();
        self.descend(0, 0, stop_dim, source, &mut ids, &mut entries);
        (ids, entries)
    }

    fn descend(
        &self,
        node: usize,
        dim: usize,
        stop_dim: usize,
        source: &mut dyn TupleSource,
        ids: &mut BTreeSet<u32>,
        entries: &mut Vec<usize>,
    ) {
        if dim == stop_dim {
            entries.push(node);
            return;
        }
        let mut cur = node;
        let mut pos = 0usize;
        loop {
            ids.extend(self.nodes[cur].ids.iter().copied());
            if let Some(sub) = self.nodes[cur].sub {
                self.descend(sub, dim + 1, stop_dim, source, ids, entries);
            }
            let Some(next) = source
                .char_bytes(dim, pos)
                .and_then(|key| self.nodes[cur].children.get(key))
            else {
                break;
            };
            cur = *next;
            pos += 1;
        }
    }

    /// Stage two: continue a query from `entry` (a subtree root recorded by
    /// [`PrefixTree::query_prefix_dims`]) at dimension `start_dim`.
    pub(crate) fn resume_query(
        &self,
        entry: usize,
        start_dim: usize,
        source: &mut dyn TupleSource,
        out: &mut BTreeSet<u32>,
    ) {
        let mut chain_visits = Vec::new();
        self.run_chain(entry, start_dim, source, out, &mut chain_visits);
    }

    /// Node count, maximum root-to-node depth (across dimensions), id count.
    pub fn stats(&self) -> TreeStats {
        fn depth_of(t: &PrefixTree, node: usize, d: usize, max: &mut usize) {
            *max = (*max).max(d);
            for &c in t.nodes[node].children.values() {
                depth_of(t, c, d + 1, max);
            }
            if let Some(s) = t.nodes[node].sub {
                depth_of(t, s, d + 1, max);
            }
        }
        let mut depth = 0;
        depth_of(self, 0, 0, &mut depth);
        TreeStats {
            nodes: self.nodes.len(),
            depth,
            ids: self.inserted.len(),
        }
    }

    /// Canonical serialization: preorder, children in key order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        self.write_node(0, &mut out);
        out
    }

    fn write_node(&self, node: usize, out: &mut Vec<u8>) {
        let n = &self.nodes[node];
        out.extend_from_slice(&(n.ids.len() as u32).to_le_bytes());
        for &id in &n.ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        match n.sub {
            Some(s) => {
                out.push(1);
                self.write_node(s, out);
            }
            None => out.push(0),
        }
        out.extend_from_slice(&(n.children.len() as u32).to_le_bytes());
        for (key, &child) in &n.children {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key);
            self.write_node(child, out);
        }
    }

    pub fn from_reader(r: &mut Reader) -> Result<Self, LoadError> {
        let dims = r.u32()? as usize;
        if dims == 0 {
            return Err(LoadError::Malformed("zero-dimensional tree".into()));
        }
        let mut tree = PrefixTree {
            dims,
            nodes: vec![Node::default()],
            inserted: BTreeSet::new(),
        };
        tree.read_node(0, r)?;
        Ok(tree)
    }

    fn read_node(&mut self, node: usize, r: &mut Reader) -> Result<(), LoadError> {
        let n_ids = r.u32()? as usize;
        for _ in 0..n_ids {
            let id = r.u32()?;
            self.nodes[node].ids.push(id);
            if !self.inserted.insert(id) {
                return Err(LoadError::Malformed(format!("duplicate id {id}")));
            }
        }
        if r.u8()? == 1 {
            let s = self.alloc();
            self.nodes[node].sub = Some(s);
            self.read_node(s, r)?;
        }
        let n_children = r.u32()? as usize;
        let mut prev_key: Option<Box<[u8]>> = None;
        for _ in 0..n_children {
            let klen = r.u16()? as usize;
            let key: Box<[u8]> = r.take(klen)?.into();
            if prev_key.as_ref().is_some_and(|p| p >= &key) {
                return Err(LoadError::Malformed("child keys out of order".into()));
            }
            prev_key = Some(key.clone());
            let c = self.alloc();
            self.nodes[node].children.insert(key, c);
            self.read_node(c, r)?;
        }
        Ok(())
    }
}
