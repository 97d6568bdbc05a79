//! Similarity graph in CSR layout and its binary file format.
//!
//! File layout (all little-endian):
//!
//! ```text
//! "AVGR" | u32 version = 1 | u64 N | u32 max_degree | u32 entry_count
//! | entry_count × u32 entry IDs | (N + 1) × u64 offsets | offsets[N] × u32 neighbors
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AVGR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphIndex {
    offsets: Vec<u64>,
    neighbors: Vec<u32>,
    entry_nodes: Vec<u32>,
    max_degree: u32,
}

impl GraphIndex {
    /// Validates and wraps raw CSR arrays.
    pub fn from_csr(offsets: Vec<u64>, neighbors: Vec<u32>, entry_nodes: Vec<u32>, max_degree: u32) -> Result<Self> {
        let g = Self {
            offsets,
            neighbors,
            entry_nodes,
            max_degree,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds from per-vertex neighbor lists.
    pub fn from_adjacency(lists: &[Vec<u32>], entry_nodes: Vec<u32>, max_degree: u32) -> Result<Self> {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut neighbors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for l in lists {
            neighbors.extend_from_slice(l);
            offsets.push(neighbors.len() as u64);
        }
        Self::from_csr(offsets, neighbors, entry_nodes, max_degree)
    }

    /// Checks every structural invariant; errors name the offending vertex.
    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() < 2 {
            return Err(Error::Graph {
                vertex: 0,
                reason: "graph must have at least one vertex".into(),
            });
        }
        let n = self.vertex_count();
        if self.offsets[0] != 0 {
            return Err(Error::Graph {
                vertex: 0,
                reason: format!("offsets[0] = {} (expected 0)", self.offsets[0]),
            });
        }
        if self.offsets[n] != self.neighbors.len() as u64 {
            return Err(Error::Graph {
                vertex: n as u64,
                reason: format!(
                    "offsets[N] = {} but {} neighbors stored",
                    self.offsets[n],
                    self.neighbors.len()
                ),
            });
        }
        let mut seen = vec![u32::MAX; n];
        for v in 0..n {
            let (lo, hi) = (self.offsets[v], self.offsets[v + 1]);
            if hi < lo {
                return Err(Error::Graph {
                    vertex: v as u64,
                    reason: format!("offsets decrease ({lo} -> {hi})"),
                });
            }
            if hi - lo > self.max_degree as u64 {
                return Err(Error::Graph {
                    vertex: v as u64,
                    reason: format!("degree {} exceeds max_degree {}", hi - lo, self.max_degree),
                });
            }
            for &u in &self.neighbors[lo as usize..hi as usize] {
                if u as usize >= n {
                    return Err(Error::Graph {
                        vertex: v as u64,
                        reason: format!("neighbor {u} out of range (N = {n})"),
                    });
                }
                if u as usize == v {
                    return Err(Error::Graph {
                        vertex: v as u64,
                        reason: "self-loop".into(),
                    });
                }
                if seen[u as usize] == v as u32 {
                    return Err(Error::Graph {
                        vertex: v as u64,
                        reason: format!("duplicate neighbor {u}"),
                    });
                }
                seen[u as usize] = v as u32;
            }
        }
        if self.entry_nodes.is_empty() {
            return Err(Error::Graph {
                vertex: 0,
                reason: "entry-node set is empty".into(),
            });
        }
        if let Some(&e) = self.entry_nodes.iter().find(|&&e| e as usize >= n) {
            return Err(Error::Graph {
                vertex: e as u64,
                reason: "entry node out of range".into(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.neighbors[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: u32) -> usize {
        let v = v as usize;
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    pub fn entry_nodes(&self) -> &[u32] {
        &self.entry_nodes
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Replaces the entry-node set.
    pub fn with_entry_nodes(mut self, entry_nodes: Vec<u32>) -> Result<Self> {
        self.entry_nodes = entry_nodes;
        self.validate()?;
        Ok(self)
    }

    /// Vertices reachable from the entry set by following out-edges.
    pub fn reachable_count(&self) -> usize {
        let mut seen = vec![false; self.vertex_count()];
        let mut stack: Vec<u32> = Vec::new();
        for &e in &self.entry_nodes {
            if !seen[e as usize] {
                seen[e as usize] = true;
                stack.push(e);
            }
        }
        let mut count = stack.len();
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.vertex_count();
        let mut out =
            Vec::with_capacity(24 + 4 * self.entry_nodes.len() + 8 * (n + 1) + 4 * self.neighbors.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.max_degree.to_le_bytes());
        out.extend_from_slice(&(self.entry_nodes.len() as u32).to_le_bytes());
        for e in &self.entry_nodes {
            out.extend_from_slice(&e.to_le_bytes());
        }
        for o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        for u in &self.neighbors {
            out.extend_from_slice(&u.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { path, bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.err(0, "bad magic (expected \"AVGR\")"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(4, format!("unsupported version {version}")));
        }
        let n = r.u64()?;
        if n == 0 || n > u32::MAX as u64 {
            return Err(r.err(8, format!("invalid vertex count {n}")));
        }
        let max_degree = r.u32()?;
        let entries = r.u32()? as usize;
        let entry_nodes = (0..entries).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let offsets = (0..=n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let m = *offsets.last().unwrap();
        if m > ((bytes.len() - r.at) / 4) as u64 {
            return Err(r.err(r.at, format!("neighbor array of {m} entries truncated")));
        }
        let neighbors = (0..m).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if r.at != bytes.len() {
            return Err(r.err(r.at, "trailing bytes after neighbor array"));
        }
        Self::from_csr(offsets, neighbors, entry_nodes, max_degree)
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn err(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Load {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.bytes.len() {
            return Err(self.err(self.at, "unexpected end of file"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<GraphIndex> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    GraphIndex::from_bytes(path, &bytes)
}

pub fn save_graph(index: &GraphIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&index.to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
