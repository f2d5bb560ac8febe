//! Canonical on-disk form of a prepared graph.
//!
//! `graph.bin` is little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "SHIFTREG"
//! version      u32      1
//! n, m, d, num_classes, nnz   u64 each
//! row_offsets  (n + 1) × u64
//! col_indices  nnz × u64      (adjacency values are all 1 and not stored)
//! features     n × d × f64    row-major
//! labels       n × u64
//! ```
//!
//! `graph.json` carries the name and label names.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

pub const CACHE_FILE: &str = "graph.bin";
pub const SIDECAR_FILE: &str = "graph.json";

const MAGIC: &[u8; 8] = b"SHIFTREG";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub num_classes: usize,
    pub label_names: Vec<String>,
}

impl Sidecar {
    pub fn of(graph: &Graph) -> Self {
        Self {
            name: graph.name().to_owned(),
            n: graph.num_nodes(),
            m: graph.num_edges(),
            d: graph.num_features(),
            num_classes: graph.num_classes(),
            label_names: graph.label_names().to_vec(),
        }
    }
}

pub fn encode_graph(graph: &Graph) -> Vec<u8> {
    let adj = graph.adjacency();
    let n = graph.num_nodes();
    let d = graph.num_features();
    let mut out = Vec::with_capacity(8 + 4 + 40 + 8 * (n + 1 + adj.nnz() + n * d + n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [n, graph.num_edges(), d, graph.num_classes(), adj.nnz()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &v in adj.row_offsets().iter().chain(adj.col_indices()) {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &v in graph.features().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in graph.labels() {
        out.extend_from_slice(&(l as u64).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::input("graph cache is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::input("graph cache value overflows usize"))
    }

    fn usizes(&mut self, count: usize) -> Result<Vec<usize>> {
        (0..count).map(|_| self.usize()).collect()
    }
}

/// Inverse of [`encode_graph`]; `name` and `label_names` come from the sidecar.
pub fn decode_graph(bytes: &[u8], name: &str, label_names: Vec<String>) -> Result<Graph> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::input("not a graph cache file (bad magic)"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::input(format!(
            "unsupported graph cache version {version}"
        )));
    }
    let n = r.usize()?;
    let m = r.usize()?;
    let d = r.usize()?;
    let num_classes = r.usize()?;
    let nnz = r.usize()?;
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(2 * n + 1 + nnz))
        .and_then(|words| words.checked_mul(8))
        .ok_or_else(|| Error::input("graph cache header is inconsistent"))?;
    if bytes.len() - r.pos != expected || nnz != 2 * m {
        return Err(Error::input("graph cache size does not match its header"));
    }
    let row_offsets = r.usizes(n + 1)?;
    let col_indices = r.usizes(nnz)?;
    let mut features = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        features.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
    }
    let labels = r.usizes(n)?;
    let adjacency = SparseMatrix::from_parts(n, n, row_offsets, col_indices, vec![1.0; nnz])?;
    Graph::new(
        name,
        adjacency,
        Matrix::from_vec(n, d, features)?,
        labels,
        num_classes,
        label_names,
    )
}

/// Writes `graph.bin` and `graph.json` into `dir`, creating it if needed.
pub fn save_cache(graph: &Graph, dir: &Path) -> Result<Sidecar> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let bin = dir.join(CACHE_FILE);
    fs::write(&bin, encode_graph(graph)).map_err(|e| Error::file(&bin, e))?;
    let sidecar = Sidecar::of(graph);
    let json = dir.join(SIDECAR_FILE);
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| Error::file(&json, e))?;
    Ok(sidecar)
}

pub fn load_cache(dir: &Path) -> Result<Graph> {
    let json = dir.join(SIDECAR_FILE);
    let text = fs::read_to_string(&json).map_err(|e| Error::file(&json, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let bin = dir.join(CACHE_FILE);
    let bytes = fs::read(&bin).map_err(|e| Error::file(&bin, e))?;
    let graph = decode_graph(&bytes, &sidecar.name, sidecar.label_names.clone())?;
    if Sidecar::of(&graph) != sidecar {
        return Err(Error::input(format!(
            "{} disagrees with {}",
            json.display(),
            bin.display()
        )));
    }
    Ok(graph)
}
