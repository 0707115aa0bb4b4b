//! Named vector tables in the word2vec text format, plus cosine
//! nearest-entity search.
//!
//! File format: a header line `<count> <dim>`, then one line per vector,
//! `<name> <v1> ... <vd>`, space separated. Names may themselves contain
//! spaces (entity titles often do); a line is split from the right, so the
//! name is everything before the last `dim` fields. Reals are written in
//! shortest round-trip form, so a save/load cycle is exact.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::ENTITY_PREFIX;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    names: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore {
            dim,
            names: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Appends a vector. Names must be unique, non-empty and single-line.
    pub fn insert(&mut self, name: impl Into<String>, vector: &[f64]) -> Result<()> {
        let name = name.into();
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "vector for {name:?} has {} components, store has {}",
                vector.len(),
                self.dim
            )));
        }
        if name.is_empty() || name.contains(['\n', '\r']) || name.trim() != name {
            return Err(Error::InvalidArgument(format!("unusable vector name {name:?}")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate vector name {name:?}")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.vector(i))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), self.vector(i)))
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(out);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (name, v) in self.iter() {
            write!(w, "{name}")?;
            for x in v {
                write!(w, " {x:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::malformed(e.to_string()))?,
            None => return Err(Error::malformed("empty vector file")),
        };
        let mut fields = header.split_whitespace();
        let (count, dim) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(d), None) => (
                c.parse::<usize>()
                    .map_err(|_| Error::malformed(format!("bad count in header {header:?}")))?,
                d.parse::<usize>()
                    .map_err(|_| Error::malformed(format!("bad dimension in header {header:?}")))?,
            ),
            _ => return Err(Error::malformed(format!("bad header {header:?}"))),
        };
        let mut store = VectorStore::new(dim);
        let mut row = Vec::with_capacity(dim);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::malformed(e.to_string()))?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            if store.len() == count {
                return Err(Error::malformed(format!(
                    "line {lineno}: more rows than the header count {count}"
                )));
            }
            let mut parts = line.rsplitn(dim + 1, ' ');
            row.clear();
            for _ in 0..dim {
                let field = parts
                    .next()
                    .ok_or_else(|| Error::malformed(format!("line {lineno}: too few fields")))?;
                let value = field.parse::<f64>().map_err(|_| {
                    Error::malformed(format!("line {lineno}: non-numeric field {field:?}"))
                })?;
                row.push(value);
            }
            let name = parts
                .next()
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::malformed(format!("line {lineno}: too few fields")))?;
            row.reverse();
            store
                .insert(name, &row)
                .map_err(|e| Error::malformed(format!("line {lineno}: {e}")))?;
        }
        if store.len() != count {
            return Err(Error::malformed(format!(
                "header announces {count} rows, found {}",
                store.len()
            )));
        }
        Ok(store)
    }
}

pub fn save_vectors(store: &VectorStore, path: &Path) -> Result<()> {
    if store.is_empty() {
        return Err(Error::InvalidArgument("refusing to save an empty vector store".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    store.write_to(file).map_err(|e| Error::io(path, e))
}

pub fn load_vectors(path: &Path) -> Result<VectorStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    VectorStore::read_from(BufReader::new(file))
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        (dot(a, b) / denom).clamp(-1.0, 1.0)
    }
}

/// Top-`n` `ENTITY/` vectors by cosine to `query`, best first, ties by name.
/// Returned names have the prefix stripped.
pub fn nearest_entities(query: &[f64], store: &VectorStore, n: usize) -> Result<Vec<(String, f64)>> {
    if query.len() != store.dim() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} components, store has {}",
            query.len(),
            store.dim()
        )));
    }
    let qnorm = norm(query);
    if qnorm == 0.0 {
        return Err(Error::ZeroQuery);
    }
    let mut hits: Vec<(&str, f64)> = store
        .iter()
        .filter_map(|(name, v)| {
            let entity = name.strip_prefix(ENTITY_PREFIX)?;
            let vnorm = norm(v);
            let cos = if vnorm == 0.0 {
                0.0
            } else {
                (dot(query, v) / (qnorm * vnorm)).clamp(-1.0, 1.0)
            };
            Some((entity, cos))
        })
        .collect();
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    hits.truncate(n);
    Ok(hits.into_iter().map(|(e, c)| (e.to_owned(), c)).collect())
}
