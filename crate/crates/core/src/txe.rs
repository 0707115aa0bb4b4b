//! Binary container for a compiled dataset.
//!
//! Layout (little-endian):
//!
//! ```text
//! "TXE1"
//! 3 × namespace: u32 n, then n × (u32 byte-length, UTF-8 bytes, u64 count)
//!                in the order words, contextual entities, target entities
//! u32 n_docs
//! n_docs × (u32 target (0xFFFFFFFF = none), u32 n, n × u32 word id,
//!           u32 k, k × u32 entity id)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::binio::{Reader, Writer};
use crate::corpus::{CompiledDataset, Document, Namespace, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TXE1";
const NO_TARGET: u32 = u32::MAX;

fn write_namespace<W: Write>(w: &mut Writer<W>, ns: &Namespace) -> std::io::Result<()> {
    w.len(ns.len())?;
    for (_, token, count) in ns.iter() {
        w.str(token)?;
        w.u64(count)?;
    }
    Ok(())
}

fn read_namespace<R: Read>(r: &mut Reader<R>) -> Result<Namespace> {
    let n = r.len()?;
    let mut entries = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let token = r.str()?;
        let count = r.u64()?;
        entries.push((token, count));
    }
    let ns = Namespace::from_entries(entries);
    if ns.len() != n {
        return Err(Error::malformed("duplicate token in vocabulary table"));
    }
    Ok(ns)
}

fn write_vocabulary<W: Write>(w: &mut Writer<W>, vocab: &Vocabulary) -> std::io::Result<()> {
    write_namespace(w, &vocab.words)?;
    write_namespace(w, &vocab.ctx_entities)?;
    write_namespace(w, &vocab.target_entities)
}

/// SHA-256 over the serialized vocabulary tables, hex encoded.
pub fn vocabulary_hash(vocab: &Vocabulary) -> String {
    let mut w = Writer::new(Vec::new());
    write_vocabulary(&mut w, vocab).expect("writing to memory");
    hex::encode(Sha256::digest(w.into_inner()))
}

pub fn write_dataset<W: Write>(out: W, data: &CompiledDataset) -> std::io::Result<()> {
    let mut w = Writer::new(out);
    w.bytes(MAGIC)?;
    write_vocabulary(&mut w, &data.vocab)?;
    w.len(data.documents.len())?;
    for doc in &data.documents {
        w.u32(doc.target.unwrap_or(NO_TARGET))?;
        w.len(doc.words.len())?;
        for &id in &doc.words {
            w.u32(id)?;
        }
        w.len(doc.ctx_entities.len())?;
        for &id in &doc.ctx_entities {
            w.u32(id)?;
        }
    }
    w.into_inner().flush()
}

fn read_ids<R: Read>(r: &mut Reader<R>, limit: usize, what: &str) -> Result<Vec<u32>> {
    let n = r.len()?;
    let mut ids = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let id = r.u32()?;
        if id as usize >= limit {
            return Err(Error::malformed(format!("{what} id {id} out of range")));
        }
        ids.push(id);
    }
    Ok(ids)
}

pub fn read_dataset<R: Read>(input: R) -> Result<CompiledDataset> {
    let mut r = Reader::new(input);
    r.magic(MAGIC)?;
    let vocab = Vocabulary {
        words: read_namespace(&mut r)?,
        ctx_entities: read_namespace(&mut r)?,
        target_entities: read_namespace(&mut r)?,
    };
    let n_docs = r.len()?;
    let mut documents = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        let raw_target = r.u32()?;
        let target = if raw_target == NO_TARGET {
            None
        } else if (raw_target as usize) < vocab.target_entities.len() {
            Some(raw_target)
        } else {
            return Err(Error::malformed(format!("target id {raw_target} out of range")));
        };
        let words = read_ids(&mut r, vocab.words.len(), "word")?;
        let ctx_entities = read_ids(&mut r, vocab.ctx_entities.len(), "entity")?;
        documents.push(Document {
            target,
            words,
            ctx_entities,
        });
    }
    r.finish()?;
    Ok(CompiledDataset { vocab, documents })
}

pub fn save_dataset(path: &Path, data: &CompiledDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(BufWriter::new(file), data).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<CompiledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

/// True when the file starts with the dataset magic.
pub fn is_dataset_file(path: &Path) -> bool {
    let mut buf = [0u8; 4];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .map(|_| &buf == MAGIC)
        .unwrap_or(false)
}
