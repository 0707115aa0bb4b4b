//! Binary model format: magic `TXM1`, variant code, `d`, the 32-byte
//! vocabulary hash, then the a/b/c/W matrices as `(u32 rows, u32 cols,
//! row-major f32 LE)`. An absent projection is written as a 0×0 matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ModelParameters, Variant};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"TXM1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelHeader {
    pub variant: Variant,
    pub dim: usize,
    /// Hex SHA-256 of the vocabulary the model was trained on.
    pub vocab_hash: String,
}

fn variant_code(v: Variant) -> u32 {
    match v {
        Variant::Full => 0,
        Variant::Word => 1,
        Variant::Entity => 2,
    }
}

fn write_matrix<W: Write>(w: &mut Writer<W>, m: &Matrix) -> std::io::Result<()> {
    w.len(m.rows())?;
    w.len(m.cols())?;
    for &x in m.as_slice() {
        w.f32(x as f32)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut Reader<R>) -> Result<Matrix> {
    let rows = r.len()?;
    let cols = r.len()?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::malformed("matrix size overflows"))?;
    let mut data = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        data.push(f64::from(r.f32()?));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_model<W: Write>(out: W, params: &ModelParameters, vocab_hash: &str) -> Result<()> {
    let hash: [u8; 32] = hex::decode(vocab_hash)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("bad vocabulary hash {vocab_hash:?}")))?;
    let io = |e| Error::io("<model>", e);
    let mut w = Writer::new(out);
    w.bytes(MAGIC).map_err(io)?;
    w.u32(variant_code(params.variant)).map_err(io)?;
    w.len(params.dim).map_err(io)?;
    w.bytes(&hash).map_err(io)?;
    for m in [&params.words, &params.ctx_entities, &params.targets] {
        write_matrix(&mut w, m).map_err(io)?;
    }
    let empty = Matrix::zeros(0, 0);
    write_matrix(&mut w, params.projection.as_ref().unwrap_or(&empty)).map_err(io)?;
    w.into_inner().flush().map_err(io)
}

pub fn read_model<R: Read>(input: R) -> Result<(ModelHeader, ModelParameters)> {
    let mut r = Reader::new(input);
    r.magic(MAGIC)?;
    let variant = match r.u32()? {
        0 => Variant::Full,
        1 => Variant::Word,
        2 => Variant::Entity,
        other => return Err(Error::malformed(format!("unknown variant code {other}"))),
    };
    let dim = r.len()?;
    let hash: [u8; 32] = r.array()?;
    let words = read_matrix(&mut r)?;
    let ctx_entities = read_matrix(&mut r)?;
    let targets = read_matrix(&mut r)?;
    let w = read_matrix(&mut r)?;
    r.finish()?;
    let params = ModelParameters {
        variant,
        dim,
        words,
        ctx_entities,
        targets,
        projection: (w.rows() > 0).then_some(w),
    };
    params
        .validate()
        .map_err(|e| Error::malformed(format!("inconsistent model: {e}")))?;
    let header = ModelHeader {
        variant,
        dim,
        vocab_hash: hex::encode(hash),
    };
    Ok((header, params))
}

pub fn save_model(path: &Path, params: &ModelParameters, vocab_hash: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(BufWriter::new(file), params, vocab_hash).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_model(path: &Path) -> Result<(ModelHeader, ModelParameters)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file)).map_err(|e| match e {
        Error::MalformedFile(msg) => Error::MalformedFile(format!("{}: {msg}", path.display())),
        other => other,
    })
}
