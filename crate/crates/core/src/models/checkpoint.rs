//! Binary checkpoint format.
//!
//! ```text
//! "NCRFT1"
//! u8 model kind, u8 potential design
//! u32 × 8 encoder sizes, f64 dropout
//! u32 words, u32 chars, u32 labels
//! u32 entry count
//! per entry: u32 name length, name bytes, u32 rank, u32 × rank extents,
//!            f32 × len values
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{DenseArray, ParamStore};

use super::{Model, ModelKind, PotentialDesign, VocabSizes};

const MAGIC: &[u8; 6] = b"NCRFT1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub kind: ModelKind,
    pub design: PotentialDesign,
    pub config: EncoderConfig,
    pub sizes: VocabSizes,
    pub params: ParamStore,
}

/// Round every parameter to the nearest 32-bit float, the precision
/// checkpoints store.
pub fn round_to_f32(store: &mut ParamStore) {
    for (_, p) in store.iter_mut() {
        for v in p.value.values_mut() {
            *v = *v as f32 as f64;
        }
    }
}

impl ModelCheckpoint {
    pub fn new(model: &Model, params: &ParamStore) -> Self {
        ModelCheckpoint {
            kind: model.kind,
            design: model.design,
            config: model.config,
            sizes: model.sizes,
            params: params.clone(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::bind(self.kind, self.design, self.config, self.sizes, &self.params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.kind.tag());
        out.push(self.design.tag());
        let c = &self.config;
        for v in [
            c.word_dim,
            c.char_dim,
            c.char_filters,
            c.char_width,
            c.f_hidden,
            c.f_layers,
            c.g_hidden,
            c.label_dim,
        ] {
            put_u32(&mut out, v)?;
        }
        out.extend_from_slice(&c.dropout.to_le_bytes());
        for v in [self.sizes.words, self.sizes.chars, self.sizes.labels] {
            put_u32(&mut out, v)?;
        }
        put_u32(&mut out, self.params.len())?;
        for (name, p) in self.params.iter() {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, p.value.rank())?;
            for &e in p.value.shape() {
                put_u32(&mut out, e)?;
            }
            for &v in p.value.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let kind = ModelKind::from_tag(r.u8()?)?;
        let design = PotentialDesign::from_tag(r.u8()?)?;
        let mut dims = [0usize; 8];
        for d in dims.iter_mut() {
            *d = r.u32()?;
        }
        let dropout = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let config = EncoderConfig {
            word_dim: dims[0],
            char_dim: dims[1],
            char_filters: dims[2],
            char_width: dims[3],
            f_hidden: dims[4],
            f_layers: dims[5],
            g_hidden: dims[6],
            label_dim: dims[7],
            dropout,
        };
        config.validate()?;
        let sizes = VocabSizes {
            words: r.u32()?,
            chars: r.u32()?,
            labels: r.u32()?,
        };
        let count = r.u32()?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let len = r.u32()?;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let total = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .filter(|&t| t.checked_mul(4).map_or(false, |b| b <= r.remaining()))
                .ok_or_else(|| Error::Checkpoint(format!("parameter {:?} overruns the file", name)))?;
            let values = r
                .take(total * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            let value = DenseArray::from_vec(&shape, values)
                .map_err(|e| Error::Checkpoint(format!("parameter {:?}: {}", name, e)))?;
            params.insert(&name, value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        let ckpt = ModelCheckpoint {
            kind,
            design,
            config,
            sizes,
            params,
        };
        ckpt.model()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)
            .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{} does not fit in u32", v)))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}
