//! Binary checkpoints: a magic tag followed by named little-endian f64 arrays.
//!
//! ```text
//! b"FWGDCKP1"  u32 count
//! repeated:    u32 name_len, name (utf-8), u32 ndim, u64 dims[ndim], f64 data[Π dims]
//! ```

use std::fs;
use std::path::Path;

use crate::engine::Ensemble;
use crate::error::{Error, Result};
use crate::model::{Particle, SharedClassifier};

pub const MAGIC: &[u8; 8] = b"FWGDCKP1";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Checkpoint(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        Ok(NamedArray { name: name.into(), shape, data })
    }
}

pub fn encode(arrays: &[NamedArray]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in arrays {
        out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
        out.extend_from_slice(a.name.as_bytes());
        out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
        for &d in &a.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &a.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<NamedArray>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let count = r.u32()?;
    let mut arrays = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("array name is not utf-8".into()))?
            .to_string();
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let total = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("shape of `{name}` overflows")))?;
        let bytes = r.take(total.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        arrays.push(NamedArray { name, shape, data });
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(arrays)
}

/// Layer sizes, one flat array per particle and each classifier as a
/// `(H + 1) × C` block (weights, then the bias row).
pub fn ensemble_arrays(ens: &Ensemble) -> Result<Vec<NamedArray>> {
    let sizes = ens.particles[0].sizes();
    let mut out = vec![NamedArray::new(
        "layer_sizes",
        vec![sizes.len()],
        sizes.iter().map(|&s| s as f64).collect(),
    )?];
    for (i, p) in ens.particles.iter().enumerate() {
        out.push(NamedArray::new(format!("particle.{i}"), vec![p.params().len()], p.params().to_vec())?);
    }
    for (j, c) in ens.classifiers.iter().enumerate() {
        out.push(NamedArray::new(
            format!("classifier.{j}"),
            vec![c.feature_dim() + 1, c.classes()],
            c.params().to_vec(),
        )?);
    }
    Ok(out)
}

pub fn ensemble_from_arrays(arrays: &[NamedArray]) -> Result<Ensemble> {
    let missing = |what: &str| Error::Checkpoint(format!("missing `{what}`"));
    let sizes: Vec<usize> = arrays
        .iter()
        .find(|a| a.name == "layer_sizes")
        .ok_or_else(|| missing("layer_sizes"))?
        .data
        .iter()
        .map(|&v| v as usize)
        .collect();
    let pick = |prefix: &str| {
        let mut v: Vec<(usize, &NamedArray)> = arrays
            .iter()
            .filter_map(|a| a.name.strip_prefix(prefix).and_then(|s| s.parse().ok()).map(|i| (i, a)))
            .collect();
        v.sort_by_key(|(i, _)| *i);
        v
    };
    let particles = pick("particle.")
        .into_iter()
        .map(|(i, a)| Particle::from_params(i, &sizes, a.data.clone()))
        .collect::<Result<Vec<_>>>()?;
    let classifiers = pick("classifier.")
        .into_iter()
        .map(|(_, a)| match a.shape[..] {
            [h1, c] if h1 >= 1 => SharedClassifier::from_params(h1 - 1, c, a.data.clone()),
            _ => Err(Error::Checkpoint(format!("classifier shape {:?}", a.shape))),
        })
        .collect::<Result<Vec<_>>>()?;
    if particles.is_empty() {
        return Err(missing("particle.0"));
    }
    if classifiers.is_empty() {
        return Err(missing("classifier.0"));
    }
    Ok(Ensemble { particles, classifiers })
}

pub fn write_checkpoint(path: &Path, ens: &Ensemble) -> Result<()> {
    fs::write(path, encode(&ensemble_arrays(ens)?))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Ensemble> {
    ensemble_from_arrays(&decode(&fs::read(path)?)?)
}
