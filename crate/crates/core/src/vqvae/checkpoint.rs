//! Binary checkpoint: magic, `u16` version, configuration block, speaker
//! table, feature statistics, then named parameter blobs stored as
//! little-endian `f32`. Parameters are kept `f32`-representable by the
//! trainer, so a round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::diffcore::Tensor;

use super::{FeatureNorm, HVqVaeModel, ModelConfig, ModelError, Result, STAGES};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"HVQV1";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(m: &HVqVaeModel, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let c = m.config();
    for v in [
        c.n_coeffs,
        c.hidden,
        c.latent_dim,
        c.codebook_size,
        c.speaker_dim,
        c.kernel,
    ] {
        put_u32(&mut buf, v)?;
    }
    for s in c.strides {
        put_u32(&mut buf, s)?;
    }
    buf.extend_from_slice(&c.beta.to_le_bytes());
    put_u32(&mut buf, m.speakers().len())?;
    for s in m.speakers() {
        put_str(&mut buf, s)?;
    }
    for v in m.feature_norm().mean.iter().chain(&m.feature_norm().std) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_u32(&mut buf, m.parameters().len())?;
    for (name, p) in m.parameter_names().iter().zip(m.parameters()) {
        put_str(&mut buf, name)?;
        buf.push(p.shape().len() as u8);
        for &d in p.shape() {
            put_u32(&mut buf, d)?;
        }
        for &v in p.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<HVqVaeModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(5)? != CHECKPOINT_MAGIC {
        return Err(ModelError::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(cur.array()?);
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut fields = [0usize; 6];
    for f in &mut fields {
        *f = cur.u32()?;
    }
    let mut strides = [0usize; STAGES];
    for s in &mut strides {
        *s = cur.u32()?;
    }
    let beta = f64::from_le_bytes(cur.array()?);
    let config = ModelConfig {
        n_coeffs: fields[0],
        hidden: fields[1],
        latent_dim: fields[2],
        codebook_size: fields[3],
        speaker_dim: fields[4],
        kernel: fields[5],
        strides,
        beta,
    };
    config
        .validate()
        .map_err(|e| ModelError::Format(format!("configuration block: {e}")))?;
    let n_speakers = cur.u32()?;
    let speakers = (0..n_speakers)
        .map(|_| cur.string())
        .collect::<Result<Vec<_>>>()?;
    let c = config.n_coeffs;
    let mut stats = Vec::new();
    for _ in 0..2 * c {
        stats.push(f64::from_le_bytes(cur.array()?));
    }
    let norm = FeatureNorm {
        mean: stats[..c].to_vec(),
        std: stats[c..].to_vec(),
    };
    let n_params = cur.u32()?;
    let template = HVqVaeModel::zeros(config.clone(), speakers.clone())
        .map_err(|e| ModelError::Format(format!("speaker table: {e}")))?;
    if n_params != template.parameters().len() {
        return Err(ModelError::Format(format!(
            "{n_params} parameter blobs, expected {}",
            template.parameters().len()
        )));
    }
    let mut params = Vec::new();
    for expected in template.parameter_names() {
        let name = cur.string()?;
        if &name != expected {
            return Err(ModelError::Format(format!(
                "found parameter {name}, expected {expected}"
            )));
        }
        let ndim = cur.take(1)?[0] as usize;
        let shape = (0..ndim).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = cur.take(
            n.checked_mul(4)
                .ok_or_else(|| ModelError::Format("blob size overflow".into()))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        params.push(
            Tensor::new(shape, data)
                .map_err(|e| ModelError::Format(format!("parameter {name}: {e}")))?,
        );
    }
    if cur.pos != bytes.len() {
        return Err(ModelError::Format(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    HVqVaeModel::from_parts(config, speakers, params, norm)
}

pub fn save_checkpoint(m: &HVqVaeModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<HVqVaeModel> {
    read_checkpoint(std::fs::File::open(path)?)
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| ModelError::InvalidArgument(format!("{v} does not fit in 32 bits")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let n = u16::try_from(s.len())
        .map_err(|_| ModelError::InvalidArgument("name longer than 65535 bytes".into()))?;
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelError::Format(format!(
                "truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = u16::from_le_bytes(self.array()?) as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ModelError::Format("name is not UTF-8".into()))
    }
}
