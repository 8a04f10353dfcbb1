//! `MCEP1` feature files: the magic, `u32` frame count, `u32` coefficient
//! count, then row-major little-endian `f32` values.

use std::path::Path;

use super::{DspError, MelCepstrogram, Result};

pub const MCEP_MAGIC: &[u8; 5] = b"MCEP1";
const HEADER_LEN: usize = 5 + 4 + 4;

pub fn encode_mcep(mc: &MelCepstrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + mc.data.len() * 4);
    out.extend_from_slice(MCEP_MAGIC);
    out.extend_from_slice(&(mc.n_frames as u32).to_le_bytes());
    out.extend_from_slice(&(mc.n_coeffs as u32).to_le_bytes());
    for v in &mc.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_mcep(bytes: &[u8]) -> Result<MelCepstrogram> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MCEP_MAGIC {
        return Err(DspError::Format("missing MCEP1 header".into()));
    }
    let n_frames = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let n_coeffs = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = n_frames
        .checked_mul(n_coeffs)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| DspError::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(DspError::Format(format!(
            "{n_frames}x{n_coeffs} needs {expected} payload bytes, file has {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(MelCepstrogram {
        data,
        n_frames,
        n_coeffs,
    })
}

pub fn write_mcep(path: impl AsRef<Path>, mc: &MelCepstrogram) -> Result<()> {
    std::fs::write(path, encode_mcep(mc))?;
    Ok(())
}

pub fn read_mcep(path: impl AsRef<Path>) -> Result<MelCepstrogram> {
    decode_mcep(&std::fs::read(path)?)
}
