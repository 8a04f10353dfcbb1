use crate::diffcore::Tensor;

use super::{ModelError, Result};

/// `K x D` codewords, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    d: usize,
    data: Vec<f64>,
}

impl Codebook {
    pub fn new(k: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(ModelError::InvalidState(format!(
                "empty codebook ({k}x{d})"
            )));
        }
        if data.len() != k * d {
            return Err(ModelError::InvalidArgument(format!(
                "{} values for a {k}x{d} codebook",
                data.len()
            )));
        }
        Ok(Self { k, d, data })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (k, d) = t.dims2()?;
        Self::new(k, d, t.data().to_vec())
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Index of the closest codeword by squared Euclidean distance; the
    /// lowest index wins ties.
    pub fn nearest(&self, row: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for i in 0..self.k {
            let dist: f64 = self
                .codeword(i)
                .iter()
                .zip(row)
                .map(|(c, z)| (c - z) * (c - z))
                .sum();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }

    /// Quantizes `n x D` row-major latents.
    pub fn quantize_rows(&self, rows: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        if !rows.len().is_multiple_of(self.d) {
            return Err(ModelError::InvalidArgument(format!(
                "{} values are not a whole number of {}-dimensional rows",
                rows.len(),
                self.d
            )));
        }
        let indices: Vec<usize> = rows.chunks_exact(self.d).map(|r| self.nearest(r)).collect();
        let q = indices
            .iter()
            .flat_map(|&i| self.codeword(i).iter().copied())
            .collect();
        Ok((q, indices))
    }

    /// Quantizes a channel-major latent sequence `z: [D, T]`, one frame per
    /// column.
    pub fn quantize_columns(&self, z: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let (d, t) = z.dims2()?;
        if d != self.d {
            return Err(ModelError::InvalidArgument(format!(
                "latent dim {d}, codebook dim {}",
                self.d
            )));
        }
        let zv = z.data();
        let mut col = vec![0.0; d];
        let mut indices = Vec::with_capacity(t);
        let mut q = vec![0.0; d * t];
        for ti in 0..t {
            for r in 0..d {
                col[r] = zv[r * t + ti];
            }
            let i = self.nearest(&col);
            for (r, c) in self.codeword(i).iter().enumerate() {
                q[r * t + ti] = *c;
            }
            indices.push(i);
        }
        Ok((Tensor::new(vec![d, t], q)?, indices))
    }
}

/// `exp(H)` of the empirical codeword-usage distribution: 1 when a single
/// code is used, `K` under uniform usage.
pub fn codebook_perplexity(indices: &[usize], k: usize) -> f64 {
    if indices.is_empty() || k == 0 {
        return 1.0;
    }
    let mut counts = vec![0usize; k];
    for &i in indices {
        counts[i.min(k - 1)] += 1;
    }
    let n = indices.len() as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    entropy.exp().clamp(1.0, k as f64)
}
