use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Short-time Fourier transform without edge padding: frame `t` covers
/// samples `t*hop .. t*hop + window`.
pub struct Stft {
    fft_size: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(fft_size: usize, window_size: usize, hop: usize) -> Self {
        assert!(hop > 0 && hop <= window_size && window_size <= fft_size);
        let mut planner = FftPlanner::new();
        Self {
            fft_size,
            hop,
            window: hann_window(window_size),
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window_size(&self) -> usize {
        self.window.len()
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window.len() {
            0
        } else {
            1 + (len - self.window.len()) / self.hop
        }
    }

    /// Signal length spanned by `frames` frames.
    pub fn span(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window.len()
        }
    }

    /// Half spectra, one row per frame.
    pub fn analyze(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let n_frames = self.n_frames(x.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        let mut out = Vec::with_capacity(n_frames);
        for t in 0..n_frames {
            let start = t * self.hop;
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (i, w) in self.window.iter().enumerate() {
                buf[i].re = x[start + i] * w;
            }
            self.forward.process(&mut buf);
            out.push(buf[..self.n_bins()].to_vec());
        }
        out
    }

    /// Least-squares inverse: windowed overlap-add divided by the summed
    /// squared window. Samples no window touches come out as zero.
    pub fn synthesize(&self, frames: &[Vec<Complex64>]) -> Vec<f64> {
        let len = self.span(frames.len());
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        let n_bins = self.n_bins();
        let scale = 1.0 / self.fft_size as f64;
        for (t, frame) in frames.iter().enumerate() {
            debug_assert_eq!(frame.len(), n_bins);
            buf[..n_bins].copy_from_slice(frame);
            // Hermitian completion; DC and Nyquist must be real for a real signal.
            buf[0].im = 0.0;
            if self.fft_size.is_multiple_of(2) {
                buf[n_bins - 1].im = 0.0;
            }
            for k in n_bins..self.fft_size {
                buf[k] = buf[self.fft_size - k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for (i, w) in self.window.iter().enumerate() {
                out[start + i] += buf[i].re * scale * w;
                norm[start + i] += w * w;
            }
        }
        for (o, n) in out.iter_mut().zip(&norm) {
            *o = if *n > 1e-12 { *o / n } else { 0.0 };
        }
        out
    }

    /// Per-bin weights that make a squared-magnitude sum over the half
    /// spectrum equal the full-spectrum sum.
    pub fn parseval_weights(&self) -> Vec<f64> {
        let n_bins = self.n_bins();
        (0..n_bins)
            .map(|k| {
                if k == 0 || (self.fft_size.is_multiple_of(2) && k == n_bins - 1) {
                    1.0
                } else {
                    2.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_matches_formula() {
        let stft = Stft::new(1024, 1024, 256);
        assert_eq!(stft.n_frames(1000), 0);
        assert_eq!(stft.n_frames(1024), 1);
        assert_eq!(stft.n_frames(1024 + 255), 1);
        assert_eq!(stft.n_frames(1024 + 256), 2);
        assert_eq!(stft.span(3), 1024 + 512);
    }

    #[test]
    fn synthesis_inverts_analysis_where_windows_overlap() {
        let stft = Stft::new(64, 48, 12);
        let x: Vec<f64> = (0..400)
            .map(|n| ((n * 37 % 101) as f64 / 50.0) - 1.0)
            .collect();
        let frames = stft.analyze(&x);
        let y = stft.synthesize(&frames);
        // first sample sits under a zero of the periodic Hann window
        for n in 1..y.len() {
            assert!(
                (y[n] - x[n]).abs() < 1e-9,
                "sample {n}: {} vs {}",
                y[n],
                x[n]
            );
        }
    }
}
