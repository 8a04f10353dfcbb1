use super::{DspConfig, DspError, Result, Stft, Waveform};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, each row normalised
/// to unit area (weights sum to one).
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
    centers: Vec<f64>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(
        sample_rate: u32,
        fft_size: usize,
        n_mels: usize,
        fmin: f64,
        fmax: f64,
    ) -> Result<Self> {
        if n_mels == 0 || fft_size < 2 || !(fmin >= 0.0 && fmin < fmax) {
            return Err(DspError::InvalidArgument(format!(
                "bad filterbank: n_mels={n_mels} fft={fft_size} fmin={fmin} fmax={fmax}"
            )));
        }
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();

        let mut weights = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect();
            let area: f64 = row.iter().sum();
            if area <= 0.0 {
                return Err(DspError::InvalidArgument(format!(
                    "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; use a larger fft_size or fewer bands"
                )));
            }
            row.iter_mut().for_each(|w| *w /= area);
            weights.push(row);
        }
        Ok(Self {
            weights,
            centers: edges[1..=n_mels].to_vec(),
            n_bins,
        })
    }

    pub fn from_config(cfg: &DspConfig) -> Result<Self> {
        Self::new(
            cfg.sample_rate,
            cfg.fft_size,
            cfg.n_mels,
            cfg.fmin,
            cfg.fmax,
        )
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Peak frequency of each triangle, in Hz.
    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, s)| w * s).sum())
            .collect()
    }

    /// Transpose with per-bin weight normalisation. Exact for spectra that
    /// are constant across each filter; bins outside every filter map to 0.
    pub fn pseudo_inverse(&self, mel: &[f64]) -> Vec<f64> {
        (0..self.n_bins)
            .map(|k| {
                let mut num = 0.0;
                let mut den = 0.0;
                for (row, m) in self.weights.iter().zip(mel) {
                    num += row[k] * m;
                    den += row[k];
                }
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Mel-band magnitude energies, `n_frames x n_mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub data: Vec<f64>,
    pub n_frames: usize,
    pub n_mels: usize,
    pub frame_shift: f64,
    pub sample_rate: u32,
}

impl MelSpectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_mels.max(1))
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &DspConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    if w.sample_rate != cfg.sample_rate {
        return Err(DspError::InvalidArgument(format!(
            "waveform is {} Hz, analysis expects {} Hz",
            w.sample_rate, cfg.sample_rate
        )));
    }
    if w.len() < cfg.window_size {
        return Err(DspError::TooShort {
            samples: w.len(),
            needed: cfg.window_size,
        });
    }
    let fb = MelFilterbank::from_config(cfg)?;
    let stft = Stft::new(cfg.fft_size, cfg.window_size, cfg.hop_size);
    let spec = stft.analyze(&w.samples);
    let mut data = Vec::with_capacity(spec.len() * cfg.n_mels);
    for frame in &spec {
        let mag: Vec<f64> = frame.iter().map(|c| c.norm()).collect();
        data.extend(fb.apply(&mag));
    }
    Ok(MelSpectrogram {
        n_frames: spec.len(),
        n_mels: cfg.n_mels,
        data,
        frame_shift: cfg.hop_size as f64 / cfg.sample_rate as f64,
        sample_rate: cfg.sample_rate,
    })
}
