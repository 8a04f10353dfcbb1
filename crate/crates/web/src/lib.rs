//! wasm-bindgen entry points for the static demo page in `www/`. Each
//! export returns a JSON string; errors become JS exceptions.

use pathovc::dsp::{
    griffin_lim_traced, invert_mel_cepstrum, mel_cepstrum, mel_spectrogram, DspConfig,
    MelCepstrogram, Stft, Waveform,
};
use pathovc::stats::{wilcoxon_signed_rank, PMethod, StatsError};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ToneAnalysis {
    pub n_frames: usize,
    pub mel_centres_hz: Vec<f64>,
    /// Natural-log mel energies of the middle frame.
    pub log_mel: Vec<f64>,
    pub cepstrum: Vec<f64>,
    /// `log_mel` rebuilt from the first `order + 1` coefficients.
    pub smoothed_log_mel: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Reconstruction {
    pub spectral_convergence: Vec<f64>,
    pub input_peak_hz: f64,
    pub output_peak_hz: f64,
}

#[derive(Debug, Serialize)]
pub struct SignedRank {
    pub n: usize,
    pub zeros_dropped: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub w: f64,
    pub p: Option<f64>,
    pub method: &'static str,
}

fn harmonic_tone(f0: f64, harmonics: u32, secs: f64, sr: u32) -> Result<Waveform, String> {
    if !(f0 > 0.0 && f0 * harmonics.max(1) as f64 <= sr as f64 / 2.0) {
        return Err(format!(
            "{harmonics} harmonics of {f0} Hz do not fit below {} Hz",
            sr / 2
        ));
    }
    let n = (secs * sr as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            (1..=harmonics.max(1))
                .map(|h| (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin() / h as f64)
                .sum::<f64>()
                * 0.3
        })
        .collect();
    Waveform::new(samples, sr).map_err(|e| e.to_string())
}

pub fn tone_analysis(f0: f64, harmonics: u32, order: usize) -> Result<ToneAnalysis, String> {
    let cfg = DspConfig::default();
    if order + 1 > cfg.n_mels {
        return Err(format!("order must be below {}", cfg.n_mels));
    }
    let w = harmonic_tone(f0, harmonics, 0.5, cfg.sample_rate)?;
    let ms = mel_spectrogram(&w, &cfg).map_err(|e| e.to_string())?;
    let full = mel_cepstrum(&ms, cfg.n_mels - 1).map_err(|e| e.to_string())?;
    let mid = ms.n_frames / 2;
    let truncated: Vec<f64> = full.frame(mid)[..=order].to_vec();
    let smooth = invert_mel_cepstrum(
        &MelCepstrogram::new(truncated.clone(), 1, order + 1).map_err(|e| e.to_string())?,
        cfg.n_mels,
    )
    .map_err(|e| e.to_string())?;
    let fb = pathovc::dsp::MelFilterbank::from_config(&cfg).map_err(|e| e.to_string())?;
    Ok(ToneAnalysis {
        n_frames: ms.n_frames,
        mel_centres_hz: fb.center_frequencies().to_vec(),
        log_mel: ms
            .frame(mid)
            .iter()
            .map(|e| e.max(pathovc::dsp::LOG_FLOOR).ln())
            .collect(),
        cepstrum: truncated,
        smoothed_log_mel: smooth.data.iter().map(|e| e.ln()).collect(),
    })
}

fn peak_hz(stft: &Stft, x: &[f64], cfg: &DspConfig) -> f64 {
    let mut acc = vec![0.0; stft.n_bins()];
    for f in stft.analyze(x) {
        for (a, c) in acc.iter_mut().zip(&f) {
            *a += c.norm();
        }
    }
    let k = (0..acc.len())
        .max_by(|&i, &j| acc[i].total_cmp(&acc[j]))
        .unwrap_or(0);
    k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64
}

pub fn reconstruction(freq: f64, iterations: usize) -> Result<Reconstruction, String> {
    let cfg = DspConfig::default();
    let w = harmonic_tone(freq, 1, 0.5, cfg.sample_rate)?;
    let ms = mel_spectrogram(&w, &cfg).map_err(|e| e.to_string())?;
    let trace =
        griffin_lim_traced(&ms, &cfg, iterations.clamp(1, 200)).map_err(|e| e.to_string())?;
    let stft = Stft::new(cfg.fft_size, cfg.window_size, cfg.hop_size);
    Ok(Reconstruction {
        input_peak_hz: peak_hz(&stft, &w.samples, &cfg),
        output_peak_hz: peak_hz(&stft, &trace.waveform.samples, &cfg),
        spectral_convergence: trace.spectral_convergence,
    })
}

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("{t:?} is not a number"))
        })
        .collect()
}

pub fn signed_rank_text(a: &str, b: &str) -> Result<SignedRank, String> {
    let (a, b) = (numbers(a)?, numbers(b)?);
    match wilcoxon_signed_rank(&a, &b) {
        Ok(r) => Ok(SignedRank {
            n: r.n,
            zeros_dropped: r.zeros_dropped,
            w_plus: r.w_plus,
            w_minus: r.w_minus,
            w: r.w,
            p: Some(r.p_two_sided),
            method: if r.method == PMethod::Exact {
                "exact"
            } else {
                "normal"
            },
        }),
        Err(StatsError::NoTest) => Ok(SignedRank {
            n: 0,
            zeros_dropped: a.len(),
            w_plus: 0.0,
            w_minus: 0.0,
            w: 0.0,
            p: None,
            method: "no_test",
        }),
        Err(e) => Err(e.to_string()),
    }
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analyze_tone(f0: f64, harmonics: u32, order: usize) -> Result<String, JsValue> {
    to_js(tone_analysis(f0, harmonics, order))
}

#[wasm_bindgen]
pub fn griffin_lim_demo(freq: f64, iterations: usize) -> Result<String, JsValue> {
    to_js(reconstruction(freq, iterations))
}

#[wasm_bindgen]
pub fn signed_rank(a: &str, b: &str) -> Result<String, JsValue> {
    to_js(signed_rank_text(a, b))
}
