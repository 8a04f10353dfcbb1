use super::{DspError, Result, Waveform};

/// Cuts leading and trailing frames whose peak is more than `threshold_db`
/// below the clip peak. Frames are `frame_ms` long and non-overlapping from
/// sample 0, so the kept region is aligned to frame boundaries.
pub fn trim_silence(w: &Waveform, threshold_db: f64, frame_ms: f64) -> Result<Waveform> {
    if threshold_db >= 0.0 {
        return Err(DspError::InvalidArgument(format!(
            "threshold {threshold_db} dB must be below the peak (negative)"
        )));
    }
    let peak = w.peak();
    if peak == 0.0 {
        return Err(DspError::AllSilent);
    }
    let frame_len = ((frame_ms / 1000.0 * w.sample_rate as f64).round() as usize).max(1);
    let floor = peak * 10f64.powf(threshold_db / 20.0);
    let loud: Vec<bool> = w
        .samples
        .chunks(frame_len)
        .map(|c| c.iter().fold(0.0_f64, |m, s| m.max(s.abs())) > floor)
        .collect();
    let first = loud.iter().position(|&l| l).ok_or(DspError::AllSilent)?;
    let last = loud.iter().rposition(|&l| l).ok_or(DspError::AllSilent)?;
    let end = ((last + 1) * frame_len).min(w.len());
    Ok(Waveform {
        samples: w.samples[first * frame_len..end].to_vec(),
        sample_rate: w.sample_rate,
    })
}
