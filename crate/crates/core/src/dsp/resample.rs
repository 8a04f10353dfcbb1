use super::{DspError, Result, Waveform};

const KAISER_BETA: f64 = 8.0;
/// Zero crossings of the prototype sinc on each side of the centre tap.
const ZERO_CROSSINGS: f64 = 16.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Windowed-sinc polyphase resampler (Kaiser window, beta 8).
///
/// For a rate ratio `up/down` in lowest terms, output sample `n` sits at
/// source position `n*down/up`; its fractional part takes one of `up`
/// values, so `up` filter phases are precomputed and reused.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(DspError::InvalidArgument(
            "target rate must be positive".into(),
        ));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let src = w.sample_rate as u64;
    let dst = target_rate as u64;
    let g = gcd(src, dst);
    let up = dst / g;
    let down = src / g;

    // cutoff in cycles per source sample, scaled so that 1.0 = source Nyquist
    let cutoff = (dst as f64 / src as f64).min(1.0) * ROLLOFF;
    let half = (ZERO_CROSSINGS / cutoff).ceil() as i64;
    let taps = (2 * half + 1) as usize;
    let i0_beta = bessel_i0(KAISER_BETA);

    let phases: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            let mut h: Vec<f64> = (-half..=half)
                .map(|j| {
                    let d = j as f64 - frac;
                    let r = d / (half as f64 + 1.0);
                    let win = if r.abs() >= 1.0 {
                        0.0
                    } else {
                        bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                    };
                    cutoff * sinc(cutoff * d) * win
                })
                .collect();
            let sum: f64 = h.iter().sum();
            if sum != 0.0 {
                h.iter_mut().for_each(|v| *v /= sum);
            }
            h
        })
        .collect();

    let n_in = w.samples.len() as u64;
    let n_out = ((n_in * up + down / 2) / down) as usize;
    let x = &w.samples;
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let h = &phases[(pos % up) as usize];
        let mut acc = 0.0;
        for (i, coef) in h.iter().enumerate().take(taps) {
            let idx = base - half + i as i64;
            if idx >= 0 && (idx as u64) < n_in {
                acc += coef * x[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(Waveform {
        samples: out,
        sample_rate: target_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    fn tone(freq: f64, rate: u32, secs: f64) -> Waveform {
        let n = (rate as f64 * secs) as usize;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    fn peak_bin(x: &[f64]) -> usize {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
        (1..buf.len() / 2)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap()
    }

    #[test]
    fn upsampled_tone_keeps_its_frequency() {
        let w = tone(440.0, 16_000, 1.0);
        let r = resample(&w, 24_000).unwrap();
        assert_eq!(r.sample_rate, 24_000);
        assert_eq!(r.len(), 24_000);
        // one-second signal: bin k is k Hz
        let k = peak_bin(&r.samples) as i64;
        assert!((k - 440).abs() <= 1, "peak at {k} Hz");
    }

    #[test]
    fn same_rate_is_identity() {
        let w = tone(123.0, 22_050, 0.1);
        assert_eq!(resample(&w, 22_050).unwrap(), w);
    }

    #[test]
    fn zeros_stay_zero() {
        let w = Waveform::new(vec![0.0; 4800], 48_000).unwrap();
        let r = resample(&w, 24_000).unwrap();
        assert_eq!(r.len(), 2400);
        assert!(r.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn zero_rate_is_rejected() {
        let w = tone(100.0, 8000, 0.01);
        assert!(matches!(resample(&w, 0), Err(DspError::InvalidArgument(_))));
    }

    #[test]
    fn downsampling_removes_content_above_new_nyquist() {
        // 10 kHz is above the 6 kHz Nyquist of the 12 kHz output
        let w = tone(10_000.0, 48_000, 0.5);
        let r = resample(&w, 12_000).unwrap();
        let interior = &r.samples[200..r.len() - 200];
        let rms = (interior.iter().map(|s| s * s).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 1e-3, "alias rms {rms}");
    }

    #[test]
    fn duration_preserved_for_rational_ratios() {
        for (src, dst, n) in [
            (16_000, 24_000, 1001),
            (44_100, 24_000, 777),
            (24_000, 16_000, 5),
            (8000, 11_025, 333),
        ] {
            let w = Waveform::new(vec![0.1; n], src).unwrap();
            let r = resample(&w, dst).unwrap();
            let err = (r.duration_secs() - w.duration_secs()).abs();
            assert!(err <= 1.0 / dst as f64, "{src}->{dst}: {err}");
        }
    }
}
