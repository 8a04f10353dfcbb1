#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathovc::dsp::{write_wav, Waveform};

pub const HEADER: &str = "speaker_id,sex,intelligibility_score,band,word_id,block,audio_path\n";

pub const TABLE_ONE: [(&str, &str); 6] = [
    ("M04", "2"),
    ("M12", "7.4"),
    ("M05", "58"),
    ("M11", "62"),
    ("M08", "93"),
    ("M10", "93"),
];

pub fn pathovc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathovc"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Half-second 16 kHz clip: a harmonic stack whose pitch depends on the
/// speaker and whose brightness depends on the word.
pub fn clip(f0: f64, word: usize) -> Waveform {
    let sr = 16_000.0;
    let n = 8000;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = (std::f64::consts::PI * i as f64 / n as f64).sin();
            let mut v = 0.0;
            for h in 1..=6 {
                let gain = 1.0 / (h as f64).powf(1.0 + 0.3 * (word % 3) as f64);
                v += gain * (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin();
            }
            0.3 * env * v
        })
        .collect();
    Waveform::new(samples, 16_000).unwrap()
}

/// Two speakers with `words` words in each of the three blocks.
pub fn write_corpus(dir: &Path, words: usize) -> PathBuf {
    let mut text = String::from(HEADER);
    for (id, score, f0) in [("M04", "2", 120.0), ("M12", "7.4", 190.0)] {
        text.push_str(&format!("{id},M,{score},,,,\n"));
        for block in ["B1", "B2", "B3"] {
            for w in 0..words {
                let rel = format!("audio/{id}_{block}_W{w}.wav");
                std::fs::create_dir_all(dir.join("audio")).unwrap();
                write_wav(dir.join(&rel), &clip(f0, w)).unwrap();
                text.push_str(&format!("{id},,,,W{w},{block},{rel}\n"));
            }
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Small enough to train for 200 steps in a few seconds.
pub const TINY_CONFIG: &str = "seed = 4
[model]
hidden = 8
latent_dim = 4
codebook_size = 8
speaker_dim = 4
kernel = 3
[train]
steps = 200
batch_size = 2
segment_frames = 16
learning_rate = 0.003
[dsp]
griffin_lim_iterations = 8
";

pub fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY_CONFIG).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
