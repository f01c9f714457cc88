//! PSNR traces: synthetic generation, plain-text files, PGM frame directories.

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{self, Frame};

/// `start + drift * i` plus noise drawn uniformly from `[-noise, noise]`.
pub fn synth_trace(
    seed: u64,
    start: f64,
    length: usize,
    drift: f64,
    noise: f64,
) -> Result<Vec<f64>> {
    if length < 3 {
        return Err(Error::InvalidInput(format!(
            "trace length must be >= 3, got {length}"
        )));
    }
    if !(noise >= 0.0) || !noise.is_finite() || !start.is_finite() || !drift.is_finite() {
        return Err(Error::InvalidInput(
            "trace parameters must be finite, noise >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = (noise > 0.0).then(|| Uniform::new_inclusive(-noise, noise));
    Ok((0..length)
        .map(|i| {
            let jitter = dist.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            start + drift * i as f64 + jitter
        })
        .collect())
}

/// Reads one dB value per line. Blank lines and `#` comments are skipped.
pub fn read_psnr_trace(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_psnr_trace(&text)
}

pub fn parse_psnr_trace(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Trace(format!("line {}: not a number: {line:?}", n + 1)))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Trace(format!(
                "line {}: PSNR must be finite and >= 0",
                n + 1
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Trace("trace is empty".into()));
    }
    Ok(out)
}

pub fn write_psnr_trace(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(values.len() * 8);
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every `*.pgm` file in `dir`, sorted by file name.
pub fn load_pgm_dir(dir: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(Error::Trace(format!(
            "{} holds fewer than two PGM frames",
            dir.display()
        )));
    }
    paths.iter().map(Frame::load_pgm).collect()
}

/// PSNR between each frame and its predecessor; one value per frame after the first.
pub fn consecutive_psnr(frames: &[Frame]) -> Result<Vec<f64>> {
    frames
        .windows(2)
        .map(|w| metrics::psnr(&w[0], &w[1]))
        .collect()
}
