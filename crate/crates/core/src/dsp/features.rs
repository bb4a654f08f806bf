use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AudioClip, DspError, FeatureMatrix, FeatureSequence, FrameGrid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    LogMel,
    /// Orthonormal DCT-II of the log-mel vector, first `n_mfcc` coefficients.
    Mfcc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    /// Defaults to the next power of two at or above the frame length.
    pub fft_size: Option<usize>,
    pub fmin_hz: f64,
    /// Defaults to Nyquist.
    pub fmax_hz: Option<f64>,
    pub kind: FeatureKind,
    pub n_mfcc: usize,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            n_mels: 40,
            fft_size: None,
            fmin_hz: 0.0,
            fmax_hz: None,
            kind: FeatureKind::LogMel,
            n_mfcc: 13,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    /// Width of one feature vector.
    pub fn dim(&self) -> usize {
        match self.kind {
            FeatureKind::LogMel => self.n_mels,
            FeatureKind::Mfcc => self.n_mfcc.min(self.n_mels),
        }
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the one-sided spectrum, `n_mels × (fft_size/2 + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, band: usize) -> &[f64] {
        &self.weights[band * self.n_bins..(band + 1) * self.n_bins]
    }
}

/// Unnormalized triangles with peaks equally spaced on the mel scale between
/// `fmin` and `fmax`. Every band must cover at least one FFT bin.
pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<MelFilterbank> {
    if n_mels < 1 {
        return Err(DspError::Invalid("mel band count must be >= 1".into()));
    }
    if fft_size < 2 {
        return Err(DspError::Invalid("FFT size must be >= 2".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(DspError::Invalid(format!("need 0 <= fmin < fmax <= {nyquist} Hz")));
    }
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        for (b, w) in row.iter_mut().enumerate() {
            let f = b as f64 * bin_hz;
            let rise = (f - left) / (center - left);
            let fall = (right - f) / (right - center);
            *w = rise.min(fall).max(0.0);
        }
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(DspError::Invalid(format!(
                "mel band {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; use fewer bands or a larger FFT"
            )));
        }
    }
    Ok(MelFilterbank {
        n_mels,
        n_bins,
        weights,
        centers_hz: edges[1..=n_mels].to_vec(),
    })
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Pre-log mel energies, one row per frame.
pub fn mel_energies(clip: &AudioClip, grid: &FrameGrid, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    grid.validate()?;
    let frame = grid.frame_samples(clip.sample_rate);
    if frame == 0 {
        return Err(DspError::Invalid("frame shorter than one sample".into()));
    }
    let expected = frame * grid.n_frames;
    if clip.samples.len() != expected {
        return Err(DspError::GridMismatch {
            expected,
            got: clip.samples.len(),
        });
    }
    let fft_size = cfg.fft_size.unwrap_or_else(|| frame.next_power_of_two());
    if fft_size < frame {
        return Err(DspError::Invalid(format!(
            "FFT size {fft_size} is smaller than the frame length {frame}"
        )));
    }
    let fmax = cfg.fmax_hz.unwrap_or(clip.sample_rate as f64 / 2.0);
    let bank = mel_filterbank(cfg.n_mels, fft_size, clip.sample_rate, cfg.fmin_hz, fmax)?;
    let window = hann(frame);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut power = vec![0.0; bank.n_bins];
    let mut out = Vec::with_capacity(grid.n_frames * cfg.n_mels);
    for chunk in clip.samples.chunks_exact(frame) {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for ((b, &s), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            b.re = s * w;
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for m in 0..bank.n_mels {
            out.push(bank.row(m).iter().zip(&power).map(|(w, p)| w * p).sum());
        }
    }
    FeatureMatrix::new(grid.n_frames, cfg.n_mels, out)
}

fn dct_ii(input: &[f64], keep: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Frame-aligned log-mel (or MFCC) features with a log floor so that silent
/// frames stay finite.
pub fn extract_features(clip: &AudioClip, grid: &FrameGrid, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    if !(cfg.log_floor > 0.0) {
        return Err(DspError::Invalid("log_floor must be positive".into()));
    }
    let energies = mel_energies(clip, grid, cfg)?;
    let log: Vec<f64> = energies.data.iter().map(|&e| e.max(cfg.log_floor).ln()).collect();
    let frames = match cfg.kind {
        FeatureKind::LogMel => FeatureMatrix::new(energies.rows, energies.cols, log)?,
        FeatureKind::Mfcc => {
            if cfg.n_mfcc < 1 {
                return Err(DspError::Invalid("n_mfcc must be >= 1".into()));
            }
            let keep = cfg.dim();
            let data = log
                .chunks_exact(energies.cols)
                .flat_map(|row| dct_ii(row, keep))
                .collect();
            FeatureMatrix::new(energies.rows, keep, data)?
        }
    };
    Ok(FeatureSequence {
        frames,
        grid: *grid,
        kind: cfg.kind,
    })
}

/// Per-frame log of total energy: log-sum-exp over log-mel bands, or the
/// zeroth cepstral coefficient for MFCC rows.
pub fn frame_log_energy(features: &FeatureMatrix, kind: FeatureKind) -> Vec<f64> {
    features
        .iter_rows()
        .map(|row| match kind {
            FeatureKind::LogMel => {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            }
            FeatureKind::Mfcc => row[0],
        })
        .collect()
}
