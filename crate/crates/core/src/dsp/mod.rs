//! Audio ingestion and frame-level feature extraction.
//!
//! Clips are mono `f64` samples. The default pipeline resamples to 16 kHz,
//! pads or trims to 8 s, and computes a 40-band log-mel vector for each of
//! 160 non-overlapping 50 ms frames.

mod audio;
mod features;
mod io;
mod standardize;
mod wav;

pub use audio::{pad_or_trim, resample, AudioClip};
pub use features::{
    extract_features, frame_log_energy, hz_to_mel, mel_energies, mel_filterbank, mel_to_hz, FeatureConfig, FeatureKind,
    MelFilterbank,
};
pub use io::{read_matrix_bin, read_matrix_csv, write_matrix_bin, write_matrix_csv, FEATURE_MAGIC};
pub use standardize::Standardizer;
pub use wav::{read_wav, read_wav_from};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("WAV data chunk is empty")]
    EmptyData,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("clip has {got} samples but the frame grid needs {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Uniform framing of a fixed-length clip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameGrid {
    pub frame_len_s: f64,
    pub n_frames: usize,
}

impl Default for FrameGrid {
    fn default() -> Self {
        Self {
            frame_len_s: 0.05,
            n_frames: 160,
        }
    }
}

impl FrameGrid {
    pub fn clip_len_s(&self) -> f64 {
        self.frame_len_s * self.n_frames as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_s > 0.0) || !self.frame_len_s.is_finite() || self.n_frames == 0 {
            return Err(DspError::Invalid(
                "frame grid needs frame_len_s > 0 and n_frames >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Samples per frame at `rate`.
    pub fn frame_samples(&self, rate: u32) -> usize {
        (self.frame_len_s * rate as f64).round() as usize
    }

    /// Frame start time in seconds.
    pub fn onset(&self, frame: usize) -> f64 {
        frame as f64 * self.frame_len_s
    }
}

/// Row-major `rows × cols` matrix of per-frame features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(DspError::Invalid(format!(
                "{} values do not fill {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub frames: FeatureMatrix,
    pub grid: FrameGrid,
    pub kind: FeatureKind,
}
