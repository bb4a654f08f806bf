use std::io::Read;
use std::path::Path;

use hound::{SampleFormat, WavReader};

use super::{AudioClip, DspError, Result};

fn map_err(e: hound::Error) -> DspError {
    match e {
        hound::Error::IoError(io) => DspError::Io(io),
        hound::Error::Unsupported => DspError::Unsupported("unsupported WAV feature".into()),
        other => DspError::MalformedWav(other.to_string()),
    }
}

/// Reads a PCM16 or float32 WAV file, averaging channels to mono. PCM16
/// samples map to `v / 32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = std::fs::File::open(path)?;
    read_wav_from(std::io::BufReader::new(file))
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = WavReader::new(reader).map_err(map_err)?;
    let spec = wav.spec();
    let channels = spec.channels as usize;
    if channels == 0 || spec.sample_rate == 0 {
        return Err(DspError::MalformedWav("zero channels or sample rate".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => wav
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (fmt, bits) => {
            return Err(DspError::Unsupported(format!("{fmt:?} with {bits} bits per sample")));
        }
    };
    if interleaved.is_empty() {
        return Err(DspError::EmptyData);
    }
    if !interleaved.len().is_multiple_of(channels) {
        return Err(DspError::MalformedWav("partial sample frame at end of data".into()));
    }
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate).map_err(|_| DspError::MalformedWav("non-finite sample".into()))
}
