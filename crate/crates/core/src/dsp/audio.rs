use super::{DspError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DspError::Invalid("sample_rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DspError::Invalid("samples must be finite".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Linear-interpolation resampling with the first and last samples aligned.
/// The output has `round(n · target / rate)` samples.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(DspError::Invalid("target_rate must be positive".into()));
    }
    if target_rate == clip.sample_rate || clip.samples.is_empty() {
        return Ok(AudioClip {
            samples: clip.samples.clone(),
            sample_rate: target_rate,
        });
    }
    let n_in = clip.samples.len();
    let n_out = ((n_in as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize).max(1);
    let samples = if n_out == 1 || n_in == 1 {
        vec![clip.samples[0]; n_out]
    } else {
        let step = (n_in - 1) as f64 / (n_out - 1) as f64;
        (0..n_out)
            .map(|i| {
                let pos = i as f64 * step;
                let lo = (pos.floor() as usize).min(n_in - 1);
                let hi = (lo + 1).min(n_in - 1);
                let frac = pos - lo as f64;
                clip.samples[lo] + frac * (clip.samples[hi] - clip.samples[lo])
            })
            .collect()
    };
    Ok(AudioClip {
        samples,
        sample_rate: target_rate,
    })
}

/// Trailing zero padding or end truncation to exactly `round(target_s · rate)`
/// samples.
pub fn pad_or_trim(clip: &AudioClip, target_s: f64) -> Result<AudioClip> {
    if !(target_s > 0.0) || !target_s.is_finite() {
        return Err(DspError::Invalid("target duration must be positive".into()));
    }
    let n = (target_s * clip.sample_rate as f64).round() as usize;
    let mut samples = clip.samples.clone();
    samples.resize(n, 0.0);
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
    })
}
