//! Synthetic sequences from a switching nonlinear latent process with an
//! invertible observation map, for checking that domain labels can be
//! recovered from observations alone.
//!
//! ```text
//! u_t        piecewise-constant domain index, dwell ≥ min_dwell
//! z_1        ~ N(0, I)
//! z_{t,i}    = tanh(A_{u_t}[i,:] · z_{t-1} + b_{u_t,i}) + σ ε_{t,i}
//! x_t        = g(z_t),  g = leaky ∘ Q_L ∘ … ∘ leaky ∘ Q_1  (Q orthogonal)
//! ```

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIXING_SLOPE: f64 = 0.2;
const WEIGHT_RANGE: f64 = 0.9;
const BIAS_RANGE: f64 = 0.5;
const MIN_WEIGHT_GAP: f64 = 0.1;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible domain schedule: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("cannot make {n_domains} mechanisms distinct with latent_dim {latent_dim}")]
    Inseparable { latent_dim: usize, n_domains: usize },
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("too many labels for exhaustive permutation search ({0} > 8)")]
    TooManyLabels(usize),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sequences: usize,
    pub frames: usize,
    pub latent_dim: usize,
    pub obs_dim: usize,
    pub n_domains: usize,
    pub noise_scale: f64,
    pub min_dwell: usize,
    pub mean_dwell: f64,
    /// Fraction of nonzero entries per row of each transition matrix.
    pub sparsity: f64,
    pub mixing_layers: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sequences: 40,
            frames: 160,
            latent_dim: 8,
            obs_dim: 8,
            n_domains: 2,
            noise_scale: 0.05,
            min_dwell: 20,
            mean_dwell: 40.0,
            sparsity: 0.3,
            mixing_layers: 2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim != self.latent_dim {
            return Err(SynthError::Invalid(format!(
                "obs_dim ({}) must equal latent_dim ({}) for a square invertible mixing",
                self.obs_dim, self.latent_dim
            )));
        }
        if self.latent_dim == 0 || self.n_domains == 0 || self.n_sequences == 0 {
            return Err(SynthError::Invalid("dimensions and counts must be positive".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(SynthError::Invalid("noise_scale must be >= 0".into()));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(SynthError::Invalid("sparsity must lie in (0, 1]".into()));
        }
        if self.min_dwell == 0 || self.frames < self.min_dwell {
            return Err(SynthError::Infeasible(format!(
                "frames {} < min_dwell {}",
                self.frames, self.min_dwell
            )));
        }
        if !(self.mean_dwell >= self.min_dwell as f64) {
            return Err(SynthError::Invalid("mean_dwell must be >= min_dwell".into()));
        }
        Ok(())
    }
}

/// One domain's transition: `z ↦ tanh(A z + b)`, `A` supported on `mask`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub dim: usize,
    /// Row-major `dim × dim` support.
    pub mask: Vec<bool>,
    /// Row-major `dim × dim`, zero off the mask.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub noise_scale: f64,
}

impl Mechanism {
    /// Number of nonzero dependencies `|M_u|`.
    pub fn transition_complexity(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Noise-free transition.
    pub fn step(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let row = &self.weights[i * self.dim..(i + 1) * self.dim];
                let a: f64 = row.iter().zip(z).map(|(w, v)| w * v).sum();
                (a + self.bias[i]).tanh()
            })
            .collect()
    }
}

fn draw_mask(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> Vec<bool> {
    let mut mask = vec![false; n * n];
    for i in 0..n {
        for j in sample(rng, n, per_row) {
            mask[i * n + j] = true;
        }
    }
    mask
}

/// Nonzeros per row used for a given density.
pub fn nonzeros_per_row(n: usize, sparsity: f64) -> usize {
    ((sparsity * n as f64).round() as usize).clamp(1, n)
}

/// Draws one mechanism per domain. Masks are redrawn until every pair of
/// domains differs in at least one mask entry (when the density leaves
/// room for that) and, in every case, until every pair differs by at least
/// 0.1 in some weight entry.
/// Mechanisms start with `noise_scale` 0; the generator sets it from its config.
pub fn sample_mechanisms(n: usize, n_domains: usize, sparsity: f64, seed: u64) -> Result<Vec<Mechanism>> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(SynthError::Invalid("sparsity must lie in (0, 1]".into()));
    }
    if n == 0 || n_domains == 0 {
        return Err(SynthError::Invalid("n and n_domains must be positive".into()));
    }
    if n == 1 && n_domains > 1 {
        return Err(SynthError::Inseparable {
            latent_dim: n,
            n_domains,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_row = nonzeros_per_row(n, sparsity);
    let masks_can_differ = per_row < n;

    let mut masks = Vec::with_capacity(n_domains);
    for attempt in 0.. {
        if attempt == MAX_ATTEMPTS {
            return Err(SynthError::Inseparable {
                latent_dim: n,
                n_domains,
            });
        }
        masks = (0..n_domains).map(|_| draw_mask(&mut rng, n, per_row)).collect();
        let distinct = (0..n_domains).all(|a| (a + 1..n_domains).all(|b| masks[a] != masks[b]));
        if distinct || !masks_can_differ {
            break;
        }
    }

    for attempt in 0.. {
        if attempt == MAX_ATTEMPTS {
            return Err(SynthError::Inseparable {
                latent_dim: n,
                n_domains,
            });
        }
        let mechs: Vec<Mechanism> = masks
            .iter()
            .map(|mask| {
                let weights = mask
                    .iter()
                    .map(|&m| {
                        if m {
                            rng.random_range(-WEIGHT_RANGE..=WEIGHT_RANGE)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let bias = (0..n).map(|_| rng.random_range(-BIAS_RANGE..=BIAS_RANGE)).collect();
                Mechanism {
                    dim: n,
                    mask: mask.clone(),
                    weights,
                    bias,
                    noise_scale: 0.0,
                }
            })
            .collect();
        let separated = (0..n_domains).all(|a| {
            (a + 1..n_domains).all(|b| {
                mechs[a]
                    .weights
                    .iter()
                    .zip(&mechs[b].weights)
                    .any(|(x, y)| (x - y).abs() >= MIN_WEIGHT_GAP)
            })
        });
        if separated {
            return Ok(mechs);
        }
    }
    unreachable!()
}

/// Piecewise-constant domain schedule. Each run lasts `min_dwell` plus a
/// geometric excess with mean `mean_dwell − min_dwell`; a run that would
/// leave a tail shorter than `min_dwell` absorbs that tail. With two or
/// more domains, each new run switches to a different domain chosen
/// uniformly.
pub fn sample_domains(
    frames: usize,
    n_domains: usize,
    min_dwell: usize,
    mean_dwell: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if min_dwell == 0 || frames < min_dwell {
        return Err(SynthError::Infeasible(format!(
            "frames {frames} < min_dwell {min_dwell}"
        )));
    }
    if n_domains == 0 {
        return Err(SynthError::Invalid("n_domains must be positive".into()));
    }
    if !(mean_dwell >= min_dwell as f64) {
        return Err(SynthError::Invalid("mean_dwell must be >= min_dwell".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let excess_mean = mean_dwell - min_dwell as f64;
    let geo = if excess_mean > 0.0 {
        Some(Geometric::new(1.0 / (1.0 + excess_mean)).expect("probability in (0, 1]"))
    } else {
        None
    };
    let mut labels = Vec::with_capacity(frames);
    let mut domain = rng.random_range(0..n_domains);
    while labels.len() < frames {
        let extra = geo.map_or(0, |g| g.sample(&mut rng) as usize);
        let mut run = min_dwell.saturating_add(extra);
        let remaining = frames - labels.len();
        if run >= remaining || remaining - run < min_dwell {
            run = remaining;
        }
        labels.extend(std::iter::repeat_n(domain, run));
        if n_domains > 1 {
            let next = rng.random_range(0..n_domains - 1);
            domain = if next >= domain { next + 1 } else { next };
        }
    }
    Ok(labels)
}

/// Invertible map built from orthogonal matrices and leaky rectifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingFunction {
    pub layers: Vec<DMatrix<f64>>,
    pub slope: f64,
}

impl MixingFunction {
    pub fn random(dim: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..layers)
            .map(|_| {
                let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                g.qr().q()
            })
            .collect();
        Self {
            layers,
            slope: MIXING_SLOPE,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![DMatrix::identity(dim, dim)],
            slope: 1.0,
        }
    }

    pub fn mix(&self, z: &[f64]) -> Vec<f64> {
        let mut v = nalgebra::DVector::from_column_slice(z);
        for q in &self.layers {
            v = q * v;
            v.iter_mut().for_each(|x| {
                if *x < 0.0 {
                    *x *= self.slope
                }
            });
        }
        v.iter().copied().collect()
    }

    pub fn unmix(&self, x: &[f64]) -> Vec<f64> {
        let mut v = nalgebra::DVector::from_column_slice(x);
        for q in self.layers.iter().rev() {
            v.iter_mut().for_each(|x| {
                if *x < 0.0 {
                    *x /= self.slope
                }
            });
            v = q.transpose() * v;
        }
        v.iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    /// `T × obs_dim`, row-major.
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub u: Vec<usize>,
}

/// The shared generative process of a dataset.
#[derive(Clone, Debug)]
pub struct Process {
    pub mechanisms: Vec<Mechanism>,
    pub mixing: MixingFunction,
}

impl Process {
    pub fn from_config(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut mechanisms = sample_mechanisms(cfg.latent_dim, cfg.n_domains, cfg.sparsity, cfg.seed)?;
        mechanisms.iter_mut().for_each(|m| m.noise_scale = cfg.noise_scale);
        let mixing = MixingFunction::random(cfg.latent_dim, cfg.mixing_layers.max(1), cfg.seed.wrapping_add(1));
        Ok(Self { mechanisms, mixing })
    }

    /// Rolls the latent process forward along a given domain schedule.
    pub fn simulate(&self, u: &[usize], seed: u64) -> SyntheticSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.mixing.layers[0].nrows();
        let mut z = Vec::with_capacity(u.len());
        if !u.is_empty() {
            z.push((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
        }
        for &domain in u.iter().skip(1) {
            let m = &self.mechanisms[domain];
            let mut next = m.step(z.last().expect("nonempty"));
            for v in &mut next {
                *v += m.noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
            z.push(next);
        }
        let x = z.iter().map(|zt| self.mixing.mix(zt)).collect();
        SyntheticSequence { x, z, u: u.to_vec() }
    }
}

fn sequence_seed(base: u64, index: usize, stream: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64) << 8)
        .wrapping_add(stream)
}

/// Generates `cfg.n_sequences` sequences sharing one process.
pub fn generate(cfg: &SynthConfig) -> Result<(Process, Vec<SyntheticSequence>)> {
    let process = Process::from_config(cfg)?;
    let seqs = (0..cfg.n_sequences)
        .map(|i| {
            let u = sample_domains(
                cfg.frames,
                cfg.n_domains,
                cfg.min_dwell,
                cfg.mean_dwell,
                sequence_seed(cfg.seed, i, 1),
            )?;
            Ok(process.simulate(&u, sequence_seed(cfg.seed, i, 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((process, seqs))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Frame agreement between estimated and true labels, maximized over all
/// relabelings of the estimate.
pub fn identifiability_score(estimated: &[usize], truth: &[usize]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(SynthError::LengthMismatch(estimated.len(), truth.len()));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let k = estimated.iter().chain(truth).max().map_or(1, |m| m + 1);
    if k > 8 {
        return Err(SynthError::TooManyLabels(k));
    }
    let mut confusion = vec![0usize; k * k];
    for (&e, &t) in estimated.iter().zip(truth) {
        confusion[e * k + t] += 1;
    }
    let best = permutations(k)
        .iter()
        .map(|p| (0..k).map(|e| confusion[e * k + p[e]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / truth.len() as f64)
}
