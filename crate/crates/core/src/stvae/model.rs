use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Result, StvaeConfig, StvaeError};
use crate::dsp::Standardizer;
use crate::tensor::{read_checkpoint, write_checkpoint, ParamStore, Tensor};

/// Names of the transition-module weight matrices carrying the L1 penalty.
pub const TRANSITION_WEIGHTS: [&str; 3] = ["trans.w_ih", "trans.w_hh", "trans.read.w"];

const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

/// A trained (or freshly initialized) ST-VAE.
#[derive(Clone, Debug, PartialEq)]
pub struct Stvae {
    pub config: StvaeConfig,
    pub feature_dim: usize,
    pub params: ParamStore,
    /// Input standardization fitted on the training split.
    pub standardizer: Option<Standardizer>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_matrix(fan_in, fan_out, data).expect("positive dims")
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_matrix(rows, cols, data).expect("positive dims")
}

pub(crate) fn mlp_names(prefix: &str, layers: usize) -> Vec<(String, String)> {
    (0..layers)
        .map(|i| (format!("{prefix}.w{i}"), format!("{prefix}.b{i}")))
        .collect()
}

impl Stvae {
    /// Seeded initialization: Glorot-uniform dense layers, PyTorch-style
    /// uniform LSTM weights, forget-gate bias 1.
    pub fn new(config: StvaeConfig, feature_dim: usize) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(StvaeError::Config("feature_dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let n = config.latent_dim;
        let h = config.lstm_hidden;

        let add_mlp = |params: &mut ParamStore,
                       rng: &mut ChaCha8Rng,
                       prefix: &str,
                       input: usize,
                       hidden: &[usize],
                       output: usize| {
            let sizes: Vec<usize> = std::iter::once(input)
                .chain(hidden.iter().copied())
                .chain(std::iter::once(output))
                .collect();
            for (i, (w, b)) in mlp_names(prefix, sizes.len() - 1).into_iter().enumerate() {
                params.insert(w, glorot(rng, sizes[i], sizes[i + 1]));
                params.insert(b, Tensor::zeros(&[1, sizes[i + 1]]));
            }
        };
        add_mlp(&mut params, &mut rng, "enc", feature_dim, &config.encoder_hidden, 2 * n);
        add_mlp(&mut params, &mut rng, "dec", n, &config.decoder_hidden, feature_dim);

        let k = 1.0 / (h as f64).sqrt();
        params.insert("trans.w_ih", uniform(&mut rng, n, 4 * h, k));
        params.insert("trans.w_hh", uniform(&mut rng, h, 4 * h, k));
        let mut bias = Tensor::zeros(&[1, 4 * h]);
        bias.data_mut()[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        params.insert("trans.b", bias);
        params.insert("trans.read.w", glorot(&mut rng, h, n));
        params.insert("trans.read.b", Tensor::zeros(&[1, n]));

        Ok(Self {
            config,
            feature_dim,
            params,
            standardizer: None,
        })
    }

    pub fn encoder_layers(&self) -> usize {
        self.config.encoder_hidden.len() + 1
    }

    pub fn decoder_layers(&self) -> usize {
        self.config.decoder_hidden.len() + 1
    }

    /// Mean absolute value over all transition weight matrices.
    pub fn mean_abs_transition_weight(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0;
        for name in TRANSITION_WEIGHTS {
            let t = self.params.get(name).expect("transition weights always present");
            sum += t.data().iter().map(|v| v.abs()).sum::<f64>();
            count += t.len();
        }
        sum / count as f64
    }

    /// Applies the stored standardizer (identity when absent).
    pub fn standardize(&self, frames: &Tensor) -> Result<Tensor> {
        if frames.cols() != self.feature_dim || frames.shape().len() != 2 {
            return Err(StvaeError::DimMismatch {
                expected: self.feature_dim,
                got: frames.cols(),
            });
        }
        Ok(match &self.standardizer {
            Some(s) => Tensor::from_matrix(frames.rows(), frames.cols(), s.apply(frames.data()))?,
            None => frames.clone(),
        })
    }

    /// Writes parameters (plus the standardizer, if any) as a checkpoint.
    /// The config is not part of the binary format; store it alongside.
    pub fn save_params<W: Write>(&self, w: W) -> Result<()> {
        let mut store = self.params.clone();
        if let Some(s) = &self.standardizer {
            let d = s.dim();
            store.insert(NORM_MEAN, Tensor::from_matrix(1, d, s.mean.clone())?);
            store.insert(NORM_STD, Tensor::from_matrix(1, d, s.std.clone())?);
        }
        write_checkpoint(w, &store)?;
        Ok(())
    }

    /// Loads a checkpoint written by [`Stvae::save_params`] and checks every
    /// tensor shape against a fresh model built from `config`.
    pub fn load_params<R: Read>(config: StvaeConfig, feature_dim: usize, r: R) -> Result<Self> {
        let store = read_checkpoint(r)?;
        let mut model = Self::new(config, feature_dim)?;
        for (name, expected) in model.params.clone().iter() {
            let got = store.get(name)?;
            if got.shape() != expected.shape() {
                return Err(StvaeError::Config(format!(
                    "checkpoint tensor `{name}` has shape {:?}, expected {:?}",
                    got.shape(),
                    expected.shape()
                )));
            }
            *model.params.get_mut(name)? = got.clone();
        }
        if let (Ok(mean), Ok(std)) = (store.get(NORM_MEAN), store.get(NORM_STD)) {
            if mean.len() != feature_dim || std.len() != feature_dim {
                return Err(StvaeError::DimMismatch {
                    expected: feature_dim,
                    got: mean.len(),
                });
            }
            model.standardizer = Some(Standardizer {
                mean: mean.data().to_vec(),
                std: std.data().to_vec(),
            });
        }
        Ok(model)
    }
}
