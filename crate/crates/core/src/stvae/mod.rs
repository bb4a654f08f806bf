//! Sparse Transition Variational Autoencoder.
//!
//! Per frame, an MLP encoder maps features `x_t` to a diagonal Gaussian
//! `q(z_t | x_t) = N(μ_t, diag(exp(log_var_t)))` and an MLP decoder maps a
//! sample `z_t` back to `x̂_t`. An LSTM runs over the latent sequence and a
//! linear readout of its hidden state `h_{t-1}` predicts `ẑ_t`, which is the
//! mean of the prior `p(z_t | z_{<t}) = N(ẑ_t, σ²I)`. The first frame uses a
//! standard normal prior. An L1 penalty on the transition weights keeps the
//! learned dynamics sparse.
//!
//! Clustering runs on the per-frame transition embedding `[h_t, μ_t − ẑ_t]`.

mod embed;
mod forward;
mod model;
mod train;

pub use embed::{extract_embeddings, EmbeddingKind, TransitionEmbedding};
pub use forward::{reparameterize, sample_noise, LossBreakdown};
pub use model::{Stvae, TRANSITION_WEIGHTS};
pub use train::{train, write_loss_log, EpochLoss, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum StvaeError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("feature dimension {got} does not match model input {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("sequence needs at least {min} frames, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("sequences in a batch must share one length ({expected} vs {got})")]
    RaggedBatch { expected: usize, got: usize },
    #[error("empty dataset or batch")]
    Empty,
    #[error("non-finite value in the {term} term at epoch {epoch}")]
    NonFinite { term: &'static str, epoch: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, StvaeError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StvaeConfig {
    /// Latent dimension `n`.
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub beta_kl: f64,
    pub lambda_sparse: f64,
    pub sigma_prior: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub embedding: EmbeddingKind,
}

impl Default for StvaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            encoder_hidden: vec![128, 128],
            decoder_hidden: vec![128, 128],
            lstm_hidden: 64,
            beta_kl: 0.1,
            lambda_sparse: 1e-3,
            sigma_prior: 1.0,
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 8,
            seed: 0,
            embedding: EmbeddingKind::Full,
        }
    }
}

impl StvaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StvaeError::Config(m.to_string()));
        if self.latent_dim < 1 {
            return bad("latent_dim must be >= 1");
        }
        if self.lstm_hidden < 1 {
            return bad("lstm_hidden must be >= 1");
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.beta_kl >= 0.0) || !(self.lambda_sparse >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        if !(self.sigma_prior > 0.0) {
            return bad("sigma_prior must be > 0");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return bad("epochs and batch_size must be >= 1");
        }
        Ok(())
    }
}
