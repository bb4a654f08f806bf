use serde::{Deserialize, Serialize};

use super::forward::{encode_graph, transition_graph, Bound};
use super::{Result, Stvae, StvaeError};
use crate::tensor::{Graph, Tensor};

/// What the per-frame transition embedding contains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    /// `[h_t, δ_t]`
    #[default]
    Full,
    HiddenOnly,
    ResidualOnly,
}

/// One embedding row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEmbedding {
    pub kind: EmbeddingKind,
    /// `T × dim`, row-major.
    pub rows: Tensor,
}

impl TransitionEmbedding {
    pub fn frames(&self) -> usize {
        self.rows.rows()
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.frames()).map(|t| self.rows.row(t).to_vec()).collect()
    }
}

/// Deterministic embeddings for one raw (unstandardized) feature sequence.
///
/// The LSTM consumes the posterior means; `h_t` is its state after frame
/// `t` and `δ_t = μ_t − ẑ_t` with `δ_1 = 0`.
pub fn extract_embeddings(model: &Stvae, seq: &Tensor) -> Result<TransitionEmbedding> {
    let x = model.standardize(seq)?;
    let frames = x.rows();
    if frames < 1 {
        return Err(StvaeError::TooShort { min: 1, got: frames });
    }
    let n = model.config.latent_dim;
    let hsize = model.config.lstm_hidden;
    let mut g = Graph::new();
    let bound = Bound::bind(&mut g, model, false);
    let xv = g.constant(x);
    let (mu, _) = encode_graph(&mut g, model, &bound, xv)?;
    let mu_t = g.value(mu).clone();

    let (hidden, residual) = if frames >= 2 {
        let (hidden, zhat) = transition_graph(&mut g, model, &bound, mu, frames, 1)?;
        let h: Vec<Tensor> = hidden.iter().map(|&v| g.value(v).clone()).collect();
        let zhat = g.value(zhat);
        let mut delta = vec![0.0; frames * n];
        for t in 1..frames {
            for i in 0..n {
                delta[t * n + i] = mu_t.get(t, i) - zhat.get(t - 1, i);
            }
        }
        (h, delta)
    } else {
        // a single frame: run one cell step by hand through the same graph code
        let padded = g.concat(&[mu, mu], 0)?;
        let (hidden, _) = transition_graph(&mut g, model, &bound, padded, 2, 1)?;
        (vec![g.value(hidden[0]).clone()], vec![0.0; n])
    };

    let dim = match model.config.embedding {
        EmbeddingKind::Full => hsize + n,
        EmbeddingKind::HiddenOnly => hsize,
        EmbeddingKind::ResidualOnly => n,
    };
    let mut data = Vec::with_capacity(frames * dim);
    for t in 0..frames {
        if model.config.embedding != EmbeddingKind::ResidualOnly {
            data.extend_from_slice(hidden[t].data());
        }
        if model.config.embedding != EmbeddingKind::HiddenOnly {
            data.extend_from_slice(&residual[t * n..(t + 1) * n]);
        }
    }
    Ok(TransitionEmbedding {
        kind: model.config.embedding,
        rows: Tensor::from_matrix(frames, dim, data)?,
    })
}
