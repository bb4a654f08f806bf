//! Training-loop behavior on small synthetic datasets.

use crstc::stvae::{train, StvaeConfig};
use crstc::synthgen::{generate, SynthConfig};
use crstc::tensor::Tensor;

fn synthetic(n_sequences: usize, frames: usize, seed: u64) -> Vec<Tensor> {
    let cfg = SynthConfig {
        n_sequences,
        frames,
        min_dwell: 10,
        mean_dwell: 20.0,
        seed,
        ..Default::default()
    };
    let (_, seqs) = generate(&cfg).unwrap();
    seqs.iter()
        .map(|s| Tensor::from_matrix(s.x.len(), cfg.obs_dim, s.x.concat()).unwrap())
        .collect()
}

#[test]
fn default_architecture_loss_drops_by_epoch_50() {
    let data = synthetic(8, 40, 3);
    let cfg = StvaeConfig {
        epochs: 50,
        ..Default::default()
    };
    let out = train(&data, &cfg).unwrap();
    assert_eq!(out.log.len(), 50);
    assert!(out.log.iter().all(|e| e.loss.total.is_finite()));
    let (first, last) = (out.log[0].loss.total, out.log[49].loss.total);
    assert!(last < first, "epoch 1 {first}, epoch 50 {last}");
    let best = out.log[out.best_epoch - 1].loss.total;
    assert!(out.log.iter().all(|e| e.loss.total >= best));
}

#[test]
fn strong_l1_shrinks_transition_weights() {
    let data = synthetic(16, 30, 5);
    let base = StvaeConfig {
        latent_dim: 4,
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        lstm_hidden: 8,
        batch_size: 1,
        epochs: 40,
        seed: 2,
        ..Default::default()
    };
    let free = train(
        &data,
        &StvaeConfig {
            lambda_sparse: 0.0,
            ..base.clone()
        },
    )
    .unwrap();
    let sparse = train(
        &data,
        &StvaeConfig {
            lambda_sparse: 1e3,
            ..base
        },
    )
    .unwrap();
    let w_free = free.final_model.mean_abs_transition_weight();
    let w_sparse = sparse.final_model.mean_abs_transition_weight();
    assert!(w_sparse < 0.1 * w_free, "lambda 1e3: {w_sparse}, lambda 0: {w_free}");
}

#[test]
fn loss_components_sum_to_total_every_epoch() {
    let data = synthetic(4, 20, 9);
    let cfg = StvaeConfig {
        latent_dim: 3,
        encoder_hidden: vec![8],
        decoder_hidden: vec![8],
        lstm_hidden: 4,
        epochs: 5,
        batch_size: 2,
        ..Default::default()
    };
    let out = train(&data, &cfg).unwrap();
    for e in &out.log {
        let l = e.loss;
        assert!((l.reconstruction + l.kl + l.sparsity - l.total).abs() < 1e-9);
    }
}
