//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use crstc::stvae::{sample_noise, Stvae, StvaeConfig};
use crstc::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms; central
/// differences carry roughly `eps · |f| / h ≈ 1e-11` of rounding noise.
pub const FD_ABS_FLOOR: f64 = 1e-6;

/// Relative error with the magnitude floor above.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_ABS_FLOOR)
}

#[derive(Debug)]
pub struct FdReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: (usize, usize),
}

/// Central differences of `loss` with respect to every entry of every
/// tensor in `params`, compared against `analytic`.
pub fn finite_difference_check(
    params: &[Tensor],
    analytic: &[Tensor],
    mut loss: impl FnMut(&[Tensor]) -> f64,
) -> FdReport {
    assert_eq!(params.len(), analytic.len());
    let mut work = params.to_vec();
    let mut report = FdReport {
        checked: 0,
        worst: 0.0,
        worst_at: (0, 0),
    };
    for p in 0..params.len() {
        assert_eq!(params[p].shape(), analytic[p].shape());
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + FD_STEP;
            let up = loss(&work);
            work[p].data_mut()[i] = orig - FD_STEP;
            let down = loss(&work);
            work[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let e = rel_err(analytic[p].data()[i], numeric);
            if e > report.worst {
                report.worst = e;
                report.worst_at = (p, i);
            }
            report.checked += 1;
        }
    }
    report
}

pub fn random_tensor(rows: usize, cols: usize, scale: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = sample_noise(&mut rng, rows, 1, cols);
    t.map(|v| v * scale)
}

/// Gradient check of the full ST-VAE loss on a tiny configuration:
/// latent 2, hidden layers of 8, `frames` frames, batch 2.
pub fn tiny_stvae_gradcheck(frames: usize, seed: u64) -> FdReport {
    let cfg = StvaeConfig {
        latent_dim: 2,
        encoder_hidden: vec![8],
        decoder_hidden: vec![8],
        lstm_hidden: 8,
        seed,
        ..Default::default()
    };
    let dim = 3;
    let mut model = Stvae::new(cfg, dim).unwrap();
    let a = random_tensor(frames, dim, 1.0, seed + 10);
    let b = random_tensor(frames, dim, 1.0, seed + 11);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 12);
    let noise = sample_noise(&mut rng, frames, 2, 2);
    let (_, grads) = model.elbo_gradients(&[&a, &b], &noise).unwrap();
    let params = model.params.tensors().to_vec();
    finite_difference_check(&params, &grads, |p| {
        model.params.tensors_mut().clone_from_slice(p);
        model.elbo_loss(&[&a, &b], &noise).unwrap().total
    })
}
