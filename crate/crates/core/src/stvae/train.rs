use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forward::{build_loss, sample_noise, LossBreakdown, LossGraph};
use super::{Result, Stvae, StvaeConfig, StvaeError};
use crate::dsp::Standardizer;
use crate::tensor::{Adam, AdamConfig, Tensor};

/// Frame-weighted mean loss over one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_model: Stvae,
    pub best_model: Stvae,
    /// 1-based epoch with the lowest total loss.
    pub best_epoch: usize,
    pub log: Vec<EpochLoss>,
}

/// Writes the loss log as CSV with header `epoch,recon,kl,sparse,total`.
pub fn write_loss_log<W: std::io::Write>(mut w: W, log: &[EpochLoss]) -> std::io::Result<()> {
    writeln!(w, "epoch,recon,kl,sparse,total")?;
    for e in log {
        let l = &e.loss;
        writeln!(
            w,
            "{},{},{},{},{}",
            e.epoch, l.reconstruction, l.kl, l.sparsity, l.total
        )?;
    }
    w.flush()
}

fn check_finite(loss: &LossBreakdown, epoch: usize) -> Result<()> {
    for (term, v) in [
        ("reconstruction", loss.reconstruction),
        ("kl", loss.kl),
        ("sparsity", loss.sparsity),
        ("total", loss.total),
    ] {
        if !v.is_finite() {
            return Err(StvaeError::NonFinite { term, epoch });
        }
    }
    Ok(())
}

/// Trains on raw `T × d` feature sequences. A standardizer is fitted over
/// all given sequences and stored in the returned models.
pub fn train(dataset: &[Tensor], cfg: &StvaeConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = dataset.first().ok_or(StvaeError::Empty)?;
    let dim = first.cols();
    for s in dataset {
        if s.shape().len() != 2 || s.cols() != dim {
            return Err(StvaeError::DimMismatch {
                expected: dim,
                got: s.cols(),
            });
        }
        if s.rows() < 2 {
            return Err(StvaeError::TooShort { min: 2, got: s.rows() });
        }
    }
    let standardizer = Standardizer::fit(dataset.iter().map(Tensor::data), dim).ok_or(StvaeError::Empty)?;
    let data: Vec<Tensor> = dataset
        .iter()
        .map(|s| Tensor::from_matrix(s.rows(), dim, standardizer.apply(s.data())))
        .collect::<std::result::Result<_, _>>()?;

    let mut model = Stvae::new(cfg.clone(), dim)?;
    model.standardizer = Some(standardizer);
    let adam_cfg = AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(adam_cfg, model.params.tensors());
    // separate streams so that batching order and noise stay reproducible
    // independently of each other
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Stvae)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut acc = LossBreakdown::default();
        let mut frames_seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Tensor> = chunk.iter().map(|&i| &data[i]).collect();
            let frames = batch[0].rows();
            let noise = sample_noise(&mut noise_rng, frames, batch.len(), cfg.latent_dim);
            let LossGraph {
                mut graph,
                bound,
                total,
                breakdown,
            } = build_loss(&model, &batch, &noise, true).map_err(|e| match e {
                StvaeError::NonFinite { term, .. } => StvaeError::NonFinite { term, epoch },
                other => other,
            })?;
            check_finite(&breakdown, epoch)?;
            let mut grads = graph.backward(total)?;
            let grads: Vec<Tensor> = bound.vars.iter().map(|&v| grads.take(v)).collect();
            if !grads.iter().all(Tensor::all_finite) {
                return Err(StvaeError::NonFinite {
                    term: "gradient",
                    epoch,
                });
            }
            adam.step(model.params.tensors_mut(), &grads)?;

            let w = (frames * batch.len()) as f64;
            acc.reconstruction += w * breakdown.reconstruction;
            acc.kl += w * breakdown.kl;
            acc.sparsity += w * breakdown.sparsity;
            acc.total += w * breakdown.total;
            frames_seen += frames * batch.len();
        }
        let n = frames_seen as f64;
        let loss = LossBreakdown {
            reconstruction: acc.reconstruction / n,
            kl: acc.kl / n,
            sparsity: acc.sparsity / n,
            total: acc.total / n,
        };
        check_finite(&loss, epoch)?;
        log::debug!(
            "epoch {epoch}: total {:.5} recon {:.5} kl {:.5} sparse {:.5}",
            loss.total,
            loss.reconstruction,
            loss.kl,
            loss.sparsity
        );
        log.push(EpochLoss { epoch, loss });
        if best.as_ref().is_none_or(|(b, _, _)| loss.total < *b) {
            best = Some((loss.total, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        final_model: model,
        best_model,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Vec<Tensor> {
        (0..4)
            .map(|s| {
                let data = (0..12 * 3)
                    .map(|i| ((i * 7 + s * 13) % 11) as f64 / 5.0 - 1.0)
                    .collect();
                Tensor::from_matrix(12, 3, data).unwrap()
            })
            .collect()
    }

    fn small_cfg() -> StvaeConfig {
        StvaeConfig {
            latent_dim: 2,
            encoder_hidden: vec![8],
            decoder_hidden: vec![8],
            lstm_hidden: 4,
            epochs: 5,
            batch_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn loss_log_csv() {
        let log = [EpochLoss {
            epoch: 1,
            loss: LossBreakdown {
                reconstruction: 0.5,
                kl: 0.25,
                sparsity: 0.125,
                total: 0.875,
            },
        }];
        let mut buf = Vec::new();
        write_loss_log(&mut buf, &log).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,recon,kl,sparse,total\n1,0.5,0.25,0.125,0.875\n"
        );
    }

    #[test]
    fn training_is_seeded() {
        let a = train(&toy_data(), &small_cfg()).unwrap();
        let b = train(&toy_data(), &small_cfg()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.final_model, b.final_model);
        assert_eq!(a.log.len(), 5);
        assert!(a.best_epoch >= 1 && a.best_epoch <= 5);
    }

    #[test]
    fn rejects_bad_datasets() {
        assert!(matches!(train(&[], &small_cfg()), Err(StvaeError::Empty)));
        let mut d = toy_data();
        d.push(Tensor::zeros(&[12, 4]));
        assert!(matches!(train(&d, &small_cfg()), Err(StvaeError::DimMismatch { .. })));
        assert!(matches!(
            train(&[Tensor::zeros(&[1, 3])], &small_cfg()),
            Err(StvaeError::TooShort { .. })
        ));
    }

    #[test]
    fn non_finite_forward_names_the_term() {
        let mut m = Stvae::new(small_cfg(), 3).unwrap();
        m.params
            .get_mut("dec.w0")
            .unwrap()
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 1e300);
        m.params
            .get_mut("dec.w1")
            .unwrap()
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 1e300);
        let x = &toy_data()[0];
        let noise = Tensor::full(&[12, 2], 1.0);
        match m.elbo_loss(&[x], &noise) {
            Err(StvaeError::NonFinite { term, .. }) => assert_eq!(term, "reconstruction"),
            other => panic!("expected non-finite reconstruction, got {other:?}"),
        }
    }
}
