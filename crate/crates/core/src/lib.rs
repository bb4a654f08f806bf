//! Unsupervised cry segmentation by temporal clustering of the latent
//! transitions of a sparse-transition variational autoencoder.
//!
//! Pipeline: [`dsp`] turns audio into frame features, [`stvae`] learns a
//! causal latent model on [`tensor`], [`clustering`] groups the per-frame
//! transition embeddings, [`segmentation`] turns cluster labels into cry
//! events and [`metrics`] scores them against [`annotations`]. [`synthgen`]
//! produces synthetic data with known domain labels.

// Range checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotations;
pub mod clustering;
pub mod dsp;
pub mod metrics;
pub mod segmentation;
pub mod stvae;
pub mod synthgen;
pub mod tensor;
