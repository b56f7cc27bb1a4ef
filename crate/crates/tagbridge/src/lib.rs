//! Consolidating two part-of-speech corpora that were annotated under
//! disjoint tagsets.
//!
//! The centerpiece is a bridge model: one shared encoder feeding two
//! per-tagset supervisor heads and two label-conditioned GRU decoders.
//! Training on a batch from one corpus samples surrogate labels for the
//! other tagset from that tagset's supervisor head, then asks the decoder
//! to recover the gold labels from the (heavily dropped) encoding plus the
//! surrogate sequence. At evaluation time the decoder is fed the other
//! side's gold labels instead.
//!
//! Everything runs on a small deterministic f64 substrate (`substrate`)
//! with reverse-mode differentiation and a finite-difference checker, so
//! the whole pipeline is verifiable without pretrained weights. Synthetic
//! corpora with a latent Markov chain (`corpus::synth`) come with exact
//! posterior-decoding oracles (`corpus::oracle`) that bound what any
//! predictor can achieve, which is what the experiments are measured
//! against.
//!
//! See the `examples/` directory for one runnable program per capability:
//! gradient checking, synthetic corpora, the direct-map baseline, bridge
//! training, the cheat-mode failure reproduction, and corpus ingestion.

pub mod baseline;
pub mod bridge;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod report;
pub mod substrate;
pub mod trainer;

pub use error::{Error, Result};
