//! Music genre classification from raw audio.
//!
//! The pipeline runs WAV decoding and segmentation ([`audio_io`]), per-frame
//! MFCC/delta/chroma features ([`features`]), a bidirectional LSTM trained
//! with exact backpropagation-through-time ([`nn`]), dataset handling,
//! training and evaluation ([`train_eval`]), classical comparators
//! ([`baselines`]) and the command-line front end ([`cli`]).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod features;
pub mod nn;
pub mod train_eval;
pub mod baselines;
pub mod cli;
