//! Shared oracles for the integration tests.
#![allow(dead_code)]

pub mod dsp_oracle;
pub mod gradcheck;
