//! PAPR reduction for OFDM signals in fully-connected hybrid-beamforming
//! transmitters.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`], [`qam`], [`metrics`], [`ccdf`]: containers, OFDM symbol
//!   generation and the evaluation metrics (PAPR, CCDF, EVM, spectrum).
//! - [`tone`]: single-antenna sparse tone reservation built on a circular
//!   SINC kernel, with the dense least-squares projection kept as an oracle.
//! - [`hbf`]: precoder, digital twin, LS1/LS2 projections into the DAC
//!   subspace and the end-to-end reduction pipeline.
//! - [`bound`]: minimax performance bounds under a Frobenius power budget.
//! - [`trainer`]: genetic-algorithm training of the pipeline hyperparameters.
//!
//! DFT convention, used everywhere: the forward transform is unscaled and
//! the inverse transform carries the `1/n` factor. Occupied subcarriers are
//! the `n_sc` bins centred on DC, `m ∈ [-n_sc/2, n_sc/2 - 1]`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod ccdf;
pub mod config;
pub mod dft;
pub mod error;
pub mod hbf;
pub mod metrics;
pub mod qam;
pub mod rng;
pub mod signal;
pub mod tone;
pub mod trainer;

pub use num_complex::Complex64 as C64;

pub use bound::{BoundProblem, BoundSolution, BoundVariant};
pub use ccdf::CcdfCurve;
pub use config::{Modulation, SimConfig};
pub use error::{Error, Result};
pub use hbf::{Pipeline, PipelineParams, Precoder, Projection};
pub use signal::{Domain, FreqGrid, TimeSignal};
pub use tone::{PeakSet, SincKernel, ThresholdNorm, ThresholdSchedule};
pub use trainer::{GaConfig, TrainResult};
