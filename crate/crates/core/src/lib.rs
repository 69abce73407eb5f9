//! QoE-aware resource allocation for multi-cell semantic communication uplinks.
//!
//! The crate models an uplink network of coordinated cells whose users run
//! either a single-modal (text) task or a bimodal (text + image) task, and
//! allocates channels, discrete transmit powers and semantic symbol counts to
//! maximize the overall quality of experience.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`scenario`] | scenario sampling, defaults, validation |
//! | [`net_model`] | pathloss, fading, MRC SINR with inter-cell interference |
//! | [`semantic_model`] | semantic rate, accuracy lookup tables, surrogate tables |
//! | [`qoe`] | logistic rate/accuracy scores and group QoE |
//! | [`symbol_search`] | exhaustive symbol-count search for one group |
//! | [`matching`] | swap-matching game for channels and power levels |
//! | [`baselines`] | exhaustive oracle, random matching, no-cooperation, upper bound |
//! | [`experiment`] | Monte Carlo sweeps and CSV results |
//! | [`trace`] | swap-trace export and replay |

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod net_model;
pub mod qoe;
pub mod rng;
pub mod scenario;
pub mod semantic_model;
pub mod symbol_search;
pub mod trace;

pub use error::{Error, Result};
