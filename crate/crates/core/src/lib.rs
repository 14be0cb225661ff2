//! Short-video feed streaming simulator with a GFlowNet prefetch and bitrate
//! controller.
//!
//! The crate is organised bottom-up:
//!
//! * [`traces`], [`media`] and [`dataset`]: network, video, user and
//!   preference inputs, both loaded from disk and synthesized.
//! * [`sim`]: the chunk-level playback simulator.
//! * [`objective`]: QoE, bandwidth cost and the personalized objective.
//! * [`gfn`]: decision DAGs, the flow model and its training losses.
//! * [`controller`]: policies that pick the next download or pause.
//! * [`harness`]: training, evaluation, ablations and reports.

pub mod controller;
pub mod dataset;
pub mod error;
pub mod gfn;
pub mod harness;
pub mod media;
pub mod objective;
pub mod rng;
pub mod sim;
pub mod traces;

pub use error::{Error, Result};
