//! Adaptive probabilistic safety certificates for stochastic lane keeping.
//!
//! A four-wheel vehicle with LuGre tires drives a curved road whose friction
//! is unknown. [`belief`] tracks friction from noisy measurements,
//! [`certificate`] estimates the long-term safety probability by Monte Carlo
//! and screens inputs with its generator, [`control`] wraps that screen
//! around a nominal controller or an MPC, and [`guidance`] maps language
//! instructions to controller settings. [`experiment`] runs batches,
//! replays and plots from [`runlog`] files.
//!
//! ```no_run
//! use apsc_core::control::{run_episode, ControllerKind};
//! use apsc_core::scenario::Scenario;
//!
//! let scenario = Scenario { controller: ControllerKind::ApscFilter, ..Scenario::default() };
//! let log = run_episode(&scenario, 0)?;
//! println!("mean safety probability {:.3}", log.metrics().mean_psi);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// `!(x > 0.0)` style checks are how parameters reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod certificate;
pub mod control;
pub mod experiment;
pub mod guidance;
pub mod rng;
pub mod runlog;
pub mod scenario;
pub mod vehicle;
