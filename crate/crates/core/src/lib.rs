//! Algorithmic core for the softgrasp stack: windowed SSIM deformation
//! metrics over tactile images, a deterministic underactuated-hand plant
//! model, the state-dependent switching grasp controller, and marker-based
//! handover geometry.
//!
//! Everything in this crate is a pure function of its inputs (or of an
//! explicitly owned state struct), so the same code drives desk-scale
//! simulation, the sensor-node services and the test oracles. The crate is
//! `no_std`-compatible (`alloc` required); transports, file formats and the
//! experiment harness live in the companion `softgrasp` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Validations use negated comparisons so NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over fixed 3x3/3-vector math read better than iterator chains.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod controller;
pub mod geometry;
pub mod image;
pub mod rng;
pub mod sim;
pub mod snapshot;
pub mod ssim;

pub use controller::{ControllerConfig, ControllerState, Epsilon, StepOutput};
pub use geometry::{PlanarOffset, Pose, TrialEvent, TrialOutcome, TrialScore};
pub use image::TactileImage;
pub use rng::SplitMix64;
pub use sim::{Category, Disturbance, HandSim, HandState, ObjectSpec, SimConfig};
pub use snapshot::{DeformationVector, SensorSnapshot, SENSOR_COUNT};
pub use ssim::{deformation, is_contact, ssim, window_stats, SsimParams, WindowStats};
