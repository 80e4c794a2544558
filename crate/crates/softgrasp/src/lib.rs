//! Distributed tactile-sensing services and the grasp-control experiment
//! harness.
//!
//! The pure algorithms (deformation metric, plant model, switching
//! controller, handover geometry) live in `softgrasp-core`; this crate adds
//! everything that touches a clock, a socket or the filesystem: the
//! per-fingertip sensor node service and its wire protocol, the polling
//! hub, the virtual-time experiment runner, file formats (PGM frames,
//! key=value configs, CSV results, SVG plots) and the CLI binaries.

// Validations use negated comparisons so NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cfgfile;
pub mod experiment;
pub mod hub;
pub mod node;
pub mod objects;
pub mod pgm;
pub mod plots;
pub mod record;
pub mod runner;
pub mod wire;
