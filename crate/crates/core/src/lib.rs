//! Indoor human tracking workbench for MIMO FMCW radar.
//!
//! The crate simulates raw radar cubes for synthetic indoor scenes and runs
//! two complete tracking chains over them:
//!
//! ```text
//! RA pipeline: cube → range/Doppler FFT → RA map → 2D CFAR → (r, θ) cells + Doppler lookup
//! RD pipeline: cube → range/Doppler FFT → RD map → 2D CFAR → (r, ṙ) cells + DOA lookup
//!              ... → polar→Cartesian → DBSCAN → centroids → JPDA + EKF → track management
//! ```
//!
//! The [`eval`] module holds the ROC, channel-ablation and track-metric
//! harness used to compare the two chains, and [`runspec`] drives complete
//! experiments from a JSON run specification.

pub mod cfar;
pub mod cluster;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod export;
pub mod params;
pub mod pipeline;
pub mod runspec;
pub mod scenarios;
pub mod scene;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use params::{RadarParams, Resolutions, SPEED_OF_LIGHT};
