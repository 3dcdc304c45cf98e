//! Photonic band gap maximization for two-dimensional square-lattice
//! crystals.
//!
//! The library computes TE/TM band structures of a periodic dielectric unit
//! cell with Bloch-periodic bilinear finite elements, and maximizes the
//! gap-midgap ratio between two consecutive bands by an outer iteration
//! that freezes truncated eigenspaces at the incumbent design, projects the
//! affine operator families onto them, and solves the resulting
//! linear-fractional semidefinite program after Charnes–Cooper
//! homogenization.
//!
//! Entry points:
//!
//! * [`bands::band_diagram`] — band structure and gap data for one design;
//! * [`optimizer::optimize`] / [`optimizer::multi_restart`] — the outer
//!   iteration with seeded restarts;
//! * [`config::parse_config`] — the `key = value` run configuration;
//! * the `bandgap2d` binary — `bands`, `optimize`, and `sweep` subcommands
//!   over the same machinery.
//!
//! The `examples/` directory exercises each capability end to end; start
//! with `free_space_bands` and `optimize_tm_low_band`.

pub mod assembly;
pub mod bands;
pub mod config;
pub mod eig;
pub mod error;
pub mod lattice;
pub mod optimizer;
pub mod report;
pub mod sdp;
pub mod sparse;
pub mod subspace;

pub use assembly::Polarization;
pub use error::{Error, Result};
