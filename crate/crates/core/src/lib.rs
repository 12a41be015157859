//! Random-cluster droplets on the square lattice: sampling conditioned on a
//! large trapped area, droplet geometry, Wulff shapes and configuration
//! surgery.

// comparisons written as `!(x > 0.0)` reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod conditioned;
pub mod droplet;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod model;
pub mod rng;
pub mod snapshot;
pub mod surgery;
pub mod wulff;

pub use error::{Error, Result};
pub use geometry::{Sector, Site};
pub use lattice::{BondConfig, BoxGeom, EdgeId, Region};
pub use model::{Boundary, RcParams};
pub use rng::StreamRng;
