//! Critical bond percolation on the square lattice.
//!
//! The crate provides the pieces needed to study the largest open cluster
//! in a box at the critical point: finite regions of `Z^2` and bond
//! configurations on them (`lattice`), union-find cluster labeling and the
//! derived size observables (`cluster`), crossing and circuit detection on
//! the primal and dual lattice (`topology`), the tiled annulus-and-corridor
//! construction geometry and its parameter search (`geometry`), the gluing
//! events built from outermost circuits (`events`), Monte Carlo estimators
//! with mergeable accumulators (`estimate`, `newman_ziff`, `steering`), and
//! exact small-window enumeration used as an oracle in tests (`oracle`).
//!
//! All replica sampling is counter-based: a configuration is a pure
//! function of `(seed, stream)`, so results are bit-identical whether
//! replicas run sequentially or on the rayon pool (`parallel` feature,
//! enabled by default).

pub mod cluster;
pub mod error;
pub mod estimate;
pub mod events;
pub mod exec;
pub mod geometry;
pub mod lattice;
pub mod oracle;
pub mod steering;
pub mod sweep;
pub mod topology;

pub use error::PercError;
pub use lattice::{Configuration, EdgeId, Orientation, Region, RngSpec, SiteCoord};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, PercError>;
