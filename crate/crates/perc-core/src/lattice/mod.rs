//! Sites, bonds, and finite regions of the square lattice.

mod config;
mod region;

pub use config::{
    edge_is_open, edge_noise, sample_configuration, Configuration, EdgeStates, LazyReplica,
    OpenCompletion, RngSpec, Sampler, TotalView,
};
pub use region::{Bounds, Region};

use serde::{Deserialize, Serialize};

/// A site of `Z^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteCoord {
    pub x: i64,
    pub y: i64,
}

impl SiteCoord {
    pub const fn new(x: i64, y: i64) -> Self {
        SiteCoord { x, y }
    }

    /// Chebyshev (sup-norm) distance from the origin, the natural radius
    /// for centered boxes.
    pub fn linf_norm(&self) -> i64 {
        self.x.abs().max(self.y.abs())
    }

    /// The four lattice neighbours.
    pub fn neighbours(&self) -> [SiteCoord; 4] {
        [
            SiteCoord::new(self.x + 1, self.y),
            SiteCoord::new(self.x - 1, self.y),
            SiteCoord::new(self.x, self.y + 1),
            SiteCoord::new(self.x, self.y - 1),
        ]
    }
}

/// Direction of a bond relative to its canonical (lower-left) endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    /// Bond from `(x, y)` to `(x + 1, y)`.
    Horizontal,
    /// Bond from `(x, y)` to `(x, y + 1)`.
    Vertical,
}

/// A bond of `Z^2`, identified by its canonical endpoint and orientation.
///
/// Every unordered pair of adjacent sites has exactly one `EdgeId`: the one
/// anchored at the endpoint with the smaller coordinate along the bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub site: SiteCoord,
    pub orientation: Orientation,
}

impl EdgeId {
    pub const fn horizontal(x: i64, y: i64) -> Self {
        EdgeId {
            site: SiteCoord::new(x, y),
            orientation: Orientation::Horizontal,
        }
    }

    pub const fn vertical(x: i64, y: i64) -> Self {
        EdgeId {
            site: SiteCoord::new(x, y),
            orientation: Orientation::Vertical,
        }
    }

    /// Both endpoints, canonical endpoint first.
    pub fn endpoints(&self) -> (SiteCoord, SiteCoord) {
        let s = self.site;
        match self.orientation {
            Orientation::Horizontal => (s, SiteCoord::new(s.x + 1, s.y)),
            Orientation::Vertical => (s, SiteCoord::new(s.x, s.y + 1)),
        }
    }

    /// The canonical edge joining two sites, or `None` if they are not
    /// lattice neighbours.
    pub fn between(a: SiteCoord, b: SiteCoord) -> Option<EdgeId> {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        match (dx, dy) {
            (1, 0) => Some(EdgeId::horizontal(a.x, a.y)),
            (-1, 0) => Some(EdgeId::horizontal(b.x, b.y)),
            (0, 1) => Some(EdgeId::vertical(a.x, a.y)),
            (0, -1) => Some(EdgeId::vertical(b.x, b.y)),
            _ => None,
        }
    }

    /// Sort key giving the canonical edge order: row-major by canonical
    /// endpoint, horizontal before vertical. Sampling, snapshots, and the
    /// enumeration oracle all rely on this single order.
    pub fn sort_key(&self) -> (i64, i64, u8) {
        (self.site.y, self.site.x, self.orientation as u8)
    }
}

impl PartialOrd for EdgeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}
