//! Finite vertex sets of `Z^2` and their induced edge sets.

use serde::{Deserialize, Serialize};

use super::{EdgeId, Orientation, SiteCoord};
use crate::{PercError, Result};

/// Inclusive bounding rectangle of a nonempty region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub x0: i64,
    pub x1: i64,
    pub y0: i64,
    pub y1: i64,
}

impl Bounds {
    pub fn width(&self) -> i64 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, s: SiteCoord) -> bool {
        self.x0 <= s.x && s.x <= self.x1 && self.y0 <= s.y && s.y <= self.y1
    }

    fn hull(self, other: Bounds) -> Bounds {
        Bounds {
            x0: self.x0.min(other.x0),
            x1: self.x1.max(other.x1),
            y0: self.y0.min(other.y0),
            y1: self.y1.max(other.y1),
        }
    }
}

/// A finite set of sites. The induced edge set `E(W)` consists of the bonds
/// with both endpoints in `W`.
///
/// Equality is structural: two different descriptions of the same point set
/// compare unequal. Compare `sites()` when set equality is needed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Centered box `[-n, n]^2`.
    Box { n: i64 },
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`, bounds inclusive.
    Rect { x0: i64, x1: i64, y0: i64, y1: i64 },
    /// Centered annulus `[-outer, outer]^2` minus `[-inner, inner]^2`.
    Annulus { outer: i64, inner: i64 },
    /// A region shifted by `(dx, dy)`.
    Translate { base: Box<Region>, dx: i64, dy: i64 },
    /// Union of finitely many regions.
    Union(Vec<Region>),
    /// Set difference `base` minus `minus`.
    Difference { base: Box<Region>, minus: Box<Region> },
    /// Explicit site list, sorted row-major and deduplicated.
    Sites(Vec<SiteCoord>),
}

impl Region {
    /// `[-n, n]^2`.
    pub fn centered_box(n: i64) -> Result<Region> {
        if n < 0 {
            return Err(PercError::InvalidRegion(format!("box radius {n} < 0")));
        }
        Ok(Region::Box { n })
    }

    /// `[x0, x1] x [y0, y1]` with inclusive bounds.
    pub fn rect(x0: i64, x1: i64, y0: i64, y1: i64) -> Result<Region> {
        if x0 > x1 || y0 > y1 {
            return Err(PercError::InvalidRegion(format!(
                "inverted rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Region::Rect { x0, x1, y0, y1 })
    }

    /// Centered rectangle `[-k, k] x [-n, n]`.
    pub fn centered_rect(k: i64, n: i64) -> Result<Region> {
        if k < 0 || n < 0 {
            return Err(PercError::InvalidRegion(format!(
                "centered rectangle half-widths ({k}, {n}) must be nonnegative"
            )));
        }
        Region::rect(-k, k, -n, n)
    }

    /// `[-outer, outer]^2` minus `[-inner, inner]^2`. The hole is the
    /// closed inner box, so `inner = 0` removes only the origin.
    pub fn annulus(outer: i64, inner: i64) -> Result<Region> {
        if inner < 0 || inner >= outer {
            return Err(PercError::InvalidRegion(format!(
                "annulus needs 0 <= inner < outer, got inner {inner}, outer {outer}"
            )));
        }
        Ok(Region::Annulus { outer, inner })
    }

    pub fn translate(self, dx: i64, dy: i64) -> Region {
        if dx == 0 && dy == 0 {
            return self;
        }
        // Collapse nested shifts so annulus and rectangle recognition sees
        // at most one Translate layer.
        match self {
            Region::Translate { base, dx: ax, dy: ay } => Region::Translate {
                base,
                dx: ax + dx,
                dy: ay + dy,
            },
            base => Region::Translate {
                base: Box::new(base),
                dx,
                dy,
            },
        }
    }

    pub fn union(parts: Vec<Region>) -> Region {
        Region::Union(parts)
    }

    pub fn difference(base: Region, minus: Region) -> Region {
        Region::Difference {
            base: Box::new(base),
            minus: Box::new(minus),
        }
    }

    /// Explicit site set; the list is sorted and deduplicated.
    pub fn from_sites(mut sites: Vec<SiteCoord>) -> Region {
        sites.sort_by_key(|s| (s.y, s.x));
        sites.dedup();
        Region::Sites(sites)
    }

    pub fn contains(&self, s: SiteCoord) -> bool {
        match self {
            Region::Box { n } => s.linf_norm() <= *n,
            Region::Rect { x0, x1, y0, y1 } => {
                *x0 <= s.x && s.x <= *x1 && *y0 <= s.y && s.y <= *y1
            }
            Region::Annulus { outer, inner } => {
                let r = s.linf_norm();
                r <= *outer && r > *inner
            }
            Region::Translate { base, dx, dy } => {
                base.contains(SiteCoord::new(s.x - dx, s.y - dy))
            }
            Region::Union(parts) => parts.iter().any(|p| p.contains(s)),
            Region::Difference { base, minus } => base.contains(s) && !minus.contains(s),
            Region::Sites(sites) => sites.binary_search_by_key(&(s.y, s.x), |t| (t.y, t.x)).is_ok(),
        }
    }

    /// Both endpoints in the region, i.e. `e` belongs to `E(W)`.
    pub fn contains_edge(&self, e: EdgeId) -> bool {
        let (a, b) = e.endpoints();
        self.contains(a) && self.contains(b)
    }

    /// Inclusive bounding rectangle, `None` for the empty set.
    pub fn bounds(&self) -> Option<Bounds> {
        match self {
            Region::Box { n } => Some(Bounds {
                x0: -n,
                x1: *n,
                y0: -n,
                y1: *n,
            }),
            Region::Rect { x0, x1, y0, y1 } => Some(Bounds {
                x0: *x0,
                x1: *x1,
                y0: *y0,
                y1: *y1,
            }),
            Region::Annulus { outer, .. } => Some(Bounds {
                x0: -outer,
                x1: *outer,
                y0: -outer,
                y1: *outer,
            }),
            Region::Translate { base, dx, dy } => base.bounds().map(|b| Bounds {
                x0: b.x0 + dx,
                x1: b.x1 + dx,
                y0: b.y0 + dy,
                y1: b.y1 + dy,
            }),
            Region::Union(parts) => parts
                .iter()
                .filter_map(|p| p.bounds())
                .reduce(Bounds::hull),
            // Conservative: the difference may be smaller, never larger.
            Region::Difference { base, .. } => base.bounds(),
            Region::Sites(sites) => {
                let first = sites.first()?;
                let mut b = Bounds {
                    x0: first.x,
                    x1: first.x,
                    y0: first.y,
                    y1: first.y,
                };
                for s in sites {
                    b.x0 = b.x0.min(s.x);
                    b.x1 = b.x1.max(s.x);
                    b.y0 = b.y0.min(s.y);
                    b.y1 = b.y1.max(s.y);
                }
                Some(b)
            }
        }
    }

    /// All sites, row-major (by `y`, then `x`).
    pub fn sites(&self) -> Vec<SiteCoord> {
        match self {
            Region::Sites(sites) => sites.clone(),
            _ => {
                let Some(b) = self.bounds() else {
                    return Vec::new();
                };
                let mut out = Vec::new();
                for y in b.y0..=b.y1 {
                    for x in b.x0..=b.x1 {
                        let s = SiteCoord::new(x, y);
                        if self.contains(s) {
                            out.push(s);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn site_count(&self) -> usize {
        match self {
            Region::Box { n } => {
                let side = (2 * n + 1) as usize;
                side * side
            }
            Region::Rect { x0, x1, y0, y1 } => ((x1 - x0 + 1) * (y1 - y0 + 1)) as usize,
            Region::Annulus { outer, inner } => {
                let o = (2 * outer + 1) as usize;
                let i = (2 * inner + 1) as usize;
                o * o - i * i
            }
            Region::Translate { base, .. } => base.site_count(),
            Region::Sites(sites) => sites.len(),
            _ => self.sites().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.site_count() == 0
    }

    /// Sites of the region with at least one lattice neighbour outside it.
    /// For a box this is the usual topological boundary ring.
    pub fn boundary_sites(&self) -> Vec<SiteCoord> {
        self.sites()
            .into_iter()
            .filter(|s| s.neighbours().iter().any(|n| !self.contains(*n)))
            .collect()
    }

    /// Sites whose four neighbours all stay in the region.
    pub fn interior_sites(&self) -> Vec<SiteCoord> {
        self.sites()
            .into_iter()
            .filter(|s| s.neighbours().iter().all(|n| self.contains(*n)))
            .collect()
    }

    /// `E(W)` in canonical order: row-major by canonical endpoint,
    /// horizontal before vertical.
    pub fn edges(&self) -> Vec<EdgeId> {
        let Some(b) = self.bounds() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for y in b.y0..=b.y1 {
            for x in b.x0..=b.x1 {
                let s = SiteCoord::new(x, y);
                if !self.contains(s) {
                    continue;
                }
                for orientation in [Orientation::Horizontal, Orientation::Vertical] {
                    let e = EdgeId { site: s, orientation };
                    if self.contains(e.endpoints().1) {
                        out.push(e);
                    }
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Recognize a (possibly translated) rectangle and return its bounds.
    pub fn as_rect(&self) -> Option<Bounds> {
        match self {
            Region::Box { .. } | Region::Rect { .. } => self.bounds(),
            Region::Translate { base, dx, dy } => base.as_rect().map(|b| Bounds {
                x0: b.x0 + dx,
                x1: b.x1 + dx,
                y0: b.y0 + dy,
                y1: b.y1 + dy,
            }),
            _ => None,
        }
    }

    /// Recognize a (possibly translated) centered annulus; returns the
    /// center together with the outer and inner radii.
    pub fn as_annulus(&self) -> Option<(SiteCoord, i64, i64)> {
        match self {
            Region::Annulus { outer, inner } => Some((SiteCoord::new(0, 0), *outer, *inner)),
            Region::Translate { base, dx, dy } => base
                .as_annulus()
                .map(|(c, o, i)| (SiteCoord::new(c.x + dx, c.y + dy), o, i)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_counts_match_formulas() {
        for n in 0..5 {
            let b = Region::centered_box(n).unwrap();
            assert_eq!(b.site_count(), ((2 * n + 1) * (2 * n + 1)) as usize);
            assert_eq!(b.sites().len(), b.site_count());
            // E(box) has 2 * (2n+1) * 2n edges.
            assert_eq!(b.edge_count(), (2 * (2 * n + 1) * 2 * n) as usize);
        }
    }

    #[test]
    fn annulus_is_box_difference() {
        let a = Region::annulus(3, 1).unwrap();
        let d = Region::difference(
            Region::centered_box(3).unwrap(),
            Region::centered_box(1).unwrap(),
        );
        assert_eq!(a.sites(), d.sites());
        assert_eq!(a.edges(), d.edges());
        assert_eq!(a.site_count(), 49 - 9);
    }

    #[test]
    fn boundary_of_box_is_the_outer_ring() {
        let b = Region::centered_box(2).unwrap();
        let boundary = b.boundary_sites();
        assert_eq!(boundary.len(), 16);
        assert!(boundary.iter().all(|s| s.linf_norm() == 2));
        let interior = b.interior_sites();
        assert_eq!(interior.len(), 9);
        assert!(interior.iter().all(|s| s.linf_norm() <= 1));
    }

    #[test]
    fn annulus_boundary_has_inner_and_outer_rings() {
        let a = Region::annulus(3, 1).unwrap();
        let boundary = a.boundary_sites();
        // Outer ring (24 sites) plus the ring at radius 2 adjacent to the
        // hole: the 8 sites straight across from the inner box.
        for s in &boundary {
            let r = s.linf_norm();
            assert!(r == 3 || r == 2);
        }
        assert!(boundary.iter().filter(|s| s.linf_norm() == 3).count() == 24);
    }

    #[test]
    fn translation_composes_and_shifts_everything() {
        let r = Region::annulus(2, 0).unwrap().translate(1, 2).translate(3, -1);
        let (c, o, i) = r.as_annulus().unwrap();
        assert_eq!(c, SiteCoord::new(4, 1));
        assert_eq!((o, i), (2, 0));
        assert!(r.contains(SiteCoord::new(6, 1)));
        assert!(!r.contains(SiteCoord::new(4, 1)));
        assert_eq!(r.site_count(), 24);
    }

    #[test]
    fn edges_are_in_canonical_order_and_inside() {
        let r = Region::annulus(2, 0).unwrap();
        let edges = r.edges();
        let mut sorted = edges.clone();
        sorted.sort();
        assert_eq!(edges, sorted);
        assert!(edges.iter().all(|e| r.contains_edge(*e)));
        // No edge may cross the removed origin.
        assert!(edges
            .iter()
            .all(|e| e.endpoints().0 != SiteCoord::new(0, 0) && e.endpoints().1 != SiteCoord::new(0, 0)));
    }

    #[test]
    fn rect_recognition_survives_translation() {
        let r = Region::rect(0, 4, 0, 1).unwrap().translate(9, 0);
        let b = r.as_rect().unwrap();
        assert_eq!((b.x0, b.x1, b.y0, b.y1), (9, 13, 0, 1));
        assert!(Region::union(vec![]).as_rect().is_none());
    }

    #[test]
    fn invalid_constructions_are_rejected() {
        assert!(Region::centered_box(-1).is_err());
        assert!(Region::rect(1, 0, 0, 0).is_err());
        assert!(Region::annulus(2, 2).is_err());
        assert!(Region::annulus(2, -1).is_err());
    }

    #[test]
    fn explicit_site_sets_sort_and_dedup() {
        let r = Region::from_sites(vec![
            SiteCoord::new(1, 1),
            SiteCoord::new(0, 0),
            SiteCoord::new(1, 1),
            SiteCoord::new(1, 0),
        ]);
        assert_eq!(r.site_count(), 3);
        assert!(r.contains(SiteCoord::new(1, 0)));
        assert!(!r.contains(SiteCoord::new(0, 1)));
        let b = r.bounds().unwrap();
        assert_eq!((b.x0, b.x1, b.y0, b.y1), (0, 1, 0, 1));
    }

    #[test]
    fn empty_union_has_no_bounds_sites_or_edges() {
        let e = Region::union(vec![]);
        assert!(e.bounds().is_none());
        assert!(e.is_empty());
        assert!(e.sites().is_empty());
        assert!(e.edges().is_empty());
    }
}
