//! Hole-surrounding circuits in box annuli.
//!
//! Both extractors explore connectivity from one side of the annulus and
//! read the answer off the interface of the explored set:
//!
//! - The outermost open circuit is the inner contour of the set of faces
//!   reachable from outside the annulus without crossing an open edge of
//!   `E(A)`. Any open hole-surrounding circuit blocks that exploration, so
//!   the contour is the unique maximal one.
//! - The innermost closed dual circuit is the interface of the set of
//!   sites reachable from the hole without crossing a closed edge whose
//!   dual edge stays in the annulus band. Any qualifying dual circuit
//!   confines that exploration, so the interface is the unique minimal one.
//!
//! Interfaces of two disjoint 4-connected sets are simple cycles (no
//! vertex can carry four interface edges, since the diagonal pattern would
//! force the two sets to cross), which the extractors assert.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::lattice::{EdgeId, EdgeStates, Region, SiteCoord};
use crate::{PercError, Result};

/// Open circuit: a simple cycle of lattice sites whose consecutive edges
/// are all open. Stored in canonical cyclic form (row-major least site
/// first, toward its smaller neighbour).
#[derive(Debug, Clone, Serialize)]
pub struct Circuit {
    sites: Vec<SiteCoord>,
    #[serde(skip_serializing)]
    edges: Vec<EdgeId>,
    #[serde(skip_serializing)]
    interior: Region,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
    }
}

impl Eq for Circuit {}

impl Circuit {
    /// Build a circuit from a cyclic site sequence (without the repeated
    /// final site). Validates adjacency and simplicity; computes the edge
    /// set and the enclosed region.
    pub fn from_cycle_sites(sites: Vec<SiteCoord>) -> Result<Circuit> {
        if sites.len() < 4 {
            return Err(PercError::InvalidRegion(
                "a lattice circuit has at least 4 sites".into(),
            ));
        }
        let mut sorted = sites.clone();
        sorted.sort_by_key(|s| (s.y, s.x));
        sorted.dedup();
        if sorted.len() != sites.len() {
            return Err(PercError::InvalidRegion("circuit repeats a site".into()));
        }
        let mut edges = Vec::with_capacity(sites.len());
        for (k, &s) in sites.iter().enumerate() {
            let next = sites[(k + 1) % sites.len()];
            let e = EdgeId::between(s, next).ok_or_else(|| {
                PercError::InvalidRegion("consecutive circuit sites must be adjacent".into())
            })?;
            edges.push(e);
        }
        edges.sort();
        let interior = Region::from_sites(lattice_polygon_interior(&sites));
        Ok(Circuit {
            sites: canonical_cycle(sites),
            edges,
            interior,
        })
    }

    fn from_parts(sites: Vec<SiteCoord>, mut edges: Vec<EdgeId>, interior: Vec<SiteCoord>) -> Circuit {
        edges.sort();
        Circuit {
            sites: canonical_cycle(sites),
            edges,
            interior: Region::from_sites(interior),
        }
    }

    /// Cyclic site sequence in canonical order.
    pub fn sites(&self) -> &[SiteCoord] {
        &self.sites
    }

    /// The circuit's edges, sorted canonically.
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    /// Bounded component of the plane minus the circuit.
    pub fn interior(&self) -> &Region {
        &self.interior
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn interior_site_count(&self) -> usize {
        self.interior.site_count()
    }

    /// Whether `s` lies strictly inside the circuit.
    pub fn encloses(&self, s: SiteCoord) -> bool {
        self.interior.contains(s)
    }

    pub fn is_fully_open<E: EdgeStates>(&self, states: &E) -> bool {
        self.edges.iter().all(|&e| states.is_open(e))
    }

    /// Test dump: one `x y` pair per line, cyclic canonical order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.sites {
            out.push_str(&format!("{} {}\n", s.x, s.y));
        }
        out
    }
}

/// Closed dual circuit: a simple cycle of dual lattice points, each stored
/// as the integer pair `(x, y)` denoting the dual site `(x+1/2, y+1/2)`.
/// Every primal edge it crosses is closed.
#[derive(Debug, Clone, Serialize)]
pub struct DualCircuit {
    dual_sites: Vec<SiteCoord>,
    #[serde(skip_serializing)]
    crossed: Vec<EdgeId>,
    #[serde(skip_serializing)]
    interior: Region,
}

impl PartialEq for DualCircuit {
    fn eq(&self, other: &Self) -> bool {
        self.crossed == other.crossed
    }
}

impl Eq for DualCircuit {}

impl DualCircuit {
    /// Build from a cyclic dual-site sequence (integer index form).
    pub fn from_dual_cycle_sites(dual_sites: Vec<SiteCoord>) -> Result<DualCircuit> {
        if dual_sites.len() < 4 {
            return Err(PercError::InvalidRegion(
                "a dual circuit has at least 4 dual sites".into(),
            ));
        }
        let mut sorted = dual_sites.clone();
        sorted.sort_by_key(|s| (s.y, s.x));
        sorted.dedup();
        if sorted.len() != dual_sites.len() {
            return Err(PercError::InvalidRegion("dual circuit repeats a site".into()));
        }
        let mut crossed = Vec::with_capacity(dual_sites.len());
        for (k, &d) in dual_sites.iter().enumerate() {
            let next = dual_sites[(k + 1) % dual_sites.len()];
            let e = dual_step_crossing(d, next).ok_or_else(|| {
                PercError::InvalidRegion("consecutive dual sites must be adjacent".into())
            })?;
            crossed.push(e);
        }
        crossed.sort();
        let interior = Region::from_sites(dual_polygon_interior(&dual_sites));
        Ok(DualCircuit {
            dual_sites: canonical_cycle(dual_sites),
            crossed,
            interior,
        })
    }

    fn from_parts(
        dual_sites: Vec<SiteCoord>,
        mut crossed: Vec<EdgeId>,
        interior: Vec<SiteCoord>,
    ) -> DualCircuit {
        crossed.sort();
        DualCircuit {
            dual_sites: canonical_cycle(dual_sites),
            crossed,
            interior: Region::from_sites(interior),
        }
    }

    /// Cyclic dual-site sequence, integer index form.
    pub fn dual_sites(&self) -> &[SiteCoord] {
        &self.dual_sites
    }

    /// Primal edges crossed by the circuit, sorted canonically.
    pub fn crossed_edges(&self) -> &[EdgeId] {
        &self.crossed
    }

    /// Primal sites strictly inside the circuit.
    pub fn interior(&self) -> &Region {
        &self.interior
    }

    pub fn site_count(&self) -> usize {
        self.dual_sites.len()
    }

    pub fn encloses(&self, s: SiteCoord) -> bool {
        self.interior.contains(s)
    }

    pub fn is_fully_closed<E: EdgeStates>(&self, states: &E) -> bool {
        self.crossed.iter().all(|&e| !states.is_open(e))
    }
}

/// Primal edge crossed when stepping between two adjacent dual sites.
fn dual_step_crossing(a: SiteCoord, b: SiteCoord) -> Option<EdgeId> {
    match (b.x - a.x, b.y - a.y) {
        // Vertical dual step crosses the horizontal primal edge between
        // the two faces.
        (0, 1) => Some(EdgeId::horizontal(a.x, a.y + 1)),
        (0, -1) => Some(EdgeId::horizontal(a.x, a.y)),
        // Horizontal dual step crosses the vertical primal edge.
        (1, 0) => Some(EdgeId::vertical(a.x + 1, a.y)),
        (-1, 0) => Some(EdgeId::vertical(a.x, a.y)),
        _ => None,
    }
}

/// Rotate and orient a cyclic sequence: least site (row-major) first,
/// second element the smaller of its two neighbours.
fn canonical_cycle(sites: Vec<SiteCoord>) -> Vec<SiteCoord> {
    let n = sites.len();
    let start = (0..n)
        .min_by_key(|&k| (sites[k].y, sites[k].x))
        .expect("nonempty cycle");
    let prev = sites[(start + n - 1) % n];
    let next = sites[(start + 1) % n];
    let forward = (next.y, next.x) < (prev.y, prev.x);
    (0..n)
        .map(|k| {
            if forward {
                sites[(start + k) % n]
            } else {
                sites[(start + n - k) % n]
            }
        })
        .collect()
}

/// Sites strictly inside a simple lattice polygon, by ray-parity against
/// the polygon's vertical edges.
fn lattice_polygon_interior(cycle: &[SiteCoord]) -> Vec<SiteCoord> {
    let n = cycle.len();
    let mut verticals = Vec::new();
    for (k, &s) in cycle.iter().enumerate() {
        let t = cycle[(k + 1) % n];
        if s.x == t.x {
            verticals.push(SiteCoord::new(s.x, s.y.min(t.y)));
        }
    }
    let on_cycle: std::collections::HashSet<_> = cycle.iter().copied().collect();
    let (xs, ys): (Vec<_>, Vec<_>) = cycle.iter().map(|s| (s.x, s.y)).unzip();
    let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
    let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
    let mut interior = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let v = SiteCoord::new(x, y);
            if on_cycle.contains(&v) {
                continue;
            }
            // A rightward ray at height y + eps crosses exactly the
            // vertical polygon edges with lower endpoint (x', y), x' > x.
            let crossings = verticals.iter().filter(|e| e.y == y && e.x > x).count();
            if crossings % 2 == 1 {
                interior.push(v);
            }
        }
    }
    interior
}

/// Primal sites strictly inside a simple dual polygon (index form).
fn dual_polygon_interior(dual_cycle: &[SiteCoord]) -> Vec<SiteCoord> {
    let n = dual_cycle.len();
    let mut verticals = Vec::new();
    for (k, &s) in dual_cycle.iter().enumerate() {
        let t = dual_cycle[(k + 1) % n];
        if s.x == t.x {
            verticals.push(SiteCoord::new(s.x, s.y.min(t.y)));
        }
    }
    let (xs, ys): (Vec<_>, Vec<_>) = dual_cycle.iter().map(|s| (s.x, s.y)).unzip();
    let (x0, x1) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
    let (y0, y1) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
    let mut interior = Vec::new();
    // Candidate primal sites lie within the dual hull; a dual vertical
    // segment from (x+1/2, y+1/2) upward crosses the ray at integer height
    // v.y iff y = v.y - 1, to the right iff x >= v.x.
    for y in y0..=y1 + 1 {
        for x in x0..=x1 + 1 {
            let v = SiteCoord::new(x, y);
            let crossings = verticals
                .iter()
                .filter(|e| e.y == v.y - 1 && e.x >= v.x)
                .count();
            if crossings % 2 == 1 {
                interior.push(v);
            }
        }
    }
    interior
}

/// Walk a degree-2 adjacency into a single cycle; panics if the interface
/// is not one simple cycle (which the planarity argument rules out).
fn walk_cycle(adj: &BTreeMap<(i64, i64), Vec<SiteCoord>>) -> Vec<SiteCoord> {
    for (site, nbs) in adj {
        assert!(
            nbs.len() == 2,
            "interface vertex ({}, {}) has degree {}",
            site.1,
            site.0,
            nbs.len()
        );
    }
    let (&first_key, first_nbs) = adj.iter().next().expect("nonempty interface");
    let start = SiteCoord::new(first_key.1, first_key.0);
    let mut cycle = vec![start];
    let mut prev = start;
    let mut cur = *first_nbs
        .iter()
        .min_by_key(|s| (s.y, s.x))
        .expect("two neighbours");
    while cur != start {
        cycle.push(cur);
        let nbs = &adj[&(cur.y, cur.x)];
        let next = if nbs[0] == prev { nbs[1] } else { nbs[0] };
        prev = cur;
        cur = next;
    }
    assert_eq!(cycle.len(), adj.len(), "interface is not a single cycle");
    cycle
}

/// Geometry of a centered box annulus.
#[derive(Debug, Clone, Copy)]
struct Frame {
    cx: i64,
    cy: i64,
    outer: i64,
    inner: i64,
}

impl Frame {
    fn from_region(annulus: &Region) -> Result<Frame> {
        let (c, outer, inner) = annulus.as_annulus().ok_or_else(|| {
            PercError::NotAnAnnulus("circuit search needs a (translated) box annulus".into())
        })?;
        Ok(Frame {
            cx: c.x,
            cy: c.y,
            outer,
            inner,
        })
    }

    fn site_cheb(&self, s: SiteCoord) -> i64 {
        (s.x - self.cx).abs().max((s.y - self.cy).abs())
    }

    fn site_in_annulus(&self, s: SiteCoord) -> bool {
        let r = self.site_cheb(s);
        r > self.inner && r <= self.outer
    }

    fn edge_in_annulus(&self, e: EdgeId) -> bool {
        let (a, b) = e.endpoints();
        self.site_in_annulus(a) && self.site_in_annulus(b)
    }

    /// Whether the dual edge crossing `e` lies in the annulus band, i.e.
    /// both of its dual endpoints are strictly between hole and outer box.
    fn dual_edge_in_band(&self, e: EdgeId) -> bool {
        let (f1, f2) = flanking_faces(e);
        self.face_in_band(f1) && self.face_in_band(f2)
    }

    fn face_in_band(&self, f: (i64, i64)) -> bool {
        // Face (x, y) sits at (x+1/2, y+1/2); compare twice the offsets.
        let dx2 = (2 * (f.0 - self.cx) + 1).abs();
        let dy2 = (2 * (f.1 - self.cy) + 1).abs();
        let cheb2 = dx2.max(dy2);
        2 * self.inner + 1 <= cheb2 && cheb2 <= 2 * self.outer - 1
    }
}

/// The two faces flanking a primal edge (index form).
fn flanking_faces(e: EdgeId) -> ((i64, i64), (i64, i64)) {
    let s = e.site;
    match e.orientation {
        crate::lattice::Orientation::Horizontal => ((s.x, s.y), (s.x, s.y - 1)),
        crate::lattice::Orientation::Vertical => ((s.x, s.y), (s.x - 1, s.y)),
    }
}

/// Dense grid over the faces touching the annulus's outer box, one ring of
/// outside faces included.
struct FaceGrid {
    frame: Frame,
    fx0: i64,
    fy0: i64,
    side: i64,
}

impl FaceGrid {
    fn new(frame: Frame) -> FaceGrid {
        FaceGrid {
            frame,
            fx0: frame.cx - frame.outer - 1,
            fy0: frame.cy - frame.outer - 1,
            side: 2 * frame.outer + 2,
        }
    }

    fn idx(&self, fx: i64, fy: i64) -> usize {
        ((fy - self.fy0) * self.side + (fx - self.fx0)) as usize
    }

    fn in_domain(&self, fx: i64, fy: i64) -> bool {
        fx >= self.fx0 && fx < self.fx0 + self.side && fy >= self.fy0 && fy < self.fy0 + self.side
    }

    fn on_outside_ring(&self, fx: i64, fy: i64) -> bool {
        fx == self.fx0 || fx == self.fx0 + self.side - 1 || fy == self.fy0 || fy == self.fy0 + self.side - 1
    }

    fn touches_hole(&self, fx: i64, fy: i64) -> bool {
        let f = self.frame;
        let dx = if f.cx <= fx {
            fx - f.cx
        } else if f.cx >= fx + 1 {
            f.cx - fx - 1
        } else {
            0
        };
        let dy = if f.cy <= fy {
            fy - f.cy
        } else if f.cy >= fy + 1 {
            f.cy - fy - 1
        } else {
            0
        };
        dx.max(dy) <= f.inner
    }

    /// Primal edge crossed when stepping between two 4-adjacent faces.
    fn crossed(&self, fx: i64, fy: i64, nx: i64, ny: i64) -> EdgeId {
        match (nx - fx, ny - fy) {
            (0, 1) => EdgeId::horizontal(fx, fy + 1),
            (0, -1) => EdgeId::horizontal(fx, fy),
            (1, 0) => EdgeId::vertical(fx + 1, fy),
            (-1, 0) => EdgeId::vertical(fx, fy),
            _ => unreachable!("faces are 4-adjacent"),
        }
    }
}

enum OutsideExploration {
    /// The outside reaches the hole zone: no open circuit surrounds the
    /// hole.
    ReachedHole,
    /// Blocked; the explored-face bitmap is returned for contour reading.
    Blocked(Vec<bool>),
}

/// Flood the faces from outside the annulus, passing a face boundary only
/// where the shared primal edge is not an open edge of `E(A)`.
fn explore_outside<E: EdgeStates>(states: &E, g: &FaceGrid) -> OutsideExploration {
    let mut t = vec![false; (g.side * g.side) as usize];
    let mut stack = Vec::new();
    for fy in g.fy0..g.fy0 + g.side {
        for fx in g.fx0..g.fx0 + g.side {
            if g.on_outside_ring(fx, fy) {
                t[g.idx(fx, fy)] = true;
                stack.push((fx, fy));
            }
        }
    }
    while let Some((fx, fy)) = stack.pop() {
        if g.touches_hole(fx, fy) {
            return OutsideExploration::ReachedHole;
        }
        for (nx, ny) in [(fx + 1, fy), (fx - 1, fy), (fx, fy + 1), (fx, fy - 1)] {
            if !g.in_domain(nx, ny) || t[g.idx(nx, ny)] {
                continue;
            }
            let e = g.crossed(fx, fy, nx, ny);
            if g.frame.edge_in_annulus(e) && states.is_open(e) {
                continue;
            }
            t[g.idx(nx, ny)] = true;
            stack.push((nx, ny));
        }
    }
    OutsideExploration::Blocked(t)
}

/// Whether an open circuit inside the annulus surrounds the inner hole.
/// Equivalent to the absence of a path of non-open annulus boundaries from
/// the outside to the hole, which is how it is computed.
pub fn has_open_circuit_in_annulus<E: EdgeStates>(states: &E, annulus: &Region) -> Result<bool> {
    let frame = Frame::from_region(annulus)?;
    let g = FaceGrid::new(frame);
    Ok(matches!(
        explore_outside(states, &g),
        OutsideExploration::Blocked(_)
    ))
}

/// The open circuit surrounding the hole whose interior contains the
/// interior of every other such circuit, or `None` when no open circuit
/// surrounds the hole.
pub fn outermost_open_circuit<E: EdgeStates>(
    states: &E,
    annulus: &Region,
) -> Result<Option<Circuit>> {
    let frame = Frame::from_region(annulus)?;
    let g = FaceGrid::new(frame);
    let t = match explore_outside(states, &g) {
        OutsideExploration::ReachedHole => return Ok(None),
        OutsideExploration::Blocked(t) => t,
    };

    // Faces enclosed by the circuit: flood plain face-adjacency from the
    // hole zone through unexplored faces.
    let mut u = vec![false; t.len()];
    let mut stack = Vec::new();
    for fy in g.fy0..g.fy0 + g.side {
        for fx in g.fx0..g.fx0 + g.side {
            if g.touches_hole(fx, fy) && !u[g.idx(fx, fy)] {
                debug_assert!(!t[g.idx(fx, fy)]);
                u[g.idx(fx, fy)] = true;
                stack.push((fx, fy));
            }
        }
    }
    while let Some((fx, fy)) = stack.pop() {
        for (nx, ny) in [(fx + 1, fy), (fx - 1, fy), (fx, fy + 1), (fx, fy - 1)] {
            if g.in_domain(nx, ny) && !t[g.idx(nx, ny)] && !u[g.idx(nx, ny)] {
                u[g.idx(nx, ny)] = true;
                stack.push((nx, ny));
            }
        }
    }

    // The circuit is the interface between enclosed and outside faces.
    let mut contour = Vec::new();
    let mut adj: BTreeMap<(i64, i64), Vec<SiteCoord>> = BTreeMap::new();
    for fy in g.fy0..g.fy0 + g.side {
        for fx in g.fx0..g.fx0 + g.side {
            if !u[g.idx(fx, fy)] {
                continue;
            }
            for (nx, ny) in [(fx + 1, fy), (fx - 1, fy), (fx, fy + 1), (fx, fy - 1)] {
                if !g.in_domain(nx, ny) || !t[g.idx(nx, ny)] {
                    continue;
                }
                let e = g.crossed(fx, fy, nx, ny);
                assert!(
                    g.frame.edge_in_annulus(e) && states.is_open(e),
                    "contour edge must be an open annulus edge"
                );
                let (a, b) = e.endpoints();
                contour.push(e);
                adj.entry((a.y, a.x)).or_default().push(b);
                adj.entry((b.y, b.x)).or_default().push(a);
            }
        }
    }
    let cycle = walk_cycle(&adj);

    // Interior sites: a site is strictly inside iff it is off the circuit
    // and its upper-right face is enclosed.
    let on_cycle: std::collections::HashSet<_> = cycle.iter().copied().collect();
    let mut interior = Vec::new();
    for fy in g.fy0..g.fy0 + g.side {
        for fx in g.fx0..g.fx0 + g.side {
            if u[g.idx(fx, fy)] {
                let v = SiteCoord::new(fx, fy);
                if !on_cycle.contains(&v) {
                    interior.push(v);
                }
            }
        }
    }
    Ok(Some(Circuit::from_parts(cycle, contour, interior)))
}

/// The closed dual circuit in the annulus band surrounding the hole whose
/// interior is contained in every other such circuit's interior, or `None`
/// when no closed dual circuit surrounds the hole within the band.
pub fn innermost_closed_dual_circuit<E: EdgeStates>(
    states: &E,
    annulus: &Region,
) -> Result<Option<DualCircuit>> {
    let frame = Frame::from_region(annulus)?;
    let side = 2 * frame.outer + 1;
    let (x0, y0) = (frame.cx - frame.outer, frame.cy - frame.outer);
    let idx = |s: SiteCoord| ((s.y - y0) * side + (s.x - x0)) as usize;
    let in_box = |s: SiteCoord| frame.site_cheb(s) <= frame.outer;

    // Flood from the hole; an edge can be passed if it is open or if its
    // dual edge leaves the band (such an edge cannot be crossed by any
    // qualifying dual circuit). Reaching the outer boundary ring proves no
    // dual circuit confines the hole.
    let mut s_set = vec![false; (side * side) as usize];
    let mut stack = Vec::new();
    for y in (frame.cy - frame.inner)..=(frame.cy + frame.inner) {
        for x in (frame.cx - frame.inner)..=(frame.cx + frame.inner) {
            let v = SiteCoord::new(x, y);
            s_set[idx(v)] = true;
            stack.push(v);
        }
    }
    while let Some(v) = stack.pop() {
        for nb in v.neighbours() {
            if !in_box(nb) || s_set[idx(nb)] {
                continue;
            }
            let e = EdgeId::between(v, nb).expect("lattice neighbours");
            if !states.is_open(e) && frame.dual_edge_in_band(e) {
                continue;
            }
            if frame.site_cheb(nb) == frame.outer {
                // From the outer ring every outward edge has an out-of-band
                // dual, so the flood escapes the annulus entirely.
                return Ok(None);
            }
            s_set[idx(nb)] = true;
            stack.push(nb);
        }
    }

    // Outside component: flood plain adjacency from the outer ring.
    let mut r_set = vec![false; (side * side) as usize];
    let mut stack = Vec::new();
    for y in (frame.cy - frame.outer)..=(frame.cy + frame.outer) {
        for x in (frame.cx - frame.outer)..=(frame.cx + frame.outer) {
            let v = SiteCoord::new(x, y);
            if frame.site_cheb(v) == frame.outer {
                debug_assert!(!s_set[idx(v)]);
                r_set[idx(v)] = true;
                stack.push(v);
            }
        }
    }
    while let Some(v) = stack.pop() {
        for nb in v.neighbours() {
            if in_box(nb) && !s_set[idx(nb)] && !r_set[idx(nb)] {
                r_set[idx(nb)] = true;
                stack.push(nb);
            }
        }
    }

    // Interface between hole side and outside: the innermost circuit.
    let mut crossed = Vec::new();
    let mut adj: BTreeMap<(i64, i64), Vec<SiteCoord>> = BTreeMap::new();
    for y in (frame.cy - frame.outer)..=(frame.cy + frame.outer) {
        for x in (frame.cx - frame.outer)..=(frame.cx + frame.outer) {
            let v = SiteCoord::new(x, y);
            if !s_set[idx(v)] {
                continue;
            }
            for nb in v.neighbours() {
                if !in_box(nb) || !r_set[idx(nb)] {
                    continue;
                }
                let e = EdgeId::between(v, nb).expect("lattice neighbours");
                assert!(
                    !states.is_open(e) && frame.dual_edge_in_band(e),
                    "separating edge must be closed with an in-band dual"
                );
                let (f1, f2) = flanking_faces(e);
                let (d1, d2) = (SiteCoord::new(f1.0, f1.1), SiteCoord::new(f2.0, f2.1));
                crossed.push(e);
                adj.entry((d1.y, d1.x)).or_default().push(d2);
                adj.entry((d2.y, d2.x)).or_default().push(d1);
            }
        }
    }
    let cycle = walk_cycle(&adj);

    // Everything not reachable from outside lies inside the circuit.
    let mut interior = Vec::new();
    for y in (frame.cy - frame.outer)..=(frame.cy + frame.outer) {
        for x in (frame.cx - frame.outer)..=(frame.cx + frame.outer) {
            let v = SiteCoord::new(x, y);
            if !r_set[idx(v)] {
                interior.push(v);
            }
        }
    }
    Ok(Some(DualCircuit::from_parts(cycle, crossed, interior)))
}
