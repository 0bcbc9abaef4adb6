//! Crossings and planar duality on rectangles, and circuit extraction in
//! annuli.
//!
//! Edge states are read through an [`EdgeStates`] view; a raw
//! [`Configuration`](crate::lattice::Configuration) reports edges outside
//! its window as closed, and completions built with
//! `Configuration::open_completion` report them as open. The detectors
//! themselves are pure functions of the view and the region.

mod circuit;

pub use circuit::{
    has_open_circuit_in_annulus, innermost_closed_dual_circuit, outermost_open_circuit, Circuit,
    DualCircuit,
};

use serde::{Deserialize, Serialize};

use crate::lattice::{Bounds, EdgeId, EdgeStates, Region, SiteCoord};
use crate::{PercError, Result};

/// Vertex rule for open crossings of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingVariant {
    /// Every vertex except the two endpoints must lie in the open interior
    /// of the rectangle. Degenerates on thin boxes: a width-1 rectangle
    /// has no interior, so only single-edge paths qualify.
    Strict,
    /// Any open path between the two opposite sides, staying in the
    /// rectangle.
    Standard,
}

/// Direction of a closed-dual crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualCrossing {
    /// Blocks open left-right crossings.
    TopToBottom,
    /// Blocks open top-bottom crossings.
    LeftToRight,
}

/// Open path from the left side (`x = x0`) to the right side (`x = x1`).
pub fn has_horizontal_crossing<E: EdgeStates>(
    states: &E,
    rect: &Region,
    variant: CrossingVariant,
) -> Result<bool> {
    let b = require_rect(rect)?;
    Ok(side_to_side(states, b, variant, true))
}

/// Open path from the bottom side (`y = y0`) to the top side (`y = y1`).
pub fn has_vertical_crossing<E: EdgeStates>(
    states: &E,
    rect: &Region,
    variant: CrossingVariant,
) -> Result<bool> {
    let b = require_rect(rect)?;
    Ok(side_to_side(states, b, variant, false))
}

fn require_rect(rect: &Region) -> Result<Bounds> {
    rect.as_rect()
        .ok_or_else(|| PercError::InvalidRegion("crossing region must be a rectangle".into()))
}

fn side_to_side<E: EdgeStates>(
    states: &E,
    b: Bounds,
    variant: CrossingVariant,
    horizontal: bool,
) -> bool {
    let w = b.width() as usize;
    let idx = |s: SiteCoord| ((s.y - b.y0) as usize) * w + (s.x - b.x0) as usize;
    let is_end = |s: SiteCoord| if horizontal { s.x == b.x1 } else { s.y == b.y1 };
    let is_interior =
        |s: SiteCoord| b.x0 < s.x && s.x < b.x1 && b.y0 < s.y && s.y < b.y1;

    let mut visited = vec![false; w * b.height() as usize];
    let mut stack = Vec::new();
    for k in 0..(if horizontal { b.height() } else { b.width() }) {
        let s = if horizontal {
            SiteCoord::new(b.x0, b.y0 + k)
        } else {
            SiteCoord::new(b.x0 + k, b.y0)
        };
        if is_end(s) {
            // Degenerate one-column (one-row) rectangle: the sides meet.
            return true;
        }
        visited[idx(s)] = true;
        stack.push(s);
    }
    while let Some(s) = stack.pop() {
        for nb in s.neighbours() {
            if !b.contains(nb) || visited[idx(nb)] {
                continue;
            }
            // Expansion only ever happens from start or interior sites, so
            // admissibility of the next vertex is the whole strict rule.
            let admissible = match variant {
                CrossingVariant::Standard => true,
                CrossingVariant::Strict => is_end(nb) || is_interior(nb),
            };
            if !admissible {
                continue;
            }
            let e = EdgeId::between(s, nb).expect("lattice neighbours");
            if !states.is_open(e) {
                continue;
            }
            if is_end(nb) {
                return true;
            }
            visited[idx(nb)] = true;
            stack.push(nb);
        }
    }
    false
}

/// Path of closed dual edges crossing the rectangle in the given
/// direction.
///
/// Dual sites are the faces of the rectangle plus one virtual row (or
/// column) on each of the two sides being connected; dual steps in the
/// virtual rows are restricted to the crossing direction, so the path must
/// pass through closed edges of `E(rect)` only. With these conventions a
/// standard open crossing and the blocking dual crossing are exactly
/// complementary on every configuration.
pub fn has_dual_crossing<E: EdgeStates>(
    states: &E,
    rect: &Region,
    direction: DualCrossing,
) -> Result<bool> {
    let b = require_rect(rect)?;
    Ok(match direction {
        DualCrossing::TopToBottom => dual_top_to_bottom(states, b),
        DualCrossing::LeftToRight => dual_left_to_right(states, b),
    })
}

// Face (x, y) denotes the dual site (x + 1/2, y + 1/2).
fn dual_top_to_bottom<E: EdgeStates>(states: &E, b: Bounds) -> bool {
    if b.x0 == b.x1 {
        return false; // no faces to pass through
    }
    // Domain: x in [x0, x1-1], y in [y0-1, y1]; start row y1, goal y0-1.
    let w = (b.x1 - b.x0) as usize;
    let h = (b.y1 - b.y0 + 2) as usize;
    let idx = |x: i64, y: i64| ((y - (b.y0 - 1)) as usize) * w + (x - b.x0) as usize;
    let in_domain = |x: i64, y: i64| b.x0 <= x && x < b.x1 && b.y0 - 1 <= y && y <= b.y1;
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    for x in b.x0..b.x1 {
        visited[idx(x, b.y1)] = true;
        stack.push((x, b.y1));
    }
    while let Some((x, y)) = stack.pop() {
        if y == b.y0 - 1 {
            return true;
        }
        // Vertical dual steps cross the horizontal primal edge at the
        // shared face side; every such edge belongs to E(rect).
        for (ny, crossed_y) in [(y - 1, y), (y + 1, y + 1)] {
            if in_domain(x, ny)
                && !visited[idx(x, ny)]
                && !states.is_open(EdgeId::horizontal(x, crossed_y))
            {
                visited[idx(x, ny)] = true;
                stack.push((x, ny));
            }
        }
        // Horizontal dual steps cross a vertical primal edge; they are
        // forbidden in the two virtual rows, where the crossed edge would
        // leave E(rect).
        if y >= b.y0 && y < b.y1 {
            for (nx, crossed_x) in [(x - 1, x), (x + 1, x + 1)] {
                if in_domain(nx, y)
                    && !visited[idx(nx, y)]
                    && !states.is_open(EdgeId::vertical(crossed_x, y))
                {
                    visited[idx(nx, y)] = true;
                    stack.push((nx, y));
                }
            }
        }
    }
    false
}

fn dual_left_to_right<E: EdgeStates>(states: &E, b: Bounds) -> bool {
    if b.y0 == b.y1 {
        return false;
    }
    // Domain: x in [x0-1, x1], y in [y0, y1-1]; start column x1, goal x0-1.
    let w = (b.x1 - b.x0 + 2) as usize;
    let h = (b.y1 - b.y0) as usize;
    let idx = |x: i64, y: i64| ((y - b.y0) as usize) * w + (x - (b.x0 - 1)) as usize;
    let in_domain = |x: i64, y: i64| b.x0 - 1 <= x && x <= b.x1 && b.y0 <= y && y < b.y1;
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    for y in b.y0..b.y1 {
        visited[idx(b.x1, y)] = true;
        stack.push((b.x1, y));
    }
    while let Some((x, y)) = stack.pop() {
        if x == b.x0 - 1 {
            return true;
        }
        for (nx, crossed_x) in [(x - 1, x), (x + 1, x + 1)] {
            if in_domain(nx, y)
                && !visited[idx(nx, y)]
                && !states.is_open(EdgeId::vertical(crossed_x, y))
            {
                visited[idx(nx, y)] = true;
                stack.push((nx, y));
            }
        }
        if x >= b.x0 && x < b.x1 {
            for (ny, crossed_y) in [(y - 1, y), (y + 1, y + 1)] {
                if in_domain(x, ny)
                    && !visited[idx(x, ny)]
                    && !states.is_open(EdgeId::horizontal(x, crossed_y))
                {
                    visited[idx(x, ny)] = true;
                    stack.push((x, ny));
                }
            }
        }
    }
    false
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::lattice::{Configuration, Region};

    /// Visit every configuration of the window (all `2^{|E|}` edge-state
    /// patterns). Panics if the window has more than 20 edges.
    pub fn for_each_configuration(window: &Region, mut visit: impl FnMut(&Configuration)) {
        let edges = window.edges();
        assert!(edges.len() <= 20, "exhaustive sweep too large");
        let mut config = Configuration::new(window.clone()).unwrap();
        for mask in 0u32..(1 << edges.len()) {
            for (i, e) in edges.iter().enumerate() {
                config.set_edge(*e, mask >> i & 1 == 1).unwrap();
            }
            visit(&config);
        }
    }

    /// Apply one of the 8 square symmetries (4 rotations x optional
    /// reflection) to a configuration on a centered box, mapping edge
    /// states so that the result is the transformed percolation picture.
    pub fn apply_symmetry(config: &Configuration, rotation: u8, reflect: bool) -> Configuration {
        use crate::lattice::SiteCoord;
        let window = config.window().clone();
        let mut out = Configuration::new(window.clone()).unwrap();
        let map = |s: SiteCoord| {
            let mut p = if reflect {
                SiteCoord::new(-s.x, s.y)
            } else {
                s
            };
            for _ in 0..rotation % 4 {
                p = SiteCoord::new(-p.y, p.x);
            }
            p
        };
        for e in window.edges() {
            let (a, b) = e.endpoints();
            let mapped = crate::lattice::EdgeId::between(map(a), map(b)).unwrap();
            out.set_edge(mapped, crate::lattice::EdgeStates::is_open(config, e))
                .unwrap();
        }
        out
    }
}
