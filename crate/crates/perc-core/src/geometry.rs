//! Partition of a centered box into an m x m grid of overlapping sub-boxes
//! joined by corridors, each sub-box carrying three nested annuli, plus
//! the feasibility search for the rescaling parameters (x, eps, N) that
//! make the partition useful at scale n.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::PercError;
use crate::lattice::{Region, SiteCoord};
use crate::Result;

/// Grid shape: m x m cells of radius s whose rings have width t.
///
/// Cell centers sit at (2is, 2js) for i, j in [-(m-1)/2, (m-1)/2], so
/// adjacent cells share one row or column of sites and the grid tiles the
/// box of radius m*s exactly. Three disjoint width-t annuli must fit
/// inside each cell, hence t <= s/3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub m: i64,
    pub s: i64,
    pub t: i64,
}

impl PartitionSpec {
    pub fn new(m: i64, s: i64, t: i64) -> Result<PartitionSpec> {
        if m < 1 || m % 2 == 0 {
            return Err(PercError::InvalidParameters(format!(
                "grid size m must be an odd positive integer, got {m}"
            )));
        }
        if s < 1 || t < 1 {
            return Err(PercError::InvalidParameters(format!(
                "cell radius and ring width must be positive, got s={s}, t={t}"
            )));
        }
        if 3 * t > s {
            return Err(PercError::InvalidParameters(format!(
                "three width-{t} rings do not fit in a cell of radius {s}"
            )));
        }
        Ok(PartitionSpec { m, s, t })
    }

    /// Cell indices along each axis.
    pub fn index_range(&self) -> RangeInclusive<i64> {
        let h = (self.m - 1) / 2;
        -h..=h
    }

    /// Center of cell (i, j).
    pub fn center(&self, i: i64, j: i64) -> SiteCoord {
        SiteCoord::new(2 * i * self.s, 2 * j * self.s)
    }

    /// Radius of the tiled core box.
    pub fn core_radius(&self) -> i64 {
        self.m * self.s
    }

    // The region helpers below accept every integer index, not just the
    // grid range: the event conditions of cells one step outside the grid
    // straddle the core boundary and still matter.

    /// Box of cell (i, j).
    pub fn cell_box(&self, i: i64, j: i64) -> Region {
        self.shifted(i, j, Region::Box { n: self.s })
    }

    /// Outermost of the three cell annuli, width t.
    pub fn outer_ring(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Annulus { outer: s, inner: s - t })
    }

    /// Second annulus inward; open circuits live here.
    pub fn middle_ring(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Annulus { outer: s - t, inner: s - 2 * t })
    }

    /// Third annulus inward; closed dual circuits live here.
    pub fn inner_ring(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Annulus { outer: s - 2 * t, inner: s - 3 * t })
    }

    /// The three rings together: the cell minus its core of radius s-3t.
    pub fn frame(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Annulus { outer: s, inner: s - 3 * t })
    }

    /// Corridor from cell (i, j) toward (i+1, j): the rectangle
    /// [s-2t, s+2t] x [0, t] shifted to the cell center. It crosses the
    /// shared cell boundary and its short ends reach into the holes of
    /// both middle rings, so every hole-surrounding circuit meets it.
    pub fn h_corridor(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Rect { x0: s - 2 * t, x1: s + 2 * t, y0: 0, y1: t })
    }

    /// Corridor from cell (i, j) toward (i, j+1), the mirror image of
    /// [`PartitionSpec::h_corridor`].
    pub fn v_corridor(&self, i: i64, j: i64) -> Region {
        let (s, t) = (self.s, self.t);
        self.shifted(i, j, Region::Rect { x0: 0, x1: t, y0: s - 2 * t, y1: s + 2 * t })
    }

    fn shifted(&self, i: i64, j: i64, base: Region) -> Region {
        let c = self.center(i, j);
        base.translate(c.x, c.y)
    }
}

/// The regions attached to one cell of the partition. All are the (0, 0)
/// regions translated by the cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRegions {
    pub i: i64,
    pub j: i64,
    /// The cell itself: a box of radius s.
    pub cell: Region,
    /// Width-t annulus hugging the cell boundary.
    pub outer_ring: Region,
    /// Next width-t annulus inward; open circuits live here.
    pub middle_ring: Region,
    /// Third width-t annulus; closed dual circuits live here.
    pub inner_ring: Region,
    /// The three rings together: the cell minus its core of radius s-3t.
    pub frame: Region,
}

impl CellRegions {
    fn new(spec: &PartitionSpec, i: i64, j: i64) -> CellRegions {
        CellRegions {
            i,
            j,
            cell: spec.cell_box(i, j),
            outer_ring: spec.outer_ring(i, j),
            middle_ring: spec.middle_ring(i, j),
            inner_ring: spec.inner_ring(i, j),
            frame: spec.frame(i, j),
        }
    }
}

/// A corridor joining two adjacent cells, wide enough to reach from one
/// cell's middle ring to the other's.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    /// Index of the left (horizontal) or bottom (vertical) cell.
    pub i: i64,
    pub j: i64,
    pub region: Region,
}

/// The full partition of the box of radius n.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub spec: PartitionSpec,
    pub n: i64,
    /// Row-major by (j, i).
    pub cells: Vec<CellRegions>,
    /// Corridor from cell (i, j) to (i+1, j), for i below the top index.
    pub h_corridors: Vec<Corridor>,
    /// Corridor from cell (i, j) to (i, j+1), for j below the top index.
    pub v_corridors: Vec<Corridor>,
    /// The tiled box of radius m*s.
    pub core: Region,
    /// The box of radius n.
    pub window: Region,
    /// The window minus the tiled core, together with every cell frame:
    /// the sites the main estimate controls separately from the circuit
    /// interiors.
    pub margin: Region,
}

pub fn build_partition(spec: &PartitionSpec, n: i64) -> Result<Partition> {
    let core_radius = spec.core_radius();
    if core_radius > n {
        return Err(PercError::InvalidParameters(format!(
            "grid of {} cells of radius {} spans radius {core_radius} > window radius {n}",
            spec.m * spec.m,
            spec.s
        )));
    }
    let range = spec.index_range();
    let mut cells = Vec::new();
    let mut h_corridors = Vec::new();
    let mut v_corridors = Vec::new();
    for j in range.clone() {
        for i in range.clone() {
            cells.push(CellRegions::new(spec, i, j));
            if i < *range.end() {
                h_corridors.push(Corridor { i, j, region: spec.h_corridor(i, j) });
            }
            if j < *range.end() {
                v_corridors.push(Corridor { i, j, region: spec.v_corridor(i, j) });
            }
        }
    }
    let core = Region::Box { n: core_radius };
    let window = Region::Box { n };
    let mut margin_parts = vec![Region::difference(window.clone(), core.clone())];
    margin_parts.extend(cells.iter().map(|c| c.frame.clone()));
    Ok(Partition {
        spec: *spec,
        n,
        cells,
        h_corridors,
        v_corridors,
        core,
        window,
        margin: Region::union(margin_parts),
    })
}

impl Partition {
    pub fn cell(&self, i: i64, j: i64) -> &CellRegions {
        let h = (self.spec.m - 1) / 2;
        assert!(i.abs() <= h && j.abs() <= h, "cell index ({i}, {j}) out of range");
        &self.cells[((j + h) * self.spec.m + (i + h)) as usize]
    }
}

/// Model of the one-arm probability used by the parameter search: either
/// a fitted power law or a measured table with log-log interpolation and
/// power-law extrapolation from the nearest pair of entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PiModel {
    Power { amplitude: f64, exponent: f64 },
    Table(Vec<(i64, f64)>),
}

impl PiModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PiModel::Power { amplitude, exponent } => {
                if !(*amplitude > 0.0) {
                    return Err(PercError::InvalidParameters(format!(
                        "power-law amplitude must be positive, got {amplitude}"
                    )));
                }
                if !(0.0..1.0).contains(exponent) {
                    return Err(PercError::InvalidParameters(format!(
                        "one-arm exponent must lie in [0, 1), got {exponent}"
                    )));
                }
            }
            PiModel::Table(rows) => {
                if rows.is_empty() {
                    return Err(PercError::InvalidParameters(
                        "empty one-arm table".into(),
                    ));
                }
                for w in rows.windows(2) {
                    if w[0].0 >= w[1].0 {
                        return Err(PercError::InvalidParameters(
                            "one-arm table scales must be strictly increasing".into(),
                        ));
                    }
                    if w[0].1 < w[1].1 {
                        return Err(PercError::InvalidParameters(
                            "one-arm table values must be non-increasing".into(),
                        ));
                    }
                }
                if rows.iter().any(|r| r.0 < 1 || !(r.1 > 0.0)) {
                    return Err(PercError::InvalidParameters(
                        "one-arm table needs scales >= 1 and positive values".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Model value at radius n (n < 1 is clamped to 1).
    pub fn value(&self, n: i64) -> f64 {
        let n = n.max(1) as f64;
        match self {
            PiModel::Power { amplitude, exponent } => amplitude * n.powf(-exponent),
            PiModel::Table(rows) => {
                // Log-log line through the bracketing entries, extended
                // beyond the ends from the nearest pair.
                let pair = match rows.iter().position(|r| r.0 as f64 >= n) {
                    Some(0) => {
                        if rows.len() == 1 || rows[0].0 as f64 == n {
                            return rows[0].1;
                        }
                        (rows[0], rows[1])
                    }
                    Some(k) => (rows[k - 1], rows[k]),
                    None if rows.len() == 1 => return rows[0].1,
                    None => (rows[rows.len() - 2], rows[rows.len() - 1]),
                };
                let ((n0, v0), (n1, v1)) = pair;
                let slope = (v1 / v0).ln() / (n1 as f64 / n0 as f64).ln();
                v0 * (n / n0 as f64).powf(slope)
            }
        }
    }
}

/// Empirical constants entering the feasibility inequalities, plus the
/// target interval factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    /// Factor of the frame-touch mean bound: E[touch of a cell frame]
    /// <= frame_mean * s * t * pi(t).
    pub frame_mean: f64,
    /// Factor of the margin-touch mean bound: E[touch of the margin]
    /// <= margin_mean * m^2 * s * t * pi(t).
    pub margin_mean: f64,
    /// Lower and upper factors of the circuit-interior cluster size:
    /// it lies in (cell_lower * s^2 pi(s), cell_upper * s^2 pi(s)).
    pub cell_lower: f64,
    pub cell_upper: f64,
    /// Target interval: the largest cluster should land in
    /// (a n^2 pi(n), b n^2 pi(n)).
    pub a: f64,
    pub b: f64,
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.frame_mean,
            self.margin_mean,
            self.cell_lower,
            self.cell_upper,
            self.a,
        ];
        if positive.iter().any(|c| !(*c > 0.0)) {
            return Err(PercError::InvalidParameters(
                "all feasibility constants must be positive".into(),
            ));
        }
        if !(self.b > self.a) {
            return Err(PercError::InvalidParameters(format!(
                "interval factors need a < b, got a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// First feasibility condition violated at a given scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeasibilityFailure {
    /// eps * s rounds down to zero: no ring fits.
    DegenerateWidth,
    /// n - m*s > t: the window sticks out farther than one ring width.
    Remainder,
    /// m^2 cells below the lower interval endpoint:
    /// cell_lower * s^2 pi(s) * m^2 < a n^2 pi(n).
    CellFloor,
    /// One cell exceeds a third of the interval width:
    /// cell_upper * s^2 pi(s) > (b-a)/3 n^2 pi(n).
    CellCeiling,
    /// Ring and margin overhead exceeds a third of the interval width.
    MarginOverhead,
}

impl std::fmt::Display for FeasibilityFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FeasibilityFailure::DegenerateWidth => "ring width rounds to zero",
            FeasibilityFailure::Remainder => "window remainder exceeds the ring width",
            FeasibilityFailure::CellFloor => "cells cannot reach the lower interval endpoint",
            FeasibilityFailure::CellCeiling => "one cell overshoots a third of the interval",
            FeasibilityFailure::MarginOverhead => "ring and margin mass overshoots a third",
        };
        f.write_str(s)
    }
}

/// A feasible rescaling: cells of radius floor(n / inv_x) with rings of
/// width floor(epsilon * radius), valid from scale threshold_n on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterChoice {
    /// 1/x: the odd number of cells per axis.
    pub inv_x: i64,
    pub epsilon: f64,
    pub threshold_n: i64,
}

impl ParameterChoice {
    /// The partition this choice prescribes at scale n.
    pub fn partition_spec(&self, n: i64) -> Result<PartitionSpec> {
        let s = n / self.inv_x;
        let t = (self.epsilon * s as f64).floor() as i64;
        PartitionSpec::new(self.inv_x, s, t)
    }
}

/// The first violated feasibility condition for cells-per-axis `inv_x`
/// and ring fraction `epsilon` at scale n, or None when all hold.
pub fn first_violation(
    inv_x: i64,
    epsilon: f64,
    constants: &ConstantsConfig,
    pi: &PiModel,
    n: i64,
) -> Option<FeasibilityFailure> {
    let m = inv_x;
    let s = n / inv_x;
    let t = (epsilon * s as f64).floor() as i64;
    if t < 1 {
        return Some(FeasibilityFailure::DegenerateWidth);
    }
    if n - m * s > t {
        return Some(FeasibilityFailure::Remainder);
    }
    let target = (n * n) as f64 * pi.value(n);
    let cell = (s * s) as f64 * pi.value(s);
    let third = (constants.b - constants.a) / 3.0 * target;
    if constants.cell_lower * cell * ((m * m) as f64) < constants.a * target {
        return Some(FeasibilityFailure::CellFloor);
    }
    if constants.cell_upper * cell > third {
        return Some(FeasibilityFailure::CellCeiling);
    }
    let overhead_factor = (4.0 * constants.frame_mean).max(constants.margin_mean);
    if overhead_factor * (m * m) as f64 * (s * t) as f64 * pi.value(t) > third {
        return Some(FeasibilityFailure::MarginOverhead);
    }
    None
}

/// Grid-search for a feasible (1/x, epsilon, N): odd 1/x in 3..=31,
/// epsilon in {2^-4, ..., 2^-12}, N the smallest scale in `n_range` from
/// which every scale in the range passes [`first_violation`]. Returns the
/// first hit in grid order (small 1/x and large epsilon preferred); when
/// nothing fits, the error names the binding violation of the first
/// candidate.
pub fn choose_parameters(
    constants: &ConstantsConfig,
    pi: &PiModel,
    n_range: RangeInclusive<i64>,
) -> Result<ParameterChoice> {
    constants.validate()?;
    pi.validate()?;
    let (start, end) = (*n_range.start(), *n_range.end());
    if start < 1 || start > end {
        return Err(PercError::InvalidParameters(format!(
            "scale range {start}..={end} must be nonempty and positive"
        )));
    }
    let mut first_report: Option<(i64, f64, i64, FeasibilityFailure)> = None;
    for inv_x in (3..=31).step_by(2) {
        for k in 4..=12 {
            let epsilon = 2f64.powi(-k);
            let binding = (start..=end)
                .rev()
                .find_map(|n| first_violation(inv_x, epsilon, constants, pi, n).map(|f| (n, f)));
            // The largest violating scale bounds the threshold: every
            // scale above it passes.
            match binding {
                None => {
                    return Ok(ParameterChoice {
                        inv_x,
                        epsilon,
                        threshold_n: start,
                    })
                }
                Some((n, _)) if n < end => {
                    return Ok(ParameterChoice {
                        inv_x,
                        epsilon,
                        threshold_n: n + 1,
                    })
                }
                Some((n, failure)) => {
                    if first_report.is_none() {
                        first_report = Some((inv_x, epsilon, n, failure));
                    }
                }
            }
        }
    }
    let (inv_x, epsilon, n, failure) =
        first_report.expect("grid is nonempty, so some candidate was examined");
    Err(PercError::Infeasible(format!(
        "no feasible rescaling in the search grid (odd 1/x in 3..=31, epsilon down to 2^-12) \
         for scales {start}..={end}; first candidate 1/x={inv_x}, epsilon={epsilon} fails at \
         n={n}: {failure}"
    )))
}
