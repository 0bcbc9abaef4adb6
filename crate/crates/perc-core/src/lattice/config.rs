//! Bond configurations on a finite window and counter-based sampling.

use serde::{Deserialize, Serialize};

use super::region::Bounds;
use super::{EdgeId, Orientation, Region, SiteCoord};
use crate::{PercError, Result};

/// Read access to edge states. Algorithms in `cluster` and `topology` are
/// generic over this trait so the same code runs on a raw sampled window
/// and on completions that treat unkept edges as open.
pub trait EdgeStates {
    fn is_open(&self, e: EdgeId) -> bool;
}

/// Seed and replica index identifying one sampled configuration.
///
/// Identical `(seed, stream)` always reproduces the same configuration on
/// the same window; distinct streams give independent replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }
}

/// splitmix64 finalizer, used as a 64-bit mixing function.
fn mix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform 64-bit noise for one edge draw, a pure function of
/// `(seed, stream, counter)`. The counter is the edge's index in the
/// canonical order of `E(window)`, so sampling is independent of how
/// replicas are chunked across threads.
pub fn edge_noise(seed: u64, stream: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(mix64(stream.wrapping_add(mix64(counter)))))
}

/// Decide one edge from its noise word: open iff a 53-bit uniform in
/// `[0, 1)` falls below `p`. Exact at `p = 0`, `1/2`, and `1`.
pub fn edge_is_open(seed: u64, stream: u64, counter: u64, p: f64) -> bool {
    let u = (edge_noise(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p
}

/// States of all edges of `E(window)`, stored densely over the window's
/// bounding rectangle.
///
/// Out-of-window edges have no state; `is_open` reports them closed and
/// `set_edge` rejects them. Completions that treat them as open instead are
/// built with [`Configuration::open_completion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    window: Region,
    bounds: Bounds,
    // Per edge slot (two slots per bounding-rectangle site): whether the
    // edge belongs to E(window), and its state. Slots outside the window
    // are always false, which keeps derived equality meaningful.
    in_window: Vec<bool>,
    open: Vec<bool>,
}

impl Configuration {
    /// All-closed configuration on a nonempty window.
    pub fn new(window: Region) -> Result<Configuration> {
        let bounds = window
            .bounds()
            .ok_or_else(|| PercError::InvalidRegion("empty window".into()))?;
        let slots = 2 * (bounds.width() as usize) * (bounds.height() as usize);
        let mut config = Configuration {
            window,
            bounds,
            in_window: vec![false; slots],
            open: vec![false; slots],
        };
        for e in config.window.edges() {
            let slot = config.edge_slot(e).expect("window edge inside bounds");
            config.in_window[slot] = true;
        }
        Ok(config)
    }

    pub fn window(&self) -> &Region {
        &self.window
    }

    fn edge_slot(&self, e: EdgeId) -> Option<usize> {
        if !self.bounds.contains(e.site) {
            return None;
        }
        let w = self.bounds.width() as usize;
        let row = (e.site.y - self.bounds.y0) as usize;
        let col = (e.site.x - self.bounds.x0) as usize;
        let orient = match e.orientation {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
        };
        Some(2 * (row * w + col) + orient)
    }

    /// Whether `e` carries a state, i.e. belongs to `E(window)`.
    pub fn has_edge(&self, e: EdgeId) -> bool {
        self.edge_slot(e).is_some_and(|s| self.in_window[s])
    }

    pub fn set_edge(&mut self, e: EdgeId, open: bool) -> Result<()> {
        match self.edge_slot(e) {
            Some(slot) if self.in_window[slot] => {
                self.open[slot] = open;
                Ok(())
            }
            _ => Err(PercError::RegionOutsideWindow(format!(
                "edge at ({}, {}) not in E(window)",
                e.site.x, e.site.y
            ))),
        }
    }

    /// Set every edge of `E(window)` to the given state.
    pub fn set_all(&mut self, open: bool) {
        for (slot, &inside) in self.in_window.iter().enumerate() {
            if inside {
                self.open[slot] = open;
            }
        }
    }

    /// Number of open edges in `E(window)`.
    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Keep the states of `E(inner)` and force every other window edge to
    /// `state`. Errors when `inner` is not contained in the window.
    pub fn complete_outside(&self, inner: &Region, state: bool) -> Result<Configuration> {
        if inner.sites().iter().any(|s| !self.window.contains(*s)) {
            return Err(PercError::RegionOutsideWindow(
                "completion inner region escapes the window".into(),
            ));
        }
        let mut out = self.clone();
        for e in self.window.edges() {
            if !inner.contains_edge(e) {
                out.set_edge(e, state)?;
            }
        }
        Ok(out)
    }

    /// Zero-copy view in which edges of `E(keep)` keep their sampled state
    /// and every other edge of the plane is open. This realizes event
    /// evaluation "restricted to `E(keep)`" with the all-open extension.
    pub fn open_completion<'a>(&'a self, keep: &'a Region) -> OpenCompletion<'a> {
        OpenCompletion { base: self, keep }
    }

    /// Test snapshot: one line per edge of `E(window)`, `x y o|v state`
    /// with the canonical endpoint, `o` for horizontal and `v` for
    /// vertical, and state 0/1, sorted by `(y, x, orientation)`.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for e in self.window.edges() {
            let letter = match e.orientation {
                Orientation::Horizontal => 'o',
                Orientation::Vertical => 'v',
            };
            let state = u8::from(self.is_open(e));
            out.push_str(&format!("{} {} {} {}\n", e.site.x, e.site.y, letter, state));
        }
        out
    }

    /// Parse a snapshot produced by [`Configuration::to_snapshot`]. The
    /// line set must cover `E(window)` exactly once.
    pub fn from_snapshot(window: Region, text: &str) -> Result<Configuration> {
        let mut config = Configuration::new(window)?;
        let mut seen = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<i64> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| PercError::Malformed(format!("snapshot line {}", idx + 1)))
            };
            let x = parse(parts.next())?;
            let y = parse(parts.next())?;
            let orientation = match parts.next() {
                Some("o") => Orientation::Horizontal,
                Some("v") => Orientation::Vertical,
                _ => return Err(PercError::Malformed(format!("snapshot line {}", idx + 1))),
            };
            let state = match parts.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(PercError::Malformed(format!("snapshot line {}", idx + 1))),
            };
            if parts.next().is_some() {
                return Err(PercError::Malformed(format!("snapshot line {}", idx + 1)));
            }
            let e = EdgeId {
                site: SiteCoord::new(x, y),
                orientation,
            };
            config.set_edge(e, state)?;
            seen.push(e);
        }
        seen.sort();
        let expected = config.window.edges();
        if seen != expected {
            return Err(PercError::Malformed(format!(
                "snapshot lists {} edges, E(window) has {}",
                seen.len(),
                expected.len()
            )));
        }
        Ok(config)
    }
}

impl EdgeStates for Configuration {
    fn is_open(&self, e: EdgeId) -> bool {
        self.edge_slot(e)
            .is_some_and(|s| self.in_window[s] && self.open[s])
    }
}

/// View created by [`Configuration::open_completion`]: real states inside
/// `E(keep)`, open everywhere else (including outside the window).
pub struct OpenCompletion<'a> {
    base: &'a Configuration,
    keep: &'a Region,
}

impl EdgeStates for OpenCompletion<'_> {
    fn is_open(&self, e: EdgeId) -> bool {
        if self.keep.contains_edge(e) {
            self.base.is_open(e)
        } else {
            true
        }
    }
}

/// Test helper view: every edge of the plane open.
pub struct TotalView {
    pub open: bool,
}

impl EdgeStates for TotalView {
    fn is_open(&self, _e: EdgeId) -> bool {
        self.open
    }
}

/// Reusable sampler for a fixed `(window, p, seed)`. The canonical edge
/// list is resolved to slots once; each replica then costs one mixing pass
/// over the edges with no allocation.
#[derive(Debug, Clone)]
pub struct Sampler {
    window: Region,
    p: f64,
    seed: u64,
    blank: Configuration,
    edge_slots: Vec<u32>,
    /// Inverse map slot -> counter + 1 (0 marks a slot with no window
    /// edge), so single edges can be resolved without a full fill.
    slot_counters: Vec<u32>,
}

impl Sampler {
    pub fn new(window: Region, p: f64, seed: u64) -> Result<Sampler> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PercError::InvalidParameters(format!(
                "edge probability {p} outside [0, 1]"
            )));
        }
        let blank = Configuration::new(window.clone())?;
        let edge_slots: Vec<u32> = window
            .edges()
            .into_iter()
            .map(|e| blank.edge_slot(e).expect("window edge inside bounds") as u32)
            .collect();
        let mut slot_counters = vec![0u32; blank.open.len()];
        for (counter, &slot) in edge_slots.iter().enumerate() {
            slot_counters[slot as usize] = counter as u32 + 1;
        }
        Ok(Sampler {
            window,
            p,
            seed,
            blank,
            edge_slots,
            slot_counters,
        })
    }

    pub fn window(&self) -> &Region {
        &self.window
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edge_count(&self) -> usize {
        self.edge_slots.len()
    }

    /// Fresh all-closed configuration on the sampler's window, suitable as
    /// a reusable `fill` target.
    pub fn blank(&self) -> Configuration {
        self.blank.clone()
    }

    /// Overwrite `config` (which must come from `blank`/`sample` of this
    /// sampler) with replica `stream`.
    pub fn fill(&self, config: &mut Configuration, stream: u64) {
        debug_assert_eq!(config.bounds, self.blank.bounds);
        debug_assert_eq!(config.open.len(), self.blank.open.len());
        for (counter, &slot) in self.edge_slots.iter().enumerate() {
            config.open[slot as usize] = edge_is_open(self.seed, stream, counter as u64, self.p);
        }
    }

    pub fn sample(&self, stream: u64) -> Configuration {
        let mut config = self.blank();
        self.fill(&mut config, stream);
        config
    }

    /// Replica `stream` as an on-demand edge view: each query mixes the
    /// edge's counter directly, so graph searches that touch few edges
    /// skip the full fill. Agrees bit for bit with `sample(stream)`.
    pub fn lazy(&self, stream: u64) -> LazyReplica<'_> {
        LazyReplica {
            sampler: self,
            stream,
        }
    }
}

/// See [`Sampler::lazy`]. Out-of-window edges read as closed, matching
/// [`Configuration`] semantics.
#[derive(Clone, Copy)]
pub struct LazyReplica<'a> {
    sampler: &'a Sampler,
    stream: u64,
}

impl EdgeStates for LazyReplica<'_> {
    fn is_open(&self, e: EdgeId) -> bool {
        let Some(slot) = self.sampler.blank.edge_slot(e) else {
            return false;
        };
        let c = self.sampler.slot_counters[slot];
        c != 0
            && edge_is_open(
                self.sampler.seed,
                self.stream,
                (c - 1) as u64,
                self.sampler.p,
            )
    }
}

/// One-off sampling without keeping a `Sampler` around.
pub fn sample_configuration(window: &Region, p: f64, rng: RngSpec) -> Result<Configuration> {
    Ok(Sampler::new(window.clone(), p, rng.seed)?.sample(rng.stream))
}
