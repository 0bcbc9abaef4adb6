//! Indicators for the cluster-construction events: an open circuit in
//! every cell's middle ring, corridor links joining the circuits of
//! adjacent cells, the closed dual circuit blocking a cell core, and the
//! target-interval event on cluster sizes.
//!
//! The circuit-and-link event on a window W reads only E(W): every other
//! edge of the plane is taken open, the most permissive extension
//! ([`Configuration::open_completion`]). Circuits are always extracted
//! from that completed view, including the rings of cells outside W,
//! which come out as their fully open outer boundary. Conditions whose
//! edge sets lie entirely outside E(W) hold automatically under that
//! completion, so only the cells and corridors meeting the window are
//! evaluated. Link paths may use corridor boundary sites.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::cluster::{boundary_touch_count_in, label_clusters_in, ClusterLabeling};
use crate::estimate::{require_budget, Estimate};
use crate::exec::{mc_fold, stream_collect};
use crate::geometry::PartitionSpec;
use crate::lattice::{Configuration, EdgeStates, Region, RngSpec, Sampler, SiteCoord};
use crate::oracle::{enumerate_conditional_expectation, EnumerationTask, ExactValue};
use crate::topology::{innermost_closed_dual_circuit, outermost_open_circuit, Circuit};
use crate::{PercError, Result};

/// Fewest accepted replicas a conditional estimate may be built from;
/// below this the result is an insufficient-support error, never a value.
pub const MIN_CONDITIONAL_SAMPLES: u64 = 200;

/// One condition of the circuit-and-link event, in evaluation order:
/// every cell's middle ring must hold an open circuit, then every
/// corridor must join the circuits of its two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventCondition {
    /// The middle ring of cell (i, j) contains an open circuit.
    Circuit { i: i64, j: i64 },
    /// The corridor from cell (i, j) to (i+1, j) joins their circuits.
    HorizontalLink { i: i64, j: i64 },
    /// The corridor from cell (i, j) to (i, j+1) joins their circuits.
    VerticalLink { i: i64, j: i64 },
}

impl fmt::Display for EventCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EventCondition::Circuit { i, j } => {
                write!(f, "open circuit in the middle ring of cell ({i}, {j})")
            }
            EventCondition::HorizontalLink { i, j } => {
                write!(f, "corridor link from cell ({i}, {j}) to ({}, {j})", i + 1)
            }
            EventCondition::VerticalLink { i, j } => {
                write!(f, "corridor link from cell ({i}, {j}) to ({i}, {})", j + 1)
            }
        }
    }
}

/// A satisfied circuit condition: the outermost open circuit found, as
/// its canonical cyclic site sequence.
#[derive(Debug, Clone, Serialize)]
pub struct CircuitWitness {
    pub i: i64,
    pub j: i64,
    pub sites: Vec<SiteCoord>,
}

/// A satisfied link condition: one site from each of the two circuits,
/// joined by an open path inside the corridor.
#[derive(Debug, Clone, Serialize)]
pub struct LinkWitness {
    pub condition: EventCondition,
    pub from: SiteCoord,
    pub to: SiteCoord,
}

/// Outcome of one event evaluation. `holds` is true exactly when
/// `failure` is empty; the witness lists cover the conditions satisfied
/// before the verdict was reached.
#[derive(Debug, Clone, Serialize)]
pub struct EventReport {
    pub holds: bool,
    pub circuits: Vec<CircuitWitness>,
    pub links: Vec<LinkWitness>,
    /// First unsatisfied condition; evaluation stops there.
    pub failure: Option<EventCondition>,
}

impl EventReport {
    /// Drop the witness payloads, keeping only the verdict.
    pub fn without_witnesses(self) -> EventReport {
        EventReport {
            circuits: Vec::new(),
            links: Vec::new(),
            ..self
        }
    }
}

/// Which window the event is read on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    /// The tiled core box of radius m*s.
    Core,
    /// One cell box.
    Cell { i: i64, j: i64 },
}

fn identify_window(spec: &PartitionSpec, w: &Region) -> Result<Scope> {
    let shape_err = || {
        PercError::InvalidParameters(
            "the event window must be the tiled core box or one cell box".into(),
        )
    };
    let b = w.as_rect().ok_or_else(shape_err)?;
    if b.x1 - b.x0 != b.y1 - b.y0 || (b.x0 + b.x1) % 2 != 0 || (b.y0 + b.y1) % 2 != 0 {
        return Err(shape_err());
    }
    let (cx, cy) = ((b.x0 + b.x1) / 2, (b.y0 + b.y1) / 2);
    let half = (b.x1 - b.x0) / 2;
    if (cx, cy) == (0, 0) && half == spec.core_radius() {
        return Ok(Scope::Core);
    }
    let d = 2 * spec.s;
    if half == spec.s && cx % d == 0 && cy % d == 0 {
        return Ok(Scope::Cell { i: cx / d, j: cy / d });
    }
    Err(shape_err())
}

fn require_sampled(region: &Region, window: &Region, what: &str) -> Result<()> {
    let inside = match (region.as_rect(), window.as_rect()) {
        (Some(r), Some(w)) => w.x0 <= r.x0 && r.x1 <= w.x1 && w.y0 <= r.y0 && r.y1 <= w.y1,
        _ => region.sites().iter().all(|&v| window.contains(v)),
    };
    if inside {
        Ok(())
    } else {
        Err(PercError::RegionOutsideWindow(format!(
            "{what} escapes the sampled window"
        )))
    }
}

/// Evaluate the circuit-and-link event on the window `w`, which must be
/// the tiled core box or one cell box, sampled in full by `config`.
pub fn event_o(config: &Configuration, spec: &PartitionSpec, w: &Region) -> Result<EventReport> {
    let scope = identify_window(spec, w)?;
    require_sampled(w, config.window(), "event window")?;
    let view = config.open_completion(w);
    evaluate_event(&view, spec, scope)
}

fn evaluate_event<E: EdgeStates>(
    states: &E,
    spec: &PartitionSpec,
    scope: Scope,
) -> Result<EventReport> {
    let h = (spec.m - 1) / 2;
    // Conditions whose edge sets meet E(w): for the core, every grid cell
    // plus the corridors straddling the core boundary; for one cell, its
    // own ring and the four corridors around it.
    let (cells, h_links, v_links) = match scope {
        Scope::Core => {
            let mut cells = Vec::new();
            let mut hl = Vec::new();
            let mut vl = Vec::new();
            for j in -h..=h {
                for i in -h..=h {
                    cells.push((i, j));
                }
            }
            for j in -h..=h {
                for i in -h - 1..=h {
                    hl.push((i, j));
                }
            }
            for j in -h - 1..=h {
                for i in -h..=h {
                    vl.push((i, j));
                }
            }
            (cells, hl, vl)
        }
        Scope::Cell { i, j } => (
            vec![(i, j)],
            vec![(i - 1, j), (i, j)],
            vec![(i, j - 1), (i, j)],
        ),
    };

    let mut report = EventReport {
        holds: false,
        circuits: Vec::new(),
        links: Vec::new(),
        failure: None,
    };
    let mut found: HashMap<(i64, i64), Circuit> = HashMap::new();

    for &(i, j) in &cells {
        match outermost_open_circuit(states, &spec.middle_ring(i, j))? {
            Some(c) => {
                report.circuits.push(CircuitWitness {
                    i,
                    j,
                    sites: c.sites().to_vec(),
                });
                found.insert((i, j), c);
            }
            None => {
                report.failure = Some(EventCondition::Circuit { i, j });
                return Ok(report);
            }
        }
    }

    for &(i, j) in &h_links {
        let condition = EventCondition::HorizontalLink { i, j };
        let corridor = spec.h_corridor(i, j);
        match link_witness(states, spec, &mut found, (i, j), (i + 1, j), &corridor)? {
            Some((from, to)) => report.links.push(LinkWitness { condition, from, to }),
            None => {
                report.failure = Some(condition);
                return Ok(report);
            }
        }
    }
    for &(i, j) in &v_links {
        let condition = EventCondition::VerticalLink { i, j };
        let corridor = spec.v_corridor(i, j);
        match link_witness(states, spec, &mut found, (i, j), (i, j + 1), &corridor)? {
            Some((from, to)) => report.links.push(LinkWitness { condition, from, to }),
            None => {
                report.failure = Some(condition);
                return Ok(report);
            }
        }
    }
    report.holds = true;
    Ok(report)
}

/// Circuit of a cell, extracted and cached on first use. Cells outside
/// the checked set resolve on the completed view, where their ring is
/// fully open and the extraction cannot fail.
fn fetch_circuit<E: EdgeStates>(
    states: &E,
    spec: &PartitionSpec,
    found: &mut HashMap<(i64, i64), Circuit>,
    key: (i64, i64),
) -> Result<()> {
    if !found.contains_key(&key) {
        let c = outermost_open_circuit(states, &spec.middle_ring(key.0, key.1))?
            .expect("a fully open ring always carries a circuit");
        found.insert(key, c);
    }
    Ok(())
}

fn link_witness<E: EdgeStates>(
    states: &E,
    spec: &PartitionSpec,
    found: &mut HashMap<(i64, i64), Circuit>,
    a: (i64, i64),
    b: (i64, i64),
    corridor: &Region,
) -> Result<Option<(SiteCoord, SiteCoord)>> {
    fetch_circuit(states, spec, found, a)?;
    fetch_circuit(states, spec, found, b)?;
    let labeling = label_clusters_in(states, corridor);
    // Every hole-surrounding circuit crosses the corridor's long axis
    // inside it, so neither contact list is empty.
    let contacts = |key: &(i64, i64)| -> Vec<SiteCoord> {
        found[key]
            .sites()
            .iter()
            .copied()
            .filter(|&v| corridor.contains(v))
            .collect()
    };
    let mut roots: HashMap<usize, SiteCoord> = HashMap::new();
    for v in contacts(&a) {
        let r = labeling.root_of(v).expect("contact sites lie in the corridor");
        roots.entry(r).or_insert(v);
    }
    for v in contacts(&b) {
        let r = labeling.root_of(v).expect("contact sites lie in the corridor");
        if let Some(&u) = roots.get(&r) {
            return Ok(Some((u, v)));
        }
    }
    Ok(None)
}

/// True when a closed dual circuit in the inner ring of cell (i, j)
/// seals the cell core off; read on the raw configuration.
pub fn event_g(config: &Configuration, spec: &PartitionSpec, i: i64, j: i64) -> Result<bool> {
    // The extractor walks the ring and its hole, so the whole inner box
    // must be sampled.
    let c = spec.center(i, j);
    let scan = Region::Box { n: spec.s - 2 * spec.t }.translate(c.x, c.y);
    require_sampled(&scan, config.window(), "inner ring of the cell")?;
    Ok(innermost_closed_dual_circuit(config, &spec.inner_ring(i, j))?.is_some())
}

/// True when some cluster size falls strictly inside the target interval
/// (a n^2 piHat, b n^2 piHat).
pub fn event_d(labeling: &ClusterLabeling, n: i64, a: f64, b: f64, pi_hat: f64) -> bool {
    assert!(pi_hat > 0.0, "the one-arm estimate must be positive");
    let scale = (n * n) as f64 * pi_hat;
    let (lo, hi) = (a * scale, b * scale);
    labeling.cluster_sizes().into_iter().any(|s| {
        let s = s as f64;
        s > lo && s < hi
    })
}

/// Whether one open cluster of the core box contains every cell's
/// outermost circuit and touches all four core sides. When the
/// circuit-and-link event holds on the core this is automatic: interior
/// corridors join the circuits into one cluster and boundary corridors
/// force it out to the core boundary.
pub fn crossing_cluster_check(
    config: &Configuration,
    spec: &PartitionSpec,
    n: i64,
) -> Result<bool> {
    let ms = spec.core_radius();
    if ms > n {
        return Err(PercError::InvalidParameters(format!(
            "partition of radius {ms} does not fit in the box of radius {n}"
        )));
    }
    let core = Region::Box { n: ms };
    require_sampled(&core, config.window(), "core box")?;
    let labeling = label_clusters_in(config, &core);
    let h = (spec.m - 1) / 2;
    let mut shared: Option<usize> = None;
    for j in -h..=h {
        for i in -h..=h {
            let Some(c) = outermost_open_circuit(config, &spec.middle_ring(i, j))? else {
                return Ok(false);
            };
            // A circuit is a cycle of open edges, so one site fixes its
            // cluster.
            let r = labeling
                .root_of(c.sites()[0])
                .expect("circuits lie in the core");
            if *shared.get_or_insert(r) != r {
                return Ok(false);
            }
        }
    }
    let root = shared.expect("the grid has at least one cell");
    fn touches(
        labeling: &ClusterLabeling,
        root: usize,
        mut side: impl Iterator<Item = SiteCoord>,
    ) -> bool {
        side.any(|v| labeling.root_of(v).expect("side sites lie in the core") == root)
    }
    Ok(touches(&labeling, root, (-ms..=ms).map(|y| SiteCoord::new(-ms, y)))
        && touches(&labeling, root, (-ms..=ms).map(|y| SiteCoord::new(ms, y)))
        && touches(&labeling, root, (-ms..=ms).map(|x| SiteCoord::new(x, -ms)))
        && touches(&labeling, root, (-ms..=ms).map(|x| SiteCoord::new(x, ms))))
}

/// Monte Carlo probability of the circuit-and-link event on `w` (the
/// core box or one cell box), sampled on `w` itself; the event reads
/// only E(w), so a larger window would not change the law.
pub fn estimate_event_o(
    spec: &PartitionSpec,
    w: &Region,
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Estimate> {
    identify_window(spec, w)?;
    require_budget(budget)?;
    let sampler = Sampler::new(w.clone(), p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let successes = mc_fold(
        &sampler,
        streams.clone(),
        || 0u64,
        |acc, _, config| {
            let report = event_o(config, spec, w).expect("window matches the sampler");
            *acc += u64::from(report.holds);
        },
        |a, b| a + b,
    );
    Ok(Estimate::indicator(successes, budget, rng.seed, streams))
}

/// Monte Carlo probability of the blocking event for cell (i, j),
/// sampled on the cell's inner box.
pub fn estimate_event_g(
    spec: &PartitionSpec,
    i: i64,
    j: i64,
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Estimate> {
    require_budget(budget)?;
    let c = spec.center(i, j);
    let window = Region::Box { n: spec.s - 2 * spec.t }.translate(c.x, c.y);
    let ring = spec.inner_ring(i, j);
    let sampler = Sampler::new(window, p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let successes = mc_fold(
        &sampler,
        streams.clone(),
        || 0u64,
        |acc, _, config| {
            let blocked = innermost_closed_dual_circuit(config, &ring)
                .expect("the inner ring is an annulus")
                .is_some();
            *acc += u64::from(blocked);
        },
        |a, b| a + b,
    );
    Ok(Estimate::indicator(successes, budget, rng.seed, streams))
}

/// Conditional mean of the frame boundary-touch count of cell (i, j),
/// given that the cell event holds with the prescribed circuit: plain
/// rejection sampling over `budget` replicas. The sampler must cover the
/// cell box.
pub fn niceness_expectation(
    gamma: &Circuit,
    spec: &PartitionSpec,
    i: i64,
    j: i64,
    sampler: &Sampler,
    budget: u64,
    stream: u64,
) -> Result<Estimate> {
    require_budget(budget)?;
    let cell = spec.cell_box(i, j);
    require_sampled(&cell, sampler.window(), "cell box")?;
    let frame = spec.frame(i, j);
    let want = gamma.sites();
    let streams = stream..stream + budget;
    // Ordered per-stream results keep the sums independent of the thread
    // count.
    let hits = stream_collect(streams.clone(), |st| {
        let config = sampler.sample(st);
        let report = event_o(&config, spec, &cell).expect("cell window is valid");
        let matched = report.holds
            && report
                .circuits
                .iter()
                .any(|cw| (cw.i, cw.j) == (i, j) && cw.sites == want);
        matched.then(|| boundary_touch_count_in(&config, &frame) as f64)
    });
    let accepted: Vec<f64> = hits.into_iter().flatten().collect();
    if (accepted.len() as u64) < MIN_CONDITIONAL_SAMPLES {
        return Err(PercError::InsufficientSupport {
            accepted: accepted.len() as u64,
            required: MIN_CONDITIONAL_SAMPLES,
        });
    }
    Ok(Estimate::from_values(accepted, sampler.seed(), streams))
}

/// One distinct circuit observed in a conditional sample.
#[derive(Debug, Clone, Serialize)]
pub struct NicenessGroup {
    pub sites: Vec<SiteCoord>,
    pub count: u64,
    pub mean: f64,
}

/// Conditional sample of the frame boundary-touch count given the cell
/// event, grouped by the circuit that realized the event.
#[derive(Debug, Clone, Serialize)]
pub struct NicenessProfile {
    pub overall: Estimate,
    pub groups: Vec<NicenessGroup>,
    /// Weighted fraction of accepted replicas whose group mean is at most
    /// twice the overall mean; by Markov's inequality at least 1/2.
    pub nice_fraction: f64,
}

/// Sample the cell event and profile the conditional touch count by
/// circuit.
pub fn niceness_profile(
    spec: &PartitionSpec,
    i: i64,
    j: i64,
    sampler: &Sampler,
    budget: u64,
    stream: u64,
) -> Result<NicenessProfile> {
    require_budget(budget)?;
    let cell = spec.cell_box(i, j);
    require_sampled(&cell, sampler.window(), "cell box")?;
    let frame = spec.frame(i, j);
    let streams = stream..stream + budget;
    let hits = stream_collect(streams.clone(), |st| {
        let config = sampler.sample(st);
        let report = event_o(&config, spec, &cell).expect("cell window is valid");
        if !report.holds {
            return None;
        }
        let cw = report
            .circuits
            .iter()
            .find(|cw| (cw.i, cw.j) == (i, j))
            .expect("the cell condition was checked");
        Some((
            cw.sites.clone(),
            boundary_touch_count_in(&config, &frame) as f64,
        ))
    });
    let mut by_circuit: BTreeMap<Vec<(i64, i64)>, (u64, f64)> = BTreeMap::new();
    let mut values = Vec::new();
    for (sites, v) in hits.into_iter().flatten() {
        let key: Vec<(i64, i64)> = sites.iter().map(|s| (s.x, s.y)).collect();
        let slot = by_circuit.entry(key).or_insert((0, 0.0));
        slot.0 += 1;
        slot.1 += v;
        values.push(v);
    }
    let total = values.len() as u64;
    if total < MIN_CONDITIONAL_SAMPLES {
        return Err(PercError::InsufficientSupport {
            accepted: total,
            required: MIN_CONDITIONAL_SAMPLES,
        });
    }
    let overall = Estimate::from_values(values, sampler.seed(), streams);
    let cut = 2.0 * overall.mean();
    let mut nice = 0u64;
    let groups = by_circuit
        .into_iter()
        .map(|(key, (count, sum))| {
            let mean = sum / count as f64;
            if mean <= cut {
                nice += count;
            }
            NicenessGroup {
                sites: key.into_iter().map(|(x, y)| SiteCoord::new(x, y)).collect(),
                count,
                mean,
            }
        })
        .collect();
    Ok(NicenessProfile {
        overall,
        groups,
        nice_fraction: nice as f64 / total as f64,
    })
}

/// Exact conditional expectation by exhaustive sweep of the frame's edge
/// set, which carries both the conditioning event and the touch count.
/// Even the smallest admissible spec (s=3, t=1) has 80 frame edges, far
/// beyond the enumeration cap, so every call today reports the cap
/// excess; the function pins down what the exact value means.
pub fn niceness_expectation_exact(
    gamma: &Circuit,
    spec: &PartitionSpec,
    i: i64,
    j: i64,
    p: f64,
) -> Result<ExactValue> {
    let cell = spec.cell_box(i, j);
    let frame = spec.frame(i, j);
    // Only frame edges matter: the count reads connectivity inside the
    // frame, and the in-cell parts of the ring and corridor edge sets all
    // lie in the frame. The cell core is pinned open.
    let mut base = Configuration::new(cell.clone())?;
    base.set_all(true);
    let task = EnumerationTask::new(base, frame.edges(), p)?;
    let want = gamma.sites();
    enumerate_conditional_expectation(
        &task,
        |config| boundary_touch_count_in(config, &frame) as u64,
        |config| {
            let report = event_o(config, spec, &cell).expect("cell window is valid");
            report.holds
                && report
                    .circuits
                    .iter()
                    .any(|cw| (cw.i, cw.j) == (i, j) && cw.sites == want)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::label_clusters;
    use crate::lattice::{EdgeId, TotalView};
    use crate::oracle::enumerate_probability;

    fn site(x: i64, y: i64) -> SiteCoord {
        SiteCoord::new(x, y)
    }

    #[test]
    fn trivial_extremes_on_full_and_empty_configurations() {
        let spec = PartitionSpec::new(3, 3, 1).unwrap();
        let core = Region::Box { n: 9 };
        let mut config = Configuration::new(core.clone()).unwrap();
        config.set_all(true);

        let report = event_o(&config, &spec, &core).unwrap();
        assert!(report.holds && report.failure.is_none());
        assert_eq!(report.circuits.len(), 9);
        assert_eq!(report.links.len(), 24);
        // Fully open, each circuit is the middle ring's outer boundary.
        for cw in &report.circuits {
            let c = spec.center(cw.i, cw.j);
            assert_eq!(cw.sites.len() as i64, 8 * (spec.s - spec.t));
            assert!(cw
                .sites
                .iter()
                .all(|v| (v.x - c.x).abs().max((v.y - c.y).abs()) == spec.s - spec.t));
        }
        assert!(crossing_cluster_check(&config, &spec, 9).unwrap());
        assert!(!event_g(&config, &spec, 0, 0).unwrap());

        config.set_all(false);
        let report = event_o(&config, &spec, &core).unwrap();
        assert!(!report.holds);
        assert_eq!(report.failure, Some(EventCondition::Circuit { i: -1, j: -1 }));
        assert!(report.circuits.is_empty() && report.links.is_empty());
        assert!(!crossing_cluster_check(&config, &spec, 9).unwrap());
        assert!(event_g(&config, &spec, 0, 0).unwrap());
    }

    #[test]
    fn window_validation_rejects_foreign_regions() {
        let spec = PartitionSpec::new(3, 3, 1).unwrap();
        let config = Configuration::new(Region::Box { n: 9 }).unwrap();
        let odd = Region::Rect { x0: 0, x1: 4, y0: 0, y1: 2 };
        assert!(matches!(
            event_o(&config, &spec, &odd),
            Err(PercError::InvalidParameters(_))
        ));
        // Valid cell shape, but its box pokes out of the sampled window.
        let far = spec.cell_box(2, 0);
        assert!(matches!(
            event_o(&config, &spec, &far),
            Err(PercError::RegionOutsideWindow(_))
        ));
        assert!(matches!(
            event_g(&config, &spec, 5, 0),
            Err(PercError::RegionOutsideWindow(_))
        ));
        let small = Configuration::new(Region::Box { n: 5 }).unwrap();
        assert!(matches!(
            crossing_cluster_check(&small, &spec, 9),
            Err(PercError::RegionOutsideWindow(_))
        ));
        assert!(matches!(
            crossing_cluster_check(&config, &spec, 5),
            Err(PercError::InvalidParameters(_))
        ));
    }

    /// On the smallest cell (s=3, t=1) the event is a closed-form product:
    /// the width-1 middle ring admits exactly one circuit (all 16 ring
    /// edges open), and each of the four corridors then links exactly when
    /// one of its two in-window bridge edges toward the neighbour is open.
    /// All other window edges are irrelevant: inside a corridor the only
    /// way across the cell boundary column is a bridge edge, and beyond it
    /// the completion is open.
    fn ring_and_bridges(spec: &PartitionSpec) -> (Vec<EdgeId>, [[EdgeId; 2]; 4]) {
        assert_eq!((spec.s, spec.t), (3, 1));
        let ring = spec.middle_ring(0, 0).edges();
        assert_eq!(ring.len(), 16);
        let e = |a: (i64, i64), b: (i64, i64)| {
            EdgeId::between(site(a.0, a.1), site(b.0, b.1)).unwrap()
        };
        let pairs = [
            [e((2, 0), (3, 0)), e((2, 1), (3, 1))],
            [e((-3, 0), (-2, 0)), e((-3, 1), (-2, 1))],
            [e((0, 2), (0, 3)), e((1, 2), (1, 3))],
            [e((0, -3), (0, -2)), e((1, -3), (1, -2))],
        ];
        (ring, pairs)
    }

    #[test]
    fn tiny_cell_event_reduces_to_ring_and_bridges() {
        let spec = PartitionSpec::new(1, 3, 1).unwrap();
        let cell = spec.cell_box(0, 0);
        let (ring, pairs) = ring_and_bridges(&spec);
        let predicate = |config: &Configuration| {
            ring.iter().all(|&e| config.is_open(e))
                && pairs
                    .iter()
                    .all(|pair| pair.iter().any(|&e| config.is_open(e)))
        };

        // Exhaustive over the bridge edges with the ring open.
        let mut config = Configuration::new(cell.clone()).unwrap();
        for &e in &ring {
            config.set_edge(e, true).unwrap();
        }
        let flat: Vec<EdgeId> = pairs.iter().flatten().copied().collect();
        for mask in 0u32..256 {
            for (k, &e) in flat.iter().enumerate() {
                config.set_edge(e, mask & (1 << k) != 0).unwrap();
            }
            let report = event_o(&config, &spec, &cell).unwrap();
            assert_eq!(report.holds, predicate(&config), "bridge mask {mask}");
            if report.holds {
                assert_eq!(report.circuits.len(), 1);
                assert_eq!(report.links.len(), 4);
            }
        }

        // Random dense configurations exercise both verdicts, and every
        // witness must stand on its own.
        let sampler = Sampler::new(cell.clone(), 0.93, 20260815).unwrap();
        let mut positives = 0u32;
        for stream in 0..3000 {
            let config = sampler.sample(stream);
            let report = event_o(&config, &spec, &cell).unwrap();
            assert_eq!(report.holds, predicate(&config));
            if !report.holds {
                continue;
            }
            positives += 1;
            let view = config.open_completion(&cell);
            for cw in &report.circuits {
                let c = Circuit::from_cycle_sites(cw.sites.clone()).unwrap();
                assert!(c.is_fully_open(&view));
            }
            for lw in &report.links {
                let corridor = match lw.condition {
                    EventCondition::HorizontalLink { i, j } => spec.h_corridor(i, j),
                    EventCondition::VerticalLink { i, j } => spec.v_corridor(i, j),
                    EventCondition::Circuit { .. } => unreachable!("links carry link conditions"),
                };
                let labeling = label_clusters_in(&view, &corridor);
                assert_eq!(
                    labeling.root_of(lw.from).unwrap(),
                    labeling.root_of(lw.to).unwrap()
                );
            }
        }
        assert!(positives > 200, "want both verdicts exercised, got {positives}");
    }

    #[test]
    fn tiny_cell_event_probability_is_exact() {
        let spec = PartitionSpec::new(1, 3, 1).unwrap();
        let cell = spec.cell_box(0, 0);
        let (ring, pairs) = ring_and_bridges(&spec);

        // Conditioned on the ring, sweep the bridges exhaustively: each
        // corridor misses with probability 1/4, so the links factor is
        // (3/4)^4.
        let mut base = Configuration::new(cell.clone()).unwrap();
        for &e in &ring {
            base.set_edge(e, true).unwrap();
        }
        let flat: Vec<EdgeId> = pairs.iter().flatten().copied().collect();
        let task = EnumerationTask::new(base, flat, 0.5).unwrap();
        let links_given_ring =
            enumerate_probability(&task, |config| event_o(config, &spec, &cell).unwrap().holds);
        assert_eq!(links_given_ring, ExactValue::Rational { num: 81, den: 256 });

        // Unconditionally the ring contributes 2^-16, so the event has
        // probability 81/2^24; compare Monte Carlo at the exact standard
        // error.
        let exact = 81.0 / f64::powi(2.0, 24);
        let mc = estimate_event_o(&spec, &cell, 0.5, 40_000, RngSpec::new(7, 0)).unwrap();
        let se = (exact * (1.0 - exact) / 40_000f64).sqrt();
        assert!((mc.mean() - exact).abs() <= 4.0 * se);
    }

    #[test]
    fn blocking_event_is_the_four_spokes_on_the_smallest_ring() {
        let spec = PartitionSpec::new(1, 3, 1).unwrap();
        let window = Region::Box { n: 1 };
        let task = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        let exact =
            enumerate_probability(&task, |config| event_g(config, &spec, 0, 0).unwrap());
        assert_eq!(exact, ExactValue::Rational { num: 1, den: 16 });

        // The only blocking circuit closes the four edges at the origin.
        let mut config = Configuration::new(window).unwrap();
        config.set_all(true);
        let spokes: Vec<EdgeId> = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .map(|&(x, y)| EdgeId::between(site(0, 0), site(x, y)).unwrap())
            .collect();
        for &e in &spokes {
            config.set_edge(e, false).unwrap();
        }
        assert!(event_g(&config, &spec, 0, 0).unwrap());
        config.set_edge(spokes[2], true).unwrap();
        assert!(!event_g(&config, &spec, 0, 0).unwrap());

        let mc = estimate_event_g(&spec, 0, 0, 0.5, 20_000, RngSpec::new(11, 0)).unwrap();
        let se = (0.0625 * 0.9375 / 20_000f64).sqrt();
        assert!((mc.mean() - 0.0625).abs() <= 4.0 * se);
    }

    #[test]
    fn interval_event_matches_a_direct_scan() {
        let window = Region::Box { n: 2 };
        let sampler = Sampler::new(window.clone(), 0.5, 99).unwrap();
        for stream in 0..400 {
            let config = sampler.sample(stream);
            let labeling = label_clusters(&config, &window).unwrap();
            for (a, b) in [(0.25, 1.0), (0.5, 3.0), (1.0, 6.25)] {
                let direct = window.sites().iter().any(|&v| {
                    let size = labeling.cluster_size_at(v).unwrap() as f64;
                    size > a * 4.0 && size < b * 4.0
                });
                assert_eq!(event_d(&labeling, 2, a, b, 1.0), direct);
            }
        }
        let mut config = sampler.blank();
        config.set_all(true);
        let labeling = label_clusters(&config, &window).unwrap();
        // 25 sites in one cluster: inside (20, 28), not inside (28, 36).
        assert!(event_d(&labeling, 2, 5.0, 7.0, 1.0));
        assert!(!event_d(&labeling, 2, 7.0, 9.0, 1.0));
    }

    #[test]
    fn construction_implies_the_crossing_cluster() {
        let spec = PartitionSpec::new(3, 3, 1).unwrap();
        let core = Region::Box { n: 9 };
        let sampler = Sampler::new(Region::Box { n: 11 }, 0.98, 4242).unwrap();
        let mut positives = 0;
        for stream in 0..400 {
            let config = sampler.sample(stream);
            if event_o(&config, &spec, &core).unwrap().holds {
                positives += 1;
                assert!(crossing_cluster_check(&config, &spec, 11).unwrap());
            }
        }
        assert!(positives >= 5, "construction event held {positives} times");
    }

    #[test]
    fn core_event_is_rarer_than_the_cell_event() {
        let spec = PartitionSpec::new(3, 3, 1).unwrap();
        let p = 0.98;
        let core = estimate_event_o(&spec, &Region::Box { n: 9 }, p, 3000, RngSpec::new(5, 0))
            .unwrap();
        let cell =
            estimate_event_o(&spec, &spec.cell_box(0, 0), p, 3000, RngSpec::new(5, 3000)).unwrap();
        let se = (core.stderr().powi(2) + cell.stderr().powi(2)).sqrt();
        assert!(
            cell.mean() - core.mean() >= -4.0 * se,
            "core {} should not exceed cell {}",
            core.mean(),
            cell.mean()
        );
    }

    #[test]
    fn redrawing_inside_the_dual_circuit_preserves_the_event() {
        let spec = PartitionSpec::new(1, 6, 2).unwrap();
        let cell = spec.cell_box(0, 0);
        let sampler = Sampler::new(cell.clone(), 0.45, 2718).unwrap();
        let mut exercised = 0;
        for stream in 0..800 {
            let config = sampler.sample(stream);
            let Some(beta) =
                innermost_closed_dual_circuit(&config, &spec.inner_ring(0, 0)).unwrap()
            else {
                continue;
            };
            let inside = beta.interior().edges();
            if inside.is_empty() {
                continue;
            }
            exercised += 1;
            let before = event_o(&config, &spec, &cell).unwrap().holds;
            let redraws = [vec![true; inside.len()], vec![false; inside.len()], {
                (0..inside.len()).map(|k| k % 2 == 0).collect()
            }];
            for states in &redraws {
                let mut redrawn = config.clone();
                for (&e, &open) in inside.iter().zip(states) {
                    redrawn.set_edge(e, open).unwrap();
                }
                assert_eq!(event_o(&redrawn, &spec, &cell).unwrap().holds, before);
                assert!(event_g(&redrawn, &spec, 0, 0).unwrap());
            }
        }
        assert!(exercised >= 20, "dual circuits with interior edges: {exercised}");
    }

    #[test]
    fn full_lattice_niceness_is_the_frame_size() {
        let spec = PartitionSpec::new(1, 3, 1).unwrap();
        let sampler = Sampler::new(spec.cell_box(0, 0), 1.0, 1).unwrap();
        let gamma = outermost_open_circuit(&TotalView { open: true }, &spec.middle_ring(0, 0))
            .unwrap()
            .unwrap();
        let est = niceness_expectation(&gamma, &spec, 0, 0, &sampler, 256, 0).unwrap();
        assert_eq!(est.samples(), 256);
        assert_eq!(est.mean(), spec.frame(0, 0).site_count() as f64);
        assert_eq!(est.stderr(), 0.0);
    }

    #[test]
    fn starved_conditioning_is_an_error_not_a_value() {
        let spec = PartitionSpec::new(1, 3, 1).unwrap();
        let sampler = Sampler::new(spec.cell_box(0, 0), 0.5, 3).unwrap();
        let gamma = outermost_open_circuit(&TotalView { open: true }, &spec.middle_ring(0, 0))
            .unwrap()
            .unwrap();
        // The cell event needs all 16 ring edges at once: hopeless within
        // 400 replicas at p = 1/2.
        match niceness_expectation(&gamma, &spec, 0, 0, &sampler, 400, 0) {
            Err(PercError::InsufficientSupport { accepted, required }) => {
                assert!(accepted < required);
                assert_eq!(required, MIN_CONDITIONAL_SAMPLES);
            }
            other => panic!("expected insufficient support, got {other:?}"),
        }
        // The exact path would need all 80 frame edges free at once.
        match niceness_expectation_exact(&gamma, &spec, 0, 0, 0.5) {
            Err(PercError::EnumerationCapExceeded { edges, cap }) => {
                assert_eq!(edges, 80);
                assert!(cap < edges);
            }
            other => panic!("expected cap excess, got {other:?}"),
        }
    }

    #[test]
    fn circuit_profile_satisfies_the_markov_bound() {
        // The width-2 ring needs a fully open winding path, so the event
        // only has workable mass well above criticality.
        let spec = PartitionSpec::new(1, 6, 2).unwrap();
        let sampler = Sampler::new(spec.cell_box(0, 0), 0.9, 31).unwrap();
        let profile = niceness_profile(&spec, 0, 0, &sampler, 20_000, 0).unwrap();
        assert!(profile.overall.samples() >= MIN_CONDITIONAL_SAMPLES);
        assert!(profile.groups.len() >= 2, "want several circuit shapes");
        let total: u64 = profile.groups.iter().map(|g| g.count).sum();
        assert_eq!(total, profile.overall.samples());
        let weighted: f64 = profile
            .groups
            .iter()
            .map(|g| g.count as f64 * g.mean)
            .sum::<f64>()
            / total as f64;
        assert!((weighted - profile.overall.mean()).abs() < 1e-9);
        assert!(profile.nice_fraction >= 0.5);
    }
}
