//! Single-sweep curve estimator: insert the window's edges one at a time
//! in random order, record the edge count at which a monotone connection
//! event first holds, and reweight binomially to any p. One pass per
//! replica yields the whole curve p -> estimate.
//!
//! The insertion order sorts edges by the same per-edge noise that drives
//! direct sampling, so the two formulations are coupled exactly: the
//! direct event at parameter p holds if and only if the number of open
//! edges reaches the recorded threshold. Tests pin that equivalence.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::cluster::Dsu;
use crate::error::PercError;
use crate::estimate::{require_budget, Estimate};
use crate::exec::stream_collect;
use crate::lattice::{edge_noise, Region, RngSpec, SiteCoord};
use crate::Result;

/// Monotone connection event tracked during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SweepEvent {
    /// Origin connected to the boundary of the box of radius n.
    OneArm { n: i64 },
    /// Left-right crossing of [0,k] x [0,l], standard variant (any open
    /// path between the vertical sides).
    Crossing { k: i64, l: i64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepReport {
    pub event: SweepEvent,
    pub edges_total: u64,
    /// Edge count at which the event first holds, over sweeps.
    pub threshold: Estimate,
    /// (p, reweighted event estimate) for each requested parameter.
    pub curve: Vec<(f64, Estimate)>,
}

/// Window, endpoint slots, and terminal sets of a sweep, precomputed once.
struct SweepPlan {
    edges: Vec<(u32, u32)>,
    sources: Vec<u32>,
    targets: Vec<u32>,
    site_slots: usize,
    /// Event holds with zero edges (the terminals already intersect).
    trivial: bool,
}

impl SweepPlan {
    fn new(event: SweepEvent) -> Result<SweepPlan> {
        let (window, sources, targets) = match event {
            SweepEvent::OneArm { n } => {
                let window = Region::centered_box(n)?;
                (window.clone(), vec![SiteCoord::new(0, 0)], window.boundary_sites())
            }
            SweepEvent::Crossing { k, l } => {
                if k < 1 || l < 1 {
                    return Err(PercError::InvalidParameters(format!(
                        "crossing box needs k, l >= 1, got ({k}, {l})"
                    )));
                }
                let window = Region::rect(0, k, 0, l)?;
                let column = |x| (0..=l).map(|y| SiteCoord::new(x, y)).collect();
                (window, column(0), column(k))
            }
        };
        let b = window.bounds().expect("window is nonempty");
        let width = b.x1 - b.x0 + 1;
        let slot = |s: SiteCoord| ((s.y - b.y0) * width + (s.x - b.x0)) as u32;
        let edges = window
            .edges()
            .iter()
            .map(|e| {
                let (u, v) = e.endpoints();
                (slot(u), slot(v))
            })
            .collect();
        let sources: Vec<u32> = sources.into_iter().map(slot).collect();
        let targets: Vec<u32> = targets.into_iter().map(slot).collect();
        let trivial = sources.iter().any(|s| targets.contains(s));
        Ok(SweepPlan {
            edges,
            sources,
            targets,
            site_slots: window.site_count(),
            trivial,
        })
    }

    /// Number of edges inserted (in noise order) when the terminals first
    /// connect; edges + 1 if they never do.
    fn threshold(&self, seed: u64, stream: u64) -> u64 {
        if self.trivial {
            return 0;
        }
        let mut order: Vec<u32> = (0..self.edges.len() as u32).collect();
        order.sort_unstable_by_key(|&i| edge_noise(seed, stream, i as u64));
        let mut dsu = Dsu::new(self.site_slots + 2);
        let (a, b) = (self.site_slots as u32, self.site_slots as u32 + 1);
        for &s in &self.sources {
            dsu.union(a, s);
        }
        for &t in &self.targets {
            dsu.union(b, t);
        }
        for (inserted, &i) in order.iter().enumerate() {
            let (u, v) = self.edges[i as usize];
            dsu.union(u, v);
            if dsu.find(a) == dsu.find(b) {
                return inserted as u64 + 1;
            }
        }
        self.edges.len() as u64 + 1
    }
}

/// P(Bin(edges, p) >= threshold).
fn reweight(edges: u64, p: f64, threshold: u64) -> f64 {
    if threshold == 0 {
        return 1.0;
    }
    if threshold > edges || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    Binomial::new(p, edges).expect("p validated").sf(threshold - 1)
}

/// Estimate the event probability at every requested p from `budget`
/// sweeps. Per-sweep thresholds are integers collected in stream order,
/// so the report is identical under any thread count.
pub fn sweep_curve(
    event: SweepEvent,
    p_list: &[f64],
    budget: u64,
    rng: RngSpec,
) -> Result<SweepReport> {
    require_budget(budget)?;
    if let Some(&p) = p_list.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(PercError::InvalidParameters(format!(
            "sweep parameter {p} outside [0, 1]"
        )));
    }
    let plan = SweepPlan::new(event)?;
    let edges_total = plan.edges.len() as u64;
    let streams = rng.stream..rng.stream + budget;
    let thresholds: Vec<u64> =
        stream_collect(streams.clone(), |stream| plan.threshold(rng.seed, stream));

    let (mut sum, mut sum_sq) = (0u128, 0u128);
    for &t in &thresholds {
        sum += t as u128;
        sum_sq += (t as u128) * (t as u128);
    }
    let threshold = Estimate::from_int_sums(sum, sum_sq, budget, rng.seed, streams.clone());
    let curve = p_list
        .iter()
        .map(|&p| {
            let est = Estimate::from_values(
                thresholds.iter().map(|&t| reweight(edges_total, p, t)),
                rng.seed,
                streams.clone(),
            );
            (p, est)
        })
        .collect();
    Ok(SweepReport {
        event,
        edges_total,
        threshold,
        curve,
    })
}
