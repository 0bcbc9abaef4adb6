//! Open-cluster labeling restricted to a region, and the cluster-size
//! observables built on top of it.
//!
//! The kernel is a union-find pass over the region's edge set: two sites
//! share a label iff an open path joins them without leaving the region.
//! Every observable here (largest cluster, boundary touch count, annulus
//! reach count, circuit cluster sizes) is a scan over one such labeling,
//! so a replica costs one labeling pass plus O(region) bookkeeping.
//!
//! Each observable comes in two flavours: a checked entry point taking a
//! [`Configuration`] (validates that the queried region sits inside the
//! configuration's window) and a `_in` variant generic over [`EdgeStates`]
//! for completed or synthetic edge views.

use crate::error::PercError;
use crate::lattice::{Bounds, Configuration, EdgeId, EdgeStates, Region, SiteCoord};
use crate::topology::Circuit;
use crate::Result;

/// Union-find with path halving and union by size over dense slot indices.
pub(crate) struct Dsu {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub(crate) fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Partition of a region's sites into open clusters.
///
/// Labels are slot indices into the region's bounding box; they are
/// deterministic for a given (states, region) pair but otherwise opaque.
pub struct ClusterLabeling {
    region: Region,
    bounds: Option<Bounds>,
    /// Per-slot membership mask; exact even when the bounding box is a
    /// strict superset of the region.
    in_region: Vec<bool>,
    /// Root slot per slot; `u32::MAX` outside the region.
    label: Vec<u32>,
    /// Cluster size, meaningful at root slots only.
    size: Vec<u32>,
    site_total: usize,
}

impl ClusterLabeling {
    fn slot(&self, s: SiteCoord) -> Option<usize> {
        let b = self.bounds?;
        if !b.contains(s) {
            return None;
        }
        let idx = ((s.y - b.y0) * b.width() + (s.x - b.x0)) as usize;
        self.in_region[idx].then_some(idx)
    }

    fn require_slot(&self, s: SiteCoord) -> Result<usize> {
        self.slot(s).ok_or_else(|| {
            PercError::InvalidRegion(format!(
                "site ({}, {}) is outside the labeled region",
                s.x, s.y
            ))
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn site_count(&self) -> usize {
        self.site_total
    }

    /// Opaque cluster id of the site's cluster.
    pub fn root_of(&self, v: SiteCoord) -> Result<usize> {
        Ok(self.label[self.require_slot(v)?] as usize)
    }

    pub fn same_cluster(&self, a: SiteCoord, b: SiteCoord) -> Result<bool> {
        Ok(self.root_of(a)? == self.root_of(b)?)
    }

    /// Number of sites in the open cluster of `v` (at least 1).
    pub fn cluster_size_at(&self, v: SiteCoord) -> Result<usize> {
        let root = self.label[self.require_slot(v)?] as usize;
        Ok(self.size[root] as usize)
    }

    /// Size of the largest cluster in the region.
    pub fn max_cluster_size(&self) -> Result<usize> {
        if self.site_total == 0 {
            return Err(PercError::InvalidRegion(
                "cannot take the largest cluster of an empty region".into(),
            ));
        }
        Ok(self
            .roots()
            .map(|r| self.size[r] as usize)
            .max()
            .unwrap_or(0))
    }

    /// All cluster sizes, largest first.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.roots().map(|r| self.size[r] as usize).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn cluster_count(&self) -> usize {
        self.roots().count()
    }

    fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.label
            .iter()
            .enumerate()
            .filter(|&(i, &l)| l as usize == i && self.in_region[i])
            .map(|(i, _)| i)
    }
}

/// Label the open clusters of `region` inside `config`'s window.
pub fn label_clusters(config: &Configuration, region: &Region) -> Result<ClusterLabeling> {
    require_subregion(region, config.window())?;
    Ok(label_clusters_in(config, region))
}

/// Label the open clusters of `region` under an arbitrary edge view.
pub fn label_clusters_in(states: &impl EdgeStates, region: &Region) -> ClusterLabeling {
    let sites = region.sites();
    let bounds = region.bounds().filter(|_| !sites.is_empty());
    let Some(b) = bounds else {
        return ClusterLabeling {
            region: region.clone(),
            bounds: None,
            in_region: Vec::new(),
            label: Vec::new(),
            size: Vec::new(),
            site_total: 0,
        };
    };
    let (w, h) = (b.width(), b.height());
    let slots = (w * h) as usize;
    let slot = |s: SiteCoord| ((s.y - b.y0) * w + (s.x - b.x0)) as usize;

    let mut in_region = vec![false; slots];
    for &s in &sites {
        in_region[slot(s)] = true;
    }

    let mut dsu = Dsu::new(slots);
    for &s in &sites {
        // Probe the two canonical edges rooted at s; the membership mask
        // makes this exactly one visit per edge of E(region).
        let right = SiteCoord::new(s.x + 1, s.y);
        if b.contains(right)
            && in_region[slot(right)]
            && states.is_open(EdgeId::horizontal(s.x, s.y))
        {
            dsu.union(slot(s) as u32, slot(right) as u32);
        }
        let up = SiteCoord::new(s.x, s.y + 1);
        if b.contains(up) && in_region[slot(up)] && states.is_open(EdgeId::vertical(s.x, s.y))
        {
            dsu.union(slot(s) as u32, slot(up) as u32);
        }
    }

    let mut label = vec![u32::MAX; slots];
    for &s in &sites {
        let i = slot(s);
        label[i] = dsu.find(i as u32);
    }
    debug_assert_eq!(
        sites
            .iter()
            .filter(|&&s| label[slot(s)] as usize == slot(s))
            .map(|&s| dsu.size[slot(s)] as usize)
            .sum::<usize>(),
        sites.len()
    );
    ClusterLabeling {
        region: region.clone(),
        bounds,
        in_region,
        label,
        size: dsu.size,
        site_total: sites.len(),
    }
}

/// Number of sites of `w` joined to its boundary by an open path inside
/// `w`. Boundary sites reach themselves, so this is at least |boundary|.
pub fn boundary_touch_count(config: &Configuration, w: &Region) -> Result<usize> {
    require_subregion(w, config.window())?;
    Ok(boundary_touch_count_in(config, w))
}

pub fn boundary_touch_count_in(states: &impl EdgeStates, w: &Region) -> usize {
    let labeling = label_clusters_in(states, w);
    count_reaching(&labeling, &w.boundary_sites(), &w.sites())
}

/// Number of sites of the inner box reached from the boundary of the
/// doubled box, with paths confined to the doubled box.
pub fn annulus_reach_count(config: &Configuration, m: i64) -> Result<usize> {
    let doubled = Region::centered_box(2 * m)?;
    require_subregion(&doubled, config.window()).map_err(|_| {
        PercError::RegionOutsideWindow(format!(
            "annulus reach at m={m} needs the window to contain the box of radius {}",
            2 * m
        ))
    })?;
    annulus_reach_count_in(config, m)
}

pub fn annulus_reach_count_in(states: &impl EdgeStates, m: i64) -> Result<usize> {
    let doubled = Region::centered_box(2 * m)?;
    let inner = Region::centered_box(m)?;
    let labeling = label_clusters_in(states, &doubled);
    Ok(count_reaching(
        &labeling,
        &doubled.boundary_sites(),
        &inner.sites(),
    ))
}

/// Number of interior sites of the circuit joined to it by an open path
/// that stays inside the closed disk (interior plus circuit).
///
/// A lattice path can only leave the interior through a circuit site, so
/// this agrees with unrestricted connectivity to the circuit; confining
/// paths keeps the observable well-defined on every configuration.
pub fn circuit_cluster_size(config: &Configuration, circuit: &Circuit) -> Result<usize> {
    let disk = closed_disk(circuit);
    require_subregion(&disk, config.window()).map_err(|_| {
        PercError::RegionOutsideWindow(
            "circuit or its interior escapes the configuration window".into(),
        )
    })?;
    Ok(circuit_cluster_size_in(config, circuit))
}

pub fn circuit_cluster_size_in(states: &impl EdgeStates, circuit: &Circuit) -> usize {
    let disk = closed_disk(circuit);
    let labeling = label_clusters_in(states, &disk);
    count_reaching(&labeling, circuit.sites(), &circuit.interior().sites())
}

/// Number of sites of `w` joined to the circuit by an open path anywhere
/// in the window; an absent circuit reaches nothing.
pub fn circuit_reach(
    config: &Configuration,
    circuit: Option<&Circuit>,
    w: &Region,
) -> Result<usize> {
    require_subregion(w, config.window())?;
    circuit_reach_in(config, circuit, w, config.window())
}

/// As [`circuit_reach`], with connectivity confined to `within`.
pub fn circuit_reach_in(
    states: &impl EdgeStates,
    circuit: Option<&Circuit>,
    w: &Region,
    within: &Region,
) -> Result<usize> {
    let Some(circuit) = circuit else {
        return Ok(0);
    };
    require_subregion(&Region::from_sites(circuit.sites().to_vec()), within).map_err(
        |_| PercError::RegionOutsideWindow("circuit escapes the connectivity region".into()),
    )?;
    let labeling = label_clusters_in(states, within);
    Ok(count_reaching(&labeling, circuit.sites(), &w.sites()))
}

/// Split the sites touched by a family of circuits into the inside and
/// outside counts: `c_in` sums the circuits' interior cluster sizes,
/// `c_out` counts outside sites joined to some circuit plus the circuit
/// sites themselves. The circuits' closed disks must be pairwise disjoint.
pub fn c_in_out(config: &Configuration, circuits: &[Circuit]) -> Result<(usize, usize)> {
    c_in_out_in(config, circuits, config.window())
}

pub fn c_in_out_in(
    states: &impl EdgeStates,
    circuits: &[Circuit],
    within: &Region,
) -> Result<(usize, usize)> {
    let mut covered = std::collections::HashSet::new();
    for c in circuits {
        for s in closed_disk(c).sites() {
            if !covered.insert(s) {
                return Err(PercError::InvalidRegion(
                    "circuit disks overlap or nest".into(),
                ));
            }
            if !within.contains(s) {
                return Err(PercError::RegionOutsideWindow(
                    "circuit or its interior escapes the connectivity region".into(),
                ));
            }
        }
    }

    let mut c_in = 0;
    for c in circuits {
        c_in += circuit_cluster_size_in(states, c);
    }

    let labeling = label_clusters_in(states, within);
    let mut reached = std::collections::HashSet::new();
    for c in circuits {
        for &s in c.sites() {
            reached.insert(labeling.root_of(s)?);
        }
    }
    let mut c_out: usize = circuits.iter().map(|c| c.site_count()).sum();
    for s in within.sites() {
        if !covered.contains(&s) && reached.contains(&labeling.root_of(s)?) {
            c_out += 1;
        }
    }
    Ok((c_in, c_out))
}

fn closed_disk(circuit: &Circuit) -> Region {
    Region::union(vec![
        circuit.interior().clone(),
        Region::from_sites(circuit.sites().to_vec()),
    ])
}

/// Count the `targets` whose cluster contains one of the `sources`.
fn count_reaching(
    labeling: &ClusterLabeling,
    sources: &[SiteCoord],
    targets: &[SiteCoord],
) -> usize {
    let mut reached = std::collections::HashSet::new();
    for &s in sources {
        if let Some(slot) = labeling.slot(s) {
            reached.insert(labeling.label[slot]);
        }
    }
    targets
        .iter()
        .filter(|&&t| {
            labeling
                .slot(t)
                .is_some_and(|slot| reached.contains(&labeling.label[slot]))
        })
        .count()
}

fn require_subregion(sub: &Region, sup: &Region) -> Result<()> {
    for s in sub.sites() {
        if !sup.contains(s) {
            return Err(PercError::RegionOutsideWindow(format!(
                "site ({}, {}) lies outside the window",
                s.x, s.y
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::{HashSet, VecDeque};

    use proptest::prelude::*;

    use super::*;
    use crate::lattice::{sample_configuration, RngSpec};

    /// Reference partition by breadth-first search, independent of the
    /// union-find kernel.
    fn bfs_partition(states: &impl EdgeStates, region: &Region) -> Vec<Vec<SiteCoord>> {
        let sites = region.sites();
        let site_set: HashSet<SiteCoord> = sites.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut parts = Vec::new();
        for &start in &sites {
            if seen.contains(&start) {
                continue;
            }
            let mut part = vec![start];
            seen.insert(start);
            let mut queue = VecDeque::from([start]);
            while let Some(cur) = queue.pop_front() {
                for nb in cur.neighbours() {
                    if seen.contains(&nb) || !site_set.contains(&nb) {
                        continue;
                    }
                    let e = EdgeId::between(cur, nb).unwrap();
                    if states.is_open(e) {
                        seen.insert(nb);
                        part.push(nb);
                        queue.push_back(nb);
                    }
                }
            }
            part.sort_by_key(|s| (s.y, s.x));
            parts.push(part);
        }
        parts.sort_by_key(|p| (p[0].y, p[0].x));
        parts
    }

    fn labeling_partition(labeling: &ClusterLabeling) -> Vec<Vec<SiteCoord>> {
        let mut by_root: std::collections::HashMap<usize, Vec<SiteCoord>> =
            std::collections::HashMap::new();
        for s in labeling.region().sites() {
            by_root.entry(labeling.root_of(s).unwrap()).or_default().push(s);
        }
        let mut parts: Vec<Vec<SiteCoord>> = by_root.into_values().collect();
        for p in &mut parts {
            p.sort_by_key(|s| (s.y, s.x));
        }
        parts.sort_by_key(|p| (p[0].y, p[0].x));
        parts
    }

    /// Counterclockwise perimeter of a rectangle, as a circuit.
    fn rect_circuit(x0: i64, x1: i64, y0: i64, y1: i64) -> Circuit {
        assert!(x1 > x0 && y1 > y0);
        let mut sites = Vec::new();
        for x in x0..x1 {
            sites.push(SiteCoord::new(x, y0));
        }
        for y in y0..y1 {
            sites.push(SiteCoord::new(x1, y));
        }
        for x in (x0 + 1..=x1).rev() {
            sites.push(SiteCoord::new(x, y1));
        }
        for y in (y0 + 1..=y1).rev() {
            sites.push(SiteCoord::new(x0, y));
        }
        Circuit::from_cycle_sites(sites).unwrap()
    }

    #[test]
    fn closed_lattice_is_all_singletons() {
        let window = Region::centered_box(2).unwrap();
        let config = Configuration::new(window.clone()).unwrap();
        let labeling = label_clusters(&config, &window).unwrap();
        assert_eq!(labeling.cluster_count(), 25);
        assert_eq!(labeling.max_cluster_size().unwrap(), 1);
        assert_eq!(labeling.cluster_sizes(), vec![1; 25]);
        for s in window.sites() {
            assert_eq!(labeling.cluster_size_at(s).unwrap(), 1);
        }
        assert_eq!(boundary_touch_count(&config, &window).unwrap(), 16);
        assert_eq!(annulus_reach_count(&config, 1).unwrap(), 0);
    }

    #[test]
    fn open_lattice_is_one_cluster() {
        let window = Region::centered_box(2).unwrap();
        let mut config = Configuration::new(window.clone()).unwrap();
        config.set_all(true);
        let labeling = label_clusters(&config, &window).unwrap();
        assert_eq!(labeling.cluster_count(), 1);
        assert_eq!(labeling.max_cluster_size().unwrap(), 25);
        assert_eq!(
            labeling.cluster_size_at(SiteCoord::new(-2, 2)).unwrap(),
            25
        );
        assert_eq!(boundary_touch_count(&config, &window).unwrap(), 25);
        assert_eq!(annulus_reach_count(&config, 1).unwrap(), 9);
    }

    #[test]
    fn hand_traced_bent_path() {
        let window = Region::centered_box(1).unwrap();
        let mut config = Configuration::new(window.clone()).unwrap();
        config.set_edge(EdgeId::horizontal(0, 0), true).unwrap();
        config.set_edge(EdgeId::vertical(1, 0), true).unwrap();
        let labeling = label_clusters(&config, &window).unwrap();
        assert_eq!(labeling.cluster_size_at(SiteCoord::new(0, 0)).unwrap(), 3);
        assert_eq!(labeling.max_cluster_size().unwrap(), 3);
        assert_eq!(labeling.cluster_count(), 7);
        assert!(labeling
            .same_cluster(SiteCoord::new(0, 0), SiteCoord::new(1, 1))
            .unwrap());
        assert!(!labeling
            .same_cluster(SiteCoord::new(0, 0), SiteCoord::new(0, 1))
            .unwrap());
    }

    #[test]
    fn labeling_rejects_regions_outside_the_window() {
        let config = Configuration::new(Region::centered_box(2).unwrap()).unwrap();
        let region = Region::centered_box(3).unwrap();
        assert!(matches!(
            label_clusters(&config, &region),
            Err(PercError::RegionOutsideWindow(_))
        ));
        assert!(matches!(
            annulus_reach_count(&config, 2),
            Err(PercError::RegionOutsideWindow(_))
        ));
        let labeling = label_clusters(&config, config.window()).unwrap();
        assert!(labeling.cluster_size_at(SiteCoord::new(3, 0)).is_err());
    }

    #[test]
    fn empty_region_has_no_largest_cluster() {
        let config = Configuration::new(Region::centered_box(1).unwrap()).unwrap();
        let labeling = label_clusters(&config, &Region::union(Vec::new())).unwrap();
        assert_eq!(labeling.cluster_count(), 0);
        assert!(labeling.max_cluster_size().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn partition_matches_breadth_first_reference(
            seed in any::<u64>(),
            stream in 0u64..1024,
            p in 0.0f64..=1.0,
        ) {
            let window = Region::centered_box(4).unwrap();
            let config = sample_configuration(&window, p, RngSpec::new(seed, stream)).unwrap();
            for region in [
                window.clone(),
                Region::annulus(4, 1).unwrap(),
                Region::centered_rect(2, 4).unwrap(),
            ] {
                let labeling = label_clusters(&config, &region).unwrap();
                prop_assert_eq!(
                    labeling_partition(&labeling),
                    bfs_partition(&config, &region)
                );
                let total: usize = labeling.cluster_sizes().iter().sum();
                prop_assert_eq!(total, region.site_count());
            }
        }
    }

    #[test]
    fn boundary_touch_uses_paths_inside_the_region_only() {
        let window = Region::centered_box(2).unwrap();
        let inner = Region::centered_box(1).unwrap();
        let mut config = Configuration::new(window).unwrap();
        // An open edge outside the inner box changes nothing.
        config.set_edge(EdgeId::horizontal(1, 1), true).unwrap();
        assert_eq!(boundary_touch_count(&config, &inner).unwrap(), 8);
        // Joining the center to the ring adds exactly the center.
        config.set_edge(EdgeId::vertical(0, 0), true).unwrap();
        assert_eq!(boundary_touch_count(&config, &inner).unwrap(), 9);
    }

    #[test]
    fn boundary_touch_average_over_all_unit_box_configurations() {
        // Exhaustive sweep over the 12 edges of the unit box: the center
        // reaches the ring in 15/16 of all configurations, so the counts
        // sum to 4096 * 8 + 4096 * 15/16.
        let window = Region::centered_box(1).unwrap();
        let mut total = 0usize;
        crate::topology::test_support::for_each_configuration(&window, |config| {
            total += boundary_touch_count_in(config, &window);
        });
        assert_eq!(total, 4096 * 8 + 3840);
    }

    #[test]
    fn annulus_reach_counts_inner_sites_only() {
        let window = Region::centered_box(2).unwrap();
        let mut config = Configuration::new(window).unwrap();
        config.set_edge(EdgeId::vertical(1, 1), true).unwrap();
        config.set_edge(EdgeId::horizontal(1, 2), true).unwrap();
        // (1,1) -> (1,2) -> (2,2) reaches the outer boundary, but only
        // (1,1) lies in the inner box.
        assert_eq!(annulus_reach_count(&config, 1).unwrap(), 1);
        assert_eq!(annulus_reach_count(&config, 0).unwrap(), 1);
    }

    #[test]
    fn circuit_cluster_size_on_the_unit_ring() {
        let window = Region::centered_box(1).unwrap();
        let ring = rect_circuit(-1, 1, -1, 1);
        assert_eq!(ring.site_count(), 8);
        assert_eq!(ring.interior().site_count(), 1);

        let mut config = Configuration::new(window.clone()).unwrap();
        assert_eq!(circuit_cluster_size(&config, &ring).unwrap(), 0);
        config.set_edge(EdgeId::vertical(0, 0), true).unwrap();
        assert_eq!(circuit_cluster_size(&config, &ring).unwrap(), 1);
        config.set_all(true);
        assert_eq!(circuit_cluster_size(&config, &ring).unwrap(), 1);

        // Interior escaping the window is rejected.
        let punctured = Configuration::new(Region::annulus(1, 0).unwrap()).unwrap();
        assert!(matches!(
            circuit_cluster_size(&punctured, &ring),
            Err(PercError::RegionOutsideWindow(_))
        ));
    }

    #[test]
    fn circuit_reach_handles_absent_circuits() {
        let window = Region::centered_box(2).unwrap();
        let inner = Region::centered_box(1).unwrap();
        let mut config = Configuration::new(window).unwrap();
        assert_eq!(circuit_reach(&config, None, &inner).unwrap(), 0);
        config.set_all(true);
        assert_eq!(circuit_reach(&config, None, &inner).unwrap(), 0);
        let ring = rect_circuit(-1, 1, -1, 1);
        assert_eq!(circuit_reach(&config, Some(&ring), &inner).unwrap(), 9);
    }

    #[test]
    fn circuit_reach_matches_breadth_first_search() {
        let window = Region::centered_box(2).unwrap();
        let ring = rect_circuit(-1, 1, -1, 1);
        let target = Region::centered_rect(2, 1).unwrap();
        for stream in 0..60 {
            let config =
                sample_configuration(&window, 0.5, RngSpec::new(808, stream)).unwrap();
            let got = circuit_reach(&config, Some(&ring), &target).unwrap();
            let parts = bfs_partition(&config, &window);
            let circuit_sites: HashSet<SiteCoord> = ring.sites().iter().copied().collect();
            let expected = target
                .sites()
                .into_iter()
                .filter(|&t| {
                    parts
                        .iter()
                        .any(|p| p.contains(&t) && p.iter().any(|s| circuit_sites.contains(s)))
                })
                .count();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn inside_outside_split_on_two_disjoint_disks() {
        let window = Region::centered_box(3).unwrap();
        let a = rect_circuit(-3, -1, -3, -1);
        let b = rect_circuit(1, 3, 1, 3);
        let circuits = vec![a.clone(), b.clone()];

        let mut config = Configuration::new(window.clone()).unwrap();
        assert_eq!(c_in_out(&config, &circuits).unwrap(), (0, 16));
        config.set_all(true);
        assert_eq!(c_in_out(&config, &circuits).unwrap(), (2, 47));

        // Overlapping and nested families are rejected.
        let shifted = rect_circuit(-2, 0, -3, -1);
        assert!(matches!(
            c_in_out(&config, &[a.clone(), shifted]),
            Err(PercError::InvalidRegion(_))
        ));
        let nested = rect_circuit(-2, 2, -2, 2);
        assert!(matches!(
            c_in_out(&config, &[rect_circuit(-1, 1, -1, 1), nested]),
            Err(PercError::InvalidRegion(_))
        ));
    }

    #[test]
    fn inside_outside_split_matches_brute_force() {
        let window = Region::centered_box(3).unwrap();
        let a = rect_circuit(-3, -1, -3, -1);
        let b = rect_circuit(1, 3, 1, 3);
        let disks: HashSet<SiteCoord> = closed_disk(&a)
            .sites()
            .into_iter()
            .chain(closed_disk(&b).sites())
            .collect();
        for stream in 0..60 {
            let config =
                sample_configuration(&window, 0.5, RngSpec::new(909, stream)).unwrap();
            let (c_in, c_out) = c_in_out(&config, &[a.clone(), b.clone()]).unwrap();

            let mut expected_in = 0;
            for c in [&a, &b] {
                let parts = bfs_partition(&config, &closed_disk(c));
                let on_circuit: HashSet<SiteCoord> = c.sites().iter().copied().collect();
                expected_in += c
                    .interior()
                    .sites()
                    .into_iter()
                    .filter(|&v| {
                        parts
                            .iter()
                            .any(|p| p.contains(&v) && p.iter().any(|s| on_circuit.contains(s)))
                    })
                    .count();
            }
            assert_eq!(c_in, expected_in);

            let parts = bfs_partition(&config, &window);
            let on_circuits: HashSet<SiteCoord> =
                a.sites().iter().chain(b.sites()).copied().collect();
            let expected_out = on_circuits.len()
                + window
                    .sites()
                    .into_iter()
                    .filter(|&v| {
                        !disks.contains(&v)
                            && parts.iter().any(|p| {
                                p.contains(&v) && p.iter().any(|s| on_circuits.contains(s))
                            })
                    })
                    .count();
            assert_eq!(c_out, expected_out);
        }
    }

    #[test]
    fn shared_cluster_is_covered_by_the_split() {
        let window = Region::centered_box(3).unwrap();
        let a = rect_circuit(-3, -1, -3, -1);
        let b = rect_circuit(1, 3, 1, 3);
        let mut checked = 0;
        for stream in 0..400 {
            let mut config =
                sample_configuration(&window, 0.55, RngSpec::new(111, stream)).unwrap();
            for c in [&a, &b] {
                for &e in c.edges() {
                    config.set_edge(e, true).unwrap();
                }
            }
            let labeling = label_clusters(&config, &window).unwrap();
            let root_a = labeling.root_of(a.sites()[0]).unwrap();
            if root_a != labeling.root_of(b.sites()[0]).unwrap() {
                continue;
            }
            checked += 1;
            let shared = labeling.cluster_size_at(a.sites()[0]).unwrap();
            let (c_in, c_out) = c_in_out(&config, &[a.clone(), b.clone()]).unwrap();
            assert!(shared <= c_in + c_out);
        }
        assert!(checked > 20);
    }

    #[test]
    fn opening_an_edge_never_shrinks_observables() {
        let window = Region::centered_box(2).unwrap();
        let ring = rect_circuit(-1, 1, -1, 1);
        for stream in 0..25 {
            let mut config =
                sample_configuration(&window, 0.4, RngSpec::new(222, stream)).unwrap();
            let base_max = label_clusters(&config, &window)
                .unwrap()
                .max_cluster_size()
                .unwrap();
            let base_touch = boundary_touch_count(&config, &window).unwrap();
            let base_reach = annulus_reach_count(&config, 1).unwrap();
            let base_circuit = circuit_cluster_size(&config, &ring).unwrap();
            for e in window.edges() {
                if config.is_open(e) {
                    continue;
                }
                config.set_edge(e, true).unwrap();
                let labeling = label_clusters(&config, &window).unwrap();
                assert!(labeling.max_cluster_size().unwrap() >= base_max);
                assert!(boundary_touch_count(&config, &window).unwrap() >= base_touch);
                assert!(annulus_reach_count(&config, 1).unwrap() >= base_reach);
                assert!(circuit_cluster_size(&config, &ring).unwrap() >= base_circuit);
                config.set_edge(e, false).unwrap();
            }
        }
    }
}
