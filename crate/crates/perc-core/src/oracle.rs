//! Exhaustive enumeration over tiny edge sets.
//!
//! Every estimator in this crate is calibrated against exact values from
//! this module: a task fixes most edges of a window and sweeps all
//! 2^k assignments of up to 24 variable edges in Gray-code order, so each
//! step flips a single edge. Satisfying assignments are tallied per open
//! count as integers, which keeps the sweep exact; probability weights
//! enter only when the tallies are combined. At p = 1/2 every weight is
//! 2^{-k} and results are exact dyadic rationals.

use crate::error::PercError;
use crate::lattice::{Configuration, EdgeId, EdgeStates, Region};
use crate::Result;

/// Hard cap on the number of variable edges (2^24 configurations).
pub const ENUMERATION_CAP: usize = 24;

/// An exact probability or expectation.
///
/// Rationals are kept reduced; they arise whenever p = 1/2 makes every
/// configuration weight dyadic. Other p values produce floats assembled
/// from exact integer tallies, so the only rounding is in the final
/// polynomial evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum ExactValue {
    Rational { num: u128, den: u128 },
    Real(f64),
}

impl ExactValue {
    fn rational(num: u128, den: u128) -> ExactValue {
        debug_assert!(den > 0);
        let g = gcd(num.max(1), den);
        ExactValue::Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            ExactValue::Rational { num, den } => num as f64 / den as f64,
            ExactValue::Real(x) => x,
        }
    }
}

impl std::fmt::Display for ExactValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ExactValue::Rational { num, den: 1 } => write!(f, "{num}"),
            ExactValue::Rational { num, den } => write!(f, "{num}/{den}"),
            ExactValue::Real(x) => write!(f, "{x}"),
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// A bounded exhaustive sweep: `variable` edges range over all states,
/// every other edge of the window keeps its state from `base`.
pub struct EnumerationTask {
    base: Configuration,
    variable: Vec<EdgeId>,
    p: f64,
}

impl EnumerationTask {
    pub fn new(base: Configuration, variable: Vec<EdgeId>, p: f64) -> Result<EnumerationTask> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PercError::InvalidParameters(format!(
                "probability {p} is outside [0, 1]"
            )));
        }
        let mut variable = variable;
        variable.sort();
        variable.dedup();
        if variable.len() > ENUMERATION_CAP {
            return Err(PercError::EnumerationCapExceeded {
                edges: variable.len(),
                cap: ENUMERATION_CAP,
            });
        }
        let mut base = base;
        for &e in &variable {
            base.set_edge(e, false).map_err(|_| {
                PercError::InvalidParameters(
                    "variable edge lies outside the window's edge set".into(),
                )
            })?;
        }
        Ok(EnumerationTask { base, variable, p })
    }

    /// Sweep every edge of the window, starting from all-closed.
    pub fn all_edges(window: Region, p: f64) -> Result<EnumerationTask> {
        let variable = window.edges();
        let base = Configuration::new(window)?;
        EnumerationTask::new(base, variable, p)
    }

    pub fn window(&self) -> &Region {
        self.base.window()
    }

    pub fn variable_edges(&self) -> &[EdgeId] {
        &self.variable
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Combine per-open-count tallies into Σ_j tally[j] p^j (1-p)^{k-j},
    /// exactly when p = 1/2.
    fn combine(&self, tally: &[u128]) -> ExactValue {
        let k = self.variable.len() as u32;
        if self.p == 0.5 {
            let num: u128 = tally.iter().sum();
            return ExactValue::rational(num, 1u128 << k);
        }
        let q = 1.0 - self.p;
        let mut total = 0.0;
        for (j, &t) in tally.iter().enumerate() {
            if t != 0 {
                total += t as f64
                    * self.p.powi(j as i32)
                    * q.powi((k as usize - j) as i32);
            }
        }
        ExactValue::Real(total)
    }

    fn default_split(&self) -> u32 {
        let k = self.variable.len() as u32;
        if k >= 18 {
            (k - 14).min(6)
        } else {
            0
        }
    }
}

/// Sweep all configurations, folding `step(acc, open_variable_count,
/// config)` over them. The index range is split by its top `split` bits;
/// each sub-range is an independent Gray-code walk over the low bits, so
/// partial accumulators merge exactly.
fn fold_configurations<A: Send>(
    task: &EnumerationTask,
    split: u32,
    init: impl Fn() -> A + Sync,
    step: impl Fn(&mut A, usize, &Configuration) + Sync,
    merge: impl Fn(A, A) -> A + Send + Sync,
) -> A {
    let k = task.variable.len() as u32;
    let split = split.min(k);
    let chunk_bits = k - split;
    let chunks = 1u64 << split;

    let run_chunk = |chunk: u64| -> A {
        let lo = chunk << chunk_bits;
        let hi = lo + (1u64 << chunk_bits);
        let mut config = task.base.clone();
        let mut open = 0usize;
        let gray = lo ^ (lo >> 1);
        for (bit, &e) in task.variable.iter().enumerate() {
            if gray >> bit & 1 == 1 {
                config.set_edge(e, true).unwrap();
                open += 1;
            }
        }
        let mut acc = init();
        step(&mut acc, open, &config);
        for i in lo + 1..hi {
            // Gray transition from i-1 to i flips this single bit; chunk
            // boundaries are power-of-two aligned so it stays in range.
            let bit = i.trailing_zeros() as usize;
            let e = task.variable[bit];
            let now_open = !config.is_open(e);
            config.set_edge(e, now_open).unwrap();
            if now_open {
                open += 1;
            } else {
                open -= 1;
            }
            step(&mut acc, open, &config);
        }
        acc
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(run_chunk)
            .reduce_with(&merge)
            .unwrap_or_else(init)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        let mut acc: Option<A> = None;
        for chunk in 0..chunks {
            let part = run_chunk(chunk);
            acc = Some(match acc {
                Some(prev) => merge(prev, part),
                None => part,
            });
        }
        acc.unwrap_or_else(init)
    }
}

fn merge_tallies(mut a: Vec<u128>, b: Vec<u128>) -> Vec<u128> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn probability_with_split(
    task: &EnumerationTask,
    split: u32,
    event: impl Fn(&Configuration) -> bool + Sync,
) -> ExactValue {
    let k = task.variable.len();
    let tally = fold_configurations(
        task,
        split,
        || vec![0u128; k + 1],
        |acc, j, config| {
            if event(config) {
                acc[j] += 1;
            }
        },
        merge_tallies,
    );
    task.combine(&tally)
}

/// Exact probability of `event` under the task's product measure.
pub fn enumerate_probability(
    task: &EnumerationTask,
    event: impl Fn(&Configuration) -> bool + Sync,
) -> ExactValue {
    probability_with_split(task, task.default_split(), event)
}

/// Exact expectation of a nonnegative integer observable.
pub fn enumerate_expectation(
    task: &EnumerationTask,
    value: impl Fn(&Configuration) -> u64 + Sync,
) -> ExactValue {
    let k = task.variable.len();
    let tally = fold_configurations(
        task,
        task.default_split(),
        || vec![0u128; k + 1],
        |acc, j, config| acc[j] += value(config) as u128,
        merge_tallies,
    );
    task.combine(&tally)
}

/// Exact conditional expectation of `value` given `conditioning`.
pub fn enumerate_conditional_expectation(
    task: &EnumerationTask,
    value: impl Fn(&Configuration) -> u64 + Sync,
    conditioning: impl Fn(&Configuration) -> bool + Sync,
) -> Result<ExactValue> {
    let k = task.variable.len();
    let (sums, counts) = fold_configurations(
        task,
        task.default_split(),
        || (vec![0u128; k + 1], vec![0u128; k + 1]),
        |acc, j, config| {
            if conditioning(config) {
                acc.0[j] += value(config) as u128;
                acc.1[j] += 1;
            }
        },
        |a, b| (merge_tallies(a.0, b.0), merge_tallies(a.1, b.1)),
    );
    if task.p == 0.5 {
        let den: u128 = counts.iter().sum();
        if den == 0 {
            return Err(PercError::ZeroProbabilityConditioning);
        }
        return Ok(ExactValue::rational(sums.iter().sum(), den));
    }
    let mass = task.combine(&counts).as_f64();
    if mass <= 0.0 {
        return Err(PercError::ZeroProbabilityConditioning);
    }
    Ok(ExactValue::Real(task.combine(&sums).as_f64() / mass))
}

/// Exact distribution of an integer observable, as (value, probability)
/// pairs sorted by value.
pub fn enumerate_distribution(
    task: &EnumerationTask,
    value: impl Fn(&Configuration) -> u64 + Sync,
) -> Vec<(u64, ExactValue)> {
    use std::collections::BTreeMap;
    let k = task.variable.len();
    let tallies = fold_configurations(
        task,
        task.default_split(),
        BTreeMap::<u64, Vec<u128>>::new,
        |acc, j, config| {
            acc.entry(value(config)).or_insert_with(|| vec![0u128; k + 1])[j] += 1;
        },
        |mut a, b| {
            for (v, t) in b {
                match a.remove(&v) {
                    Some(prev) => {
                        a.insert(v, merge_tallies(prev, t));
                    }
                    None => {
                        a.insert(v, t);
                    }
                }
            }
            a
        },
    );
    tallies
        .into_iter()
        .map(|(v, t)| (v, task.combine(&t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{boundary_touch_count_in, label_clusters_in};
    use crate::lattice::SiteCoord;
    use crate::topology::{has_horizontal_crossing, CrossingVariant};

    fn reaches_boundary(config: &Configuration, window: &Region, v: SiteCoord) -> bool {
        let labeling = label_clusters_in(config, window);
        window
            .boundary_sites()
            .iter()
            .any(|&b| labeling.same_cluster(v, b).unwrap())
    }

    #[test]
    fn single_edge_probability_is_p() {
        let window = Region::rect(0, 1, 0, 0).unwrap();
        let e = EdgeId::horizontal(0, 0);
        let half = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        assert_eq!(
            enumerate_probability(&half, |c| c.is_open(e)),
            ExactValue::Rational { num: 1, den: 2 }
        );
        let biased = EnumerationTask::all_edges(window, 0.3).unwrap();
        let got = enumerate_probability(&biased, |c| c.is_open(e)).as_f64();
        assert!((got - 0.3).abs() < 1e-12);
    }

    #[test]
    fn one_arm_probability_on_the_unit_box() {
        let window = Region::centered_box(1).unwrap();
        let origin = SiteCoord::new(0, 0);

        // Full 12-edge sweep.
        let task = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        let full = enumerate_probability(&task, |c| reaches_boundary(c, &window, origin));
        assert_eq!(full, ExactValue::Rational { num: 15, den: 16 });

        // The event only depends on the four edges at the origin; the
        // reduced sweep with everything else frozen closed must agree.
        let incident: Vec<EdgeId> = window
            .edges()
            .into_iter()
            .filter(|e| {
                let (a, b) = e.endpoints();
                a == origin || b == origin
            })
            .collect();
        assert_eq!(incident.len(), 4);
        let base = Configuration::new(window.clone()).unwrap();
        let reduced = EnumerationTask::new(base, incident, 0.5).unwrap();
        let got = enumerate_probability(&reduced, |c| reaches_boundary(c, &window, origin));
        assert_eq!(got, full);
    }

    #[test]
    fn strict_crossing_probability_on_the_unit_square() {
        let window = Region::rect(0, 1, 0, 1).unwrap();
        let crossing = |c: &Configuration| {
            has_horizontal_crossing(c, c.window(), CrossingVariant::Strict).unwrap()
        };
        let half = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        assert_eq!(
            enumerate_probability(&half, crossing),
            ExactValue::Rational { num: 3, den: 4 }
        );
        // Only the two single-edge paths qualify: 1 - (1-p)^2.
        let biased = EnumerationTask::all_edges(window, 0.3).unwrap();
        let got = enumerate_probability(&biased, crossing).as_f64();
        assert!((got - (2.0 * 0.3 - 0.09)).abs() < 1e-12);
    }

    #[test]
    fn boundary_touch_expectation_on_the_unit_box() {
        let window = Region::centered_box(1).unwrap();
        let task = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        let w = window.clone();
        let expected = enumerate_expectation(&task, move |c| {
            boundary_touch_count_in(c, &w) as u64
        });
        // Eight ring sites always count; the center joins in 15/16 of
        // configurations: 8 + 15/16.
        assert_eq!(expected, ExactValue::Rational { num: 143, den: 16 });

        let w = window.clone();
        let via_sure_event = enumerate_conditional_expectation(
            &task,
            move |c| boundary_touch_count_in(c, &w) as u64,
            |_| true,
        )
        .unwrap();
        assert_eq!(via_sure_event, expected);
    }

    #[test]
    fn conditioning_on_an_open_origin_star_pins_the_count() {
        let window = Region::centered_box(1).unwrap();
        let origin = SiteCoord::new(0, 0);
        let incident: Vec<EdgeId> = window
            .edges()
            .into_iter()
            .filter(|e| {
                let (a, b) = e.endpoints();
                a == origin || b == origin
            })
            .collect();
        let task = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        let w = window.clone();
        let star = incident.clone();
        let got = enumerate_conditional_expectation(
            &task,
            move |c| boundary_touch_count_in(c, &w) as u64,
            move |c| star.iter().all(|&e| c.is_open(e)),
        )
        .unwrap();
        // With the star open the center always reaches the ring.
        assert_eq!(got, ExactValue::Rational { num: 9, den: 1 });
        assert!(got.as_f64() >= 5.0);
    }

    #[test]
    fn impossible_conditioning_is_rejected() {
        let window = Region::rect(0, 1, 0, 1).unwrap();
        let task = EnumerationTask::all_edges(window, 0.5).unwrap();
        let err = enumerate_conditional_expectation(&task, |_| 1, |_| false);
        assert!(matches!(err, Err(PercError::ZeroProbabilityConditioning)));
    }

    #[test]
    fn cap_is_enforced() {
        // 5x5 box: 40 edges, far over the cap.
        let window = Region::centered_box(2).unwrap();
        let err = EnumerationTask::all_edges(window, 0.5);
        assert!(matches!(
            err,
            Err(PercError::EnumerationCapExceeded { edges: 40, cap: 24 })
        ));
    }

    #[test]
    fn largest_cluster_distribution_on_the_unit_box() {
        let window = Region::centered_box(1).unwrap();
        let task = EnumerationTask::all_edges(window.clone(), 0.5).unwrap();
        let w = window.clone();
        let largest = move |c: &Configuration| {
            label_clusters_in(c, &w).max_cluster_size().unwrap() as u64
        };
        let dist = enumerate_distribution(&task, largest.clone());

        // Support is 1..=9 and the masses form an exact partition.
        assert_eq!(dist.first().unwrap().0, 1);
        assert_eq!(dist.last().unwrap().0, 9);
        let mut mass_num = 0u128;
        for &(_, v) in &dist {
            let ExactValue::Rational { num, den } = v else {
                panic!("expected exact rationals at p = 1/2");
            };
            assert!(den.is_power_of_two() && den <= 1 << 12);
            mass_num += num * ((1 << 12) / den);
        }
        assert_eq!(mass_num, 1 << 12);

        // Mean of the distribution equals the directly enumerated mean.
        let mean = enumerate_expectation(&task, largest);
        let by_parts: f64 = dist.iter().map(|&(v, p)| v as f64 * p.as_f64()).sum();
        assert!((mean.as_f64() - by_parts).abs() < 1e-12);

        // Independent cross-check: plain bitmask sweep plus the
        // breadth-first partition used nowhere in the enumeration path.
        let mut total = 0u64;
        crate::topology::test_support::for_each_configuration(&window, |c| {
            let labeling = label_clusters_in(c, &window);
            total += labeling.max_cluster_size().unwrap() as u64;
        });
        assert_eq!(
            mean,
            ExactValue::rational(total as u128, 1 << 12),
            "Gray-code sweep disagrees with direct sweep"
        );
    }

    #[test]
    fn split_sweeps_merge_exactly() {
        // 17 edges: wide rectangle, strict crossing observable.
        let window = Region::rect(0, 3, 0, 2).unwrap();
        assert_eq!(window.edge_count(), 17);
        let task = EnumerationTask::all_edges(window, 0.5).unwrap();
        let crossing = |c: &Configuration| {
            has_horizontal_crossing(c, c.window(), CrossingVariant::Strict).unwrap()
        };
        let single = probability_with_split(&task, 0, crossing);
        let split = probability_with_split(&task, 5, crossing);
        assert_eq!(single, split);
    }

    #[test]
    fn display_prints_reduced_fractions() {
        assert_eq!(ExactValue::rational(3840, 4096).to_string(), "15/16");
        assert_eq!(ExactValue::rational(18, 2).to_string(), "9");
        assert_eq!(ExactValue::Real(0.25).to_string(), "0.25");
    }
}
