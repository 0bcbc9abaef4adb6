//! Monte Carlo estimators and the quantitative experiments built on them.
//!
//! Every entry point takes a replica `budget` and an [`RngSpec`]; replica i
//! of an estimate uses stream `rng.stream + i`, and operations that need
//! several independent estimates advance through contiguous stream blocks
//! of size `budget` in a documented order. Identical inputs therefore give
//! bit-identical outputs regardless of thread count: all accumulators are
//! integers merged associatively, and real-valued summaries are assembled
//! from collections in stream order.

use std::collections::VecDeque;
use std::ops::Range;

use crate::cluster::{boundary_touch_count_in, label_clusters_in};
use crate::error::PercError;
use crate::exec::{mc_fold, stream_fold};
use crate::lattice::{EdgeId, EdgeStates, Region, RngSpec, Sampler, SiteCoord};
use crate::topology::{has_horizontal_crossing, CrossingVariant};
use crate::Result;

/// A Monte Carlo estimate: raw accumulators plus seed provenance.
///
/// Mean and standard error are derived on demand so that merging stays
/// exact: for the integer-backed kinds, `merge` is associative and
/// commutative bit for bit and equals the pooled estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    samples: u64,
    acc: Accum,
    seed: u64,
    stream_lo: u64,
    stream_hi: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
enum Accum {
    /// Indicator event: number of successes.
    Counts(u64),
    /// Integer observable: Σx and Σx².
    Ints { sum: u128, sum_sq: u128 },
    /// Real observable (reweighted sweeps): Σx and Σx², accumulated in
    /// stream order.
    Reals { sum: f64, sum_sq: f64 },
}

impl Estimate {
    pub fn indicator(successes: u64, samples: u64, seed: u64, streams: Range<u64>) -> Estimate {
        assert!(successes <= samples);
        Estimate {
            samples,
            acc: Accum::Counts(successes),
            seed,
            stream_lo: streams.start,
            stream_hi: streams.end,
        }
    }

    pub fn from_int_sums(
        sum: u128,
        sum_sq: u128,
        samples: u64,
        seed: u64,
        streams: Range<u64>,
    ) -> Estimate {
        Estimate {
            samples,
            acc: Accum::Ints { sum, sum_sq },
            seed,
            stream_lo: streams.start,
            stream_hi: streams.end,
        }
    }

    /// Build from real-valued samples; the iteration order is the
    /// summation order, so pass values in stream order.
    pub fn from_values(
        values: impl IntoIterator<Item = f64>,
        seed: u64,
        streams: Range<u64>,
    ) -> Estimate {
        let (mut sum, mut sum_sq, mut samples) = (0.0, 0.0, 0u64);
        for v in values {
            sum += v;
            sum_sq += v * v;
            samples += 1;
        }
        Estimate {
            samples,
            acc: Accum::Reals { sum, sum_sq },
            seed,
            stream_lo: streams.start,
            stream_hi: streams.end,
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn successes(&self) -> Option<u64> {
        match self.acc {
            Accum::Counts(s) => Some(s),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn streams(&self) -> Range<u64> {
        self.stream_lo..self.stream_hi
    }

    pub fn mean(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let n = self.samples as f64;
        match self.acc {
            Accum::Counts(s) => s as f64 / n,
            Accum::Ints { sum, .. } => sum as f64 / n,
            Accum::Reals { sum, .. } => sum / n,
        }
    }

    pub fn stderr(&self) -> f64 {
        let n = self.samples as f64;
        match self.acc {
            Accum::Counts(_) => {
                if self.samples == 0 {
                    return 0.0;
                }
                let m = self.mean();
                (m * (1.0 - m) / n).sqrt()
            }
            Accum::Ints { sum, sum_sq } => {
                sample_stderr(sum as f64, sum_sq as f64, self.samples)
            }
            Accum::Reals { sum, sum_sq } => sample_stderr(sum, sum_sq, self.samples),
        }
    }

    /// Pooled estimate of two disjoint sample sets. Panics if the kinds or
    /// seeds differ; the stream range becomes the hull of the inputs.
    pub fn merge(self, other: Estimate) -> Estimate {
        assert_eq!(self.seed, other.seed, "merging estimates across seeds");
        let acc = match (self.acc, other.acc) {
            (Accum::Counts(a), Accum::Counts(b)) => Accum::Counts(a + b),
            (Accum::Ints { sum: s1, sum_sq: q1 }, Accum::Ints { sum: s2, sum_sq: q2 }) => {
                Accum::Ints {
                    sum: s1 + s2,
                    sum_sq: q1 + q2,
                }
            }
            (Accum::Reals { sum: s1, sum_sq: q1 }, Accum::Reals { sum: s2, sum_sq: q2 }) => {
                Accum::Reals {
                    sum: s1 + s2,
                    sum_sq: q1 + q2,
                }
            }
            _ => panic!("merging estimates of different kinds"),
        };
        Estimate {
            samples: self.samples + other.samples,
            acc,
            seed: self.seed,
            stream_lo: self.stream_lo.min(other.stream_lo),
            stream_hi: self.stream_hi.max(other.stream_hi),
        }
    }
}

fn sample_stderr(sum: f64, sum_sq: f64, samples: u64) -> f64 {
    if samples < 2 {
        return 0.0;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// One line of a verification report: a labelled inequality with its data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckLine {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(label: impl Into<String>, passed: bool, detail: String) -> CheckLine {
        CheckLine {
            label: label.into(),
            passed,
            detail,
        }
    }
}

pub(crate) fn require_budget(budget: u64) -> Result<()> {
    if budget == 0 {
        return Err(PercError::InvalidParameters(
            "sample budget must be positive".into(),
        ));
    }
    Ok(())
}

/// Breadth-first search from the origin with per-replica reusable scratch;
/// succeeds as soon as the boundary of the box of radius `n` is reached.
struct OneArmScout {
    n: i64,
    side: i64,
    visited: Vec<u64>,
    generation: u64,
    queue: VecDeque<SiteCoord>,
}

impl OneArmScout {
    fn new(n: i64) -> OneArmScout {
        let side = 2 * n + 1;
        OneArmScout {
            n,
            side,
            visited: vec![0; (side * side) as usize],
            generation: 0,
            queue: VecDeque::new(),
        }
    }

    fn slot(&self, s: SiteCoord) -> usize {
        ((s.y + self.n) * self.side + (s.x + self.n)) as usize
    }

    fn run(&mut self, states: &impl EdgeStates) -> bool {
        if self.n == 0 {
            return true;
        }
        self.generation += 1;
        self.queue.clear();
        let origin = SiteCoord::new(0, 0);
        let origin_slot = self.slot(origin);
        self.visited[origin_slot] = self.generation;
        self.queue.push_back(origin);
        while let Some(cur) = self.queue.pop_front() {
            for nb in cur.neighbours() {
                if nb.linf_norm() > self.n {
                    continue;
                }
                let slot = self.slot(nb);
                if self.visited[slot] == self.generation {
                    continue;
                }
                if !states.is_open(EdgeId::between(cur, nb).unwrap()) {
                    continue;
                }
                if nb.linf_norm() == self.n {
                    return true;
                }
                self.visited[slot] = self.generation;
                self.queue.push_back(nb);
            }
        }
        false
    }
}

/// One-arm probability: P(origin connected to the boundary of the box of
/// radius n, inside the box). Edges are resolved on demand, so a replica
/// costs the size of the origin's cluster rather than a full fill.
pub fn estimate_pi(n: i64, p: f64, budget: u64, rng: RngSpec) -> Result<Estimate> {
    require_budget(budget)?;
    let window = Region::centered_box(n)?;
    let sampler = Sampler::new(window, p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let (successes, _) = stream_fold(
        streams.clone(),
        || (0u64, OneArmScout::new(n)),
        |(count, scout), stream| {
            if scout.run(&sampler.lazy(stream)) {
                *count += 1;
            }
        },
        |a, b| (a.0 + b.0, a.1),
    );
    Ok(Estimate::indicator(successes, budget, rng.seed, streams))
}

/// Horizontal-crossing probability of the box [0,k] x [0,l].
pub fn estimate_hc(
    k: i64,
    l: i64,
    p: f64,
    variant: CrossingVariant,
    budget: u64,
    rng: RngSpec,
) -> Result<Estimate> {
    require_budget(budget)?;
    if k < 1 || l < 1 {
        return Err(PercError::InvalidParameters(format!(
            "crossing box needs k, l >= 1, got ({k}, {l})"
        )));
    }
    let window = Region::rect(0, k, 0, l)?;
    let sampler = Sampler::new(window.clone(), p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let successes = stream_fold(
        streams.clone(),
        || 0u64,
        |count, stream| {
            let crossing = has_horizontal_crossing(&sampler.lazy(stream), &window, variant)
                .expect("window is a rectangle");
            if crossing {
                *count += 1;
            }
        },
        |a, b| a + b,
    );
    Ok(Estimate::indicator(successes, budget, rng.seed, streams))
}

/// Outcome of a characteristic-length scan.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum LengthOutcome {
    /// Smallest n whose crossing estimate clears the threshold by at
    /// least 3 standard errors.
    Determined(i64),
    /// No scale up to the bound cleared the threshold (the expected
    /// verdict at p = 1/2, where the crossing probability stays flat).
    AtLeast(i64),
    /// The estimate at this n sits within 3 standard errors of the
    /// threshold on both sides: the budget cannot resolve the minimum.
    Unresolved { n: i64 },
}

impl std::fmt::Display for LengthOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LengthOutcome::Determined(n) => write!(f, "{n}"),
            LengthOutcome::AtLeast(n) => write!(f, ">= {n}"),
            LengthOutcome::Unresolved { n } => {
                write!(f, "unresolved at n={n} (budget too small)")
            }
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LengthReport {
    pub outcome: LengthOutcome,
    /// (n, crossing estimate) for every scanned scale.
    pub rows: Vec<(i64, Estimate)>,
}

/// Characteristic length: smallest n <= n_max at which the square-crossing
/// probability passes the threshold, epsilon below criticality and
/// 1 - epsilon above. Scans n = 1, 2, ... with `budget` samples per scale
/// (stream blocks advance per scale) and demands a 3-standard-error margin
/// before declaring either verdict at a scale.
pub fn estimate_characteristic_length(
    p: f64,
    epsilon: f64,
    n_max: i64,
    budget: u64,
    rng: RngSpec,
) -> Result<LengthReport> {
    require_budget(budget)?;
    if !(0.0 < epsilon && epsilon < 0.5) {
        return Err(PercError::InvalidParameters(format!(
            "threshold epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(PercError::InvalidParameters(format!(
            "characteristic length needs p in (0, 1), got {p}"
        )));
    }
    if n_max < 1 {
        return Err(PercError::InvalidParameters(format!(
            "scan bound must be at least 1, got {n_max}"
        )));
    }
    // Below (and at) criticality crossings die out: look for estimates
    // falling below epsilon. Above, they saturate: look for 1 - epsilon.
    let upward = p > 0.5;
    let threshold = if upward { 1.0 - epsilon } else { epsilon };
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let block = rng.stream + (n as u64 - 1) * budget;
        let est = estimate_hc(
            n,
            n,
            p,
            CrossingVariant::Strict,
            budget,
            RngSpec::new(rng.seed, block),
        )?;
        let (m, se) = (est.mean(), est.stderr());
        rows.push((n, est));
        let crossed = if upward {
            m - 3.0 * se >= threshold
        } else {
            m + 3.0 * se <= threshold
        };
        let clear_of_threshold = if upward {
            m + 3.0 * se < threshold
        } else {
            m - 3.0 * se > threshold
        };
        if crossed {
            return Ok(LengthReport {
                outcome: LengthOutcome::Determined(n),
                rows,
            });
        }
        if !clear_of_threshold {
            return Ok(LengthReport {
                outcome: LengthOutcome::Unresolved { n },
                rows,
            });
        }
    }
    Ok(LengthReport {
        outcome: LengthOutcome::AtLeast(n_max),
        rows,
    })
}

/// P(largest cluster size in the box of radius n lies strictly inside
/// (lo, hi)), by direct sampling.
pub fn max_cluster_interval_estimate(
    n: i64,
    p: f64,
    lo: f64,
    hi: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Estimate> {
    require_budget(budget)?;
    let window = Region::centered_box(n)?;
    let sampler = Sampler::new(window.clone(), p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let successes = mc_fold(
        &sampler,
        streams.clone(),
        || 0u64,
        |count, _, config| {
            let m = label_clusters_in(config, &window).max_cluster_size().unwrap() as f64;
            if lo < m && m < hi {
                *count += 1;
            }
        },
        |a, b| a + b,
    );
    Ok(Estimate::indicator(successes, budget, rng.seed, streams))
}

/// One scale of the main-interval experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TheoremOneRow {
    pub n: i64,
    /// One-arm estimate, from a stream block disjoint from the event's.
    pub pi_hat: Estimate,
    /// P(largest cluster in (a n^2 pi_hat, b n^2 pi_hat)).
    pub event: Estimate,
    /// Same samples, interval endpoints recomputed at pi_hat -/+ 2 stderr:
    /// the sensitivity of the verdict to one-arm estimation noise.
    pub event_low: Estimate,
    pub event_high: Estimate,
}

/// For each n: estimate the one-arm probability, then with independent
/// samples the probability that the largest cluster lands in
/// (a n^2 pi_hat(n), b n^2 pi_hat(n)). Streams: scale i uses blocks
/// [2i*budget, (2i+1)*budget) for pi_hat and [(2i+1)*budget, (2i+2)*budget)
/// for the interval event, offset from rng.stream.
pub fn theorem_one_experiment(
    a: f64,
    b: f64,
    n_list: &[i64],
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Vec<TheoremOneRow>> {
    require_budget(budget)?;
    if !(0.0 < a && a < b) {
        return Err(PercError::InvalidParameters(format!(
            "interval factors need 0 < a < b, got a={a}, b={b}"
        )));
    }
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let pi_block = rng.stream + 2 * i as u64 * budget;
        let event_block = pi_block + budget;
        let pi_hat = estimate_pi(n, p, budget, RngSpec::new(rng.seed, pi_block))?;

        let scale = (n * n) as f64;
        let variants = [
            pi_hat.mean(),
            (pi_hat.mean() - 2.0 * pi_hat.stderr()).max(0.0),
            (pi_hat.mean() + 2.0 * pi_hat.stderr()).min(1.0),
        ];
        let intervals: Vec<(f64, f64)> =
            variants.iter().map(|&v| (a * scale * v, b * scale * v)).collect();

        let window = Region::centered_box(n)?;
        let sampler = Sampler::new(window.clone(), p, rng.seed)?;
        let streams = event_block..event_block + budget;
        let counts = mc_fold(
            &sampler,
            streams.clone(),
            || [0u64; 3],
            |counts, _, config| {
                let m = label_clusters_in(config, &window).max_cluster_size().unwrap() as f64;
                for (c, &(lo, hi)) in counts.iter_mut().zip(&intervals) {
                    if lo < m && m < hi {
                        *c += 1;
                    }
                }
            },
            |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
        );
        rows.push(TheoremOneRow {
            n,
            pi_hat,
            event: Estimate::indicator(counts[0], budget, rng.seed, streams.clone()),
            event_low: Estimate::indicator(counts[1], budget, rng.seed, streams.clone()),
            event_high: Estimate::indicator(counts[2], budget, rng.seed, streams),
        });
    }
    Ok(rows)
}

/// Mean of the boundary-touch count of the rectangle [-k,k] x [-n,n].
pub fn estimate_boundary_touch(
    k: i64,
    n: i64,
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Estimate> {
    require_budget(budget)?;
    let window = Region::centered_rect(k, n)?;
    let sampler = Sampler::new(window.clone(), p, rng.seed)?;
    let streams = rng.stream..rng.stream + budget;
    let (sum, sum_sq) = mc_fold(
        &sampler,
        streams.clone(),
        || (0u128, 0u128),
        |acc, _, config| {
            let y = boundary_touch_count_in(config, &window) as u128;
            acc.0 += y;
            acc.1 += y * y;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    Ok(Estimate::from_int_sums(sum, sum_sq, budget, rng.seed, streams))
}

/// Report of the one-arm power-law checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PiBoundsReport {
    /// Critical one-arm estimates at the dyadic scales.
    pub pi_critical: Vec<(i64, Estimate)>,
    /// Critical one-arm estimates at every radius up to the largest
    /// cumulative-sum scale (empty when no sum scales were requested).
    pub pi_small: Vec<(i64, Estimate)>,
    /// Off-critical one-arm estimates (empty when p = 1/2).
    pub pi_off: Vec<(i64, Estimate)>,
    /// Rectangle boundary-touch means per (k, n) pair.
    pub moment_rows: Vec<(i64, i64, Estimate)>,
    /// Fitted one-arm exponent: negated least-squares slope of
    /// log pi_hat against log n over the dyadic scales.
    pub exponent: f64,
    pub checks: Vec<CheckLine>,
}

fn ratio_with_se(num: &Estimate, den: &Estimate) -> (f64, f64) {
    let (mn, md) = (num.mean(), den.mean());
    let r = mn / md;
    let se = r * ((num.stderr() / mn).powi(2) + (den.stderr() / md).powi(2)).sqrt();
    (r, se)
}

fn flag_undersampled(checks: &mut Vec<CheckLine>, label: &str, est: &Estimate) {
    if let Some(s) = est.successes() {
        let rare = s.min(est.samples() - s);
        if rare < 25 {
            checks.push(CheckLine::new(
                format!("undersampled {label}"),
                false,
                format!("only {rare} occurrences of the rarer outcome; widen the budget"),
            ));
        }
    }
}

/// Power-law and comparability checks for the one-arm probability:
/// dyadic ratio bounds with constants fitted at the smallest pair, the
/// cumulative-sum bound, off-critical comparability (skipped at p = 1/2
/// where it is vacuous), and rectangle boundary-touch moments. `scales`
/// are the dyadic radii; `sum_scales` the radii for the cumulative-sum
/// and rectangle checks (every radius up to their maximum is estimated,
/// so keep them small).
pub fn pi_bounds_check(
    scales: &[i64],
    sum_scales: &[i64],
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<PiBoundsReport> {
    require_budget(budget)?;
    if scales.len() < 2 {
        return Err(PercError::InvalidParameters(
            "need at least two dyadic scales to fit a ratio".into(),
        ));
    }
    if scales.windows(2).any(|w| w[1] != 2 * w[0]) || scales[0] < 1 {
        return Err(PercError::InvalidParameters(
            "scales must be consecutive dyadic radii (each twice the previous)".into(),
        ));
    }
    let mut sum_scales = sum_scales.to_vec();
    sum_scales.sort_unstable();
    sum_scales.dedup();
    if sum_scales.first().is_some_and(|&n| n < 1) {
        return Err(PercError::InvalidParameters(
            "cumulative-sum scales must be positive".into(),
        ));
    }

    let mut cursor = rng.stream;
    let mut block = || {
        let b = cursor;
        cursor += budget;
        b
    };
    let mut checks = Vec::new();

    let mut pi_critical = Vec::new();
    for &n in scales {
        let est = estimate_pi(n, 0.5, budget, RngSpec::new(rng.seed, block()))?;
        flag_undersampled(&mut checks, &format!("pi({n})"), &est);
        pi_critical.push((n, est));
    }

    // Least-squares slope of log pi against log n.
    let logs: Vec<(f64, f64)> = pi_critical
        .iter()
        .map(|(n, e)| ((*n as f64).ln(), e.mean().ln()))
        .collect();
    let len = logs.len() as f64;
    let (mx, my) = (
        logs.iter().map(|l| l.0).sum::<f64>() / len,
        logs.iter().map(|l| l.1).sum::<f64>() / len,
    );
    let slope = logs.iter().map(|l| (l.0 - mx) * (l.1 - my)).sum::<f64>()
        / logs.iter().map(|l| (l.0 - mx) * (l.0 - mx)).sum::<f64>();
    let exponent = -slope;

    // Dyadic ratio bounds, constants fitted on the smallest pair.
    let (r0, _) = ratio_with_se(&pi_critical[0].1, &pi_critical[1].1);
    let c2 = r0 / 2f64.sqrt();
    let c1 = r0 / 2f64.powf(exponent);
    for w in pi_critical.windows(2).skip(1) {
        let ((m, em), (n, en)) = (&w[0], &w[1]);
        let (r, se) = ratio_with_se(em, en);
        let upper = c2 * 2f64.sqrt();
        checks.push(CheckLine::new(
            format!("ratio upper bound at ({m}, {n})"),
            r <= upper + 4.0 * se,
            format!("pi({m})/pi({n}) = {r:.4} (se {se:.4}) vs C2*sqrt2 = {upper:.4}"),
        ));
        let lower = c1 * 2f64.powf(exponent);
        checks.push(CheckLine::new(
            format!("ratio lower bound at ({m}, {n})"),
            lower <= r + 4.0 * se,
            format!("C1*2^alpha = {lower:.4} vs pi({m})/pi({n}) = {r:.4} (se {se:.4})"),
        ));
    }

    // Cumulative sum bound: sum of pi(k) up to n against C3 * n * pi(n).
    let mut pi_small = Vec::new();
    if let Some(&max_sum) = sum_scales.last() {
        for k in 0..=max_sum {
            let est = estimate_pi(k, 0.5, budget, RngSpec::new(rng.seed, block()))?;
            pi_small.push((k, est));
        }
        let partial = |n: i64| -> (f64, f64) {
            let upto = &pi_small[..=n as usize];
            let sum: f64 = upto.iter().map(|(_, e)| e.mean()).sum();
            let var: f64 = upto.iter().map(|(_, e)| e.stderr().powi(2)).sum();
            (sum, var.sqrt())
        };
        let n0 = sum_scales[0];
        let (s0, _) = partial(n0);
        let c3 = s0 / (n0 as f64 * pi_small[n0 as usize].1.mean());
        for &n in &sum_scales[1..] {
            let (s, se_s) = partial(n);
            let tail = &pi_small[n as usize].1;
            let bound = c3 * n as f64 * tail.mean();
            let se = (se_s.powi(2) + (c3 * n as f64 * tail.stderr()).powi(2)).sqrt();
            checks.push(CheckLine::new(
                format!("cumulative sum bound at n={n}"),
                s <= bound + 4.0 * se,
                format!("sum = {s:.3} (se {se:.3}) vs C3*n*pi(n) = {bound:.3}"),
            ));
        }
    }

    // Off-critical comparability: pi_p(n) within fitted constant factors
    // of pi(n) while n stays below the characteristic length of p.
    let mut pi_off = Vec::new();
    if p != 0.5 {
        for &n in scales {
            let est = estimate_pi(n, p, budget, RngSpec::new(rng.seed, block()))?;
            flag_undersampled(&mut checks, &format!("pi_p({n})"), &est);
            pi_off.push((n, est));
        }
        let (f0, _) = ratio_with_se(&pi_off[0].1, &pi_critical[0].1);
        for (off, crit) in pi_off.iter().zip(&pi_critical).skip(1) {
            let (f, se) = ratio_with_se(&off.1, &crit.1);
            checks.push(CheckLine::new(
                format!("off-critical comparability at n={}", off.0),
                (f0 <= f + 4.0 * se) && (f <= f0 + 4.0 * se),
                format!("pi_p/pi = {f:.4} (se {se:.4}) vs fitted {f0:.4}"),
            ));
        }
    }

    // Rectangle moment bound: E[boundary touch of [-k,k]x[-n,n]] against
    // C6 * k * n * pi(min(k,n)).
    let mut moment_rows = Vec::new();
    if !sum_scales.is_empty() {
        let mut c6 = None;
        for i in 0..sum_scales.len() {
            for j in i..sum_scales.len() {
                let (k, n) = (sum_scales[i], sum_scales[j]);
                let est =
                    estimate_boundary_touch(k, n, 0.5, budget, RngSpec::new(rng.seed, block()))?;
                let pi_min = pi_small[k.min(n) as usize].1.mean();
                let rhs_unit = k as f64 * n as f64 * pi_min;
                match c6 {
                    None => c6 = Some(est.mean() / rhs_unit),
                    Some(c6) => {
                        let bound = c6 * rhs_unit;
                        checks.push(CheckLine::new(
                            format!("rectangle moment bound at ({k}, {n})"),
                            est.mean() <= bound + 4.0 * est.stderr(),
                            format!(
                                "E = {:.3} (se {:.3}) vs C6*k*n*pi = {bound:.3}",
                                est.mean(),
                                est.stderr()
                            ),
                        ));
                    }
                }
                moment_rows.push((k, n, est));
            }
        }
    }

    Ok(PiBoundsReport {
        pi_critical,
        pi_small,
        pi_off,
        moment_rows,
        exponent,
        checks,
    })
}

/// One scale of the annulus-reach tail experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct YRow {
    pub m: i64,
    pub pi_hat: Estimate,
    /// Mean of Y(m) (sites of the inner box reached from the doubled
    /// box's boundary).
    pub mean: Estimate,
    /// Mean of Y(m)^2.
    pub mean_sq: Estimate,
    /// Tail threshold c * m^2 * pi_hat(m) used for this row.
    pub threshold: f64,
    /// P(Y >= threshold), where zero-valued Y never counts: the theorem's
    /// level is positive, so a zero threshold is read as infinitesimal.
    pub tail: Estimate,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct YMomentReport {
    /// Tail factor: supplied, or fitted at the smallest scale so the
    /// first tail probability is 1/2 (threshold just below the sample
    /// median).
    pub c: f64,
    pub rows: Vec<YRow>,
    pub checks: Vec<CheckLine>,
}

/// Annulus-reach moments and tail stability. Per scale m (ascending):
/// estimate pi_hat(m), sample Y(m) on the doubled box, and record the
/// tail probability at threshold c * m^2 * pi_hat(m). With `c_override`
/// unset, c is fitted at the smallest scale as median(Y) / (m^2 pi_hat).
/// Larger scales must keep the tail above `floor`.
pub fn y_moment_check(
    m_list: &[i64],
    p: f64,
    floor: f64,
    c_override: Option<f64>,
    budget: u64,
    rng: RngSpec,
) -> Result<YMomentReport> {
    require_budget(budget)?;
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) || m_list[0] < 1 {
        return Err(PercError::InvalidParameters(
            "annulus scales must be positive and strictly increasing".into(),
        ));
    }
    let mut cursor = rng.stream;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut c = c_override;
    for &m in m_list {
        let pi_hat = estimate_pi(m, p, budget, RngSpec::new(rng.seed, cursor))?;
        cursor += budget;

        let window = Region::centered_box(2 * m)?;
        let inner = Region::centered_box(m)?;
        let boundary = window.boundary_sites();
        let inner_sites = inner.sites();
        let sampler = Sampler::new(window.clone(), p, rng.seed)?;
        let streams = cursor..cursor + budget;
        cursor += budget;
        let values: Vec<u64> = crate::exec::mc_collect(&sampler, streams.clone(), |_, config| {
            let labeling = label_clusters_in(config, &window);
            let mut reached = std::collections::HashSet::new();
            for &s in &boundary {
                reached.insert(labeling.root_of(s).unwrap());
            }
            inner_sites
                .iter()
                .filter(|&&s| reached.contains(&labeling.root_of(s).unwrap()))
                .count() as u64
        });

        // Fit: threshold half a unit below the sample median, so for the
        // integer-valued reach count the tail at the fitting scale is the
        // fraction of samples at or above the median (1/2 up to ties),
        // immune to float rounding of the round trip through c.
        let c = *c.get_or_insert_with(|| {
            let mut sorted = values.clone();
            sorted.sort_unstable();
            let median = sorted[sorted.len() / 2] as f64;
            (median - 0.5).max(0.0) / ((m * m) as f64 * pi_hat.mean())
        });
        let threshold = c * (m * m) as f64 * pi_hat.mean();
        let tail_hits = values
            .iter()
            .filter(|&&y| y > 0 && y as f64 >= threshold)
            .count() as u64;

        let (mut sum, mut sum_sq, mut sum4) = (0u128, 0u128, 0u128);
        for &y in &values {
            let y = y as u128;
            sum += y;
            sum_sq += y * y;
            sum4 += y * y * y * y;
        }
        let mean = Estimate::from_int_sums(sum, sum_sq, budget, rng.seed, streams.clone());
        let mean_sq = Estimate::from_int_sums(sum_sq, sum4, budget, rng.seed, streams.clone());
        let tail = Estimate::indicator(tail_hits, budget, rng.seed, streams);

        // Second-moment (Paley-Zygmund) consistency: the analytic bound
        // P(Y >= E/2) >= E^2 / (4 E[Y^2]) must hold within noise.
        if mean_sq.mean() > 0.0 {
            let half = mean.mean() / 2.0;
            let hits = values.iter().filter(|&&y| y as f64 >= half).count() as f64;
            let observed = hits / budget as f64;
            let bound = mean.mean().powi(2) / (4.0 * mean_sq.mean());
            let se = (observed * (1.0 - observed) / budget as f64).sqrt();
            checks.push(CheckLine::new(
                format!("second-moment tail bound at m={m}"),
                observed >= bound - 4.0 * se,
                format!("P(Y >= E/2) = {observed:.4} (se {se:.4}) vs bound {bound:.4}"),
            ));
        }
        rows.push(YRow {
            m,
            pi_hat,
            mean,
            mean_sq,
            threshold,
            tail,
        });
    }
    for row in rows.iter().skip(if c_override.is_some() { 0 } else { 1 }) {
        checks.push(CheckLine::new(
            format!("tail floor at m={}", row.m),
            row.tail.mean() >= floor,
            format!(
                "P(Y >= {:.2}) = {:.4} vs floor {floor}",
                row.threshold,
                row.tail.mean()
            ),
        ));
    }
    Ok(YMomentReport {
        c: c.unwrap_or(0.0),
        rows,
        checks,
    })
}

/// One scale of the small-largest-cluster experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SmallMaxRow {
    pub n: i64,
    pub pi_hat: Estimate,
    /// K * n^2 * pi_hat(n).
    pub threshold: f64,
    /// P(largest cluster < threshold).
    pub below: Estimate,
}

/// Per scale: estimate the probability that the largest cluster stays
/// below K n^2 pi_hat(n). Two stream blocks per scale (one-arm, then the
/// cluster event), advancing from rng.stream.
pub fn small_max_cluster_check(
    k_factor: f64,
    n_list: &[i64],
    p: f64,
    budget: u64,
    rng: RngSpec,
) -> Result<Vec<SmallMaxRow>> {
    require_budget(budget)?;
    if k_factor <= 0.0 {
        return Err(PercError::InvalidParameters(format!(
            "cluster factor must be positive, got {k_factor}"
        )));
    }
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let pi_block = rng.stream + 2 * i as u64 * budget;
        let pi_hat = estimate_pi(n, p, budget, RngSpec::new(rng.seed, pi_block))?;
        let threshold = k_factor * (n * n) as f64 * pi_hat.mean();
        let below = max_cluster_interval_estimate(
            n,
            p,
            0.0,
            threshold,
            budget,
            RngSpec::new(rng.seed, pi_block + budget),
        )?;
        rows.push(SmallMaxRow {
            n,
            pi_hat,
            threshold,
            below,
        });
    }
    Ok(rows)
}
