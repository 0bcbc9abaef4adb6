//! Replica execution: fold an accumulator over a range of sampled streams.
//!
//! Each stream index yields one configuration, a pure function of
//! `(seed, stream)`, so the work can be chunked arbitrarily. With the
//! `parallel` feature the fold runs on the rayon pool; the sequential
//! driver is always available and is the fallback when the feature is off.
//!
//! Parallel and sequential runs produce bit-identical results whenever
//! `merge` is exactly associative and `step` commutes with it (true for
//! the integer accumulators used throughout this crate). Floating-point
//! accumulators should be folded sequentially or collected in stream order
//! via [`mc_collect`].

use std::ops::Range;

use crate::lattice::{Configuration, Sampler};

/// Sequential fold over `streams`. One scratch configuration is reused for
/// every replica; `merge` is accepted for signature parity with
/// [`mc_fold`] but never called.
pub fn mc_fold_seq<A, I, S, M>(
    sampler: &Sampler,
    streams: Range<u64>,
    init: I,
    step: S,
    _merge: M,
) -> A
where
    I: Fn() -> A,
    S: Fn(&mut A, u64, &Configuration),
    M: Fn(A, A) -> A,
{
    let mut acc = init();
    let mut scratch = sampler.blank();
    for stream in streams {
        sampler.fill(&mut scratch, stream);
        step(&mut acc, stream, &scratch);
    }
    acc
}

/// Fold `step` over all replicas in `streams` and combine partial
/// accumulators with `merge` (associative; `init()` must be its identity).
#[cfg(feature = "parallel")]
pub fn mc_fold<A, I, S, M>(sampler: &Sampler, streams: Range<u64>, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &Configuration) + Sync,
    M: Fn(A, A) -> A + Send + Sync,
{
    use rayon::prelude::*;

    streams
        .into_par_iter()
        .fold(
            || (init(), sampler.blank()),
            |(mut acc, mut scratch), stream| {
                sampler.fill(&mut scratch, stream);
                step(&mut acc, stream, &scratch);
                (acc, scratch)
            },
        )
        .map(|(acc, _)| acc)
        .reduce_with(merge)
        .unwrap_or_else(init)
}

#[cfg(not(feature = "parallel"))]
pub fn mc_fold<A, I, S, M>(sampler: &Sampler, streams: Range<u64>, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &Configuration) + Sync,
    M: Fn(A, A) -> A + Send + Sync,
{
    mc_fold_seq(sampler, streams, init, step, merge)
}

/// Fold over bare stream indices, for estimators that resolve edges on
/// demand instead of filling configurations. Same merge contract as
/// [`mc_fold`]; per-worker scratch can live inside the accumulator.
#[cfg(feature = "parallel")]
pub fn stream_fold<A, I, S, M>(streams: Range<u64>, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(A, A) -> A + Send + Sync,
{
    use rayon::prelude::*;

    streams
        .into_par_iter()
        .fold(&init, |mut acc, stream| {
            step(&mut acc, stream);
            acc
        })
        .reduce_with(merge)
        .unwrap_or_else(init)
}

#[cfg(not(feature = "parallel"))]
pub fn stream_fold<A, I, S, M>(streams: Range<u64>, init: I, step: S, _merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(A, A) -> A + Send + Sync,
{
    let mut acc = init();
    for stream in streams {
        step(&mut acc, stream);
    }
    acc
}

/// Map bare stream indices to values, returned in stream order regardless
/// of scheduling.
pub fn stream_collect<T, F>(streams: Range<u64>, map: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;

        streams.into_par_iter().map(map).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        streams.map(map).collect()
    }
}

/// Map every replica to a value, returned in stream order regardless of
/// scheduling. Used for per-sample dumps and floating-point summaries that
/// must not depend on chunking.
pub fn mc_collect<T, F>(sampler: &Sampler, streams: Range<u64>, map: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &Configuration) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;

        streams
            .into_par_iter()
            .map_init(
                || sampler.blank(),
                |scratch, stream| {
                    sampler.fill(scratch, stream);
                    map(stream, scratch)
                },
            )
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = sampler.blank();
        streams
            .map(|stream| {
                sampler.fill(&mut scratch, stream);
                map(stream, &scratch)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Region;

    fn sampler() -> Sampler {
        Sampler::new(Region::centered_box(4).unwrap(), 0.5, 99).unwrap()
    }

    fn open_count_fold(run: impl FnOnce() -> (u64, u64)) -> (u64, u64) {
        run()
    }

    #[test]
    fn parallel_and_sequential_folds_agree_bitwise() {
        let s = sampler();
        let init = || (0u64, 0u64);
        let step = |acc: &mut (u64, u64), _stream: u64, c: &Configuration| {
            acc.0 += c.open_count() as u64;
            acc.1 += 1;
        };
        let merge = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
        let par = open_count_fold(|| mc_fold(&s, 0..500, init, step, merge));
        let seq = open_count_fold(|| mc_fold_seq(&s, 0..500, init, step, merge));
        assert_eq!(par, seq);
        assert_eq!(par.1, 500);
    }

    #[test]
    fn empty_stream_range_yields_init() {
        let s = sampler();
        let total = mc_fold(&s, 5..5, || 7u64, |acc, _, _| *acc += 1, |a, b| a + b);
        assert_eq!(total, 7);
    }

    #[test]
    fn collect_preserves_stream_order() {
        let s = sampler();
        let counts = mc_collect(&s, 0..64, |stream, c| (stream, c.open_count()));
        let seq: Vec<_> = (0..64)
            .map(|stream| (stream, s.sample(stream).open_count()))
            .collect();
        assert_eq!(counts, seq);
    }
}
