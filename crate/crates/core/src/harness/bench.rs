//! Scaling benchmark of the two condensing pipelines on synthetic stage data.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocking::BlockStructure;
use crate::condensing::synthetic::random_stage_data;
use crate::condensing::{blocked_sensitivities, condensed_hessian, naive_condense, predicted_hessian_flops, FlopCounter};
use crate::error::Result;
use crate::model::ProblemDims;

/// Number of blocks for each horizon in a benchmark sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockCount {
    Fixed(usize),
    /// One block per interval (`M = N`).
    PerInterval,
}

impl BlockCount {
    pub fn for_horizon(self, n: usize) -> usize {
        match self {
            Self::Fixed(m) => m,
            Self::PerInterval => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    /// Median seconds of the tailored sensitivity chain plus Hessian.
    pub tailored_s: f64,
    /// Median seconds of the full reference pipeline.
    pub naive_s: f64,
    pub tailored_multiplies: u64,
    pub naive_multiplies: u64,
    pub predicted_multiplies: u64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Times both pipelines on uniform block structures for every `N` in `horizons`.
pub fn bench_condensing(dims: &ProblemDims, blocks: BlockCount, horizons: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps = reps.max(1);
    horizons
        .iter()
        .map(|&n| {
            let m = blocks.for_horizon(n);
            let bs = BlockStructure::uniform(n, m)?;
            let sd = random_stage_data(&mut rng, &bs, dims.nx, dims.nu, false);

            let mut tailored_times = Vec::with_capacity(reps);
            let mut tailored_multiplies = 0;
            for _ in 0..reps {
                let mut flops = FlopCounter::default();
                let t0 = Instant::now();
                let ghat = blocked_sensitivities(&sd, &bs);
                let h = condensed_hessian(&sd, &bs, &ghat, &mut flops);
                tailored_times.push(t0.elapsed().as_secs_f64());
                std::hint::black_box(h);
                tailored_multiplies = flops.multiplies;
            }

            let mut naive_times = Vec::with_capacity(reps);
            let mut naive_multiplies = 0;
            for _ in 0..reps {
                let mut flops = FlopCounter::default();
                let t0 = Instant::now();
                let out = naive_condense(&sd, &bs, &mut flops)?;
                naive_times.push(t0.elapsed().as_secs_f64());
                std::hint::black_box(out);
                naive_multiplies = flops.multiplies;
            }

            Ok(BenchRow {
                n,
                m,
                tailored_s: median(&mut tailored_times),
                naive_s: median(&mut naive_times),
                tailored_multiplies,
                naive_multiplies,
                predicted_multiplies: predicted_hessian_flops(dims, &bs),
            })
        })
        .collect()
}
