//! Seeded bootstrap resampling with percentile confidence intervals.
//!
//! Every replicate draws its RNG from a seed derived from (base seed,
//! replicate index), so parallel and serial runs produce identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::StatsError;

/// Point estimate with a percentile bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Attempts allowed per replicate slot before giving up; the total budget is
/// therefore 10x the replicate count.
const MAX_ATTEMPTS_PER_REPLICATE: u64 = 10;

/// SplitMix64 step; decorrelates per-replicate seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

fn resample_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Linear-interpolation percentile of a sorted slice, q in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Bootstraps a scalar statistic of an index-resample of a dataset of size
/// `n`. The statistic sees the original data only through the index vector.
pub fn bootstrap<F>(statistic: F, n: usize, replicates: usize, seed: u64) -> BootstrapSummary
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let identity: Vec<usize> = (0..n).collect();
    let point = statistic(&identity);
    let wrapped = |idx: &[usize]| Some(vec![statistic(idx)]);
    let (lows, highs) = replicate_percentiles(&wrapped, n, replicates, seed, 1)
        .expect("infallible statistic cannot exhaust the attempt budget");
    BootstrapSummary {
        point,
        ci_low: lows[0],
        ci_high: highs[0],
        replicates,
        seed,
    }
}

/// Vector-valued, fallible variant: the statistic may reject a resample
/// (returning `None`), in which case the replicate slot is redrawn with the
/// next derived seed, up to 10 attempts per slot.
pub fn bootstrap_multi<F>(
    statistic: F,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<BootstrapSummary>, StatsError>
where
    F: Fn(&[usize]) -> Option<Vec<f64>> + Sync,
{
    let identity: Vec<usize> = (0..n).collect();
    let points = statistic(&identity).ok_or(StatsError::BootstrapExhausted)?;
    let (lows, highs) = replicate_percentiles(&statistic, n, replicates, seed, points.len())?;
    Ok(points
        .into_iter()
        .zip(lows.into_iter().zip(highs))
        .map(|(point, (ci_low, ci_high))| BootstrapSummary {
            point,
            ci_low,
            ci_high,
            replicates,
            seed,
        })
        .collect())
}

fn replicate_percentiles<F>(
    statistic: &F,
    n: usize,
    replicates: usize,
    seed: u64,
    width: usize,
) -> Result<(Vec<f64>, Vec<f64>), StatsError>
where
    F: Fn(&[usize]) -> Option<Vec<f64>> + Sync,
{
    assert!(n >= 1 && replicates >= 1);
    let results: Vec<Option<Vec<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|slot| {
            for attempt in 0..MAX_ATTEMPTS_PER_REPLICATE {
                let replicate_seed =
                    derive_seed(seed, slot * MAX_ATTEMPTS_PER_REPLICATE + attempt);
                let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed);
                let indices = resample_indices(&mut rng, n);
                if let Some(values) = statistic(&indices) {
                    return Some(values);
                }
            }
            None
        })
        .collect();

    let mut columns = vec![Vec::with_capacity(replicates); width];
    for values in results {
        let values = values.ok_or(StatsError::BootstrapExhausted)?;
        debug_assert_eq!(values.len(), width);
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    let mut lows = Vec::with_capacity(width);
    let mut highs = Vec::with_capacity(width);
    for col in &mut columns {
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lows.push(percentile(col, 0.025));
        highs.push(percentile(col, 0.975));
    }
    Ok((lows, highs))
}
