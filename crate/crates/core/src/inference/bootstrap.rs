use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delta::{check_level, CIEstimate, CIMethod};
use crate::error::{Error, Result};
use crate::metrics::{count_groups, ratio, GroupedCounts, Metric};

pub const MIN_REPLICATES: usize = 100;
/// Largest tolerated share of replicates on which the statistic is undefined.
pub const MAX_UNDEFINED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub ci: CIEstimate,
    pub replicates: usize,
    pub undefined: usize,
    pub seed: u64,
}

/// Percentile of sorted `v` with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval from `b` row resamples with replacement.
///
/// Replicate `i` draws from its own ChaCha stream of `seed`, so results do not
/// depend on thread scheduling.
pub fn bootstrap_ci(
    y: &[u8],
    s: &[u8],
    yhat: Option<&[u8]>,
    metric: Metric,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapEstimate> {
    check_level(level)?;
    if b < MIN_REPLICATES {
        return Err(Error::Argument(format!(
            "need at least {MIN_REPLICATES} bootstrap replicates, got {b}"
        )));
    }
    let full = count_groups(y, s, yhat)?;
    let point = ratio(&full, metric)?.value;

    // one code per row: g * 4 + y * 2 + s
    let codes: Vec<u8> = (0..y.len())
        .map(|i| yhat.map_or(0, |p| p[i]) * 4 + y[i] * 2 + s[i])
        .collect();
    let n = codes.len();
    let joint = yhat.is_some();

    let values: Vec<Option<f64>> = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let mut cells = [0u64; 8];
            for _ in 0..n {
                cells[codes[rng.gen_range(0..n)] as usize] += 1;
            }
            let mut m = [[[0u64; 2]; 2]; 2];
            for (code, &c) in cells.iter().enumerate() {
                m[code >> 2][(code >> 1) & 1][code & 1] = c;
            }
            let counts = if joint {
                GroupedCounts::from_joint(m)
            } else {
                GroupedCounts::from_cells(m[0])
            };
            ratio(&counts, metric).ok().map(|d| d.value)
        })
        .collect();

    let mut defined: Vec<f64> = values.into_iter().flatten().collect();
    let undefined = b - defined.len();
    if undefined as f64 > MAX_UNDEFINED_FRACTION * b as f64 || defined.is_empty() {
        return Err(Error::Instability {
            undefined,
            replicates: b,
        });
    }
    defined.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(BootstrapEstimate {
        ci: CIEstimate {
            metric,
            method: CIMethod::BootstrapPercentile,
            point,
            sigma: None,
            n: n as u64,
            level,
            lower: percentile(&defined, alpha / 2.0),
            upper: percentile(&defined, 1.0 - alpha / 2.0),
        },
        replicates: b,
        undefined,
        seed,
    })
}
