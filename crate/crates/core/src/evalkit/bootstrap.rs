//! Percentile bootstrap.

use rand::Rng;

use crate::error::{Error, Result};

fn check(level: f64, resamples: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("level must be in (0, 1), got {level}")));
    }
    if resamples < 100 {
        return Err(Error::Parameter(format!("need >= 100 resamples, got {resamples}")));
    }
    Ok(())
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile interval of `stats` at `level`.
pub fn percentile_interval(stats: &mut [f64], level: f64) -> (f64, f64) {
    stats.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - level) / 2.0;
    (quantile_sorted(stats, alpha), quantile_sorted(stats, 1.0 - alpha))
}

/// Bootstrap distribution of a statistic over index resamples of `n` items.
pub fn bootstrap_distribution<F>(n: usize, resamples: usize, rng: &mut impl Rng, mut stat: F) -> Vec<f64>
where
    F: FnMut(&[usize]) -> f64,
{
    let mut idx = vec![0usize; n];
    (0..resamples)
        .map(|_| {
            idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
            stat(&idx)
        })
        .collect()
}

/// Percentile CI for the mean of per-example correctness values.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, rng: &mut impl Rng) -> Result<(f64, f64)> {
    check(level, resamples)?;
    if values.is_empty() {
        return Err(Error::Data("bootstrap over an empty sample".into()));
    }
    let mut stats = bootstrap_distribution(values.len(), resamples, rng, |idx| {
        idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
    });
    let (lo, hi) = percentile_interval(&mut stats, level);
    // the percentile interval of the mean always covers the sample mean in the
    // limit; clamp so finite resampling cannot exclude it
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((lo.min(mean), hi.max(mean)))
}
