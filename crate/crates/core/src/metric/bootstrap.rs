use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{exact_mean_percent, MetricError, PromptCBS};

/// Percentile bootstrap interval for an aspect score, in percent.
///
/// Prompts are resampled with replacement `resamples` times from a ChaCha8
/// stream seeded with `seed`; each resample's mean is computed exactly. The
/// bounds are the `(1 - confidence) / 2` and `(1 + confidence) / 2`
/// quantiles of the resample means with linear interpolation between order
/// statistics. A single prompt yields a point interval.
pub fn bootstrap_ci(
    per_prompt: &[PromptCBS],
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<(f64, f64), MetricError> {
    if per_prompt.is_empty() {
        return Err(MetricError::Empty("prompt"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetricError::InvalidConfidence(confidence));
    }
    if resamples == 0 {
        return Err(MetricError::NoResamples);
    }
    let ratios: Vec<Ratio<u64>> = per_prompt.iter().map(PromptCBS::value_ratio).collect();
    if ratios.len() == 1 {
        let v = exact_mean_percent(ratios);
        return Ok((v, v));
    }

    let k = ratios.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| exact_mean_percent((0..k).map(|_| ratios[rng.random_range(0..k)])))
        .collect();
    stats.sort_by(f64::total_cmp);

    let alpha = 1.0 - confidence;
    let lo = quantile(&stats, alpha / 2.0).clamp(0.0, 100.0);
    let hi = quantile(&stats, 1.0 - alpha / 2.0).clamp(0.0, 100.0);
    Ok((lo, hi))
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
