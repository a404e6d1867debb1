//! Trend statistics: per-seed deltas summarized by mean, sign, and a
//! seeded-bootstrap 95% interval. With a handful of seeds the interval is
//! wide; the report states the direction without hard-gating on it.

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub mean: f64,
    pub sign: char,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Summarize per-seed deltas (positive = the second condition is better when
/// lower-is-better metrics are subtracted as first - second).
pub fn bootstrap_trend(deltas: &[f64], seed: u64) -> TrendSummary {
    assert!(!deltas.is_empty());
    let n = deltas.len();
    let mean = deltas.iter().sum::<f64>() / n as f64;

    let reps = 1000;
    let mut rng = Rng::from_parts(&[seed, 0xb007]);
    let mut means: Vec<f64> = (0..reps)
        .map(|_| (0..n).map(|_| deltas[rng.below(n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = ((reps as f64) * 0.025).floor() as usize;
    let hi_idx = (((reps as f64) * 0.975).ceil() as usize - 1).min(reps - 1);
    TrendSummary {
        mean,
        sign: if mean > 0.0 {
            '+'
        } else if mean < 0.0 {
            '-'
        } else {
            '0'
        },
        ci_low: means[lo_idx],
        ci_high: means[hi_idx],
        n,
    }
}

impl std::fmt::Display for TrendSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "mean={} sign={} ci95=[{},{}] seeds={}",
            self.mean, self.sign, self.ci_low, self.ci_high, self.n
        )
    }
}
