//! Experiment plans, data-budget apportionment, and the scale presets.

use crate::error::{Error, Result};
use crate::net::WidthScale;
use crate::world::TaskMix;

/// Split a total budget over ratios with largest-remainder rounding, so the
/// counts always sum exactly to the total. Ties go to the lower index.
pub fn apportion(total: usize, ratios: [f64; 3]) -> TaskMix {
    let mut counts = [0usize; 3];
    let mut fractions = [(0.0, 0usize); 3];
    let mut assigned = 0;
    for i in 0..3 {
        let exact = total as f64 * ratios[i];
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        fractions[i] = (exact - exact.floor(), i);
    }
    // stable order: largest fraction first, lower index wins ties
    fractions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = total.saturating_sub(assigned);
    for &(_, i) in &fractions {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    TaskMix { grasp: counts[0], push: counts[1], poke: counts[2] }
}

/// Declarative description of one data-budget experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub id: String,
    pub total: usize,
    /// (grasp, push, poke) fractions of the budget; must be nonnegative and
    /// sum to 1.
    pub ratios: [f64; 3],
    pub seeds: Vec<u64>,
    pub iterations: u64,
    pub eval_pool: usize,
    pub metrics: Vec<&'static str>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|&r| r < 0.0) {
            return Err(Error::contract("experiment_plan", "negative ratio"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::contract("experiment_plan", format!("ratios sum to {sum}, not 1")));
        }
        if self.seeds.is_empty() {
            return Err(Error::contract("experiment_plan", "no seeds"));
        }
        Ok(())
    }

    pub fn counts(&self) -> TaskMix {
        apportion(self.total, self.ratios)
    }
}

/// Desk-scale presets derived from one rational scale factor: the width
/// multiplier, batch size, iteration budget, and schedule period all shrink
/// together. Scale 1/4 is the desk default; 1/1 reproduces the full-size
/// architecture with the published schedule period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    pub width_scale: WidthScale,
    pub batch: usize,
    pub iterations: u64,
    pub schedule_period: u64,
    pub eval_pool: usize,
}

impl ScaleConfig {
    pub fn from_ratio(num: u32, den: u32) -> Result<Self> {
        let width_scale = WidthScale::new(num, den)?;
        let s = width_scale.as_f64();
        let iterations = (12_000.0 * s).round().max(1.0) as u64;
        let schedule_period = if s >= 1.0 { 5000 } else { (iterations / 2).max(1) };
        Ok(ScaleConfig {
            width_scale,
            // The published learning rate assumes large batches; below 16 the
            // per-angle gradient gets too sparse and training collapses to
            // the trivial logit-zero solution.
            batch: ((128.0 * s).round() as usize).max(16),
            iterations,
            schedule_period,
            eval_pool: 256,
        })
    }

    /// Parse "1/4" or a decimal like "0.25".
    pub fn parse(s: &str) -> Result<Self> {
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 =
                num.trim().parse().map_err(|_| Error::parse(format!("bad scale '{s}'")))?;
            let den: u32 =
                den.trim().parse().map_err(|_| Error::parse(format!("bad scale '{s}'")))?;
            return ScaleConfig::from_ratio(num, den);
        }
        let v: f64 = s.trim().parse().map_err(|_| Error::parse(format!("bad scale '{s}'")))?;
        if !(v > 0.0 && v <= 4.0) {
            return Err(Error::parse(format!("scale {v} out of range (0, 4]")));
        }
        // Render the decimal as a small rational.
        for den in [1u32, 2, 4, 8, 16, 32, 64] {
            let num = v * den as f64;
            if (num - num.round()).abs() < 1e-9 && num.round() >= 1.0 {
                return ScaleConfig::from_ratio(num.round() as u32, den);
            }
        }
        Err(Error::parse(format!("scale '{s}' is not a small rational like 1/4 or 0.25")))
    }

    pub fn desk_default() -> Self {
        ScaleConfig::from_ratio(1, 4).expect("static ratio")
    }
}
