//! RMSProp with momentum and a stepped learning-rate schedule.
//!
//! Per parameter element, with gradient g:
//!
//! ```text
//! a <- decay*a + (1-decay)*g^2
//! s <- momentum*s + lr_eff*g / sqrt(a + eps)
//! p <- p - s
//! ```
//!
//! where lr_eff = learning_rate * factor^floor(iteration / period), computed
//! by repeated multiplication so the scheduled values match their decimal
//! literals bit for bit. State is kept per parameter, keyed by the stable
//! parameter name, and serializes into checkpoints.
//!
//! Note the normalization makes every step magnitude close to lr_eff
//! whenever a coordinate's gradient keeps its sign for a while. Head layers
//! without batch norm can be walked into the all-negative ReLU region this
//! way at small batch sizes; the overfit acceptance test documents where
//! that bites.

use std::collections::BTreeMap;

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub schedule_period: u64,
    pub schedule_factor: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.002,
            momentum: 0.9,
            decay: 0.9,
            epsilon: 1e-8,
            schedule_period: 5000,
            schedule_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    /// Decayed mean of the squared gradient, per element.
    pub accum: Vec<f64>,
    /// Momentum buffer, per element.
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    iteration: u64,
    state: BTreeMap<String, ParamState>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        RmsProp { config, iteration: 0, state: BTreeMap::new() }
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Learning rate in effect at the current iteration.
    pub fn effective_lr(&self) -> f64 {
        self.lr_at(self.iteration)
    }

    pub fn lr_at(&self, iteration: u64) -> f64 {
        let decays = iteration / self.config.schedule_period;
        let mut lr = self.config.learning_rate;
        for _ in 0..decays {
            lr *= self.config.schedule_factor;
        }
        lr
    }

    /// Count one joint step. Called once per step, after all group updates.
    pub fn advance_iteration(&mut self) {
        self.iteration += 1;
    }

    /// Update one parameter from its accumulated gradient (absent gradient
    /// counts as zero: the accumulator decays and only momentum carries).
    pub fn apply(&mut self, name: &str, param: &Tensor, lr: f64) {
        let n = param.numel();
        let state = self
            .state
            .entry(name.to_string())
            .or_insert_with(|| ParamState { accum: vec![0.0; n], momentum: vec![0.0; n] });
        debug_assert_eq!(state.momentum.len(), n, "state size changed for {name}");

        let grad = param.grad();
        let cfg = &self.config;
        let mut data = param.data_mut();
        for i in 0..n {
            let g = grad.as_ref().map_or(0.0, |gv| gv[i]);
            let a = cfg.decay * state.accum[i] + (1.0 - cfg.decay) * g * g;
            state.accum[i] = a;
            let s = cfg.momentum * state.momentum[i] + lr * g / (a + cfg.epsilon).sqrt();
            state.momentum[i] = s;
            data[i] -= s;
        }
    }

    /// Serialized view of the per-parameter state, in stable name order.
    pub fn state_entries(&self) -> impl Iterator<Item = (&String, &ParamState)> {
        self.state.iter()
    }

    pub fn state_of(&self, name: &str) -> Option<&ParamState> {
        self.state.get(name)
    }

    /// Restore from checkpoint contents.
    pub fn restore(config: RmsPropConfig, iteration: u64, entries: Vec<(String, ParamState)>) -> Self {
        RmsProp { config, iteration, state: entries.into_iter().collect() }
    }
}
