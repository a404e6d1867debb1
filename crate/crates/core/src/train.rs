//! Joint training: one optimizer step over whichever task batches are present.
//!
//! Each present task runs its own forward and backward; the trunk gradient
//! accumulates across them, so the trunk update sees the sum of all task
//! gradients while each head only ever sees its own. Heads whose task has no
//! batch this step are left completely untouched, optimizer state included.

use crate::data::{self, Dataset, GraspBatch, GraspSample, PokeBatch, PokeSample, PushBatch, PushSample};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::loss;
use crate::net::{MultiTaskNet, NetConfig};
use crate::ops::Mode;
use crate::optim::{RmsProp, RmsPropConfig};
use crate::rng::Rng;

pub struct JointBatches {
    pub grasp: Option<GraspBatch>,
    pub push: Option<PushBatch>,
    pub poke: Option<PokeBatch>,
}

/// Per-task batch losses from one step; absent tasks report nothing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLosses {
    pub grasp: Option<f64>,
    pub push: Option<f64>,
    pub poke: Option<f64>,
}

impl BatchLosses {
    fn check_finite(&self) -> Result<()> {
        for (task, v) in
            [("grasp", self.grasp), ("push", self.push), ("poke", self.poke)]
        {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::numeric(format!("{task} loss is {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Run the present tasks' forwards and losses without touching parameters,
/// batch-norm state, or the generator (eval mode, inference graph).
pub fn evaluate_losses(net: &mut MultiTaskNet, batches: &JointBatches) -> Result<BatchLosses> {
    let mut rng = Rng::seed_from(0); // eval mode draws nothing
    let mut out = BatchLosses::default();
    if let Some(b) = &batches.grasp {
        let mut g = Graph::inference();
        let logits = net.grasp_forward(&mut g, &b.patches, Mode::Eval, &mut rng)?;
        out.grasp = Some(loss::grasp_loss(&mut g, &logits, &b.thetas, &b.labels)?.item()?);
    }
    if let Some(b) = &batches.push {
        let mut g = Graph::inference();
        let pred = net.push_forward(&mut g, &b.begin, &b.end, Mode::Eval, &mut rng)?;
        out.push = Some(loss::push_loss(&mut g, &pred, &b.actions)?.item()?);
    }
    if let Some(b) = &batches.poke {
        let mut g = Graph::inference();
        let pred = net.poke_forward(&mut g, &b.images, Mode::Eval, &mut rng)?;
        out.poke = Some(loss::poke_loss(&mut g, &pred, &b.responses)?.item()?);
    }
    Ok(out)
}

/// The backward phase of a joint step: zero all gradients, then run each
/// present task's forward, loss, and backward in the fixed grasp/push/poke
/// order. Trunk gradients accumulate across tasks; each head's gradient
/// comes only from its own task.
pub fn accumulate_joint_gradients(
    net: &mut MultiTaskNet,
    batches: &JointBatches,
    rng: &mut Rng,
) -> Result<BatchLosses> {
    if batches.grasp.is_none() && batches.push.is_none() && batches.poke.is_none() {
        return Err(Error::contract("joint_step", "no task batch present"));
    }

    for (_, p) in net.named_parameters() {
        p.zero_grad();
    }

    let mut losses = BatchLosses::default();
    if let Some(b) = &batches.grasp {
        let mut g = Graph::new();
        let logits = net.grasp_forward(&mut g, &b.patches, Mode::Train, rng)?;
        let l = loss::grasp_loss(&mut g, &logits, &b.thetas, &b.labels)?;
        losses.grasp = Some(l.item()?);
        g.backward(&l)?;
    }
    if let Some(b) = &batches.push {
        let mut g = Graph::new();
        let pred = net.push_forward(&mut g, &b.begin, &b.end, Mode::Train, rng)?;
        let l = loss::push_loss(&mut g, &pred, &b.actions)?;
        losses.push = Some(l.item()?);
        g.backward(&l)?;
    }
    if let Some(b) = &batches.poke {
        let mut g = Graph::new();
        let pred = net.poke_forward(&mut g, &b.images, Mode::Train, rng)?;
        let l = loss::poke_loss(&mut g, &pred, &b.responses)?;
        losses.poke = Some(l.item()?);
        g.backward(&l)?;
    }
    losses.check_finite()?;
    Ok(losses)
}

/// One joint optimizer step.
///
/// The trunk is updated with the summed gradient of every present task's
/// batch loss; each head group is updated only when its own batch is present.
/// The iteration counter advances once regardless of how many tasks ran.
pub fn joint_step(
    net: &mut MultiTaskNet,
    opt: &mut RmsProp,
    batches: &JointBatches,
    rng: &mut Rng,
) -> Result<BatchLosses> {
    let losses = accumulate_joint_gradients(net, batches, rng)?;

    let lr = opt.effective_lr();
    for (name, p) in net.named_parameters() {
        let active = if name.starts_with("trunk.") {
            true // some task is present, so the trunk always has gradient
        } else if name.starts_with("grasp.") {
            batches.grasp.is_some()
        } else if name.starts_with("push.") {
            batches.push.is_some()
        } else {
            batches.poke.is_some()
        };
        if active {
            opt.apply(&name, &p, lr);
        }
    }
    opt.advance_iteration();
    Ok(losses)
}

/// Training data pools; an empty pool means that task is absent.
#[derive(Default, Clone)]
pub struct TrainData {
    pub grasp: Vec<GraspSample>,
    pub push: Vec<PushSample>,
    pub poke: Vec<PokeSample>,
}

impl TrainData {
    pub fn add(&mut self, ds: Dataset) {
        match ds {
            Dataset::Grasp(mut v) => self.grasp.append(&mut v),
            Dataset::Push(mut v) => self.push.append(&mut v),
            Dataset::Poke(mut v) => self.poke.append(&mut v),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grasp.is_empty() && self.push.is_empty() && self.poke.is_empty()
    }
}

/// Drives repeated joint steps: samples per-task batches with replacement
/// (independently per task and step) from one seeded stream that also feeds
/// dropout, so a run is a pure function of (data, config, seed).
pub struct Trainer {
    pub net: MultiTaskNet,
    pub opt: RmsProp,
    pub rng: Rng,
    pub batch_size: usize,
    pub data: TrainData,
}

impl Trainer {
    pub fn new(
        net_config: NetConfig,
        opt_config: RmsPropConfig,
        batch_size: usize,
        seed: u64,
        data: TrainData,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::contract("trainer", "batch size must be positive"));
        }
        if data.is_empty() {
            return Err(Error::contract("trainer", "no training data for any task"));
        }
        Ok(Trainer {
            net: MultiTaskNet::new(net_config, seed),
            opt: RmsProp::new(opt_config),
            rng: Rng::from_parts(&[seed, 0x747261696e]), // "train"
            batch_size,
            data,
        })
    }

    /// Reassemble a trainer around restored model/optimizer/rng state.
    pub fn from_parts(
        net: MultiTaskNet,
        opt: RmsProp,
        rng: Rng,
        batch_size: usize,
        data: TrainData,
    ) -> Self {
        Trainer { net, opt, rng, batch_size, data }
    }

    pub fn iteration(&self) -> u64 {
        self.opt.iteration()
    }

    fn sample_indices(&mut self, len: usize) -> Vec<usize> {
        (0..self.batch_size).map(|_| self.rng.below(len)).collect()
    }

    /// Sample one batch per non-empty task and take a joint step.
    pub fn step(&mut self) -> Result<BatchLosses> {
        let grasp = if self.data.grasp.is_empty() {
            None
        } else {
            let idxs = self.sample_indices(self.data.grasp.len());
            Some(data::grasp_batch(&self.data.grasp, &idxs))
        };
        let push = if self.data.push.is_empty() {
            None
        } else {
            let idxs = self.sample_indices(self.data.push.len());
            Some(data::push_batch(&self.data.push, &idxs))
        };
        let poke = if self.data.poke.is_empty() {
            None
        } else {
            let idxs = self.sample_indices(self.data.poke.len());
            Some(data::poke_batch(&self.data.poke, &idxs))
        };
        let batches = JointBatches { grasp, push, poke };
        joint_step(&mut self.net, &mut self.opt, &batches, &mut self.rng)
    }

    /// Step until the iteration counter reaches `target`, reporting the last
    /// losses seen. Returns immediately if the counter is already there.
    pub fn run_to(&mut self, target: u64) -> Result<BatchLosses> {
        let mut last = BatchLosses::default();
        while self.opt.iteration() < target {
            last = self.step()?;
        }
        Ok(last)
    }
}
