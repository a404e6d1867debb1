//! Operation recording and the reverse pass.
//!
//! Every differentiable op appends one node to a [`Graph`] in creation order.
//! [`Graph::backward`] seeds the loss gradient with 1 and replays the nodes in
//! exact reverse creation order; each node reads its output's accumulated
//! gradient and adds contributions into its inputs' gradients. Shared
//! subexpressions (the siamese trunk) therefore sum naturally. A graph can be
//! differentiated once; a second backward without a fresh forward is an error.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

type BackwardFn = Box<dyn FnOnce()>;

struct Node {
    backward: BackwardFn,
}

/// Records the forward pass of one network evaluation.
pub struct Graph {
    nodes: Vec<Node>,
    recording: bool,
    consumed: bool,
}

impl Graph {
    /// A graph that records operations for a later backward pass.
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), recording: true, consumed: false }
    }

    /// A non-recording graph for inference: ops run, nothing is saved.
    pub fn inference() -> Self {
        Graph { nodes: Vec::new(), recording: false, consumed: false }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Whether an op should record a node for inputs with these grad flags.
    pub(crate) fn wants_grad(&self, inputs_require_grad: bool) -> bool {
        self.recording && inputs_require_grad
    }

    pub(crate) fn push(&mut self, backward: impl FnOnce() + 'static) {
        debug_assert!(self.recording);
        self.nodes.push(Node { backward: Box::new(backward) });
    }

    /// Run the reverse pass from a scalar loss, accumulating gradients into
    /// every reachable tensor that requires them.
    pub fn backward(&mut self, loss: &Tensor) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", loss.shape()),
            ));
        }
        if self.consumed {
            return Err(Error::contract(
                "backward",
                "graph already differentiated; run a fresh forward pass first",
            ));
        }
        if !self.recording {
            return Err(Error::contract("backward", "graph was built in inference mode"));
        }
        self.consumed = true;
        loss.accumulate_grad(&[1.0]);
        for node in self.nodes.drain(..).rev() {
            (node.backward)();
        }
        Ok(())
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}
