//! Dense 64-bit float tensors that can participate in a reverse-mode graph.
//!
//! A [`Tensor`] is a cheap handle (reference-counted) to row-major storage
//! plus an optional gradient buffer. Handles are cloned freely: the siamese
//! towers and the optimizer all see the same underlying buffers. Graph
//! construction and backward are single-threaded per graph; a tensor may be
//! moved to another thread once no graph holds a handle to it.

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

struct TensorInner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
}

#[derive(Clone)]
pub struct Tensor {
    inner: Rc<TensorInner>,
}

impl Tensor {
    fn new(shape: &[usize], data: Vec<f64>, requires_grad: bool) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor {
            inner: Rc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape: shape.to_vec(),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
            }),
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        Tensor::new(shape, data, false)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::from_vec(shape, vec![0.0; shape.iter().product()])
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(&[1], vec![v])
    }

    /// A learnable parameter: participates in gradient accumulation.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Self {
        Tensor::new(shape, data, true)
    }

    /// An intermediate produced by an op whose inputs require gradients.
    pub(crate) fn intermediate(shape: &[usize], data: Vec<f64>, requires_grad: bool) -> Self {
        Tensor::new(shape, data, requires_grad)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::contract(
                "item",
                format!("expected scalar, got shape {:?}", self.shape()),
            ));
        }
        Ok(self.inner.data.borrow()[0])
    }

    /// Current gradient, if one has been accumulated.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Add `delta` into the gradient buffer, allocating zeros on first use.
    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                debug_assert_eq!(g.len(), delta.len());
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    pub(crate) fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.inner.grad.borrow()
    }

    /// Overwrite contents in place (used by the optimizer and checkpoint load).
    pub fn set_data(&self, values: &[f64]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), values.len());
        d.copy_from_slice(values);
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_agreement() {
        let t = Tensor::from_vec(&[2, 3], vec![0.0; 6]);
        assert_eq!(t.numel(), 6);
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    #[should_panic(expected = "does not match data length")]
    fn shape_mismatch_panics() {
        let _ = Tensor::from_vec(&[2, 3], vec![0.0; 5]);
    }

    #[test]
    fn grad_accumulates_across_calls() {
        let t = Tensor::param(&[3], vec![0.0; 3]);
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), vec![2.0, 3.0, 4.0]);
        t.zero_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn ids_are_unique() {
        let a = Tensor::zeros(&[1]);
        let b = Tensor::zeros(&[1]);
        assert_ne!(a.id(), b.id());
    }
}
