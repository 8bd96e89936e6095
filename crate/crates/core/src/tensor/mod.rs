//! A small reverse-mode automatic differentiation engine on dynamic-rank
//! arrays. One [`Tape`] lives for one training step: leaves are bound
//! (data, parameters), ops build the forward graph, and [`Tape::backward`]
//! accumulates gradients for any scalar root.
//!
//! Node ids are topologically ordered by construction (parents always have
//! smaller ids), so a single reverse sweep suffices.

mod conv;
mod matmul;
mod norm;
mod ops;

pub(crate) mod norm_sums {
    pub(crate) use super::norm::{fast_sum, fast_sum_dot, fast_sum_sumsq};
}

pub use matmul::{matmul, matmul_into};

use crate::scalar::Scalar;
use ndarray::{ArcArray, ArrayD, IxDyn, Zip};
use std::cell::RefCell;

/// Shared dynamic-rank array; clones are reference-counted.
pub type TArr<F> = ArcArray<F, IxDyn>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type GradFn<F> = Box<dyn Fn(&ArrayD<F>, &mut dyn FnMut(usize, ArrayD<F>))>;

struct Node<F: Scalar> {
    value: TArr<F>,
    grad_fn: Option<GradFn<F>>,
}

pub struct Tape<F: Scalar> {
    nodes: RefCell<Vec<Node<F>>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert a leaf node (no gradient history).
    pub fn var(&self, value: ArrayD<F>) -> Var {
        self.var_shared(value.into_shared())
    }

    /// Insert a leaf node from an already-shared array without copying.
    /// Values are kept in standard (row-major contiguous) layout so shape
    /// casts inside ops never copy.
    pub fn var_shared(&self, value: TArr<F>) -> Var {
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().to_owned().into_shared()
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            grad_fn: None,
        });
        Var(nodes.len() - 1)
    }

    pub(crate) fn push(&self, value: ArrayD<F>, grad_fn: GradFn<F>) -> Var {
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().to_owned()
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: value.into_shared(),
            grad_fn: Some(grad_fn),
        });
        Var(nodes.len() - 1)
    }

    /// Cheap (reference-counted) copy of a node's value.
    pub fn value(&self, v: Var) -> TArr<F> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Extract a single-element node as a scalar.
    pub fn scalar(&self, v: Var) -> F {
        let nodes = self.nodes.borrow();
        let val = &nodes[v.0].value;
        assert_eq!(val.len(), 1, "scalar() on non-scalar node");
        *val.iter().next().unwrap()
    }

    /// Re-enter a value as a fresh leaf, cutting its gradient history.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v);
        self.var_shared(value)
    }

    /// Reverse sweep from a scalar root. Returns the gradient of the root
    /// with respect to every reachable node.
    pub fn backward(&self, root: Var) -> Gradients<F> {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[root.0].value.len(),
            1,
            "backward() root must be scalar"
        );
        let mut grads: Vec<Option<ArrayD<F>>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        grads[root.0] = Some(ArrayD::from_elem(
            IxDyn(nodes[root.0].value.shape()),
            F::one(),
        ));
        for id in (0..=root.0).rev() {
            if grads[id].is_none() {
                continue;
            }
            let Some(grad_fn) = nodes[id].grad_fn.as_ref() else {
                continue;
            };
            let g = grads[id].take().expect("grad present");
            let mut sink = |pid: usize, contrib: ArrayD<F>| {
                debug_assert!(pid < id, "gradient must flow to earlier nodes");
                match &mut grads[pid] {
                    Some(acc) => {
                        Zip::from(&mut *acc)
                            .and(&contrib)
                            .for_each(|a, &c| *a = *a + c);
                    }
                    slot @ None => *slot = Some(contrib),
                }
            };
            grad_fn(&g, &mut sink);
        }
        Gradients { grads }
    }
}

/// Result of a backward sweep.
pub struct Gradients<F: Scalar> {
    grads: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&ArrayD<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<ArrayD<F>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
