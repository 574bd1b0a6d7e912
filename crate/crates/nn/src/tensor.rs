//! Reverse-mode autodiff on dynamically shaped `f64` arrays.
//!
//! A [`Tensor`] is a cheap handle onto a node of a define-by-run graph.
//! Graphs are built per forward pass and freed when the last handle drops;
//! trainable leaves persist across passes and keep their accumulated
//! gradients until [`Tensor::zero_grad`].

use std::cell::{Cell, Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

use ndarray::{ArrayD, IxDyn};

/// Dynamically shaped `f64` array, the only element type the engine supports.
pub type Arr = ArrayD<f64>;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward rule attached to a non-leaf node.
pub trait Op {
    /// Human-readable op name for diagnostics.
    fn name(&self) -> &'static str;

    /// Gradients w.r.t. each parent given the gradient w.r.t. the output.
    ///
    /// Entries may be `None` for parents that do not require a gradient;
    /// implementations are encouraged to check [`Tensor::needs_grad`] and
    /// skip dead branches.
    fn backward(&self, grad: &Arr, parents: &[Tensor], out: &Arr) -> Vec<Option<Arr>>;
}

pub(crate) struct Node {
    id: u64,
    data: RefCell<Arr>,
    grad: RefCell<Option<Arr>>,
    trainable: bool,
    needs_grad: bool,
    parents: Vec<Tensor>,
    op: Option<Box<dyn Op>>,
}

impl Drop for Node {
    fn drop(&mut self) {
        // Graphs can be thousands of nodes deep (unrolled recurrences), so
        // the parent chain is torn down iteratively instead of letting the
        // default recursive drop blow the stack.
        let mut stack = std::mem::take(&mut self.parents);
        while let Some(t) = stack.pop() {
            if let Ok(mut node) = Rc::try_unwrap(t.node) {
                stack.append(&mut node.parents);
            }
        }
    }
}

/// Shared handle to a graph node.
pub struct Tensor {
    pub(crate) node: Rc<Node>,
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        Tensor { node: Rc::clone(&self.node) }
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.node.id)
            .field("shape", &self.shape())
            .field("trainable", &self.node.trainable)
            .field("op", &self.node.op.as_ref().map(|o| o.name()))
            .finish()
    }
}

impl Tensor {
    fn new(data: Arr, parents: Vec<Tensor>, op: Option<Box<dyn Op>>, trainable: bool) -> Self {
        let needs_grad = trainable || parents.iter().any(|p| p.node.needs_grad);
        // Dead subgraphs (no trainable ancestor) are pruned eagerly.
        let (parents, op) = if needs_grad { (parents, op) } else { (Vec::new(), None) };
        Tensor {
            node: Rc::new(Node {
                id: next_id(),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                trainable,
                needs_grad,
                parents,
                op,
            }),
        }
    }

    /// Constant leaf; gradients do not flow into it.
    pub fn constant(data: Arr) -> Self {
        Tensor::new(data, Vec::new(), None, false)
    }

    /// Trainable leaf parameter.
    pub fn param(data: Arr) -> Self {
        Tensor::new(data, Vec::new(), None, true)
    }

    /// Non-leaf node produced by `op`.
    pub fn from_op(data: Arr, parents: Vec<Tensor>, op: Box<dyn Op>) -> Self {
        Tensor::new(data, parents, Some(op), false)
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    pub fn is_trainable(&self) -> bool {
        self.node.trainable
    }

    pub fn needs_grad(&self) -> bool {
        self.node.needs_grad
    }

    pub fn data(&self) -> Ref<'_, Arr> {
        self.node.data.borrow()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.node.data.borrow().shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.node.data.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replace the stored value. Only meaningful on leaves (optimizer updates,
    /// checkpoint restore); calling it on a graph node would desynchronize
    /// saved activations.
    pub fn set_data(&self, data: Arr) {
        assert!(self.node.op.is_none(), "set_data on a non-leaf tensor");
        *self.node.data.borrow_mut() = data;
    }

    /// Accumulated gradient, if any.
    pub fn grad(&self) -> Option<Arr> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    /// Detached copy of the current value as a fresh constant leaf.
    pub fn detach(&self) -> Tensor {
        Tensor::constant(self.data().clone())
    }

    pub fn scalar_value(&self) -> f64 {
        let d = self.data();
        assert_eq!(d.len(), 1, "scalar_value on tensor of len {}", d.len());
        *d.iter().next().unwrap()
    }

    /// Backpropagate from this node, seeding with ones.
    ///
    /// Gradients accumulate into every trainable leaf reachable from here.
    /// Intermediate gradients are consumed as soon as their node has been
    /// processed.
    pub fn backward(&self) {
        {
            let shape = self.node.data.borrow().raw_dim();
            *self.node.grad.borrow_mut() = Some(Arr::ones(shape));
        }
        // Node ids increase monotonically during construction, so descending
        // id order is a valid topological order.
        let mut reachable: Vec<Tensor> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.node.id) {
                continue;
            }
            for p in &t.node.parents {
                if p.node.needs_grad {
                    stack.push(p.clone());
                }
            }
            reachable.push(t);
        }
        reachable.sort_by(|a, b| b.node.id.cmp(&a.node.id));

        for t in reachable {
            let Some(op) = t.node.op.as_ref() else { continue };
            let Some(grad) = t.node.grad.borrow_mut().take() else { continue };
            let parent_grads = {
                let out = t.node.data.borrow();
                op.backward(&grad, &t.node.parents, &out)
            };
            debug_assert_eq!(parent_grads.len(), t.node.parents.len(), "{}", op.name());
            for (p, g) in t.node.parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !p.node.needs_grad {
                    continue;
                }
                debug_assert_eq!(
                    g.shape(),
                    p.node.data.borrow().shape(),
                    "gradient shape mismatch out of {}",
                    op.name()
                );
                let mut slot = p.node.grad.borrow_mut();
                match slot.as_mut() {
                    Some(acc) => *acc += &g,
                    None => *slot = Some(g),
                }
            }
        }
    }
}

/// Convenience constructors.
impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::constant(Arr::zeros(IxDyn(shape)))
    }

    pub fn from_vec(values: Vec<f64>, shape: &[usize]) -> Tensor {
        Tensor::constant(
            Arr::from_shape_vec(IxDyn(shape), values).expect("shape/len mismatch"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_increase() {
        let a = Tensor::zeros(&[2]);
        let b = Tensor::zeros(&[2]);
        assert!(b.id() > a.id());
    }

    #[test]
    fn deep_graph_drop_does_not_overflow() {
        let mut t = Tensor::param(Arr::zeros(IxDyn(&[4])));
        for _ in 0..200_000 {
            t = crate::ops::scale(&t, 1.0);
        }
        drop(t);
    }

    #[test]
    fn constant_graphs_are_pruned() {
        let a = Tensor::zeros(&[3]);
        let b = crate::ops::scale(&a, 2.0);
        assert!(!b.needs_grad());
        assert!(b.node.parents.is_empty());
    }
}
