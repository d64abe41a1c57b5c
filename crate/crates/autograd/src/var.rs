//! Graph nodes and the reverse pass.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::tensor::Tensor;
use crate::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Computes parent gradients from the output gradient, the parents, and the output value.
pub(crate) type BackwardFn = Box<dyn Fn(&Tensor, &[Var], &Tensor) -> Vec<Option<Tensor>>>;

struct Node {
    id: u64,
    value: Tensor,
    requires_grad: bool,
    parents: Vec<Var>,
    backward: Option<BackwardFn>,
}

/// A value in a differentiable computation.
///
/// Cloning is cheap (reference counted). Ids grow monotonically, so a node is always
/// created after its parents and reverse id order is a valid topological order.
#[derive(Clone)]
pub struct Var(Rc<Node>);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?}, grad={})", self.0.id, self.0.value, self.0.requires_grad)
    }
}

impl Var {
    fn new(value: Tensor, requires_grad: bool, parents: Vec<Var>, backward: Option<BackwardFn>) -> Self {
        Var(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            value,
            requires_grad,
            parents,
            backward,
        }))
    }

    /// A value that never receives gradients.
    pub fn constant(value: Tensor) -> Self {
        Self::new(value, false, Vec::new(), None)
    }

    /// A trainable leaf; its gradient is reported by [`Var::backward`].
    pub fn leaf(value: Tensor) -> Self {
        Self::new(value, true, Vec::new(), None)
    }

    pub fn scalar(v: f64) -> Self {
        Self::constant(Tensor::scalar(v))
    }

    /// Records an operation. Falls back to a constant when no parent needs gradients.
    pub(crate) fn from_op(value: Tensor, parents: Vec<Var>, backward: BackwardFn) -> Self {
        if parents.iter().any(|p| p.requires_grad()) {
            Self::new(value, true, parents, Some(backward))
        } else {
            Self::constant(value)
        }
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.backward.is_none()
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var {
        Var::constant(self.0.value.clone())
    }

    /// Scalar value of a one-element var.
    pub fn item(&self) -> f64 {
        self.0.value.item()
    }

    /// Reverse-mode differentiation of a one-element var with respect to every
    /// reachable leaf created with [`Var::leaf`].
    pub fn backward(&self) -> Result<Gradients> {
        if self.0.value.numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape()
            )));
        }
        let mut grads = Gradients::default();
        if !self.requires_grad() {
            return Ok(grads);
        }

        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v.id()) {
                continue;
            }
            for p in &v.0.parents {
                if p.requires_grad() && !seen.contains(&p.id()) {
                    stack.push(p.clone());
                }
            }
            order.push(v);
        }
        order.sort_by_key(|v| std::cmp::Reverse(v.id()));

        let mut pending: HashMap<u64, Tensor> = HashMap::new();
        pending.insert(self.id(), Tensor::ones(self.shape()));
        for v in order {
            let Some(g) = pending.remove(&v.id()) else { continue };
            match &v.0.backward {
                None => {
                    grads.map.insert(v.id(), g);
                }
                Some(bw) => {
                    let parent_grads = bw(&g, &v.0.parents, &v.0.value);
                    debug_assert_eq!(parent_grads.len(), v.0.parents.len());
                    for (p, pg) in v.0.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.shape(), p.shape(), "gradient shape mismatch");
                        match pending.get_mut(&p.id()) {
                            Some(acc) => acc.add_assign(&pg),
                            None => {
                                pending.insert(p.id(), pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Leaf gradients produced by [`Var::backward`].
#[derive(Default, Debug)]
pub struct Gradients {
    map: HashMap<u64, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: &Var) -> Option<&Tensor> {
        self.map.get(&v.id())
    }

    /// Gradient of `v`, or zeros when `v` did not influence the root.
    pub fn get_or_zeros(&self, v: &Var) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(v.shape()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
