//! Reverse-mode automatic differentiation.
//!
//! A [`Var`] is a reference-counted node holding a forward value. Nodes that
//! depend on a parameter keep their parents and a backward closure; nodes
//! that do not are plain constants and free their inputs immediately, which
//! is what keeps inference cheap. Every node gets a monotonically increasing
//! id at creation, so sorting the reachable nodes by descending id replays
//! the recording in exact reverse order.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Maps the upstream gradient to one optional gradient per parent.
pub(crate) type BackwardFn = Box<dyn Fn(&Tensor, &[Var]) -> Result<Vec<Option<Tensor>>>>;

struct GradFn {
    op: &'static str,
    parents: Vec<Var>,
    backward: BackwardFn,
}

struct Node {
    id: u64,
    value: Tensor,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

#[derive(Clone)]
pub struct Var(Rc<Node>);

impl core::fmt::Debug for Var {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("op", &self.op_name())
            .field("shape", &self.0.value.shape())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl Var {
    /// A leaf whose gradient is collected by [`Tape::backward`].
    pub fn param(value: Tensor) -> Var {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: true,
            grad_fn: None,
        }))
    }

    pub fn constant(value: Tensor) -> Var {
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: false,
            grad_fn: None,
        }))
    }

    pub(crate) fn from_op(
        op: &'static str,
        value: Tensor,
        parents: Vec<Var>,
        backward: BackwardFn,
    ) -> Var {
        debug_assert!(
            !parents.iter().all(|p| p.value().is_finite()) || value.is_finite(),
            "{op} produced a non-finite value from finite inputs"
        );
        if parents.iter().any(Var::requires_grad) {
            Var(Rc::new(Node {
                id: next_id(),
                value,
                requires_grad: true,
                grad_fn: Some(GradFn {
                    op,
                    parents,
                    backward,
                }),
            }))
        } else {
            Var::constant(value)
        }
    }

    #[inline]
    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.0.value.shape()
    }

    #[inline]
    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    #[inline]
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn op_name(&self) -> &'static str {
        match &self.0.grad_fn {
            Some(g) => g.op,
            None if self.0.requires_grad => "param",
            None => "constant",
        }
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var {
        Var::constant(self.0.value.clone())
    }

    pub fn backward(&self) -> Result<Gradients> {
        Tape::from_loss(self)?.backward()
    }
}

/// The recorded operations reachable from a loss, in reverse recording order.
pub struct Tape {
    loss: Var,
    nodes: Vec<Var>,
}

impl core::fmt::Debug for Tape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tape")
            .field("loss", &self.loss.id())
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl Tape {
    pub fn from_loss(loss: &Var) -> Result<Tape> {
        if loss.shape() != [1, 1, 1, 1] {
            return Err(Error::NonScalarLoss(loss.shape()));
        }
        if !loss.requires_grad() {
            return Err(Error::EmptyTape);
        }
        let mut seen = BTreeSet::new();
        let mut nodes = Vec::new();
        let mut stack = vec![loss.clone()];
        seen.insert(loss.id());
        while let Some(v) = stack.pop() {
            if let Some(g) = &v.0.grad_fn {
                for p in &g.parents {
                    if p.requires_grad() && seen.insert(p.id()) {
                        stack.push(p.clone());
                    }
                }
            }
            nodes.push(v);
        }
        nodes.sort_unstable_by(|a, b| b.id().cmp(&a.id()));
        Ok(Tape {
            loss: loss.clone(),
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in visiting order (descending).
    pub fn order(&self) -> impl Iterator<Item = u64> + '_ {
        self.nodes.iter().map(Var::id)
    }

    /// Propagates `d loss / d loss = 1` to every reachable parameter. Each
    /// node is visited once; the tape is consumed.
    pub fn backward(self) -> Result<Gradients> {
        let mut pending: BTreeMap<u64, Tensor> = BTreeMap::new();
        let mut leaves: BTreeMap<u64, Tensor> = BTreeMap::new();
        pending.insert(self.loss.id(), Tensor::scalar(1.0));
        for node in &self.nodes {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            match &node.0.grad_fn {
                None => {
                    leaves.insert(node.id(), grad);
                }
                Some(g) => {
                    let parent_grads = (g.backward)(&grad, &g.parents)?;
                    debug_assert_eq!(parent_grads.len(), g.parents.len());
                    for (p, pg) in g.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.shape(), p.shape(), "{} grad shape", g.op);
                        match pending.get_mut(&p.id()) {
                            Some(acc) => acc.accumulate(&pg)?,
                            None => {
                                pending.insert(p.id(), pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(Gradients { by_id: leaves })
    }
}

/// Gradients of the loss with respect to parameter leaves.
#[derive(Debug, Default)]
pub struct Gradients {
    by_id: BTreeMap<u64, Tensor>,
}

impl Gradients {
    pub fn get(&self, v: &Var) -> Option<&Tensor> {
        self.by_id.get(&v.id())
    }

    pub fn take(&mut self, v: &Var) -> Option<Tensor> {
        self.by_id.remove(&v.id())
    }

    /// Gradient of `v`, or zeros if the loss does not depend on it.
    pub fn get_or_zeros(&self, v: &Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(v.shape()))
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}
