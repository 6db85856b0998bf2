//! Wengert tape: ops append nodes during the forward pass; backward
//! replays them once in reverse, accumulating gradients into every
//! tensor that requires them.

use std::cell::{Cell, RefCell};

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub(crate) type BackwardFn = Box<dyn Fn(&TapeNode, &[f64])>;

/// One recorded operation: op kind, input references, output reference
/// and the rule that maps the output gradient to input gradients.
/// Saved intermediates live inside the rule closure.
pub struct TapeNode {
    pub op: &'static str,
    pub inputs: Vec<Tensor>,
    pub output: Tensor,
    backward: BackwardFn,
}

pub struct Tape {
    nodes: RefCell<Vec<TapeNode>>,
    recording: bool,
    consumed: Cell<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    /// A recording tape for a forward pass that will be differentiated.
    pub fn new() -> Tape {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: true,
            consumed: Cell::new(false),
        }
    }

    /// Inference-only tape: ops run but nothing is recorded.
    pub fn no_grad() -> Tape {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: false,
            consumed: Cell::new(false),
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Whether this op application should be taped.
    pub(crate) fn wants(&self, inputs: &[&Tensor]) -> bool {
        self.recording && inputs.iter().any(|t| t.requires_grad())
    }

    pub(crate) fn record(
        &self,
        op: &'static str,
        inputs: Vec<Tensor>,
        output: Tensor,
        backward: BackwardFn,
    ) {
        debug_assert!(self.recording);
        self.nodes.borrow_mut().push(TapeNode {
            op,
            inputs,
            output,
            backward,
        });
    }

    /// Reverse sweep from a scalar loss. Accumulates d(loss)/d(t) into
    /// the grad of every participating tensor with `requires_grad`.
    /// A second call without a fresh forward pass is an error.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        if self.consumed.get() {
            return Err(Error::Graph(
                "tape already consumed by a previous backward call".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        if !nodes.iter().any(|n| Tensor::ptr_eq(&n.output, loss)) {
            return Err(Error::Graph(
                "loss is not the output of any node on this tape (detached graph)".into(),
            ));
        }
        self.consumed.set(true);
        loss.accumulate_grad(&[1.0]);
        for node in nodes.iter().rev() {
            let dy = {
                let g = node.output.grad_ref();
                match g.as_ref() {
                    Some(g) => g.clone(),
                    None => continue, // no downstream contribution
                }
            };
            (node.backward)(node, &dy);
        }
        Ok(())
    }

    /// First node whose output holds a NaN/Inf, if any. Diagnostic for
    /// numerical aborts.
    pub fn first_nonfinite_node(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .borrow()
            .iter()
            .enumerate()
            .find(|(_, n)| !n.output.is_finite())
            .map(|(i, n)| (i, n.op))
    }

    /// Op kinds in recorded order (structural introspection for tests).
    pub fn op_kinds(&self) -> Vec<&'static str> {
        self.nodes.borrow().iter().map(|n| n.op).collect()
    }
}

/// Helper used by every op: computes the output tensor and records the
/// node when needed.
pub(crate) fn unary_result(
    tape: &Tape,
    op: &'static str,
    input: &Tensor,
    data: Vec<f64>,
    shape: &[usize],
    backward: impl Fn(&TapeNode, &[f64]) + 'static,
) -> Result<Tensor> {
    let wants = tape.wants(&[input]);
    let out = Tensor::op_output(data, shape, wants);
    debug_check_finite(op, &out)?;
    if wants {
        tape.record(op, vec![input.clone()], out.clone(), Box::new(backward));
    }
    Ok(out)
}

pub(crate) fn nary_result(
    tape: &Tape,
    op: &'static str,
    inputs: &[&Tensor],
    data: Vec<f64>,
    shape: &[usize],
    backward: impl Fn(&TapeNode, &[f64]) + 'static,
) -> Result<Tensor> {
    let wants = tape.wants(inputs);
    let out = Tensor::op_output(data, shape, wants);
    debug_check_finite(op, &out)?;
    if wants {
        tape.record(
            op,
            inputs.iter().map(|t| (*t).clone()).collect(),
            out.clone(),
            Box::new(backward),
        );
    }
    Ok(out)
}

/// Debug-mode finiteness sweep after each op.
#[inline]
pub(crate) fn debug_check_finite(op: &'static str, out: &Tensor) -> Result<()> {
    #[cfg(debug_assertions)]
    {
        if !out.is_finite() {
            return Err(Error::NonFinite(format!(
                "op `{op}` produced a non-finite value (shape {:?})",
                out.shape()
            )));
        }
        Ok(())
    }
    #[cfg(not(debug_assertions))]
    {
        let _ = (op, out);
        Ok(())
    }
}
