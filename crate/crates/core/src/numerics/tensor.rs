//! Dense row-major f64 tensor with an optional gradient accumulator.

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::rng::Rng;

/// Fill rule for [`Tensor::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Zeros,
    Ones,
    Constant(f64),
    Uniform(f64, f64),
    Normal(f64, f64),
}

struct Inner {
    shape: Box<[usize]>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
}

/// Shared handle to an n-dimensional array. Cloning is O(1).
///
/// Shape is immutable after creation. `data` is interior-mutable only
/// so the optimizer can update parameters in place; everything else
/// treats tensors as immutable values. A graph is single-threaded by
/// contract, so `Rc`/`RefCell` is the right ownership model.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={})",
            self.shape(),
            self.requires_grad()
        )
    }
}

pub(crate) fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::invalid("shape must be non-empty"));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::invalid(format!("zero extent in shape {shape:?}")));
    }
    Ok(shape.iter().product())
}

/// Row-major strides for a shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl Tensor {
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let numel = check_shape(shape)?;
        if data.len() != numel {
            return Err(Error::shape(format!(
                "data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        Ok(Tensor {
            inner: Rc::new(Inner {
                shape: shape.into(),
                data: RefCell::new(data),
                requires_grad: false,
                grad: RefCell::new(None),
            }),
        })
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_vec(vec![value], &[1]).expect("scalar")
    }

    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        let numel = check_shape(shape)?;
        Tensor::from_vec(vec![0.0; numel], shape)
    }

    pub fn build(shape: &[usize], fill: Fill, rng: Option<&mut Rng>) -> Result<Tensor> {
        let numel = check_shape(shape)?;
        let data = match fill {
            Fill::Zeros => vec![0.0; numel],
            Fill::Ones => vec![1.0; numel],
            Fill::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::invalid(format!("non-finite fill constant {c}")));
                }
                vec![c; numel]
            }
            Fill::Uniform(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::invalid("non-finite uniform bounds"));
                }
                let rng = rng.ok_or_else(|| Error::invalid("uniform fill needs an rng"))?;
                (0..numel).map(|_| rng.uniform_range(lo, hi)).collect()
            }
            Fill::Normal(mean, std) => {
                if !(mean.is_finite() && std.is_finite()) {
                    return Err(Error::invalid("non-finite normal parameters"));
                }
                let rng = rng.ok_or_else(|| Error::invalid("normal fill needs an rng"))?;
                (0..numel).map(|_| rng.normal(mean, std)).collect()
            }
        };
        Tensor::from_vec(data, shape)
    }

    /// Mark as trainable. Returns a tensor with a gradient accumulator slot.
    pub fn requiring_grad(self) -> Tensor {
        if self.requires_grad() {
            return self;
        }
        let shape = self.inner.shape.clone();
        let data = self.inner.data.borrow().clone();
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                requires_grad: true,
                grad: RefCell::new(None),
            }),
        }
    }

    /// Internal constructor for op outputs.
    pub(crate) fn op_output(data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Tensor {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor {
            inner: Rc::new(Inner {
                shape: shape.into(),
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
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

    /// Mutable access for optimizer updates and gradient-check probes.
    /// Callers must not change the length.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a scalar (single-element) tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1);
        self.inner.data.borrow()[0]
    }

    pub fn ptr_eq(a: &Tensor, b: &Tensor) -> bool {
        Rc::ptr_eq(&a.inner, &b.inner)
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub(crate) fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.inner.grad.borrow()
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Add `delta` into the gradient accumulator, materializing it on
    /// first use.
    pub fn accumulate_grad(&self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    pub fn assert_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_zeros() {
        let t = Tensor::build(&[2, 2], Fill::Zeros, None).unwrap();
        assert_eq!(t.to_vec(), vec![0.0; 4]);
        assert_eq!(t.shape(), &[2, 2]);
    }

    #[test]
    fn build_constant() {
        let t = Tensor::build(&[3], Fill::Constant(1.5), None).unwrap();
        assert_eq!(t.to_vec(), vec![1.5, 1.5, 1.5]);
    }

    #[test]
    fn build_normal_is_deterministic() {
        let mut r1 = Rng::new(7);
        let mut r2 = Rng::new(7);
        let a = Tensor::build(&[4], Fill::Normal(0.0, 1.0), Some(&mut r1)).unwrap();
        let b = Tensor::build(&[4], Fill::Normal(0.0, 1.0), Some(&mut r2)).unwrap();
        let (av, bv) = (a.to_vec(), b.to_vec());
        assert!(av.iter().zip(&bv).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Tensor::zeros(&[2, 0]).is_err());
        assert!(Tensor::zeros(&[]).is_err());
    }

    #[test]
    fn non_finite_fill_rejected() {
        assert!(Tensor::build(&[2], Fill::Constant(f64::NAN), None).is_err());
        assert!(Tensor::build(&[2], Fill::Constant(f64::INFINITY), None).is_err());
    }

    #[test]
    fn grad_accumulates() {
        let t = Tensor::zeros(&[3]).unwrap().requiring_grad();
        assert!(t.grad().is_none());
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), vec![2.0, 3.0, 4.0]);
        t.clear_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn strides_row_major() {
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
        assert_eq!(strides(&[5]), vec![1]);
    }
}
