use crate::error::{AutodiffError, Result};
use crate::graph::OpKind;

/// Handle to a node inside a [`crate::Graph`].
///
/// Carries the id of the owning graph so that handles from one graph can't be
/// silently used against another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub(crate) graph: u64,
    pub(crate) index: usize,
}

impl NodeId {
    pub fn index(&self) -> usize {
        self.index
    }
}

/// Provenance of a non-leaf tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OpRecord {
    pub kind: OpKind,
    pub inputs: Vec<NodeId>,
}

/// Dense row-major array of `f64` with a gradient slot of the same size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Vec<f64>,
    pub(crate) op: Option<OpRecord>,
    requires_grad: bool,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// A constant leaf. Fails if the value count doesn't match the shape or
    /// any value is non-finite.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if numel(&shape) != values.len() {
            return Err(AutodiffError::BadLength {
                shape,
                len: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: "leaf construction".into(),
            });
        }
        let grad = vec![0.0; values.len()];
        Ok(Self {
            shape,
            values,
            grad,
            op: None,
            requires_grad: false,
        })
    }

    /// A trainable leaf.
    pub fn param(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(shape, values)?;
        t.requires_grad = true;
        Ok(t)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Self {
            shape,
            values: vec![0.0; n],
            grad: vec![0.0; n],
            op: None,
            requires_grad: false,
        }
    }

    pub(crate) fn from_op(shape: Vec<usize>, values: Vec<f64>, op: OpRecord, requires_grad: bool) -> Self {
        let n = values.len();
        debug_assert_eq!(numel(&shape), n);
        Self {
            shape,
            values,
            grad: vec![0.0; n],
            op: Some(op),
            requires_grad,
        }
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.op.is_none()
    }

    pub fn op_record(&self) -> Option<&OpRecord> {
        self.op.as_ref()
    }

    /// The single value of a scalar (or one-element) tensor.
    pub fn item(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub(crate) fn into_leaf(mut self) -> Self {
        self.op = None;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.grad().len(), 6);
        assert!(t.is_leaf());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(AutodiffError::NonFinite { .. })
        ));
        assert!(Tensor::param(vec![1], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn scalar_shapes() {
        let s = Tensor::scalar(2.5).unwrap();
        assert!(s.shape().is_empty());
        assert_eq!(s.item(), Some(2.5));
    }
}
