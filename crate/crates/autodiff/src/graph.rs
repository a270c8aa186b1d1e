use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{AutodiffError, Result};
use crate::linalg::{gemm, MatRef};
use crate::tensor::{numel, NodeId, OpRecord, Tensor};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// The differentiable operations understood by [`Graph`].
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// `[a,b] × [b,c] -> [a,c]`
    Matmul,
    /// `[n,c] + [c]` broadcast over rows (a rank-1 `[c]` left input is also accepted).
    AddBias,
    ElementwiseMul,
    ScalarMul(f64),
    Relu,
    Tanh,
    /// Concatenation along the leading axis.
    Concat,
    /// Rows `start..end` along the leading axis.
    Slice { start: usize, end: usize },
    Reshape(Vec<usize>),
    /// Sum of all elements, producing a scalar.
    Sum,
    /// Mean of squared differences over all elements, producing a scalar.
    MeanSquaredError,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OpKind::Matmul => "matmul",
            OpKind::AddBias => "add_bias",
            OpKind::ElementwiseMul => "elementwise_mul",
            OpKind::ScalarMul(_) => "scalar_mul",
            OpKind::Relu => "relu",
            OpKind::Tanh => "tanh",
            OpKind::Concat => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Reshape(_) => "reshape",
            OpKind::Sum => "sum",
            OpKind::MeanSquaredError => "mean_squared_error",
        };
        f.write_str(name)
    }
}

/// Append-only arena of tensors. Nodes are stored in creation order, and every
/// operation only refers to nodes created before it, so the arena order is a
/// topological order.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Tensor>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn arity(kind: &OpKind, got: usize) -> Result<()> {
    let expected = match kind {
        OpKind::Matmul | OpKind::AddBias | OpKind::ElementwiseMul | OpKind::MeanSquaredError => 2,
        OpKind::Concat => {
            if got == 0 {
                return Err(AutodiffError::Arity {
                    kind: kind.clone(),
                    expected: 1,
                    got,
                });
            }
            return Ok(());
        }
        _ => 1,
    };
    if got != expected {
        return Err(AutodiffError::Arity {
            kind: kind.clone(),
            expected,
            got,
        });
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, id: NodeId) -> Result<usize> {
        if id.graph != self.id || id.index >= self.nodes.len() {
            return Err(AutodiffError::DanglingNode { index: id.index });
        }
        Ok(id.index)
    }

    /// Adds a leaf. Any op record on the tensor is discarded.
    pub fn insert(&mut self, tensor: Tensor) -> Result<NodeId> {
        if tensor.values().iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: "graph input".into(),
            });
        }
        self.nodes.push(tensor.into_leaf());
        Ok(NodeId {
            graph: self.id,
            index: self.nodes.len() - 1,
        })
    }

    /// Adds a constant (non-differentiable) leaf.
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<NodeId> {
        self.insert(Tensor::new(shape, values)?)
    }

    /// Moves parameters into the graph as leaves, leaving empty tensors
    /// behind. Pair with [`Graph::release`].
    pub fn adopt(&mut self, params: &mut [Tensor]) -> Result<Vec<NodeId>> {
        params.iter_mut().map(|p| self.insert(std::mem::take(p))).collect()
    }

    /// Moves adopted parameters (with their gradients) back out of the graph.
    /// The graph must not be used for further backward passes afterwards.
    pub fn release(&mut self, ids: &[NodeId], params: &mut [Tensor]) -> Result<()> {
        if ids.len() != params.len() {
            return Err(AutodiffError::StateMismatch(format!(
                "{} ids for {} parameters",
                ids.len(),
                params.len()
            )));
        }
        for (id, p) in ids.iter().zip(params.iter_mut()) {
            *p = self.take(*id)?;
        }
        Ok(())
    }

    /// Moves a tensor out of the graph, leaving an empty placeholder.
    pub fn take(&mut self, id: NodeId) -> Result<Tensor> {
        let i = self.check(id)?;
        Ok(std::mem::take(&mut self.nodes[i]))
    }

    pub fn tensor(&self, id: NodeId) -> Result<&Tensor> {
        let i = self.check(id)?;
        Ok(&self.nodes[i])
    }

    pub fn values(&self, id: NodeId) -> Result<&[f64]> {
        Ok(self.tensor(id)?.values())
    }

    pub fn grad(&self, id: NodeId) -> Result<&[f64]> {
        Ok(self.tensor(id)?.grad())
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, id: NodeId) -> Result<f64> {
        let t = self.tensor(id)?;
        t.item()
            .ok_or_else(|| AutodiffError::NonScalarLoss(t.shape().to_vec()))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Matmul, &[a, b])
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::AddBias, &[a, bias])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::ElementwiseMul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.forward_op(OpKind::ScalarMul(factor), &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Relu, &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Tanh, &[a])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.forward_op(OpKind::Concat, parts)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.forward_op(OpKind::Slice { start, end }, &[a])
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        self.forward_op(OpKind::Reshape(shape), &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sum, &[a])
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::MeanSquaredError, &[a, b])
    }

    /// Evaluates `kind` on `inputs` and records the result.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        arity(&kind, inputs.len())?;
        let idx: Vec<usize> = inputs.iter().map(|&i| self.check(i)).collect::<Result<_>>()?;
        let ins: Vec<&Tensor> = idx.iter().map(|&i| &self.nodes[i]).collect();
        let (shape, values) = eval(&kind, &ins)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: format!("forward {kind}"),
            });
        }
        let requires_grad = ins.iter().any(|t| t.requires_grad());
        let record = OpRecord {
            kind,
            inputs: inputs.to_vec(),
        };
        self.nodes
            .push(Tensor::from_op(shape, values, record, requires_grad));
        Ok(NodeId {
            graph: self.id,
            index: self.nodes.len() - 1,
        })
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients of every node are
    /// overwritten (not accumulated across calls).
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let last = self.check(loss)?;
        let shape = self.nodes[last].shape().to_vec();
        if !(shape.is_empty() || shape == [1]) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        for n in &mut self.nodes {
            n.zero_grad();
        }
        self.nodes[last].grad_mut()[0] = 1.0;

        for i in (0..=last).rev() {
            let node = &self.nodes[i];
            let Some(op) = node.op.as_ref() else { continue };
            if !node.requires_grad() {
                continue;
            }
            for input in &op.inputs {
                if input.graph != self.id {
                    return Err(AutodiffError::DanglingNode { index: input.index });
                }
                if input.index >= i {
                    return Err(AutodiffError::Cycle {
                        node: i,
                        input: input.index,
                    });
                }
            }
            if node.grad().iter().all(|&g| g == 0.0) {
                continue;
            }
            let contributions = self.local_grads(i)?;
            let inputs = self.nodes[i].op.as_ref().map(|o| o.inputs.clone()).unwrap_or_default();
            for (input, contrib) in inputs.iter().zip(contributions) {
                if let Some(c) = contrib {
                    let target = self.nodes[input.index].grad_mut();
                    for (t, v) in target.iter_mut().zip(&c) {
                        *t += v;
                    }
                }
            }
        }

        for n in &self.nodes[..=last] {
            if n.grad().iter().any(|g| !g.is_finite()) {
                return Err(AutodiffError::NonFinite {
                    context: "backward".into(),
                });
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `i` with respect to each input, or
    /// `None` for inputs that don't need a gradient.
    fn local_grads(&self, i: usize) -> Result<Vec<Option<Vec<f64>>>> {
        let node = &self.nodes[i];
        let op = node.op.as_ref().expect("op node");
        let g = node.grad();
        let ins: Vec<&Tensor> = op.inputs.iter().map(|id| &self.nodes[id.index]).collect();
        let want: Vec<bool> = ins.iter().map(|t| t.requires_grad()).collect();

        let out = match &op.kind {
            OpKind::Matmul => {
                let (a, b) = (ins[0], ins[1]);
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let da = want[0].then(|| {
                    let mut da = vec![0.0; m * k];
                    gemm(MatRef::new(g, m, n), MatRef::new(b.values(), k, n).t(), 0.0, &mut da);
                    da
                });
                let db = want[1].then(|| {
                    let mut db = vec![0.0; k * n];
                    gemm(MatRef::new(a.values(), m, k).t(), MatRef::new(g, m, n), 0.0, &mut db);
                    db
                });
                vec![da, db]
            }
            OpKind::AddBias => {
                let c = ins[1].len();
                let da = want[0].then(|| g.to_vec());
                let db = want[1].then(|| {
                    let mut db = vec![0.0; c];
                    for row in g.chunks_exact(c) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    db
                });
                vec![da, db]
            }
            OpKind::ElementwiseMul => {
                let (a, b) = (ins[0].values(), ins[1].values());
                let da = want[0].then(|| g.iter().zip(b).map(|(g, b)| g * b).collect());
                let db = want[1].then(|| g.iter().zip(a).map(|(g, a)| g * a).collect());
                vec![da, db]
            }
            OpKind::ScalarMul(s) => vec![want[0].then(|| g.iter().map(|g| g * s).collect())],
            OpKind::Relu => {
                let x = ins[0].values();
                vec![want[0].then(|| {
                    g.iter()
                        .zip(x)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect()
                })]
            }
            OpKind::Tanh => {
                let y = node.values();
                vec![want[0].then(|| g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect())]
            }
            OpKind::Concat => {
                let mut offset = 0;
                ins.iter()
                    .zip(&want)
                    .map(|(t, &w)| {
                        let len = t.len();
                        let part = w.then(|| g[offset..offset + len].to_vec());
                        offset += len;
                        part
                    })
                    .collect()
            }
            OpKind::Slice { start, end } => {
                let a = ins[0];
                let row: usize = a.shape()[1..].iter().product();
                vec![want[0].then(|| {
                    let mut da = vec![0.0; a.len()];
                    da[start * row..end * row].copy_from_slice(g);
                    da
                })]
            }
            OpKind::Reshape(_) => vec![want[0].then(|| g.to_vec())],
            OpKind::Sum => vec![want[0].then(|| vec![g[0]; ins[0].len()])],
            OpKind::MeanSquaredError => {
                let (a, b) = (ins[0].values(), ins[1].values());
                let scale = 2.0 * g[0] / a.len() as f64;
                let diff: Vec<f64> = a.iter().zip(b).map(|(a, b)| scale * (a - b)).collect();
                let db = want[1].then(|| diff.iter().map(|d| -d).collect());
                let da = want[0].then_some(diff);
                vec![da, db]
            }
        };
        Ok(out)
    }
}

fn mismatch(kind: &OpKind, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        kind: kind.clone(),
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn eval(kind: &OpKind, ins: &[&Tensor]) -> Result<(Vec<usize>, Vec<f64>)> {
    match kind {
        OpKind::Matmul => {
            let (a, b) = (ins[0], ins[1]);
            let (sa, sb) = (a.shape(), b.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(mismatch(kind, sa, sb));
            }
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            let mut out = vec![0.0; m * n];
            gemm(MatRef::new(a.values(), m, k), MatRef::new(b.values(), k, n), 0.0, &mut out);
            Ok((vec![m, n], out))
        }
        OpKind::AddBias => {
            let (a, bias) = (ins[0], ins[1]);
            let (sa, sb) = (a.shape(), bias.shape());
            let c = *sa.last().unwrap_or(&0);
            let bias_ok = sb == [c] || sb == [1, c];
            if sa.is_empty() || sa.len() > 2 || !bias_ok {
                return Err(mismatch(kind, sa, sb));
            }
            let b = bias.values();
            let mut out = a.values().to_vec();
            if c > 0 {
                for row in out.chunks_exact_mut(c) {
                    for (o, v) in row.iter_mut().zip(b) {
                        *o += v;
                    }
                }
            }
            Ok((sa.to_vec(), out))
        }
        OpKind::ElementwiseMul => {
            let (a, b) = (ins[0], ins[1]);
            if a.shape() != b.shape() {
                return Err(mismatch(kind, a.shape(), b.shape()));
            }
            let out = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
            Ok((a.shape().to_vec(), out))
        }
        OpKind::ScalarMul(s) => {
            if !s.is_finite() {
                return Err(AutodiffError::NonFinite {
                    context: "scalar_mul factor".into(),
                });
            }
            let a = ins[0];
            Ok((a.shape().to_vec(), a.values().iter().map(|x| x * s).collect()))
        }
        OpKind::Relu => {
            let a = ins[0];
            Ok((a.shape().to_vec(), a.values().iter().map(|&x| x.max(0.0)).collect()))
        }
        OpKind::Tanh => {
            let a = ins[0];
            Ok((a.shape().to_vec(), a.values().iter().map(|x| x.tanh()).collect()))
        }
        OpKind::Concat => {
            let first = ins[0].shape();
            if first.is_empty() {
                return Err(mismatch(kind, first, first));
            }
            let mut rows = 0;
            let mut out = Vec::with_capacity(ins.iter().map(|t| t.len()).sum());
            for t in ins {
                let s = t.shape();
                if s.len() != first.len() || s[1..] != first[1..] {
                    return Err(mismatch(kind, first, s));
                }
                rows += s[0];
                out.extend_from_slice(t.values());
            }
            let mut shape = first.to_vec();
            shape[0] = rows;
            Ok((shape, out))
        }
        OpKind::Slice { start, end } => {
            let a = ins[0];
            let s = a.shape();
            if s.is_empty() || start > end || *end > s[0] {
                return Err(AutodiffError::ShapeMismatch {
                    kind: kind.clone(),
                    left: s.to_vec(),
                    right: vec![*start, *end],
                });
            }
            let row: usize = s[1..].iter().product();
            let mut shape = s.to_vec();
            shape[0] = end - start;
            Ok((shape, a.values()[start * row..end * row].to_vec()))
        }
        OpKind::Reshape(shape) => {
            let a = ins[0];
            if numel(shape) != a.len() {
                return Err(mismatch(kind, a.shape(), shape));
            }
            Ok((shape.clone(), a.values().to_vec()))
        }
        OpKind::Sum => Ok((Vec::new(), vec![ins[0].values().iter().sum()])),
        OpKind::MeanSquaredError => {
            let (a, b) = (ins[0], ins[1]);
            if a.shape() != b.shape() || a.is_empty() {
                return Err(mismatch(kind, a.shape(), b.shape()));
            }
            let sq: f64 = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Ok((Vec::new(), vec![sq / a.len() as f64]))
        }
    }
}
