use super::{kernels, Result, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Square(Var),
    Abs(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// valid topological order and backward simply walks it in reverse.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zeros when `var` is not
    /// reachable from the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

enum Broadcast {
    Same,
    LeftScalar,
    RightScalar,
}

fn check_finite(t: Tensor, op: &'static str) -> Result<Tensor> {
    if t.all_finite() {
        Ok(t)
    } else {
        Err(TensorError::NonFinite { op })
    }
}

fn binary_layout(a: &Tensor, b: &Tensor, op: &'static str) -> Result<Broadcast> {
    if a.shape == b.shape {
        Ok(Broadcast::Same)
    } else if a.is_scalar() {
        Ok(Broadcast::LeftScalar)
    } else if b.is_scalar() {
        Ok(Broadcast::RightScalar)
    } else {
        Err(TensorError::ShapeMismatch {
            op,
            left: a.shape.clone(),
            right: b.shape.clone(),
        })
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    let (shape, data) = match binary_layout(a, b, op)? {
        Broadcast::Same => (
            a.shape.clone(),
            a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        ),
        Broadcast::LeftScalar => {
            let x = a.data[0];
            (b.shape.clone(), b.data.iter().map(|&y| f(x, y)).collect())
        }
        Broadcast::RightScalar => {
            let y = b.data[0];
            (a.shape.clone(), a.data.iter().map(|&x| f(x, y)).collect())
        }
    };
    Ok(Tensor { shape, data })
}

/// Reduce an upstream gradient to the shape of a (possibly broadcast) input.
fn reduce_to(grad: Tensor, target: &Tensor) -> Tensor {
    if grad.shape == target.shape {
        grad
    } else {
        Tensor {
            shape: target.shape.clone(),
            data: vec![grad.data.iter().sum()],
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let out = check_finite(out, "matmul")?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let out = zip_broadcast(self.value(a), self.value(b), name, f)?;
        let out = check_finite(out, name)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data.contains(&0.0) {
            return Err(TensorError::Domain { op: "div" });
        }
        self.binary(a, b, "div", Op::Div(a, b), |x, y| x / y)
    }

    /// Adds a `1×k` row vector to every row of an `m×k` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        let (m, k) = xv.require_matrix("add_bias")?;
        let (br, bk) = bv.require_matrix("add_bias")?;
        if br != 1 || bk != k {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                left: xv.shape.clone(),
                right: bv.shape.clone(),
            });
        }
        let mut data = xv.data.clone();
        for r in 0..m {
            for (o, &b) in data[r * k..(r + 1) * k].iter_mut().zip(&bv.data) {
                *o += b;
            }
        }
        let out = check_finite(
            Tensor {
                shape: vec![m, k],
                data,
            },
            "add_bias",
        )?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    fn unary(&mut self, a: Var, name: &'static str, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let out = check_finite(self.value(a).map(f), name)?;
        let rg = self.rg(a);
        Ok(self.push(out, op, rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary(a, "scale", Op::Scale(a, s), |x| x * s)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary(a, "add_scalar", Op::AddScalar(a), |x| x + s)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "exp", Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data.iter().any(|&x| x <= 0.0) {
            return Err(TensorError::Domain { op: "log" });
        }
        self.unary(a, "log", Op::Log(a), f64::ln)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "tanh", Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "sigmoid", Op::Sigmoid(a), sigmoid)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, "leaky_relu", Op::LeakyRelu(a, slope), |x| {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        })
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "square", Op::Square(a), |x| x * x)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "abs", Op::Abs(a), f64::abs)
    }

    /// Clamps to `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(a, "clamp", Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: f64 = self.value(a).data.iter().sum();
        let out = check_finite(Tensor::scalar(s), "sum")?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Sum(a), rg))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let s = v.data.iter().sum::<f64>() / v.len() as f64;
        let out = check_finite(Tensor::scalar(s), "mean")?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Mean(a), rg))
    }

    /// Concatenates rank-2 tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .nodes
            .get(parts.first().map(|v| v.0).unwrap_or(usize::MAX))
            .map(|n| &n.value)
            .ok_or(TensorError::InvalidShape { shape: vec![], len: 0 })?;
        let (r0, c0) = first.require_matrix("concat")?;
        let mut rows = 0;
        let mut cols = 0;
        for p in parts {
            let t = self.value(*p);
            let (r, c) = t.require_matrix("concat")?;
            let ok = if axis == 0 { c == c0 } else { r == r0 };
            if !ok || axis > 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: first.shape.clone(),
                    right: t.shape.clone(),
                });
            }
            rows += r;
            cols += c;
        }
        let data = if axis == 0 {
            let mut d = Vec::with_capacity(rows * c0);
            for p in parts {
                d.extend_from_slice(&self.value(*p).data);
            }
            cols = c0;
            d
        } else {
            rows = r0;
            let mut d = Vec::with_capacity(r0 * cols);
            for r in 0..r0 {
                for p in parts {
                    d.extend_from_slice(self.value(*p).row(r));
                }
            }
            d
        };
        let rg = parts.iter().any(|&p| self.rg(p));
        let out = Tensor {
            shape: vec![rows, cols],
            data,
        };
        Ok(self.push(out, Op::Concat(parts.to_vec(), axis), rg))
    }

    /// Takes `start..end` along `axis` of a rank-2 tensor.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = t.require_matrix("slice")?;
        let len = if axis == 0 { r } else { c };
        if axis > 1 || start >= end || end > len {
            return Err(TensorError::OutOfBounds { start, end, len });
        }
        let out = if axis == 0 {
            Tensor {
                shape: vec![end - start, c],
                data: t.data[start * c..end * c].to_vec(),
            }
        } else {
            let w = end - start;
            let mut d = Vec::with_capacity(r * w);
            for row in 0..r {
                d.extend_from_slice(&t.data[row * c + start..row * c + end]);
            }
            Tensor {
                shape: vec![r, w],
                data: d,
            }
        };
        let rg = self.rg(a);
        Ok(self.push(out, Op::Slice(a, axis, start), rg))
    }

    /// Reverse pass from a scalar loss. The graph can be differentiated
    /// only once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(TensorError::GraphConsumed);
        }
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(TensorError::NonScalarLoss(lv.shape.clone()));
        }
        let loss_shape = lv.shape.clone();
        self.consumed = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::full(&loss_shape, 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let contributions = self.local_grads(node, g.clone());
            // keep the node's own gradient for leaves
            grads[idx] = Some(g);
            for (input, grad) in contributions {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, b) in acc.data.iter_mut().zip(&grad.data) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(grad),
                }
            }
        }
        // free intermediate gradients; only leaves are of interest
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[i] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn local_grads(&self, node: &Node, g: Tensor) -> Vec<(Var, Tensor)> {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = &node.value;
        let elementwise = |f: &dyn Fn(usize) -> f64| Tensor {
            shape: g.shape.clone(),
            data: (0..g.data.len()).map(|i| g.data[i] * f(i)).collect(),
        };
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k) = (av.shape[0], av.shape[1]);
                let nn = bv.shape[1];
                let mut res = Vec::with_capacity(2);
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    kernels::matmul_nt(&g.data, &bv.data, &mut ga, m, nn, k);
                    res.push((
                        *a,
                        Tensor {
                            shape: vec![m, k],
                            data: ga,
                        },
                    ));
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; k * nn];
                    kernels::matmul_tn(&av.data, &g.data, &mut gb, m, k, nn);
                    res.push((
                        *b,
                        Tensor {
                            shape: vec![k, nn],
                            data: gb,
                        },
                    ));
                }
                res
            }
            Op::Add(a, b) => vec![(*a, reduce_to(g.clone(), val(*a))), (*b, reduce_to(g, val(*b)))],
            Op::Sub(a, b) => {
                let neg = g.map(|x| -x);
                vec![(*a, reduce_to(g, val(*a))), (*b, reduce_to(neg, val(*b)))]
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = zip_broadcast(&g, bv, "mul", |x, y| x * y).expect("shape checked in forward");
                let gb = zip_broadcast(&g, av, "mul", |x, y| x * y).expect("shape checked in forward");
                vec![(*a, reduce_to(ga, av)), (*b, reduce_to(gb, bv))]
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let ga = zip_broadcast(&g, bv, "div", |x, y| x / y).expect("shape checked in forward");
                // d(a/b)/db = -out / b
                let ob = zip_broadcast(out, bv, "div", |o, y| -o / y).expect("shape checked in forward");
                let gb = zip_broadcast(&g, &ob, "div", |x, y| x * y).expect("shape checked in forward");
                vec![(*a, reduce_to(ga, av)), (*b, reduce_to(gb, bv))]
            }
            Op::AddBias(x, b) => {
                let k = g.shape[1];
                let mut gb = vec![0.0; k];
                for r in 0..g.shape[0] {
                    for (acc, v) in gb.iter_mut().zip(&g.data[r * k..(r + 1) * k]) {
                        *acc += v;
                    }
                }
                vec![
                    (*x, g),
                    (
                        *b,
                        Tensor {
                            shape: vec![1, k],
                            data: gb,
                        },
                    ),
                ]
            }
            Op::Scale(a, s) => vec![(*a, g.map(|x| x * s))],
            Op::AddScalar(a) => vec![(*a, g)],
            Op::Exp(a) => vec![(*a, elementwise(&|i| out.data[i]))],
            Op::Log(a) => {
                let av = val(*a);
                vec![(*a, elementwise(&|i| 1.0 / av.data[i]))]
            }
            Op::Tanh(a) => vec![(*a, elementwise(&|i| 1.0 - out.data[i] * out.data[i]))],
            Op::Sigmoid(a) => vec![(*a, elementwise(&|i| out.data[i] * (1.0 - out.data[i])))],
            Op::LeakyRelu(a, slope) => {
                let av = val(*a);
                vec![(*a, elementwise(&|i| if av.data[i] > 0.0 { 1.0 } else { *slope }))]
            }
            Op::Square(a) => {
                let av = val(*a);
                vec![(*a, elementwise(&|i| 2.0 * av.data[i]))]
            }
            Op::Abs(a) => {
                let av = val(*a);
                vec![(
                    *a,
                    elementwise(&|i| av.data[i].signum() * (av.data[i] != 0.0) as u8 as f64),
                )]
            }
            Op::Clamp(a, lo, hi) => {
                let av = val(*a);
                vec![(
                    *a,
                    elementwise(&|i| (av.data[i] >= *lo && av.data[i] <= *hi) as u8 as f64),
                )]
            }
            Op::Sum(a) => vec![(*a, Tensor::full(&val(*a).shape, g.data[0]))],
            Op::Mean(a) => {
                let av = val(*a);
                vec![(*a, Tensor::full(&av.shape, g.data[0] / av.len() as f64))]
            }
            Op::Concat(parts, axis) => {
                let mut res = Vec::with_capacity(parts.len());
                let cols = g.shape[1];
                if *axis == 0 {
                    let mut offset = 0;
                    for p in parts {
                        let pv = val(*p);
                        let n = pv.len();
                        res.push((
                            *p,
                            Tensor {
                                shape: pv.shape.clone(),
                                data: g.data[offset..offset + n].to_vec(),
                            },
                        ));
                        offset += n;
                    }
                } else {
                    let mut offset = 0;
                    for p in parts {
                        let pv = val(*p);
                        let (r, c) = (pv.shape[0], pv.shape[1]);
                        let mut d = Vec::with_capacity(r * c);
                        for row in 0..r {
                            d.extend_from_slice(&g.data[row * cols + offset..row * cols + offset + c]);
                        }
                        res.push((
                            *p,
                            Tensor {
                                shape: vec![r, c],
                                data: d,
                            },
                        ));
                        offset += c;
                    }
                }
                res
            }
            Op::Slice(a, axis, start) => {
                let av = val(*a);
                let (r, c) = (av.shape[0], av.shape[1]);
                let mut d = vec![0.0; r * c];
                if *axis == 0 {
                    d[start * c..start * c + g.len()].copy_from_slice(&g.data);
                } else {
                    let w = g.shape[1];
                    for row in 0..r {
                        d[row * c + start..row * c + start + w].copy_from_slice(&g.data[row * w..(row + 1) * w]);
                    }
                }
                vec![(
                    *a,
                    Tensor {
                        shape: vec![r, c],
                        data: d,
                    },
                )]
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::from_matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(0.0));
        let y = g.sigmoid(x).unwrap();
        assert_eq!(g.value(y).item(), 0.5);
    }

    #[test]
    fn mean_then_sum() {
        let mut g = Graph::new();
        let x = g.constant(t(1, 3, &[2.0, 4.0, 6.0]));
        let m = g.mean(x).unwrap();
        let s = g.sum(m).unwrap();
        assert_eq!(g.value(s).item(), 4.0);
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.square(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).item(), 6.0);
    }

    #[test]
    fn disconnected_param_has_zero_grad() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let p = g.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let y = g.square(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(p), Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(1.0));
        let y = g.square(x).unwrap();
        g.backward(y).unwrap();
        assert!(matches!(g.backward(y), Err(TensorError::GraphConsumed)));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut g = Graph::new();
        let x = g.param(t(1, 2, &[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn domain_errors() {
        let mut g = Graph::new();
        let x = g.constant(t(1, 2, &[1.0, 0.0]));
        assert!(matches!(g.log(x), Err(TensorError::Domain { op: "log" })));
        let one = g.constant(Tensor::scalar(1.0));
        assert!(matches!(g.div(one, x), Err(TensorError::Domain { op: "div" })));
    }

    #[test]
    fn overflow_is_reported() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(1000.0));
        assert!(matches!(g.exp(x), Err(TensorError::NonFinite { op: "exp" })));
    }

    #[test]
    fn elementwise_shape_mismatch() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[3, 2]));
        assert!(g.add(a, b).is_err());
        let s = g.constant(Tensor::scalar(2.0));
        let ok = g.mul(a, s).unwrap();
        assert_eq!(g.value(ok).shape(), &[2, 3]);
    }

    #[test]
    fn concat_and_slice_roundtrip() {
        let mut g = Graph::new();
        let a = g.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(2, 1, &[5.0, 6.0]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = g.slice(c, 1, 2, 3).unwrap();
        assert_eq!(g.value(back), g.value(b));
        let r = g.concat(&[a, a], 0).unwrap();
        let s = g.slice(r, 0, 2, 4).unwrap();
        assert_eq!(g.value(s), g.value(a));
        assert!(g.slice(r, 0, 3, 5).is_err());
    }

    #[test]
    fn scalar_broadcast_gradient_sums() {
        let mut g = Graph::new();
        let x = g.param(t(1, 3, &[1.0, 2.0, 3.0]));
        let s = g.param(Tensor::scalar(2.0));
        let y = g.mul(x, s).unwrap();
        let l = g.sum(y).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(s).item(), 6.0);
        assert_eq!(grads.get(x).data(), &[2.0, 2.0, 2.0]);
    }
}
