//! Rank-4 tensor engine with reverse-mode automatic differentiation.
//!
//! Tensors are `[batch, channels, height, width]` arrays of `f64`. Every
//! operator records enough history to run `backward` from a scalar loss and
//! populate `grad` on all tensors created with `requires_grad`. Recording is
//! opt-in: an op only builds graph nodes when at least one input is tracked,
//! so inference allocates no history.
//!
//! Gradients accumulate across repeated `backward` calls; the training loop
//! zeroes them explicitly between steps.

mod conv;
mod norm;
mod shape_ops;

pub use conv::ConvSpec;

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

/// `[N, C, H, W]`
pub type Shape = [usize; 4];

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: invalid argument: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Shape),
    #[error("parameter {0} has no gradient; run backward first")]
    MissingGrad(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

struct BackwardOp {
    /// Direct inputs, used for topological ordering.
    parents: Vec<Tensor>,
    /// Receives this node's output gradient and accumulates into the parents.
    run: Box<dyn Fn(&[f64])>,
}

struct Node {
    shape: Shape,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Option<BackwardOp>,
}

/// A rank-4 tensor sharing its storage and recorded history.
#[derive(Clone)]
pub struct Tensor {
    node: Rc<RefCell<Node>>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.node.borrow();
        f.debug_struct("Tensor")
            .field("shape", &n.shape)
            .field("requires_grad", &n.requires_grad)
            .finish()
    }
}

pub fn numel(shape: Shape) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != numel(shape) {
            return Err(TensorError::ShapeMismatch {
                op: "from_vec",
                detail: format!("shape {:?} needs {} values, got {}", shape, numel(shape), data.len()),
            });
        }
        Ok(Self::raw(shape, data, false))
    }

    /// Trainable tensor: participates in graph recording and receives a grad.
    pub fn param(shape: Shape, data: Vec<f64>) -> Result<Tensor> {
        let t = Self::from_vec(shape, data)?;
        t.node.borrow_mut().requires_grad = true;
        Ok(t)
    }

    pub fn zeros(shape: Shape) -> Tensor {
        Self::raw(shape, vec![0.0; numel(shape)], false)
    }

    pub fn full(shape: Shape, value: f64) -> Tensor {
        Self::raw(shape, vec![value; numel(shape)], false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Self::raw([1, 1, 1, 1], vec![value], false)
    }

    fn raw(shape: Shape, data: Vec<f64>, requires_grad: bool) -> Tensor {
        Tensor {
            node: Rc::new(RefCell::new(Node { shape, data, grad: None, requires_grad, op: None })),
        }
    }

    pub(crate) fn result(shape: Shape, data: Vec<f64>, parents: Vec<Tensor>, run: impl Fn(&[f64]) + 'static) -> Tensor {
        let tracked = parents.iter().any(Tensor::requires_grad);
        let t = Self::raw(shape, data, tracked);
        if tracked {
            t.node.borrow_mut().op = Some(BackwardOp { parents, run: Box::new(run) });
        }
        t
    }

    pub fn shape(&self) -> Shape {
        self.node.borrow().shape
    }

    pub fn numel(&self) -> usize {
        numel(self.shape())
    }

    pub fn requires_grad(&self) -> bool {
        self.node.borrow().requires_grad
    }

    pub fn data(&self) -> Vec<f64> {
        self.node.borrow().data.clone()
    }

    pub fn item(&self) -> f64 {
        self.node.borrow().data[0]
    }

    pub fn with_data<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.node.borrow().data)
    }

    /// Replaces the stored values in place (optimizer updates).
    pub fn set_data(&self, data: &[f64]) {
        let mut n = self.node.borrow_mut();
        assert_eq!(n.data.len(), data.len(), "set_data length mismatch");
        n.data.copy_from_slice(data);
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.node.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.node.borrow_mut().grad = None;
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        let mut n = self.node.borrow_mut();
        let len = n.data.len();
        let g = n.grad.get_or_insert_with(|| vec![0.0; len]);
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
    }

    fn ptr(&self) -> *const RefCell<Node> {
        Rc::as_ptr(&self.node)
    }

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
    /// tensor on the recorded graph; call `zero_grad` between steps.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape()));
        }
        // Iterative post-order DFS so deep graphs don't blow the stack.
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<*const RefCell<Node>> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.ptr()) {
                continue;
            }
            stack.push((t.clone(), true));
            let n = t.node.borrow();
            if let Some(op) = &n.op {
                for p in &op.parents {
                    if !visited.contains(&p.ptr()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        // Intermediate (op-bearing) nodes carry only this sweep's gradient;
        // persistent accumulation is the leaves' contract.
        for t in &order {
            if t.node.borrow().op.is_some() {
                t.node.borrow_mut().grad = None;
            }
        }
        self.accumulate_grad(&[1.0]);
        for t in order.iter().rev() {
            let grad = {
                let n = t.node.borrow();
                if n.op.is_none() {
                    continue;
                }
                match &n.grad {
                    Some(g) => g.clone(),
                    None => continue,
                }
            };
            let n = t.node.borrow();
            if let Some(op) = &n.op {
                (op.run)(&grad);
            }
        }
        Ok(())
    }

    // ---- elementwise ----

    fn unary(&self, fwd: impl Fn(f64) -> f64, dydx: impl Fn(f64, f64) -> f64 + 'static) -> Tensor {
        let shape = self.shape();
        let x = self.data();
        let y: Vec<f64> = x.iter().map(|&v| fwd(v)).collect();
        let input = self.clone();
        let yc = y.clone();
        Tensor::result(shape, y, vec![self.clone()], move |gout| {
            let xd = input.data();
            let delta: Vec<f64> = gout
                .iter()
                .zip(xd.iter().zip(&yc))
                .map(|(&g, (&xv, &yv))| g * dydx(xv, yv))
                .collect();
            input.accumulate_grad(&delta);
        })
    }

    pub fn relu(&self) -> Tensor {
        self.unary(|x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(|x| 1.0 / (1.0 + (-x).exp()), |_, y| y * (1.0 - y))
    }

    pub fn ln(&self) -> Tensor {
        self.unary(|x| x.ln(), |x, _| 1.0 / x)
    }

    pub fn powf(&self, e: f64) -> Tensor {
        self.unary(move |x| x.powf(e), move |x, _| e * x.powf(e - 1.0))
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.unary(move |x| k * x, move |_, _| k)
    }

    pub fn add_scalar(&self, k: f64) -> Tensor {
        self.unary(move |x| x + k, |_, _| 1.0)
    }

    /// Clamp to `[lo, hi]`; the gradient is zero outside the open interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.unary(
            move |x| x.clamp(lo, hi),
            move |x, _| if x > lo && x < hi { 1.0 } else { 0.0 },
        )
    }

    fn check_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(TensorError::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "add")?;
        let y: Vec<f64> = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(x, y)| x + y).collect()));
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::result(self.shape(), y, vec![self.clone(), other.clone()], move |g| {
            a.accumulate_grad(g);
            b.accumulate_grad(g);
        }))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "sub")?;
        let y: Vec<f64> = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(x, y)| x - y).collect()));
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::result(self.shape(), y, vec![self.clone(), other.clone()], move |g| {
            a.accumulate_grad(g);
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            b.accumulate_grad(&neg);
        }))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "mul")?;
        let y: Vec<f64> = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(x, y)| x * y).collect()));
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::result(self.shape(), y, vec![self.clone(), other.clone()], move |g| {
            let bd = b.data();
            let da: Vec<f64> = g.iter().zip(&bd).map(|(g, y)| g * y).collect();
            a.accumulate_grad(&da);
            let ad = a.data();
            let db: Vec<f64> = g.iter().zip(&ad).map(|(g, x)| g * x).collect();
            b.accumulate_grad(&db);
        }))
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "div")?;
        let y: Vec<f64> = self.with_data(|a| other.with_data(|b| a.iter().zip(b).map(|(x, y)| x / y).collect()));
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::result(self.shape(), y, vec![self.clone(), other.clone()], move |g| {
            let bd = b.data();
            let da: Vec<f64> = g.iter().zip(&bd).map(|(g, y)| g / y).collect();
            a.accumulate_grad(&da);
            let ad = a.data();
            let db: Vec<f64> = g
                .iter()
                .zip(ad.iter().zip(&bd))
                .map(|(g, (x, y))| -g * x / (y * y))
                .collect();
            b.accumulate_grad(&db);
        }))
    }

    /// Broadcast multiply by a scalar tensor (gradient flows to both sides).
    pub fn mul_scalar_tensor(&self, s: &Tensor) -> Result<Tensor> {
        if s.numel() != 1 {
            return Err(TensorError::InvalidArgument {
                op: "mul_scalar_tensor",
                detail: format!("scalar operand has shape {:?}", s.shape()),
            });
        }
        let k = s.item();
        let y: Vec<f64> = self.with_data(|a| a.iter().map(|x| x * k).collect());
        let (a, sc) = (self.clone(), s.clone());
        Ok(Tensor::result(self.shape(), y, vec![self.clone(), s.clone()], move |g| {
            let k = sc.item();
            let da: Vec<f64> = g.iter().map(|g| g * k).collect();
            a.accumulate_grad(&da);
            let ad = a.data();
            let ds: f64 = g.iter().zip(&ad).map(|(g, x)| g * x).sum();
            sc.accumulate_grad(&[ds]);
        }))
    }

    // ---- reductions ----

    pub fn sum(&self) -> Tensor {
        let total: f64 = self.with_data(|d| d.iter().sum());
        let input = self.clone();
        let n = self.numel();
        Tensor::result([1, 1, 1, 1], vec![total], vec![self.clone()], move |g| {
            input.accumulate_grad(&vec![g[0]; n]);
        })
    }

    /// Sum over C,H,W per batch item; output `[N,1,1,1]`.
    pub fn sum_per_image(&self) -> Tensor {
        let [n, c, h, w] = self.shape();
        let per = c * h * w;
        let y: Vec<f64> = self.with_data(|d| d.chunks(per).map(|ch| ch.iter().sum()).collect());
        let input = self.clone();
        Tensor::result([n, 1, 1, 1], y, vec![self.clone()], move |g| {
            let mut delta = vec![0.0; n * per];
            for (i, gi) in g.iter().enumerate() {
                delta[i * per..(i + 1) * per].fill(*gi);
            }
            input.accumulate_grad(&delta);
        })
    }

    /// Arithmetic mean over the batch dimension of an `[N,1,1,1]` tensor.
    pub fn mean_batch(&self) -> Tensor {
        let n = self.shape()[0] as f64;
        self.sum().scale(1.0 / n)
    }
}

/// Max over coordinates of the relative disagreement between the analytic
/// gradient of `f` at `x` and a central finite difference.
///
/// Error metric per coordinate: `|a - n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> f64
where
    F: Fn(&Tensor) -> Tensor,
{
    let shape = x.shape();
    let base = x.data();
    let tracked = Tensor::param(shape, base.clone()).unwrap();
    let y = f(&tracked);
    assert_eq!(y.numel(), 1, "grad_check needs a scalar-valued function");
    y.backward().unwrap();
    let analytic = tracked.grad().expect("tracked input received no gradient");

    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += eps;
        let mut minus = base.clone();
        minus[i] -= eps;
        let fp = f(&Tensor::from_vec(shape, plus).unwrap()).item();
        let fm = f(&Tensor::from_vec(shape, minus).unwrap()).item();
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / 1.0_f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape, data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn relu_basic() {
        let x = t([1, 1, 1, 3], &[-1.0, 0.0, 2.0]);
        assert_eq!(x.relu().data(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(Tensor::scalar(0.0).sigmoid().item(), 0.5);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let x = Tensor::param([1, 1, 1, 1], vec![0.0]).unwrap();
        let y = x.sigmoid().sum();
        y.backward().unwrap();
        let g = x.grad().unwrap()[0];
        assert!((g - 0.25).abs() < 1e-12);
        let err = grad_check(|x| x.sigmoid().sum(), &Tensor::scalar(0.0), 1e-5);
        assert!(err < 1e-8, "fd error {err}");
    }

    #[test]
    fn sum_gradient_is_ones() {
        let x = Tensor::param([1, 2, 2, 2], vec![1.0; 8]).unwrap();
        x.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 8]);
    }

    #[test]
    fn half_square_gradient_is_x() {
        let vals = vec![0.5, -1.5, 2.0, 3.0];
        let x = Tensor::param([1, 1, 2, 2], vals.clone()).unwrap();
        let y = x.mul(&x).unwrap().sum().scale(0.5);
        y.backward().unwrap();
        let g = x.grad().unwrap();
        for (gi, vi) in g.iter().zip(&vals) {
            assert!((gi - vi).abs() < 1e-12);
        }
    }

    #[test]
    fn add_distributes_gradient_unchanged() {
        let x = Tensor::param([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let y = Tensor::param([1, 1, 1, 2], vec![3.0, 4.0]).unwrap();
        let s = x.add(&y).unwrap();
        s.mul(&t([1, 1, 1, 2], &[5.0, 7.0])).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![5.0, 7.0]);
        assert_eq!(y.grad().unwrap(), vec![5.0, 7.0]);
    }

    #[test]
    fn add_zeros_is_identity() {
        let x = t([1, 2, 1, 2], &[1.0, -2.0, 3.0, 4.0]);
        let y = x.add(&Tensor::zeros(x.shape())).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let x = Tensor::zeros([1, 2, 2, 2]);
        let y = Tensor::zeros([1, 3, 2, 2]);
        assert!(matches!(x.add(&y), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::param([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(x.relu().backward(), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let x = Tensor::param([1, 1, 1, 1], vec![3.0]).unwrap();
        let y = x.scale(2.0);
        y.backward().unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0]);
    }

    #[test]
    fn untracked_inputs_record_no_history() {
        let x = t([1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let y = x.relu().sigmoid();
        assert!(!y.requires_grad());
        assert!(y.node.borrow().op.is_none());
    }

    #[test]
    fn grad_check_on_sum_is_exact() {
        let x = t([1, 2, 3, 3], &(0..18).map(|i| i as f64 * 0.1 - 0.7).collect::<Vec<_>>());
        let err = grad_check(|x| x.sum(), &x, 1e-5);
        assert!(err < 1e-10, "fd error {err}");
    }

    #[test]
    fn grad_check_elementwise_chain() {
        let x = t([1, 1, 3, 3], &[0.3, -0.2, 0.7, 1.1, -0.9, 0.05, 0.4, -1.3, 0.8]);
        let err = grad_check(|x| x.sigmoid().mul(x).unwrap().powf(2.0).sum(), &x, 1e-5);
        assert!(err < 1e-8, "fd error {err}");
    }

    #[test]
    fn mul_scalar_tensor_routes_gradient_both_ways() {
        let s = Tensor::param([1, 1, 1, 1], vec![2.0]).unwrap();
        let x = Tensor::param([1, 1, 1, 2], vec![3.0, 4.0]).unwrap();
        let y = x.mul_scalar_tensor(&s).unwrap();
        assert_eq!(y.data(), vec![6.0, 8.0]);
        y.sum().backward().unwrap();
        assert_eq!(s.grad().unwrap(), vec![7.0]);
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn clamp_zeroes_gradient_outside_band() {
        let x = Tensor::param([1, 1, 1, 3], vec![-0.5, 0.5, 1.5]).unwrap();
        let y = x.clamp(0.0, 1.0);
        assert_eq!(y.data(), vec![0.0, 0.5, 1.0]);
        y.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sum_per_image_splits_batches() {
        let x = Tensor::param([2, 1, 1, 2], vec![1.0, 2.0, 10.0, 20.0]).unwrap();
        let s = x.sum_per_image();
        assert_eq!(s.shape(), [2, 1, 1, 1]);
        assert_eq!(s.data(), vec![3.0, 30.0]);
        s.mul(&t([2, 1, 1, 1], &[1.0, 2.0])).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 2.0, 2.0]);
    }
}
