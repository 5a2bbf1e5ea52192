//! Reverse-mode differentiation over matrix-valued primitives.
//!
//! A [`Tape`] records every primitive in evaluation order together with the
//! operands its adjoint needs. [`Tape::backward`] walks the records in strict
//! reverse order and accumulates adjoints into a [`Gradients`] table. Nodes that
//! do not depend on any trainable leaf are skipped.

use std::sync::Arc;

use super::matrix::DenseMatrix;
use super::real::{sigmoid, Real};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Lower clamp applied to a predicted class probability before taking its log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named trainable matrix with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: DenseMatrix<T>,
    pub grad: DenseMatrix<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: DenseMatrix<T>) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn cast<U: Real>(&self) -> Parameter<U> {
        Parameter {
            name: self.name.clone(),
            value: self.value.cast(),
            grad: self.grad.cast(),
        }
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    SpMM(Arc<CsrMatrix<T>>, Var),
    Add(Var, Var),
    AddRowBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    RowSoftmax(Var),
    Scale(Var, T),
    MulConst(Var, Arc<DenseMatrix<T>>),
    SelectRows(Var, Vec<usize>),
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        targets: Vec<usize>,
        weights: Vec<T>,
    },
    WeightedSqError {
        pred: Var,
        target: Arc<DenseMatrix<T>>,
        row_weights: Vec<T>,
    },
}

struct Node<T> {
    value: DenseMatrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<DenseMatrix<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds the adjoint of `v` into `param.grad`. A missing adjoint is a no-op.
    pub fn accumulate_into(&self, v: Var, param: &mut Parameter<T>) -> Result<()> {
        match self.get(v) {
            Some(g) => param.grad.add_assign(g),
            None => Ok(()),
        }
    }
}

fn accumulate<T: Real>(slot: &mut Option<DenseMatrix<T>>, delta: DenseMatrix<T>) {
    match slot {
        Some(acc) => {
            for (a, &d) in acc.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *a += d;
            }
        }
        None => *slot = Some(delta),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, name: &'static str, value: DenseMatrix<T>, op: Op<T>, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value")));
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a trainable leaf holding a copy of the parameter value.
    pub fn param(&mut self, p: &Parameter<T>) -> Var {
        self.nodes.push(Node {
            value: p.value.clone(),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: DenseMatrix<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copies `v` into a new constant leaf; no adjoint flows back through it.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        self.push("matmul", value, Op::MatMul(a, b), rg)
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        self.push("matmul_nt", value, Op::MatMulNt(a, b), rg)
    }

    /// Constant sparse matrix times a recorded dense value.
    pub fn spmm(&mut self, s: Arc<CsrMatrix<T>>, x: Var) -> Result<Var> {
        let value = s.spmm(self.value(x))?;
        let rg = self.any_grad(&[x]);
        self.push("spmm", value, Op::SpMM(s, x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        self.push("add", value, Op::Add(a, b), rg)
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, c) = self.shape(a);
        if self.shape(bias) != (1, c) {
            return Err(Error::dim(
                "add_row_bias",
                format!("input {:?} vs bias {:?}", (n, c), self.shape(bias)),
            ));
        }
        let mut value = self.value(a).clone();
        let b = self.value(bias).as_slice().to_vec();
        for i in 0..n {
            for (x, &bb) in value.row_mut(i).iter_mut().zip(&b) {
                *x += bb;
            }
        }
        let rg = self.any_grad(&[a, bias]);
        self.push("add_row_bias", value, Op::AddRowBias(a, bias), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|v| if v > T::zero() { v } else { T::zero() });
        let rg = self.any_grad(&[a]);
        self.push("relu", value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let rg = self.any_grad(&[a]);
        self.push("sigmoid", value, Op::Sigmoid(a), rg)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let value = row_softmax(self.value(a));
        let rg = self.any_grad(&[a]);
        self.push("row_softmax", value, Op::RowSoftmax(a), rg)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Result<Var> {
        let value = self.value(a).scale(s);
        let rg = self.any_grad(&[a]);
        self.push("scale", value, Op::Scale(a, s), rg)
    }

    /// Elementwise product with a constant matrix of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Arc<DenseMatrix<T>>) -> Result<Var> {
        if self.shape(a) != c.shape() {
            return Err(Error::dim(
                "mul_const",
                format!("input {:?} vs constant {:?}", self.shape(a), c.shape()),
            ));
        }
        let src = self.value(a);
        let data = src.as_slice().iter().zip(c.as_slice()).map(|(&x, &y)| x * y).collect();
        let value = DenseMatrix::from_vec(src.rows(), src.cols(), data)?;
        let rg = self.any_grad(&[a]);
        self.push("mul_const", value, Op::MulConst(a, c), rg)
    }

    pub fn select_rows(&mut self, a: Var, rows: Vec<usize>) -> Result<Var> {
        let n = self.shape(a).0;
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::dim("select_rows", format!("row {bad} of a {n}-row input")));
        }
        let value = self.value(a).select_rows(&rows);
        let rg = self.any_grad(&[a]);
        self.push("select_rows", value, Op::SelectRows(a, rows), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = DenseMatrix::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push("sum", value, Op::Sum(a), rg)
    }

    /// `sum_k weights[k] * -ln(clamp(softmax(logits[rows[k]])[targets[k]]))`,
    /// with the probability clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    /// Softmax and log are fused; a clamped term contributes no gradient.
    pub fn softmax_cross_entropy(&mut self, logits: Var, rows: Vec<usize>, targets: Vec<usize>, weights: Vec<T>) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if rows.len() != targets.len() || rows.len() != weights.len() {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("{} rows, {} targets, {} weights", rows.len(), targets.len(), weights.len()),
            ));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::dim("softmax_cross_entropy", format!("row {bad} of {n} logits")));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::dim("softmax_cross_entropy", format!("class {bad} of {c}")));
        }
        let z = self.value(logits);
        let lo = T::from_f64_lossy(PROB_CLAMP);
        let hi = T::one() - lo;
        let mut total = T::zero();
        for ((&r, &t), &w) in rows.iter().zip(&targets).zip(&weights) {
            let log_p = log_softmax_entry(z.row(r), t);
            let p = log_p.exp();
            let term = if p < lo {
                -lo.ln()
            } else if p > hi {
                -hi.ln()
            } else {
                -log_p
            };
            total += w * term;
        }
        let rg = self.any_grad(&[logits]);
        self.push(
            "softmax_cross_entropy",
            DenseMatrix::scalar(total),
            Op::SoftmaxCrossEntropy {
                logits,
                rows,
                targets,
                weights,
            },
            rg,
        )
    }

    /// `sum_i row_weights[i] * ||target_i - pred_i||^2`.
    pub fn weighted_sq_error(&mut self, pred: Var, target: Arc<DenseMatrix<T>>, row_weights: Vec<T>) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() || row_weights.len() != p.rows() {
            return Err(Error::dim(
                "weighted_sq_error",
                format!(
                    "prediction {:?}, target {:?}, {} row weights",
                    p.shape(),
                    target.shape(),
                    row_weights.len()
                ),
            ));
        }
        let mut total = T::zero();
        for (i, &w) in row_weights.iter().enumerate() {
            let row: T = p.row(i).iter().zip(target.row(i)).map(|(&a, &b)| (b - a) * (b - a)).sum();
            total += w * row;
        }
        let rg = self.any_grad(&[pred]);
        self.push(
            "weighted_sq_error",
            DenseMatrix::scalar(total),
            Op::WeightedSqError { pred, target, row_weights },
            rg,
        )
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::dim("backward", format!("loss has shape {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<DenseMatrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(DenseMatrix::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &DenseMatrix<T>, grads: &mut [Option<DenseMatrix<T>>]) -> Result<()> {
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    accumulate(&mut grads[a.0], g.matmul_nt(self.value(*b))?);
                }
                if wants(b) {
                    accumulate(&mut grads[b.0], self.value(*a).matmul_tn(g)?);
                }
            }
            Op::MatMulNt(a, b) => {
                if wants(a) {
                    accumulate(&mut grads[a.0], g.matmul(self.value(*b))?);
                }
                if wants(b) {
                    accumulate(&mut grads[b.0], g.matmul_tn(self.value(*a))?);
                }
            }
            Op::SpMM(s, x) => {
                if wants(x) {
                    accumulate(&mut grads[x.0], s.transpose().spmm(g)?);
                }
            }
            Op::Add(a, b) => {
                if wants(a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if wants(b) {
                    accumulate(&mut grads[b.0], g.clone());
                }
            }
            Op::AddRowBias(a, bias) => {
                if wants(a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if wants(bias) {
                    let mut col_sums = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (s, &x) in col_sums.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    accumulate(&mut grads[bias.0], col_sums);
                }
            }
            Op::Relu(a) => {
                if wants(a) {
                    let y = &node.value;
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(y.as_slice())
                        .map(|(&gg, &yy)| if yy > T::zero() { gg } else { T::zero() })
                        .collect();
                    accumulate(&mut grads[a.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
            }
            Op::Sigmoid(a) => {
                if wants(a) {
                    let y = &node.value;
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(y.as_slice())
                        .map(|(&gg, &yy)| gg * yy * (T::one() - yy))
                        .collect();
                    accumulate(&mut grads[a.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
            }
            Op::RowSoftmax(a) => {
                if wants(a) {
                    let y = &node.value;
                    let mut out = DenseMatrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: T = g.row(i).iter().zip(y.row(i)).map(|(&gg, &yy)| gg * yy).sum();
                        for ((o, &gg), &yy) in out.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = yy * (gg - dot);
                        }
                    }
                    accumulate(&mut grads[a.0], out);
                }
            }
            Op::Scale(a, s) => {
                if wants(a) {
                    accumulate(&mut grads[a.0], g.scale(*s));
                }
            }
            Op::MulConst(a, c) => {
                if wants(a) {
                    let data = g.as_slice().iter().zip(c.as_slice()).map(|(&x, &y)| x * y).collect();
                    accumulate(&mut grads[a.0], DenseMatrix::from_vec(g.rows(), g.cols(), data)?);
                }
            }
            Op::SelectRows(a, rows) => {
                if wants(a) {
                    let (n, c) = self.shape(*a);
                    let mut out = DenseMatrix::zeros(n, c);
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, &x) in out.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads[a.0], out);
                }
            }
            Op::Sum(a) => {
                if wants(a) {
                    let (n, c) = self.shape(*a);
                    accumulate(&mut grads[a.0], DenseMatrix::filled(n, c, g.item()));
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                rows,
                targets,
                weights,
            } => {
                if wants(logits) {
                    let z = self.value(*logits);
                    let upstream = g.item();
                    let lo = T::from_f64_lossy(PROB_CLAMP);
                    let hi = T::one() - lo;
                    let mut out = DenseMatrix::zeros(z.rows(), z.cols());
                    for ((&r, &t), &w) in rows.iter().zip(targets).zip(weights) {
                        let p = softmax_row(z.row(r));
                        if p[t] < lo || p[t] > hi {
                            continue;
                        }
                        for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                            let indicator = if j == t { T::one() } else { T::zero() };
                            *o += upstream * w * (p[j] - indicator);
                        }
                    }
                    accumulate(&mut grads[logits.0], out);
                }
            }
            Op::WeightedSqError { pred, target, row_weights } => {
                if wants(pred) {
                    let p = self.value(*pred);
                    let two = T::one() + T::one();
                    let upstream = g.item();
                    let mut out = DenseMatrix::zeros(p.rows(), p.cols());
                    for (i, &w) in row_weights.iter().enumerate() {
                        for ((o, &a), &b) in out.row_mut(i).iter_mut().zip(p.row(i)).zip(target.row(i)) {
                            *o = upstream * two * w * (a - b);
                        }
                    }
                    accumulate(&mut grads[pred.0], out);
                }
            }
        }
        Ok(())
    }
}

fn softmax_row<T: Real>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax_entry<T: Real>(z: &[T], t: usize) -> T {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    z[t] - lse
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax<T: Real>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&softmax_row(m.row(i)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward_and_backward() {
        let mut tape = Tape::new();
        let x = tape.param(&Parameter::new("x", m(1, 2, &[-1.0, 2.0])));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).as_slice(), &[0.0, 2.0]);
        let loss = tape.sum(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(DenseMatrix::zeros(1, 1));
        let y = tape.sigmoid(x).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn shape_errors_name_the_operation() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(DenseMatrix::zeros(2, 3));
        let b = tape.constant(DenseMatrix::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"), "{err}");
        assert!(err.to_string().contains("(2, 3)"), "{err}");
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(&Parameter::new("w", m(2, 1, &[1.0, 2.0])));
        let x = tape.constant(m(1, 2, &[3.0, 4.0]));
        let y = tape.matmul(x, w).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(x).is_none());
        assert_eq!(grads.get(w).unwrap().as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let mut tape = Tape::new();
        let w = tape.param(&Parameter::new("w", m(1, 1, &[2.0])));
        let d = tape.detach(w);
        let y = tape.add(d, w).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(w).unwrap().item(), 1.0);
    }

    #[test]
    fn backward_of_sum_is_sum_of_backwards() {
        let w0 = m(2, 2, &[0.3, -0.2, 0.5, 0.1]);
        let x = m(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let run = |which: u8| {
            let mut tape = Tape::new();
            let w = tape.param(&Parameter::new("w", w0.clone()));
            let xv = tape.constant(x.clone());
            let h = tape.matmul(xv, w).unwrap();
            let s = tape.sigmoid(h).unwrap();
            let l1 = tape.sum(s).unwrap();
            let r = tape.relu(h).unwrap();
            let l2 = tape.sum(r).unwrap();
            let loss = match which {
                1 => l1,
                2 => l2,
                _ => tape.add(l1, l2).unwrap(),
            };
            tape.backward(loss).unwrap().get(w).unwrap().clone()
        };
        let joint = run(0);
        let split = run(1).add(&run(2)).unwrap();
        assert!(joint.max_abs_diff(&split).unwrap() < 1e-14);
    }

    #[test]
    fn cross_entropy_matches_closed_form() {
        let mut tape = Tape::new();
        let z = tape.constant(m(2, 2, &[0.0, 0.0, 1.0, -1.0]));
        let loss = tape.softmax_cross_entropy(z, vec![0, 1], vec![1, 0], vec![1.0, 0.5]).unwrap();
        let p = 1.0 / (1.0 + (-2.0f64).exp());
        let expected = 2f64.ln() + 0.5 * -p.ln();
        assert!((tape.value(loss).item() - expected).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_clamps_saturated_predictions() {
        let mut tape = Tape::new();
        let z = tape.param(&Parameter::new("z", m(1, 2, &[0.0, 100.0])));
        let loss = tape.softmax_cross_entropy(z, vec![0], vec![0], vec![1.0]).unwrap();
        assert!((tape.value(loss).item() + PROB_CLAMP.ln()).abs() < 1e-9);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(z).unwrap().as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let s = row_softmax(&m(1, 3, &[1000.0, 1000.0, -1000.0]));
        assert!((s.get(0, 0) - 0.5).abs() < 1e-12);
        assert!(s.all_finite());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.constant(m(1, 1, &[f64::MAX]));
        let err = tape.scale(a, 10.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }
}
