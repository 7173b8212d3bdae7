//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! Nodes are appended in evaluation order, so walking the node list
//! backwards is a reverse topological order and each node is visited once.

use super::activation::Activation;
use super::matrix::Matrix;
use super::spectral::spectral_norm;
use super::NumericsError;

/// Handle to a node on a [`GradientTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param,
    /// `x * wᵀ`
    MatMulT { x: Var, w: Var },
    /// `x + 1 * bias` with `bias` a `1 x cols` row.
    AddBias { x: Var, bias: Var },
    /// `x + alpha * y`
    Axpy { x: Var, alpha: f64, y: Var },
    Scale { x: Var, alpha: f64 },
    Activation { x: Var, act: Activation },
    /// Mean over all entries of `(pred - target)²`.
    MeanSquaredError { pred: Var, target: Var },
    /// Mean negative log-softmax of the labelled class, one row per sample.
    CrossEntropy { logits: Var, labels: Vec<usize> },
    /// Largest singular value; the backward pass uses `u vᵀ`.
    SpectralNorm { w: Var, left: Vec<f64>, right: Vec<f64>, tol: f64, max_iter: usize },
    /// Maximum of scalars, ties resolved to the lowest index.
    Max { items: Vec<Var>, argmax: usize },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

/// Recording of one forward computation plus its parameter registry.
#[derive(Debug, Clone, Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

/// `∂output/∂p` for every registered parameter, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_param: Vec<Matrix>,
}

impl Gradients {
    pub fn into_vec(self) -> Vec<Matrix> {
        self.per_param
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, var: Var) -> f64 {
        let v = self.value(var);
        assert_eq!(v.shape(), (1, 1), "node is not a scalar");
        v.get(0, 0)
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, value, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Constant leaf (data, targets).
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(Op::Input, value, false)
    }

    /// Registered trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        let var = self.push(Op::Param, value, true);
        self.params.push(var);
        var
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let value = self.value(x).matmul_nt(self.value(w));
        let rg = self.needs(x) || self.needs(w);
        self.push(Op::MatMulT { x, w }, value, rg)
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.rows(), 1, "bias must be a row vector");
        let value = self.value(x).add_row_broadcast(b.as_slice());
        let rg = self.needs(x) || self.needs(bias);
        self.push(Op::AddBias { x, bias }, value, rg)
    }

    pub fn axpy(&mut self, x: Var, alpha: f64, y: Var) -> Var {
        let value = self.value(x).axpy(alpha, self.value(y));
        let rg = self.needs(x) || self.needs(y);
        self.push(Op::Axpy { x, alpha, y }, value, rg)
    }

    pub fn add(&mut self, x: Var, y: Var) -> Var {
        self.axpy(x, 1.0, y)
    }

    pub fn scale(&mut self, x: Var, alpha: f64) -> Var {
        let value = self.value(x).scale(alpha);
        let rg = self.needs(x);
        self.push(Op::Scale { x, alpha }, value, rg)
    }

    pub fn activation(&mut self, x: Var, act: Activation) -> Var {
        if act == Activation::Identity {
            return x;
        }
        let value = self.value(x).map(|v| act.apply(v));
        let rg = self.needs(x);
        self.push(Op::Activation { x, act }, value, rg)
    }

    pub fn mse(&mut self, pred: Var, target: Var) -> Var {
        let value = Matrix::from_raw(1, 1, vec![mse_value(self.value(pred), self.value(target))]);
        let rg = self.needs(pred) || self.needs(target);
        self.push(Op::MeanSquaredError { pred, target }, value, rg)
    }

    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let value = Matrix::from_raw(1, 1, vec![cross_entropy_value(self.value(logits), labels)]);
        let rg = self.needs(logits);
        self.push(Op::CrossEntropy { logits, labels: labels.to_vec() }, value, rg)
    }

    pub fn spectral_norm(&mut self, w: Var, tol: f64, max_iter: usize) -> Result<Var, NumericsError> {
        let sn = spectral_norm(self.value(w), tol, max_iter)?;
        let rg = self.needs(w);
        let value = Matrix::from_raw(1, 1, vec![sn.sigma]);
        Ok(self.push(Op::SpectralNorm { w, left: sn.left, right: sn.right, tol, max_iter }, value, rg))
    }

    /// Maximum over scalar nodes; the lowest index wins ties.
    pub fn max(&mut self, items: &[Var]) -> Var {
        assert!(!items.is_empty(), "max over an empty list");
        let argmax = argmax_lowest(items.iter().map(|&v| self.scalar(v)));
        let value = self.value(items[argmax]).clone();
        let rg = items.iter().any(|&v| self.needs(v));
        self.push(Op::Max { items: items.to_vec(), argmax }, value, rg)
    }

    /// Recomputes every node from the leaf values and returns the results.
    /// A faithful recording reproduces the stored values bit for bit.
    pub fn replay(&self) -> Vec<Matrix> {
        let mut vals: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Input | Op::Param => node.value.clone(),
                Op::MatMulT { x, w } => vals[x.0].matmul_nt(&vals[w.0]),
                Op::AddBias { x, bias } => vals[x.0].add_row_broadcast(vals[bias.0].as_slice()),
                Op::Axpy { x, alpha, y } => vals[x.0].axpy(*alpha, &vals[y.0]),
                Op::Scale { x, alpha } => vals[x.0].scale(*alpha),
                Op::Activation { x, act } => vals[x.0].map(|v| act.apply(v)),
                Op::MeanSquaredError { pred, target } => {
                    Matrix::from_raw(1, 1, vec![mse_value(&vals[pred.0], &vals[target.0])])
                }
                Op::CrossEntropy { logits, labels } => {
                    Matrix::from_raw(1, 1, vec![cross_entropy_value(&vals[logits.0], labels)])
                }
                Op::SpectralNorm { w, tol, max_iter, .. } => {
                    let sigma = spectral_norm(&vals[w.0], *tol, *max_iter).map(|s| s.sigma).unwrap_or(f64::NAN);
                    Matrix::from_raw(1, 1, vec![sigma])
                }
                Op::Max { items, .. } => {
                    let idx = argmax_lowest(items.iter().map(|v| vals[v.0].get(0, 0)));
                    vals[items[idx].0].clone()
                }
            };
            vals.push(v);
        }
        vals
    }

    /// Reverse pass from a scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients, NumericsError> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(NumericsError::NonScalarOutput { rows: out.rows(), cols: out.cols() });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        adj[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Input | Op::Param => {
                    // Leaves keep their adjoint for collection below.
                    adj[idx] = Some(g);
                }
                Op::MatMulT { x, w } => {
                    if self.needs(*x) {
                        accumulate(&mut adj, *x, g.matmul(self.value(*w)));
                    }
                    if self.needs(*w) {
                        accumulate(&mut adj, *w, g.matmul_tn(self.value(*x)));
                    }
                }
                Op::AddBias { x, bias } => {
                    if self.needs(*bias) {
                        accumulate(&mut adj, *bias, g.column_sums());
                    }
                    if self.needs(*x) {
                        accumulate(&mut adj, *x, g);
                    }
                }
                Op::Axpy { x, alpha, y } => {
                    if self.needs(*y) {
                        accumulate(&mut adj, *y, g.scale(*alpha));
                    }
                    if self.needs(*x) {
                        accumulate(&mut adj, *x, g);
                    }
                }
                Op::Scale { x, alpha } => accumulate(&mut adj, *x, g.scale(*alpha)),
                Op::Activation { x, act } => {
                    let pre = self.value(*x).as_slice();
                    let post = node.value.as_slice();
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(pre.iter().zip(post))
                        .map(|(gi, (&xi, &yi))| gi * act.derivative(xi, yi))
                        .collect();
                    accumulate(&mut adj, *x, Matrix::from_raw(g.rows(), g.cols(), data));
                }
                Op::MeanSquaredError { pred, target } => {
                    let p = self.value(*pred);
                    let t = self.value(*target);
                    let scale = 2.0 * g.get(0, 0) / p.as_slice().len() as f64;
                    let d = p.sub(t).scale(scale);
                    if self.needs(*target) {
                        accumulate(&mut adj, *target, d.scale(-1.0));
                    }
                    if self.needs(*pred) {
                        accumulate(&mut adj, *pred, d);
                    }
                }
                Op::CrossEntropy { logits, labels } => {
                    let z = self.value(*logits);
                    let n = z.rows() as f64;
                    let mut d = softmax_rows(z);
                    for (i, &label) in labels.iter().enumerate() {
                        let cur = d.get(i, label);
                        d.set(i, label, cur - 1.0);
                    }
                    accumulate(&mut adj, *logits, d.scale(g.get(0, 0) / n));
                }
                Op::SpectralNorm { w, left, right, .. } => {
                    let scale = g.get(0, 0);
                    let mut d = Matrix::zeros(left.len(), right.len());
                    for (i, ui) in left.iter().enumerate() {
                        for (j, vj) in right.iter().enumerate() {
                            d.set(i, j, scale * ui * vj);
                        }
                    }
                    accumulate(&mut adj, *w, d);
                }
                Op::Max { items, argmax } => {
                    let winner = items[*argmax];
                    if self.needs(winner) {
                        accumulate(&mut adj, winner, g);
                    }
                }
            }
        }

        let per_param = self
            .params
            .iter()
            .map(|&p| match adj.get(p.0).and_then(Option::as_ref) {
                Some(g) => g.clone(),
                None => {
                    let (r, c) = self.value(p).shape();
                    Matrix::zeros(r, c)
                }
            })
            .collect();
        Ok(Gradients { per_param })
    }
}

fn accumulate(adj: &mut [Option<Matrix>], var: Var, g: Matrix) {
    match &mut adj[var.0] {
        Some(acc) => acc.add_assign_scaled(1.0, &g),
        slot @ None => *slot = Some(g),
    }
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub(crate) fn mse_value(pred: &Matrix, target: &Matrix) -> f64 {
    assert_eq!(pred.shape(), target.shape(), "mse shape mismatch");
    let n = pred.as_slice().len() as f64;
    pred.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

pub(crate) fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    let cols = z.cols();
    for row in out.as_mut_slice().chunks_mut(cols) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for x in row.iter_mut() {
            *x = (*x - m).exp();
            s += *x;
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    out
}

pub(crate) fn cross_entropy_value(logits: &Matrix, labels: &[usize]) -> f64 {
    assert_eq!(logits.rows(), labels.len(), "one label per logit row");
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    total / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::filled(1, 1, x)
    }

    #[test]
    fn square_has_gradient_two_p() {
        let mut tape = GradientTape::new();
        let p = tape.param(scalar(3.0));
        let zero = tape.input(scalar(0.0));
        // p² through mse against zero: mean of (p - 0)² over one entry.
        let out = tape.mse(p, zero);
        let g = tape.backward(out).unwrap();
        assert_eq!(tape.scalar(out), 9.0);
        assert_eq!(g.per_param[0].get(0, 0), 6.0);
    }

    #[test]
    fn independent_parameter_gets_exact_zero() {
        let mut tape = GradientTape::new();
        let p = tape.param(scalar(2.0));
        let q = tape.param(Matrix::filled(2, 3, 1.5));
        let out = tape.scale(p, 4.0);
        let g = tape.backward(out).unwrap();
        assert_eq!(g.per_param[0].get(0, 0), 4.0);
        assert_eq!(g.per_param[1], Matrix::zeros(2, 3));
        let _ = q;
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        let mut tape = GradientTape::new();
        let p = tape.param(scalar(1.5));
        let twice = tape.add(p, p);
        let out = tape.axpy(twice, 3.0, p);
        let g = tape.backward(out).unwrap();
        assert_eq!(g.per_param[0].get(0, 0), 5.0);
    }

    #[test]
    fn rejects_non_scalar_output() {
        let mut tape = GradientTape::new();
        let p = tape.param(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(p), Err(NumericsError::NonScalarOutput { rows: 2, cols: 2 })));
    }

    #[test]
    fn spectral_penalty_gradient_is_outer_product() {
        let mut tape = GradientTape::new();
        let w = tape.param(Matrix::from_diag(&[3.0, 1.0]));
        let s = tape.spectral_norm(w, 1e-12, 1000).unwrap();
        let out = tape.scale(s, 0.1);
        assert!((tape.scalar(out) - 0.3).abs() < 1e-12);
        let g = tape.backward(out).unwrap();
        let expect = [0.1, 0.0, 0.0, 0.0];
        for (a, b) in g.per_param[0].as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn max_routes_gradient_to_lowest_argmax() {
        let mut tape = GradientTape::new();
        let a = tape.param(scalar(5.0));
        let b = tape.param(scalar(5.0));
        let c = tape.param(scalar(2.0));
        let m = tape.max(&[a, b, c]);
        let g = tape.backward(m).unwrap();
        let got: Vec<f64> = g.per_param.iter().map(|m| m.get(0, 0)).collect();
        assert_eq!(got, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln2() {
        let mut tape = GradientTape::new();
        let z = tape.param(Matrix::zeros(1, 2));
        let ce = tape.cross_entropy(z, &[0]);
        assert!((tape.scalar(ce) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = tape.backward(ce).unwrap();
        assert_eq!(g.per_param[0].as_slice(), &[-0.5, 0.5]);
    }

    #[test]
    fn replay_reproduces_recorded_values() {
        let mut tape = GradientTape::new();
        let x = tape.input(Matrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.5]]).unwrap());
        let w = tape.param(Matrix::from_rows(&[vec![0.7, -0.1], vec![0.2, 0.9], vec![-0.4, 0.3]]).unwrap());
        let b = tape.param(Matrix::row_vector(&[0.1, -0.2, 0.05]).unwrap());
        let h = tape.matmul_t(x, w);
        let h = tape.add_bias(h, b);
        let h = tape.activation(h, Activation::Tanh);
        let s = tape.spectral_norm(w, 1e-12, 1000).unwrap();
        let t = tape.input(Matrix::zeros(2, 3));
        let l = tape.mse(h, t);
        let out = tape.axpy(l, 0.5, s);
        let replayed = tape.replay();
        for (i, v) in replayed.iter().enumerate() {
            assert_eq!(v, tape.value(Var(i)));
        }
        assert!(tape.backward(out).is_ok());
    }
}
