use std::collections::BTreeMap;
use std::ops::Range;

use super::{AutodiffError, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Param,
    Constant,
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    LRelu(NodeId, f64),
    Sigmoid(NodeId),
    Softplus(NodeId),
    MeanAll(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of a forward computation (define-by-run).
///
/// Inputs of a node always precede it, so the node order is a topological
/// order and backward is a single reverse sweep.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_leaf: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.by_leaf.get(&id)
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor)> {
        self.by_leaf.iter().map(|(k, v)| (*k, v))
    }
}

fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Below this many output columns the kernel switches to a transposed
/// operand so the inner loops run along `k` instead.
const NARROW: usize = 8;
/// Register tile of the wide kernel: `MR` output rows by `NR` columns.
const MR: usize = 4;
const NR: usize = 8;

fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; x.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = x[i * cols + j];
        }
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[m×n] += a[m×k] · b[k×n]`, all row-major.
fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    if n < NARROW {
        let bt = transpose(b, k, n);
        for i in 0..m {
            let a_row = &a[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] += dot(a_row, &bt[j * k..(j + 1) * k]);
            }
        }
        return;
    }
    let full_rows = m - m % MR;
    let full_cols = n - n % NR;
    // Both operands are packed so the tile reads contiguous memory: row
    // panels of `a` as `[k × MR]`, column strips of `b` as `[k × NR]`.
    let mut panels = vec![0.0; full_rows * k];
    for (i0, panel) in (0..full_rows).step_by(MR).zip(panels.chunks_exact_mut(MR * k)) {
        for (p, dst) in panel.chunks_exact_mut(MR).enumerate() {
            for (r, d) in dst.iter_mut().enumerate() {
                *d = a[(i0 + r) * k + p];
            }
        }
    }
    let mut strip = vec![0.0; k * NR];
    for j0 in (0..full_cols).step_by(NR) {
        for (dst, src) in strip.chunks_exact_mut(NR).zip(b.chunks_exact(n)) {
            dst.copy_from_slice(&src[j0..j0 + NR]);
        }
        for (i0, panel) in (0..full_rows).step_by(MR).zip(panels.chunks_exact(MR * k)) {
            tile(panel, &strip, out, i0, j0, n);
        }
    }
    edge(a, b, out, 0..full_rows, full_cols..n, k, n);
    edge(a, b, out, full_rows..m, 0..n, k, n);
}

/// One `MR×NR` block of `out`, held in registers across the whole `k` loop.
#[inline(always)]
fn tile(panel: &[f64], strip: &[f64], out: &mut [f64], i0: usize, j0: usize, n: usize) {
    let mut c = [[0.0; NR]; MR];
    for (r, row) in c.iter_mut().enumerate() {
        row.copy_from_slice(&out[(i0 + r) * n + j0..][..NR]);
    }
    for (ap, bp) in panel.chunks_exact(MR).zip(strip.chunks_exact(NR)) {
        let ap: &[f64; MR] = ap.try_into().unwrap();
        // Zero rows are common in image batches.
        if *ap == [0.0; MR] {
            continue;
        }
        let bp: &[f64; NR] = bp.try_into().unwrap();
        for r in 0..MR {
            for l in 0..NR {
                c[r][l] += ap[r] * bp[l];
            }
        }
    }
    for (r, row) in c.iter().enumerate() {
        out[(i0 + r) * n + j0..][..NR].copy_from_slice(row);
    }
}

fn edge(a: &[f64], b: &[f64], out: &mut [f64], rows: Range<usize>, cols: Range<usize>, k: usize, n: usize) {
    if cols.is_empty() {
        return;
    }
    for i in rows {
        let out_row = &mut out[i * n + cols.start..i * n + cols.end];
        for p in 0..k {
            let av = a[i * k + p];
            if av != 0.0 {
                for (o, &v) in out_row.iter_mut().zip(&b[p * n + cols.start..p * n + cols.end]) {
                    *o += av * v;
                }
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    gemm(a, b, out, m, k, n);
}

/// `acc[m×k] += g[m×n] · b[k×n]ᵀ`
fn matmul_nt_into(g: &[f64], b: &[f64], acc: &mut [f64], m: usize, k: usize, n: usize) {
    gemm(g, &transpose(b, k, n), acc, m, n, k);
}

/// `acc[k×n] += a[m×k]ᵀ · g[m×n]`
fn matmul_tn_into(a: &[f64], g: &[f64], acc: &mut [f64], m: usize, k: usize, n: usize) {
    gemm(&transpose(a, m, k), g, acc, k, m, n);
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node, AutodiffError> {
        self.nodes
            .get(id.0)
            .ok_or(AutodiffError::UnknownNode(id.0))
    }

    fn grad_of(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn checked(&self, op: &'static str, shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, AutodiffError> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFiniteResult { op, index: i });
        }
        Ok(Tensor::from_parts(shape, data))
    }

    /// Records a trainable leaf; backward reports a gradient for it.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Param, value, true)
    }

    /// Records a leaf that is never differentiated.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn try_value(&self, id: NodeId) -> Result<&Tensor, AutodiffError> {
        Ok(&self.node(id)?.value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (&self.node(a)?.value, &self.node(b)?.value);
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.cols() != vb.rows() {
            return Err(AutodiffError::shape("matmul", va, vb));
        }
        let (m, k, n) = (va.rows(), va.cols(), vb.cols());
        let mut out = vec![0.0; m * n];
        matmul_into(va.data(), vb.data(), &mut out, m, k, n);
        let value = self.checked("matmul", vec![m, n], out)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (&self.node(a)?.value, &self.node(bias)?.value);
        if va.shape().len() != 2 || vb.shape().len() != 1 || va.cols() != vb.cols() {
            return Err(AutodiffError::shape("add_bias", va, vb));
        }
        let n = va.cols();
        let b = vb.data();
        let mut out = va.data().to_vec();
        for row in out.chunks_exact_mut(n.max(1)) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let value = self.checked("add_bias", va.shape().to_vec(), out)?;
        let rg = self.grad_of(&[a, bias]);
        Ok(self.push(Op::AddBias(a, bias), value, rg))
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (&self.node(a)?.value, &self.node(b)?.value);
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.rows() != vb.rows() {
            return Err(AutodiffError::shape("concat", va, vb));
        }
        let (m, p, q) = (va.rows(), va.cols(), vb.cols());
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(&va.data()[i * p..(i + 1) * p]);
            out.extend_from_slice(&vb.data()[i * q..(i + 1) * q]);
        }
        let value = Tensor::from_parts(vec![m, p + q], out);
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Op::Concat(a, b), value, rg))
    }

    /// Elementwise sum of two same-shaped tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (&self.node(a)?.value, &self.node(b)?.value);
        if va.shape() != vb.shape() {
            return Err(AutodiffError::shape("add", va, vb));
        }
        let out = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let value = self.checked("add", va.shape().to_vec(), out)?;
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, AutodiffError> {
        if !factor.is_finite() {
            return Err(AutodiffError::NonFiniteResult { op: "scale", index: 0 });
        }
        let va = &self.node(a)?.value;
        let out = va.data().iter().map(|x| x * factor).collect();
        let value = self.checked("scale", va.shape().to_vec(), out)?;
        let rg = self.grad_of(&[a]);
        Ok(self.push(Op::Scale(a, factor), value, rg))
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId, AutodiffError> {
        let va = &self.node(a)?.value;
        let out = va.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::from_parts(va.shape().to_vec(), out);
        let rg = self.grad_of(&[a]);
        Ok(self.push(op, value, rg))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.unary(a, Op::Tanh(a), tanh)
    }

    /// Leaky ReLU; the subgradient at exactly zero is 1.
    pub fn lrelu(&mut self, a: NodeId, slope: f64) -> Result<NodeId, AutodiffError> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(AutodiffError::Slope(slope));
        }
        self.unary(a, Op::LRelu(a, slope), |x| if x >= 0.0 { x } else { slope * x })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.unary(a, Op::Sigmoid(a), sigmoid_scalar)
    }

    /// `log(1 + exp(x))`, evaluated as `max(x, 0) + log1p(exp(-|x|))`.
    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.unary(a, Op::Softplus(a), softplus_scalar)
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let va = &self.node(a)?.value;
        if va.is_empty() {
            return Err(AutodiffError::Empty("mean_all"));
        }
        let mean = va.data().iter().sum::<f64>() / va.len() as f64;
        let rg = self.grad_of(&[a]);
        Ok(self.push(Op::MeanAll(a), Tensor::from_parts(vec![1], vec![mean]), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Returns a gradient for every trainable leaf on the tape; leaves the loss
    /// does not depend on receive zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(AutodiffError::NotScalar(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match node.op {
                Op::Param | Op::Constant => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    if self.nodes[a.0].requires_grad {
                        let acc = grads[a.0].get_or_insert_with(|| vec![0.0; m * k]);
                        matmul_nt_into(&g, vb.data(), acc, m, k, n);
                    }
                    if self.nodes[b.0].requires_grad {
                        let acc = grads[b.0].get_or_insert_with(|| vec![0.0; k * n]);
                        matmul_tn_into(va.data(), &g, acc, m, k, n);
                    }
                }
                Op::AddBias(a, b) => {
                    let n = self.nodes[b.0].value.len();
                    if self.nodes[b.0].requires_grad {
                        let acc = grads[b.0].get_or_insert_with(|| vec![0.0; n]);
                        for row in g.chunks_exact(n.max(1)) {
                            for (o, &gv) in acc.iter_mut().zip(row) {
                                *o += gv;
                            }
                        }
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads[a.0], &g);
                    }
                }
                Op::Concat(a, b) => {
                    let p = self.nodes[a.0].value.cols();
                    let q = self.nodes[b.0].value.cols();
                    let m = self.nodes[a.0].value.rows();
                    if self.nodes[a.0].requires_grad {
                        let acc = grads[a.0].get_or_insert_with(|| vec![0.0; m * p]);
                        for i in 0..m {
                            for j in 0..p {
                                acc[i * p + j] += g[i * (p + q) + j];
                            }
                        }
                    }
                    if self.nodes[b.0].requires_grad {
                        let acc = grads[b.0].get_or_insert_with(|| vec![0.0; m * q]);
                        for i in 0..m {
                            for j in 0..q {
                                acc[i * q + j] += g[i * (p + q) + p + j];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for x in [a, b] {
                        if self.nodes[x.0].requires_grad {
                            accumulate(&mut grads[x.0], &g);
                        }
                    }
                }
                Op::Scale(a, c) => {
                    let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
                    accumulate(&mut grads[a.0], &scaled);
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let local: Vec<f64> = g.iter().zip(y).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect();
                    accumulate(&mut grads[a.0], &local);
                }
                Op::LRelu(a, slope) => {
                    let x = self.nodes[a.0].value.data();
                    let local: Vec<f64> = g
                        .iter()
                        .zip(x)
                        .map(|(gv, &xv)| if xv >= 0.0 { *gv } else { gv * slope })
                        .collect();
                    accumulate(&mut grads[a.0], &local);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    let local: Vec<f64> = g.iter().zip(y).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect();
                    accumulate(&mut grads[a.0], &local);
                }
                Op::Softplus(a) => {
                    let x = self.nodes[a.0].value.data();
                    let local: Vec<f64> = g.iter().zip(x).map(|(gv, &xv)| gv * sigmoid_scalar(xv)).collect();
                    accumulate(&mut grads[a.0], &local);
                }
                Op::MeanAll(a) => {
                    let n = self.nodes[a.0].value.len();
                    let share = g[0] / n as f64;
                    let acc = grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                    for o in acc.iter_mut() {
                        *o += share;
                    }
                }
            }
        }

        let mut by_leaf = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.op != Op::Param {
                continue;
            }
            let shape = node.value.shape().to_vec();
            let data = match grads.get_mut(idx).and_then(Option::take) {
                Some(d) => d,
                None => vec![0.0; node.value.len()],
            };
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(AutodiffError::NonFiniteResult { op: "backward", index: i });
            }
            by_leaf.insert(NodeId(idx), Tensor::from_parts(shape, data));
        }
        Ok(Gradients { by_leaf })
    }
}

/// `e^x` for `x` in `[0, 80]`: range reduction by `ln 2` and a degree-13
/// Taylor polynomial, written without branches or float/int casts so the
/// element loops vectorize. Within 1 ulp of `f64::exp` on that interval.
#[inline(always)]
fn exp_nonneg(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    const COEFFS: [f64; 13] = [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ];
    let shifted = x * std::f64::consts::LOG2_E + SHIFT;
    let k = shifted - SHIFT;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in COEFFS {
        p = p * r + c;
    }
    let scale = f64::from_bits(shifted.to_bits().wrapping_sub(SHIFT.to_bits()).wrapping_add(1023) << 52);
    p * scale
}

#[inline(always)]
fn tanh(x: f64) -> f64 {
    let e = exp_nonneg(2.0 * x.abs().min(40.0));
    (1.0 - 2.0 / (e + 1.0)).copysign(x)
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => {
            for (o, &v) in acc.iter_mut().zip(g) {
                *o += v;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn matmul_kernels_agree_on_narrow_and_wide_shapes() {
        for &(m, k, n) in &[(3, 5, 1), (4, 3, 2), (2, 9, 11), (5, 1, 8), (3, 4, 7), (8, 6, 16), (9, 13, 21), (4, 9, 8)] {
            let a: Vec<f64> = (0..m * k).map(|v| (v as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|v| (v as f64 * 0.91).cos()).collect();
            let g: Vec<f64> = (0..m * n).map(|v| (v as f64 * 0.53).sin()).collect();
            let naive = |i: usize, j: usize| (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum::<f64>();
            let mut out = vec![0.0; m * n];
            super::matmul_into(&a, &b, &mut out, m, k, n);
            let mut da = vec![0.0; m * k];
            super::matmul_nt_into(&g, &b, &mut da, m, k, n);
            let mut db = vec![0.0; k * n];
            super::matmul_tn_into(&a, &g, &mut db, m, k, n);
            for i in 0..m {
                for j in 0..n {
                    assert!((out[i * n + j] - naive(i, j)).abs() < 1e-12);
                }
                for p in 0..k {
                    let want: f64 = (0..n).map(|j| g[i * n + j] * b[p * n + j]).sum();
                    assert!((da[i * k + p] - want).abs() < 1e-12);
                }
            }
            for p in 0..k {
                for j in 0..n {
                    let want: f64 = (0..m).map(|i| a[i * k + p] * g[i * n + j]).sum();
                    assert!((db[p * n + j] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fast_tanh_tracks_libm() {
        let mut worst = 0.0f64;
        for i in 0..400_001 {
            let x = i as f64 * 1e-4 - 20.0;
            worst = worst.max((super::tanh(x) - x.tanh()).abs());
        }
        assert!(worst <= 4.0 * f64::EPSILON, "{worst:e}");
        assert_eq!(super::tanh(0.0), 0.0);
        assert_eq!(super::tanh(1e3), 1.0);
        assert_eq!(super::tanh(-1e3), -1.0);
        let mut worst_exp = 0.0f64;
        for i in 0..80_001 {
            let x = i as f64 * 1e-3;
            worst_exp = worst_exp.max((super::exp_nonneg(x) / x.exp() - 1.0).abs());
        }
        assert!(worst_exp <= 4.0 * f64::EPSILON, "{worst_exp:e}");
    }

    use super::*;
    use crate::autodiff::finite_difference_grad;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_hand_checked_and_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(m(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = tape.constant(m(&[vec![1.0], vec![1.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);

        let i = tape.constant(Tensor::identity(2));
        let ai = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(ai), tape.value(a));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn add_bias_and_bias_gradient_counts_rows() {
        let mut tape = Tape::new();
        let a = tape.constant(m(&[vec![1.0, 1.0]]));
        let b = tape.constant(Tensor::vector(vec![2.0, 3.0]).unwrap());
        let c = tape.add_bias(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 4.0]);

        let zero = tape.constant(Tensor::zeros(&[2]));
        let same = tape.add_bias(a, zero).unwrap();
        assert_eq!(tape.value(same), tape.value(a));

        // d/db sum(A + b) = batch size, checked by central differences too.
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[5, 3]));
        let bias0 = Tensor::vector(vec![0.1, -0.2, 0.3]).unwrap();
        let b = tape.param(bias0.clone());
        let s = tape.add_bias(a, b).unwrap();
        let mean = tape.mean_all(s).unwrap();
        let loss = tape.scale(mean, 15.0).unwrap();
        let g = tape.backward(loss).unwrap();
        let fd = finite_difference_grad(
            |bias| {
                let mut t = Tape::new();
                let a = t.constant(Tensor::zeros(&[5, 3]));
                let b = t.constant(bias.clone());
                let s = t.add_bias(a, b).unwrap();
                let mean = t.mean_all(s).unwrap();
                t.value(mean).item().unwrap() * 15.0
            },
            &bias0,
            1e-6,
        );
        for (x, y) in g.get(b).unwrap().data().iter().zip(fd.data()) {
            assert!((x - 5.0).abs() < 1e-12);
            assert!((y - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn concat_values_and_empty_width() {
        let mut tape = Tape::new();
        let a = tape.constant(m(&[vec![1.0]]));
        let b = tape.constant(m(&[vec![2.0, 3.0]]));
        let c = tape.concat(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0]);
        assert_eq!(tape.value(c).shape(), &[1, 3]);

        let e = tape.constant(Tensor::zeros(&[1, 0]));
        let same = tape.concat(a, e).unwrap();
        assert_eq!(tape.value(same), tape.value(a));

        let tall = tape.constant(Tensor::zeros(&[2, 1]));
        assert!(tape.concat(a, tall).is_err());
    }

    #[test]
    fn tanh_at_zero_and_saturation() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.0, 30.0]).unwrap());
        let y = tape.tanh(x).unwrap();
        assert_eq!(tape.value(y).data()[0], 0.0);
        assert!((tape.value(y).data()[1] - 1.0).abs() < 1e-15);
        let s = tape.mean_all(y).unwrap();
        let l = tape.scale(s, 2.0).unwrap();
        let g = tape.backward(l).unwrap();
        let gx = g.get(x).unwrap().data();
        assert_eq!(gx[0], 1.0);
        assert!(gx[1].abs() < 1e-20);
    }

    #[test]
    fn lrelu_values_gradient_and_slope_check() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap());
        let y = tape.lrelu(x, 0.2).unwrap();
        assert_eq!(tape.value(y).data(), &[-0.2, 0.0, 2.0]);
        let s = tape.mean_all(y).unwrap();
        let l = tape.scale(s, 3.0).unwrap();
        let g = tape.backward(l).unwrap();
        let gx = g.get(x).unwrap().data();
        assert!((gx[0] - 0.2).abs() < 1e-15);
        assert_eq!(gx[1], 1.0);
        assert_eq!(gx[2], 1.0);

        let fd = finite_difference_grad(|t| t.data()[0].min(0.0) * 0.2 + t.data()[0].max(0.0), &Tensor::vector(vec![-1.0]).unwrap(), 1e-6);
        assert!((fd.data()[0] - 0.2).abs() < 1e-8);

        assert!(tape.lrelu(x, 0.0).is_err());
        assert!(tape.lrelu(x, 1.0).is_err());
    }

    #[test]
    fn softplus_analytic_and_extremes() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.0, -1000.0, 1000.0, -1e6, 1e6]).unwrap());
        let y = tape.softplus(x).unwrap();
        let v = tape.value(y).data();
        assert!((v[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 1000.0);
        assert_eq!(v[4], 1e6);
        let s = tape.mean_all(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mean_all_values_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
        let mu = tape.mean_all(x).unwrap();
        assert_eq!(tape.value(mu).item().unwrap(), 2.0);
        let g = tape.backward(mu).unwrap();
        for v in g.get(x).unwrap().data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let c = tape.constant(Tensor::vector(vec![4.5; 7]).unwrap());
        let mc = tape.mean_all(c).unwrap();
        assert_eq!(tape.value(mc).item().unwrap(), 4.5);

        let e = tape.constant(Tensor::zeros(&[0]));
        assert!(matches!(tape.mean_all(e), Err(AutodiffError::Empty(_))));
    }

    #[test]
    fn backward_on_single_leaf_and_unreachable_leaf() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0).unwrap());
        let other = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let _unused = tape.tanh(other).unwrap();
        let g = tape.backward(x).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0]);
        assert_eq!(g.get(other).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_unknown() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        assert!(matches!(tape.backward(x), Err(AutodiffError::NotScalar(_))));
        assert!(matches!(tape.backward(NodeId(17)), Err(AutodiffError::UnknownNode(17))));
    }

    #[test]
    fn overflow_is_reported() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1e300]).unwrap());
        assert!(tape.scale(a, 1e300).is_err());
    }
}
