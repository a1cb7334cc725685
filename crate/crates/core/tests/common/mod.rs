#![allow(dead_code)]

use ivegan::autodiff::{finite_difference_grad, max_relative_error, NodeId, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
enum Op {
    MatMul(usize),
    AddBias(usize),
    ConcatParam(usize),
    Tanh,
    Sigmoid,
    Softplus,
    LRelu(f64),
    Scale(f64),
    /// `h + tanh(h)`: the current node feeds two consumers.
    Residual,
}

/// A random chain of tape operations over random parameter leaves, reduced
/// to a scalar by `mean_all`.
#[derive(Clone, Debug)]
pub struct Composition {
    params: Vec<Tensor>,
    ops: Vec<Op>,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

impl Composition {
    pub fn random(seed: u64) -> Self {
        let mut attempt = 0;
        loop {
            let c = Self::draw(seed, attempt);
            if c.lrelu_margin() > 10.0 * FD_STEP {
                return c;
            }
            attempt += 1;
        }
    }

    fn draw(seed: u64, attempt: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(attempt));
        let m = rng.random_range(1..5);
        let mut cols = rng.random_range(1..5);
        let mut params = vec![random_tensor(&mut rng, &[m, cols])];
        let mut ops = Vec::new();
        for _ in 0..rng.random_range(1..7) {
            let op = match rng.random_range(0..9) {
                0 => {
                    let n = rng.random_range(1..5);
                    params.push(random_tensor(&mut rng, &[cols, n]));
                    cols = n;
                    Op::MatMul(params.len() - 1)
                }
                1 => {
                    params.push(random_tensor(&mut rng, &[cols]));
                    Op::AddBias(params.len() - 1)
                }
                2 => {
                    let q = rng.random_range(1..3);
                    params.push(random_tensor(&mut rng, &[m, q]));
                    cols += q;
                    Op::ConcatParam(params.len() - 1)
                }
                3 => Op::Tanh,
                4 => Op::Sigmoid,
                5 => Op::Softplus,
                6 => Op::LRelu(rng.random_range(0.05..0.5)),
                7 => Op::Scale(rng.random_range(-2.0..2.0)),
                _ => Op::Residual,
            };
            ops.push(op);
        }
        Self { params, ops }
    }

    pub fn describe(&self) -> String {
        format!("{:?}", self.ops)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn record(&self, tape: &mut Tape, params: &[Tensor]) -> (Vec<NodeId>, NodeId, Vec<NodeId>) {
        let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
        let mut h = ids[0];
        let mut lrelu_inputs = Vec::new();
        for op in &self.ops {
            h = match *op {
                Op::MatMul(i) => tape.matmul(h, ids[i]).unwrap(),
                Op::AddBias(i) => tape.add_bias(h, ids[i]).unwrap(),
                Op::ConcatParam(i) => tape.concat(h, ids[i]).unwrap(),
                Op::Tanh => tape.tanh(h).unwrap(),
                Op::Sigmoid => tape.sigmoid(h).unwrap(),
                Op::Softplus => tape.softplus(h).unwrap(),
                Op::LRelu(s) => {
                    lrelu_inputs.push(h);
                    tape.lrelu(h, s).unwrap()
                }
                Op::Scale(c) => tape.scale(h, c).unwrap(),
                Op::Residual => {
                    let t = tape.tanh(h).unwrap();
                    tape.add(h, t).unwrap()
                }
            };
        }
        let loss = tape.mean_all(h).unwrap();
        (ids, loss, lrelu_inputs)
    }

    /// Smallest distance of any leaky-ReLU input from its kink.
    fn lrelu_margin(&self) -> f64 {
        let mut tape = Tape::new();
        let (_, _, inputs) = self.record(&mut tape, &self.params);
        inputs
            .iter()
            .flat_map(|&n| tape.value(n).data().to_vec())
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, params: &[Tensor]) -> f64 {
        let mut tape = Tape::new();
        let (_, loss, _) = self.record(&mut tape, params);
        tape.value(loss).item().unwrap()
    }

    /// Largest relative error between reverse-mode and central-difference
    /// gradients over all parameter leaves.
    pub fn max_gradient_error(&self) -> f64 {
        let mut tape = Tape::new();
        let (ids, loss, _) = self.record(&mut tape, &self.params);
        let grads = tape.backward(loss).unwrap();
        let mut worst: f64 = 0.0;
        for (i, id) in ids.iter().enumerate() {
            let numeric = finite_difference_grad(
                |t| {
                    let mut ps = self.params.clone();
                    ps[i] = t.clone();
                    self.eval(&ps)
                },
                &self.params[i],
                FD_STEP,
            );
            let analytic = grads.get(*id).unwrap();
            assert_eq!(analytic.shape(), self.params[i].shape());
            worst = worst.max(max_relative_error(analytic, &numeric, REL_FLOOR));
        }
        worst
    }
}
