//! Compares reverse-mode gradients of a small two-layer network loss with
//! central differences, parameter by parameter.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use ivegan::autodiff::{finite_difference_grad, max_relative_error, Tape, Tensor};
use ivegan::model::init_rng;
use ivegan::nn::{Activation, LayerSpec, Network};
use rand::Rng;

fn loss(net: &Network, x: &Tensor) -> (Tape, ivegan::autodiff::NodeId, Vec<ivegan::autodiff::NodeId>) {
    let mut tape = Tape::new();
    let bound = net.bind(&mut tape, true);
    let input = tape.constant(x.clone());
    let out = bound.forward(&mut tape, input).unwrap();
    let sp = tape.softplus(out).unwrap();
    let l = tape.mean_all(sp).unwrap();
    let ids = bound.param_ids().to_vec();
    (tape, l, ids)
}

fn main() {
    let mut rng = init_rng(4);
    let specs = [
        LayerSpec::new(3, 6, Activation::Tanh),
        LayerSpec::new(6, 4, Activation::Lrelu { slope: 0.2 }),
        LayerSpec::new(4, 1, Activation::Linear),
    ];
    let net = Network::init(&specs, &mut rng).unwrap();
    let x = Tensor::new(vec![5, 3], (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();

    let (tape, l, ids) = loss(&net, &x);
    println!("loss {:.12}", tape.value(l).item().unwrap());
    let grads = tape.backward(l).unwrap();

    let params: Vec<Tensor> = net.params().into_iter().cloned().collect();
    for (i, id) in ids.iter().enumerate() {
        let numeric = finite_difference_grad(
            |t| {
                let mut p = params.clone();
                p[i] = t.clone();
                let mut probe = net.clone();
                for (dst, src) in probe.params_mut().into_iter().zip(&p) {
                    *dst = src.clone();
                }
                let (tape, l, _) = loss(&probe, &x);
                tape.value(l).item().unwrap()
            },
            &params[i],
            1e-5,
        );
        let err = max_relative_error(grads.get(*id).unwrap(), &numeric, 1e-4);
        println!("parameter {i} {:?}: max relative error {err:.2e}", params[i].shape());
    }
}
