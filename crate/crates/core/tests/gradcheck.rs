mod common;

use common::Composition;
use ivegan::autodiff::{finite_difference_grad, Tape, Tensor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_compositions_match_central_differences(seed in any::<u64>()) {
        let c = Composition::random(seed);
        let err = c.max_gradient_error();
        prop_assert!(err < 1e-5, "relative error {err:e} for {}", c.describe());
    }

    #[test]
    fn softplus_is_finite_and_exact_at_extremes(x in -800.0f64..800.0) {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![x]).unwrap());
        let s = tape.softplus(a).unwrap();
        let v = tape.value(s).data()[0];
        prop_assert!(v.is_finite() && v >= 0.0);
        prop_assert!(v >= x);
        if x.abs() < 30.0 {
            prop_assert!((v - x.exp().ln_1p()).abs() < 1e-12);
        }
    }
}

#[test]
fn matmul_sum_gradient_is_column_sums_of_b() {
    let a = Tensor::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 0.1]]).unwrap();
    let b = Tensor::from_rows(&[vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]]).unwrap();
    let mut tape = Tape::new();
    let (na, nb) = (tape.param(a.clone()), tape.param(b.clone()));
    let c = tape.matmul(na, nb).unwrap();
    let l = tape.mean_all(c).unwrap();
    let l = tape.scale(l, 9.0).unwrap();
    let g = tape.backward(l).unwrap();
    let ga = g.get(na).unwrap();
    for i in 0..3 {
        assert_eq!(ga.row(i), &[2.0, 3.5]);
    }
    let fd = finite_difference_grad(
        |t| {
            let mut tp = Tape::new();
            let x = tp.constant(t.clone());
            let y = tp.constant(b.clone());
            let c = tp.matmul(x, y).unwrap();
            tp.value(c).data().iter().sum()
        },
        &a,
        1e-6,
    );
    assert!(ga.max_abs_diff(&fd) < 1e-8);
}
