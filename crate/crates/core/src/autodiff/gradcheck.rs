use super::Tensor;

/// Central-difference gradient of a scalar function:
/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate `i`.
pub fn finite_difference_grad(f: impl Fn(&Tensor) -> f64, at: &Tensor, h: f64) -> Tensor {
    assert!(h > 0.0, "step must be positive");
    let mut probe = at.clone();
    let mut out = vec![0.0; at.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let x0 = at.data()[i];
        probe.data_mut()[i] = x0 + h;
        let up = f(&probe);
        probe.data_mut()[i] = x0 - h;
        let down = f(&probe);
        probe.data_mut()[i] = x0;
        *slot = (up - down) / (2.0 * h);
    }
    Tensor::from_parts(at.shape().to_vec(), out)
}

/// `max_i |a_i − b_i| / max(|a_i|, floor)`.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(floor))
        .fold(0.0, f64::max)
}
