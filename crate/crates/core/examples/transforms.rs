//! The two invariance transforms: Gaussian shifts of 2-D points and random
//! pixel shifts plus rotations of images.
//!
//! ```text
//! cargo run --release --example transforms
//! ```

use ivegan::autodiff::Tensor;
use ivegan::model::init_rng;
use ivegan::transforms::{gaussian_shift, image_affine};

fn show(img: &[f64], side: usize) {
    for row in img.chunks(side) {
        let line: String = row.iter().map(|&v| if v > 0.5 { '#' } else if v > 0.1 { '+' } else { '.' }).collect();
        println!("  {line}");
    }
}

fn main() {
    let sigma = [[0.02, 0.006], [0.006, 0.01]];
    let n = 50_000;
    let t = gaussian_shift(&Tensor::zeros(&[n, 2]), &sigma, &mut init_rng(1)).unwrap();
    let d = t.data();
    let mut c = [[0.0; 2]; 2];
    for p in d.chunks(2) {
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += p[a] * p[b] / n as f64;
            }
        }
    }
    println!("shift covariance over {n} draws (expected Σ/2):");
    for a in 0..2 {
        println!("  [{:.5} {:.5}]  vs  [{:.5} {:.5}]", c[a][0], c[a][1], sigma[a][0] / 2.0, sigma[a][1] / 2.0);
    }

    // A hollow square on a 14×14 canvas.
    let side = 14;
    let img: Vec<f64> = (0..side * side)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            let edge = (r == 4 || r == 9) && (4..=9).contains(&c) || (c == 4 || c == 9) && (4..=9).contains(&r);
            if edge { 1.0 } else { 0.0 }
        })
        .collect();
    println!("original:");
    show(&img, side);
    for (dx, dy, deg) in [(2.0, 0.0, 0.0), (0.0, -2.0, 20.0), (-1.0, 1.0, -15.0)] {
        println!("shift ({dx}, {dy}) px, rotate {deg}°:");
        show(&image_affine(&img, side, side, dx, dy, deg).unwrap(), side);
    }
}
