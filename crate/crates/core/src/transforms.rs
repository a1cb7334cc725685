//! Invariant transformations `T(x)`: additive Gaussian shifts for point data
//! and small random shift/rotation augmentation for square images.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("covariance {0:?} is not symmetric positive semidefinite")]
    NotPsd([[f64; 2]; 2]),
    #[error("rotation of {0} degrees is outside [-45, 45]")]
    Rotation(f64),
    #[error("shift ({dx}, {dy}) must be smaller than the image side {side}")]
    Shift { dx: f64, dy: f64, side: usize },
    #[error("transform expects rows of width {expected}, got {found}")]
    Width { expected: usize, found: usize },
    #[error("negative transform bound")]
    NegativeBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransformSpec {
    /// `T(x) = x + t`, `t ~ N(0, Σ/2)` for 2-D points.
    GaussianShift { sigma: [[f64; 2]; 2] },
    /// Random integer shift in `±max_shift_px` and rotation in
    /// `±max_rot_deg`, applied to row-flattened `height × width` images.
    ImageAffine {
        height: usize,
        width: usize,
        max_shift_px: u32,
        max_rot_deg: f64,
    },
}

impl TransformSpec {
    pub fn validate(&self) -> Result<(), TransformError> {
        match self {
            TransformSpec::GaussianShift { sigma } => cholesky_half(sigma).map(|_| ()),
            TransformSpec::ImageAffine {
                height,
                width,
                max_shift_px,
                max_rot_deg,
            } => {
                if !(*max_rot_deg >= 0.0) {
                    return Err(TransformError::NegativeBound);
                }
                if *max_rot_deg > 45.0 {
                    return Err(TransformError::Rotation(*max_rot_deg));
                }
                let side = (*height).min(*width);
                if *max_shift_px as usize >= side {
                    let d = f64::from(*max_shift_px);
                    return Err(TransformError::Shift { dx: d, dy: d, side });
                }
                Ok(())
            }
        }
    }
}

/// Lower Cholesky factor of `Σ/2`. Semidefinite inputs (including `Σ = 0`)
/// are accepted.
fn cholesky_half(sigma: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2], TransformError> {
    let [[a, b], [c, d]] = *sigma;
    let finite = sigma.iter().flatten().all(|v| v.is_finite());
    let tol = 1e-12 * (a.abs() + d.abs()).max(1e-300);
    if !finite || (b - c).abs() > tol || a < 0.0 || d < 0.0 || a * d - b * b < -tol * (a.abs() + d.abs()) {
        return Err(TransformError::NotPsd(*sigma));
    }
    let (a, b, d) = (a / 2.0, b / 2.0, d / 2.0);
    let l11 = a.sqrt();
    let l21 = if l11 > 0.0 {
        b / l11
    } else if b.abs() <= tol {
        0.0
    } else {
        return Err(TransformError::NotPsd(*sigma));
    };
    let l22 = (d - l21 * l21).max(0.0).sqrt();
    Ok([[l11, 0.0], [l21, l22]])
}

/// Adds `t ~ N(0, Σ/2)` to every row of a `batch × 2` tensor.
pub fn gaussian_shift<R: Rng + ?Sized>(
    x: &Tensor,
    sigma: &[[f64; 2]; 2],
    rng: &mut R,
) -> Result<Tensor, TransformError> {
    let l = cholesky_half(sigma)?;
    if x.cols() != 2 {
        return Err(TransformError::Width {
            expected: 2,
            found: x.cols(),
        });
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(2) {
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        row[0] += l[0][0] * u;
        row[1] += l[1][0] * u + l[1][1] * v;
    }
    Ok(Tensor::new(x.shape().to_vec(), out).expect("finite shift of finite data"))
}

/// Rotates a single `height × width` image about its center by `theta_deg`
/// and then translates it by `(dx, dy)` pixels (x to the right, y down).
///
/// Sampling is bilinear with zero fill outside the source image, so values in
/// `[0, 1]` stay in `[0, 1]`.
pub fn image_affine(img: &[f64], height: usize, width: usize, dx: f64, dy: f64, theta_deg: f64) -> Result<Vec<f64>, TransformError> {
    if img.len() != height * width {
        return Err(TransformError::Width {
            expected: height * width,
            found: img.len(),
        });
    }
    if !(theta_deg.abs() <= 45.0) {
        return Err(TransformError::Rotation(theta_deg));
    }
    let side = height.min(width);
    if !(dx.abs() < side as f64 && dy.abs() < side as f64) {
        return Err(TransformError::Shift { dx, dy, side });
    }

    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
            0.0
        } else {
            img[r as usize * width + c as usize]
        }
    };

    let mut out = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            // Invert: undo the translation, then rotate back by -theta.
            let x = c as f64 - dx - cx;
            let y = r as f64 - dy - cy;
            let (sx, sy) = if theta_deg == 0.0 {
                (x + cx, y + cy)
            } else {
                (cos * x + sin * y + cx, -sin * x + cos * y + cy)
            };
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut v = at(y0, x0) * (1.0 - fx) * (1.0 - fy);
            if fx != 0.0 {
                v += at(y0, x0 + 1) * fx * (1.0 - fy);
            }
            if fy != 0.0 {
                v += at(y0 + 1, x0) * (1.0 - fx) * fy;
                if fx != 0.0 {
                    v += at(y0 + 1, x0 + 1) * fx * fy;
                }
            }
            out[r * width + c] = v;
        }
    }
    Ok(out)
}

/// Applies `spec` to every row of `x` with freshly drawn parameters.
pub fn sample_transform<R: Rng + ?Sized>(spec: &TransformSpec, x: &Tensor, rng: &mut R) -> Result<Tensor, TransformError> {
    spec.validate()?;
    match spec {
        TransformSpec::GaussianShift { sigma } => gaussian_shift(x, sigma, rng),
        TransformSpec::ImageAffine {
            height,
            width,
            max_shift_px,
            max_rot_deg,
        } => {
            let (h, w) = (*height, *width);
            if x.cols() != h * w {
                return Err(TransformError::Width {
                    expected: h * w,
                    found: x.cols(),
                });
            }
            let s = *max_shift_px as i32;
            let mut out = Vec::with_capacity(x.len());
            for i in 0..x.rows() {
                let dx = f64::from(rng.random_range(-s..=s));
                let dy = f64::from(rng.random_range(-s..=s));
                let theta = if *max_rot_deg > 0.0 {
                    rng.random_range(-*max_rot_deg..=*max_rot_deg)
                } else {
                    0.0
                };
                out.extend(image_affine(x.row(i), h, w, dx, dy, theta)?);
            }
            Ok(Tensor::new(x.shape().to_vec(), out).expect("bilinear output of finite data is finite"))
        }
    }
}
