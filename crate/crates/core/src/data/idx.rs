use std::fs;
use std::path::Path;

use super::DataError;
use crate::autodiff::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Grayscale images with one class label each. Images are stored as the
/// rows of an `n × (height·width)` tensor with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImages {
    pub images: Tensor,
    pub labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
}

impl LabeledImages {
    pub fn new(images: Tensor, labels: Vec<u8>, height: usize, width: usize) -> Result<Self, DataError> {
        if images.rows() != labels.len() || images.cols() != height * width {
            return Err(DataError::CountMismatch {
                images: images.rows(),
                labels: labels.len(),
            });
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::PixelRange);
        }
        Ok(Self {
            images,
            labels,
            height,
            width,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps the first `n` examples.
    pub fn take(&self, n: usize) -> LabeledImages {
        let n = n.min(self.len());
        let idx: Vec<usize> = (0..n).collect();
        LabeledImages {
            images: self.images.select_rows(&idx),
            labels: self.labels[..n].to_vec(),
            height: self.height,
            width: self.width,
        }
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated(what))
}

/// Parses an IDX3 image file body. Pixels are scaled by `1/255`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>), DataError> {
    let magic = be_u32(bytes, 0, "image header")?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::Magic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4, "image header")? as usize;
    let rows = be_u32(bytes, 8, "image header")? as usize;
    let cols = be_u32(bytes, 12, "image header")? as usize;
    let body = &bytes[16..];
    let need = n * rows * cols;
    if body.len() < need {
        return Err(DataError::Truncated("image payload"));
    }
    let pixels = body[..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0, "label header")?;
    if magic != LABEL_MAGIC {
        return Err(DataError::Magic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4, "label header")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(DataError::Truncated("label payload"));
    }
    Ok(body[..n].to_vec())
}

/// Loads a pair of IDX files (images `0x00000803`, labels `0x00000801`).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImages, DataError> {
    let read = |p: &Path| fs::read(p).map_err(|e| DataError::Io(format!("{}: {e}", p.display())));
    let img_bytes = read(images_path.as_ref())?;
    let lbl_bytes = read(labels_path.as_ref())?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(DataError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let images = Tensor::new(vec![n, rows * cols], pixels).map_err(|_| DataError::PixelRange)?;
    LabeledImages::new(images, labels, rows, cols)
}

/// Encodes images as IDX3 bytes, quantizing pixels to `round(255·v)`.
pub fn encode_idx_images(images: &LabeledImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.images.len());
    for v in [IMAGE_MAGIC, images.len() as u32, images.height as u32, images.width as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(images.images.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(images: &LabeledImages, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<(), DataError> {
    let write = |p: &Path, b: Vec<u8>| fs::write(p, b).map_err(|e| DataError::Io(format!("{}: {e}", p.display())));
    write(images_path.as_ref(), encode_idx_images(images))?;
    write(labels_path.as_ref(), encode_idx_labels(&images.labels))
}

/// Non-overlapping `factor × factor` average pooling.
pub fn downscale(imgs: &LabeledImages, factor: usize) -> Result<LabeledImages, DataError> {
    if factor == 0 || imgs.height % factor != 0 || imgs.width % factor != 0 {
        return Err(DataError::NotDivisible {
            height: imgs.height,
            width: imgs.width,
            factor,
        });
    }
    let (h, w) = (imgs.height / factor, imgs.width / factor);
    let area = (factor * factor) as f64;
    let mut data = Vec::with_capacity(imgs.len() * h * w);
    for i in 0..imgs.len() {
        let src = imgs.images.row(i);
        for r in 0..h {
            for c in 0..w {
                let mut s = 0.0;
                for dr in 0..factor {
                    let row = (r * factor + dr) * imgs.width + c * factor;
                    s += src[row..row + factor].iter().sum::<f64>();
                }
                data.push(s / area);
            }
        }
    }
    Ok(LabeledImages {
        images: Tensor::from_parts(vec![imgs.len(), h * w], data),
        labels: imgs.labels.clone(),
        height: h,
        width: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut b = magic.to_be_bytes().to_vec();
        for d in dims {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b
    }

    #[test]
    fn standard_header_is_recognized() {
        let mut b = header(IMAGE_MAGIC, &[2, 28, 28]);
        assert_eq!(&b[..4], &[0x00, 0x00, 0x08, 0x03]);
        b.extend(std::iter::repeat(0u8).take(2 * 784));
        let (n, r, c, px) = parse_idx_images(&b).unwrap();
        assert_eq!((n, r, c, px.len()), (2, 28, 28, 1568));
    }

    #[test]
    fn pixel_scaling() {
        let mut b = header(IMAGE_MAGIC, &[1, 1, 2]);
        b.extend([255, 0]);
        let (_, _, _, px) = parse_idx_images(&b).unwrap();
        assert_eq!(px, vec![1.0, 0.0]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let b = header(LABEL_MAGIC, &[1, 1, 1]);
        assert!(matches!(parse_idx_images(&b), Err(DataError::Magic { .. })));
        let mut b = header(IMAGE_MAGIC, &[3, 2, 2]);
        b.extend([1, 2, 3]);
        assert!(matches!(parse_idx_images(&b), Err(DataError::Truncated(_))));
        assert!(matches!(parse_idx_labels(&[0, 0, 8]), Err(DataError::Truncated(_))));
    }

    fn small(values: Vec<f64>, h: usize, w: usize) -> LabeledImages {
        let n = values.len() / (h * w);
        LabeledImages::new(Tensor::matrix(n, h * w, values).unwrap(), vec![0; n], h, w).unwrap()
    }

    #[test]
    fn downscale_cases() {
        let imgs = small(vec![0.0, 1.0, 1.0, 0.0], 2, 2);
        assert_eq!(downscale(&imgs, 2).unwrap().images.data(), &[0.5]);

        let c = small(vec![0.25; 28 * 28], 28, 28);
        let d = downscale(&c, 2).unwrap();
        assert_eq!((d.height, d.width), (14, 14));
        assert!(d.images.data().iter().all(|&v| v == 0.25));

        let odd = small(vec![0.0; 9], 3, 3);
        assert!(matches!(downscale(&odd, 2), Err(DataError::NotDivisible { .. })));
    }
}
