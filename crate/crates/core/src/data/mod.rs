//! Training data: the ring-of-Gaussians mixture and IDX image files.

mod idx;
mod ring;

use thiserror::Error;

pub use idx::{
    downscale, encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, write_idx,
    LabeledImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use ring::{ring_means, sample_ring, sample_ring_labeled, RingSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid ring: {0}")]
    Ring(&'static str),
    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    Magic { expected: u32, found: u32 },
    #[error("truncated IDX file ({0})")]
    Truncated(&'static str),
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("pixel values must lie in [0, 1]")]
    PixelRange,
    #[error("{height}x{width} images are not divisible by {factor}")]
    NotDivisible {
        height: usize,
        width: usize,
        factor: usize,
    },
    #[error("io: {0}")]
    Io(String),
}
