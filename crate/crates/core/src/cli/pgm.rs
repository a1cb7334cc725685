//! Binary greymap (P5) rendering of 2-D density histograms.

use crate::eval::DensityGrid;

/// Log-scaled intensities: `255·ln(1+c)/ln(1+max)`, empty cells black.
pub fn intensities(grid: &DensityGrid) -> Vec<u8> {
    let max = grid.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0; grid.counts.len()];
    }
    let denom = (max as f64).ln_1p();
    grid.counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0
            } else {
                // At least 1 so that a single sample stays visible.
                ((255.0 * (c as f64).ln_1p() / denom).round() as u8).max(1)
            }
        })
        .collect()
}

pub fn encode(grid: &DensityGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.bins, grid.bins).into_bytes();
    out.extend(intensities(grid));
    out
}
