//! Samples the ring of Gaussians and writes its 2-D histogram as a PGM
//! image, the same rendering `ivegan plot` produces.
//!
//! ```text
//! cargo run --release --example density_plot -- [out.pgm] [bins]
//! ```

use ivegan::cli::pgm;
use ivegan::data::{sample_ring, RingSpec};
use ivegan::eval::{density_grid, JSD_RANGE};
use ivegan::model::init_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "ring.pgm".into());
    let bins: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(128);

    let ring = RingSpec {
        sigma: 0.03,
        ..RingSpec::default()
    };
    let x = sample_ring(&ring, 100_000, &mut init_rng(0));
    let grid = density_grid(&x, bins, JSD_RANGE)?;
    std::fs::write(&out, pgm::encode(&grid))?;
    println!(
        "{} samples, {} outside the plot range, {}×{} image written to {out}",
        x.rows(),
        grid.dropped,
        bins,
        bins
    );
    Ok(())
}
