//! Trains briefly on the ring, then walks the latent segment between the
//! encodings of two modes and prints the generated path.
//!
//! ```text
//! cargo run --release --example interpolate -- [iterations]
//! ```

use ivegan::data::{ring_means, RingSpec};
use ivegan::model::{train, Architecture, DataSource, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3_000);
    let ring = RingSpec::default();
    let mut config = TrainConfig::ring_defaults(&ring, 0);
    config.iterations = iterations;
    config.snapshot_every = iterations;
    let model = train(Architecture::ring(2, 4), &config, DataSource::Ring(ring.clone()))?.model;

    let means = ring_means(&ring);
    let (a, b) = (means[0], means[3]);
    let (latents, points) = model.interpolate(&a, &b, 9, &mut ChaCha8Rng::seed_from_u64(1))?;
    println!("from ({:.2}, {:.2}) to ({:.2}, {:.2}):", a[0], a[1], b[0], b[1]);
    for i in 0..latents.rows() {
        let z: Vec<String> = latents.row(i).iter().map(|v| format!("{v:+.3}")).collect();
        let p = points.row(i);
        println!("  z [{}]  ->  ({:+.3}, {:+.3})", z.join(" "), p[0], p[1]);
    }
    Ok(())
}
