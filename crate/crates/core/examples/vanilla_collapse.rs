//! Trains the vanilla GAN and the IVE-GAN on the same ring with the same
//! seed and budget, then prints both coverage reports and writes a density
//! image of each model's novel samples.
//!
//! ```text
//! cargo run --release --example vanilla_collapse -- [seed] [iterations] [out-dir]
//! ```

use std::path::PathBuf;

use ivegan::cli::pgm;
use ivegan::data::RingSpec;
use ivegan::eval::{coverage, density_grid, JSD_RANGE};
use ivegan::model::{train, train_vanilla, Architecture, DataSource, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let iterations: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "collapse".into()));
    std::fs::create_dir_all(&out)?;

    let ring = RingSpec::default();
    let mut config = TrainConfig::ring_defaults(&ring, seed);
    config.iterations = iterations;
    config.snapshot_every = iterations;

    let arch = Architecture::ring(2, 4);
    let vanilla = train_vanilla(arch.clone(), &config, DataSource::Ring(ring.clone()))?;
    let ive = train(arch, &config, DataSource::Ring(ring.clone()))?;

    for (name, snaps) in [("vanilla", &vanilla.snapshots), ("ive", &ive.snapshots)] {
        let last = snaps.last().expect("final snapshot");
        let r = coverage(&last.samples, &ring, 3.0, 0.02)?;
        let shares: Vec<String> = r.per_mode_share().iter().map(|s| format!("{s:.3}")).collect();
        println!(
            "{name:>7} @ {}: covered {}/8  assigned {:.3}  jsd {:.3}  shares [{}]",
            last.iteration,
            r.covered_modes,
            r.assigned_fraction,
            r.jsd,
            shares.join(" ")
        );
        let path = out.join(format!("{name}.pgm"));
        std::fs::write(&path, pgm::encode(&density_grid(&last.samples, 128, JSD_RANGE)?))?;
        println!("        density written to {}", path.display());
    }
    Ok(())
}
