//! Generates a contact-label dataset over the built-in primitives and prints
//! its label balance.
//!
//! cargo run --release --example contact_dataset -- [count] [sigma]

use std::time::Instant;

use corn::contactgen::{dataset_stats, generate_dataset, primitive_objects, DataGenConfig};
use corn::geom::primitives::gripper;
use corn::patches::PatchConfig;

fn main() -> corn::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let sigma: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let cfg = DataGenConfig {
        sigma,
        seed: 7,
        ..DataGenConfig::default()
    };
    let start = Instant::now();
    let records = generate_dataset(&primitive_objects(), &gripper(), &cfg, count)?;
    let elapsed = start.elapsed();
    let stats = dataset_stats(&records, &PatchConfig::default())?;
    println!("{} records in {:.2?}", records.len(), elapsed);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    println!("majority patch baseline: {:.4}", stats.majority_patch_accuracy());
    Ok(())
}
