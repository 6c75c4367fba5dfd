//! Trains the contact encoder on freshly generated primitive data and prints
//! per-epoch validation metrics next to the majority-class baseline.
//!
//! cargo run --release --example train_encoder -- [records] [epochs]

use std::time::Instant;

use corn::contactgen::{dataset_stats, generate_dataset, primitive_objects, DataGenConfig};
use corn::encoder::{prepare_dataset, train_with, EncoderConfig, EncoderParams, TrainConfig};
use corn::geom::primitives::gripper;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> corn::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);

    let gen = DataGenConfig::default();
    let records = generate_dataset(&primitive_objects(), &gripper(), &gen, count)?;
    let enc = EncoderConfig::default();
    let stats = dataset_stats(&records, &enc.patch)?;
    println!(
        "{} records, {:.1}% with contact, majority patch baseline {:.4}",
        records.len(),
        100.0 * stats.fraction_records_any_contact,
        stats.majority_patch_accuracy()
    );

    let samples = prepare_dataset(&records, &enc)?;
    let mut params = EncoderParams::new(enc, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("{} parameters", params.num_parameters());
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    train_with(&mut params, &samples, &cfg, |r| {
        let v = r.val.unwrap_or_default();
        println!(
            "epoch {:3}  train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4} prec {:.3} rec {:.3} bal {:.3}  [{:.1?}]",
            r.epoch,
            r.train.loss,
            r.train.accuracy,
            v.loss,
            v.accuracy,
            v.precision,
            v.recall,
            v.balanced_accuracy,
            start.elapsed()
        );
    })?;
    Ok(())
}
