//! Trains the surrogate on a synthetic desk-scale corpus and prints the
//! held-out loss curve.
//!
//! `cargo run --release -p scenred-core --example desk_train -- [epochs]`

use std::time::Instant;

use scenred_core::reduce::ReductionConfig;
use scenred_core::scenario::{split_train_test, NormalizationParams};
use scenred_core::solar::{gen_corpus, SolarGenConfig};
use scenred_core::surrogate::{build_model, make_training_pair, train_with_progress, ModelDims, TrainOptions};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> scenred_core::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let corpus = gen_corpus(&SolarGenConfig::default(), 64, 200)?;
    let norm = NormalizationParams::fit(&corpus)?;
    let cfg = ReductionConfig::new(16);

    let start = Instant::now();
    let pairs = corpus
        .iter()
        .map(|s| make_training_pair(s, &cfg, &norm))
        .collect::<scenred_core::Result<Vec<_>>>()?;
    println!("teacher targets: {:.2}s", start.elapsed().as_secs_f64());

    let (train, test) = split_train_test(&pairs, 0.82, 0)?;
    let mut model = build_model(ModelDims::new(24, 64, 16, 3)?, 0)?;
    model.set_normalization(norm);
    let start = Instant::now();
    let report = train_with_progress(&mut model, &train, &test, &TrainOptions::new(epochs), |s| {
        if s.epoch % 50 == 0 {
            println!(
                "epoch {:5} train {:.5} test {:.5} ({:.1}s)",
                s.epoch,
                s.train_loss,
                s.test_loss.unwrap_or(f64::NAN),
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    println!(
        "final train {:.5} test {:.5} in {:.1}s",
        report.final_train_loss,
        report.final_test_loss.unwrap_or(f64::NAN),
        report.wall_clock_secs
    );
    Ok(())
}
