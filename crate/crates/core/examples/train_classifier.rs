//! Selects and trains an F1 classifier on synthetic shapes, then measures its
//! misclassification risk on fresh data.
//!
//! Run with `cargo run --release --example train_classifier`.

use hmpnet::datagen::generate;
use hmpnet::training::{empirical_misclassification, model_select_observed, SelectionGrid, TrainConfig};

fn main() -> hmpnet::Result<()> {
    let data = generate(400, 1, 0.05);
    let test = generate(1000, 2, 0.05);
    let grid = SelectionGrid {
        classifiers: vec![1],
        levels: vec![3],
        pooling: Some(vec![vec![1, 4], vec![2, 2]]),
        channels: vec![8],
        depths: vec![2],
        budget: None,
    };
    // Few epochs keep the example short; the guard would reject nets above 400 weights.
    let cfg = TrainConfig { epochs: 40, learning_rate: 3e-3, seed: 1, weight_guard: false, ..TrainConfig::default() };
    let sel = model_select_observed(&grid, &data, &cfg, |c| println!("candidate {}", c.line()))?;
    println!("{}", sel.report_text());
    let err = empirical_misclassification(&sel.net, cfg.beta(data.len()), &test)?;
    println!("selected {} test misclassification {err:.4}", sel.net.arch().describe());
    Ok(())
}
