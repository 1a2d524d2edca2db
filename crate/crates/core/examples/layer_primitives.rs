//! Applies each layer type to a small feature stack.
//!
//! Run with `cargo run --example layer_primitives`.

use hmpnet::layers::{conv_layer_forward, local_max_pool, output_layer, subsample, ConvLayer, FeatureStack};

fn show(name: &str, f: &FeatureStack) {
    println!("{name} ({}x{}x{}):", f.rows(), f.cols(), f.channels());
    for i in 1..=f.rows() {
        let row: Vec<String> = (1..=f.cols()).map(|j| format!("{:5.1}", f.get(i, j, 1))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> hmpnet::Result<()> {
    let x = FeatureStack::new(5, 5, 1, (1..=25).map(f64::from).collect())?;
    show("input", &x);

    // 2x2 filter anchored at the top-left tap, zero padding beyond the grid.
    let conv = ConvLayer::new(1, 1, 2, vec![1.0, 0.0, 0.0, -1.0], vec![0.5])?;
    show("conv", &conv_layer_forward(&x, &conv)?);
    show("max-pool 2", &local_max_pool(&x, 2));
    show("subsample 2", &subsample(&x, 2));
    println!("output layer over 3x3 window: {}", output_layer(&x, &[0.1], (3, 3))?);
    Ok(())
}
