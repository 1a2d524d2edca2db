//! Builds the four network classes for one parameter choice and runs them.
//!
//! Run with `cargo run --example build_networks`.

use hmpnet::datagen::generate;
use hmpnet::networks::{param_count, table1_params, Network};
use hmpnet::rng::{stream, Purpose};

fn main() -> hmpnet::Result<()> {
    let data = generate(1, 3, 0.05);
    let x = &data.items()[0].0;
    for j in 1..=4 {
        let arch = table1_params(j, 3, &[2, 2], 4, 2, 31, 31)?;
        let net = Network::init(arch.clone(), &mut stream(1, Purpose::Init, j as u64))?;
        println!("{}", arch.describe());
        println!("  weights {} final grid {:?} output {:.5}", param_count(&arch), arch.final_grid(), net.forward(x)?);
    }
    Ok(())
}
