//! Runs every verification suite with a few trials.
//!
//! Run with `cargo run --release --example verify_suites`.

use hmpnet::verify::{run_all, VerifyConfig};

fn main() -> hmpnet::Result<()> {
    let cfg = VerifyConfig { trials: 10, seed: 1, ..VerifyConfig::default() };
    for r in run_all(&cfg, None)? {
        println!("{}  ({} cases)", r.line(), r.cases);
    }
    Ok(())
}
