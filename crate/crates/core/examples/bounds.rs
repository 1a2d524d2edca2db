//! Prints the main-theorem architectures, their weight counts and the
//! constant-free bound shapes.
//!
//! Run with `cargo run --example bounds`.

use hmpnet::networks::{param_count, rate_curve, theorem1_params, vc_bound_shape};

fn main() -> hmpnet::Result<()> {
    let t = theorem1_params(3, &[2, 2], &[2, 2], 1, 8, 31, 31)?;
    for (name, a) in [("theta1", &t.theta1), ("theta2", &t.theta2), ("theta3", &t.theta3)] {
        println!("{name}: {}", a.describe());
        println!("  weights {} vc shape {:.1}", param_count(a), vc_bound_shape(a.depth, 31, 31));
    }
    for n in [100.0, 200.0, 400.0, 800.0, 1600.0] {
        println!("n {n:>6} rate p=1 {:.4} p=2 {:.4}", rate_curve(n, 1.0), rate_curve(n, 2.0));
    }
    Ok(())
}
