//! Compares backpropagated gradients with central finite differences.
//!
//! Run with `cargo run --example gradient_check`.

use hmpnet::datagen::generate;
use hmpnet::networks::backprop::{loss_and_gradients, Trace};
use hmpnet::networks::{table1_params, Network};
use hmpnet::rng::{stream, Purpose};
use hmpnet::verify::gradient_agreement;

fn main() -> hmpnet::Result<()> {
    let data = generate(1, 4, 0.05);
    let (x, y) = (&data.items()[0].0, data.items()[0].1);
    let net = Network::init(table1_params(1, 3, &[1, 2], 2, 2, 31, 31)?, &mut stream(7, Purpose::Init, 0))?;
    let (loss, grads) = loss_and_gradients(&net, &[(x, y)])?;
    let analytic = grads.flatten();
    let params = net.flat_params();
    let mut probe = net.clone();
    let (agreement, used) = gradient_agreement(&params, &analytic, |p| {
        probe.set_flat_params(p).expect("same length");
        let t = Trace::record(&probe, x).expect("input fits");
        ((t.value() - f64::from(y)).powi(2), t.activation_pattern())
    });
    println!("loss {loss:.6}, {} weights, {used} checked, agreement {:.1}%", params.len(), 100.0 * agreement);
    Ok(())
}
