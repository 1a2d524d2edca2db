//! Rewrites an F1 network into F2 and F3 form, and builds the exact network
//! of a relaxed model, checking outputs along the way.
//!
//! Run with `cargo run --example rewrite_networks`.

use hmpnet::datagen::generate;
use hmpnet::model::{eval_model, GFunction, HmpSpec, ImageGrid, Mode};
use hmpnet::networks::{table1_params, Network};
use hmpnet::rng::{stream, Purpose};
use hmpnet::transforms::{build_gmax, convert_f1_to_f2, convert_f2_to_f3, represent_hmp, FeedforwardNet};

fn main() -> hmpnet::Result<()> {
    let data = generate(5, 8, 0.05);
    let mut rng = stream(2, Purpose::Init, 0);

    let f1 = Network::init(table1_params(1, 3, &[2, 2], 2, 1, 31, 31)?, &mut rng)?;
    let f2 = convert_f1_to_f2(&f1)?;
    let f3 = convert_f2_to_f3(&f2)?;
    for n in [&f1, &f2, &f3] {
        println!("{}", n.arch().describe());
    }
    for (x, _) in data.items() {
        let y = f1.forward(x)?;
        println!("F1 {y:.6}  |F2-F1| {:.1e}  |F3-F1| {:.1e}", (f2.forward(x)? - y).abs(), (f3.forward(x)? - y).abs());
    }

    // Level-2 model whose functions are small ReLU nets: a max and two averages.
    let average = || {
        let eye: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        FeedforwardNet::new(vec![(eye.clone(), vec![0.0; 4]), (eye, vec![0.0; 4])], vec![0.25; 4], 0.0)
    };
    let wiring = vec![vec![[1; 4]; 2], vec![[1, 2, 2, 1]]];
    let g = vec![vec![GFunction::Net(build_gmax()), GFunction::Net(average()?)], vec![GFunction::Net(average()?)]];
    let spec = HmpSpec::new(2, vec![2], vec![2], wiring, g)?;
    let net = represent_hmp(&spec, 31, 31)?;
    println!("{}", net.arch().describe());
    for (x, _) in data.items() {
        // Inverted so that shapes, not background, carry the mass.
        let x = &ImageGrid::new(31, 31, x.values().iter().map(|v| 1.0 - v).collect())?;
        let m = eval_model(x, &spec, Mode::Relaxed)?;
        println!("model {m:.6}  |net-model| {:.1e}", (net.forward(x)? - m).abs());
    }
    Ok(())
}
