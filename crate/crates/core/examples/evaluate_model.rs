//! Evaluates a three-level hierarchical max-pooling model on a synthetic image.
//!
//! Run with `cargo run --example evaluate_model`.

use hmpnet::datagen::generate;
use hmpnet::model::{dims, eval_model, eval_model_argmax, validate_spec, BuiltinG, GFunction, HmpSpec, Mode};

fn main() -> hmpnet::Result<()> {
    // Level 3, two features on levels 1 and 2, pooling (2, 2).
    let wiring = vec![vec![[1; 4]; 2], vec![[1, 2, 1, 2], [2, 1, 2, 1]], vec![[1, 2, 2, 1]]];
    let g = vec![
        vec![GFunction::Builtin(BuiltinG::Average), GFunction::Builtin(BuiltinG::Threshold(0.5))],
        vec![GFunction::Builtin(BuiltinG::Max), GFunction::Builtin(BuiltinG::Product)],
        vec![GFunction::Builtin(BuiltinG::Average)],
    ];
    let spec = HmpSpec::new(3, vec![2, 2], vec![2, 2], wiring, g)?;

    let report = validate_spec(&spec, 31, 31);
    for c in &report.checks {
        println!("check {} {}", c.name, if c.passed { "ok" } else { "failed" });
    }
    println!("image form 2^l m - 1: {:?}", report.power_form);
    for k in 0..=3 {
        println!("level {k} grid {:?}", dims(k, 31, 31, &spec)?);
    }

    let data = generate(2, 5, 0.05);
    for (x, y) in data.items() {
        let (v, pos) = eval_model_argmax(x, &spec, Mode::Exact)?;
        let relaxed = eval_model(x, &spec, Mode::Relaxed)?;
        println!("label {y} model {v:.4} at {pos:?} relaxed {relaxed:.4}");
    }
    Ok(())
}
