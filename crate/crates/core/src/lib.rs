//! Hierarchical max-pooling models and convolutional network classes.
//!
//! - [`model`]: the model itself, exact and relaxed evaluation, level dimensions.
//! - [`layers`]: convolution, local max-pooling, subsampling and output layers.
//! - [`networks`]: the classes F1 to F4, parameter choices, backpropagation.
//! - [`transforms`]: exact rewrites between classes and from models to networks.
//! - [`training`]: Adam least squares, truncation, model selection, replication.
//! - [`datagen`]: synthetic shape images and the HMPD container.
//! - [`verify`]: randomized and exhaustive checks of every rewrite.
//! - [`cli`]: the `hmp` command line.
//!
//! Runnable examples live in `examples/`: `evaluate_model`, `layer_primitives`,
//! `build_networks`, `rewrite_networks`, `gradient_check`, `train_classifier`,
//! `generate_dataset`, `bounds` and `verify_suites`.
pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod layers;
pub mod model;
pub mod networks;
pub mod rng;
pub mod training;
pub mod transforms;
pub mod verify;

pub use error::{HmpError, Result};
