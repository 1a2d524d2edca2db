//! Property tests for the invariants of the model, layers, rewrites and formats.

use hmpnet::datagen::{file_size, from_bytes, generate, to_bytes};
use hmpnet::io::{median_iqr, KeyValues};
use hmpnet::layers::{local_max_pool, subsample, FeatureStack};
use hmpnet::model::{admissible_pooling, dims, dims_closed_form, BuiltinG, GFunction, HmpSpec};
use hmpnet::networks::{table1_params, Network};
use hmpnet::rng::{stream, Purpose};
use hmpnet::training::{label_of, truncate};
use hmpnet::transforms::{convert_f1_to_f2, convert_f2_to_f3};
use proptest::prelude::*;

fn stack(rows: usize, cols: usize, ch: usize) -> impl Strategy<Value = FeatureStack> {
    prop::collection::vec(-5.0f64..5.0, rows * ch * cols)
        .prop_map(move |v| FeatureStack::new(rows, cols, ch, v).expect("sizes match"))
}

fn spec_with_pooling(l: usize, n: Vec<usize>) -> HmpSpec {
    let features = vec![1; l - 1];
    let wiring = (0..l).map(|_| vec![[1; 4]]).collect();
    HmpSpec::uniform(l, features, n, wiring, GFunction::Builtin(BuiltinG::Average)).expect("valid spec")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level_dims_match_closed_form(l in 1usize..=5, m in 2usize..=6, pick in 0usize..1000) {
        let pools = admissible_pooling(l);
        let n = pools[pick % pools.len()].clone();
        let spec = spec_with_pooling(l, n);
        let d = (1 << l) * m - 1;
        for k in 0..=l {
            let (r, c) = dims(k, d, d, &spec).unwrap();
            prop_assert_eq!(r, c);
            prop_assert_eq!(r, dims_closed_form(k, m, &spec));
        }
    }

    #[test]
    fn ceiling_composition(a in 1usize..500, b in 1usize..500, c in 1usize..100_000) {
        prop_assert_eq!(c.div_ceil(a).div_ceil(b), c.div_ceil(a * b));
        prop_assert_eq!((a - 1) * b < c, a <= c.div_ceil(b));
    }

    #[test]
    fn pooling_and_subsampling_shapes(f in stack(7, 5, 2), s in 1usize..5) {
        let p = local_max_pool(&f, s);
        let q = subsample(&f, s);
        prop_assert_eq!((p.rows(), p.cols(), p.channels()), (7usize.div_ceil(s), 5usize.div_ceil(s), 2));
        prop_assert_eq!((q.rows(), q.cols()), (p.rows(), p.cols()));
        for i in 1..=p.rows() {
            for j in 1..=p.cols() {
                for c in 1..=2 {
                    // The pooled max dominates the top-left value it would subsample.
                    prop_assert!(p.get(i, j, c) >= q.get(i, j, c));
                }
            }
        }
    }

    #[test]
    fn unit_window_is_identity(f in stack(4, 6, 3)) {
        prop_assert_eq!(&local_max_pool(&f, 1), &f);
        prop_assert_eq!(&subsample(&f, 1), &f);
    }

    #[test]
    fn truncation_is_idempotent_and_bounded(v in -1e6f64..1e6, beta in 1.0f64..20.0) {
        let t = truncate(v, beta);
        prop_assert_eq!(truncate(t, beta), t);
        prop_assert!(t.abs() <= beta);
        prop_assert_eq!(label_of(v, beta), u8::from(t >= 0.5));
    }

    #[test]
    fn hmpd_round_trip(n in 0usize..12, seed in any::<u64>()) {
        let ds = generate(n, seed, 0.05);
        let b = to_bytes(&ds).unwrap();
        prop_assert_eq!(b.len(), file_size(n, 31, 31));
        prop_assert_eq!(to_bytes(&from_bytes(&b).unwrap()).unwrap(), b);
    }

    #[test]
    fn key_values_round_trip(pairs in prop::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,20}", 0..8)) {
        let mut kv = KeyValues::new();
        for (k, v) in &pairs {
            kv.set(k, v);
        }
        let back = KeyValues::from_text(&kv.to_text()).unwrap();
        for (k, v) in &pairs {
            prop_assert_eq!(back.get(k), Some(v.trim()));
        }
    }

    #[test]
    fn median_within_range(v in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let (m, iqr) = median_iqr(&v).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
        prop_assert!(iqr >= 0.0 && iqr <= hi - lo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn class_conversions_preserve_outputs(seed in any::<u64>(), l in 1usize..=3, pick in 0usize..100, k in 1usize..=2, z in 1usize..=2) {
        let pools = admissible_pooling(l);
        let n = &pools[pick % pools.len()];
        let f1 = Network::init(table1_params(1, l, n, k, z, 31, 31).unwrap(), &mut stream(seed, Purpose::Init, 0)).unwrap();
        let f2 = convert_f1_to_f2(&f1).unwrap();
        let f3 = convert_f2_to_f3(&f2).unwrap();
        for (x, _) in generate(3, seed, 0.05).items() {
            let y = f1.forward(x).unwrap();
            prop_assert!((f2.forward(x).unwrap() - y).abs() <= 1e-9);
            prop_assert!((f3.forward(x).unwrap() - y).abs() <= 1e-9);
        }
    }
}
