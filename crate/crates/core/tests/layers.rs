mod common;

use common::gradients::gradient_suite;
use common::oracles::{lc_conv_dense, random_map, subsumption_trial, vc_conv_scalar};
use common::*;
use proptest::prelude::*;
use rand::Rng;
use vcmesh::autodiff::{ParamStore, Tape, Tensor};
use vcmesh::layers::{LcConvLayer, VcConvLayer, VdResLayer, VdWeights};

fn forward_vc(layer: &VcConvLayer, store: &ParamStore, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let y = layer.forward(&mut tape, store, xv).unwrap();
    tape.value(y).clone()
}

fn pooled(vd: &VdWeights, store: &ParamStore, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let y = vd.aggregate(&mut tape, store, xv).unwrap();
    tape.value(y).clone()
}

#[test]
fn every_layer_passes_gradient_check() {
    for seed in 0..3 {
        for (name, err) in gradient_suite(seed).unwrap() {
            assert!(err < 1e-4, "{name} (seed {seed}): relative error {err:e}");
        }
    }
}

#[test]
fn lcconv_matches_dense_oracle() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let map = random_map(&mut r, 20);
        let (ci, co) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let mut store = ParamStore::new();
        let lc = LcConvLayer::new(&mut store, "lc", map.clone(), ci, co, &mut r).unwrap();
        *store.value_mut(lc.bias) = random_tensor(&mut r, 1, co);
        let x = random_tensor(&mut r, map.in_vertices(), ci);
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let y = lc.forward(&mut tape, &store, xv).unwrap();
        let want = lc_conv_dense(&map, store.value(lc.weights), store.value(lc.bias), &x, (ci, co));
        assert!(tape.value(y).max_abs_diff(&want) <= 1e-12);
    }
}

#[test]
fn vcconv_subsumes_lcconv() {
    for seed in 0..10 {
        assert!(subsumption_trial(seed) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vcconv_matches_scalar_oracle(seed in any::<u64>(), normalize in any::<bool>(), batch in 1usize..3) {
        let mut r = rng(seed);
        let map = random_map(&mut r, 20);
        let (ci, co, m) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=4));
        let mut store = ParamStore::new();
        let layer = VcConvLayer::new(&mut store, "c", map.clone(), ci, co, m, normalize, &mut r).unwrap();
        *store.value_mut(layer.bias) = random_tensor(&mut r, 1, co);
        let x = random_tensor(&mut r, batch * map.in_vertices(), ci);
        let want = vc_conv_scalar(
            &map,
            store.value(layer.basis),
            normalize,
            store.value(layer.coeffs),
            store.value(layer.bias),
            &x,
            (ci, co),
        );
        prop_assert!(forward_vc(&layer, &store, &x).max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn vcconv_without_bias_is_homogeneous(seed in any::<u64>(), lambda in -3.0f64..3.0) {
        let mut r = rng(seed);
        let map = random_map(&mut r, 20);
        let mut store = ParamStore::new();
        let layer = VcConvLayer::new(&mut store, "c", map.clone(), 2, 3, 2, false, &mut r).unwrap();
        let x = random_tensor(&mut r, map.in_vertices(), 2);
        let mut scaled = x.clone();
        scaled.data_mut().iter_mut().for_each(|v| *v *= lambda);
        let mut a = forward_vc(&layer, &store, &x);
        a.data_mut().iter_mut().for_each(|v| *v *= lambda);
        prop_assert!(forward_vc(&layer, &store, &scaled).max_abs_diff(&a) <= 1e-12);
    }

    #[test]
    fn density_weights_are_convex_and_scale_free(seed in any::<u64>(), lambda in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let mut r = rng(seed);
        let map = random_map(&mut r, 20);
        let mut store = ParamStore::new();
        let vd = VdWeights::new(&mut store, "vd", map.clone());
        for v in store.value_mut(vd.density).data_mut() {
            *v = r.gen_range(-2.0..2.0);
        }
        let w = vd.normalized_values(&store).unwrap();
        let table = map.table();
        for row in 0..table.rows() {
            let s: f64 = w[table.row_range(row)].iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(w[table.row_range(row)].iter().all(|&v| v >= 0.0));
        }

        let x = random_tensor(&mut r, map.in_vertices(), 2);
        let y = pooled(&vd, &store, &x);
        for i in 0..map.out_vertices() {
            for c in 0..2 {
                let vals: Vec<f64> = map.row(i).iter().map(|&j| x.get(j, c)).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(y.get(i, c) >= lo - 1e-12 && y.get(i, c) <= hi + 1e-12);
            }
        }

        let mut scaled = store.clone();
        scaled.value_mut(vd.density).data_mut().iter_mut().for_each(|v| *v *= lambda);
        prop_assert!(pooled(&vd, &scaled, &x).max_abs_diff(&y) <= 1e-12);

        let constant = Tensor::filled(map.in_vertices(), 2, 0.37);
        prop_assert!(pooled(&vd, &store, &constant).max_abs_diff(&Tensor::filled(map.out_vertices(), 2, 0.37)) <= 1e-12);
    }

    #[test]
    fn param_counts_follow_formulas(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r, 30);
        let (ci, co, m) = (r.gen_range(1..=6), r.gen_range(1..=6), r.gen_range(1..=8));
        let total: usize = (0..map.out_vertices()).map(|i| map.row(i).len()).sum();
        let mut store = ParamStore::new();
        let vc = VcConvLayer::new(&mut store, "vc", map.clone(), ci, co, m, false, &mut r).unwrap();
        prop_assert_eq!(vc.param_count(), ci * co * m + m * total + co);
        prop_assert_eq!(store.scalar_count(), vc.param_count());
        let mut store = ParamStore::new();
        let lc = LcConvLayer::new(&mut store, "lc", map.clone(), ci, co, &mut r).unwrap();
        prop_assert_eq!(lc.param_count(), ci * co * total + co);
        prop_assert_eq!(store.scalar_count(), lc.param_count());
        let mut store = ParamStore::new();
        let res = VdResLayer::new(&mut store, "res", map, ci, co, &mut r).unwrap();
        let c = if ci == co { 0 } else { ci * co };
        prop_assert_eq!(res.param_count(), total + c);
        prop_assert_eq!(store.scalar_count(), res.param_count());
    }
}
