mod common;

use common::*;
use rand::Rng;
use vcmesh::mesh::MeshDataset;
use vcmesh::model::{
    build_autoencoder, interpolate_latent, load_checkpoint, save_checkpoint, train, BasisPlan, LatentCode, ModelConfig,
    TrainConfig, Trainer,
};
use vcmesh::sampling::{build_hierarchy, receptive_field, LevelSpec};
use vcmesh::synthetic::{icosphere, make_synthetic};
use vcmesh::Error;

fn small_setup(seed: u64) -> (vcmesh::sampling::SamplingHierarchy, MeshDataset) {
    let ico = icosphere(1).unwrap();
    let h = build_hierarchy(&ico.topology, &[LevelSpec::new(2, 2), LevelSpec::new(2, 1)], seed).unwrap();
    let samples = make_synthetic(&ico.positions, 6, seed, 0.1).unwrap();
    (h, MeshDataset::all_train(ico.topology, samples).unwrap())
}

fn config(seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(vec![3, 4, 6, 4, 3]);
    c.seed = seed;
    c
}

#[test]
fn decoded_changes_stay_inside_receptive_field() {
    let (h, data) = small_setup(2);
    let model = build_autoencoder(&h, &config(2)).unwrap();
    let code = model.encode(&data.samples[0]).unwrap();
    let base = model.decode(&code).unwrap();
    let mut r = rng(4);
    for l in 0..code.vertices() {
        let mut moved = code.clone();
        for c in 0..code.channels() {
            moved.values.set(l, c, code.values.get(l, c) + r.gen_range(0.5..1.0));
        }
        let out = model.decode(&moved).unwrap();
        let field = receptive_field(&h, l).unwrap().vertices;
        for v in 0..out.num_vertices() {
            if !field.contains(&v) {
                assert_eq!(out.row(v), base.row(v), "latent {l} moved vertex {v}");
            }
        }
        assert!(field.iter().any(|&v| out.row(v) != base.row(v)));
    }
}

#[test]
fn full_interpolation_is_affine() {
    let mut r = rng(1);
    let s = LatentCode::new(random_tensor(&mut r, 5, 3), 9);
    let t = LatentCode::new(random_tensor(&mut r, 5, 3), 9);
    let all: Vec<usize> = (0..5).collect();
    for tau in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let out = interpolate_latent(&s, &t, &all, tau).unwrap();
        for (k, v) in out.values.data().iter().enumerate() {
            assert_eq!(*v, (1.0 - tau) * s.values.data()[k] + tau * t.values.data()[k]);
        }
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (h, data) = small_setup(3);
    let mut model = build_autoencoder(&h, &config(3)).unwrap();
    let before = model.params.clone();
    let log = train(
        &mut model,
        &data,
        &TrainConfig {
            learning_rate: 0.0,
            batch_size: 4,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(log.epochs.len(), 1);
    assert_eq!(log.steps.len(), 2);
    for (id, p) in before.iter() {
        assert_eq!(model.params.value(id), &p.value);
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let (h, data) = small_setup(5);
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 4,
        epochs: 10,
        seed: 5,
        ..Default::default()
    };
    let run = || {
        let mut m = build_autoencoder(&h, &config(5)).unwrap();
        train(&mut m, &data, &cfg).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.epochs.last().unwrap().train_l1 < a.epochs[0].train_l1);
}

#[test]
fn resume_mid_epoch_matches_uninterrupted() {
    let (h, data) = small_setup(6);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 4,
        epochs: 100,
        max_steps: Some(9),
        laplacian_weight: 0.5,
        seed: 6,
        ..Default::default()
    };
    let mut full = build_autoencoder(&h, &config(6)).unwrap();
    let whole = Trainer::new(&mut full, &data, cfg.clone()).unwrap().run(|_, _| Ok(())).unwrap();

    let mut part = build_autoencoder(&h, &config(6)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    let first = {
        let mut t = Trainer::new(&mut part, &data, TrainConfig { max_steps: Some(3), ..cfg.clone() }).unwrap();
        let log = t.run(|_, _| Ok(())).unwrap();
        save_checkpoint(&path, t.model(), Some(&t.state)).unwrap();
        log
    };
    let (mut resumed, state) = load_checkpoint(&path, &h).unwrap();
    let rest = Trainer::resume(&mut resumed, &data, cfg, state.unwrap()).unwrap().run(|_, _| Ok(())).unwrap();
    let losses: Vec<f64> = first.steps.iter().chain(&rest.steps).map(|s| s.loss).collect();
    let want: Vec<f64> = whole.steps.iter().map(|s| s.loss).collect();
    assert_eq!(losses, want);
    for ((_, a), (_, b)) in resumed.params.iter().zip(full.params.iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn topology_mismatch_is_rejected() {
    let (h, _) = small_setup(7);
    let mut model = build_autoencoder(&h, &config(7)).unwrap();
    let other = icosphere(2).unwrap();
    let data = MeshDataset::all_train(other.topology, vec![other.positions]).unwrap();
    assert!(matches!(train(&mut model, &data, &TrainConfig::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn decode_rejects_foreign_code() {
    let (h, data) = small_setup(8);
    let model = build_autoencoder(&h, &config(8)).unwrap();
    let mut code = model.encode(&data.samples[0]).unwrap();
    code.fingerprint ^= 1;
    assert!(matches!(model.decode(&code), Err(Error::FingerprintMismatch { .. })));
}

#[test]
fn stats_total_is_sum_of_formulas() {
    let (h, _) = small_setup(9);
    let mut cfg = config(9);
    cfg.basis = BasisPlan::Uniform(3);
    let model = build_autoencoder(&h, &cfg).unwrap();
    let mut expected = 0;
    for b in model.net.blocks() {
        let (i, o, m) = (b.conv.in_channels, b.conv.out_channels, b.conv.basis_size);
        let e = b.conv.map.total_neighbors();
        expected += i * o * m + m * e + o;
        expected += e + if i == o { 0 } else { i * o };
    }
    assert_eq!(model.param_count(), expected);
    assert_eq!(model.params.scalar_count(), expected);
}

#[test]
fn round_trip_shape_on_icosphere() {
    let ico = icosphere(2).unwrap();
    let h = build_hierarchy(&ico.topology, &[LevelSpec::new(2, 2), LevelSpec::new(2, 2)], 0).unwrap();
    let model = build_autoencoder(&h, &ModelConfig::new(vec![3, 16, 32, 16, 3])).unwrap();
    let out = model.reconstruct(&ico.positions).unwrap();
    assert_eq!((out.num_vertices(), out.channels()), (162, 3));
    assert!(out.values().iter().all(|v| v.is_finite()));
    let z = model.encode(&ico.positions).unwrap();
    assert_eq!(z.values.shape(), &[h.latent_vertices(), 32]);
}
