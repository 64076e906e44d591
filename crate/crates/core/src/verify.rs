//! Finite-difference verification of every layer, both losses and a composed
//! depth-2 autoencoder.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, grad_check_params, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::layers::{avg_pool, avg_unpool, max_pool, max_unpool, LcConvLayer, VcConvLayer, VdResLayer, VdWeights};
use crate::mesh::MeshTopology;
use crate::model::{build_autoencoder, l1_loss, laplacian_loss, BasisPlan, LaplacianOperator, ModelConfig};
use crate::sampling::{build_hierarchy, LevelSpec, SamplingMap};

pub const EPSILON: f64 = 1e-6;
/// Largest accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
const BATCH: usize = 2;

fn random_tensor(r: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn probe(tape: &mut Tape, y: Var, r: &Tensor) -> Result<Var> {
    let r = tape.leaf(r.clone());
    let p = tape.mul(y, r)?;
    Ok(tape.sum(p))
}

/// Densities bounded away from zero with random signs.
fn scramble_density(store: &mut ParamStore, id: ParamId, r: &mut impl Rng) {
    for v in store.value_mut(id).data_mut() {
        let m: f64 = r.gen_range(0.5..1.5);
        *v = if r.gen_bool(0.5) { m } else { -m };
    }
}

fn with_input(store: &mut ParamStore, r: &mut impl Rng, map: &SamplingMap, channels: usize) -> ParamId {
    store.register("x", random_tensor(r, BATCH * map.in_vertices(), channels))
}

fn check_layer(
    store: &mut ParamStore,
    x: ParamId,
    readout: &Tensor,
    f: impl Fn(&mut Tape, &ParamStore, Var) -> Result<Var>,
) -> Result<f64> {
    grad_check_params(
        store,
        |tape, s| {
            let xv = tape.param(s, x);
            let y = f(tape, s, xv)?;
            probe(tape, y, readout)
        },
        EPSILON,
    )
}

/// Worst relative gradient error per operation, with maps from a depth-2
/// `s = 2, r = 1` hierarchy over `g`.
pub fn gradient_suite(g: &MeshTopology, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_vertices();
    let h = build_hierarchy(g, &[LevelSpec::new(2, 1), LevelSpec::new(2, 1)], seed)?;
    let down = h.levels[0].down.clone();
    let up = h.levels[0].up.clone();
    let (ci, co, m) = (2, 3, 2);
    let mut out = Vec::new();

    for (name, normalize) in [("vcConv", false), ("vcConv (normalized basis)", true)] {
        let mut s = ParamStore::new();
        let layer = VcConvLayer::new(&mut s, "c", down.clone(), ci, co, m, normalize, &mut r)?;
        let b = s.value(layer.bias).len();
        *s.value_mut(layer.bias) = random_tensor(&mut r, 1, b);
        let x = with_input(&mut s, &mut r, &down, ci);
        let ro = random_tensor(&mut r, BATCH * down.out_vertices(), co);
        out.push((name, check_layer(&mut s, x, &ro, |t, s, x| layer.forward(t, s, x))?));
    }
    {
        let mut s = ParamStore::new();
        let layer = VcConvLayer::new(&mut s, "t", up.clone(), ci, co, m, false, &mut r)?;
        let x = with_input(&mut s, &mut r, &up, ci);
        let ro = random_tensor(&mut r, BATCH * up.out_vertices(), co);
        out.push(("vcTransConv", check_layer(&mut s, x, &ro, |t, s, x| layer.forward_transposed(t, s, x))?));
    }
    {
        let mut s = ParamStore::new();
        let layer = LcConvLayer::new(&mut s, "lc", down.clone(), ci, co, &mut r)?;
        let x = with_input(&mut s, &mut r, &down, ci);
        let ro = random_tensor(&mut r, BATCH * down.out_vertices(), co);
        out.push(("LCConv", check_layer(&mut s, x, &ro, |t, s, x| layer.forward(t, s, x))?));
    }
    for (name, map) in [("vdPool", &down), ("vdUnpool", &up)] {
        let mut s = ParamStore::new();
        let vd = VdWeights::new(&mut s, "vd", map.clone());
        scramble_density(&mut s, vd.density, &mut r);
        let x = with_input(&mut s, &mut r, map, ci);
        let ro = random_tensor(&mut r, BATCH * map.out_vertices(), ci);
        let err = if name == "vdPool" {
            check_layer(&mut s, x, &ro, |t, s, x| vd.pool(t, s, x))?
        } else {
            check_layer(&mut s, x, &ro, |t, s, x| vd.unpool(t, s, x))?
        };
        out.push((name, err));
    }
    for (name, cout) in [("vdRes (I = O)", ci), ("vdRes (I != O)", co)] {
        let mut s = ParamStore::new();
        let layer = VdResLayer::new(&mut s, "res", down.clone(), ci, cout, &mut r)?;
        scramble_density(&mut s, layer.vd.density, &mut r);
        let x = with_input(&mut s, &mut r, &down, ci);
        let ro = random_tensor(&mut r, BATCH * down.out_vertices(), cout);
        out.push((name, check_layer(&mut s, x, &ro, |t, s, x| layer.forward(t, s, x))?));
    }
    type PoolFn = fn(&mut Tape, &SamplingMap, Var) -> Result<Var>;
    let pools: [(&'static str, &SamplingMap, PoolFn); 4] = [
        ("avg pool", &down, avg_pool),
        ("max pool", &down, max_pool),
        ("avg unpool", &up, avg_unpool),
        ("max unpool", &up, max_unpool),
    ];
    for (name, map, f) in pools {
        let x = random_tensor(&mut r, BATCH * map.in_vertices(), ci);
        let ro = random_tensor(&mut r, BATCH * map.out_vertices(), ci);
        let err = grad_check(
            |t, v| {
                let y = f(t, map, v[0])?;
                probe(t, y, &ro)
            },
            &[x],
            EPSILON,
        )?;
        out.push((name, err));
    }
    {
        let x = random_tensor(&mut r, 6, 3);
        let ro = random_tensor(&mut r, 6, 3);
        let err = grad_check(
            |t, v| {
                let y = t.elu(v[0]);
                probe(t, y, &ro)
            },
            &[x],
            EPSILON,
        )?;
        out.push(("elu", err));
    }
    {
        let pred = random_tensor(&mut r, BATCH * n, 3);
        let target = random_tensor(&mut r, BATCH * n, 3);
        let err = grad_check(|t, v| l1_loss(t, v[0], v[1]), &[pred.clone(), target.clone()], EPSILON)?;
        out.push(("L1 loss", err));
        let lap = LaplacianOperator::new(g);
        let err = grad_check(|t, v| laplacian_loss(t, v[0], v[1], &lap), &[pred, target], EPSILON)?;
        out.push(("Laplacian loss", err));
    }
    {
        let mut cfg = ModelConfig::new(vec![3, 2, 2, 2, 3]);
        cfg.basis = BasisPlan::Uniform(2);
        cfg.seed = seed;
        let model = build_autoencoder(&h, &cfg)?;
        let mut s = model.params.clone();
        for l in model.net.blocks() {
            if let Some(res) = &l.residual {
                scramble_density(&mut s, res.vd.density, &mut r);
            }
            let b = s.value(l.conv.bias).len();
            *s.value_mut(l.conv.bias) = random_tensor(&mut r, 1, b);
        }
        let x = s.register("x", random_tensor(&mut r, BATCH * n, 3));
        let target = random_tensor(&mut r, BATCH * n, 3);
        let lap = LaplacianOperator::new(g);
        let err = grad_check_params(
            &mut s,
            |t, s| {
                let xv = t.param(s, x);
                let y = model.net.forward(t, s, xv)?;
                let tv = t.leaf(target.clone());
                let a = l1_loss(t, y, tv)?;
                let b = laplacian_loss(t, y, tv, &lap)?;
                t.add(a, b)
            },
            EPSILON,
        )?;
        out.push(("depth-2 autoencoder", err));
    }
    Ok(out)
}
