use rand::Rng;
use vcmesh::autodiff::{ParamStore, Tape, Tensor};
use vcmesh::layers::{LcConvLayer, VcConvLayer};
use vcmesh::sampling::{build_down_map, select_vertices, SamplingMap};

use super::{random_graph, random_tensor, rng};

/// Loop-by-loop `yᵢ = Σⱼ (Σₖ α(i,j,k) Bₖ)ᵀ x_{n(i,j)} + b` over stacked samples.
pub fn vc_conv_scalar(
    map: &SamplingMap,
    basis: &Tensor,
    normalize: bool,
    coeffs: &Tensor,
    bias: &Tensor,
    x: &Tensor,
    (ci, co): (usize, usize),
) -> Tensor {
    let m = basis.rows();
    let mut b = basis.clone();
    if normalize {
        for k in 0..m {
            let norm = b.row(k).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for c in 0..ci * co {
                b.set(k, c, basis.get(k, c) / norm);
            }
        }
    }
    let (nin, nout) = (map.in_vertices(), map.out_vertices());
    let batch = x.rows() / nin;
    let mut y = Tensor::zeros(batch * nout, co);
    for s in 0..batch {
        let mut slot = 0;
        for i in 0..nout {
            for &nb in map.row(i) {
                for a in 0..ci {
                    for o in 0..co {
                        let mut w = 0.0;
                        for k in 0..m {
                            w += coeffs.get(slot, k) * b.get(k, a * co + o);
                        }
                        let cur = y.get(s * nout + i, o);
                        y.set(s * nout + i, o, cur + w * x.get(s * nin + nb, a));
                    }
                }
                slot += 1;
            }
            for o in 0..co {
                let cur = y.get(s * nout + i, o);
                y.set(s * nout + i, o, cur + bias.get(0, o));
            }
        }
    }
    y
}

/// LCConv as one dense `[N_out·O, N_in·I]` matrix applied to the flattened input.
pub fn lc_conv_dense(map: &SamplingMap, weights: &Tensor, bias: &Tensor, x: &Tensor, (ci, co): (usize, usize)) -> Tensor {
    let (nin, nout) = (map.in_vertices(), map.out_vertices());
    let mut dense = Tensor::zeros(nout * co, nin * ci);
    let mut slot = 0;
    for i in 0..nout {
        for &nb in map.row(i) {
            for a in 0..ci {
                for o in 0..co {
                    let cur = dense.get(i * co + o, nb * ci + a);
                    dense.set(i * co + o, nb * ci + a, cur + weights.get(slot, a * co + o));
                }
            }
            slot += 1;
        }
    }
    let flat = Tensor::matrix(nin * ci, 1, x.data().to_vec()).unwrap();
    let y = dense.matmul(&flat).unwrap();
    let mut out = Tensor::matrix(nout, co, y.into_data()).unwrap();
    for i in 0..nout {
        for o in 0..co {
            out.set(i, o, out.get(i, o) + bias.get(0, o));
        }
    }
    out
}

/// A random down map on a graph of at most `max_n` vertices.
pub fn random_map(r: &mut impl Rng, max_n: usize) -> SamplingMap {
    let n = r.gen_range(2..=max_n);
    let g = random_graph(r, n);
    let stride = r.gen_range(1..=3);
    let radius = r.gen_range(0..=2);
    let sel = select_vertices(&g, stride, &[], r.gen()).unwrap();
    build_down_map(&g, &sel, stride, radius).unwrap()
}

/// vcConv with `M = I·O` and the matrix-unit basis, with coefficients copied
/// from a random LCConv. Returns the max absolute output difference.
pub fn subsumption_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let map = random_map(&mut r, 20);
    let (ci, co) = (r.gen_range(1..=4), r.gen_range(1..=4));
    let mut store = ParamStore::new();
    let lc = LcConvLayer::new(&mut store, "lc", map.clone(), ci, co, &mut r).unwrap();
    *store.value_mut(lc.bias) = random_tensor(&mut r, 1, co);
    let vc = VcConvLayer::new(&mut store, "vc", map.clone(), ci, co, ci * co, false, &mut r).unwrap();
    *store.value_mut(vc.basis) = Tensor::identity(ci * co);
    *store.value_mut(vc.coeffs) = store.value(lc.weights).clone();
    *store.value_mut(vc.bias) = store.value(lc.bias).clone();

    let x = random_tensor(&mut r, map.in_vertices(), ci);
    let mut tape = Tape::new();
    let xv = tape.leaf(x);
    let a = lc.forward(&mut tape, &store, xv).unwrap();
    let b = vc.forward(&mut tape, &store, xv).unwrap();
    tape.value(a).max_abs_diff(tape.value(b))
}
