mod common;

use std::sync::Arc;

use common::oracles::random_map;
use common::*;
use proptest::prelude::*;
use rand::Rng;
use vcmesh::autodiff::{Tape, Tensor, Var};
use vcmesh::Result;

/// For a linear map `A`, the tape's gradient of `⟨A x, y⟩` is `Aᵀ y`, so
/// `⟨A x, y⟩ = ⟨x, grad⟩` must hold.
fn adjoint_gap(x: &Tensor, y: &Tensor, op: impl Fn(&mut Tape, Var) -> Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let ax = op(&mut tape, xv).unwrap();
    let loss = probe(&mut tape, ax, y).unwrap();
    let lhs = tape.value(loss).data()[0];
    let g = tape.backward(loss).unwrap();
    let rhs = x.dot(g.get(xv).unwrap());
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ragged_ops_satisfy_adjoint_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let map = random_map(&mut r, 25);
        let table = map.table().clone();
        let (nin, nout, nnz) = (map.in_vertices(), map.out_vertices(), table.nnz());
        let w = random_tensor(&mut r, nnz, 1);
        let x = random_tensor(&mut r, 2 * nin, 3);
        let y = random_tensor(&mut r, 2 * nout, 3);
        let gap = adjoint_gap(&x, &y, |t, xv| {
            let wv = t.leaf(w.clone());
            t.ragged_weighted_sum(wv, xv, &table)
        });
        prop_assert!(gap < 1e-12);

        let k = random_tensor(&mut r, nnz, 3 * 2);
        let y2 = random_tensor(&mut r, 2 * nout, 2);
        let gap = adjoint_gap(&x, &y2, |t, xv| {
            let kv = t.leaf(k.clone());
            t.ragged_transform(kv, xv, &table, 2)
        });
        prop_assert!(gap < 1e-12);

        let idx: Vec<usize> = (0..nout).map(|_| r.gen_range(0..2 * nin)).collect();
        let y3 = random_tensor(&mut r, nout, 3);
        let gap = adjoint_gap(&x, &y3, |t, xv| t.gather_rows(xv, Arc::new(idx.clone())));
        prop_assert!(gap < 1e-12);
        let y4 = random_tensor(&mut r, 2 * nin, 3);
        let gap = adjoint_gap(&y3, &y4, |t, v| t.scatter_add_rows(v, Arc::new(idx.clone()), 2 * nin));
        prop_assert!(gap < 1e-12);
    }

    #[test]
    fn matmul_is_bilinear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut r = rng(seed);
        let m = random_tensor(&mut r, 3, 4);
        let x1 = random_tensor(&mut r, 4, 2);
        let x2 = random_tensor(&mut r, 4, 2);
        let mut comb = x1.clone();
        for (c, (p, q)) in comb.data_mut().iter_mut().zip(x1.data().iter().zip(x2.data())) {
            *c = a * p + b * q;
        }
        let lhs = m.matmul(&comb).unwrap();
        let (y1, y2) = (m.matmul(&x1).unwrap(), m.matmul(&x2).unwrap());
        let rhs = Tensor::matrix(3, 2, y1.data().iter().zip(y2.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }
}

#[test]
fn reused_variable_accumulates_gradient() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::matrix(1, 2, vec![1.5, -2.0]).unwrap());
    let sq = tape.mul(x, x).unwrap();
    let three = tape.scale(x, 3.0);
    let s = tape.add(sq, three).unwrap();
    let loss = tape.sum(s);
    let g = tape.backward(loss).unwrap();
    // d/dx (x² + 3x) = 2x + 3
    assert_eq!(g.get(x).unwrap().data(), &[6.0, -1.0]);
}

#[test]
fn backward_requires_scalar() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(2, 2));
    assert!(tape.backward(x).is_err());
}

#[test]
fn backward_is_deterministic() {
    let mut r = rng(9);
    let map = random_map(&mut r, 25);
    let x = random_tensor(&mut r, map.in_vertices(), 2);
    let run = || {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let m = tape.ragged_max(xv, map.table()).unwrap();
        let e = tape.elu(m);
        let l = tape.mean(e);
        tape.backward(l).unwrap().get(xv).unwrap().clone()
    };
    assert_eq!(run(), run());
}
