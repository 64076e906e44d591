#![allow(dead_code)]

pub mod gradients;
pub mod oracles;

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcmesh::autodiff::{Tape, Tensor, Var};
use vcmesh::mesh::MeshTopology;

pub const UNREACHED: usize = usize::MAX;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sparse random graph: each vertex attaches to an earlier one with
/// probability 0.9, then up to `n` extra random edges. Often disconnected.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> MeshTopology {
    let mut edges = Vec::new();
    for v in 1..n {
        if rng.gen_bool(0.9) {
            edges.push((rng.gen_range(0..v), v));
        }
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    MeshTopology::from_edges(n, edges).unwrap()
}

/// Like [`random_graph`] but always connected.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize) -> MeshTopology {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    MeshTopology::from_edges(n, edges).unwrap()
}

pub fn path(n: usize) -> MeshTopology {
    MeshTopology::from_edges(n, (1..n).map(|v| (v - 1, v))).unwrap()
}

/// 4-connected `w × h` lattice.
pub fn lattice(w: usize, h: usize) -> MeshTopology {
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = y * w + x;
            if x + 1 < w {
                edges.push((v, v + 1));
            }
            if y + 1 < h {
                edges.push((v, v + w));
            }
        }
    }
    MeshTopology::from_edges(w * h, edges).unwrap()
}

/// Plain breadth-first distances from `src`, `UNREACHED` when disconnected.
pub fn distances(topology: &MeshTopology, src: usize) -> Vec<usize> {
    let mut d = vec![UNREACHED; topology.num_vertices()];
    d[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(v) = q.pop_front() {
        for &u in topology.neighbors(v) {
            if d[u] == UNREACHED {
                d[u] = d[v] + 1;
                q.push_back(u);
            }
        }
    }
    d
}

pub fn all_distances(topology: &MeshTopology) -> Vec<Vec<usize>> {
    (0..topology.num_vertices()).map(|v| distances(topology, v)).collect()
}

/// Up to `count` random vertices that are pairwise at least `stride` apart.
pub fn spread_pins(rng: &mut impl Rng, dist: &[Vec<usize>], stride: usize, count: usize) -> Vec<usize> {
    let n = dist.len();
    let mut pins: Vec<usize> = Vec::new();
    for _ in 0..count * 4 {
        if pins.len() == count {
            break;
        }
        let v = rng.gen_range(0..n);
        if pins.iter().all(|&p| dist[p][v] >= stride) {
            pins.push(v);
        }
    }
    pins
}

pub fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Scalar probe `Σ y ⊙ r` so gradient checks see every output entry.
pub fn probe(tape: &mut Tape, y: Var, r: &Tensor) -> vcmesh::Result<Var> {
    let r = tape.leaf(r.clone());
    let p = tape.mul(y, r)?;
    Ok(tape.sum(p))
}

/// Checks one sampling level of `topology` against brute-force distances:
/// independence, coverage, pinning, exact ring maps, up/down duality and the
/// `2s - 1` coarse adjacency rule.
pub fn check_sampling(
    topology: &MeshTopology,
    dist: &[Vec<usize>],
    stride: usize,
    radius: usize,
    pins: &[usize],
    seed: u64,
) -> Result<(), String> {
    use vcmesh::sampling::{build_coarse_topology, build_down_map, build_up_map, select_vertices};
    let n = topology.num_vertices();
    let sel = select_vertices(topology, stride, pins, seed).map_err(|e| e.to_string())?;
    let near = |a: usize, b: usize, k: usize| dist[a][b] != UNREACHED && dist[a][b] <= k;
    let reach = stride - 1;
    for (i, &a) in sel.iter().enumerate() {
        if let Some(&b) = sel[i + 1..].iter().find(|&&b| near(a, b, reach)) {
            return Err(format!("selected {a} and {b} are within {reach}"));
        }
    }
    if let Some(v) = (0..n).find(|&v| !sel.iter().any(|&c| near(v, c, reach))) {
        return Err(format!("vertex {v} is not covered"));
    }
    if let Some(p) = pins.iter().find(|p| !sel.contains(p)) {
        return Err(format!("pinned vertex {p} not selected"));
    }

    let coarse = build_coarse_topology(topology, &sel, stride).map_err(|e| e.to_string())?;
    for a in 0..sel.len() {
        for b in 0..sel.len() {
            let want = a != b && near(sel[a], sel[b], 2 * stride - 1);
            if coarse.has_edge(a, b) != want {
                return Err(format!("coarse edge ({a},{b}) is {}, oracle {want}", coarse.has_edge(a, b)));
            }
        }
    }

    let down = build_down_map(topology, &sel, stride, radius).map_err(|e| e.to_string())?;
    for (i, &c) in sel.iter().enumerate() {
        let ring: Vec<usize> = (0..n).filter(|&v| near(c, v, radius)).collect();
        if down.row(i) != ring.as_slice() {
            return Err(format!("down row {i} is {:?}, oracle {ring:?}", down.row(i)));
        }
    }
    let covered = (0..n).all(|v| sel.iter().any(|&c| near(v, c, radius)));
    match build_up_map(topology, &sel, stride, radius) {
        Ok(up) => {
            let mut from_up: Vec<(usize, usize)> = (0..n).flat_map(|y| up.row(y).iter().map(move |&c| (c, y))).collect();
            from_up.sort_unstable();
            if from_up != down.incidence() {
                return Err("up incidence is not the transpose of down incidence".into());
            }
        }
        Err(_) if !covered => {}
        Err(e) => return Err(format!("up map failed on a covered graph: {e}")),
    }
    Ok(())
}
