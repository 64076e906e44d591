use rand::Rng;
use vcmesh::verify;

use super::{random_connected_graph, rng};

/// The library suite on a random connected graph of at most 30 vertices.
pub fn gradient_suite(seed: u64) -> vcmesh::Result<Vec<(&'static str, f64)>> {
    let mut r = rng(seed);
    let n = r.gen_range(8..=30);
    let g = random_connected_graph(&mut r, n);
    verify::gradient_suite(&g, seed)
}
