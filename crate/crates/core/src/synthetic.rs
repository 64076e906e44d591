//! Procedural base meshes and smooth random deformation datasets.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{build_topology_from_cells, MeshDataset, ObjMesh, VertexFeatures};

/// Number of sinusoidal fields summed per sample.
pub const FIELDS_PER_SAMPLE: usize = 3;
pub const DEFAULT_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseShape {
    Icosphere,
    Grid,
}

impl std::str::FromStr for BaseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icosphere" => Ok(BaseShape::Icosphere),
            "grid" => Ok(BaseShape::Grid),
            other => Err(Error::InvalidInput(format!(
                "unknown base shape `{other}` (expected icosphere or grid)"
            ))),
        }
    }
}

fn mesh_from(points: Vec<[f64; 3]>, faces: Vec<Vec<usize>>) -> Result<ObjMesh> {
    let topology = build_topology_from_cells(points.len(), &faces)?;
    Ok(ObjMesh {
        topology,
        positions: VertexFeatures::positions(points)?,
        faces,
    })
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Unit icosphere; `10·4^subdiv + 2` vertices.
pub fn icosphere(subdiv: usize) -> Result<ObjMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, points: &mut Vec<[f64; 3]>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (points[a], points[b]);
                points.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                points.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut points);
            let bc = midpoint(b, c, &mut points);
            let ca = midpoint(c, a, &mut points);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    mesh_from(points, faces.into_iter().map(Vec::from).collect())
}

/// Triangulated unit square in the `z = 0` plane with `2^subdiv + 1`
/// vertices per side.
pub fn grid(subdiv: usize) -> Result<ObjMesh> {
    let n = (1usize << subdiv) + 1;
    let step = 1.0 / (n - 1) as f64;
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push([j as f64 * step, i as f64 * step, 0.0]);
        }
    }
    let mut faces = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let v = i * n + j;
            faces.push(vec![v, v + 1, v + n + 1]);
            faces.push(vec![v, v + n + 1, v + n]);
        }
    }
    mesh_from(points, faces)
}

pub fn base_mesh(shape: BaseShape, subdiv: usize) -> Result<ObjMesh> {
    match shape {
        BaseShape::Icosphere => icosphere(subdiv),
        BaseShape::Grid => grid(subdiv),
    }
}

pub fn bounding_box_diagonal(positions: &VertexFeatures) -> f64 {
    let c = positions.channels();
    let mut lo = vec![f64::INFINITY; c];
    let mut hi = vec![f64::NEG_INFINITY; c];
    for v in 0..positions.num_vertices() {
        for (k, &x) in positions.row(v).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let p = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2: f64 = p.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            return normalize(p);
        }
    }
}

/// Deforms `base` into `samples` shapes. Each sample adds
/// [`FIELDS_PER_SAMPLE`] fields `a · d · sin(k·p + φ)` with a random unit
/// displacement direction `d`, a wave vector `k` whose wavelength is between
/// one and two bounding-box diagonals, a random phase `φ`, and
/// `a = amplitude · diagonal`.
pub fn make_synthetic(base: &VertexFeatures, samples: usize, seed: u64, amplitude: f64) -> Result<Vec<VertexFeatures>> {
    if base.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "synthetic deformation needs 3-channel positions, got {}",
            base.channels()
        )));
    }
    let diag = bounding_box_diagonal(base);
    let a = amplitude * diag;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut x = base.clone();
        for _ in 0..FIELDS_PER_SAMPLE {
            let d = unit_vector(&mut rng);
            let dir = unit_vector(&mut rng);
            let freq = 2.0 * PI / (diag * rng.gen_range(1.0..2.0));
            let k = dir.map(|c| c * freq);
            let phase = rng.gen_range(0.0..2.0 * PI);
            for v in 0..base.num_vertices() {
                let p = base.point(v);
                let s = a * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin();
                for (c, dc) in x.row_mut(v).iter_mut().zip(d) {
                    *c += s * dc;
                }
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Convenience: base mesh plus deformed samples, all in the training split.
pub fn synthetic_dataset(
    shape: BaseShape,
    subdiv: usize,
    samples: usize,
    seed: u64,
    amplitude: f64,
) -> Result<(ObjMesh, MeshDataset)> {
    let base = base_mesh(shape, subdiv)?;
    let data = make_synthetic(&base.positions, samples, seed, amplitude)?;
    let dataset = MeshDataset::all_train(base.topology.clone(), data)?;
    Ok((base, dataset))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (s, n) in [(0, 12), (1, 42), (2, 162)] {
            let m = icosphere(s).unwrap();
            assert_eq!(m.topology.num_vertices(), n);
            assert_eq!(m.faces.len(), 20 * 4usize.pow(s as u32));
            assert_eq!(m.topology.num_edges(), 30 * 4usize.pow(s as u32));
        }
        let ico = icosphere(0).unwrap();
        assert!((0..12).all(|v| ico.topology.degree(v) == 5));
    }

    #[test]
    fn icosphere_is_on_unit_sphere() {
        let m = icosphere(2).unwrap();
        for v in 0..m.topology.num_vertices() {
            let p = m.positions.point(v);
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_counts() {
        let g = grid(2).unwrap();
        assert_eq!(g.topology.num_vertices(), 25);
        assert_eq!(g.faces.len(), 32);
        assert!((bounding_box_diagonal(&g.positions) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reproducible_and_nontrivial() {
        let base = icosphere(1).unwrap().positions;
        let a = make_synthetic(&base, 4, 7, 0.1).unwrap();
        assert_eq!(a, make_synthetic(&base, 4, 7, 0.1).unwrap());
        assert_ne!(a, make_synthetic(&base, 4, 8, 0.1).unwrap());
        let var: f64 = (0..base.num_vertices())
            .map(|v| {
                let mean = (a[0].row(v)[0] + a[1].row(v)[0]) / 2.0;
                (a[0].row(v)[0] - mean).powi(2)
            })
            .sum();
        assert!(var > 0.0);
    }

    #[test]
    fn zero_amplitude_is_base() {
        let base = grid(1).unwrap().positions;
        for s in make_synthetic(&base, 3, 1, 0.0).unwrap() {
            assert_eq!(s, base);
        }
    }

    #[test]
    fn displacement_is_bounded() {
        let base = icosphere(1).unwrap().positions;
        let diag = bounding_box_diagonal(&base);
        for s in make_synthetic(&base, 5, 3, 0.1).unwrap() {
            for v in 0..base.num_vertices() {
                let d: f64 = s.row(v).iter().zip(base.row(v)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(d <= FIELDS_PER_SAMPLE as f64 * 0.1 * diag + 1e-12);
            }
        }
    }
}
