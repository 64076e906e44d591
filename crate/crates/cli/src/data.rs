use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcmesh::mesh::{load_cell_file, read_obj_mesh, MeshDataset, MeshTopology, ObjMesh, Split};

use crate::Failure;

/// Reads `.obj` files as OBJ and anything else as a cell file (no faces).
pub fn load_mesh(path: &Path) -> Result<ObjMesh, Failure> {
    let is_obj = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    let loaded = if is_obj {
        read_obj_mesh(path)
    } else {
        load_cell_file(path).map(|(topology, positions)| ObjMesh {
            topology,
            positions,
            faces: Vec::new(),
        })
    };
    loaded.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// True when `mesh` has the vertices of `base` and only edges `base` also has,
/// which admits meshes whose base was bridged.
pub fn same_base(mesh: &MeshTopology, base: &MeshTopology) -> bool {
    mesh.num_vertices() == base.num_vertices() && mesh.edges().all(|(a, b)| base.has_edge(a, b))
}

/// Loads every file, checks it fits `topology`, and assigns splits from a
/// seeded shuffle: the first `train` fraction trains, the next `validation`
/// fraction validates, the rest is held out.
pub fn load_dataset(
    files: &[PathBuf],
    topology: &MeshTopology,
    train: f64,
    validation: f64,
    seed: u64,
) -> Result<MeshDataset, Failure> {
    let mut samples = Vec::with_capacity(files.len());
    for f in files {
        let m = load_mesh(f)?;
        if !same_base(&m.topology, topology) {
            return Err(Failure::Input(format!(
                "{}: connectivity differs from the base mesh",
                f.display()
            )));
        }
        samples.push(m.positions);
    }
    let n = samples.len();
    let n_train = ((train * n as f64).round() as usize).clamp(1, n);
    let n_val = ((validation * n as f64).round() as usize).min(n - n_train);
    let mut splits = vec![Split::Test; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (rank, i) in order.into_iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(MeshDataset::new(topology.clone(), samples, splits)?)
}

/// `all` or a comma-separated list of indices below `limit`.
pub fn parse_vertices(text: &str, limit: usize) -> Result<Vec<usize>, Failure> {
    if text.trim() == "all" {
        return Ok((0..limit).collect());
    }
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: usize = part
            .parse()
            .map_err(|_| Failure::Input(format!("bad latent vertex `{part}`")))?;
        if v >= limit {
            return Err(Failure::Input(format!("latent vertex {v} is outside 0..{limit}")));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_lists() {
        assert_eq!(parse_vertices("all", 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_vertices("2, 0", 3).unwrap(), vec![2, 0]);
        assert!(parse_vertices("3", 3).is_err());
        assert!(parse_vertices("x", 3).is_err());
        assert!(parse_vertices("", 3).unwrap().is_empty());
    }

    #[test]
    fn bridged_bases_accept_the_original_connectivity() {
        let mesh = MeshTopology::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let bridged = MeshTopology::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(same_base(&mesh, &bridged));
        assert!(!same_base(&bridged, &mesh));
        assert!(!same_base(&mesh, &MeshTopology::empty(4)));
        assert!(!same_base(&mesh, &MeshTopology::empty(5)));
    }
}
