use std::fs;
use std::path::Path;

use super::{
    build_coarse_topology, build_down_map, build_up_map, select_vertices, Direction, RaggedTable, SamplingMap,
};
use crate::binio::{fnv1a64, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::mesh::MeshTopology;

const MAGIC: &[u8; 4] = b"VCHY";
const VERSION: u32 = 1;

/// Stride, radius and pinned vertices for one coarsening step. Pinned indices
/// refer to the graph being sampled, i.e. the previous level's coarse graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSpec {
    pub stride: usize,
    pub radius: usize,
    pub pinned: Vec<usize>,
}

impl LevelSpec {
    pub fn new(stride: usize, radius: usize) -> Self {
        LevelSpec {
            stride,
            radius,
            pinned: Vec::new(),
        }
    }

    pub fn pinned(mut self, pinned: Vec<usize>) -> Self {
        self.pinned = pinned;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingLevel {
    pub spec: LevelSpec,
    /// Indices into the finer level's vertices, ascending.
    pub selected: Vec<usize>,
    pub coarse: MeshTopology,
    pub down: SamplingMap,
    pub up: SamplingMap,
}

/// A chain of sampling levels starting at the base mesh graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingHierarchy {
    pub base: MeshTopology,
    pub levels: Vec<SamplingLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub stride: usize,
    pub radius: usize,
    pub fine_vertices: usize,
    pub coarse_vertices: usize,
    pub down_mean: f64,
    pub down_max: usize,
    pub up_mean: f64,
    pub up_max: usize,
}

/// Base-level vertices influenced by one coarsest-level (latent) vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptiveField {
    pub latent: usize,
    pub vertices: Vec<usize>,
}

/// Builds the levels in order; level `l` samples level `l - 1`'s coarse graph.
pub fn build_hierarchy(topology: &MeshTopology, specs: &[LevelSpec], seed: u64) -> Result<SamplingHierarchy> {
    if specs.is_empty() {
        return Err(Error::Config("a hierarchy needs at least one level".into()));
    }
    let mut levels: Vec<SamplingLevel> = Vec::with_capacity(specs.len());
    for (l, spec) in specs.iter().enumerate() {
        let fine = levels.last().map_or(topology, |lv| &lv.coarse);
        if spec.radius + 1 < spec.stride {
            log::warn!(
                "level {l}: radius {} < stride {} - 1, some fine vertices may see no coarse vertex",
                spec.radius,
                spec.stride
            );
        }
        let selected = select_vertices(fine, spec.stride, &spec.pinned, seed.wrapping_add(l as u64))
            .map_err(|e| level_error(l, e))?;
        let coarse = build_coarse_topology(fine, &selected, spec.stride)?;
        let down = build_down_map(fine, &selected, spec.stride, spec.radius)?;
        let up = build_up_map(fine, &selected, spec.stride, spec.radius).map_err(|e| level_error(l, e))?;
        levels.push(SamplingLevel {
            spec: spec.clone(),
            selected,
            coarse,
            down,
            up,
        });
    }
    Ok(SamplingHierarchy {
        base: topology.clone(),
        levels,
    })
}

fn level_error(level: usize, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("level {level}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("level {level}: {m}")),
        other => other,
    }
}

/// Traces the up maps from the coarsest level back to the base mesh.
pub fn receptive_field(hierarchy: &SamplingHierarchy, latent: usize) -> Result<ReceptiveField> {
    let n = hierarchy.latent_vertices();
    if latent >= n {
        return Err(Error::InvalidInput(format!("latent vertex {latent} is outside 0..{n}")));
    }
    let mut current = vec![false; n];
    current[latent] = true;
    for level in hierarchy.levels.iter().rev() {
        let up = &level.up;
        current = (0..up.out_vertices())
            .map(|y| up.row(y).iter().any(|&c| current[c]))
            .collect();
    }
    Ok(ReceptiveField {
        latent,
        vertices: current
            .iter()
            .enumerate()
            .filter(|(_, &hit)| hit)
            .map(|(v, _)| v)
            .collect(),
    })
}

impl SamplingHierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Vertex count of the graph at `level` (0 = base).
    pub fn vertices_at(&self, level: usize) -> usize {
        if level == 0 {
            self.base.num_vertices()
        } else {
            self.levels[level - 1].coarse.num_vertices()
        }
    }

    pub fn latent_vertices(&self) -> usize {
        self.vertices_at(self.depth())
    }

    pub fn coarsest(&self) -> &MeshTopology {
        self.levels.last().map_or(&self.base, |l| &l.coarse)
    }

    /// The base-mesh vertex that coarsest vertex `latent` descends from.
    pub fn anchor(&self, latent: usize) -> usize {
        self.levels.iter().rev().fold(latent, |v, level| level.selected[v])
    }

    pub fn summary(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .enumerate()
            .map(|(l, lv)| LevelSummary {
                level: l + 1,
                stride: lv.spec.stride,
                radius: lv.spec.radius,
                fine_vertices: lv.down.in_vertices(),
                coarse_vertices: lv.selected.len(),
                down_mean: lv.down.mean_neighbors(),
                down_max: lv.down.max_neighbors(),
                up_mean: lv.up.mean_neighbors(),
                up_max: lv.up.max_neighbors(),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        write_topology(&mut w, &self.base);
        w.index(self.levels.len());
        for lv in &self.levels {
            w.index(lv.spec.stride);
            w.index(lv.spec.radius);
            w.index_list(&lv.spec.pinned);
            w.index_list(&lv.selected);
            write_topology(&mut w, &lv.coarse);
            write_map(&mut w, &lv.down);
            write_map(&mut w, &lv.up);
        }
        w.into_inner()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported hierarchy version {version}")));
        }
        let base = read_topology(&mut r)?;
        let depth = r.index()?;
        let mut levels = Vec::with_capacity(depth.min(64));
        let mut fine_len = base.num_vertices();
        for _ in 0..depth {
            let stride = r.index()?;
            let radius = r.index()?;
            let pinned = r.index_list()?;
            let selected = r.index_list()?;
            let coarse = read_topology(&mut r)?;
            let down = read_map(&mut r, Direction::Down, stride, radius)?;
            let up = read_map(&mut r, Direction::Up, stride, radius)?;
            if down.in_vertices() != fine_len
                || down.out_vertices() != selected.len()
                || up.out_vertices() != fine_len
                || up.in_vertices() != selected.len()
                || coarse.num_vertices() != selected.len()
            {
                return Err(Error::Corrupt("level tables disagree on vertex counts".into()));
            }
            fine_len = selected.len();
            levels.push(SamplingLevel {
                spec: LevelSpec { stride, radius, pinned },
                selected,
                coarse,
                down,
                up,
            });
        }
        r.finish()?;
        Ok(SamplingHierarchy { base, levels })
    }

    /// 64-bit hash of the serialized form; ties checkpoints and latent codes
    /// to the hierarchy they were produced with.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(&self.to_bytes())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn write_topology(w: &mut ByteWriter, t: &MeshTopology) {
    let mut offsets = Vec::with_capacity(t.num_vertices() + 1);
    let mut flat = Vec::new();
    offsets.push(0);
    for v in 0..t.num_vertices() {
        flat.extend_from_slice(t.neighbors(v));
        offsets.push(flat.len());
    }
    w.index_list(&offsets);
    w.index_list(&flat);
}

fn read_topology(r: &mut ByteReader) -> Result<MeshTopology> {
    let offsets = r.index_list()?;
    let flat = r.index_list()?;
    if offsets.is_empty() || offsets[0] != 0 || *offsets.last().unwrap() != flat.len() {
        return Err(Error::Corrupt("adjacency offsets are inconsistent".into()));
    }
    let mut adjacency = Vec::with_capacity(offsets.len() - 1);
    for w in offsets.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Corrupt("adjacency offsets decrease".into()));
        }
        adjacency.push(flat[w[0]..w[1]].to_vec());
    }
    MeshTopology::from_adjacency(adjacency).map_err(|e| Error::Corrupt(e.to_string()))
}

fn write_map(w: &mut ByteWriter, m: &SamplingMap) {
    w.index(m.in_vertices());
    w.index_list(m.table().offsets());
    w.index_list(m.table().indices());
}

fn read_map(r: &mut ByteReader, direction: Direction, stride: usize, radius: usize) -> Result<SamplingMap> {
    let in_len = r.index()?;
    let offsets = r.index_list()?;
    let indices = r.index_list()?;
    let table = RaggedTable::from_csr(in_len, offsets, indices).map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(SamplingMap::new(direction, stride, radius, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> MeshTopology {
        MeshTopology::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn path_hierarchy() -> SamplingHierarchy {
        let specs = [LevelSpec::new(2, 1).pinned(vec![0]), LevelSpec::new(2, 1).pinned(vec![0])];
        build_hierarchy(&path(5), &specs, 0).unwrap()
    }

    #[test]
    fn path_level_sizes() {
        let h = path_hierarchy();
        assert_eq!(h.vertices_at(0), 5);
        assert_eq!(h.vertices_at(1), 3);
        assert_eq!(h.vertices_at(2), 2);
        assert_eq!(h.anchor(1), 4);
    }

    #[test]
    fn single_level_receptive_field() {
        let h = build_hierarchy(&path(5), &[LevelSpec::new(2, 1).pinned(vec![0])], 0).unwrap();
        assert_eq!(receptive_field(&h, 0).unwrap().vertices, vec![0, 1]);
        assert_eq!(receptive_field(&h, 1).unwrap().vertices, vec![1, 2, 3]);
        let wide = build_hierarchy(&path(5), &[LevelSpec::new(2, 9)], 0).unwrap();
        assert_eq!(receptive_field(&wide, 0).unwrap().vertices, vec![0, 1, 2, 3, 4]);
        assert!(receptive_field(&h, 3).is_err());
    }

    #[test]
    fn bytes_round_trip() {
        let h = path_hierarchy();
        let bytes = h.to_bytes();
        let back = SamplingHierarchy::from_bytes(&bytes).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.fingerprint(), h.fingerprint());
    }

    #[test]
    fn truncated_bytes_are_corrupt() {
        let bytes = path_hierarchy().to_bytes();
        for cut in [0, 3, 8, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(SamplingHierarchy::from_bytes(&bytes[..cut]), Err(Error::Corrupt(_))));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(SamplingHierarchy::from_bytes(&bad).is_err());
    }

    #[test]
    fn empty_spec_list_rejected() {
        assert!(matches!(build_hierarchy(&path(3), &[], 0), Err(Error::Config(_))));
    }
}
