//! Mesh and graph ingestion plus the topology queries the sampling code is
//! built on: k-rings, bounded BFS distances, connected components and
//! component bridging.

mod io;

pub use io::{
    load_cell_file, load_obj, obj_text, parse_cell_text, parse_obj, read_obj_mesh, write_obj, ObjMesh,
};

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Undirected graph over mesh vertices.
///
/// Neighbor lists are sorted, deduplicated, symmetric and free of self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    adjacency: Vec<Vec<usize>>,
}

impl MeshTopology {
    /// A graph with `num_vertices` vertices and no edges.
    pub fn empty(num_vertices: usize) -> Self {
        MeshTopology {
            adjacency: vec![Vec::new(); num_vertices],
        }
    }

    /// Builds a topology from an undirected edge list. Self-loops are rejected,
    /// duplicate edges collapse.
    pub fn from_edges(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_vertices];
        for (a, b) in edges {
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{num_vertices}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on vertex {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
        }
        Ok(MeshTopology { adjacency })
    }

    /// Validates and adopts explicit neighbor lists.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        for (i, row) in adjacency.iter().enumerate() {
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidInput(format!(
                        "neighbor list of vertex {i} is not strictly increasing"
                    )));
                }
            }
            for &j in row {
                if j >= n {
                    return Err(Error::InvalidInput(format!("vertex {i} lists neighbor {j} >= {n}")));
                }
                if j == i {
                    return Err(Error::InvalidInput(format!("self-loop on vertex {i}")));
                }
                if adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidInput(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(MeshTopology { adjacency })
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Each edge once, as `(low, high)`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }
}

/// Builds a topology in which every cell induces a clique among its vertices.
///
/// Triangles contribute 3 edges, tetrahedra 6, general polygons all of their
/// vertex pairs.
pub fn build_topology_from_cells<C: AsRef<[usize]>>(num_vertices: usize, cells: &[C]) -> Result<MeshTopology> {
    let mut edges = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let cell = cell.as_ref();
        if cell.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "cell {c} has {} vertices, at least 2 are required",
                cell.len()
            )));
        }
        for &v in cell {
            if v >= num_vertices {
                return Err(Error::InvalidInput(format!(
                    "cell {c} references vertex {v}, but the mesh has {num_vertices} vertices"
                )));
            }
        }
        for (a, &u) in cell.iter().enumerate() {
            for &w in &cell[a + 1..] {
                if u != w {
                    edges.push((u, w));
                }
            }
        }
    }
    MeshTopology::from_edges(num_vertices, edges)
}

/// Per-vertex real-valued features, row-major `num_vertices × channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFeatures {
    num_vertices: usize,
    channels: usize,
    values: Vec<f64>,
    /// Free-form label of what the channels mean, e.g. `position-xyz`.
    pub semantics: String,
}

impl VertexFeatures {
    pub fn new(num_vertices: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_vertices * channels {
            return Err(Error::InvalidInput(format!(
                "feature buffer has {} values, expected {num_vertices}x{channels}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at vertex {}, channel {}",
                pos / channels.max(1),
                pos % channels.max(1)
            )));
        }
        Ok(VertexFeatures {
            num_vertices,
            channels,
            values,
            semantics: String::new(),
        })
    }

    pub fn positions(values: Vec<[f64; 3]>) -> Result<Self> {
        let n = values.len();
        let mut f = Self::new(n, 3, values.into_iter().flatten().collect())?;
        f.semantics = "position-xyz".to_string();
        Ok(f)
    }

    pub fn zeros(num_vertices: usize, channels: usize) -> Self {
        VertexFeatures {
            num_vertices,
            channels,
            values: vec![0.0; num_vertices * channels],
            semantics: String::new(),
        }
    }

    pub fn with_semantics(mut self, semantics: impl Into<String>) -> Self {
        self.semantics = semantics.into();
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.values[v * self.channels..(v + 1) * self.channels]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.values[v * self.channels..(v + 1) * self.channels]
    }

    /// Position of vertex `v` when the features are 3-channel.
    pub fn point(&self, v: usize) -> [f64; 3] {
        let r = self.row(v);
        [r[0], r[1], r[2]]
    }
}

/// Train/validation/test membership of a dataset sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// A registered-mesh dataset: many feature matrices over one shared topology.
#[derive(Debug, Clone)]
pub struct MeshDataset {
    pub topology: MeshTopology,
    pub samples: Vec<VertexFeatures>,
    pub splits: Vec<Split>,
}

impl MeshDataset {
    pub fn new(topology: MeshTopology, samples: Vec<VertexFeatures>, splits: Vec<Split>) -> Result<Self> {
        if samples.len() != splits.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples but {} split labels",
                samples.len(),
                splits.len()
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.num_vertices() != topology.num_vertices() {
                return Err(Error::InvalidInput(format!(
                    "sample {k} has {} vertices, topology has {}",
                    s.num_vertices(),
                    topology.num_vertices()
                )));
            }
            if s.channels() != samples[0].channels() {
                return Err(Error::InvalidInput(format!("sample {k} has a different channel count")));
            }
        }
        Ok(MeshDataset {
            topology,
            samples,
            splits,
        })
    }

    /// Every sample in the training split.
    pub fn all_train(topology: MeshTopology, samples: Vec<VertexFeatures>) -> Result<Self> {
        let splits = vec![Split::Train; samples.len()];
        Self::new(topology, samples, splits)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Reusable breadth-first search state. Visit marks are generation-stamped so
/// repeated bounded searches do not pay for clearing the whole graph.
pub struct Bfs<'a> {
    topology: &'a MeshTopology,
    stamp: Vec<u32>,
    dist: Vec<usize>,
    generation: u32,
    queue: VecDeque<usize>,
}

impl<'a> Bfs<'a> {
    pub fn new(topology: &'a MeshTopology) -> Self {
        Bfs {
            topology,
            stamp: vec![0; topology.num_vertices()],
            dist: vec![0; topology.num_vertices()],
            generation: 0,
            queue: VecDeque::new(),
        }
    }

    /// Visits every vertex within `max_depth` hops of `source` in BFS order,
    /// passing `(vertex, distance)` to `visit`. Neighbors expand in ascending
    /// index order.
    pub fn walk(&mut self, source: usize, max_depth: usize, mut visit: impl FnMut(usize, usize)) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let g = self.generation;
        self.queue.clear();
        self.stamp[source] = g;
        self.dist[source] = 0;
        self.queue.push_back(source);
        while let Some(v) = self.queue.pop_front() {
            let d = self.dist[v];
            visit(v, d);
            if d == max_depth {
                continue;
            }
            for &u in self.topology.neighbors(v) {
                if self.stamp[u] != g {
                    self.stamp[u] = g;
                    self.dist[u] = d + 1;
                    self.queue.push_back(u);
                }
            }
        }
    }

    /// Sorted vertex set within `k` hops of `v`, including `v`.
    pub fn ring(&mut self, v: usize, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(v, k, |u, _| out.push(u));
        out.sort_unstable();
        out
    }

    /// True when some vertex within `k` hops of `v` satisfies `pred`.
    pub fn any_within(&mut self, v: usize, k: usize, mut pred: impl FnMut(usize) -> bool) -> bool {
        let mut found = false;
        self.walk(v, k, |u, _| found |= pred(u));
        found
    }
}

/// All vertices at graph distance `<= k` from `v`, sorted ascending.
pub fn k_ring(topology: &MeshTopology, v: usize, k: usize) -> Vec<usize> {
    Bfs::new(topology).ring(v, k)
}

/// Unbounded hop distances from `source`; `None` for unreachable vertices.
pub fn bfs_distances(topology: &MeshTopology, source: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; topology.num_vertices()];
    Bfs::new(topology).walk(source, usize::MAX, |u, d| out[u] = Some(d));
    out
}

/// Component label per vertex, numbered `0..C` in order of each component's
/// lowest vertex index.
pub fn connected_components(topology: &MeshTopology) -> Vec<usize> {
    let n = topology.num_vertices();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &u in topology.neighbors(v) {
                if label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

pub fn component_count(labels: &[usize]) -> usize {
    labels.iter().copied().max().map_or(0, |m| m + 1)
}

/// Connects components that lie within `threshold` of each other.
///
/// Each pass adds one edge per close component pair, joining the closest
/// vertex pair (ties go to the lexicographically lowest index pair). Passes
/// repeat until the graph is connected or no two components are close.
pub fn bridge_components(topology: &MeshTopology, positions: &VertexFeatures, threshold: f64) -> Result<MeshTopology> {
    if positions.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "bridging needs 3-channel positions, got {} channels",
            positions.channels()
        )));
    }
    if positions.num_vertices() != topology.num_vertices() {
        return Err(Error::InvalidInput(format!(
            "{} positions for {} vertices",
            positions.num_vertices(),
            topology.num_vertices()
        )));
    }
    let n = topology.num_vertices();
    let mut current = topology.clone();
    loop {
        let labels = connected_components(&current);
        let count = component_count(&labels);
        if count <= 1 {
            return Ok(current);
        }
        // best[(a, b)] = (squared distance, low vertex, high vertex)
        let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; count * count];
        for u in 0..n {
            let pu = positions.point(u);
            for v in u + 1..n {
                let (a, b) = (labels[u], labels[v]);
                if a == b {
                    continue;
                }
                let pv = positions.point(v);
                let d2 = (pu[0] - pv[0]).powi(2) + (pu[1] - pv[1]).powi(2) + (pu[2] - pv[2]).powi(2);
                let key = a.min(b) * count + a.max(b);
                let better = match best[key] {
                    None => true,
                    Some((bd, bu, bv)) => d2 < bd || (d2 == bd && (u, v) < (bu, bv)),
                };
                if better {
                    best[key] = Some((d2, u, v));
                }
            }
        }
        let limit = threshold * threshold;
        let new_edges: Vec<(usize, usize)> = best
            .iter()
            .flatten()
            .filter(|(d2, _, _)| *d2 <= limit)
            .map(|&(_, u, v)| (u, v))
            .collect();
        if new_edges.is_empty() {
            return Ok(current);
        }
        current = MeshTopology::from_edges(n, current.edges().chain(new_edges))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> MeshTopology {
        MeshTopology::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn single_triangle_adjacency() {
        let t = build_topology_from_cells(3, &[[0, 1, 2]]).unwrap();
        assert_eq!(t.adjacency(), &[vec![1, 2], vec![0, 2], vec![0, 1]]);
    }

    #[test]
    fn tetrahedron_is_complete_graph() {
        let t = build_topology_from_cells(4, &[[0, 1, 2, 3]]).unwrap();
        for v in 0..4 {
            assert_eq!(t.degree(v), 3);
        }
        assert_eq!(t.num_edges(), 6);
    }

    #[test]
    fn two_triangles_sharing_a_vertex() {
        let t = build_topology_from_cells(5, &[[0, 1, 2], [2, 3, 4]]).unwrap();
        let degrees: Vec<usize> = (0..5).map(|v| t.degree(v)).collect();
        assert_eq!(degrees, vec![2, 2, 4, 2, 2]);
    }

    #[test]
    fn cell_errors() {
        assert!(matches!(
            build_topology_from_cells(3, &[vec![0, 1, 5]]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            build_topology_from_cells(3, &[vec![0]]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn from_adjacency_rejects_asymmetry() {
        assert!(MeshTopology::from_adjacency(vec![vec![1], vec![]]).is_err());
        assert!(MeshTopology::from_adjacency(vec![vec![1], vec![0]]).is_ok());
    }

    #[test]
    fn k_ring_on_path() {
        let p = path(4);
        assert_eq!(k_ring(&p, 0, 0), vec![0]);
        assert_eq!(k_ring(&p, 0, 1), vec![0, 1]);
        assert_eq!(k_ring(&p, 1, 2), vec![0, 1, 2, 3]);
    }

    #[test]
    fn components() {
        let two = build_topology_from_cells(6, &[[0, 1, 2], [3, 4, 5]]).unwrap();
        assert_eq!(connected_components(&two), vec![0, 0, 0, 1, 1, 1]);
        let iso = MeshTopology::empty(5);
        assert_eq!(component_count(&connected_components(&iso)), 5);
    }

    fn two_triangles(offset: f64) -> (MeshTopology, VertexFeatures) {
        let t = build_topology_from_cells(6, &[[0, 1, 2], [3, 4, 5]]).unwrap();
        let p = VertexFeatures::positions(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0 + offset, 0.0, 0.0],
            [2.0 + offset, 0.0, 0.0],
            [1.0 + offset, 1.0, 0.0],
        ])
        .unwrap();
        (t, p)
    }

    #[test]
    fn bridge_close_triangles() {
        let (t, p) = two_triangles(0.1);
        let b = bridge_components(&t, &p, 0.5).unwrap();
        assert_eq!(b.num_edges(), t.num_edges() + 1);
        assert!(b.has_edge(1, 3));
        assert_eq!(component_count(&connected_components(&b)), 1);
    }

    #[test]
    fn bridge_far_triangles_unchanged() {
        let (t, p) = two_triangles(10.0);
        assert_eq!(bridge_components(&t, &p, 0.5).unwrap(), t);
        let connected = build_topology_from_cells(3, &[[0, 1, 2]]).unwrap();
        let pos = VertexFeatures::positions(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(bridge_components(&connected, &pos, 100.0).unwrap(), connected);
    }

    #[test]
    fn bridge_requires_three_channels() {
        let t = MeshTopology::empty(2);
        let f = VertexFeatures::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(bridge_components(&t, &f, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn features_reject_non_finite() {
        assert!(VertexFeatures::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(VertexFeatures::new(1, 2, vec![0.0]).is_err());
    }
}
