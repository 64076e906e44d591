//! Topology-driven graph down/up-sampling with stride and radius control.
//!
//! Vertices are selected so that no two chosen vertices lie within `s - 1`
//! hops of each other while every vertex stays within `s - 1` hops of a chosen
//! one. The coarse graph connects chosen vertices whose fine-graph distance is
//! at most `2s - 1`. Convolution neighborhoods are `r`-rings, recorded as
//! ragged tables.

mod hierarchy;
mod table;

pub use hierarchy::{
    build_hierarchy, receptive_field, LevelSpec, LevelSummary, ReceptiveField, SamplingHierarchy, SamplingLevel,
};
pub use table::RaggedTable;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{connected_components, Bfs, MeshTopology};

/// Whether a map coarsens (fine → coarse) or refines (coarse → fine).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

/// Neighborhood table for one sampling step: row `i` lists the input-graph
/// vertices that feed output vertex `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMap {
    pub direction: Direction,
    pub stride: usize,
    pub radius: usize,
    table: Arc<RaggedTable>,
}

impl SamplingMap {
    pub fn new(direction: Direction, stride: usize, radius: usize, table: RaggedTable) -> Self {
        SamplingMap {
            direction,
            stride,
            radius,
            table: Arc::new(table),
        }
    }

    pub fn table(&self) -> &Arc<RaggedTable> {
        &self.table
    }

    pub fn in_vertices(&self) -> usize {
        self.table.in_len()
    }

    pub fn out_vertices(&self) -> usize {
        self.table.rows()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        self.table.row(i)
    }

    /// `ΣEᵢ`, the number of (output, neighbor) slots.
    pub fn total_neighbors(&self) -> usize {
        self.table.nnz()
    }

    pub fn mean_neighbors(&self) -> f64 {
        self.table.nnz() as f64 / self.table.rows().max(1) as f64
    }

    pub fn max_neighbors(&self) -> usize {
        self.table.max_row_len()
    }

    /// `(output, input)` incidence pairs.
    pub fn incidence(&self) -> Vec<(usize, usize)> {
        (0..self.out_vertices())
            .flat_map(|i| self.row(i).iter().map(move |&j| (i, j)))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Unmarked,
    Selected,
    Removed,
}

struct Selector<'a> {
    bfs: Bfs<'a>,
    marks: Vec<Mark>,
    stride: usize,
}

impl Selector<'_> {
    fn select(&mut self, v: usize) {
        self.marks[v] = Mark::Selected;
        let marks = &mut self.marks;
        self.bfs.walk(v, self.stride - 1, |u, _| {
            if marks[u] == Mark::Unmarked {
                marks[u] = Mark::Removed;
            }
        });
    }

    fn free_of_selected(&mut self, v: usize) -> bool {
        let marks = &self.marks;
        !self.bfs.any_within(v, self.stride - 1, |u| marks[u] == Mark::Selected)
    }

    fn s_ring(&mut self, v: usize) -> Vec<usize> {
        let s = self.stride;
        let mut ring = Vec::new();
        self.bfs.walk(v, s, |u, d| {
            if d == s {
                ring.push(u);
            }
        });
        ring.sort_unstable();
        ring
    }

    /// Grows the selection outward from the queued vertices.
    fn flood(&mut self, queue: &mut std::collections::VecDeque<usize>) {
        while let Some(v) = queue.pop_front() {
            for u in self.s_ring(v) {
                if self.marks[u] == Mark::Unmarked && self.free_of_selected(u) {
                    self.select(u);
                    queue.push_back(u);
                }
            }
        }
    }
}

/// Chooses the vertices that survive down-sampling with stride `stride`.
///
/// Pinned vertices are selected before the traversal starts. Each connected
/// component without a pinned vertex starts from a vertex drawn with `seed`.
/// The result is sorted ascending.
pub fn select_vertices(topology: &MeshTopology, stride: usize, pinned: &[usize], seed: u64) -> Result<Vec<usize>> {
    let n = topology.num_vertices();
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let mut pins = pinned.to_vec();
    pins.sort_unstable();
    pins.dedup();
    if let Some(&bad) = pins.iter().find(|&&p| p >= n) {
        return Err(Error::InvalidInput(format!("pinned vertex {bad} is outside 0..{n}")));
    }
    if stride == 1 {
        return Ok((0..n).collect());
    }
    let mut selector = Selector {
        bfs: Bfs::new(topology),
        marks: vec![Mark::Unmarked; n],
        stride,
    };
    for &p in &pins {
        let clash = {
            let marks = &selector.marks;
            let mut hit = None;
            selector.bfs.walk(p, stride - 1, |u, _| {
                if marks[u] == Mark::Selected && hit.is_none() {
                    hit = Some(u);
                }
            });
            hit
        };
        if let Some(q) = clash {
            return Err(Error::InvalidInput(format!(
                "pinned vertices {q} and {p} are closer than the stride {stride}"
            )));
        }
        selector.select(p);
    }

    let labels = connected_components(topology);
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); count];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queue = std::collections::VecDeque::new();
    for comp in &members {
        queue.extend(comp.iter().copied().filter(|&v| selector.marks[v] == Mark::Selected));
        if queue.is_empty() {
            let start = comp[rng.gen_range(0..comp.len())];
            selector.select(start);
            queue.push_back(start);
        }
        selector.flood(&mut queue);
        // Unreachable for connected components, kept so coverage holds unconditionally.
        while let Some(&v) = comp.iter().find(|&&v| selector.marks[v] == Mark::Unmarked) {
            selector.select(v);
            queue.push_back(v);
            selector.flood(&mut queue);
        }
    }
    Ok((0..n).filter(|&v| selector.marks[v] == Mark::Selected).collect())
}

/// Coarse graph over `selected`: two selected vertices are adjacent when their
/// fine-graph distance is at most `2s - 1`.
pub fn build_coarse_topology(topology: &MeshTopology, selected: &[usize], stride: usize) -> Result<MeshTopology> {
    let n = topology.num_vertices();
    let mut coarse_index = vec![usize::MAX; n];
    for (c, &v) in selected.iter().enumerate() {
        if v >= n {
            return Err(Error::InvalidInput(format!("selected vertex {v} is outside 0..{n}")));
        }
        coarse_index[v] = c;
    }
    let reach = (2 * stride).saturating_sub(1);
    let mut bfs = Bfs::new(topology);
    let mut adjacency = Vec::with_capacity(selected.len());
    for (a, &v) in selected.iter().enumerate() {
        let mut row = Vec::new();
        bfs.walk(v, reach, |u, _| {
            let b = coarse_index[u];
            if b != usize::MAX && b != a {
                row.push(b);
            }
        });
        row.sort_unstable();
        adjacency.push(row);
    }
    MeshTopology::from_adjacency(adjacency)
}

/// Down-sampling neighborhoods: row `i` is the sorted `r`-ring of the `i`-th
/// selected vertex in the fine graph.
pub fn build_down_map(fine: &MeshTopology, selected: &[usize], stride: usize, radius: usize) -> Result<SamplingMap> {
    if selected.is_empty() {
        return Err(Error::Config("down map needs at least one selected vertex".into()));
    }
    let mut bfs = Bfs::new(fine);
    let rows: Vec<Vec<usize>> = selected.iter().map(|&v| bfs.ring(v, radius)).collect();
    Ok(SamplingMap::new(
        Direction::Down,
        stride,
        radius,
        RaggedTable::from_rows(fine.num_vertices(), &rows)?,
    ))
}

/// Up-sampling neighborhoods: row `y` lists the coarse indices of the selected
/// vertices inside the fine vertex's `r`-ring.
pub fn build_up_map(fine: &MeshTopology, selected: &[usize], stride: usize, radius: usize) -> Result<SamplingMap> {
    if selected.is_empty() {
        return Err(Error::Config("up map needs at least one selected vertex".into()));
    }
    let n = fine.num_vertices();
    let mut coarse_index = vec![usize::MAX; n];
    for (c, &v) in selected.iter().enumerate() {
        coarse_index[v] = c;
    }
    let mut bfs = Bfs::new(fine);
    let mut rows = Vec::with_capacity(n);
    for y in 0..n {
        let mut row: Vec<usize> = bfs
            .ring(y, radius)
            .into_iter()
            .map(|u| coarse_index[u])
            .filter(|&c| c != usize::MAX)
            .collect();
        row.sort_unstable();
        if row.is_empty() {
            return Err(Error::Config(format!(
                "fine vertex {y} has no selected vertex within radius {radius} (stride {stride}); use r >= s - 1"
            )));
        }
        rows.push(row);
    }
    Ok(SamplingMap::new(
        Direction::Up,
        stride,
        radius,
        RaggedTable::from_rows(selected.len(), &rows)?,
    ))
}
