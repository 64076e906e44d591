//! Parameter-free average and max (un)pooling baselines.

use super::check_input;
use super::density::expect_direction;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::sampling::{Direction, SamplingMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Average,
    Max,
}

fn average(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    let c = tape.value(x).cols();
    check_input("avgPool", tape.value(x), map.in_vertices(), c)?;
    let table = map.table();
    let mut w = Vec::with_capacity(table.nnz());
    for i in 0..table.rows() {
        let n = table.row_len(i);
        w.extend(std::iter::repeat_n(1.0 / n as f64, n));
    }
    let w = tape.leaf(Tensor::column(w));
    tape.ragged_weighted_sum(w, x, table)
}

fn maximum(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    let c = tape.value(x).cols();
    check_input("maxPool", tape.value(x), map.in_vertices(), c)?;
    tape.ragged_max(x, map.table())
}

pub fn avg_pool(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    expect_direction(map, Direction::Down, "avgPool")?;
    average(tape, map, x)
}

pub fn max_pool(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    expect_direction(map, Direction::Down, "maxPool")?;
    maximum(tape, map, x)
}

pub fn avg_unpool(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    expect_direction(map, Direction::Up, "avgUnpool")?;
    average(tape, map, x)
}

pub fn max_unpool(tape: &mut Tape, map: &SamplingMap, x: Var) -> Result<Var> {
    expect_direction(map, Direction::Up, "maxUnpool")?;
    maximum(tape, map, x)
}

/// Pooling in either direction, chosen by the map.
pub fn pool(tape: &mut Tape, kind: PoolKind, map: &SamplingMap, x: Var) -> Result<Var> {
    match kind {
        PoolKind::Average => average(tape, map, x),
        PoolKind::Max => maximum(tape, map, x),
    }
}
