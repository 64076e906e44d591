use std::sync::Arc;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::features_to_tensor;
use crate::mesh::{MeshTopology, VertexFeatures};
use crate::sampling::RaggedTable;

/// Uniform graph Laplacian `Δxᵢ = xᵢ - (1/deg i) Σ_{j ∈ adj(i)} xⱼ` as a
/// ragged weighted sum. Isolated vertices map to themselves.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    table: Arc<RaggedTable>,
    weights: Tensor,
}

impl LaplacianOperator {
    pub fn new(topology: &MeshTopology) -> Self {
        let n = topology.num_vertices();
        let mut rows = Vec::with_capacity(n);
        let mut weights = Vec::new();
        for v in 0..n {
            let nbrs = topology.neighbors(v);
            let mut row = Vec::with_capacity(nbrs.len() + 1);
            row.push(v);
            weights.push(1.0);
            row.extend_from_slice(nbrs);
            let w = -1.0 / nbrs.len().max(1) as f64;
            weights.extend(std::iter::repeat_n(w, nbrs.len()));
            rows.push(row);
        }
        LaplacianOperator {
            table: Arc::new(RaggedTable::from_rows(n, &rows).expect("topology rows are valid")),
            weights: Tensor::column(weights),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.table.rows()
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.leaf(self.weights.clone());
        tape.ragged_weighted_sum(w, x, &self.table)
    }
}

fn check_same(op: &'static str, tape: &Tape, a: Var, b: Var) -> Result<()> {
    let (ta, tb) = (tape.value(a), tape.value(b));
    if !ta.same_shape(tb) {
        return Err(Error::InvalidInput(format!(
            "{op}: prediction {:?} vs target {:?}",
            ta.shape(),
            tb.shape()
        )));
    }
    Ok(())
}

/// Mean absolute error over all vertices, channels and stacked samples.
pub fn l1_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    check_same("loss_l1", tape, pred, target)?;
    let d = tape.sub(pred, target)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}

/// Mean absolute difference between the Laplacians of prediction and target.
pub fn laplacian_loss(tape: &mut Tape, pred: Var, target: Var, lap: &LaplacianOperator) -> Result<Var> {
    check_same("loss_laplacian", tape, pred, target)?;
    let d = tape.sub(pred, target)?;
    let ld = lap.apply(tape, d)?;
    let a = tape.abs(ld);
    Ok(tape.mean(a))
}

pub fn loss_l1(pred: &VertexFeatures, target: &VertexFeatures) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.leaf(features_to_tensor(pred));
    let t = tape.leaf(features_to_tensor(target));
    let l = l1_loss(&mut tape, p, t)?;
    Ok(tape.value(l).data()[0])
}

pub fn loss_laplacian(pred: &VertexFeatures, target: &VertexFeatures, topology: &MeshTopology) -> Result<f64> {
    if pred.num_vertices() != topology.num_vertices() {
        return Err(Error::InvalidInput(format!(
            "loss_laplacian: {} rows for a {}-vertex topology",
            pred.num_vertices(),
            topology.num_vertices()
        )));
    }
    let mut tape = Tape::new();
    let p = tape.leaf(features_to_tensor(pred));
    let t = tape.leaf(features_to_tensor(target));
    let l = laplacian_loss(&mut tape, p, t, &LaplacianOperator::new(topology))?;
    Ok(tape.value(l).data()[0])
}

/// Mean over vertices of the Euclidean distance between matching rows.
pub fn mean_euclidean_error(pred: &VertexFeatures, target: &VertexFeatures) -> Result<f64> {
    if pred.num_vertices() != target.num_vertices() || pred.channels() != target.channels() {
        return Err(Error::InvalidInput("prediction and target shapes differ".into()));
    }
    let n = pred.num_vertices().max(1) as f64;
    Ok((0..pred.num_vertices())
        .map(|v| {
            pred.row(v)
                .iter()
                .zip(target.row(v))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n)
}
