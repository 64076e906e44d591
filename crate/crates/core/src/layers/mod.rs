//! Mesh layers: variant-coefficient convolution and its transpose, the locally
//! connected baseline, variant-density (un)pooling and residual layers, and
//! parameter-free average/max pooling.
//!
//! Every layer takes a `[batch · N_in, channels]` tape value whose rows stack
//! whole samples and returns `[batch · N_out, out_channels]`.

mod conv;
mod density;
mod pool;

pub use conv::{LcConvLayer, VcConvLayer, BASIS_NORM_EPS};
pub use density::{VdResLayer, VdWeights};
pub use pool::{avg_pool, avg_unpool, max_pool, max_unpool, pool, PoolKind};

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::mesh::VertexFeatures;
use crate::sampling::SamplingMap;

/// Common surface for parameter accounting.
pub trait Layer {
    /// Trainable scalar count from the layer's closed-form formula.
    fn param_count(&self) -> usize;
    /// Parameters the layer registered, in registration order.
    fn param_ids(&self) -> Vec<ParamId>;
}

impl Layer for VcConvLayer {
    fn param_count(&self) -> usize {
        VcConvLayer::param_count(self)
    }
    fn param_ids(&self) -> Vec<ParamId> {
        VcConvLayer::param_ids(self)
    }
}

impl Layer for LcConvLayer {
    fn param_count(&self) -> usize {
        LcConvLayer::param_count(self)
    }
    fn param_ids(&self) -> Vec<ParamId> {
        LcConvLayer::param_ids(self)
    }
}

impl Layer for VdWeights {
    fn param_count(&self) -> usize {
        VdWeights::param_count(self)
    }
    fn param_ids(&self) -> Vec<ParamId> {
        vec![self.density]
    }
}

impl Layer for VdResLayer {
    fn param_count(&self) -> usize {
        VdResLayer::param_count(self)
    }
    fn param_ids(&self) -> Vec<ParamId> {
        VdResLayer::param_ids(self)
    }
}

pub(crate) fn uniform_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

pub(crate) fn check_input(layer: &str, x: &Tensor, vertices: usize, channels: usize) -> Result<()> {
    if x.cols() != channels || vertices == 0 || !x.rows().is_multiple_of(vertices) || x.rows() == 0 {
        return Err(Error::InvalidInput(format!(
            "{layer} expects {channels} channels over a multiple of {vertices} vertices, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

pub fn features_to_tensor(x: &VertexFeatures) -> Tensor {
    Tensor::matrix(x.num_vertices(), x.channels(), x.values().to_vec()).unwrap()
}

pub fn tensor_to_features(t: &Tensor) -> Result<VertexFeatures> {
    VertexFeatures::new(t.rows(), t.cols(), t.data().to_vec())
}

fn run(x: &VertexFeatures, f: impl FnOnce(&mut Tape, Var) -> Result<Var>) -> Result<VertexFeatures> {
    let mut tape = Tape::new();
    let input = tape.leaf(features_to_tensor(x));
    let out = f(&mut tape, input)?;
    tensor_to_features(tape.value(out))
}

pub fn vc_conv_forward(layer: &VcConvLayer, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| layer.forward(t, store, v))
}

pub fn vc_trans_conv_forward(layer: &VcConvLayer, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| layer.forward_transposed(t, store, v))
}

pub fn lc_conv_forward(layer: &LcConvLayer, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| layer.forward(t, store, v))
}

pub fn vd_pool_forward(vd: &VdWeights, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| vd.pool(t, store, v))
}

pub fn vd_unpool_forward(vd: &VdWeights, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| vd.unpool(t, store, v))
}

pub fn vd_res_forward(layer: &VdResLayer, store: &ParamStore, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| layer.forward(t, store, v))
}

pub fn pool_forward(kind: PoolKind, map: &SamplingMap, x: &VertexFeatures) -> Result<VertexFeatures> {
    run(x, |t, v| pool(t, kind, map, v))
}
