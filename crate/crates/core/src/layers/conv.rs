use rand::Rng;

use super::{check_input, uniform_tensor};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::sampling::{Direction, SamplingMap};

/// Guard against dividing by a vanishing basis norm.
pub const BASIS_NORM_EPS: f64 = 1e-12;

/// Spatially varying convolution whose per-neighbor kernels are mixtures of a
/// shared weight basis.
///
/// For output vertex `i` and neighbor slot `j`, the kernel is
/// `W(i,j) = Σₖ α(i,j,k) Bₖ` and the output is `yᵢ = Σⱼ W(i,j)ᵀ x_{i,j} + b`.
/// Parameters:
/// - basis `[M, I·O]`, row `k` is `Bₖ` in row-major `I × O` order
/// - coefficients `[ΣEᵢ, M]`, one row per (output, neighbor) slot
/// - bias `[1, O]`
#[derive(Debug, Clone)]
pub struct VcConvLayer {
    pub map: SamplingMap,
    pub in_channels: usize,
    pub out_channels: usize,
    pub basis_size: usize,
    pub normalize_basis: bool,
    pub basis: ParamId,
    pub coeffs: ParamId,
    pub bias: ParamId,
}

impl VcConvLayer {
    /// Basis entries start uniform in `±sqrt(6 / (I·M + O·M))`, the
    /// coefficients of output vertex `i` in `±sqrt(1 / (Eᵢ·M))`, bias at zero.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        map: SamplingMap,
        in_channels: usize,
        out_channels: usize,
        basis_size: usize,
        normalize_basis: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || basis_size == 0 {
            return Err(Error::Config(format!(
                "{name}: channel counts and basis size must be positive (I={in_channels}, O={out_channels}, M={basis_size})"
            )));
        }
        let (i, o, m) = (in_channels, out_channels, basis_size);
        let bound = (6.0 / (i * m + o * m) as f64).sqrt();
        let basis = store.register(format!("{name}.basis"), uniform_tensor(rng, m, i * o, bound));

        let table = map.table();
        let mut coeffs = Vec::with_capacity(table.nnz() * m);
        for row in 0..table.rows() {
            let bound = (1.0 / (table.row_len(row) * m) as f64).sqrt();
            for _ in 0..table.row_len(row) * m {
                coeffs.push(rng.gen_range(-bound..=bound));
            }
        }
        let coeffs = store.register(format!("{name}.coeffs"), Tensor::matrix(table.nnz(), m, coeffs)?);
        let bias = store.register(format!("{name}.bias"), Tensor::zeros(1, o));
        Ok(VcConvLayer {
            map,
            in_channels,
            out_channels,
            basis_size,
            normalize_basis,
            basis,
            coeffs,
            bias,
        })
    }

    /// `I·O·M + M·ΣEᵢ + O`.
    pub fn param_count(&self) -> usize {
        let (i, o, m) = (self.in_channels, self.out_channels, self.basis_size);
        i * o * m + m * self.map.total_neighbors() + o
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.basis, self.coeffs, self.bias]
    }

    /// Synthesized per-slot kernels `[ΣEᵢ, I·O]`.
    pub fn kernels(&self, tape: &mut Tape, store: &ParamStore) -> Result<Var> {
        let mut basis = tape.param(store, self.basis);
        if self.normalize_basis {
            basis = tape.normalize_rows(basis, BASIS_NORM_EPS);
        }
        let coeffs = tape.param(store, self.coeffs);
        tape.matmul(coeffs, basis)
    }

    /// Convolution over the layer's map; `x` stacks whole samples of
    /// `map.in_vertices()` rows each.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        check_input("vcConv", tape.value(x), self.map.in_vertices(), self.in_channels)?;
        let w = self.kernels(tape, store)?;
        let y = tape.ragged_transform(w, x, self.map.table(), self.out_channels)?;
        let b = tape.param(store, self.bias);
        tape.add_bias(y, b)
    }

    /// The same formula over an up-sampling map, producing the finer graph.
    pub fn forward_transposed(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        if self.map.direction != Direction::Up {
            return Err(Error::Config(format!(
                "transpose convolution needs an up-sampling map, got a {} map",
                self.map.direction.as_str()
            )));
        }
        self.forward(tape, store, x)
    }
}

/// Locally connected convolution: a free `I × O` kernel per (output, neighbor)
/// slot. `weights` is `[ΣEᵢ, I·O]`, bias `[1, O]`.
#[derive(Debug, Clone)]
pub struct LcConvLayer {
    pub map: SamplingMap,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: ParamId,
    pub bias: ParamId,
}

impl LcConvLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        map: SamplingMap,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config(format!("{name}: channel counts must be positive")));
        }
        let (i, o) = (in_channels, out_channels);
        let table = map.table();
        let mut w = Vec::with_capacity(table.nnz() * i * o);
        for row in 0..table.rows() {
            let bound = (6.0 / (table.row_len(row) * i + o) as f64).sqrt();
            for _ in 0..table.row_len(row) * i * o {
                w.push(rng.gen_range(-bound..=bound));
            }
        }
        let weights = store.register(format!("{name}.weights"), Tensor::matrix(table.nnz(), i * o, w)?);
        let bias = store.register(format!("{name}.bias"), Tensor::zeros(1, o));
        Ok(LcConvLayer {
            map,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    /// `I·O·ΣEᵢ + O`.
    pub fn param_count(&self) -> usize {
        self.in_channels * self.out_channels * self.map.total_neighbors() + self.out_channels
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        vec![self.weights, self.bias]
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        check_input("LCConv", tape.value(x), self.map.in_vertices(), self.in_channels)?;
        let w = tape.param(store, self.weights);
        let y = tape.ragged_transform(w, x, self.map.table(), self.out_channels)?;
        let b = tape.param(store, self.bias);
        tape.add_bias(y, b)
    }
}
